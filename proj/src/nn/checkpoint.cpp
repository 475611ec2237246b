#include "e2d/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "e2d/detail/binary.hpp"
#include "e2d/error.hpp"

namespace e2d::nn {

using e2d::detail::get_le;
using e2d::detail::put_le;

void write_checkpoint(std::ostream& out, const NamedTensors& tensors) {
  out.write("E2DW", 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) put_le<std::uint64_t>(out, d);
    for (double v : tensor.data()) put_le<double>(out, v);
  }
  if (!out) throw IoError("failed writing checkpoint");
}

void write_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, tensors);
}

NamedTensors read_checkpoint(std::istream& in) {
  e2d::detail::expect_magic(in, "E2DW", "checkpoint");
  const auto version = get_le<std::uint32_t>(in, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(in, "checkpoint tensor count");
  NamedTensors tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint32_t>(in, "tensor name length");
    if (len > 4096) throw IoError("implausible tensor name length " + std::to_string(len));
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw IoError("truncated tensor name");
    const auto rank = get_le<std::uint32_t>(in, "tensor rank");
    if (rank > 8) throw IoError("tensor " + name + " has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get_le<std::uint64_t>(in, "tensor dims"));
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = get_le<double>(in, "tensor payload");
    tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return tensors;
}

NamedTensors read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void load_into(const NamedTensors& stored, NamedTensors& targets) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : stored) by_name[name] = &t;
  if (by_name.size() != targets.size()) {
    throw ShapeError("checkpoint holds " + std::to_string(by_name.size()) +
                     " tensors, model expects " + std::to_string(targets.size()));
  }
  for (auto& [name, target] : targets) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw ShapeError("checkpoint is missing tensor " + name);
    if (it->second->shape() != target.shape()) {
      throw ShapeError("tensor " + name + " has shape " + shape_string(it->second->shape()) +
                       " in checkpoint, model expects " + shape_string(target.shape()));
    }
    const auto src = it->second->data();
    std::copy(src.begin(), src.end(), target.mutable_data().begin());
  }
}

}  // namespace e2d::nn
