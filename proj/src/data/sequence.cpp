#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "e2d/dataset.hpp"
#include "e2d/error.hpp"
#include "e2d/event_io.hpp"

namespace e2d {

namespace fs = std::filesystem;

namespace {

std::string indexed_name(std::size_t index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu.%s", index, ext);
  return buf;
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::string depth_file_name(std::size_t index) { return indexed_name(index, "dpt"); }
std::string frame_file_name(std::size_t index) { return indexed_name(index, "pgm"); }

SequenceManifest load_sequence(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("sequence directory " + root.string() + " not found");
  const fs::path manifest_path = root / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw IoError("sequence " + root.string() + " has no manifest.json");
  }
  const auto j = read_json_file(manifest_path);

  SequenceManifest m;
  m.root = root;
  try {
    m.name = j.value("name", root.filename().string());
    m.split = j.value("split", std::string("train"));
    m.width = j.at("width").get<std::size_t>();
    m.height = j.at("height").get<std::size_t>();
    m.fps = j.value("fps", 0.0);
    m.timestamps_us = j.at("timestamps_us").get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  }
  if (m.width == 0 || m.height == 0) throw IoError(manifest_path.string() + ": zero sensor size");
  for (std::size_t i = 1; i < m.timestamps_us.size(); ++i) {
    if (m.timestamps_us[i] <= m.timestamps_us[i - 1]) {
      throw IoError(manifest_path.string() + ": timestamps not strictly increasing at index " +
                    std::to_string(i));
    }
  }

  m.events_file = root / "events.evt1";
  if (!fs::exists(m.events_file)) throw IoError("missing event file " + m.events_file.string());
  const SensorSize sensor = read_evt1_sensor(m.events_file);
  if (sensor.width != m.width || sensor.height != m.height) {
    throw IoError(m.events_file.string() + ": sensor " + std::to_string(sensor.width) + "x" +
                  std::to_string(sensor.height) + " differs from manifest " +
                  std::to_string(m.width) + "x" + std::to_string(m.height));
  }

  const bool has_frames = fs::is_directory(root / "frames");
  for (std::size_t i = 0; i < m.timestamps_us.size(); ++i) {
    const fs::path depth = root / "depth" / depth_file_name(i);
    if (!fs::exists(depth)) throw IoError("missing depth file " + depth.string());
    const auto [w, h] = read_dpt1_dims(depth);
    if (w != m.width || h != m.height) {
      throw IoError("depth file " + depth.string() + " is " + std::to_string(w) + "x" +
                    std::to_string(h) + ", manifest says " + std::to_string(m.width) + "x" +
                    std::to_string(m.height));
    }
    m.depth_files.push_back(depth);
    if (has_frames) {
      const fs::path frame = root / "frames" / frame_file_name(i);
      if (!fs::exists(frame)) throw IoError("missing frame file " + frame.string());
      m.frame_files.push_back(frame);
    }
  }
  // Leftover depth files mean the manifest undercounts.
  if (fs::exists(root / "depth" / depth_file_name(m.timestamps_us.size()))) {
    throw IoError("sequence " + root.string() + " has more depth files than manifest timestamps");
  }
  return m;
}

void write_sequence(const fs::path& root, const std::string& name, const std::string& split,
                    double fps, const std::vector<std::uint64_t>& timestamps_us,
                    const std::vector<Image>& depth_m, const std::vector<Event>& events,
                    SensorSize sensor, const std::vector<Image>& frames) {
  if (depth_m.size() != timestamps_us.size()) {
    throw ShapeError("write_sequence: depth count differs from timestamp count");
  }
  if (!frames.empty() && frames.size() != timestamps_us.size()) {
    throw ShapeError("write_sequence: frame count differs from timestamp count");
  }
  fs::create_directories(root / "depth");
  for (std::size_t i = 0; i < depth_m.size(); ++i) write_dpt1(root / "depth" / depth_file_name(i), depth_m[i]);
  if (!frames.empty()) {
    fs::create_directories(root / "frames");
    for (std::size_t i = 0; i < frames.size(); ++i) write_pgm(root / "frames" / frame_file_name(i), frames[i]);
  }
  write_evt1(root / "events.evt1", EventFile{sensor, events});
  nlohmann::ordered_json j;
  j["name"] = name;
  j["split"] = split;
  j["width"] = sensor.width;
  j["height"] = sensor.height;
  j["fps"] = fps;
  j["timestamps_us"] = timestamps_us;
  std::ofstream out(root / "manifest.json");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + (root / "manifest.json").string());
}

DatasetSplit read_split(const fs::path& dataset_root) {
  const auto j = read_json_file(dataset_root / "split.json");
  DatasetSplit split;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key != "train" && key != "val" && key != "test") {
        throw IoError("split.json: unknown split \"" + key + "\"");
      }
      split[key] = value.get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("split.json: ") + e.what());
  }
  return split;
}

void write_split(const fs::path& dataset_root, const DatasetSplit& split) {
  fs::create_directories(dataset_root);
  nlohmann::ordered_json j;
  for (const auto& [key, names] : split) j[key] = names;
  std::ofstream out(dataset_root / "split.json");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing split.json");
}

}  // namespace e2d
