#include "app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "e2d/checkpoint.hpp"
#include "e2d/error.hpp"
#include "e2d/event_io.hpp"
#include "e2d/synthetic.hpp"
#include "json.hpp"

namespace e2d::app {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

/// Bad invocation: missing inputs, mismatched file sets.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::size_t as_size(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) throw ConfigError(key + " expects a non-negative integer");
  return v.get<std::size_t>();
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key + " expects a number");
  return v.get<double>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError(key + " expects true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key + " expects a string");
  return v.get<std::string>();
}

std::vector<Stage> parse_stages(const json& v) {
  if (!v.is_array()) throw ConfigError("train.stages expects an array");
  std::vector<Stage> stages;
  for (const json& s : v) {
    Stage stage;
    stage.name = s.value("name", "stage" + std::to_string(stages.size()));
    stage.epochs = as_size(s.value("epochs", json(1u)), "train.stages[].epochs");
    if (!s.contains("sources") || !s["sources"].is_array() || s["sources"].empty()) {
      throw ConfigError("stage '" + stage.name + "' needs a non-empty sources array");
    }
    for (const json& src : s["sources"]) {
      StageSource source;
      source.dataset = as_string(src.value("dataset", json()), "train.stages[].sources[].dataset");
      source.weight = as_size(src.value("weight", json(1u)), "train.stages[].sources[].weight");
      stage.sources.push_back(std::move(source));
    }
    stages.push_back(std::move(stage));
  }
  return stages;
}

using Setter = std::function<void(AppConfig&, const json&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"model.num_encoders", [](AppConfig& c, const json& v, const std::string& k) { c.model.num_encoders = as_size(v, k); }},
      {"model.num_residual_blocks", [](AppConfig& c, const json& v, const std::string& k) { c.model.num_residual_blocks = as_size(v, k); }},
      {"model.base_channels", [](AppConfig& c, const json& v, const std::string& k) { c.model.base_channels = as_size(v, k); }},
      {"model.input_bins", [](AppConfig& c, const json& v, const std::string& k) { c.model.input_bins = as_size(v, k); }},
      {"model.encoder_norm",
       [](AppConfig& c, const json& v, const std::string& k) {
         const std::string s = as_string(v, k);
         if (s == "before_lstm") c.model.encoder_norm = EncoderNormPlacement::kBeforeLstm;
         else if (s == "after_lstm") c.model.encoder_norm = EncoderNormPlacement::kAfterLstm;
         else throw ConfigError(k + " must be before_lstm or after_lstm");
       }},
      {"train.learning_rate", [](AppConfig& c, const json& v, const std::string& k) { c.train.learning_rate = as_double(v, k); }},
      {"train.batch_size", [](AppConfig& c, const json& v, const std::string& k) { c.train.batch_size = as_size(v, k); }},
      {"train.unroll_length",
       [](AppConfig& c, const json& v, const std::string& k) {
         c.train.unroll_length = as_size(v, k);
         c.model.unroll_length = c.train.unroll_length;
       }},
      {"train.lambda", [](AppConfig& c, const json& v, const std::string& k) { c.train.lambda = as_double(v, k); }},
      {"train.epochs", [](AppConfig& c, const json& v, const std::string& k) { c.train.epochs = as_size(v, k); }},
      {"train.seed", [](AppConfig& c, const json& v, const std::string& k) { c.train.seed = as_size(v, k); }},
      {"train.checkpoint_every", [](AppConfig& c, const json& v, const std::string& k) { c.train.checkpoint_every = as_size(v, k); }},
      {"train.clip_norm",
       [](AppConfig& c, const json& v, const std::string& k) {
         if (v.is_null()) c.train.clip_norm.reset();
         else c.train.clip_norm = as_double(v, k);
       }},
      {"train.augment", [](AppConfig& c, const json& v, const std::string& k) { c.train.augment = as_bool(v, k); }},
      {"train.crop_width", [](AppConfig& c, const json& v, const std::string& k) { c.train.augment_options.crop_width = as_size(v, k); }},
      {"train.crop_height", [](AppConfig& c, const json& v, const std::string& k) { c.train.augment_options.crop_height = as_size(v, k); }},
      {"train.flip_probability", [](AppConfig& c, const json& v, const std::string& k) { c.train.augment_options.flip_probability = as_double(v, k); }},
      {"train.gradient_scales", [](AppConfig& c, const json& v, const std::string& k) { c.train.gradient.scales = as_size(v, k); }},
      {"train.gradient_normalization",
       [](AppConfig& c, const json& v, const std::string& k) {
         const std::string s = as_string(v, k);
         if (s == "global") c.train.gradient.normalization = GradientNormalization::kGlobal;
         else if (s == "per_scale") c.train.gradient.normalization = GradientNormalization::kPerScale;
         else throw ConfigError(k + " must be global or per_scale");
       }},
      {"train.adam_beta1", [](AppConfig& c, const json& v, const std::string& k) { c.train.adam.beta1 = as_double(v, k); }},
      {"train.adam_beta2", [](AppConfig& c, const json& v, const std::string& k) { c.train.adam.beta2 = as_double(v, k); }},
      {"train.adam_eps", [](AppConfig& c, const json& v, const std::string& k) { c.train.adam.eps = as_double(v, k); }},
      {"train.stages", [](AppConfig& c, const json& v, const std::string&) { c.stages = parse_stages(v); }},
      {"data.d_max", [](AppConfig& c, const json& v, const std::string& k) { c.data.postprocess.d_max = as_double(v, k); }},
      {"data.alpha", [](AppConfig& c, const json& v, const std::string& k) { c.data.postprocess.alpha = as_double(v, k); }},
      {"data.invalid_as_max_depth", [](AppConfig& c, const json& v, const std::string& k) { c.data.invalid_as_max_depth = as_bool(v, k); }},
      {"simulator.contrast_threshold", [](AppConfig& c, const json& v, const std::string& k) { c.simulator.contrast_threshold = as_double(v, k); }},
      {"simulator.upsample_factor",
       [](AppConfig& c, const json& v, const std::string& k) { c.simulator.upsample_factor = static_cast<int>(as_size(v, k)); }},
      {"simulator.log_eps", [](AppConfig& c, const json& v, const std::string& k) { c.simulator.log_eps = as_double(v, k); }},
      {"simulator.refractory_us", [](AppConfig& c, const json& v, const std::string& k) { c.simulator.refractory_us = as_size(v, k); }},
  };
  return table;
}

void set_value(AppConfig& config, const std::string& key, const json& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(config, value, key);
}

void require_exists(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw UsageError(what + " not found: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

void finalize(AppConfig& config) {
  config.model.unroll_length = config.train.unroll_length;
  config.data.bins = config.model.input_bins;
  config.data.divisor = config.model.spatial_divisor();
  config.train.augment_options.divisor = config.data.divisor;
  config.model.validate();
  config.train.validate();
  config.data.postprocess.validate();
  config.simulator.validate();
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const AppConfig& config,
                           bool seed_in_config) {
  if (flag) return *flag;
  if (seed_in_config) return config.train.seed;
  if (const char* env = std::getenv("E2D_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("E2D_SEED is not an unsigned integer: ") + env);
  }
  return 0;
}

// Simulate.

int cmd_simulate(const fs::path& frames_dir, const fs::path& out_path, std::optional<double> fps,
                 const AppConfig& config, std::ostream& out) {
  require_exists(frames_dir, "frames directory");
  if (!fs::is_directory(frames_dir)) throw UsageError("not a directory: " + frames_dir.string());
  const auto files = files_with_extension(frames_dir, ".pgm");
  if (files.size() < 2) throw UsageError("need at least two .pgm frames in " + frames_dir.string());
  std::vector<Image> frames;
  double peak = 0.0;
  for (const auto& f : files) {
    frames.push_back(read_pgm(f));
    for (double v : frames.back().pixels) peak = std::max(peak, v);
  }
  // Raw counts to unit intensity; 16-bit data is recognized by its range.
  const double full_scale = peak > 255.0 ? 65535.0 : 255.0;
  for (Image& f : frames) {
    for (double& v : f.pixels) v /= full_scale;
  }
  std::vector<std::uint64_t> timestamps;
  const fs::path ts_file = frames_dir / "timestamps.txt";
  if (fs::exists(ts_file)) {
    std::ifstream in(ts_file);
    std::uint64_t t = 0;
    while (in >> t) timestamps.push_back(t);
    if (!in.eof()) throw UsageError("malformed timestamp in " + ts_file.string());
    if (timestamps.size() != frames.size()) {
      throw UsageError(ts_file.string() + " lists " + std::to_string(timestamps.size()) +
                       " timestamps for " + std::to_string(frames.size()) + " frames");
    }
  } else {
    if (!fps || !(*fps > 0.0)) throw UsageError("no timestamps.txt in " + frames_dir.string() + "; pass --fps");
    for (std::size_t i = 0; i < frames.size(); ++i) {
      timestamps.push_back(static_cast<std::uint64_t>(std::llround(static_cast<double>(i) * 1e6 / *fps)));
    }
  }
  EventFile file;
  file.sensor = {static_cast<std::uint16_t>(frames[0].width), static_cast<std::uint16_t>(frames[0].height)};
  file.events = simulate_events(frames, timestamps, config.simulator);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_evt1(out_path, file);
  const double seconds = static_cast<double>(timestamps.back() - timestamps.front()) * 1e-6;
  ordered_json j;
  j["events"] = file.events.size();
  j["duration_s"] = seconds;
  j["rate_ev_per_s"] = seconds > 0.0 ? static_cast<double>(file.events.size()) / seconds : 0.0;
  j["output"] = out_path.string();
  out << j.dump() << '\n';
  return kOk;
}

// Encode.

int cmd_encode(const fs::path& events_path, const fs::path& out_path, std::uint64_t window_us,
               std::size_t bins, bool normalize, std::ostream& out) {
  require_exists(events_path, "event file");
  const EventFile file = read_evt1(events_path);
  const auto windows = window_events(file.events, window_us);
  nn::NamedTensors grids;
  char name[32];
  for (std::size_t i = 0; i < windows.size(); ++i) {
    VoxelGrid g = encode_voxel_grid(windows[i], bins, file.sensor.height, file.sensor.width);
    if (normalize) g = normalize_voxel_grid(std::move(g));
    std::snprintf(name, sizeof name, "window.%06zu", i);
    grids.emplace_back(name, to_tensor(g));
  }
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  nn::write_checkpoint(out_path, grids);
  ordered_json j;
  j["windows"] = windows.size();
  j["bins"] = bins;
  j["height"] = file.sensor.height;
  j["width"] = file.sensor.width;
  j["output"] = out_path.string();
  out << j.dump() << '\n';
  return kOk;
}

// Train.

int cmd_train(const std::optional<fs::path>& data, AppConfig& config, const fs::path& out_dir,
              bool resume, std::ostream& out) {
  if (config.stages.empty()) {
    if (!data) throw UsageError("train needs --data or train.stages");
    require_exists(*data, "dataset");
    config.stages.push_back({"main", {{*data, 1}}, config.train.epochs});
  }
  for (const Stage& s : config.stages) {
    for (const StageSource& src : s.sources) require_exists(src.dataset, "dataset");
  }
  if (resume) require_exists(out_dir / "progress.json", "checkpoint");
  fs::create_directories(out_dir);
  // Without augmentation every input has the cropped sequence size; record it
  // so predict can reject data of another size.
  if (!config.train.augment && config.model.input_height == 0 && config.model.input_width == 0) {
    const StageSource& src = config.stages.front().sources.front();
    const DatasetSplit split = read_split(src.dataset);
    const auto train = split.find("train");
    if (train != split.end() && !train->second.empty()) {
      const SequenceManifest m = load_sequence(src.dataset / train->second.front());
      const CropBox box = center_crop_box(m.width, m.height, config.model.spatial_divisor());
      config.model.input_height = box.height;
      config.model.input_width = box.width;
    }
  }
  Network net(config.model, config.train.seed);
  std::ofstream log(out_dir / "train_log.jsonl", resume ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + (out_dir / "train_log.jsonl").string());
  const RunResult result = run_training(net, config.stages, config.train, config.data, out_dir,
                                        resume, &log);
  ordered_json j;
  j["steps"] = result.progress.step;
  if (!result.epochs.empty() && !result.epochs.front().records.empty()) {
    j["first_loss"] = result.epochs.front().records.front().loss;
    j["last_loss"] = result.epochs.back().records.back().loss;
  }
  if (result.validation) {
    j["validation"] = ordered_json::parse(to_json(*result.validation));
    std::ofstream m(out_dir / "metrics.json");
    m << to_json(*result.validation) << '\n';
  }
  out << j.dump() << '\n';
  return kOk;
}

// Predict.

int cmd_predict(const fs::path& checkpoint, const fs::path& sequence, const fs::path& out_dir,
                AppConfig& config, std::ostream& out) {
  require_exists(checkpoint / "model.json", "checkpoint");
  require_exists(sequence / "manifest.json", "sequence manifest");
  Network net = load_network(checkpoint);
  SampleOptions opts = config.data;
  opts.bins = net.config().input_bins;
  opts.divisor = net.config().spatial_divisor();
  const SequenceManifest manifest = load_sequence(sequence);
  const std::vector<Sample> samples = make_samples(manifest, opts);
  if (samples.empty()) throw UsageError("sequence " + sequence.string() + " yields no sample");
  net.check_input_dims(samples[0].depth.height, samples[0].depth.width);
  const auto maps = predict_sequence(net, samples);
  fs::create_directories(out_dir);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const std::size_t w = samples[k].depth.width, h = samples[k].depth.height;
    Image depth(w, h), render(w, h);
    const auto metric = denormalize_depth(maps[k], opts.postprocess);
    for (std::size_t i = 0; i < metric.size(); ++i) {
      depth.pixels[i] = metric[i];
      render.pixels[i] = 255.0 * maps[k][i];  // normalized log depth is already log-scaled
    }
    const std::size_t index = samples[k].frame_index;
    write_dpt1(out_dir / depth_file_name(index), depth);
    write_pgm(out_dir / frame_file_name(index), render);
  }
  ordered_json j;
  j["predictions"] = samples.size();
  j["height"] = samples[0].depth.height;
  j["width"] = samples[0].depth.width;
  j["output"] = out_dir.string();
  out << j.dump() << '\n';
  return kOk;
}

// Eval.

Image center_crop(const Image& img, std::size_t w, std::size_t h) {
  if (img.width == w && img.height == h) return img;
  if (img.width < w || img.height < h) {
    throw ShapeError("ground truth " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                     " is smaller than prediction " + std::to_string(w) + "x" + std::to_string(h));
  }
  const std::size_t x0 = (img.width - w) / 2, y0 = (img.height - h) / 2;
  Image out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) out.at(x, y) = img.at(x0 + x, y0 + y);
  }
  return out;
}

int cmd_eval(const fs::path& pred_dir, fs::path gt_dir, const std::vector<double>& cutoffs,
             const std::string& filter, bool subset, const std::optional<fs::path>& csv,
             std::ostream& out) {
  require_exists(pred_dir, "prediction directory");
  require_exists(gt_dir, "ground-truth directory");
  if (fs::exists(gt_dir / "manifest.json")) gt_dir /= "depth";
  const auto preds = files_with_extension(pred_dir, ".dpt");
  if (preds.empty()) throw UsageError("no .dpt prediction in " + pred_dir.string());
  const auto gts = files_with_extension(gt_dir, ".dpt");
  if (!subset && gts.size() != preds.size()) {
    throw UsageError(std::to_string(preds.size()) + " predictions but " + std::to_string(gts.size()) +
                     " ground-truth files (pass --subset to evaluate a subset)");
  }
  std::vector<double> p_all, g_all;
  std::vector<std::uint8_t> mask;
  for (const auto& p : preds) {
    const fs::path g = gt_dir / p.filename();
    if (!fs::exists(g)) throw UsageError("missing ground-truth file: " + g.string());
    const Image pred = read_dpt1(p);
    const Image gt = center_crop(read_dpt1(g), pred.width, pred.height);
    for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
      p_all.push_back(pred.pixels[i]);
      g_all.push_back(gt.pixels[i]);
      mask.push_back(std::isfinite(gt.pixels[i]) && gt.pixels[i] > 0.0 && std::isfinite(pred.pixels[i]) &&
                     pred.pixels[i] > 0.0);
    }
  }
  CutoffFilter f = CutoffFilter::kGroundTruth;
  if (filter == "pred") f = CutoffFilter::kPrediction;
  else if (filter != "gt") throw UsageError("--cutoff-filter must be gt or pred");
  const MetricReport report = compute_metrics(p_all, g_all, mask, cutoffs, f);
  out << to_json(report) << '\n';
  if (csv) {
    if (csv->has_parent_path()) fs::create_directories(csv->parent_path());
    std::ofstream c(*csv);
    if (!c) throw IoError("cannot write " + csv->string());
    c << csv_header(report) << '\n' << csv_row(report) << '\n';
  }
  return kOk;
}

// Info.

std::string magic_of(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  char m[4] = {};
  in.read(m, 4);
  return in ? std::string(m, 4) : std::string();
}

int cmd_info(const fs::path& path, std::ostream& out) {
  require_exists(path, "path");
  ordered_json j;
  j["path"] = path.string();
  if (fs::is_directory(path)) {
    if (fs::exists(path / "model.json")) {
      const Network net = load_network(path);
      j["kind"] = "checkpoint";
      j["model"] = ordered_json::parse(to_json(net.config()));
      j["parameters"] = net.parameter_count();
      if (fs::exists(path / "progress.json")) j["progress"] = ordered_json::parse(read_text(path / "progress.json"));
    } else if (fs::exists(path / "manifest.json")) {
      const SequenceManifest m = load_sequence(path);
      j["kind"] = "sequence";
      j["name"] = m.name;
      j["split"] = m.split;
      j["width"] = m.width;
      j["height"] = m.height;
      j["fps"] = m.fps;
      j["depth_frames"] = m.frame_count();
      j["has_frames"] = !m.frame_files.empty();
    } else if (fs::exists(path / "split.json")) {
      j["kind"] = "dataset";
      ordered_json s;
      for (const auto& [name, seqs] : read_split(path)) s[name] = seqs;
      j["split"] = s;
    } else {
      throw UsageError("unrecognized directory: " + path.string());
    }
  } else {
    const std::string magic = magic_of(path);
    if (magic == "EVT1") {
      const EventFile f = read_evt1(path);
      j["kind"] = "events";
      j["width"] = f.sensor.width;
      j["height"] = f.sensor.height;
      j["events"] = f.events.size();
      if (!f.events.empty()) {
        j["t_first_us"] = f.events.front().t;
        j["t_last_us"] = f.events.back().t;
        std::size_t pos = 0;
        for (const Event& e : f.events) pos += e.polarity > 0;
        j["positive"] = pos;
        j["negative"] = f.events.size() - pos;
      }
    } else if (magic == "DPT1") {
      const Image d = read_dpt1(path);
      j["kind"] = "depth";
      j["width"] = d.width;
      j["height"] = d.height;
      std::size_t valid = 0;
      double lo = INFINITY, hi = -INFINITY;
      for (double v : d.pixels) {
        if (!std::isfinite(v)) continue;
        ++valid;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      j["valid"] = valid;
      if (valid > 0) {
        j["min_m"] = lo;
        j["max_m"] = hi;
      }
    } else if (magic == "E2DW") {
      const nn::NamedTensors t = nn::read_checkpoint(path);
      j["kind"] = "tensors";
      j["count"] = t.size();
      std::size_t values = 0;
      for (const auto& [name, tensor] : t) values += tensor.numel();
      j["values"] = values;
    } else {
      throw UsageError("unrecognized file: " + path.string());
    }
  }
  out << j.dump(2) << '\n';
  return kOk;
}

// Toy.

int cmd_toy(const fs::path& out_dir, std::size_t sequences, const SyntheticSceneOptions& scene,
            const AppConfig& config, std::ostream& out) {
  write_synthetic_dataset(out_dir, sequences, scene, config.simulator);
  ordered_json j;
  j["sequences"] = sequences;
  j["frames"] = scene.frames;
  j["width"] = scene.width;
  j["height"] = scene.height;
  j["output"] = out_dir.string();
  out << j.dump() << '\n';
  return kOk;
}

}  // namespace

void set_config_value(AppConfig& config, const std::string& key, const std::string& json_value) {
  json v;
  try {
    v = json::parse(json_value);
  } catch (const json::parse_error&) {
    v = json_value;
  }
  set_value(config, key, v);
}

void apply_config_json(AppConfig& config, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object of dotted keys");
  for (const auto& [key, value] : j.items()) set_value(config, key, value);
}

void apply_override(AppConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  set_config_value(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, s] : setters()) keys.push_back(k);
  return keys;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App cli{"Monocular depth from events: simulation, training and evaluation"};
  cli.require_subcommand(1, 1);

  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "JSON file of dotted config keys");
    sub->add_option("--set", overrides, "Override one key: key=value (repeatable)");
  };

  fs::path frames_dir, events_out;
  std::optional<double> fps;
  auto* simulate = cli.add_subcommand("simulate", "Simulate events from a directory of PGM frames");
  simulate->add_option("--frames", frames_dir, "Directory of frames (sorted .pgm, optional timestamps.txt)")->required();
  simulate->add_option("--out", events_out, "Output EVT1 file")->required();
  simulate->add_option("--fps", fps, "Frame rate when timestamps.txt is absent");
  add_config(simulate);

  fs::path encode_in, encode_out;
  std::uint64_t window_us = kDefaultWindowUs;
  std::size_t bins = kDefaultBins;
  bool raw = false;
  auto* encode = cli.add_subcommand("encode", "Encode an EVT1 stream into voxel grids");
  encode->add_option("--events", encode_in, "Input EVT1 file")->required();
  encode->add_option("--out", encode_out, "Output E2DW tensor file")->required();
  encode->add_option("--window-us", window_us, "Window length in microseconds");
  encode->add_option("--bins", bins, "Temporal bins");
  encode->add_flag("--raw", raw, "Skip per-grid normalization");

  std::optional<fs::path> data;
  fs::path train_out;
  bool resume = false;
  auto* train = cli.add_subcommand("train", "Train a network");
  train->add_option("--data", data, "Dataset root with split.json");
  train->add_option("--out", train_out, "Output directory for checkpoints and logs")->required();
  train->add_flag("--resume", resume, "Continue from the checkpoint in --out");
  train->add_option("--seed", seed, "Seed (falls back to train.seed, then E2D_SEED)");
  add_config(train);

  fs::path checkpoint, sequence, predict_out;
  auto* predict = cli.add_subcommand("predict", "Predict depth for a sequence");
  predict->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  predict->add_option("--sequence", sequence, "Sequence directory")->required();
  predict->add_option("--out", predict_out, "Output directory")->required();
  add_config(predict);

  fs::path pred_dir, gt_dir;
  std::vector<double> cutoffs = kDefaultCutoffs;
  std::string filter = "gt";
  bool subset = false;
  std::optional<fs::path> csv;
  auto* eval = cli.add_subcommand("eval", "Compare predicted and ground-truth depth files");
  eval->add_option("--pred", pred_dir, "Directory of predicted .dpt files")->required();
  eval->add_option("--gt", gt_dir, "Directory of ground-truth .dpt files or a sequence")->required();
  eval->add_option("--cutoffs", cutoffs, "Cutoff distances in meters")->delimiter(',');
  eval->add_option("--cutoff-filter", filter, "Apply cutoffs to gt or pred depth");
  eval->add_flag("--subset", subset, "Allow ground-truth files without a prediction");
  eval->add_option("--csv", csv, "Also write the report as CSV");

  fs::path info_path;
  auto* info = cli.add_subcommand("info", "Describe a file, sequence, dataset or checkpoint");
  info->add_option("path", info_path, "Path to inspect")->required();

  fs::path toy_out;
  std::size_t toy_sequences = 2;
  SyntheticSceneOptions scene;
  auto* toy = cli.add_subcommand("toy", "Generate a synthetic toy dataset");
  toy->add_option("--out", toy_out, "Dataset root")->required();
  toy->add_option("--sequences", toy_sequences, "Number of sequences");
  toy->add_option("--width", scene.width, "Frame width");
  toy->add_option("--height", scene.height, "Frame height");
  toy->add_option("--frames", scene.frames, "Depth frames per sequence");
  toy->add_option("--fps", scene.fps, "Frame rate");
  toy->add_option("--objects", scene.objects, "Objects per scene");
  toy->add_flag("--sky", scene.sky, "Add a sky band with invalid depth");
  toy->add_option("--seed", seed, "Seed (falls back to E2D_SEED)");
  add_config(toy);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << cli.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << cli.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    // Help on a subcommand arrives here with a zero exit code.
    if (e.get_exit_code() == 0) {
      cli.exit(e, out, err);
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    AppConfig config;
    if (!config_file.empty()) {
      require_exists(config_file, "config file");
      apply_config_json(config, read_text(config_file));
    }
    bool seed_in_config = false;
    for (const std::string& o : overrides) {
      apply_override(config, o);
      if (o.rfind("train.seed=", 0) == 0) seed_in_config = true;
    }
    if (!config_file.empty()) {
      const json j = json::parse(read_text(config_file));
      seed_in_config = seed_in_config || j.contains("train.seed");
    }
    config.train.seed = resolve_seed(seed, config, seed_in_config);
    finalize(config);

    if (*simulate) return cmd_simulate(frames_dir, events_out, fps, config, out);
    if (*encode) {
      if (bins == 0) throw UsageError("--bins must be positive");
      return cmd_encode(encode_in, encode_out, window_us, bins, !raw, out);
    }
    if (*train) return cmd_train(data, config, train_out, resume, out);
    if (*predict) return cmd_predict(checkpoint, sequence, predict_out, config, out);
    if (*eval) return cmd_eval(pred_dir, gt_dir, cutoffs, filter, subset, csv, out);
    if (*info) return cmd_info(info_path, out);
    if (*toy) {
      scene.seed = config.train.seed;
      return cmd_toy(toy_out, toy_sequences, scene, config, out);
    }
    return kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

}  // namespace e2d::app
