#include "statenet/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace statenet {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string canonical_key(std::string_view key) {
  std::string k = trim(key);
  std::replace(k.begin(), k.end(), '_', '-');
  return k;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view text) {
  const auto t = trim(text);
  Int value{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("invalid integer for " + std::string(key) + ": '" + t + "'");
  return value;
}

double parse_double(std::string_view key, std::string_view text) {
  const auto t = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("invalid number for " + std::string(key) + ": '" + t + "'");
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const auto t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("invalid boolean for " + std::string(key) + ": '" + t + "'");
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

std::vector<std::size_t> parse_widths(std::string_view key, std::string_view text) {
  std::vector<std::size_t> widths;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) widths.push_back(parse_int<std::size_t>(key, item));
  return widths;
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> keys;
  auto add = [&](std::string name, std::string help, auto get, auto set, bool boolean = false) {
    keys.push_back({std::move(name), std::move(help), boolean, get, set});
  };
  // Paths and splits.
  add("data", "dataset root containing <split>/<class>/*.ppm (env STATENET_DATA)",
      [](const RunConfig& c) { return c.data_root.string(); },
      [](RunConfig& c, std::string_view v) { c.data_root = trim(v); });
  add("out", "output directory (default: runs/<timestamp>)",
      [](const RunConfig& c) { return c.out_dir.string(); },
      [](RunConfig& c, std::string_view v) { c.out_dir = trim(v); });
  add("train-split", "training split directory name",
      [](const RunConfig& c) { return c.train_split; },
      [](RunConfig& c, std::string_view v) { c.train_split = trim(v); });
  add("val-split", "validation split directory name",
      [](const RunConfig& c) { return c.val_split; },
      [](RunConfig& c, std::string_view v) { c.val_split = trim(v); });

  // Model.
  add("input-size", "square input side in pixels (multiple of 64)",
      [](const RunConfig& c) { return std::to_string(c.model.input_size); },
      [](RunConfig& c, std::string_view v) { c.model.input_size = parse_int<std::size_t>("input-size", v); });
  add("conv-widths", "comma-separated filter counts of the six conv stages",
      [](const RunConfig& c) {
        std::string s;
        for (std::size_t i = 0; i < c.model.conv_widths.size(); ++i)
          s += (i ? "," : "") + std::to_string(c.model.conv_widths[i]);
        return s;
      },
      [](RunConfig& c, std::string_view v) { c.model.conv_widths = parse_widths("conv-widths", v); });
  add("fc-hidden", "units in the hidden fully connected layer",
      [](const RunConfig& c) { return std::to_string(c.model.fc_hidden); },
      [](RunConfig& c, std::string_view v) { c.model.fc_hidden = parse_int<std::size_t>("fc-hidden", v); });
  add("dropout", "dropout factor after the hidden fully connected layer",
      [](const RunConfig& c) { return fmt(c.model.dropout_factor); },
      [](RunConfig& c, std::string_view v) { c.model.dropout_factor = parse_double("dropout", v); });

  // Optimization.
  add("optimizer", "sgd | adam | asgd",
      [](const RunConfig& c) { return to_string(c.hyper.optimizer.kind); },
      [](RunConfig& c, std::string_view v) { c.hyper.optimizer.kind = parse_optimizer(trim(v)); });
  add("learning-rate", "base learning rate",
      [](const RunConfig& c) { return fmt(c.hyper.schedule.base_lr); },
      [](RunConfig& c, std::string_view v) { c.hyper.schedule.base_lr = parse_double("learning-rate", v); });
  add("momentum", "SGD momentum",
      [](const RunConfig& c) { return fmt(c.hyper.optimizer.momentum); },
      [](RunConfig& c, std::string_view v) { c.hyper.optimizer.momentum = parse_double("momentum", v); });
  add("adam-beta1", "Adam first-moment decay",
      [](const RunConfig& c) { return fmt(c.hyper.optimizer.adam_beta1); },
      [](RunConfig& c, std::string_view v) { c.hyper.optimizer.adam_beta1 = parse_double("adam-beta1", v); });
  add("adam-beta2", "Adam second-moment decay",
      [](const RunConfig& c) { return fmt(c.hyper.optimizer.adam_beta2); },
      [](RunConfig& c, std::string_view v) { c.hyper.optimizer.adam_beta2 = parse_double("adam-beta2", v); });
  add("adam-epsilon", "Adam denominator epsilon",
      [](const RunConfig& c) { return fmt(c.hyper.optimizer.adam_epsilon); },
      [](RunConfig& c, std::string_view v) { c.hyper.optimizer.adam_epsilon = parse_double("adam-epsilon", v); });
  add("asgd-start", "optimizer step at which ASGD starts averaging",
      [](const RunConfig& c) { return std::to_string(c.hyper.optimizer.asgd_start); },
      [](RunConfig& c, std::string_view v) { c.hyper.optimizer.asgd_start = parse_int<std::uint64_t>("asgd-start", v); });
  add("batch-size", "training minibatch size",
      [](const RunConfig& c) { return std::to_string(c.hyper.batch_size); },
      [](RunConfig& c, std::string_view v) { c.hyper.batch_size = parse_int<std::size_t>("batch-size", v); });
  add("eval-batch-size", "batch size for evaluation passes",
      [](const RunConfig& c) { return std::to_string(c.hyper.eval_batch_size); },
      [](RunConfig& c, std::string_view v) { c.hyper.eval_batch_size = parse_int<std::size_t>("eval-batch-size", v); });
  add("epochs", "number of training epochs",
      [](const RunConfig& c) { return std::to_string(c.hyper.epochs); },
      [](RunConfig& c, std::string_view v) { c.hyper.epochs = parse_int<int>("epochs", v); });
  add("seed", "global random seed",
      [](const RunConfig& c) { return std::to_string(c.hyper.seed); },
      [](RunConfig& c, std::string_view v) { c.hyper.seed = parse_int<std::uint64_t>("seed", v); });
  add("deterministic", "use the configured seed (false draws a fresh one)",
      [](const RunConfig& c) { return fmt(c.deterministic); },
      [](RunConfig& c, std::string_view v) { c.deterministic = parse_bool("deterministic", v); }, true);
  add("snapshot-interval", "write a snapshot checkpoint every N epochs (0 disables)",
      [](const RunConfig& c) { return std::to_string(c.hyper.snapshot_interval); },
      [](RunConfig& c, std::string_view v) { c.hyper.snapshot_interval = parse_int<int>("snapshot-interval", v); });
  add("fixed-epochs", "epochs trained at the base learning rate",
      [](const RunConfig& c) { return std::to_string(c.hyper.schedule.fixed_epochs); },
      [](RunConfig& c, std::string_view v) { c.hyper.schedule.fixed_epochs = parse_int<int>("fixed-epochs", v); });
  add("decay-interval", "epochs between learning-rate decays",
      [](const RunConfig& c) { return std::to_string(c.hyper.schedule.decay_interval); },
      [](RunConfig& c, std::string_view v) { c.hyper.schedule.decay_interval = parse_int<int>("decay-interval", v); });
  add("decay-factor", "multiplier applied at each decay",
      [](const RunConfig& c) { return fmt(c.hyper.schedule.decay_factor); },
      [](RunConfig& c, std::string_view v) { c.hyper.schedule.decay_factor = parse_double("decay-factor", v); });
  add("decay-boundary", "after-fixed (decay at 51,61,..) | end-of-interval (60,70,..)",
      [](const RunConfig& c) { return to_string(c.hyper.schedule.boundary); },
      [](RunConfig& c, std::string_view v) { c.hyper.schedule.boundary = parse_decay_boundary(trim(v)); });
  add("clean-train-pass", "report train metrics from a clean inference pass",
      [](const RunConfig& c) { return fmt(c.hyper.clean_train_pass); },
      [](RunConfig& c, std::string_view v) { c.hyper.clean_train_pass = parse_bool("clean-train-pass", v); }, true);

  // Input pipeline.
  add("normalize", "standardize (train-set mean/std) | unit (raw [0,1])",
      [](const RunConfig& c) { return to_string(c.norm_mode); },
      [](RunConfig& c, std::string_view v) { c.norm_mode = parse_norm_mode(trim(v)); });
  add("max-rotation", "maximum rotation in degrees",
      [](const RunConfig& c) { return fmt(c.augment.max_rotation_degrees); },
      [](RunConfig& c, std::string_view v) { c.augment.max_rotation_degrees = parse_double("max-rotation", v); });
  add("max-shift", "maximum shift as a fraction of the image side",
      [](const RunConfig& c) { return fmt(c.augment.max_shift_fraction); },
      [](RunConfig& c, std::string_view v) { c.augment.max_shift_fraction = parse_double("max-shift", v); });
  add("crop-padding", "edge padding in pixels before the random crop",
      [](const RunConfig& c) { return std::to_string(c.augment.crop_padding); },
      [](RunConfig& c, std::string_view v) { c.augment.crop_padding = parse_int<std::size_t>("crop-padding", v); });
  add("flip-probability", "probability of a horizontal flip",
      [](const RunConfig& c) { return fmt(c.augment.flip_probability); },
      [](RunConfig& c, std::string_view v) { c.augment.flip_probability = parse_double("flip-probability", v); });
  add("augment-rotate", "enable random rotation",
      [](const RunConfig& c) { return fmt(c.augment.rotate); },
      [](RunConfig& c, std::string_view v) { c.augment.rotate = parse_bool("augment-rotate", v); }, true);
  add("augment-shift", "enable random shift",
      [](const RunConfig& c) { return fmt(c.augment.shift); },
      [](RunConfig& c, std::string_view v) { c.augment.shift = parse_bool("augment-shift", v); }, true);
  add("augment-crop", "enable pad-and-random-crop",
      [](const RunConfig& c) { return fmt(c.augment.crop); },
      [](RunConfig& c, std::string_view v) { c.augment.crop = parse_bool("augment-crop", v); }, true);
  add("augment-flip", "enable random horizontal flip",
      [](const RunConfig& c) { return fmt(c.augment.flip); },
      [](RunConfig& c, std::string_view v) { c.augment.flip = parse_bool("augment-flip", v); }, true);
  return keys;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  hyper.validate();
  augment.validate();
  if (train_split.empty() || val_split.empty()) throw ConfigError("split names must be non-empty");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

const ConfigKey& find_config_key(std::string_view name) {
  const auto key = canonical_key(name);
  for (const auto& k : config_keys())
    if (k.name == key) return k;
  throw ConfigError("unknown config key '" + std::string(name) + "'");
}

void apply_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  find_config_key(key).set(cfg, value);
}

void parse_config_text(RunConfig& cfg, std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    try {
      apply_config_value(cfg, std::string_view(line).substr(0, eq),
                         std::string_view(line).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  parse_config_text(cfg, buffer.str(), path.string());
}

std::string render_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& key : config_keys()) out += key.name + " = " + key.get(cfg) + "\n";
  return out;
}

}  // namespace statenet
