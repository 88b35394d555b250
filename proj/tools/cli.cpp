#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "CLI11.hpp"
#include "statenet/augment.hpp"
#include "statenet/config.hpp"
#include "statenet/dataset.hpp"
#include "statenet/errors.hpp"
#include "statenet/evaluation.hpp"
#include "statenet/model.hpp"
#include "statenet/training.hpp"

namespace statenet::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kDataEnv = "STATENET_DATA";

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + "\"";
}

fs::path timestamped_dir() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&t, &tm);
  std::ostringstream name;
  name << std::put_time(&tm, "%Y%m%d-%H%M%S");
  const fs::path base = fs::path("runs") / name.str();
  fs::path dir = base;
  for (int i = 1; fs::exists(dir); ++i) dir = base.string() + "-" + std::to_string(i);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw DataError("cannot write " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

fs::path data_root_or_env(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kDataEnv); env && *env) return env;
  throw ConfigError(std::string("no data root: pass --data or set ") + kDataEnv);
}

// A packed <split>.sds file next to the split directories takes precedence.
LabeledDataset load_split(const fs::path& root, const std::string& split, std::size_t size) {
  const auto packed = root / (split + ".sds");
  if (fs::is_regular_file(packed)) {
    auto ds = unpack_dataset(packed, split);
    for (auto& s : ds.samples)
      if (s.image.dim(1) != size || s.image.dim(2) != size) s.image = resize_nearest(s.image, size);
    return ds;
  }
  return load_dataset_dir(root, split, size);
}

// Config keys exposed as flags on a subcommand. Precedence:
// defaults < STATENET_DATA < --config file < flags.
class KeyFlags {
 public:
  template <typename Pred>
  void attach(CLI::App& app, Pred include) {
    const RunConfig defaults;
    app.add_option("--config", config_file_, "file of 'key = value' lines (flags override it)");
    for (const auto& key : config_keys()) {
      if (!include(key.name)) continue;
      auto& value = values_.emplace_back();
      CLI::Option* opt = key.boolean ? app.add_flag("--" + key.name, value, key.help)
                                     : app.add_option("--" + key.name, value, key.help);
      const auto shown = key.get(defaults);
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
      if (!shown.empty()) opt->default_str(shown);
      bound_.emplace_back(&key, opt, &value);
    }
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (const char* env = std::getenv(kDataEnv); env && *env) cfg.data_root = env;
    if (!config_file_.empty()) load_config_file(cfg, config_file_);
    for (const auto& [key, opt, value] : bound_)
      if (opt->count() > 0) key->set(cfg, *value);
    return cfg;
  }

 private:
  std::string config_file_;
  std::deque<std::string> values_;
  std::vector<std::tuple<const ConfigKey*, CLI::Option*, std::string*>> bound_;
};

bool is_model_key(const std::string& name) {
  return name == "input-size" || name == "conv-widths" || name == "fc-hidden" || name == "dropout";
}

bool is_augment_key(const std::string& name) {
  return name == "max-rotation" || name == "max-shift" || name == "crop-padding" ||
         name == "flip-probability" || name.rfind("augment-", 0) == 0;
}

void print_epoch(std::ostream& out, const EpochMetrics& m, int epochs) {
  out << "epoch " << m.epoch << "/" << epochs << "  lr " << m.lr << "  train_acc "
      << fixed(m.train_acc, 4) << "  train_loss " << fixed(m.train_loss, 4) << "  val_acc "
      << fixed(m.val_acc, 4) << "  val_loss " << fixed(m.val_loss, 4) << '\n'
      << std::flush;
}

// ---------------------------------------------------------------- train

struct LoadedData {
  LabeledDataset train;
  LabeledDataset val;
};

RunConfig finalize_run_config(RunConfig cfg) {
  cfg.validate();
  if (cfg.data_root.empty())
    throw ConfigError(std::string("no data root: pass --data or set ") + kDataEnv);
  if (!cfg.deterministic) {
    std::random_device rd;
    cfg.hyper.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  return cfg;
}

LoadedData load_train_val(RunConfig& cfg) {
  LoadedData d;
  d.train = load_split(cfg.data_root, cfg.train_split, cfg.model.input_size);
  d.val = load_split(cfg.data_root, cfg.val_split, cfg.model.input_size);
  if (d.train.labels != d.val.labels)
    throw DataError("train and validation splits have different class directories");
  cfg.model.num_classes = d.train.labels.size();
  cfg.model.validate();
  return d;
}

int cmd_train(const KeyFlags& flags, std::ostream& out) {
  RunConfig cfg = finalize_run_config(flags.resolve());
  const auto data = load_train_val(cfg);
  if (cfg.out_dir.empty()) cfg.out_dir = timestamped_dir();
  make_dir(cfg.out_dir);
  write_text(cfg.out_dir / "resolved_config.txt", render_config(cfg));

  out << "train: " << data.train.size() << " samples, val: " << data.val.size() << " samples, "
      << cfg.model.num_classes << " classes\n";
  out << "output: " << cfg.out_dir.string() << '\n';
  Model model = build_statenet(cfg.model, cfg.hyper.seed);
  FitOptions options;
  options.augment = cfg.augment;
  options.norm_mode = cfg.norm_mode;
  options.out_dir = cfg.out_dir;
  options.on_epoch = [&](const EpochMetrics& m) { print_epoch(out, m, cfg.hyper.epochs); };
  const auto result = fit(model, data.train, data.val, cfg.hyper, options);
  out << "final checkpoint: " << result.final_checkpoint.string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------- sweep

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

std::vector<GridAxis> parse_grid(const std::vector<std::string>& specs) {
  static const std::set<std::string> allowed{"optimizer", "batch-size", "dropout", "learning-rate"};
  if (specs.empty()) throw ConfigError("empty grid: pass at least one --grid axis=v1,v2,...");
  std::vector<GridAxis> axes;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("grid axis '" + spec + "' is not axis=values");
    GridAxis axis;
    axis.key = spec.substr(0, eq);
    std::replace(axis.key.begin(), axis.key.end(), '_', '-');
    if (!allowed.count(axis.key))
      throw ConfigError("unsupported grid axis '" + axis.key +
                        "' (optimizer, batch-size, dropout, learning-rate)");
    for (const auto& a : axes)
      if (a.key == axis.key) throw ConfigError("grid axis '" + axis.key + "' given twice");
    std::stringstream values(spec.substr(eq + 1));
    std::string v;
    while (std::getline(values, v, ','))
      if (!v.empty()) axis.values.push_back(v);
    if (axis.values.empty()) throw ConfigError("grid axis '" + axis.key + "' has no values");
    axes.push_back(std::move(axis));
  }
  return axes;
}

int exit_code_of(const std::exception& e) {
  if (dynamic_cast<const DivergenceError*>(&e)) return kDivergence;
  if (dynamic_cast<const ConfigError*>(&e)) return kUsage;
  return kData;
}

int cmd_sweep(const KeyFlags& flags, const std::vector<std::string>& grid, std::ostream& out,
              std::ostream& err) {
  const auto axes = parse_grid(grid);
  RunConfig base = finalize_run_config(flags.resolve());
  const auto data = load_train_val(base);
  if (base.out_dir.empty()) base.out_dir = timestamped_dir();
  make_dir(base.out_dir);
  write_text(base.out_dir / "resolved_config.txt", render_config(base));

  const std::string header =
      "point,optimizer,batch_size,dropout,learning_rate,train_acc,train_loss,val_acc,val_loss,status";
  std::ofstream table(base.out_dir / "sweep.csv", std::ios::trunc);
  if (!table) throw DataError("cannot write " + (base.out_dir / "sweep.csv").string());
  table << header << '\n' << std::flush;
  out << header << '\n';

  std::size_t points = 1;
  for (const auto& a : axes) points *= a.values.size();
  int status = kOk;
  for (std::size_t p = 0; p < points; ++p) {
    RunConfig cfg = base;
    // The first axis varies slowest, so rows follow grid order.
    std::size_t rest = p;
    std::vector<std::size_t> pick(axes.size());
    for (std::size_t a = axes.size(); a-- > 0;) {
      pick[a] = rest % axes[a].values.size();
      rest /= axes[a].values.size();
    }
    char point_name[32];
    std::snprintf(point_name, sizeof point_name, "point_%03zu", p + 1);
    std::string metrics = ",,,";
    std::string outcome = "ok";
    try {
      for (std::size_t a = 0; a < axes.size(); ++a)
        apply_config_value(cfg, axes[a].key, axes[a].values[pick[a]]);
      cfg.validate();
      cfg.out_dir = base.out_dir / point_name;
      Model model = build_statenet(cfg.model, cfg.hyper.seed);
      FitOptions options;
      options.augment = cfg.augment;
      options.norm_mode = cfg.norm_mode;
      options.out_dir = cfg.out_dir;
      const auto result = fit(model, data.train, data.val, cfg.hyper, options);
      const auto& last = result.log.back();
      metrics = fixed(last.train_acc) + ',' + fixed(last.train_loss) + ',' + fixed(last.val_acc) +
                ',' + fixed(last.val_loss);
    } catch (const std::exception& e) {
      outcome = std::string("error: ") + e.what();
      if (status == kOk) status = exit_code_of(e);
      err << point_name << ": " << e.what() << '\n';
    }
    std::ostringstream lr;
    lr << cfg.hyper.schedule.base_lr;
    std::ostringstream dropout;
    dropout << cfg.model.dropout_factor;
    const std::string row = std::to_string(p + 1) + ',' + to_string(cfg.hyper.optimizer.kind) + ',' +
                            std::to_string(cfg.hyper.batch_size) + ',' + dropout.str() + ',' +
                            lr.str() + ',' + metrics + ',' + csv_quote(outcome);
    table << row << '\n' << std::flush;
    out << row << '\n' << std::flush;
  }
  out << "results: " << (base.out_dir / "sweep.csv").string() << '\n';
  return status;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string run_dir;
  std::size_t last = 0;
  std::string data;
  std::string split = "val";
  bool vote = false;
  std::size_t batch_size = 64;
  std::string report_dir;
  std::string export_dir;
  std::string filter;
};

std::vector<fs::path> snapshot_files(const fs::path& run_dir) {
  std::vector<fs::path> found;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(run_dir, ec)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("snapshot_e", 0) == 0 && entry.path().extension() == ".snet")
      found.push_back(entry.path());
  }
  if (ec) throw DataError("cannot list run directory " + run_dir.string());
  std::sort(found.begin(), found.end());
  return found;
}

std::vector<fs::path> checkpoint_paths(const EvalArgs& args) {
  std::vector<fs::path> paths(args.checkpoints.begin(), args.checkpoints.end());
  if (!args.run_dir.empty()) {
    if (args.last == 0) {
      paths.push_back(fs::path(args.run_dir) / "final.snet");
    } else {
      const auto snaps = snapshot_files(args.run_dir);
      if (snaps.size() < args.last)
        throw DataError("run directory has " + std::to_string(snaps.size()) +
                        " snapshots, --last asked for " + std::to_string(args.last));
      paths.insert(paths.end(), snaps.end() - static_cast<std::ptrdiff_t>(args.last), snaps.end());
    }
  } else if (args.last != 0) {
    throw ConfigError("--last needs --run-dir");
  }
  if (paths.empty()) throw ConfigError("no checkpoints given (positional paths or --run-dir)");
  return paths;
}

std::vector<Checkpoint> load_members(const std::vector<fs::path>& paths) {
  std::vector<Checkpoint> members;
  for (const auto& p : paths) {
    auto ck = load_checkpoint(p);
    if (!members.empty()) {
      const auto& first = members.front();
      if (ck.model.config().num_classes != first.model.config().num_classes ||
          ck.meta.class_names != first.meta.class_names)
        throw ConfigError("incompatible checkpoints: " + paths.front().string() + " has " +
                          std::to_string(first.model.config().num_classes) + " classes, " +
                          p.string() + " has " + std::to_string(ck.model.config().num_classes));
      if (ck.model.config().input_size != first.model.config().input_size)
        throw ConfigError("incompatible checkpoints: input sizes differ (" + p.string() + ")");
      if (ck.meta.norm != first.meta.norm)
        throw ConfigError("incompatible checkpoints: normalization statistics differ (" +
                          p.string() + ")");
    }
    members.push_back(std::move(ck));
  }
  return members;
}

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  if (args.batch_size == 0) throw ConfigError("--eval-batch-size must be >= 1");
  if (!args.filter.empty() && args.export_dir.empty())
    throw ConfigError("--filter needs --export-misclassified");
  const auto paths = checkpoint_paths(args);
  const auto members = load_members(paths);
  const auto& lead = members.front();
  const auto ds = load_split(data_root_or_env(args.data), args.split, lead.model.config().input_size);
  if (ds.labels.names() != lead.meta.class_names)
    throw DataError("split '" + args.split + "' classes differ from the checkpoint's classes");
  std::optional<std::size_t> only;
  if (!args.filter.empty()) {
    if (!ds.labels.contains(args.filter)) throw ConfigError("unknown class '" + args.filter + "'");
    only = ds.labels.index(args.filter);
  }

  std::vector<const Model*> models;
  for (const auto& m : members) models.push_back(&m.model);
  const auto rule = args.vote ? EnsembleRule::MajorityVote : EnsembleRule::SumSoftmax;
  const auto preds = predict_split(models, ds, lead.meta.norm, args.batch_size, rule);
  const auto truth = true_labels(ds);
  const auto cm = confusion_matrix(truth, preds.predicted, ds.labels);

  out << "checkpoints: " << members.size();
  if (members.size() > 1) out << " (" << (args.vote ? "majority-vote" : "sum-softmax") << ")";
  out << "\nsplit: " << args.split << " (" << ds.size() << " samples)\n";
  out << "accuracy: " << fixed(preds.accuracy) << "\nloss: " << fixed(preds.loss) << '\n';
  if (const auto macro = macro_recall(cm)) out << "macro_recall: " << fixed(*macro) << '\n';
  const auto recalls = per_class_accuracy(cm);
  out << "class,support,predicted,recall\n";
  for (std::size_t k = 0; k < cm.num_classes(); ++k)
    out << cm.class_names()[k] << ',' << cm.row_sum(k) << ',' << cm.column_sum(k) << ','
        << (recalls[k] ? fixed(*recalls[k]) : "") << '\n';

  const fs::path report_dir = !args.report_dir.empty() ? fs::path(args.report_dir)
                              : !args.run_dir.empty()  ? fs::path(args.run_dir)
                                                       : paths.front().parent_path();
  make_dir(report_dir.empty() ? fs::path(".") : report_dir);
  const auto cm_path = report_dir / ("confusion_" + args.split + ".csv");
  const auto pc_path = report_dir / ("per_class_" + args.split + ".csv");
  write_text(cm_path, cm.to_csv());
  write_text(pc_path, per_class_csv(cm));
  out << "wrote " << cm_path.string() << " and " << pc_path.string() << '\n';

  if (!args.export_dir.empty()) {
    const auto rows = export_misclassified(preds, ds, args.export_dir, only);
    out << "exported " << rows.size() << " misclassified images to " << args.export_dir << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- predict

int cmd_predict(const std::vector<std::string>& checkpoints, const std::vector<std::string>& images,
                std::size_t top_k, std::ostream& out, std::ostream& err) {
  if (top_k == 0) throw ConfigError("--top-k must be >= 1");
  const auto members = load_members({checkpoints.begin(), checkpoints.end()});
  const auto& lead = members.front();
  const std::size_t size = lead.model.config().input_size;
  const std::size_t k = lead.meta.class_names.size();

  out << "path,class,probability\n";
  std::size_t failures = 0;
  for (const auto& path : images) {
    try {
      Tensor image = load_ppm(path);
      if (image.dim(1) != size || image.dim(2) != size) image = resize_nearest(image, size);
      Tensor batch = normalize(image, lead.meta.norm);
      batch.reshape_inplace({1, image.dim(0), size, size});
      std::vector<ProbVector> outputs;
      for (const auto& m : members) {
        const auto p = m.model.predict_proba(batch);
        outputs.emplace_back(p.raw(), p.raw() + k);
      }
      auto combined = ensemble_sum_softmax(outputs);
      for (auto& v : combined.summed) v /= static_cast<double>(members.size());
      std::vector<std::size_t> order(k);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return combined.summed[a] > combined.summed[b];
      });
      for (std::size_t r = 0; r < std::min(top_k, k); ++r)
        out << csv_quote(path) << ',' << lead.meta.class_names[order[r]] << ','
            << fixed(combined.summed[order[r]]) << '\n';
    } catch (const Error& e) {
      ++failures;
      err << "error: " << path << ": " << e.what() << '\n';
    }
  }
  return failures == images.size() ? kData : kOk;
}

// ---------------------------------------------------------------- summary, stats, preview

int cmd_summary(const KeyFlags& flags, std::size_t num_classes, const std::string& checkpoint,
                std::ostream& out) {
  if (!checkpoint.empty()) {
    out << model_summary(load_checkpoint(checkpoint).model).render();
    return kOk;
  }
  RunConfig cfg = flags.resolve();
  cfg.model.num_classes = num_classes;
  cfg.model.validate();
  out << model_summary(Model(cfg.model)).render();
  return kOk;
}

int cmd_stats(const std::string& data, const std::vector<std::string>& splits, std::size_t size,
              const std::string& out_dir, const std::string& pack_dir, std::ostream& out) {
  if (size == 0) throw ConfigError("--input-size must be >= 1");
  const auto root = data_root_or_env(data);
  std::vector<LabeledDataset> loaded;
  for (const auto& split : splits) loaded.push_back(load_split(root, split, size));
  if (!out_dir.empty()) make_dir(out_dir);
  if (!pack_dir.empty()) make_dir(pack_dir);
  for (const auto& ds : loaded) {
    const auto csv = class_frequencies_csv(ds);
    out << "split: " << ds.split << "\nsamples: " << ds.size() << '\n' << csv;
    if (!out_dir.empty()) {
      const auto path = fs::path(out_dir) / (ds.split + "_class_counts.csv");
      write_text(path, csv);
      out << "wrote " << path.string() << '\n';
    }
    if (!pack_dir.empty()) {
      const auto path = fs::path(pack_dir) / (ds.split + ".sds");
      pack_dataset(ds, path);
      out << "packed " << path.string() << '\n';
    }
  }
  return kOk;
}

int cmd_augment_preview(const KeyFlags& flags, const std::string& image_path, std::size_t count,
                        std::ostream& out) {
  RunConfig cfg = flags.resolve();
  cfg.augment.validate();
  if (cfg.model.input_size == 0) throw ConfigError("input size must be >= 1");
  if (count == 0) throw ConfigError("--count must be >= 1");
  Tensor image = load_ppm(image_path);
  if (image.dim(1) != cfg.model.input_size || image.dim(2) != cfg.model.input_size)
    image = resize_nearest(image, cfg.model.input_size);
  const fs::path dir = cfg.out_dir.empty() ? timestamped_dir() : cfg.out_dir;
  make_dir(dir);
  write_ppm(image, dir / "original.ppm");
  out << (dir / "original.ppm").string() << '\n';
  for (std::size_t i = 1; i <= count; ++i) {
    // Preview i is what sample 0 would look like in epoch i.
    Rng rng(augmentation_seed(cfg.hyper.seed, static_cast<int>(i), 0));
    char name[32];
    std::snprintf(name, sizeof name, "augmented_%02zu.ppm", i);
    write_ppm(apply_augmentation(image, cfg.augment, rng), dir / name);
    out << (dir / name).string() << '\n';
  }
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"statenet: train and evaluate the cooking-state image classifier"};
  app.name("statenet");
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train a model and write metrics and checkpoints");
  KeyFlags train_flags;
  train_flags.attach(*train, [](const std::string&) { return true; });

  auto* sweep = app.add_subcommand("sweep", "train once per point of a hyperparameter grid");
  KeyFlags sweep_flags;
  sweep_flags.attach(*sweep, [](const std::string&) { return true; });
  std::vector<std::string> grid;
  sweep->add_option("--grid", grid,
                    "axis=v1,v2,... over optimizer, batch-size, dropout, learning-rate (repeatable)")
      ->allow_extra_args(false);

  auto* eval = app.add_subcommand("eval", "evaluate one checkpoint or an ensemble on a split");
  EvalArgs eval_args;
  eval->add_option("checkpoints", eval_args.checkpoints, "checkpoint files");
  eval->add_option("--run-dir", eval_args.run_dir, "training output directory");
  eval->add_option("--last", eval_args.last,
                   "with --run-dir: ensemble the last M snapshots instead of final.snet")
      ->capture_default_str();
  eval->add_option("--data", eval_args.data, "dataset root (env STATENET_DATA)");
  eval->add_option("--split", eval_args.split, "split to evaluate")->capture_default_str();
  eval->add_flag("--vote", eval_args.vote, "combine members by majority vote instead of sum-softmax");
  eval->add_option("--eval-batch-size", eval_args.batch_size, "inference batch size")
      ->capture_default_str();
  eval->add_option("--report-dir", eval_args.report_dir,
                   "where to write the CSV reports (default: run dir or checkpoint dir)");
  eval->add_option("--export-misclassified", eval_args.export_dir,
                   "write misclassified images and misclassified.csv here");
  eval->add_option("--filter", eval_args.filter, "only export misclassified images of this true class");

  auto* predict = app.add_subcommand("predict", "classify PPM images");
  std::vector<std::string> predict_checkpoints;
  std::vector<std::string> images;
  std::size_t top_k = 1;
  predict->add_option("--checkpoint", predict_checkpoints, "checkpoint file (repeat to ensemble)")
      ->required()
      ->allow_extra_args(false);
  predict->add_option("--top-k", top_k, "classes reported per image")->capture_default_str();
  predict->add_option("images", images, "PPM image files")->required();

  auto* summary = app.add_subcommand("summary", "print the layer table and parameter count");
  KeyFlags summary_flags;
  summary_flags.attach(*summary, is_model_key);
  std::size_t num_classes = ModelConfig{}.num_classes;
  std::string summary_checkpoint;
  summary->add_option("--num-classes", num_classes, "output classes")->capture_default_str();
  summary->add_option("--checkpoint", summary_checkpoint, "summarize this checkpoint instead");

  auto* stats = app.add_subcommand("stats", "per-class sample counts of dataset splits");
  std::string stats_data;
  std::vector<std::string> stats_splits{"train", "val"};
  std::size_t stats_size = ModelConfig{}.input_size;
  std::string stats_out;
  std::string stats_pack;
  stats->add_option("--data", stats_data, "dataset root (env STATENET_DATA)");
  stats->add_option("--split", stats_splits, "splits to report (repeatable)")
      ->capture_default_str()
      ->allow_extra_args(false);
  stats->add_option("--input-size", stats_size, "resize side used when loading")
      ->capture_default_str();
  stats->add_option("--out", stats_out, "also write <split>_class_counts.csv here");
  stats->add_option("--pack", stats_pack, "also write packed <split>.sds files here");

  auto* preview = app.add_subcommand("augment-preview", "write an image and augmented copies");
  KeyFlags preview_flags;
  preview_flags.attach(*preview, [](const std::string& name) {
    return is_augment_key(name) || name == "input-size" || name == "seed" || name == "out";
  });
  std::string preview_image;
  std::size_t preview_count = 8;
  preview->add_option("--image", preview_image, "source PPM image")->required();
  preview->add_option("--count", preview_count, "number of augmented copies")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (train->parsed()) return cmd_train(train_flags, out);
    if (sweep->parsed()) return cmd_sweep(sweep_flags, grid, out, err);
    if (eval->parsed()) return cmd_eval(eval_args, out);
    if (predict->parsed()) return cmd_predict(predict_checkpoints, images, top_k, out, err);
    if (summary->parsed()) return cmd_summary(summary_flags, num_classes, summary_checkpoint, out);
    if (stats->parsed()) return cmd_stats(stats_data, stats_splits, stats_size, stats_out, stats_pack, out);
    if (preview->parsed()) return cmd_augment_preview(preview_flags, preview_image, preview_count, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_of(e);
  }
  return kUsage;
}

}  // namespace statenet::cli
