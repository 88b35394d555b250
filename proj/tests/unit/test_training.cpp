#include "doctest.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "../support/tempdir.hpp"
#include "statenet/errors.hpp"
#include "statenet/synthetic.hpp"
#include "statenet/training.hpp"

using namespace statenet;
using testing_util::TempDir;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config(std::size_t classes) {
  ModelConfig c;
  c.conv_widths = {4, 4, 8, 8, 8, 8};
  c.fc_hidden = 16;
  c.num_classes = classes;
  return c;
}

std::vector<Tensor> snapshot_params(Model& m) {
  std::vector<Tensor> out;
  for (const auto& s : m.parameters()) out.push_back(*s.value);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("batches partition the index set") {
  const auto batches = make_batches(10, 4, 7, 1);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 4);
  CHECK(batches[1].size() == 4);
  CHECK(batches[2].size() == 2);
  std::multiset<std::size_t> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  CHECK(seen == std::multiset<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

  CHECK(make_batches(10, 4, 7, 1) == batches);
  CHECK(make_batches(10, 4, 7, 2) != batches);

  const auto single = make_batches(5, 8, 7, 1);
  REQUIRE(single.size() == 1);
  CHECK(std::set<std::size_t>(single[0].begin(), single[0].end()) ==
        std::set<std::size_t>{0, 1, 2, 3, 4});

  CHECK_THROWS_AS(make_batches(5, 0, 7, 1), ConfigError);
  CHECK_THROWS_AS(make_batches(0, 4, 7, 1), DataError);
}

TEST_CASE("hyperparameter defaults and validation") {
  Hyperparams h;
  CHECK(h.optimizer.kind == OptimizerKind::Sgd);
  CHECK(h.schedule.base_lr == 0.01);
  CHECK(h.optimizer.momentum == 0.9);
  CHECK(h.batch_size == 32);
  CHECK(h.epochs == 80);
  CHECK(ModelConfig{}.dropout_factor == 0.5);
  h.batch_size = 0;
  CHECK_THROWS_AS(h.validate(), ConfigError);
}

TEST_CASE("metrics csv format") {
  CHECK(metrics_csv_header() == "epoch,lr,train_acc,train_loss,val_acc,val_loss");
  EpochMetrics m{3, 0.009, 0.5, 1.25, 0.75, 0.5};
  CHECK(metrics_csv_row(m) == "3,0.0089999999999999993,0.500000,1.250000,0.750000,0.500000");
}

TEST_CASE("zero learning rate leaves parameters untouched") {
  const auto ds = make_blob_dataset(2, 4, 64, 3);
  Model model = build_statenet(tiny_config(2), 1);
  Hyperparams h;
  h.schedule.base_lr = 0.0;
  h.batch_size = 4;
  Optimizer opt(h.optimizer);
  const auto before = snapshot_params(model);
  for (int e = 1; e <= 2; ++e)
    train_epoch(model, ds, NormStats{}, AugmentPolicy{}, h, opt, e);
  CHECK(snapshot_params(model) == before);
}

TEST_CASE("train epoch replays exactly") {
  const auto ds = make_blob_dataset(2, 4, 64, 3);
  Hyperparams h;
  h.batch_size = 3;
  auto run = [&] {
    Model model = build_statenet(tiny_config(2), 1);
    Optimizer opt(h.optimizer);
    std::vector<double> out;
    for (int e = 1; e <= 2; ++e) {
      const auto m = train_epoch(model, ds, NormStats{}, AugmentPolicy{}, h, opt, e);
      out.push_back(m.accuracy);
      out.push_back(m.loss);
    }
    return std::pair{out, snapshot_params(model)};
  };
  CHECK(run() == run());
}

TEST_CASE("a single sample trains and its loss drops") {
  auto ds = make_blob_dataset(2, 1, 64, 4);
  ds.samples.resize(1);
  Model model = build_statenet(tiny_config(2), 2);
  Hyperparams h;
  h.batch_size = 1;
  Optimizer opt(h.optimizer);
  const auto first = train_epoch(model, ds, NormStats{}, AugmentPolicy::identity(), h, opt, 1);
  SplitMetrics last{};
  for (int e = 2; e <= 50; ++e)
    last = train_epoch(model, ds, NormStats{}, AugmentPolicy::identity(), h, opt, e);
  CHECK(last.loss < first.loss);
}

TEST_CASE("non-finite loss raises a divergence error") {
  auto ds = make_blob_dataset(2, 2, 64, 4);
  ds.samples[1].image[5] = std::numeric_limits<float>::quiet_NaN();
  Model model = build_statenet(tiny_config(2), 2);
  Hyperparams h;
  h.batch_size = 4;
  Optimizer opt(h.optimizer);
  CHECK_THROWS_AS(train_epoch(model, ds, NormStats{}, AugmentPolicy::identity(), h, opt, 1),
                  DivergenceError);
}

TEST_CASE("evaluation with a uniform model") {
  auto ds = make_blob_dataset(3, 4, 64, 5);
  ds.samples.erase(ds.samples.begin() + 4, ds.samples.begin() + 6);  // class 1 now has 2
  Model model(tiny_config(3));
  model.zero_weights();
  const auto m = evaluate_split(model, ds, NormStats{}, 4);
  CHECK(m.accuracy == doctest::Approx(4.0 / 10.0));
  CHECK(m.loss == doctest::Approx(std::log(3.0)));
}

TEST_CASE("evaluation does not depend on batch size") {
  const auto ds = make_blob_dataset(3, 5, 64, 6);
  const Model model = build_statenet(tiny_config(3), 3);
  const auto norm = compute_norm_stats(ds);
  const auto a = evaluate_split(model, ds, norm, 1);
  const auto b = evaluate_split(model, ds, norm, 64);
  const auto c = evaluate_split(model, ds, norm, 4);
  CHECK(std::abs(a.accuracy - b.accuracy) <= 1e-6);
  CHECK(std::abs(a.loss - b.loss) <= 1e-6);
  CHECK(std::abs(a.loss - c.loss) <= 1e-6);
}

TEST_CASE("fit writes metrics and checkpoints") {
  const auto train = make_blob_dataset(2, 3, 64, 7, "train");
  const auto val = make_blob_dataset(2, 2, 64, 8, "val");
  TempDir out("fit");
  Model model = build_statenet(tiny_config(2), 4);
  Hyperparams h;
  h.epochs = 1;
  h.batch_size = 4;
  FitOptions opts;
  opts.out_dir = out.path();
  const auto result = fit(model, train, val, h, opts);
  CHECK(result.log.size() == 1);
  CHECK(result.snapshots.empty());
  CHECK(fs::exists(out / "final.snet"));
  const auto csv = slurp(out / "metrics.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(csv.rfind(metrics_csv_header() + "\n1,0.01,", 0) == 0);

  // The logged lr is the analytic schedule value and snapshots follow the interval.
  TempDir out2("fit2");
  Model m2 = build_statenet(tiny_config(2), 4);
  h.epochs = 4;
  h.snapshot_interval = 2;
  h.schedule.fixed_epochs = 1;
  h.schedule.decay_interval = 1;
  opts.out_dir = out2.path();
  const auto r2 = fit(m2, train, val, h, opts);
  for (const auto& row : r2.log) CHECK(row.lr == lr_at_epoch(h.schedule, row.epoch));
  CHECK(r2.snapshots.size() == 2);
  CHECK(fs::exists(out2 / "snapshot_e002.snet"));
  CHECK(fs::exists(out2 / "snapshot_e004.snet"));

  // Eval of the final checkpoint reproduces the last logged validation metrics.
  const auto ck = load_checkpoint(r2.final_checkpoint);
  const auto again = evaluate_split(ck.model, val, ck.meta.norm, h.eval_batch_size);
  CHECK(again.accuracy == r2.log.back().val_acc);
  CHECK(again.loss == r2.log.back().val_loss);
}

TEST_CASE("fit rejects mismatched inputs") {
  const auto train = make_blob_dataset(2, 3, 64, 7, "train");
  const auto val3 = make_blob_dataset(3, 2, 64, 8, "val");
  Model model = build_statenet(tiny_config(2), 4);
  Hyperparams h;
  h.epochs = 1;
  CHECK_THROWS_AS(fit(model, train, val3, h, {}), DataError);
  Model wrong = build_statenet(tiny_config(3), 4);
  CHECK_THROWS_AS(fit(wrong, train, train, h, {}), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  Model model = build_statenet(tiny_config(3), 9);
  // Give batch-norm buffers non-default values.
  Rng rng(1);
  const auto ds = make_blob_dataset(3, 2, 64, 1);
  Hyperparams h;
  h.batch_size = 6;
  Optimizer opt(h.optimizer);
  train_epoch(model, ds, NormStats{}, AugmentPolicy{}, h, opt, 1);

  CheckpointMeta meta;
  meta.epoch = 12;
  meta.optimizer = OptimizerKind::Adam;
  meta.seed = 1234567890123ULL;
  meta.class_names = ds.labels.names();
  meta.norm.mean = {0.1, 0.2, 0.3};
  meta.norm.stddev = {0.4, 0.5, 0.6};
  TempDir dir("ckpt");
  save_checkpoint(model, meta, dir / "m.snet");
  const auto back = load_checkpoint(dir / "m.snet");
  CHECK(back.model.config() == model.config());
  CHECK(back.meta.epoch == 12);
  CHECK(back.meta.optimizer == OptimizerKind::Adam);
  CHECK(back.meta.seed == meta.seed);
  CHECK(back.meta.class_names == meta.class_names);
  CHECK(back.meta.norm == meta.norm);
  const auto a = model.state();
  const auto b = back.model.state();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].tensor == *b[i].tensor);

  Tensor batch({2, 3, 64, 64});
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = static_cast<float>(rng.normal());
  CHECK(model.infer_logits(batch) == back.model.infer_logits(batch));

  auto bytes = read_file_bytes(dir / "m.snet");
  for (std::size_t cut : {std::size_t{3}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
    std::ofstream f(dir / "cut.snet", std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(cut));
    f.close();
    CHECK_THROWS_AS(load_checkpoint(dir / "cut.snet"), FormatError);
  }
  bytes[bytes.size() - 100] ^= 1;
  {
    std::ofstream f(dir / "flip.snet", std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "flip.snet"), FormatError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.snet"), DataError);

  ModelConfig other = model.config();
  other.conv_widths[0] = 32;
  CHECK_THROWS_AS(load_checkpoint(dir / "m.snet", other), ShapeError);
  CHECK_NOTHROW(load_checkpoint(dir / "m.snet", model.config()));
}
