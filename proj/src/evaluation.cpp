#include "statenet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace statenet {

namespace fs = std::filesystem;

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ShapeError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

EnsembleOutput ensemble_sum_softmax(std::span<const ProbVector> members) {
  if (members.empty()) throw ConfigError("ensemble needs at least one member");
  EnsembleOutput out;
  out.summed.assign(members.front().size(), 0.0);
  for (const auto& m : members) {
    if (m.size() != out.summed.size())
      throw ShapeError("ensemble members have different lengths (" + std::to_string(m.size()) +
                       " vs " + std::to_string(out.summed.size()) + ")");
    for (std::size_t k = 0; k < m.size(); ++k) out.summed[k] += m[k];
  }
  out.predicted = argmax(out.summed);
  return out;
}

std::size_t ensemble_majority_vote(std::span<const std::size_t> predictions) {
  if (predictions.empty()) throw ConfigError("majority vote over an empty prediction list");
  const auto top = *std::max_element(predictions.begin(), predictions.end());
  std::vector<std::size_t> votes(top + 1, 0);
  for (auto p : predictions) ++votes[p];
  return static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

// ---------------------------------------------------------------- confusion matrix

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_names)
    : names_(std::move(class_names)), counts_(names_.size() * names_.size(), 0) {
  if (names_.empty()) throw ConfigError("confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : ConfusionMatrix([num_classes] {
        std::vector<std::string> names;
        for (std::size_t i = 0; i < num_classes; ++i) names.push_back(std::to_string(i));
        return names;
      }()) {}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
  const auto k = names_.size();
  if (truth >= k || predicted >= k)
    throw DataError("confusion matrix label out of range (true " + std::to_string(truth) +
                    ", predicted " + std::to_string(predicted) + ", classes " +
                    std::to_string(k) + ")");
  ++counts_[truth * k + predicted];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < names_.size(); ++i) t += at(i, i);
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t t = 0;
  for (std::size_t j = 0; j < names_.size(); ++j) t += at(truth, j);
  return t;
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t predicted) const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < names_.size(); ++i) t += at(i, predicted);
  return t;
}

double ConfusionMatrix::accuracy() const {
  const auto t = total();
  return t ? static_cast<double>(trace()) / static_cast<double>(t) : 0.0;
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream os;
  os << "true\\pred";
  for (const auto& n : names_) os << ',' << n;
  os << '\n';
  for (std::size_t i = 0; i < names_.size(); ++i) {
    os << names_[i];
    for (std::size_t j = 0; j < names_.size(); ++j) os << ',' << at(i, j);
    os << '\n';
  }
  return os.str();
}

namespace {

template <typename Names>
ConfusionMatrix fill_confusion(std::span<const std::size_t> truth,
                               std::span<const std::size_t> predicted, Names&& names) {
  if (truth.size() != predicted.size())
    throw ShapeError("confusion matrix needs equal-length label sequences (" +
                     std::to_string(truth.size()) + " vs " + std::to_string(predicted.size()) + ")");
  ConfusionMatrix cm(std::forward<Names>(names));
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth,
                                 std::span<const std::size_t> predicted, std::size_t num_classes) {
  return fill_confusion(truth, predicted, num_classes);
}

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth,
                                 std::span<const std::size_t> predicted, const LabelSet& labels) {
  return fill_confusion(truth, predicted, labels.names());
}

std::vector<std::optional<double>> per_class_accuracy(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> recall(cm.num_classes());
  for (std::size_t k = 0; k < cm.num_classes(); ++k) {
    const auto support = cm.row_sum(k);
    if (support > 0) recall[k] = static_cast<double>(cm.at(k, k)) / static_cast<double>(support);
  }
  return recall;
}

std::optional<double> macro_recall(const ConfusionMatrix& cm) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : per_class_accuracy(cm))
    if (r) {
      sum += *r;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::string per_class_csv(const ConfusionMatrix& cm) {
  const auto recall = per_class_accuracy(cm);
  std::ostringstream os;
  os << "class,support,recall\n" << std::fixed << std::setprecision(6);
  for (std::size_t k = 0; k < cm.num_classes(); ++k) {
    os << cm.class_names()[k] << ',' << cm.row_sum(k) << ',';
    if (recall[k]) os << *recall[k];
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------- split inference

std::vector<std::size_t> true_labels(const LabeledDataset& ds) {
  std::vector<std::size_t> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples) out.push_back(s.label);
  return out;
}

SplitPredictions predict_split(std::span<const Model* const> models, const LabeledDataset& ds,
                               const NormStats& norm, std::size_t batch_size, EnsembleRule rule) {
  if (models.empty()) throw ConfigError("prediction needs at least one model");
  if (ds.empty()) throw DataError("cannot evaluate an empty split");
  if (batch_size == 0) throw ConfigError("evaluation batch size must be >= 1");
  const std::size_t k = models.front()->config().num_classes;
  for (const auto* m : models)
    if (m->config().num_classes != k)
      throw ConfigError("ensemble members disagree on the number of classes");
  if (ds.labels.size() != k)
    throw DataError("split has " + std::to_string(ds.labels.size()) + " classes but the model has " +
                    std::to_string(k));

  SplitPredictions out;
  out.probs.reserve(ds.size());
  out.predicted.reserve(ds.size());
  const auto& first = ds.samples.front().image.shape();
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, ds.size() - start);
    Tensor batch({n, first[0], first[1], first[2]});
    const std::size_t stride = ds.samples.front().image.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& img = ds.samples[start + i].image;
      if (img.size() != stride) throw DataError("images in the split differ in size");
      std::copy(img.values().begin(), img.values().end(), batch.raw() + i * stride);
    }
    batch = normalize(batch, norm);

    std::vector<Tensor> member_probs;
    for (const auto* m : models) member_probs.push_back(m->predict_proba(batch));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<ProbVector> members;
      std::vector<std::size_t> votes;
      for (const auto& p : member_probs) {
        members.emplace_back(p.raw() + i * k, p.raw() + (i + 1) * k);
        votes.push_back(argmax(members.back()));
      }
      auto combined = ensemble_sum_softmax(members);
      const std::size_t predicted =
          rule == EnsembleRule::SumSoftmax ? combined.predicted : ensemble_majority_vote(votes);
      for (auto& v : combined.summed) v /= static_cast<double>(models.size());
      const std::size_t truth = ds.samples[start + i].label;
      loss_sum += -std::log(std::max(combined.summed[truth], std::numeric_limits<double>::min()));
      if (predicted == truth) ++correct;
      out.probs.push_back(std::move(combined.summed));
      out.predicted.push_back(predicted);
    }
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
  out.loss = loss_sum / static_cast<double>(ds.size());
  return out;
}

// ---------------------------------------------------------------- misclassified export

namespace {

using PredictionFn = std::function<std::pair<ProbVector, std::size_t>(std::size_t)>;

std::vector<MisclassifiedRow> export_impl(const LabeledDataset& ds, const PredictionFn& predict,
                                          const fs::path& out_dir,
                                          std::optional<std::size_t> only_true_class) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir))
    throw DataError("cannot create output directory " + out_dir.string());
  const fs::path report_path = out_dir / "misclassified.csv";
  std::ofstream report(report_path, std::ios::trunc);
  if (!report) throw DataError("cannot write " + report_path.string());
  report << "index,true,predicted,top_probability\n" << std::fixed << std::setprecision(6);

  std::vector<MisclassifiedRow> rows;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::size_t truth = ds.samples[i].label;
    if (only_true_class && truth != *only_true_class) continue;
    const auto [probs, predicted] = predict(i);
    if (predicted == truth) continue;
    if (predicted >= probs.size()) throw DataError("prediction out of range");
    MisclassifiedRow row{i, truth, predicted, probs[predicted], {}};
    row.file = out_dir / (ds.labels.name(truth) + "__pred_" + ds.labels.name(predicted) + "__" +
                          std::to_string(i) + ".ppm");
    write_ppm(ds.samples[i].image, row.file);
    report << i << ',' << ds.labels.name(truth) << ',' << ds.labels.name(predicted) << ','
           << row.top_probability << '\n';
    rows.push_back(std::move(row));
  }
  if (!report) throw DataError("failed writing " + report_path.string());
  return rows;
}

}  // namespace

std::vector<MisclassifiedRow> export_misclassified(const LabeledDataset& ds,
                                                   const ProbabilityFn& probabilities,
                                                   const fs::path& out_dir,
                                                   std::optional<std::size_t> only_true_class) {
  return export_impl(
      ds,
      [&](std::size_t i) {
        auto probs = probabilities(i);
        const auto predicted = argmax(probs);
        return std::pair{std::move(probs), predicted};
      },
      out_dir, only_true_class);
}

std::vector<MisclassifiedRow> export_misclassified(const SplitPredictions& predictions,
                                                   const LabeledDataset& ds,
                                                   const fs::path& out_dir,
                                                   std::optional<std::size_t> only_true_class) {
  if (predictions.probs.size() != ds.size() || predictions.predicted.size() != ds.size())
    throw ShapeError("predictions do not match the dataset size");
  return export_impl(
      ds, [&](std::size_t i) { return std::pair{predictions.probs[i], predictions.predicted[i]}; },
      out_dir, only_true_class);
}

}  // namespace statenet
