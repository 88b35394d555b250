#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "statenet/augment.hpp"
#include "statenet/dataset.hpp"
#include "statenet/model.hpp"

namespace statenet {

using ProbVector = std::vector<double>;

// Index of the largest entry; the lowest index wins exact ties.
std::size_t argmax(std::span<const double> values);

struct EnsembleOutput {
  ProbVector summed;
  std::size_t predicted = 0;
};

// Elementwise sum of the members' softmax outputs and its argmax.
EnsembleOutput ensemble_sum_softmax(std::span<const ProbVector> members);

// Most frequent class id; ties go to the lowest id.
std::size_t ensemble_majority_vote(std::span<const std::size_t> predictions);

enum class EnsembleRule { SumSoftmax, MajorityVote };

// Rows are true classes, columns are predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::vector<std::string> class_names);
  explicit ConfusionMatrix(std::size_t num_classes);

  void add(std::size_t truth, std::size_t predicted);

  std::size_t num_classes() const { return names_.size(); }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * names_.size() + predicted];
  }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t column_sum(std::size_t predicted) const;
  double accuracy() const;
  const std::vector<std::string>& class_names() const { return names_; }

  // Header row and first column hold class names ("true\\pred" corner).
  std::string to_csv() const;

 private:
  std::vector<std::string> names_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth,
                                 std::span<const std::size_t> predicted, std::size_t num_classes);
ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth,
                                 std::span<const std::size_t> predicted, const LabelSet& labels);

// Recall per class; classes without support are std::nullopt.
std::vector<std::optional<double>> per_class_accuracy(const ConfusionMatrix& cm);
// Mean over classes with support.
std::optional<double> macro_recall(const ConfusionMatrix& cm);
// "class,support,recall" with an empty recall cell for unsupported classes.
std::string per_class_csv(const ConfusionMatrix& cm);

struct SplitPredictions {
  std::vector<ProbVector> probs;  // member-averaged softmax per sample
  std::vector<std::size_t> predicted;
  double accuracy = 0.0;
  double loss = 0.0;  // mean -log(prob of true class)
};

// Inference over a split with one or more frozen models: no augmentation,
// batch-norm and dropout in inference mode. Members are combined in order.
SplitPredictions predict_split(std::span<const Model* const> models, const LabeledDataset& ds,
                               const NormStats& norm, std::size_t batch_size,
                               EnsembleRule rule = EnsembleRule::SumSoftmax);

std::vector<std::size_t> true_labels(const LabeledDataset& ds);

struct MisclassifiedRow {
  std::size_t index = 0;
  std::size_t true_label = 0;
  std::size_t predicted = 0;
  double top_probability = 0.0;
  std::filesystem::path file;
};

// Sample index -> class probabilities.
using ProbabilityFn = std::function<ProbVector(std::size_t)>;

// Writes every misclassified sample (optionally only those whose true class
// is `only_true_class`) as <true>__pred_<predicted>__<index>.ppm plus a
// misclassified.csv report (index,true,predicted,top_probability).
std::vector<MisclassifiedRow> export_misclassified(const LabeledDataset& ds,
                                                   const ProbabilityFn& probabilities,
                                                   const std::filesystem::path& out_dir,
                                                   std::optional<std::size_t> only_true_class = {});

std::vector<MisclassifiedRow> export_misclassified(const SplitPredictions& predictions,
                                                   const LabeledDataset& ds,
                                                   const std::filesystem::path& out_dir,
                                                   std::optional<std::size_t> only_true_class = {});

}  // namespace statenet
