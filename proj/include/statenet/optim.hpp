#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "statenet/layers.hpp"

namespace statenet {

enum class OptimizerKind { Sgd, Adam, Asgd };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

// Where the first decay lands once the fixed phase ends.
enum class DecayBoundary {
  AfterFixed,     // first decay at fixed_epochs + 1 (51, 61, 71 ...)
  EndOfInterval,  // first decay at fixed_epochs + interval (60, 70, 80 ...)
};

std::string to_string(DecayBoundary boundary);
DecayBoundary parse_decay_boundary(std::string_view name);

// Constant learning rate for the first `fixed_epochs`, then multiplied by
// `decay_factor` once every `decay_interval` epochs.
struct LrSchedule {
  double base_lr = 0.01;
  int fixed_epochs = 50;
  int decay_interval = 10;
  double decay_factor = 0.9;
  DecayBoundary boundary = DecayBoundary::AfterFixed;

  void validate() const;
  bool operator==(const LrSchedule&) const = default;
};

// Epochs are 1-based.
double lr_at_epoch(const LrSchedule& schedule, int epoch);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::Sgd;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // ASGD starts averaging iterates at this step (1-based).
  std::uint64_t asgd_start = 1;

  void validate() const;
};

// Update rules:
//   sgd  : v <- momentum*v + g ; w <- w - lr*v
//   adam : bias-corrected first/second moments
//   asgd : w <- w - lr*g, plus a running mean of iterates from asgd_start on
// Auxiliary buffers are allocated on the first step and must keep matching
// the parameter shapes afterwards.
class Optimizer {
 public:
  explicit Optimizer(OptimizerSettings settings = {});

  void step(std::span<const ParamSlot<float>> params, double lr);

  const OptimizerSettings& settings() const { return settings_; }
  std::uint64_t step_count() const { return steps_; }
  // True once ASGD has folded at least one iterate into its average.
  bool averaging_active() const;
  // Writes the ASGD averaged iterates into the given tensors.
  void copy_averaged_to(std::span<const ParamSlot<float>> params) const;

 private:
  void ensure_buffers(std::span<const ParamSlot<float>> params);

  OptimizerSettings settings_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor> first_;   // velocity, Adam m, or ASGD average
  std::vector<Tensor> second_;  // Adam v
};

}  // namespace statenet
