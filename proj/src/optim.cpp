#include "statenet/optim.hpp"

#include <cmath>

namespace statenet {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::Asgd: return "asgd";
  }
  return "sgd";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "asgd") return OptimizerKind::Asgd;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd, adam or asgd)");
}

std::string to_string(DecayBoundary boundary) {
  return boundary == DecayBoundary::AfterFixed ? "after-fixed" : "end-of-interval";
}

DecayBoundary parse_decay_boundary(std::string_view name) {
  if (name == "after-fixed") return DecayBoundary::AfterFixed;
  if (name == "end-of-interval") return DecayBoundary::EndOfInterval;
  throw ConfigError("unknown decay boundary '" + std::string(name) +
                    "' (expected after-fixed or end-of-interval)");
}

void LrSchedule::validate() const {
  if (!(base_lr >= 0.0) || !std::isfinite(base_lr))
    throw ConfigError("learning rate must be finite and >= 0");
  if (fixed_epochs < 0) throw ConfigError("fixed epochs must be >= 0");
  if (decay_interval < 1) throw ConfigError("decay interval must be >= 1");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0))
    throw ConfigError("decay factor must be in (0, 1]");
}

double lr_at_epoch(const LrSchedule& schedule, int epoch) {
  if (epoch < 1) throw ConfigError("epoch must be >= 1, got " + std::to_string(epoch));
  int decays = 0;
  if (epoch > schedule.fixed_epochs) {
    const int past = epoch - schedule.fixed_epochs;
    decays = schedule.boundary == DecayBoundary::AfterFixed
                 ? (past - 1) / schedule.decay_interval + 1
                 : past / schedule.decay_interval;
  }
  double lr = schedule.base_lr;
  for (int i = 0; i < decays; ++i) lr *= schedule.decay_factor;
  return lr;
}

void OptimizerSettings::validate() const {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("adam betas must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
  if (asgd_start < 1) throw ConfigError("asgd averaging start must be >= 1");
}

Optimizer::Optimizer(OptimizerSettings settings) : settings_(settings) { settings_.validate(); }

bool Optimizer::averaging_active() const {
  return settings_.kind == OptimizerKind::Asgd && steps_ >= settings_.asgd_start;
}

void Optimizer::ensure_buffers(std::span<const ParamSlot<float>> params) {
  for (const auto& p : params)
    if (p.value->shape() != p.grad->shape())
      throw ShapeError("gradient shape " + shape_string(p.grad->shape()) + " of " + p.name +
                       " does not match parameter shape " + shape_string(p.value->shape()));
  if (first_.empty()) {
    for (const auto& p : params) {
      first_.emplace_back(p.value->shape());
      if (settings_.kind == OptimizerKind::Adam) second_.emplace_back(p.value->shape());
    }
    return;
  }
  if (first_.size() != params.size())
    throw ShapeError("optimizer state tracks " + std::to_string(first_.size()) +
                     " parameters, got " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i)
    if (first_[i].shape() != params[i].value->shape())
      throw ShapeError("optimizer state shape mismatch for " + params[i].name);
}

void Optimizer::step(std::span<const ParamSlot<float>> params, double lr) {
  ensure_buffers(params);
  ++steps_;
  const auto& s = settings_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value->data();
    auto g = params[i].grad->data();
    auto aux = first_[i].data();
    switch (s.kind) {
      case OptimizerKind::Sgd:
        for (std::size_t j = 0; j < w.size(); ++j) {
          aux[j] = static_cast<float>(s.momentum * aux[j] + g[j]);
          w[j] = static_cast<float>(w[j] - lr * aux[j]);
        }
        break;
      case OptimizerKind::Adam: {
        auto second = second_[i].data();
        const double t = static_cast<double>(steps_);
        const double c1 = 1.0 - std::pow(s.adam_beta1, t);
        const double c2 = 1.0 - std::pow(s.adam_beta2, t);
        for (std::size_t j = 0; j < w.size(); ++j) {
          const double m = s.adam_beta1 * aux[j] + (1.0 - s.adam_beta1) * g[j];
          const double v = s.adam_beta2 * second[j] + (1.0 - s.adam_beta2) * g[j] * g[j];
          aux[j] = static_cast<float>(m);
          second[j] = static_cast<float>(v);
          w[j] = static_cast<float>(w[j] - lr * (m / c1) / (std::sqrt(v / c2) + s.adam_epsilon));
        }
        break;
      }
      case OptimizerKind::Asgd: {
        for (std::size_t j = 0; j < w.size(); ++j) w[j] = static_cast<float>(w[j] - lr * g[j]);
        if (steps_ >= s.asgd_start) {
          const double k = static_cast<double>(steps_ - s.asgd_start + 1);
          for (std::size_t j = 0; j < w.size(); ++j)
            aux[j] = static_cast<float>(aux[j] + (w[j] - aux[j]) / k);
        }
        break;
      }
    }
  }
}

void Optimizer::copy_averaged_to(std::span<const ParamSlot<float>> params) const {
  if (!averaging_active()) throw ConfigError("no averaged iterates available");
  if (params.size() != first_.size())
    throw ShapeError("averaged state tracks " + std::to_string(first_.size()) +
                     " parameters, got " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].value->shape() != first_[i].shape())
      throw ShapeError("averaged state shape mismatch for " + params[i].name);
    *params[i].value = first_[i];
  }
}

}  // namespace statenet
