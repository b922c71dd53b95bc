#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kpose/error.hpp"

namespace kpose {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline double silu(double x) { return x * sigmoid(x); }

inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

/// ln(1 + e^x) without overflow for large x.
inline double softplus(double x) {
  if (x > 20.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double mish(double x) { return x * std::tanh(softplus(x)); }

/// d/dx [x tanh(sp(x))] = tanh(sp) + x sech^2(sp) sigmoid(x)
inline double mish_grad(double x) {
  const double t = std::tanh(softplus(x));
  return t + x * (1.0 - t * t) * sigmoid(x);
}

enum class ScheduleVariant { Constant, OneCycleCosine, PolynomialQuadratic };

inline ScheduleVariant parse_schedule_variant(const std::string& name) {
  if (name == "constant") return ScheduleVariant::Constant;
  if (name == "onecycle") return ScheduleVariant::OneCycleCosine;
  if (name == "polynomial") return ScheduleVariant::PolynomialQuadratic;
  throw Error(ErrorKind::InvalidArgument, "unknown schedule variant '" + name + "'");
}

inline constexpr double kDefaultBaseLr = 1e-4;

struct ScheduleConfig {
  double base_lr = kDefaultBaseLr;
  long total_steps = 1;
  ScheduleVariant variant = ScheduleVariant::Constant;
  // OneCycle only.
  double warmup_fraction = 0.3;
  double max_lr = 10.0 * kDefaultBaseLr;
  double div_factor = 25.0;  // starting lr = max_lr / div_factor
  double final_lr = kDefaultBaseLr / 1e4;

  static ScheduleConfig one_cycle(double base_lr, long total_steps) {
    ScheduleConfig c;
    c.variant = ScheduleVariant::OneCycleCosine;
    c.base_lr = base_lr;
    c.total_steps = total_steps;
    c.max_lr = 10.0 * base_lr;
    c.final_lr = base_lr / 1e4;
    return c;
  }

  static ScheduleConfig polynomial(double base_lr, long total_steps) {
    ScheduleConfig c;
    c.variant = ScheduleVariant::PolynomialQuadratic;
    c.base_lr = base_lr;
    c.total_steps = total_steps;
    return c;
  }
};

inline void validate(const ScheduleConfig& c) {
  if (c.total_steps < 1) throw Error(ErrorKind::InvalidArgument, "total_steps must be >= 1");
  if (!(c.base_lr > 0.0)) throw Error(ErrorKind::InvalidArgument, "base_lr must be positive");
  if (c.variant == ScheduleVariant::OneCycleCosine) {
    if (!(c.warmup_fraction > 0.0 && c.warmup_fraction < 1.0))
      throw Error(ErrorKind::InvalidArgument, "warmup_fraction must lie in (0, 1)");
    if (!(c.max_lr > 0.0) || !(c.final_lr > 0.0) || !(c.div_factor > 0.0))
      throw Error(ErrorKind::InvalidArgument, "OneCycle learning rates must be positive");
  }
}

namespace schedule_detail {
/// Half-cosine from `from` (pct = 0) to `to` (pct = 1).
inline double cosine_anneal(double from, double to, double pct) {
  return to + (from - to) * 0.5 * (1.0 + std::cos(std::numbers::pi * pct));
}
}  // namespace schedule_detail

/// Learning rate at `step` in [0, total_steps].
inline double lr_at(const ScheduleConfig& cfg, long step) {
  validate(cfg);
  if (step < 0 || step > cfg.total_steps)
    throw Error(ErrorKind::StepOutOfRange, "step " + std::to_string(step) + " outside [0, " +
                                               std::to_string(cfg.total_steps) + "]");
  const double total = static_cast<double>(cfg.total_steps);
  const double s = static_cast<double>(step);
  switch (cfg.variant) {
    case ScheduleVariant::Constant:
      return cfg.base_lr;
    case ScheduleVariant::PolynomialQuadratic: {
      const double r = 1.0 - s / total;
      return cfg.base_lr * r * r;
    }
    case ScheduleVariant::OneCycleCosine: {
      const double peak = cfg.warmup_fraction * total;
      const double initial = cfg.max_lr / cfg.div_factor;
      // Snap to the peak so the configured maximum is hit exactly despite rounding in `peak`.
      if (std::abs(s - peak) <= 1e-9 * total) return cfg.max_lr;
      if (s <= peak) return schedule_detail::cosine_anneal(initial, cfg.max_lr, s / peak);
      return schedule_detail::cosine_anneal(cfg.max_lr, cfg.final_lr, (s - peak) / (total - peak));
    }
  }
  return cfg.base_lr;
}

}  // namespace kpose
