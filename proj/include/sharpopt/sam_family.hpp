// Sharpness-aware stepping: SAM, weighted SAM with a decoupled sharpness
// correction, coupled WSAM, and the closed-form SGD variant.
//
// Every variant follows the same two-gradient pattern on a single batch:
//   g~ = grad l_t(w)            (gradient at the current point)
//   d  = perturb(w, g~)         (first-order worst-case direction)
//   g  = grad l_t(w + d)        (gradient at the perturbed point)
// and differs only in how g~ and g reach the base optimizer.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "sharpopt/base_optimizers.hpp"
#include "sharpopt/core.hpp"
#include "sharpopt/objectives.hpp"

namespace sharpopt {

enum class SamMode { Vanilla, SAM, WsamDecoupled, WsamCoupled };

inline std::string to_string(SamMode m) {
  switch (m) {
    case SamMode::Vanilla: return "vanilla";
    case SamMode::SAM: return "sam";
    case SamMode::WsamDecoupled: return "wsam";
    case SamMode::WsamCoupled: return "coupled";
  }
  return "?";
}

struct SamConfig {
  SamMode mode = SamMode::WsamDecoupled;
  double rho = 0.05;
  double sam_eps = 1e-12;
  double gamma = 0.5;
  bool adaptive = false;
  Schedule alpha_schedule = Schedule::constant(0.1);
  /// rho_t = rho for Constant, rho / sqrt(t) for InverseSqrt.
  Schedule::Kind rho_decay = Schedule::Kind::Constant;
  std::optional<double> clip_norm;

  double alpha_at(std::uint64_t t) const { return alpha_schedule.value_at(t); }

  double rho_at(std::uint64_t t) const {
    if (t < 1) throw UsageError("rho_at: t must be >= 1");
    if (rho_decay == Schedule::Kind::Constant) return rho;
    return rho / std::sqrt(static_cast<double>(t));
  }

  /// gamma / (1 - gamma)
  double sharpness_weight() const { return gamma / (1.0 - gamma); }
  /// (1 - 2 gamma) / (1 - gamma)
  double plain_weight() const { return (1.0 - 2.0 * gamma) / (1.0 - gamma); }

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw UsageError("gamma must be in [0,1)");
    if (!(rho >= 0.0) || !std::isfinite(rho)) throw UsageError("rho must be >= 0");
    if (!(sam_eps > 0.0)) throw UsageError("sam_eps must be > 0");
    if (clip_norm && !(*clip_norm > 0.0)) throw UsageError("clip_norm must be > 0");
  }
};

struct StepOutput {
  ParamVector new_w;
  double loss_at_w;
  double grad_tilde_norm;
  /// l_t(w + d) - l_t(w) on the step's batch; unset in Vanilla mode.
  std::optional<double> sharpness_term;
};

/// Standard rule: rho_t g~ / (||g~|| + eps), so ||d|| <= rho_t.
/// Adaptive rule: d_i = rho_t w_i^2 g~_i / (|| |w| (.) g~ || + eps).
inline ParamVector perturb(const ParamVector& w, const ParamVector& g_tilde, double rho_t,
                           double eps, bool adaptive) {
  w.require_same_dim(g_tilde, "perturb");
  if (!adaptive) {
    return (rho_t / (l2_norm(g_tilde) + eps)) * g_tilde;
  }
  std::vector<double> scaled(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double s = std::abs(w[i]) * g_tilde[i];
    acc += s * s;
    scaled[i] = w[i] * w[i] * g_tilde[i];
  }
  const double scale = rho_t / (std::sqrt(acc) + eps);
  for (double& v : scaled) v *= scale;
  return ParamVector(std::move(scaled));
}

/// First-order sharpness: L(w + d) - L(w) with the standard perturbation.
inline double sharpness_estimate(const Objective& obj, const ParamVector& w,
                                 const BatchSpec& batch, double rho_t, double eps) {
  const Evaluation at_w = obj.eval(w, batch);
  const ParamVector delta = perturb(w, at_w.grad, rho_t, eps, false);
  return obj.loss(w + delta, batch) - at_w.loss;
}

/// L(w) + gamma / (1 - gamma) * sharpness. Diagnostic only.
inline double wsam_loss(const Objective& obj, const ParamVector& w, const BatchSpec& batch,
                        double rho_t, double eps, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw UsageError("gamma must be in [0,1)");
  const double base = obj.loss(w, batch);
  if (gamma == 0.0) return base;
  return base + gamma / (1.0 - gamma) * sharpness_estimate(obj, w, batch, rho_t, eps);
}

/// Rescales v to norm `max_norm` when it is longer.
inline ParamVector clip_by_norm(const ParamVector& v, double max_norm) {
  const double n = l2_norm(v);
  if (n <= max_norm) return v;
  return (max_norm / n) * v;
}

namespace detail {

struct TwoGradients {
  double loss_at_w;
  ParamVector g_tilde;
  ParamVector g;
  double loss_at_perturbed;
};

inline TwoGradients two_gradients(const Objective& obj, const ParamVector& w,
                                  const BatchSpec& batch, const SamConfig& cfg, std::uint64_t t) {
  Evaluation at_w = obj.eval(w, batch);
  const ParamVector delta = perturb(w, at_w.grad, cfg.rho_at(t), cfg.sam_eps, cfg.adaptive);
  Evaluation at_p = obj.eval(w + delta, batch);
  return {at_w.loss, std::move(at_w.grad), std::move(at_p.grad), at_p.loss};
}

inline ParamVector maybe_clip(const ParamVector& v, const SamConfig& cfg) {
  return cfg.clip_norm ? clip_by_norm(v, *cfg.clip_norm) : v;
}

}  // namespace detail

/// Plain base-optimizer step on g~; rho, gamma and adaptive are ignored.
inline StepOutput step_vanilla(const Objective& obj, const ParamVector& w, const BatchSpec& batch,
                               BaseOptState& state, const BaseOptConfig& base,
                               const SamConfig& cfg, std::uint64_t t) {
  Evaluation at_w = obj.eval(w, batch);
  const Direction d = compute_direction(state, base, detail::maybe_clip(at_w.grad, cfg));
  return {apply_update(w, cfg.alpha_at(t), d.m, d.b), at_w.loss, l2_norm(at_w.grad), std::nullopt};
}

/// Base optimizer consumes the perturbed gradient g.
inline StepOutput step_sam(const Objective& obj, const ParamVector& w, const BatchSpec& batch,
                           BaseOptState& state, const BaseOptConfig& base, const SamConfig& cfg,
                           std::uint64_t t) {
  auto gg = detail::two_gradients(obj, w, batch, cfg, t);
  const Direction d = compute_direction(state, base, detail::maybe_clip(gg.g, cfg));
  return {apply_update(w, cfg.alpha_at(t), d.m, d.b), gg.loss_at_w, l2_norm(gg.g_tilde),
          gg.loss_at_perturbed - gg.loss_at_w};
}

/// Base optimizer consumes g~; the weighted correction gamma/(1-gamma) (g - g~)
/// is added with the raw step size, outside the preconditioner and history.
inline StepOutput step_wsam_decoupled(const Objective& obj, const ParamVector& w,
                                      const BatchSpec& batch, BaseOptState& state,
                                      const BaseOptConfig& base, const SamConfig& cfg,
                                      std::uint64_t t) {
  auto gg = detail::two_gradients(obj, w, batch, cfg, t);
  const double alpha = cfg.alpha_at(t);
  const Direction d = compute_direction(state, base, detail::maybe_clip(gg.g_tilde, cfg));
  ParamVector new_w = apply_update(w, alpha, d.m, d.b);
  new_w.axpy(-alpha * cfg.sharpness_weight(), gg.g - gg.g_tilde);
  return {std::move(new_w), gg.loss_at_w, l2_norm(gg.g_tilde), gg.loss_at_perturbed - gg.loss_at_w};
}

/// h = gamma/(1-gamma) g + (1-2 gamma)/(1-gamma) g~
inline ParamVector coupled_gradient(const ParamVector& g, const ParamVector& g_tilde, double gamma) {
  const double a = gamma / (1.0 - gamma);
  const double b = (1.0 - 2.0 * gamma) / (1.0 - gamma);
  return a * g + b * g_tilde;
}

/// Base optimizer consumes the composite gradient h.
inline StepOutput step_wsam_coupled(const Objective& obj, const ParamVector& w,
                                    const BatchSpec& batch, BaseOptState& state,
                                    const BaseOptConfig& base, const SamConfig& cfg,
                                    std::uint64_t t) {
  auto gg = detail::two_gradients(obj, w, batch, cfg, t);
  const ParamVector h = coupled_gradient(gg.g, gg.g_tilde, cfg.gamma);
  const Direction d = compute_direction(state, base, detail::maybe_clip(h, cfg));
  return {apply_update(w, cfg.alpha_at(t), d.m, d.b), gg.loss_at_w, l2_norm(gg.g_tilde),
          gg.loss_at_perturbed - gg.loss_at_w};
}

/// Closed-form SGD with WSAM: w - alpha_t (gamma/(1-gamma) g + (1-2gamma)/(1-gamma) g~).
inline StepOutput step_sgd_wsam(const Objective& obj, const ParamVector& w, const BatchSpec& batch,
                                const SamConfig& cfg, std::uint64_t t) {
  auto gg = detail::two_gradients(obj, w, batch, cfg, t);
  ParamVector new_w = w;
  new_w.axpy(-cfg.alpha_at(t), coupled_gradient(gg.g, gg.g_tilde, cfg.gamma));
  return {std::move(new_w), gg.loss_at_w, l2_norm(gg.g_tilde), gg.loss_at_perturbed - gg.loss_at_w};
}

/// Dispatches on cfg.mode.
inline StepOutput step(const Objective& obj, const ParamVector& w, const BatchSpec& batch,
                       BaseOptState& state, const BaseOptConfig& base, const SamConfig& cfg,
                       std::uint64_t t) {
  switch (cfg.mode) {
    case SamMode::Vanilla: return step_vanilla(obj, w, batch, state, base, cfg, t);
    case SamMode::SAM: return step_sam(obj, w, batch, state, base, cfg, t);
    case SamMode::WsamDecoupled: return step_wsam_decoupled(obj, w, batch, state, base, cfg, t);
    case SamMode::WsamCoupled: return step_wsam_coupled(obj, w, batch, state, base, cfg, t);
  }
  throw UsageError("step: unknown mode");
}

}  // namespace sharpopt
