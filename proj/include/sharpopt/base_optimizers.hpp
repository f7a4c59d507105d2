// Base optimizers as (direction, preconditioner) generators over a gradient
// history: SGD, SGD with momentum, Adam.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "sharpopt/core.hpp"

namespace sharpopt {

enum class BaseKind { SGD, SGDM, Adam };

inline std::string to_string(BaseKind k) {
  switch (k) {
    case BaseKind::SGD: return "sgd";
    case BaseKind::SGDM: return "sgdm";
    case BaseKind::Adam: return "adam";
  }
  return "?";
}

struct BaseOptConfig {
  BaseKind kind = BaseKind::SGD;
  double momentum_coeff = 0.9;  // SGDM
  double beta1 = 0.9;           // Adam
  double beta2 = 0.999;         // Adam
  double eps_adam = 1e-8;       // Adam, added after the square root

  static BaseOptConfig sgd() { return {}; }
  static BaseOptConfig sgdm(double coeff) {
    BaseOptConfig c;
    c.kind = BaseKind::SGDM;
    c.momentum_coeff = coeff;
    return c;
  }
  static BaseOptConfig adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    BaseOptConfig c;
    c.kind = BaseKind::Adam;
    c.beta1 = beta1;
    c.beta2 = beta2;
    c.eps_adam = eps;
    return c;
  }

  void validate() const {
    auto unit = [](double v) { return v >= 0.0 && v < 1.0; };
    if (!unit(momentum_coeff)) throw UsageError("momentum must be in [0,1)");
    if (!unit(beta1)) throw UsageError("beta1 must be in [0,1)");
    if (!unit(beta2)) throw UsageError("beta2 must be in [0,1)");
    if (!(eps_adam > 0.0)) throw UsageError("adam_eps must be > 0");
  }
};

struct Direction {
  ParamVector m;
  DiagPrecond b;
};

/// Per-run optimizer history. Buffers are created zero-filled on the first
/// gradient; the state depends only on the gradient sequence it has consumed.
class BaseOptState {
 public:
  std::uint64_t step_count() const noexcept { return t_; }
  const std::optional<ParamVector>& momentum() const noexcept { return momentum_; }
  const std::optional<ParamVector>& first_moment() const noexcept { return first_; }
  const std::optional<ParamVector>& second_moment() const noexcept { return second_; }

  friend Direction compute_direction(BaseOptState& state, const BaseOptConfig& cfg,
                                     const ParamVector& g);

 private:
  void ensure_buffers(std::size_t n) {
    if (dim_ == 0) {
      dim_ = n;
      return;
    }
    if (dim_ != n) throw UsageError("compute_direction: gradient dimension changed between steps");
  }

  std::uint64_t t_ = 0;
  std::size_t dim_ = 0;
  std::optional<ParamVector> momentum_;
  std::optional<ParamVector> first_;
  std::optional<ParamVector> second_;
};

/// Consumes one gradient and returns (m_t, B_t).
///   SGD:  (g_t, I)
///   SGDM: (sum_i c^i g_{t-i}, I) via m <- c m + g, no dampening
///   Adam: bias-corrected first moment, diag(sqrt(bias-corrected v) + eps)
inline Direction compute_direction(BaseOptState& state, const BaseOptConfig& cfg,
                                   const ParamVector& g) {
  state.ensure_buffers(g.size());
  state.t_ += 1;
  switch (cfg.kind) {
    case BaseKind::SGD:
      return {g, DiagPrecond::identity()};

    case BaseKind::SGDM: {
      if (!state.momentum_) state.momentum_ = ParamVector::zeros(g.size());
      ParamVector& buf = *state.momentum_;
      buf *= cfg.momentum_coeff;
      buf += g;
      return {buf, DiagPrecond::identity()};
    }

    case BaseKind::Adam: {
      if (!state.first_) {
        state.first_ = ParamVector::zeros(g.size());
        state.second_ = ParamVector::zeros(g.size());
      }
      ParamVector& m1 = *state.first_;
      ParamVector& m2 = *state.second_;
      const auto t = static_cast<double>(state.t_);
      const double c1 = 1.0 - std::pow(cfg.beta1, t);
      const double c2 = 1.0 - std::pow(cfg.beta2, t);
      std::vector<double> m_hat(g.size());
      std::vector<double> denom(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        m1.set(i, cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * g[i]);
        m2.set(i, cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * g[i] * g[i]);
        m_hat[i] = m1[i] / c1;
        denom[i] = std::sqrt(m2[i] / c2) + cfg.eps_adam;
      }
      return {ParamVector(std::move(m_hat)), DiagPrecond::diagonal(ParamVector(std::move(denom)))};
    }
  }
  throw UsageError("compute_direction: unknown base optimizer");
}

/// w - alpha_t B^{-1} m
inline ParamVector apply_update(const ParamVector& w, double alpha_t, const ParamVector& m,
                                const DiagPrecond& b) {
  w.require_same_dim(m, "apply_update");
  ParamVector out = w;
  out.axpy(-alpha_t, precond_solve(b, m));
  return out;
}

}  // namespace sharpopt
