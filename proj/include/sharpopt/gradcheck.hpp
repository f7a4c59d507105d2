// Reference instances of every built-in objective and the analytic-vs-
// central-difference gradient check run over them.
#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "sharpopt/objectives.hpp"

namespace sharpopt {

struct NamedObjective {
  std::string label;
  std::shared_ptr<const Objective> objective;
};

/// One small instance of each built-in problem (all n <= 10).
inline std::vector<NamedObjective> builtin_objectives() {
  std::vector<NamedObjective> out;
  out.push_back({"toy", std::make_shared<ToyLandscape>()});
  out.push_back({"quadratic", std::make_shared<Quadratic>(ParamVector{2.0, 1.0, 0.5, 3.0},
                                                          ParamVector{1.0, -1.0, 0.0, 2.0})});
  out.push_back({"quadratic-stochastic",
                 std::make_shared<Quadratic>(Quadratic::with_random_centers(
                     ParamVector{1.0, 4.0, 0.25}, ParamVector{0.0, 1.0, -1.0}, 50, 1.0, 7))});
  out.push_back({"quadform",
                 std::make_shared<QuadraticForm>(3, std::vector<double>{4.0, 1.0, 0.0,  //
                                                                        1.0, 3.0, 0.5,  //
                                                                        0.0, 0.5, 1.0})});
  out.push_back({"logistic", std::make_shared<Logistic>(Dataset::synthetic(80, 5, 11))});
  return out;
}

/// A random evaluation point inside the objective's domain.
inline ParamVector sample_point(const Objective& obj, std::mt19937_64& rng) {
  if (obj.name() == "toy") {
    std::uniform_real_distribution<double> mu(-30.0, 30.0);
    std::uniform_real_distribution<double> sigma(2.0, 40.0);
    const double m = mu(rng);
    return ParamVector{m, sigma(rng)};
  }
  std::normal_distribution<double> normal(0.0, 2.0);
  std::vector<double> w(obj.dim());
  for (double& x : w) x = normal(rng);
  return ParamVector(std::move(w));
}

/// A random batch: full for deterministic objectives, otherwise a quarter of
/// the samples (at least one).
inline BatchSpec sample_batch(const Objective& obj, std::mt19937_64& rng) {
  if (obj.sample_count() == 0) return BatchSpec::full();
  const std::size_t m = obj.sample_count();
  BatchSampler sampler(rng(), std::max<std::size_t>(1, m / 4), m);
  return sampler.next();
}

struct GradCheckResult {
  std::string label;
  int points = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

inline constexpr double kGradCheckTolerance = 1e-5;

/// Relative L2 error of the analytic gradient against central differences
/// with h = 1e-5 (1 + |w_i|), over `points` seeded random (w, batch) pairs.
inline GradCheckResult check_gradient(const NamedObjective& named, int points, std::uint64_t seed,
                                      double tol = kGradCheckTolerance) {
  std::mt19937_64 rng(seed);
  GradCheckResult res{named.label, points, 0.0, true};
  for (int k = 0; k < points; ++k) {
    const ParamVector w = sample_point(*named.objective, rng);
    const BatchSpec batch = sample_batch(*named.objective, rng);
    const ParamVector analytic = named.objective->grad(w, batch);
    const ParamVector numeric = finite_diff_grad(*named.objective, w, batch);
    res.max_rel_error = std::max(res.max_rel_error, relative_l2_error(analytic, numeric));
  }
  res.passed = res.max_rel_error < tol;
  return res;
}

}  // namespace sharpopt
