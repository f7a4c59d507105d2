// Seeded execution of configured runs and hyperparameter sweeps.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "sharpopt/analysis.hpp"
#include "sharpopt/config.hpp"
#include "sharpopt/objectives.hpp"
#include "sharpopt/sam_family.hpp"

namespace sharpopt {

inline std::shared_ptr<const Objective> build_objective(const ObjectiveSpec& spec) {
  switch (spec.kind) {
    case ObjectiveKind::Toy:
      return std::make_shared<ToyLandscape>();
    case ObjectiveKind::Quadratic: {
      ParamVector a(spec.curvature);
      ParamVector c = spec.center.empty() ? ParamVector::zeros(a.size()) : ParamVector(spec.center);
      if (spec.centers <= 1) return std::make_shared<Quadratic>(std::move(a), std::move(c));
      return std::make_shared<Quadratic>(Quadratic::with_random_centers(
          std::move(a), c, spec.centers, spec.center_scale, spec.data_seed));
    }
    case ObjectiveKind::QuadForm:
      return std::make_shared<QuadraticForm>(spec.matrix_dim, spec.matrix);
    case ObjectiveKind::Logistic: {
      Dataset d = spec.data_path.empty() ? Dataset::synthetic(spec.samples, spec.features, spec.data_seed)
                                         : Dataset::from_csv_file(spec.data_path);
      if (spec.label_noise > 0.0) d.inject_label_noise(spec.label_noise, spec.data_seed);
      return std::make_shared<Logistic>(std::move(d));
    }
  }
  throw UsageError("build_objective: unknown kind");
}

/// Numeric blow-up during a run. Holds the records up to the last finite step.
class RunFailure : public NumericError {
 public:
  RunFailure(const std::string& msg, std::uint64_t step, Trajectory partial)
      : NumericError(msg), step_(step), partial_(std::move(partial)) {}
  std::uint64_t step() const noexcept { return step_; }
  const Trajectory& partial() const noexcept { return partial_; }

 private:
  std::uint64_t step_;
  Trajectory partial_;
};

inline ParamVector initial_point(const RunConfig& cfg, std::size_t dim) {
  if (cfg.init) {
    if (cfg.init->size() != dim) {
      throw ConfigError("run.init", "expected " + std::to_string(dim) + " values");
    }
    return ParamVector(*cfg.init);
  }
  if (!cfg.init_random) return ParamVector::zeros(dim);
  // Separate stream from batch sampling so changing batch_size leaves w_1 intact.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, cfg.init_scale);
  std::vector<double> w(dim);
  for (double& x : w) x = normal(rng);
  return ParamVector(std::move(w));
}

inline bool records_snapshots(const RunConfig& cfg, std::size_t dim) {
  switch (cfg.snapshots) {
    case SnapshotPolicy::Always: return true;
    case SnapshotPolicy::Never: return false;
    case SnapshotPolicy::Auto: return dim <= kAutoSnapshotMaxDim;
  }
  return false;
}

/// Runs cfg.steps steps of the configured variant on `obj`.
inline Trajectory run(const RunConfig& cfg, const Objective& obj) {
  cfg.sam.validate();
  cfg.base.validate();
  const std::size_t n = obj.dim();
  ParamVector w = initial_point(cfg, n);
  const bool snapshot = records_snapshots(cfg, n);

  std::optional<BatchSampler> sampler;
  if (cfg.batch_size > 0 && obj.sample_count() > 0) {
    sampler.emplace(cfg.seed, cfg.batch_size, obj.sample_count());
  }

  BaseOptState state;
  Trajectory traj;
  traj.records.reserve(static_cast<std::size_t>((cfg.steps + cfg.record_every - 1) / cfg.record_every));
  for (std::uint64_t t = 1; t <= cfg.steps; ++t) {
    const BatchSpec batch = sampler ? sampler->next() : BatchSpec::full();
    try {
      StepOutput out = step(obj, w, batch, state, cfg.base, cfg.sam, t);
      if ((t - 1) % cfg.record_every == 0) {
        StepRecord rec;
        rec.t = t;
        if (snapshot) rec.w = w;
        rec.loss = out.loss_at_w;
        rec.grad_norm = batch.is_full() ? out.grad_tilde_norm : l2_norm(obj.grad(w));
        rec.sharpness = out.sharpness_term;
        rec.batch = batch;
        if (!std::isfinite(rec.loss) || (rec.sharpness && !std::isfinite(*rec.sharpness))) {
          throw NumericError("non-finite loss");
        }
        traj.records.push_back(std::move(rec));
      }
      w = std::move(out.new_w);
    } catch (const NumericError& e) {
      traj.final_w = w;
      throw RunFailure("step " + std::to_string(t) + ": " + e.what(), t, std::move(traj));
    } catch (const DomainError& e) {
      traj.final_w = w;
      throw RunFailure("step " + std::to_string(t) + ": " + e.what(), t, std::move(traj));
    }
  }
  traj.final_w = w;
  return traj;
}

inline Trajectory run(const RunConfig& cfg) { return run(cfg, *build_objective(cfg.objective)); }

// ---------------------------------------------------------------------------

struct SweepRow {
  std::size_t index = 0;
  double gamma = 0.0;
  double rho = 0.0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string message;
  double final_loss = 0.0;
  double final_grad_norm = 0.0;
  std::optional<double> lambda_max;
  std::optional<MinimumKind> minimum;
};

/// Cells in grid order: gamma outermost, then rho, alpha, seed. An empty
/// list contributes the base configuration's value. Failed cells are
/// recorded and the sweep continues. `threads == 0` uses hardware
/// concurrency.
inline std::vector<SweepRow> sweep(const SweepGrid& grid, unsigned threads = 1) {
  if (grid.size() > grid.cap) throw UsageError("sweep: grid exceeds cap");
  const RunConfig& base = grid.base;
  auto or_base = [](const auto& list, auto value) {
    using T = decltype(value);
    return list.empty() ? std::vector<T>{value} : std::vector<T>(list.begin(), list.end());
  };
  const auto gammas = or_base(grid.gammas, base.sam.gamma);
  const auto rhos = or_base(grid.rhos, base.sam.rho);
  const auto alphas = or_base(grid.alphas, base.sam.alpha_schedule.base());
  const auto seeds = or_base(grid.seeds, base.seed);

  std::vector<SweepRow> rows;
  for (double g : gammas) {
    for (double r : rhos) {
      for (double a : alphas) {
        for (std::uint64_t s : seeds) {
          SweepRow row;
          row.index = rows.size();
          row.gamma = g;
          row.rho = r;
          row.alpha = a;
          row.seed = s;
          rows.push_back(row);
        }
      }
    }
  }

  const auto objective = build_objective(base.objective);
  const bool toy = base.objective.kind == ObjectiveKind::Toy;

  auto run_cell = [&](SweepRow& row) {
    RunConfig cfg = base;
    cfg.sam.gamma = row.gamma;
    cfg.sam.rho = row.rho;
    cfg.sam.alpha_schedule = Schedule(base.sam.alpha_schedule.kind(), row.alpha);
    cfg.seed = row.seed;
    try {
      const Trajectory traj = run(cfg, *objective);
      const ParamVector& w = *traj.final_w;
      const Evaluation e = objective->eval(w, BatchSpec::full());
      row.final_loss = e.loss;
      row.final_grad_norm = l2_norm(e.grad);
      if (!std::isfinite(row.final_loss)) throw NumericError("non-finite final loss");
      if (grid.eig) {
        PowerIterationOptions opt;
        opt.seed = row.seed;
        row.lambda_max = power_iteration(*objective, w, BatchSpec::full(), opt).lambda_max;
      }
      if (toy) row.minimum = classify_minimum(w);
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.message = e.what();
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(rows.size()));
  if (threads <= 1) {
    for (SweepRow& row : rows) run_cell(row);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned k = 0; k < threads; ++k) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < rows.size(); i = next++) run_cell(rows[i]);
    });
  }
  pool.clear();
  return rows;
}

}  // namespace sharpopt
