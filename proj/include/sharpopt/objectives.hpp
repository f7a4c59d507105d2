// Built-in differentiable objectives behind one evaluation contract, plus a
// central-difference gradient oracle.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sharpopt/core.hpp"

namespace sharpopt {

/// A mini-batch: either the whole dataset or a set of distinct sample indices
/// (0-based).
class BatchSpec {
 public:
  static BatchSpec full() { return BatchSpec(); }

  static BatchSpec of(std::vector<std::size_t> indices) {
    if (indices.empty()) throw UsageError("BatchSpec: index set must be nonempty");
    std::vector<std::size_t> sorted = indices;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw UsageError("BatchSpec: duplicate index");
    }
    BatchSpec b;
    b.indices_ = std::move(indices);
    return b;
  }

  bool is_full() const noexcept { return !indices_.has_value(); }
  const std::vector<std::size_t>& indices() const { return indices_.value(); }

  /// Throws unless the batch is valid for a dataset of `sample_count`
  /// examples. Deterministic objectives (sample_count == 0) only accept the
  /// full batch.
  void validate(std::size_t sample_count) const {
    if (is_full()) return;
    if (sample_count == 0) throw UsageError("BatchSpec: objective has no samples to index");
    for (std::size_t i : *indices_) {
      if (i >= sample_count) throw UsageError("BatchSpec: index out of range");
    }
  }

  friend bool operator==(const BatchSpec&, const BatchSpec&) = default;

 private:
  BatchSpec() = default;
  std::optional<std::vector<std::size_t>> indices_;
};

/// Seeded mini-batch generator: without replacement inside a batch, with
/// replacement across draws.
class BatchSampler {
 public:
  BatchSampler(std::uint64_t seed, std::size_t batch_size, std::size_t dataset_size)
      : rng_(seed), batch_size_(batch_size), dataset_size_(dataset_size) {
    if (batch_size == 0) throw UsageError("BatchSampler: batch_size must be positive");
    if (batch_size > dataset_size) {
      throw UsageError("BatchSampler: batch_size exceeds dataset size");
    }
    pool_.resize(dataset_size);
    std::iota(pool_.begin(), pool_.end(), std::size_t{0});
  }

  BatchSpec next() {
    // Partial Fisher-Yates over a persistent pool; the pool order carries over
    // between draws, which does not bias the uniform selection.
    for (std::size_t i = 0; i < batch_size_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, dataset_size_ - 1);
      std::swap(pool_[i], pool_[pick(rng_)]);
    }
    return BatchSpec::of({pool_.begin(), pool_.begin() + static_cast<std::ptrdiff_t>(batch_size_)});
  }

 private:
  std::mt19937_64 rng_;
  std::size_t batch_size_;
  std::size_t dataset_size_;
  std::vector<std::size_t> pool_;
};

struct Evaluation {
  double loss;
  ParamVector grad;
};

/// Evaluatable loss with exact gradient. Implementations are immutable and
/// their evaluation is pure, so one instance may be shared across threads.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  /// Number of examples addressable by a BatchSpec; 0 for deterministic
  /// objectives.
  virtual std::size_t sample_count() const { return 0; }

  virtual double loss(const ParamVector& w, const BatchSpec& batch) const = 0;
  virtual ParamVector grad(const ParamVector& w, const BatchSpec& batch) const = 0;

  virtual Evaluation eval(const ParamVector& w, const BatchSpec& batch) const {
    return {loss(w, batch), grad(w, batch)};
  }

  double loss(const ParamVector& w) const { return loss(w, BatchSpec::full()); }
  ParamVector grad(const ParamVector& w) const { return grad(w, BatchSpec::full()); }

 protected:
  void check_inputs(const ParamVector& w, const BatchSpec& batch) const {
    if (w.size() != dim()) {
      throw UsageError(name() + ": expected dimension " + std::to_string(dim()) + ", got " +
                       std::to_string(w.size()));
    }
    batch.validate(sample_count());
  }
};

// ---------------------------------------------------------------------------
// Toy landscape: two-component KL mixture over a univariate Gaussian (mu, sigma).

/// KL(N(mu, sigma^2) || N(mu_i, sigma_i^2)).
inline double kl_univariate(double mu, double sigma, double mu_i, double sigma_i) {
  if (!(sigma > 0.0) || !(sigma_i > 0.0)) {
    throw DomainError("kl_univariate: sigma and sigma_i must be > 0");
  }
  return std::log(sigma_i / sigma) +
         (sigma * sigma + (mu - mu_i) * (mu - mu_i)) / (2.0 * sigma_i * sigma_i) - 0.5;
}

struct ToyComponent {
  double mu;
  double sigma;
  double weight;
  double temperature;
};

struct ToyLandscapeParams {
  std::vector<ToyComponent> components{{20.0, 30.0, 0.7, 1.8}, {-20.0, 10.0, 0.3, 1.2}};

  void validate() const {
    if (components.empty()) throw UsageError("ToyLandscapeParams: no components");
    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.sigma > 0.0)) throw UsageError("ToyLandscapeParams: sigma_i must be > 0");
      if (!(c.weight > 0.0)) throw UsageError("ToyLandscapeParams: weights must be > 0");
      if (!(c.temperature > 0.0)) throw UsageError("ToyLandscapeParams: temperatures must be > 0");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw UsageError("ToyLandscapeParams: weights must sum to 1");
  }
};

/// L(mu, sigma) = -log sum_i p_i exp(-K_i(mu, sigma) / T_i^2), evaluated as a
/// negated log-sum-exp. Deterministic; w = (mu, sigma) with sigma > 0.
class ToyLandscape final : public Objective {
 public:
  using Objective::grad;
  using Objective::loss;
  explicit ToyLandscape(ToyLandscapeParams params = {}) : params_(std::move(params)) {
    params_.validate();
  }

  std::string name() const override { return "toy"; }
  std::size_t dim() const override { return 2; }
  const ToyLandscapeParams& params() const noexcept { return params_; }

  double loss(const ParamVector& w, const BatchSpec& batch) const override {
    return eval(w, batch).loss;
  }
  ParamVector grad(const ParamVector& w, const BatchSpec& batch) const override {
    return eval(w, batch).grad;
  }

  Evaluation eval(const ParamVector& w, const BatchSpec& batch) const override {
    check_inputs(w, batch);
    const double mu = w[0];
    const double sigma = w[1];
    if (!(sigma > 0.0)) throw DomainError("toy landscape: sigma must be > 0");

    const std::size_t k = params_.components.size();
    std::vector<double> logits(k);
    std::vector<std::array<double, 2>> dlogit(k);
    for (std::size_t i = 0; i < k; ++i) {
      const auto& c = params_.components[i];
      const double t2 = c.temperature * c.temperature;
      const double s2 = c.sigma * c.sigma;
      logits[i] = std::log(c.weight) - kl_univariate(mu, sigma, c.mu, c.sigma) / t2;
      // d(-K_i / T_i^2) / d(mu, sigma)
      dlogit[i] = {-(mu - c.mu) / s2 / t2, -(sigma / s2 - 1.0 / sigma) / t2};
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double a : logits) z += std::exp(a - top);
    const double lse = top + std::log(z);

    double g_mu = 0.0;
    double g_sigma = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double resp = std::exp(logits[i] - lse);
      g_mu -= resp * dlogit[i][0];
      g_sigma -= resp * dlogit[i][1];
    }
    return {-lse, ParamVector{g_mu, g_sigma}};
  }

 private:
  ToyLandscapeParams params_;
};

inline double toy_loss(const ParamVector& w) { return ToyLandscape().loss(w); }
inline ParamVector toy_grad(const ParamVector& w) { return ToyLandscape().grad(w); }

// ---------------------------------------------------------------------------
// Convex quadratics.

/// loss = 1/2 sum_i A_i (w_i - c_i)^2, grad = A (.) (w - c).
inline Evaluation quadratic_eval(const ParamVector& a, const ParamVector& c, const ParamVector& w) {
  a.require_same_dim(c, "quadratic_eval");
  a.require_same_dim(w, "quadratic_eval");
  double loss = 0.0;
  std::vector<double> g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double r = w[i] - c[i];
    loss += 0.5 * a[i] * r * r;
    g[i] = a[i] * r;
  }
  return {loss, ParamVector(std::move(g))};
}

/// Diagonal quadratic with one or more centers. With a single center it is
/// deterministic; with several, each center is one sample and a batch loss is
/// the mean of the per-center quadratics (the stochastic online setting).
class Quadratic final : public Objective {
 public:
  using Objective::grad;
  using Objective::loss;
  Quadratic(ParamVector curvature, std::vector<ParamVector> centers)
      : curvature_(std::move(curvature)), centers_(std::move(centers)) {
    for (double a : curvature_) {
      if (!(a > 0.0)) throw UsageError("Quadratic: curvature entries must be > 0");
    }
    if (centers_.empty()) throw UsageError("Quadratic: at least one center required");
    for (const auto& c : centers_) curvature_.require_same_dim(c, "Quadratic");
  }

  Quadratic(ParamVector curvature, ParamVector center)
      : Quadratic(std::move(curvature), std::vector<ParamVector>{std::move(center)}) {}

  /// Centers drawn as `mean + scale * N(0, I)` from a seeded generator.
  static Quadratic with_random_centers(ParamVector curvature, const ParamVector& mean,
                                       std::size_t count, double scale, std::uint64_t seed) {
    if (count == 0) throw UsageError("Quadratic: center count must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<ParamVector> centers;
    centers.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      std::vector<double> c(mean.size());
      for (std::size_t i = 0; i < c.size(); ++i) c[i] = mean[i] + scale * normal(rng);
      centers.emplace_back(std::move(c));
    }
    return Quadratic(std::move(curvature), std::move(centers));
  }

  std::string name() const override { return "quadratic"; }
  std::size_t dim() const override { return curvature_.size(); }
  std::size_t sample_count() const override { return centers_.size() > 1 ? centers_.size() : 0; }

  const ParamVector& curvature() const noexcept { return curvature_; }
  const std::vector<ParamVector>& centers() const noexcept { return centers_; }

  /// Minimizer of the batch loss: the mean of the batch centers.
  ParamVector minimizer(const BatchSpec& batch) const {
    batch.validate(sample_count());
    ParamVector acc = ParamVector::zeros(dim());
    std::size_t count = 0;
    for_each_center(batch, [&](const ParamVector& c) {
      acc += c;
      ++count;
    });
    return (1.0 / static_cast<double>(count)) * acc;
  }

  double loss(const ParamVector& w, const BatchSpec& batch) const override {
    return eval(w, batch).loss;
  }
  ParamVector grad(const ParamVector& w, const BatchSpec& batch) const override {
    return eval(w, batch).grad;
  }

  Evaluation eval(const ParamVector& w, const BatchSpec& batch) const override {
    check_inputs(w, batch);
    double loss = 0.0;
    ParamVector g = ParamVector::zeros(dim());
    std::size_t count = 0;
    for_each_center(batch, [&](const ParamVector& c) {
      Evaluation e = quadratic_eval(curvature_, c, w);
      loss += e.loss;
      g += e.grad;
      ++count;
    });
    if (count == 1) return {loss, std::move(g)};
    const double inv = 1.0 / static_cast<double>(count);
    return {loss * inv, inv * std::move(g)};
  }

 private:
  template <typename F>
  void for_each_center(const BatchSpec& batch, F&& f) const {
    if (batch.is_full()) {
      for (const auto& c : centers_) f(c);
    } else {
      for (std::size_t i : batch.indices()) f(centers_[i]);
    }
  }

  ParamVector curvature_;
  std::vector<ParamVector> centers_;
};

/// 1/2 w^T H w for a symmetric H (row-major). Deterministic.
class QuadraticForm final : public Objective {
 public:
  using Objective::grad;
  using Objective::loss;
  QuadraticForm(std::size_t n, std::vector<double> matrix) : n_(n), h_(std::move(matrix)) {
    if (n_ == 0 || h_.size() != n_ * n_) throw UsageError("QuadraticForm: matrix must be n x n");
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        if (h_[i * n_ + j] != h_[j * n_ + i]) throw UsageError("QuadraticForm: matrix must be symmetric");
        if (!std::isfinite(h_[i * n_ + j])) throw UsageError("QuadraticForm: non-finite entry");
      }
    }
  }

  std::string name() const override { return "quadform"; }
  std::size_t dim() const override { return n_; }
  double entry(std::size_t i, std::size_t j) const { return h_[i * n_ + j]; }

  double loss(const ParamVector& w, const BatchSpec& batch) const override {
    return eval(w, batch).loss;
  }
  ParamVector grad(const ParamVector& w, const BatchSpec& batch) const override {
    return eval(w, batch).grad;
  }
  Evaluation eval(const ParamVector& w, const BatchSpec& batch) const override {
    check_inputs(w, batch);
    std::vector<double> hw(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) hw[i] += h_[i * n_ + j] * w[j];
    }
    ParamVector g(std::move(hw));
    return {0.5 * dot(w, g), std::move(g)};
  }

 private:
  std::size_t n_;
  std::vector<double> h_;
};

// ---------------------------------------------------------------------------
// Logistic regression.

/// Row-major feature matrix with binary labels.
struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> features;
  std::vector<int> labels;

  double x(std::size_t r, std::size_t c) const { return features[r * cols + c]; }

  void validate() const {
    if (rows == 0 || cols == 0) throw UsageError("Dataset: empty");
    if (features.size() != rows * cols || labels.size() != rows) {
      throw UsageError("Dataset: inconsistent shape");
    }
    for (int y : labels) {
      if (y != 0 && y != 1) throw UsageError("Dataset: labels must be 0 or 1");
    }
    for (double v : features) {
      if (!std::isfinite(v)) throw UsageError("Dataset: non-finite feature");
    }
  }

  /// Flips round(fraction * rows) labels chosen by a seeded shuffle.
  void inject_label_noise(double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) {
      throw UsageError("Dataset: noise fraction must be in [0, 1)");
    }
    const auto flips = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows)));
    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < flips; ++k) labels[order[k]] = 1 - labels[order[k]];
  }

  /// Gaussian features, labels drawn from a logistic model with a seeded
  /// ground-truth weight vector.
  static Dataset synthetic(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Dataset d;
    d.rows = rows;
    d.cols = cols;
    d.features.resize(rows * cols);
    d.labels.resize(rows);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> truth(cols);
    for (double& t : truth) t = normal(rng);
    for (std::size_t r = 0; r < rows; ++r) {
      double z = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        const double v = normal(rng);
        d.features[r * cols + c] = v;
        z += v * truth[c];
      }
      d.labels[r] = unif(rng) < 1.0 / (1.0 + std::exp(-z)) ? 1 : 0;
    }
    d.validate();
    return d;
  }

  /// CSV with a header row; feature columns followed by a final 0/1 label.
  static Dataset from_csv(std::istream& in) {
    Dataset d;
    std::string line;
    if (!std::getline(in, line)) throw UsageError("dataset CSV: missing header row");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<double> fields;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        try {
          std::size_t used = 0;
          fields.push_back(std::stod(cell, &used));
          if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
          throw UsageError("dataset CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
        }
      }
      if (fields.size() < 2) {
        throw UsageError("dataset CSV line " + std::to_string(lineno) + ": need features and a label");
      }
      if (d.rows == 0) d.cols = fields.size() - 1;
      if (fields.size() - 1 != d.cols) {
        throw UsageError("dataset CSV line " + std::to_string(lineno) + ": inconsistent column count");
      }
      const double y = fields.back();
      if (y != 0.0 && y != 1.0) {
        throw UsageError("dataset CSV line " + std::to_string(lineno) + ": label must be 0 or 1");
      }
      d.features.insert(d.features.end(), fields.begin(), fields.end() - 1);
      d.labels.push_back(static_cast<int>(y));
      ++d.rows;
    }
    d.validate();
    return d;
  }

  static Dataset from_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open dataset file: " + path);
    return from_csv(in);
  }
};

/// Mean binary cross-entropy with a sigmoid link, no bias term.
class Logistic final : public Objective {
 public:
  using Objective::grad;
  using Objective::loss;
  explicit Logistic(Dataset data) : data_(std::move(data)) { data_.validate(); }

  std::string name() const override { return "logistic"; }
  std::size_t dim() const override { return data_.cols; }
  std::size_t sample_count() const override { return data_.rows; }
  const Dataset& data() const noexcept { return data_; }

  double loss(const ParamVector& w, const BatchSpec& batch) const override {
    return eval(w, batch).loss;
  }
  ParamVector grad(const ParamVector& w, const BatchSpec& batch) const override {
    return eval(w, batch).grad;
  }

  Evaluation eval(const ParamVector& w, const BatchSpec& batch) const override {
    check_inputs(w, batch);
    const std::size_t n = data_.cols;
    double loss = 0.0;
    std::vector<double> g(n, 0.0);
    std::size_t count = 0;
    auto visit = [&](std::size_t r) {
      double z = 0.0;
      for (std::size_t c = 0; c < n; ++c) z += data_.x(r, c) * w[c];
      const int y = data_.labels[r];
      // softplus(z) - y z, stable for large |z|
      loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z;
      const double resid = sigmoid(z) - y;
      for (std::size_t c = 0; c < n; ++c) g[c] += resid * data_.x(r, c);
      ++count;
    };
    if (batch.is_full()) {
      for (std::size_t r = 0; r < data_.rows; ++r) visit(r);
    } else {
      for (std::size_t r : batch.indices()) visit(r);
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (double& v : g) v *= inv;
    return {loss * inv, ParamVector(std::move(g))};
  }

  static double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

 private:
  Dataset data_;
};

// ---------------------------------------------------------------------------
// Gradient oracle.

/// Default per-coordinate central-difference step, 1e-5 * (1 + |w_i|).
inline double default_fd_step(double wi) { return 1e-5 * (1.0 + std::abs(wi)); }

/// Central differences per coordinate with a fixed step h.
inline ParamVector finite_diff_grad(const Objective& obj, const ParamVector& w,
                                    const BatchSpec& batch, double h) {
  if (!(h > 0.0)) throw UsageError("finite_diff_grad: h must be > 0");
  std::vector<double> g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    ParamVector up = w;
    ParamVector down = w;
    up.set(i, w[i] + h);
    down.set(i, w[i] - h);
    g[i] = (obj.loss(up, batch) - obj.loss(down, batch)) / (2.0 * h);
  }
  return ParamVector(std::move(g));
}

/// Central differences with the scaled default step per coordinate.
inline ParamVector finite_diff_grad(const Objective& obj, const ParamVector& w,
                                    const BatchSpec& batch) {
  std::vector<double> g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double h = default_fd_step(w[i]);
    ParamVector up = w;
    ParamVector down = w;
    up.set(i, w[i] + h);
    down.set(i, w[i] - h);
    // Divide by the realized step so representation error in w_i +- h cancels.
    g[i] = (obj.loss(up, batch) - obj.loss(down, batch)) / (up[i] - down[i]);
  }
  return ParamVector(std::move(g));
}

/// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_l2_error(const ParamVector& a, const ParamVector& b) {
  const double scale = std::max(l2_norm(a), l2_norm(b));
  if (scale == 0.0) return 0.0;
  return l2_norm(a - b) / scale;
}

}  // namespace sharpopt
