#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowse/linalg.hpp"
#include "flowse/model.hpp"
#include "flowse/paths.hpp"
#include "flowse/rng.hpp"
#include "flowse/sampler.hpp"

namespace flowse {

// Linear-Gaussian worlds where every quantity the learned models approximate
// has a closed form: the conditional mean E[x0 | y], the per-time posterior
// mean E[x0 | x_t, y] (the exact DP optimum), and the MMSE floor. These are
// the ground truth the test suite measures against.

struct GaussianWorld {
  std::size_t dim = 1;
  std::vector<double> mean_x0;
  Matrix cov_x0;
  Matrix degradation_a;       // y = A x0 + u + n
  std::vector<double> offset_u;
  Matrix cov_noise;           // positive definite, or exactly zero

  static GaussianWorld standard_1d() {
    GaussianWorld w;
    w.dim = 1;
    w.mean_x0 = {0.0};
    w.cov_x0 = Matrix::identity(1);
    w.degradation_a = Matrix::identity(1);
    w.offset_u = {0.0};
    w.cov_noise = Matrix::identity(1);
    return w;
  }

  bool noise_free() const {
    for (double v : cov_noise.data)
      if (v != 0.0) return false;
    return true;
  }

  void validate() const {
    if (dim == 0) throw std::invalid_argument("GaussianWorld: dim must be positive");
    if (mean_x0.size() != dim || offset_u.size() != dim)
      throw std::invalid_argument("GaussianWorld: mean/offset size mismatch");
    if (cov_x0.rows != dim || cov_x0.cols != dim || cov_noise.rows != dim ||
        cov_noise.cols != dim || degradation_a.rows != dim || degradation_a.cols != dim)
      throw std::invalid_argument("GaussianWorld: matrix shape mismatch");
    cholesky(cov_x0);  // SPD or throw
    cholesky(matmul(degradation_a, transpose(degradation_a)));  // full rank or throw
    if (!noise_free()) cholesky(cov_noise);
  }
};

namespace detail {

inline std::vector<double> sample_gaussian(const std::vector<double>& mean,
                                           const Matrix& chol_lower, Rng& rng) {
  const std::size_t d = mean.size();
  std::vector<double> z(d);
  for (double& v : z) v = rng.normal();
  std::vector<double> out = mean;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) out[i] += chol_lower(i, j) * z[j];
  return out;
}

/// Cov(y, y) = A cov_x0 A^T + cov_noise.
inline Matrix cov_y(const GaussianWorld& w) {
  Matrix s = matmul(matmul(w.degradation_a, w.cov_x0), transpose(w.degradation_a));
  for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] += w.cov_noise.data[i];
  return s;
}

inline std::vector<double> mean_y(const GaussianWorld& w) {
  std::vector<double> m = matvec(w.degradation_a, w.mean_x0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] += w.offset_u[i];
  return m;
}

}  // namespace detail

inline std::pair<std::vector<double>, std::vector<double>> sample_pair(
    const GaussianWorld& w, Rng& rng) {
  const Matrix l0 = cholesky(w.cov_x0);
  std::vector<double> x0 = detail::sample_gaussian(w.mean_x0, l0, rng);
  std::vector<double> y = matvec(w.degradation_a, x0);
  for (std::size_t i = 0; i < w.dim; ++i) y[i] += w.offset_u[i];
  if (!w.noise_free()) {
    const Matrix ln = cholesky(w.cov_noise);
    const std::vector<double> zero(w.dim, 0.0);
    const std::vector<double> n = detail::sample_gaussian(zero, ln, rng);
    for (std::size_t i = 0; i < w.dim; ++i) y[i] += n[i];
  }
  return {std::move(x0), std::move(y)};
}

inline PairedBatch sample_batch(const GaussianWorld& w, std::size_t n, Rng& rng) {
  PairedBatch b;
  b.dim = w.dim;
  b.x0.reserve(n);
  b.y.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [x0, y] = sample_pair(w, rng);
    b.x0.push_back(std::move(x0));
    b.y.push_back(std::move(y));
  }
  return b;
}

/// E[x0 | y] = m + cov_x0 A^T (A cov_x0 A^T + cov_noise)^{-1} (y - A m - u).
inline std::vector<double> conditional_mean_x0_given_y(const GaussianWorld& w,
                                                       const std::vector<double>& y) {
  if (y.size() != w.dim)
    throw std::invalid_argument("conditional_mean_x0_given_y: dimension mismatch");
  const Matrix sy = detail::cov_y(w);
  const std::vector<double> my = detail::mean_y(w);
  std::vector<double> r(w.dim);
  for (std::size_t i = 0; i < w.dim; ++i) r[i] = y[i] - my[i];
  const std::vector<double> wvec = solve_spd(sy, r);
  const Matrix cross = matmul(w.cov_x0, transpose(w.degradation_a));  // Cov(x0, y)
  std::vector<double> out = w.mean_x0;
  const std::vector<double> add = matvec(cross, wvec);
  for (std::size_t i = 0; i < w.dim; ++i) out[i] += add[i];
  return out;
}

/// Mean per-coordinate MMSE of estimating x0 from y:
/// trace(cov_x0 - Cov(x0,y) cov_y^{-1} Cov(y,x0)) / dim.
inline double conditional_mmse(const GaussianWorld& w) {
  const Matrix sy = detail::cov_y(w);
  const Matrix cross = matmul(w.cov_x0, transpose(w.degradation_a));
  const Matrix solved = solve_spd(sy, transpose(cross));
  const Matrix reduction = matmul(cross, solved);
  double trace = 0.0;
  for (std::size_t i = 0; i < w.dim; ++i) trace += w.cov_x0(i, i) - reduction(i, i);
  return trace / static_cast<double>(w.dim);
}

/// Exact DP optimum E[x0 | x_t, y] under x_t = alpha x0 + beta y + sigma eps.
/// At alpha = 0 the perturbed sample carries no information about x0 beyond y,
/// so the result is exactly conditional_mean_x0_given_y; at var = 0 with
/// alpha != 0, x0 is observed and recovered as (x_t - beta y) / alpha.
inline std::vector<double> posterior_mean_x0(const GaussianWorld& w, const PathSpec& spec,
                                             const std::vector<double>& x_t,
                                             const std::vector<double>& y, double t) {
  if (x_t.size() != w.dim || y.size() != w.dim)
    throw std::invalid_argument("posterior_mean_x0: dimension mismatch");
  const PathPoint p = path_point(spec, t);
  if (p.alpha == 0.0) return conditional_mean_x0_given_y(w, y);
  if (p.var == 0.0) {
    std::vector<double> out(w.dim);
    for (std::size_t i = 0; i < w.dim; ++i) out[i] = (x_t[i] - p.beta * y[i]) / p.alpha;
    return out;
  }

  const std::size_t d = w.dim;
  const Matrix sy = detail::cov_y(w);
  const Matrix c0y = matmul(w.cov_x0, transpose(w.degradation_a));  // Cov(x0, y)
  const Matrix cy0 = transpose(c0y);

  // Cov(x0, x_t) = alpha cov_x0 + beta Cov(x0, y)
  Matrix c0t(d, d);
  for (std::size_t i = 0; i < d * d; ++i)
    c0t.data[i] = p.alpha * w.cov_x0.data[i] + p.beta * c0y.data[i];

  // Cov(x_t, y) = alpha Cov(x0, y) + beta cov_y
  Matrix cty(d, d);
  for (std::size_t i = 0; i < d * d; ++i)
    cty.data[i] = p.alpha * c0y.data[i] + p.beta * sy.data[i];

  // Cov(x_t, x_t) = alpha^2 cov_x0 + alpha beta (Cov(x0,y) + Cov(y,x0))
  //                 + beta^2 cov_y + var I
  Matrix ctt(d, d);
  for (std::size_t i = 0; i < d * d; ++i)
    ctt.data[i] = p.alpha * p.alpha * w.cov_x0.data[i] +
                  p.alpha * p.beta * (c0y.data[i] + cy0.data[i]) +
                  p.beta * p.beta * sy.data[i];
  for (std::size_t i = 0; i < d; ++i) ctt(i, i) += p.var;

  Matrix joint(2 * d, 2 * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      joint(i, j) = ctt(i, j);
      joint(i, d + j) = cty(i, j);
      joint(d + i, j) = cty(j, i);
      joint(d + i, d + j) = sy(i, j);
    }

  const std::vector<double> my = detail::mean_y(w);
  std::vector<double> r(2 * d);
  for (std::size_t i = 0; i < d; ++i) {
    const double mxt = p.alpha * w.mean_x0[i] + p.beta * my[i];
    r[i] = x_t[i] - mxt;
    r[d + i] = y[i] - my[i];
  }
  const std::vector<double> wvec = solve_spd(joint, r);

  std::vector<double> out = w.mean_x0;
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      acc += c0t(i, j) * wvec[j] + c0y(i, j) * wvec[d + j];
    out[i] += acc;
  }
  return out;
}

/// The exact DP predictor as a sampler-compatible callable.
inline Predictor oracle_dp_predictor(GaussianWorld w, PathSpec spec) {
  w.validate();
  spec.validate();
  return [w = std::move(w), spec](const std::vector<double>& x_t,
                                  const std::vector<double>& y, double t) {
    return posterior_mean_x0(w, spec, x_t, y, t);
  };
}

/// The exact FM predictor E[x0 - y | x_t, y] (ICFM only).
inline Predictor oracle_fm_predictor(GaussianWorld w, PathSpec spec) {
  w.validate();
  spec.validate();
  if (spec.family != PathFamily::Icfm)
    throw std::invalid_argument("oracle_fm_predictor: fm is defined on the icfm path only");
  return [w = std::move(w), spec](const std::vector<double>& x_t,
                                  const std::vector<double>& y, double t) {
    std::vector<double> out = posterior_mean_x0(w, spec, x_t, y, t);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
    return out;
  };
}

/// Energy distance V-statistic between two empirical samples:
/// 2 E|a - b| - E|a - a'| - E|b - b'| with Euclidean norms.
inline double energy_distance(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("energy_distance: empty sample set");
  const std::size_t d = a.front().size();
  for (const auto& v : a)
    if (v.size() != d) throw std::invalid_argument("energy_distance: ragged sample set");
  for (const auto& v : b)
    if (v.size() != d) throw std::invalid_argument("energy_distance: dimension mismatch");
  const auto dist = [d](const std::vector<double>& p, const std::vector<double>& q) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = p[j] - q[j];
      acc += diff * diff;
    }
    return std::sqrt(acc);
  };
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (const auto& p : a)
    for (const auto& q : b) ab += dist(p, q);
  for (const auto& p : a)
    for (const auto& q : a) aa += dist(p, q);
  for (const auto& p : b)
    for (const auto& q : b) bb += dist(p, q);
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  return 2.0 * ab / (n * m) - aa / (n * n) - bb / (m * m);
}

inline double mean_squared_error(const std::vector<std::vector<double>>& a,
                                 const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("mean_squared_error: size mismatch");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size())
      throw std::invalid_argument("mean_squared_error: dimension mismatch");
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      const double d = a[i][j] - b[i][j];
      acc += d * d;
    }
    count += a[i].size();
  }
  return acc / static_cast<double>(count);
}

// Toy data generators behind one tagged config so the CLI can name them.

enum class ToyKind { GaussianWorld1d, TwoArcs2d };

inline const char* toy_kind_name(ToyKind k) {
  switch (k) {
    case ToyKind::GaussianWorld1d: return "gaussian-world";
    case ToyKind::TwoArcs2d: return "two-arcs-2d";
  }
  return "?";
}

inline ToyKind toy_kind_from_name(const std::string& s) {
  if (s == "gaussian-world") return ToyKind::GaussianWorld1d;
  if (s == "two-arcs-2d") return ToyKind::TwoArcs2d;
  throw std::invalid_argument("unknown toy dataset kind: " + s);
}

struct ToyDataset {
  ToyKind kind = ToyKind::GaussianWorld1d;
  std::uint64_t seed = 0;
  GaussianWorld world = GaussianWorld::standard_1d();
  // Two-arcs degradation: y = x0 + shift + sigma * eps.
  std::array<double, 2> arc_shift{1.0, -0.5};
  double arc_noise_sigma = 0.3;

  std::size_t dim() const { return kind == ToyKind::TwoArcs2d ? 2 : world.dim; }

  void validate() const {
    if (kind == ToyKind::GaussianWorld1d) world.validate();
    if (kind == ToyKind::TwoArcs2d && !(arc_noise_sigma >= 0.0))
      throw std::invalid_argument("ToyDataset: arc noise sigma must be nonnegative");
  }
};

/// Clean points on two interleaved half-circles (upper arc of the unit circle
/// and its reflected, shifted twin); degraded by a fixed shift plus isotropic
/// Gaussian noise.
inline PairedBatch sample_toy_batch(const ToyDataset& ds, std::size_t n, Rng& rng) {
  ds.validate();
  if (ds.kind == ToyKind::GaussianWorld1d) return sample_batch(ds.world, n, rng);
  PairedBatch b;
  b.dim = 2;
  b.x0.reserve(n);
  b.y.reserve(n);
  constexpr double pi = 3.141592653589793238463;
  for (std::size_t i = 0; i < n; ++i) {
    const bool lower = rng.uniform() < 0.5;
    const double theta = pi * rng.uniform();
    std::vector<double> x0(2);
    if (!lower) {
      x0[0] = std::cos(theta);
      x0[1] = std::sin(theta);
    } else {
      x0[0] = 1.0 - std::cos(theta);
      x0[1] = 0.5 - std::sin(theta);
    }
    std::vector<double> y(2);
    for (int j = 0; j < 2; ++j)
      y[static_cast<std::size_t>(j)] = x0[static_cast<std::size_t>(j)] +
                                       ds.arc_shift[static_cast<std::size_t>(j)] +
                                       ds.arc_noise_sigma * rng.normal();
    b.x0.push_back(std::move(x0));
    b.y.push_back(std::move(y));
  }
  return b;
}

inline BatchSource toy_batch_source(ToyDataset ds) {
  ds.validate();
  return [ds = std::move(ds)](int n, Rng& rng) {
    return sample_toy_batch(ds, static_cast<std::size_t>(n), rng);
  };
}

}  // namespace flowse
