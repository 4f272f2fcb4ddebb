#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowse/rng.hpp"

namespace flowse {

// The three Gaussian probability paths between a clean sample x0 and its
// degraded counterpart y. All of them are affine mean interpolations
//   mu_t = alpha(t) * x0 + beta(t) * y,  alpha + beta = 1,
// and differ in the interpolation weight and the marginal variance:
//
//   SbVe: beta = sigma_t^2 / sigma_1^2, var = sigma_t^2 (1 - sigma_t^2 / sigma_1^2)
//   SbSv: beta = sigma_t^2 / sigma_1^2, var = c
//   Icfm: beta = t,                     var = c
//
// with the variance-exploding schedule sigma_t^2 = c (k^{2t} - 1) / (2 log k).

enum class PathFamily { SbVe, SbSv, Icfm };

inline const char* family_name(PathFamily f) {
  switch (f) {
    case PathFamily::SbVe: return "sb-ve";
    case PathFamily::SbSv: return "sb-sv";
    case PathFamily::Icfm: return "icfm";
  }
  return "?";
}

inline PathFamily family_from_name(const std::string& s) {
  if (s == "sb-ve") return PathFamily::SbVe;
  if (s == "sb-sv") return PathFamily::SbSv;
  if (s == "icfm") return PathFamily::Icfm;
  throw std::invalid_argument("unknown path family: " + s);
}

// |k - 1| below this evaluates the schedule by its analytic k->1 limit c*t;
// the log-ratio form loses all precision as log(k) -> 0.
inline constexpr double kUnitBaseWindow = 1e-4;

struct PathSpec {
  PathFamily family = PathFamily::SbVe;
  double k = 2.6;  // schedule base; unused by Icfm
  double c = 0.4;  // variance scale

  void validate() const {
    if (!(c > 0.0)) throw std::invalid_argument("PathSpec: c must be positive");
    if (family != PathFamily::Icfm) {
      if (!(k > 0.0)) throw std::invalid_argument("PathSpec: k must be positive");
      if (k == 1.0) throw std::invalid_argument("PathSpec: k must differ from 1");
    }
  }
};

struct PathPoint {
  double t = 0.0;
  double alpha = 1.0;  // weight on x0
  double beta = 0.0;   // weight on y
  double var = 0.0;    // marginal variance
};

/// Matched (x0, y) sample pairs of uniform dimension.
struct PairedBatch {
  std::vector<std::vector<double>> x0;
  std::vector<std::vector<double>> y;
  std::size_t dim = 0;

  std::size_t size() const { return x0.size(); }

  void validate() const {
    if (x0.size() != y.size())
      throw std::invalid_argument("PairedBatch: x0 and y must have equal length");
    for (std::size_t i = 0; i < x0.size(); ++i)
      if (x0[i].size() != dim || y[i].size() != dim)
        throw std::invalid_argument("PairedBatch: non-uniform sample dimension");
  }
};

namespace detail {
inline void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("time must lie in [0, 1], got " + std::to_string(t));
}
}  // namespace detail

/// Noise schedule sigma_t^2 of the SB families. Strictly increasing in t with
/// sigma_0^2 = 0; near k = 1 the analytic limit c*t is used. Rejects Icfm,
/// which has no schedule.
inline double sigma_sq(const PathSpec& spec, double t) {
  spec.validate();
  detail::check_time(t);
  if (spec.family == PathFamily::Icfm)
    throw std::invalid_argument("sigma_sq: icfm has no sigma_t schedule");
  if (std::abs(spec.k - 1.0) < kUnitBaseWindow) return spec.c * t;
  return spec.c * (std::pow(spec.k, 2.0 * t) - 1.0) / (2.0 * std::log(spec.k));
}

/// Interpolation weights and marginal variance at time t.
inline PathPoint path_point(const PathSpec& spec, double t) {
  spec.validate();
  detail::check_time(t);
  PathPoint p;
  p.t = t;
  if (spec.family == PathFamily::Icfm) {
    p.beta = t;
    p.alpha = 1.0 - t;
    p.var = spec.c;
    return p;
  }
  const double s1_sq = sigma_sq(spec, 1.0);
  const double st_sq = sigma_sq(spec, t);
  p.beta = st_sq / s1_sq;
  p.alpha = 1.0 - p.beta;
  p.var = spec.family == PathFamily::SbVe ? st_sq * (1.0 - st_sq / s1_sq) : spec.c;
  return p;
}

// How the isotropic noise is applied to a flat vector. ComplexInterleaved
// treats consecutive (re, im) pairs as one circularly-symmetric complex
// coordinate: each real component receives variance var/2 so the complex
// coordinate has total variance var.
enum class NoiseDomain { Real, ComplexInterleaved };

/// Draws x_t = alpha*x0 + beta*y + sigma_{x_t}*eps with eps standard normal
/// per coordinate. Deterministic given the generator state.
inline std::vector<double> sample_perturbation(const PathSpec& spec,
                                               const std::vector<double>& x0,
                                               const std::vector<double>& y, double t,
                                               Rng& rng,
                                               NoiseDomain domain = NoiseDomain::Real) {
  if (x0.size() != y.size())
    throw std::invalid_argument("sample_perturbation: dimension mismatch");
  if (domain == NoiseDomain::ComplexInterleaved && x0.size() % 2 != 0)
    throw std::invalid_argument(
        "sample_perturbation: interleaved complex vectors need even dimension");
  const PathPoint p = path_point(spec, t);
  const double scale = domain == NoiseDomain::Real ? 1.0 : 0.5;
  const double std_dev = std::sqrt(p.var * scale);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = p.alpha * x0[i] + p.beta * y[i] + std_dev * rng.normal();
  return out;
}

/// Path evaluated on an evenly spaced time grid from 0 to 1 inclusive.
inline std::vector<PathPoint> schedule_curve(const PathSpec& spec, int n_points) {
  if (n_points < 2) throw std::invalid_argument("schedule_curve: need at least 2 points");
  std::vector<PathPoint> rows;
  rows.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i)
    rows.push_back(path_point(spec, static_cast<double>(i) / (n_points - 1)));
  return rows;
}

}  // namespace flowse
