#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowse/paths.hpp"

namespace flowse {

// Reverse-time Euler recurrence
//   x_{t_{n-1}} = a_n x_{t_n} + b_n F(x_{t_n}, y, t_n) + c_n y,   x_{t_N} = y,
// on a strictly decreasing grid t_N > ... > t_0 = 0, with the coefficient
// triple (a_n, b_n, c_n) fixed by the path family, plus one-step direct
// data prediction.

enum class LossKind { Dp, Fm };  // what the predictor was trained to output
enum class InferenceMode { Ode, Ddp };

inline const char* loss_name(LossKind k) { return k == LossKind::Dp ? "dp" : "fm"; }

inline LossKind loss_from_name(const std::string& s) {
  if (s == "dp") return LossKind::Dp;
  if (s == "fm") return LossKind::Fm;
  throw std::invalid_argument("unknown loss kind: " + s);
}

inline const char* inference_mode_name(InferenceMode m) {
  return m == InferenceMode::Ode ? "ode" : "ddp";
}

inline InferenceMode inference_mode_from_name(const std::string& s) {
  if (s == "ode") return InferenceMode::Ode;
  if (s == "ddp") return InferenceMode::Ddp;
  throw std::invalid_argument("unknown inference mode: " + s);
}

// The SB coefficients involve bar_sigma_t, a complement of sigma_t against
// sigma_1. Difference is the plain sigma_1 - sigma_t; RootOfSquares is the
// sqrt(sigma_1^2 - sigma_t^2) alternative, kept selectable for comparison.
enum class BarSigmaConvention { Difference, RootOfSquares };

inline const char* bar_sigma_name(BarSigmaConvention c) {
  return c == BarSigmaConvention::Difference ? "difference" : "root-of-squares";
}

inline BarSigmaConvention bar_sigma_from_name(const std::string& s) {
  if (s == "difference") return BarSigmaConvention::Difference;
  if (s == "root-of-squares") return BarSigmaConvention::RootOfSquares;
  throw std::invalid_argument("unknown bar-sigma convention: " + s);
}

/// Strictly decreasing time grid for the reverse sampler. times.front() is
/// the start (1 unless capped), times.back() is exactly 0.
struct Schedule {
  std::vector<double> times;

  int n_steps() const { return static_cast<int>(times.size()) - 1; }

  static Schedule uniform(int n_steps) { return uniform_capped(n_steps, 1.0); }

  /// Grid from t_max down to 0. t_max < 1 skips the upper boundary, trading
  /// exactness of the start state for regular coefficients on every step.
  static Schedule uniform_capped(int n_steps, double t_max) {
    if (n_steps < 1) throw std::invalid_argument("Schedule: need n_steps >= 1");
    if (!(t_max > 0.0 && t_max <= 1.0))
      throw std::invalid_argument("Schedule: t_max must lie in (0, 1]");
    Schedule s;
    s.times.resize(static_cast<std::size_t>(n_steps) + 1);
    for (int i = 0; i <= n_steps; ++i)
      s.times[static_cast<std::size_t>(i)] = t_max * (n_steps - i) / n_steps;
    s.times.front() = t_max;
    s.times.back() = 0.0;
    return s;
  }

  bool is_uniform(double tol = 1e-12) const {
    if (times.size() < 2) return true;
    const double h = times[0] - times[1];
    for (std::size_t i = 1; i + 1 < times.size(); ++i)
      if (std::abs((times[i] - times[i + 1]) - h) > tol) return false;
    return true;
  }

  void validate() const {
    if (times.size() < 2) throw std::invalid_argument("Schedule: need at least 2 times");
    if (!(times.front() > 0.0 && times.front() <= 1.0))
      throw std::invalid_argument("Schedule: start time must lie in (0, 1]");
    if (times.back() != 0.0) throw std::invalid_argument("Schedule: final time must be 0");
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
      if (!(times[i] > times[i + 1]))
        throw std::invalid_argument("Schedule: times must be strictly decreasing");
  }
};

/// One (a, b, c) triple of the Euler recurrence. step_index follows the
/// reverse count: step n maps x_{t_n} to x_{t_{n-1}}.
struct StepCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  int step_index = 0;
};

struct InferenceConfig {
  PathSpec path;
  LossKind loss_kind = LossKind::Dp;
  int n_steps = 50;
  InferenceMode mode = InferenceMode::Ode;
  BarSigmaConvention bar_sigma = BarSigmaConvention::Difference;
  double t_max = 1.0;  // < 1 starts the grid below the boundary (comparison knob)

  void validate() const {
    path.validate();
    if (loss_kind == LossKind::Fm && path.family != PathFamily::Icfm)
      throw std::invalid_argument("InferenceConfig: fm loss requires the icfm path");
    if (n_steps < 1) throw std::invalid_argument("InferenceConfig: need n_steps >= 1");
    if (!(t_max > 0.0 && t_max <= 1.0))
      throw std::invalid_argument("InferenceConfig: t_max must lie in (0, 1]");
  }

  Schedule make_schedule() const { return Schedule::uniform_capped(n_steps, t_max); }
};

namespace detail {
inline double bar_sigma(double sigma, double sigma1, BarSigmaConvention conv) {
  return conv == BarSigmaConvention::Difference
             ? sigma1 - sigma
             : std::sqrt(std::max(0.0, sigma1 * sigma1 - sigma * sigma));
}
}  // namespace detail

/// SB coefficient triple for the step t_n -> t_prev.
///
/// Interior steps (t_n < 1) use
///   a = (s_p bs_p) / (s_n bs_n)
///   b = (bs_p^2 - bs_n s_p bs_p / s_n) / sigma_1^2
///   c = (s_p^2  - s_n  s_p bs_p / bs_n) / sigma_1^2
/// with s = sigma_t and bs = bar_sigma_t; they satisfy a + b + c = 1 and
/// transport the path mean exactly.
///
/// At t_n = 1 the generic a and c are individually infinite (bs_n = 0), but
/// the start state is y, so the combination a*y + c*y has the finite limit
/// (s_p^2 / sigma_1^2) * y. The returned cancelled form (a = 0,
/// b = bs_p^2 / sigma_1^2, c = s_p^2 / sigma_1^2) is valid only because
/// x_{t_N} = y.
inline StepCoefficients sb_step_coeffs(const PathSpec& spec, double t_n, double t_prev,
                                       BarSigmaConvention conv = BarSigmaConvention::Difference,
                                       int step_index = 0) {
  spec.validate();
  if (spec.family == PathFamily::Icfm)
    throw std::invalid_argument("sb_step_coeffs: icfm uses icfm_step_coeffs");
  if (!(t_prev < t_n))
    throw std::invalid_argument("sb_step_coeffs: need t_prev < t_n");
  detail::check_time(t_n);
  detail::check_time(t_prev);

  const double s1_sq = sigma_sq(spec, 1.0);
  const double s1 = std::sqrt(s1_sq);
  const double sp = std::sqrt(sigma_sq(spec, t_prev));
  const double bsp = detail::bar_sigma(sp, s1, conv);

  StepCoefficients k;
  k.step_index = step_index;
  if (t_n == 1.0) {
    k.a = 0.0;
    k.b = bsp * bsp / s1_sq;
    k.c = sp * sp / s1_sq;
    return k;
  }
  const double sn = std::sqrt(sigma_sq(spec, t_n));
  const double bsn = detail::bar_sigma(sn, s1, conv);
  k.a = (sp * bsp) / (sn * bsn);
  k.b = (bsp * bsp - bsn * sp * bsp / sn) / s1_sq;
  k.c = (sp * sp - sn * sp * bsp / bsn) / s1_sq;
  return k;
}

/// ICFM coefficient triple: (1, 1/N, -1/N) for data prediction,
/// (1, 1/N, 0) for flow matching. Time-independent on a uniform grid.
inline StepCoefficients icfm_step_coeffs(LossKind loss_kind, int n_steps,
                                         int step_index = 0) {
  if (n_steps < 1) throw std::invalid_argument("icfm_step_coeffs: need n_steps >= 1");
  StepCoefficients k;
  k.step_index = step_index;
  k.a = 1.0;
  k.b = 1.0 / n_steps;
  k.c = loss_kind == LossKind::Dp ? -1.0 / n_steps : 0.0;
  return k;
}

/// Predictor interface of the sampler: F(x_t, y, t).
using Predictor =
    std::function<std::vector<double>(const std::vector<double>&,
                                      const std::vector<double>&, double)>;

/// Runs the reverse Euler recurrence from x_{t_N} = y down to t = 0 and
/// returns the state at every grid time, x_{t_N} = y first. Deterministic;
/// no noise is injected between steps.
inline std::vector<std::vector<double>> solve_ode_trace(const Predictor& predict,
                                                        const std::vector<double>& y,
                                                        const InferenceConfig& cfg,
                                                        const Schedule& schedule) {
  cfg.validate();
  schedule.validate();
  if (schedule.n_steps() != cfg.n_steps)
    throw std::invalid_argument("solve_ode: schedule inconsistent with n_steps");
  if (cfg.path.family == PathFamily::Icfm && !schedule.is_uniform())
    throw std::invalid_argument(
        "solve_ode: icfm coefficients presume a uniform grid");

  const int n_steps = schedule.n_steps();
  std::vector<std::vector<double>> trace;
  trace.reserve(static_cast<std::size_t>(n_steps) + 1);
  trace.push_back(y);
  std::vector<double> x = y;
  for (int i = 0; i < n_steps; ++i) {
    const int step = n_steps - i;  // reverse count: N, ..., 1
    const double t_n = schedule.times[static_cast<std::size_t>(i)];
    const double t_prev = schedule.times[static_cast<std::size_t>(i) + 1];
    const StepCoefficients k =
        cfg.path.family == PathFamily::Icfm
            ? icfm_step_coeffs(cfg.loss_kind, n_steps, step)
            : sb_step_coeffs(cfg.path, t_n, t_prev, cfg.bar_sigma, step);

    const std::vector<double> f = predict(x, y, t_n);
    if (f.size() != y.size())
      throw std::invalid_argument("solve_ode: predictor dimension mismatch");
    for (std::size_t j = 0; j < x.size(); ++j)
      x[j] = (k.a * x[j] + k.c * y[j]) + k.b * f[j];
    for (std::size_t j = 0; j < x.size(); ++j)
      if (!std::isfinite(x[j]))
        throw std::runtime_error("solve_ode: non-finite state at step " +
                                 std::to_string(step) + " (t_n = " +
                                 std::to_string(t_n) + ")");
    trace.push_back(x);
  }
  return trace;
}

/// Terminal state of the recurrence, the estimate of x0.
inline std::vector<double> solve_ode(const Predictor& predict,
                                     const std::vector<double>& y,
                                     const InferenceConfig& cfg,
                                     const Schedule& schedule) {
  return solve_ode_trace(predict, y, cfg, schedule).back();
}

/// One-step direct data prediction: evaluates the predictor at (y, y, 1).
/// A DP predictor outputs the estimate directly; an FM predictor outputs the
/// displacement, so y is added back.
inline std::vector<double> ddp_infer(const Predictor& predict, LossKind loss_kind,
                                     const std::vector<double>& y) {
  std::vector<double> out = predict(y, y, 1.0);
  if (out.size() != y.size())
    throw std::invalid_argument("ddp_infer: predictor dimension mismatch");
  if (loss_kind == LossKind::Fm)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] + y[i];
  return out;
}

}  // namespace flowse
