#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "flowse/paths.hpp"

using namespace flowse;

namespace {

// High-precision references for the (k, c) pairs used throughout.
constexpr double kSigma1SqRef = 1.2056370501840736;   // k=2.6, c=0.4
constexpr double kBetaHalfRef = 0.2777777777777778;   // = 1/(k+1) at k=2.6
constexpr double kVarHalfRef = 0.24187163043816292;   // sb-ve var at t=0.5
constexpr double kBetaHalfFlatRef = 0.5025125628140704;  // k=0.99
constexpr double kTPeakRef = 0.7094813781096316;      // sigma^2 = sigma_1^2/2 at k=2.6

PathSpec sbve(double k, double c) { return {PathFamily::SbVe, k, c}; }

}  // namespace

TEST_CASE("sigma_sq matches the closed form", "[paths]") {
  const PathSpec spec = sbve(2.6, 0.4);
  REQUIRE(sigma_sq(spec, 0.0) == 0.0);
  REQUIRE_THAT(sigma_sq(spec, 1.0), Catch::Matchers::WithinAbs(kSigma1SqRef, 1e-12));
  REQUIRE_THAT(sigma_sq(spec, 1.0), Catch::Matchers::WithinAbs(1.20563, 1e-5));
}

TEST_CASE("sigma_sq is strictly increasing", "[paths]") {
  for (double k : {2.6, 0.99}) {
    const PathSpec spec = sbve(k, 0.4);
    double prev = sigma_sq(spec, 0.0);
    for (int i = 1; i <= 1000; ++i) {
      const double cur = sigma_sq(spec, i / 1000.0);
      REQUIRE(cur > prev);
      prev = cur;
    }
  }
}

TEST_CASE("sigma_sq near k = 1 uses the analytic limit", "[paths]") {
  // Inside the switchover window the schedule is exactly c*t, so approaching
  // k = 1 from either side gives identical values.
  REQUIRE_THAT(sigma_sq(sbve(1.0 + 1e-6, 0.4), 0.5), Catch::Matchers::WithinAbs(0.2, 1e-9));
  REQUIRE_THAT(sigma_sq(sbve(1.0 - 1e-6, 0.4), 0.5), Catch::Matchers::WithinAbs(0.2, 1e-9));
  for (int i = 0; i <= 100; ++i) {
    const double t = i / 100.0;
    const double above = sigma_sq(sbve(1.0 + 1e-6, 0.4), t);
    const double below = sigma_sq(sbve(1.0 - 1e-6, 0.4), t);
    REQUIRE(std::abs(above - below) < 1e-8);
  }
  // Just outside the window the log-ratio form agrees with c*t to first order.
  for (double k : {1.0 + 2e-4, 1.0 - 2e-4}) {
    for (int i = 0; i <= 10; ++i) {
      const double t = i / 10.0;
      REQUIRE(std::abs(sigma_sq(sbve(k, 0.4), t) - 0.4 * t) < 1e-4);
    }
  }
}

TEST_CASE("path_point at the frozen reference values", "[paths]") {
  SECTION("sb-ve k=2.6") {
    const PathPoint p = path_point(sbve(2.6, 0.4), 0.5);
    REQUIRE_THAT(p.beta, Catch::Matchers::WithinAbs(kBetaHalfRef, 1e-13));
    REQUIRE_THAT(p.var, Catch::Matchers::WithinAbs(kVarHalfRef, 1e-13));
    REQUIRE_THAT(p.beta, Catch::Matchers::WithinAbs(0.27778, 1e-5));
    REQUIRE_THAT(p.var, Catch::Matchers::WithinAbs(0.24187, 1e-5));
  }
  SECTION("sb-ve k=0.99 is nearly linear") {
    const PathPoint p = path_point(sbve(0.99, 0.375), 0.5);
    REQUIRE_THAT(p.beta, Catch::Matchers::WithinAbs(kBetaHalfFlatRef, 1e-13));
  }
  SECTION("icfm passes t and c through") {
    const PathPoint p = path_point({PathFamily::Icfm, 2.6, 0.1}, 0.7);
    REQUIRE(p.beta == 0.7);
    REQUIRE(p.var == 0.1);
    REQUIRE_THAT(p.alpha, Catch::Matchers::WithinAbs(0.3, 1e-15));
  }
  SECTION("sb-ve variance vanishes at both ends") {
    REQUIRE(path_point(sbve(2.6, 0.4), 0.0).var == 0.0);
    REQUIRE(path_point(sbve(2.6, 0.4), 1.0).var == 0.0);
  }
  SECTION("sb-sv variance is constant") {
    for (int i = 0; i <= 10; ++i)
      REQUIRE(path_point({PathFamily::SbSv, 2.6, 0.15}, i / 10.0).var == 0.15);
  }
}

TEST_CASE("alpha + beta = 1 along every path", "[paths]") {
  const std::vector<PathSpec> specs = {
      sbve(2.6, 0.4), sbve(0.99, 0.375), {PathFamily::SbSv, 2.6, 0.15},
      {PathFamily::SbSv, 0.99, 0.1}, {PathFamily::Icfm, 2.6, 0.1}};
  for (const PathSpec& spec : specs)
    for (int i = 0; i <= 1000; ++i) {
      const PathPoint p = path_point(spec, i / 1000.0);
      REQUIRE(std::abs(p.alpha + p.beta - 1.0) < 1e-14);
    }
}

TEST_CASE("sb-ve variance peaks where sigma^2 crosses half its terminal value", "[paths]") {
  const PathSpec spec = sbve(2.6, 0.4);
  const double s1_sq = sigma_sq(spec, 1.0);
  REQUIRE_THAT(sigma_sq(spec, kTPeakRef) / s1_sq, Catch::Matchers::WithinAbs(0.5, 1e-12));
  const double peak = path_point(spec, kTPeakRef).var;
  REQUIRE_THAT(peak, Catch::Matchers::WithinAbs(s1_sq / 4.0, 1e-12));
  for (int i = 0; i <= 1000; ++i)
    REQUIRE(path_point(spec, i / 1000.0).var <= peak + 1e-15);
}

TEST_CASE("sample_perturbation is exact at the boundaries", "[paths]") {
  const std::vector<double> x0 = {1.25, -0.5, 3.0};
  const std::vector<double> y = {0.75, 2.5, -1.0};
  Rng rng(7);
  const std::vector<double> at0 = sample_perturbation(sbve(2.6, 0.4), x0, y, 0.0, rng);
  const std::vector<double> at1 = sample_perturbation(sbve(2.6, 0.4), x0, y, 1.0, rng);
  REQUIRE(at0 == x0);
  REQUIRE(at1 == y);
}

TEST_CASE("sample_perturbation matches the declared variance", "[paths]") {
  const PathSpec spec = {PathFamily::Icfm, 2.6, 0.1};
  const std::vector<double> zero = {0.0};
  Rng rng(11);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double v = sample_perturbation(spec, zero, zero, 0.5, rng)[0];
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  // 3 sigma band of the variance estimator: 3 * 0.1 * sqrt(2/n).
  REQUIRE(std::abs(var - 0.1) < 4.3e-4);
}

TEST_CASE("complex noise splits the variance across re and im", "[paths]") {
  const PathSpec spec = {PathFamily::Icfm, 2.6, 0.2};
  const std::vector<double> zero = {0.0, 0.0};
  Rng rng(13);
  double sum_sq_re = 0.0, sum_sq_im = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> v =
        sample_perturbation(spec, zero, zero, 0.5, rng, NoiseDomain::ComplexInterleaved);
    sum_sq_re += v[0] * v[0];
    sum_sq_im += v[1] * v[1];
  }
  REQUIRE(std::abs(sum_sq_re / n - 0.1) < 2e-3);
  REQUIRE(std::abs(sum_sq_im / n - 0.1) < 2e-3);
}

TEST_CASE("sample_perturbation is bit-identical for equal seeds", "[paths]") {
  const std::vector<double> x0 = {0.3, -1.1};
  const std::vector<double> y = {1.0, 0.2};
  Rng a(99), b(99);
  for (int i = 0; i < 32; ++i) {
    const double t = i / 32.0;
    REQUIRE(sample_perturbation(sbve(2.6, 0.4), x0, y, t, a) ==
            sample_perturbation(sbve(2.6, 0.4), x0, y, t, b));
  }
}

TEST_CASE("schedule_curve straightness split between the two bases", "[paths]") {
  const auto maxdev = [](const PathSpec& spec) {
    double worst = 0.0;
    for (const PathPoint& p : schedule_curve(spec, 101))
      worst = std::max(worst, std::abs(p.beta - p.t));
    return worst;
  };
  const double curved = maxdev(sbve(2.6, 0.4));
  const double flat = maxdev(sbve(0.99, 0.375));
  REQUIRE(curved > 0.2);
  REQUIRE_THAT(curved, Catch::Matchers::WithinAbs(0.22766532, 1e-5));
  REQUIRE(flat < 0.005);
  REQUIRE_THAT(flat, Catch::Matchers::WithinAbs(0.00251257, 1e-5));
}

TEST_CASE("schedule_curve for icfm is the identity line", "[paths]") {
  const std::vector<PathPoint> rows = schedule_curve({PathFamily::Icfm, 2.6, 0.1}, 3);
  REQUIRE(rows.size() == 3);
  REQUIRE(rows[0].beta == 0.0);
  REQUIRE(rows[1].beta == 0.5);
  REQUIRE(rows[2].beta == 1.0);
}

TEST_CASE("path validation rejects malformed inputs", "[paths]") {
  REQUIRE_THROWS_AS(sigma_sq(sbve(2.6, 0.0), 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(sigma_sq(sbve(2.6, -0.4), 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(sigma_sq(sbve(1.0, 0.4), 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(sigma_sq(sbve(-2.0, 0.4), 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(sigma_sq({PathFamily::Icfm, 2.6, 0.1}, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(sigma_sq(sbve(2.6, 0.4), -0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(sigma_sq(sbve(2.6, 0.4), 1.1), std::invalid_argument);
  REQUIRE_NOTHROW(path_point({PathFamily::Icfm, 1.0, 0.1}, 0.5));  // k unused

  Rng rng(1);
  const std::vector<double> a = {1.0, 2.0};
  const std::vector<double> b = {1.0};
  REQUIRE_THROWS_AS(sample_perturbation(sbve(2.6, 0.4), a, b, 0.5, rng),
                    std::invalid_argument);
  const std::vector<double> odd = {1.0, 2.0, 3.0};
  REQUIRE_THROWS_AS(sample_perturbation({PathFamily::Icfm, 2.6, 0.1}, odd, odd, 0.5, rng,
                                        NoiseDomain::ComplexInterleaved),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(schedule_curve(sbve(2.6, 0.4), 1), std::invalid_argument);

  PairedBatch ragged;
  ragged.dim = 2;
  ragged.x0 = {{1.0, 2.0}};
  ragged.y = {{1.0}};
  REQUIRE_THROWS_AS(ragged.validate(), std::invalid_argument);
}

TEST_CASE("rng streams are reproducible and separable", "[paths]") {
  Rng a(42), b(42);
  for (int i = 0; i < 16; ++i) REQUIRE(a.normal() == b.normal());
  for (int i = 0; i < 16; ++i) REQUIRE(a.uniform() == b.uniform());
  REQUIRE(mix_seed(7, 1) != mix_seed(7, 2));
  REQUIRE(mix_seed(7, 1) == mix_seed(7, 1));
}
