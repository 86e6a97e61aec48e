#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"
#include "twbreather/ensemble.hpp"

using namespace twb;

namespace {

RunPlan small_plan() {
  RunPlan p;
  p.initial.N = 100;
  p.stepper.C = -0.08;
  p.stepper.dt = 1e-3;
  p.stepper.n_steps = 200;
  p.stepper.snapshot_stride = 20;
  p.M = 32;
  p.L = 20;
  p.n_traj = 40;
  p.n_batches = 10;
  p.g1_stride = 2;
  p.master_seed = 99;
  p.workers = 1;
  return p;
}

template <typename A, typename B>
bool same(const A& a, const B& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

template <typename A, typename B>
double rel(const A& a, const B& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

void check_identical(const ObservableSeries& a, const ObservableSeries& b) {
  CHECK(same(a.times, b.times));
  CHECK(same(a.density, b.density));
  CHECK(same(a.density_err, b.density_err));
  CHECK(same(a.n0, b.n0));
  CHECK(same(a.n0_err, b.n0_err));
  CHECK(same(a.number, b.number));
  CHECK(same(a.mu, b.mu));
  CHECK(same(a.mu_err, b.mu_err));
  CHECK(same(a.com_var, b.com_var));
  CHECK(same(a.com_var_err, b.com_var_err));
  CHECK(same(a.eigen_fractions, b.eigen_fractions));
  CHECK(same(a.eigen_fractions_err, b.eigen_fractions_err));
  CHECK(same(a.drift_number, b.drift_number));
  CHECK(same(a.drift_energy, b.drift_energy));
}

}  // namespace

TEST_CASE("deterministic reduction does not depend on the worker count") {
  RunPlan p = small_plan();
  const auto one = run_ensemble(p);
  for (int w : {2, 4}) {
    p.workers = w;
    check_identical(run_ensemble(p), one);
  }
  p.deterministic = false;
  p.workers = 4;
  const auto fast = run_ensemble(p);
  CHECK(rel(fast.density, one.density) < 1e-10);
  CHECK(rel(fast.mu, one.mu) < 1e-10);
  CHECK(rel(fast.eigen_fractions, one.eigen_fractions) < 1e-10);
}

TEST_CASE("run bookkeeping") {
  const RunPlan p = small_plan();
  const auto s = run_ensemble(p);
  CHECK(s.requested == 40);
  CHECK(s.completed + s.aborted == s.requested);
  CHECK(s.aborted == 0);
  CHECK(s.snapshots() == 11);
  CHECK(s.times(10) == doctest::Approx(0.2));
  CHECK(s.density.rows() == 11);
  CHECK(s.density.cols() == 32);
  CHECK(s.g1_snapshots == std::vector<Index>{0, 2, 4, 6, 8, 10});
  CHECK(s.eigen_fractions.rows() == 6);
  CHECK(s.eigen_fractions.cols() == kReportedModes);
  CHECK(s.n0_meanfield.size() == 11);
  CHECK(s.ordering == Ordering::symmetric);
  CHECK(s.g1.empty());
  // Fractions are descending and the trace identity holds.
  for (Index r = 1; r < kReportedModes; ++r) CHECK(s.eigen_fractions(0, r - 1) >= s.eigen_fractions(0, r));
  for (std::size_t i = 0; i < s.g1_snapshots.size(); ++i) {
    CHECK(s.eigen_total(static_cast<Index>(i)) ==
          doctest::Approx(s.number(s.g1_snapshots[i])).epsilon(1e-9));
  }
}

TEST_CASE("same seed reproduces, a different seed does not") {
  RunPlan p = small_plan();
  p.n_traj = 20;
  const auto a = run_ensemble(p), b = run_ensemble(p);
  check_identical(a, b);
  p.master_seed = 100;
  CHECK_FALSE(same(run_ensemble(p).density, a.density));
}

TEST_CASE("a single noise-free trajectory is the mean field minus half a quantum") {
  RunPlan p = small_plan();
  p.noise = false;
  p.n_traj = 1;
  p.n_batches = 1;
  const auto tw = run_ensemble(p);
  const auto mf = run_meanfield(p);
  CHECK(mf.ordering == Ordering::classical);
  const double half = 1 / (2 * tw.dz);
  CHECK(rel((tw.density.array() + half).matrix(), mf.density) < 1e-12);
  CHECK(rel(mf.n0, mf.n0_meanfield) == 0.0);
  CHECK(rel(tw.n0_meanfield, mf.n0) < 1e-12);
  // One batch: no error bars.
  CHECK(std::isnan(tw.n0_err(0)));
}

TEST_CASE("runaway trajectories abort the run") {
  RunPlan p = small_plan();
  p.stepper.C = -1000;
  p.n_traj = 4;
  p.n_batches = 2;
  p.workers = 2;
  try {
    run_ensemble(p);
    FAIL("expected an integration error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::integration);
    CHECK(std::string(e.what()).find("aborted") != std::string::npos);
  }
}

TEST_CASE("free evolution converges to machine precision") {
  RunPlan p = small_plan();
  p.stepper.C = 0;
  const auto r = convergence_check(p, 2, 2);
  REQUIRE(r.discrepancies.size() == 2);
  CHECK(r.dts.size() == 3);
  CHECK(r.dts[2] == doctest::Approx(2.5e-4));
  CHECK(r.discrepancies[0] < 1e-10);
  CHECK(r.passed);
  CHECK_THROWS_AS(convergence_check(p, 0, 2), ConfigError);
}

TEST_CASE("interacting run shows the integrator order") {
  RunPlan p = small_plan();
  p.stepper.C = -0.2;
  p.stepper.dt = 4e-3;
  p.stepper.n_steps = 100;
  p.stepper.snapshot_stride = 10;
  const auto r = convergence_check(p, 2, 3);
  CHECK(r.fitted_order > 3.5);
  CHECK(r.discrepancies[1] < r.discrepancies[0]);
}

TEST_CASE("peak finding") {
  const Index n = 501;
  Eigen::VectorXd t(n), y(n);
  for (Index i = 0; i < n; ++i) {
    t(i) = 0.01 * static_cast<double>(i);
    y(i) = 2 + std::cos(8 * t(i));
  }
  const auto peaks = find_peaks(t, y);
  REQUIRE(peaks.times.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(peaks.times[k] == doctest::Approx(static_cast<double>(k + 1) * std::numbers::pi / 4).epsilon(1e-4));
    CHECK(peaks.heights[k] == doctest::Approx(3).epsilon(1e-4));
  }
  CHECK(mean_peak_spacing(peaks) == doctest::Approx(std::numbers::pi / 4).epsilon(1e-5));
  CHECK(std::isnan(mean_peak_spacing(Peaks{})));
  CHECK(find_peaks(t.head(2), y.head(2)).times.empty());
}

TEST_CASE("mean-field breather period") {
  RunPlan p;
  p.initial.N = 1000;
  p.stepper.C = -8.0 / 1000;
  p.stepper.dt = 5e-4;
  p.stepper.n_steps = 4000;
  p.stepper.snapshot_stride = 10;
  p.M = 128;
  p.g1_stride = 0;
  const auto mf = run_meanfield(p);
  const auto peaks = find_peaks(mf.times, mf.n0);
  REQUIRE(peaks.times.size() >= 2);
  CHECK(std::abs(mean_peak_spacing(peaks) / (std::numbers::pi / 4) - 1) < 0.01);
  CHECK(mf.drift_number.maxCoeff() < 1e-8);
}

TEST_CASE("error bars cover the exact initial density") {
  // At t=0 the exact normally ordered density is |alpha_j|^2. With ten batches
  // the studentised deviation follows t(9): P(|t| < 1) = 0.657, P(|t| < 2) = 0.923.
  RunPlan p = small_plan();
  p.stepper.n_steps = 0;
  p.n_traj = 200;
  p.track_invariants = false;
  const auto g = p.grid();
  const auto alpha = coherent_amplitude(g, p.initial);
  int inside1 = 0, inside2 = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    p.master_seed = seed;
    const auto s = run_ensemble(p);
    for (Index j = 0; j < g.M; ++j) {
      const double dev = std::abs(s.density(0, j) - std::norm(alpha(j))) / s.density_err(0, j);
      inside1 += dev < 1;
      inside2 += dev < 2;
      ++total;
    }
  }
  const double f1 = static_cast<double>(inside1) / total, f2 = static_cast<double>(inside2) / total;
  CHECK(f1 > 0.55);
  CHECK(f1 < 0.76);
  CHECK(f2 > 0.87);
}

TEST_CASE("balanced and periodic grids agree") {
  RunPlan p;
  p.initial.N = 1000;
  p.stepper.C = -8.0 / 1000;
  p.stepper.dt = 5e-4;
  p.stepper.n_steps = 1000;
  p.stepper.snapshot_stride = 100;
  p.M = 256;
  p.g1_stride = 0;
  const auto b = run_meanfield(p);
  p.grid_mode = GridMode::periodic;
  const auto q = run_meanfield(p);
  // The grids differ only in the boundary twist. The sech tail (amplitude
  // ~2e-3 at z = +-L/2) changes sign across the balanced wrap, and the
  // resulting radiation shifts n(0,t) at the 1e-5 level, independent of dt.
  CHECK(rel(q.n0, b.n0) < 1e-4);

  // Wigner ensembles: number estimates agree within their errors.
  p.n_traj = 200;
  p.stepper.n_steps = 200;
  p.grid_mode = GridMode::balanced;
  const auto tb = run_ensemble(p);
  p.grid_mode = GridMode::periodic;
  const auto tp = run_ensemble(p);
  const Index last = tb.snapshots() - 1;
  const double err = std::hypot(tb.n0_err(last), tp.n0_err(last));
  CHECK(std::abs(tb.n0(last) - tp.n0(last)) < 4 * err);
}

TEST_CASE("invalid plans") {
  RunPlan p = small_plan();
  p.n_batches = 50;
  CHECK_THROWS_AS(run_ensemble(p), ConfigError);
  p = small_plan();
  p.initial.N = 0;
  CHECK_THROWS_AS(run_ensemble(p), ConfigError);
  p = small_plan();
  p.M = 48;
  CHECK_THROWS_AS(run_ensemble(p), ConfigError);
  p = small_plan();
  p.workers = -1;
  CHECK_THROWS_AS(run_ensemble(p), ConfigError);
  p = small_plan();
  p.stepper.dt = -1;
  CHECK_THROWS_AS(run_meanfield(p), ConfigError);
}
