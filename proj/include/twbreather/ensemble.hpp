#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "twbreather/dynamics.hpp"
#include "twbreather/init.hpp"
#include "twbreather/lattice.hpp"
#include "twbreather/observables.hpp"

namespace twb {

/// Number of leading G1 eigenvalues reported per snapshot.
inline constexpr Index kReportedModes = 8;

struct RunPlan {
  std::int64_t n_traj = 1000;
  int n_batches = 10;
  std::uint64_t master_seed = 1;
  StepperConfig<double> stepper{};
  InitialStateSpec<double> initial{};
  Index M = 256;
  double L = 20;
  GridMode grid_mode = GridMode::balanced;
  /// G1 is sampled every g1_stride snapshots (and at the last); 0 disables.
  Index g1_stride = 20;
  /// Off: every trajectory starts from the bare coherent amplitude.
  bool noise = true;
  /// Fixed-order reduction, independent of the worker count.
  bool deterministic = true;
  /// 0 picks std::thread::hardware_concurrency().
  int workers = 0;
  /// Per-trajectory N, P, H drift tracking (one extra transform pair per snapshot).
  bool track_invariants = true;
  /// Keep the ensemble G1 matrices in the series (for matrix dumps).
  bool keep_g1 = false;
  /// Heartbeat sink; null disables progress output.
  std::ostream* progress = nullptr;

  Grid<double> grid() const { return make_grid<double>(M, L, grid_mode); }
  void validate() const;
};

/// Time series of normally ordered observables with batch error bars.
/// Errors are NaN when the run has fewer than two batches.
struct ObservableSeries {
  Eigen::VectorXd times;
  Eigen::VectorXd z;
  /// Row per snapshot, column per lattice point.
  Eigen::MatrixXd density;
  Eigen::MatrixXd density_err;
  Eigen::VectorXd n0, n0_err, n0_meanfield;
  Eigen::VectorXd number, number_err;
  Eigen::VectorXd mu, mu_err;
  Eigen::VectorXd com_var, com_var_err;
  /// Uncorrected per-trajectory centre-of-mass variance, for diagnostics.
  Eigen::VectorXd com_proxy_var;
  Eigen::VectorXd drift_number, drift_momentum, drift_energy;

  /// Snapshot indices where G1 was sampled.
  std::vector<Index> g1_snapshots;
  /// Row per G1 snapshot: lambda_i / N for the top kReportedModes, descending.
  Eigen::MatrixXd eigen_fractions;
  Eigen::MatrixXd eigen_fractions_err;
  /// Sum of all eigenvalues of dz G1 (the trace identity's number estimate).
  Eigen::VectorXd eigen_total;
  Eigen::VectorXd eigen_total_err;
  std::vector<ComplexMatrix<double>> g1;

  Ordering ordering = Ordering::symmetric;
  double N = 0;
  double dz = 0;
  std::int64_t requested = 0;
  std::int64_t completed = 0;
  std::int64_t aborted = 0;
  std::vector<std::string> abort_reasons;
  double wall_seconds = 0;

  Index snapshots() const { return times.size(); }
};

/// Runs plan.n_traj Wigner trajectories; trajectory i draws its noise from
/// seed_stream(master_seed, i) and belongs to batch i * B / n_traj. Also runs
/// the noise-free companion that fills n0_meanfield.
ObservableSeries run_ensemble(const RunPlan& plan);

/// Single noise-free trajectory reported with classical ordering.
ObservableSeries run_meanfield(const RunPlan& plan);

struct ConvergenceReport {
  /// Step sizes dt, dt/2, dt/4, dt/8.
  std::vector<double> dts;
  /// Max relative n(0,t) discrepancy between successive step sizes.
  std::vector<double> discrepancies;
  /// Least-squares slope of log2(discrepancy) against log2(dt).
  double fitted_order = 0;
  double tolerance = 1e-4;
  bool passed = false;
};

/// Re-runs the first `pairs` trajectories with identical noise at
/// successively halved steps and compares the ensemble n(0,t).
ConvergenceReport convergence_check(const RunPlan& plan, int pairs = 8, int halvings = 3);

/// Peak times and heights of a sampled series, refined by parabolic
/// interpolation through each interior local maximum.
struct Peaks {
  std::vector<double> times;
  std::vector<double> heights;
};
Peaks find_peaks(const Eigen::VectorXd& t, const Eigen::VectorXd& y);

/// Mean spacing of successive peaks; NaN with fewer than two peaks.
double mean_peak_spacing(const Peaks& peaks);

}  // namespace twb
