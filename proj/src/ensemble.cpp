#include "twbreather/ensemble.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

namespace twb {

void RunPlan::validate() const {
  if (n_traj < 1) throw ConfigError("n_traj must be >= 1");
  if (n_batches < 1) throw ConfigError("n_batches must be >= 1");
  if (n_batches > n_traj) throw ConfigError("n_batches must not exceed n_traj");
  if (!(initial.N > 0)) throw ConfigError("N must be positive");
  if (g1_stride < 0) throw ConfigError("g1_stride must be >= 0");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (M < 8 || (M & (M - 1)) != 0) throw ConfigError("M must be a power of two >= 8");
  stepper.validate();
  (void)make_grid<double>(M, L, grid_mode);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int batch_of(std::int64_t i, std::int64_t n, int B) {
  return static_cast<int>((i * B) / n);
}

std::int64_t batch_size(int b, std::int64_t n, int B) {
  // Number of i in [0, n) with floor(i B / n) == b.
  auto first_index = [&](std::int64_t batch) { return (batch * n + B - 1) / B; };
  return first_index(b + 1) - first_index(b);
}

struct BatchStats {
  bool empty = true;
  Eigen::MatrixXd density;
  Eigen::VectorXd number, mu, com_var;
  Eigen::MatrixXd eigen_fractions;
  Eigen::VectorXd eigen_total;
};

struct RunSetup {
  RunPlan plan;
  Grid<double> grid;
  ComplexVector<double> alpha;
  Index snapshots = 0;
  Ordering ordering = Ordering::symmetric;
};

RunSetup make_setup(const RunPlan& plan, Ordering ordering) {
  plan.validate();
  RunSetup s{plan, plan.grid(), {}, snapshot_count(plan.stepper), ordering};
  s.alpha = coherent_amplitude(s.grid, plan.initial);
  const double phase = plan.stepper.nonlinear_phase_per_step(s.alpha.cwiseAbs2().maxCoeff());
  if (phase > 0.1 && plan.progress) {
    *plan.progress << "[twb] warning: nonlinear phase per step " << phase << " exceeds 0.1\n";
  }
  return s;
}

class TrajectoryRunner {
 public:
  explicit TrajectoryRunner(const RunSetup& setup)
      : setup_(&setup), stepper_(setup.grid, setup.plan.stepper) {}

  TrajectoryRecord<double> run(std::int64_t index) {
    const RunPlan& plan = setup_->plan;
    TrajectoryRecord<double> rec;
    rec.index = static_cast<std::uint64_t>(index);
    rec.batch_id = batch_of(index, plan.n_traj, plan.n_batches);
    rec.snapshots.reserve(static_cast<std::size_t>(setup_->snapshots));

    WignerField<double> field =
        plan.noise ? sample_wigner(setup_->alpha, setup_->grid, NoiseSpec{plan.master_seed, rec.index})
                   : WignerField<double>{setup_->alpha, 0.0};

    ClassicalInvariants<double> initial;
    const double max_k = setup_->grid.max_abs_k();
    auto observer = [&](Index s, const WignerField<double>& f) {
      rec.snapshots.push_back(f.values);
      if (plan.track_invariants) {
        const auto inv = classical_invariants(f.values, stepper_.transform(), plan.stepper.C);
        if (s == 0) initial = inv;
        rec.drift.push_back(invariant_drift(inv, initial, max_k));
      }
    };
    try {
      evolve(std::move(field), stepper_, SnapshotObserver<double>(observer));
    } catch (const IntegrationError& e) {
      rec.aborted = true;
      rec.abort_reason = e.with_trajectory(index).what();
      rec.snapshots.clear();
      rec.drift.clear();
    }
    return rec;
  }

 private:
  const RunSetup* setup_;
  Rk4ipStepper<double> stepper_;
};

BatchStats finalize_batch(const Accumulators<double>& acc, const RunSetup& setup) {
  BatchStats st;
  if (acc.count == 0) return st;
  st.empty = false;
  const Index S = setup.snapshots;
  const Grid<double>& g = setup.grid;
  const double N = setup.plan.initial.N;
  st.density.resize(S, g.M);
  st.number.resize(S);
  st.mu.resize(S);
  st.com_var.resize(S);
  for (Index s = 0; s < S; ++s) {
    const Eigen::VectorXd n = density(acc, g, s, setup.ordering);
    st.density.row(s) = n.transpose();
    st.number(s) = g.dz * n.sum();
    st.mu(s) = mu(acc, g, N, s, setup.ordering);
    st.com_var(s) = com_variance(acc, g, N, s, setup.ordering);
  }
  const Index G = acc.g1_snapshot_count();
  st.eigen_fractions.resize(G, kReportedModes);
  st.eigen_total.resize(G);
  for (Index s = 0, slot = 0; s < S; ++s) {
    if (!acc.has_g1(s)) continue;
    const auto occ = mode_occupations(g1_matrix(acc, g, s, setup.ordering), g);
    for (Index r = 0; r < kReportedModes; ++r) {
      st.eigen_fractions(slot, r) = r < occ.values.size() ? occ.values(r) / N : 0.0;
    }
    st.eigen_total(slot) = occ.total();
    ++slot;
  }
  return st;
}

// Standard error of one scalar across non-empty batches; NaN below two.
template <typename Get>
double batch_spread(const std::vector<BatchStats>& batches, Get get) {
  std::vector<double> v;
  for (const auto& b : batches)
    if (!b.empty) v.push_back(get(b));
  if (v.size() < 2) return kNaN;
  return batch_error(v).error;
}

ObservableSeries assemble(const RunSetup& setup, const Accumulators<double>& total,
                          const std::vector<BatchStats>& batches) {
  const Grid<double>& g = setup.grid;
  const Index S = setup.snapshots;
  const Index c = g.center_index();
  const double N = setup.plan.initial.N;
  ObservableSeries out;
  out.ordering = setup.ordering;
  out.N = N;
  out.dz = g.dz;
  out.times = snapshot_times(setup.plan.stepper);
  out.z = g.z;
  out.density.resize(S, g.M);
  out.density_err.resize(S, g.M);
  out.n0.resize(S);
  out.n0_err.resize(S);
  out.number.resize(S);
  out.number_err.resize(S);
  out.mu.resize(S);
  out.mu_err.resize(S);
  out.com_var.resize(S);
  out.com_var_err.resize(S);
  out.com_proxy_var.resize(S);
  out.drift_number = total.max_drift_number;
  out.drift_momentum = total.max_drift_momentum;
  out.drift_energy = total.max_drift_energy;
  if (!setup.plan.track_invariants) {
    out.drift_number.setConstant(kNaN);
    out.drift_momentum.setConstant(kNaN);
    out.drift_energy.setConstant(kNaN);
  }

  if (total.count == 0) throw EmptyEnsembleError("every trajectory aborted");

  for (Index s = 0; s < S; ++s) {
    const Eigen::VectorXd n = density(total, g, s, setup.ordering);
    out.density.row(s) = n.transpose();
    for (Index j = 0; j < g.M; ++j) {
      out.density_err(s, j) = batch_spread(batches, [&](const BatchStats& b) { return b.density(s, j); });
    }
    out.n0(s) = n(c);
    out.n0_err(s) = out.density_err(s, c);
    out.number(s) = g.dz * n.sum();
    out.number_err(s) = batch_spread(batches, [&](const BatchStats& b) { return b.number(s); });
    out.mu(s) = mu(total, g, N, s, setup.ordering);
    out.mu_err(s) = batch_spread(batches, [&](const BatchStats& b) { return b.mu(s); });
    out.com_var(s) = com_variance(total, g, N, s, setup.ordering);
    out.com_var_err(s) = batch_spread(batches, [&](const BatchStats& b) { return b.com_var(s); });
    out.com_proxy_var(s) = com_proxy_variance(total, s);
  }

  const Index G = total.g1_snapshot_count();
  out.eigen_fractions.resize(G, kReportedModes);
  out.eigen_fractions_err.resize(G, kReportedModes);
  out.eigen_total.resize(G);
  out.eigen_total_err.resize(G);
  for (Index s = 0, slot = 0; s < S; ++s) {
    if (!total.has_g1(s)) continue;
    out.g1_snapshots.push_back(s);
    ComplexMatrix<double> g1 = g1_matrix(total, g, s, setup.ordering);
    const auto occ = mode_occupations(g1, g);
    for (Index r = 0; r < kReportedModes; ++r) {
      out.eigen_fractions(slot, r) = r < occ.values.size() ? occ.values(r) / N : 0.0;
      out.eigen_fractions_err(slot, r) =
          batch_spread(batches, [&](const BatchStats& b) { return b.eigen_fractions(slot, r); });
    }
    out.eigen_total(slot) = occ.total();
    out.eigen_total_err(slot) = batch_spread(batches, [&](const BatchStats& b) { return b.eigen_total(slot); });
    if (setup.plan.keep_g1) out.g1.push_back(std::move(g1));
    ++slot;
  }
  return out;
}

ObservableSeries run_impl(const RunSetup& setup) {
  const RunPlan& plan = setup.plan;
  const auto start = std::chrono::steady_clock::now();
  const int B = plan.n_batches;
  const std::int64_t n = plan.n_traj;
  int workers = plan.workers > 0 ? plan.workers : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, static_cast<int>(std::min<std::int64_t>(workers, n)));

  std::mutex mutex;
  std::condition_variable ready_cv;
  std::map<std::int64_t, TrajectoryRecord<double>> ready;
  std::exception_ptr failure;
  std::atomic<std::int64_t> next{0};
  std::atomic<bool> stop{false};

  auto work = [&]() {
    try {
      TrajectoryRunner runner(setup);
      for (;;) {
        if (stop.load()) return;
        const std::int64_t i = next.fetch_add(1);
        if (i >= n) return;
        TrajectoryRecord<double> rec = runner.run(i);
        std::lock_guard<std::mutex> lock(mutex);
        ready.emplace(i, std::move(rec));
        ready_cv.notify_one();
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(mutex);
      if (!failure) failure = std::current_exception();
      stop.store(true);
      ready_cv.notify_one();
    }
  };

  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  // Declared after the pool so it runs first on unwinding: workers see the
  // stop flag before the jthreads join.
  struct StopOnExit {
    std::atomic<bool>& flag;
    ~StopOnExit() { flag.store(true); }
  } stop_on_exit{stop};
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);

  Accumulators<double> total = make_accumulators<double>(setup.grid.M, setup.snapshots, plan.g1_stride);
  std::map<int, std::pair<Accumulators<double>, std::int64_t>> open;
  std::vector<BatchStats> batches(static_cast<std::size_t>(B));
  std::int64_t aborted = 0;
  std::vector<std::string> reasons;

  for (std::int64_t absorbed = 0, expected = 0; absorbed < n; ++absorbed) {
    TrajectoryRecord<double> rec;
    {
      std::unique_lock<std::mutex> lock(mutex);
      ready_cv.wait(lock, [&] {
        if (failure) return true;
        return plan.deterministic ? ready.count(expected) > 0 : !ready.empty();
      });
      if (failure) break;
      auto it = plan.deterministic ? ready.find(expected) : ready.begin();
      rec = std::move(it->second);
      ready.erase(it);
    }
    ++expected;

    auto [slot, inserted] = open.try_emplace(rec.batch_id);
    if (inserted) {
      slot->second.first = make_accumulators<double>(setup.grid.M, setup.snapshots, plan.g1_stride);
      slot->second.second = 0;
    }
    if (rec.aborted) {
      ++aborted;
      if (reasons.size() < 16) reasons.push_back(rec.abort_reason);
    } else {
      accumulate(slot->second.first, rec, setup.grid);
    }
    if (++slot->second.second == batch_size(rec.batch_id, n, B)) {
      batches[static_cast<std::size_t>(rec.batch_id)] = finalize_batch(slot->second.first, setup);
      merge_into(total, slot->second.first);
      open.erase(slot);
    }

    if (plan.progress && ((absorbed + 1) % 1000 == 0 || absorbed + 1 == n)) {
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      const double eta = elapsed / static_cast<double>(absorbed + 1) * static_cast<double>(n - absorbed - 1);
      *plan.progress << "[twb] " << (absorbed + 1) << "/" << n << " trajectories, elapsed " << elapsed
                     << " s, ETA " << eta << " s\n";
    }
  }
  stop.store(true);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  if (static_cast<double>(aborted) > 0.001 * static_cast<double>(n)) {
    std::string msg = std::to_string(aborted) + " of " + std::to_string(n) + " trajectories aborted";
    if (!reasons.empty()) msg += "; first: " + reasons.front();
    throw Error(ErrorCategory::integration, msg);
  }

  ObservableSeries out = assemble(setup, total, batches);
  out.requested = n;
  out.aborted = aborted;
  out.completed = n - aborted;
  out.abort_reasons = std::move(reasons);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

Eigen::VectorXd meanfield_center_density(const RunSetup& setup) {
  const Index c = setup.grid.center_index();
  Eigen::VectorXd n0(setup.snapshots);
  meanfield_evolve(setup.alpha, setup.grid, setup.plan.stepper,
                   SnapshotObserver<double>([&](Index s, const WignerField<double>& f) {
                     n0(s) = std::norm(f.values(c));
                   }));
  return n0;
}

}  // namespace

ObservableSeries run_ensemble(const RunPlan& plan) {
  const RunSetup setup = make_setup(plan, Ordering::symmetric);
  ObservableSeries out = run_impl(setup);
  out.n0_meanfield = meanfield_center_density(setup);
  return out;
}

ObservableSeries run_meanfield(const RunPlan& plan) {
  RunPlan mf = plan;
  mf.n_traj = 1;
  mf.n_batches = 1;
  mf.noise = false;
  mf.workers = 1;
  const RunSetup setup = make_setup(mf, Ordering::classical);
  ObservableSeries out = run_impl(setup);
  out.n0_meanfield = out.n0;
  return out;
}

ConvergenceReport convergence_check(const RunPlan& plan, int pairs, int halvings) {
  if (pairs < 1) throw ConfigError("convergence_check needs at least one trajectory");
  if (halvings < 1) throw ConfigError("convergence_check needs at least one halving");
  ConvergenceReport report;
  std::vector<Eigen::VectorXd> n0;
  for (int level = 0; level <= halvings; ++level) {
    RunPlan p = plan;
    const Index factor = Index{1} << level;
    p.n_traj = pairs;
    p.n_batches = 1;
    p.g1_stride = 0;
    p.track_invariants = false;
    p.deterministic = true;
    p.progress = nullptr;
    p.stepper.dt = plan.stepper.dt / static_cast<double>(factor);
    p.stepper.n_steps = plan.stepper.n_steps * factor;
    p.stepper.snapshot_stride = plan.stepper.snapshot_stride * factor;
    report.dts.push_back(p.stepper.dt);
    const RunSetup setup = make_setup(p, Ordering::symmetric);
    n0.push_back(run_impl(setup).n0);
  }
  for (int level = 0; level < halvings; ++level) {
    const Eigen::VectorXd& coarse = n0[static_cast<std::size_t>(level)];
    const Eigen::VectorXd& fine = n0[static_cast<std::size_t>(level) + 1];
    double worst = 0;
    for (Index s = 0; s < coarse.size(); ++s) {
      const double scale = std::max(std::abs(fine(s)), std::numeric_limits<double>::min());
      worst = std::max(worst, std::abs(coarse(s) - fine(s)) / scale);
    }
    report.discrepancies.push_back(worst);
  }
  // Least-squares slope of log2(d) against log2(dt).
  const auto m = static_cast<double>(halvings);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int level = 0; level < halvings; ++level) {
    const double x = std::log2(report.dts[static_cast<std::size_t>(level)]);
    const double y = std::log2(std::max(report.discrepancies[static_cast<std::size_t>(level)], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  report.fitted_order = halvings > 1 ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : kNaN;
  report.passed = report.discrepancies.front() < report.tolerance;
  return report;
}

Peaks find_peaks(const Eigen::VectorXd& t, const Eigen::VectorXd& y) {
  Peaks p;
  for (Index i = 1; i + 1 < y.size(); ++i) {
    if (!(y(i) > y(i - 1) && y(i) >= y(i + 1))) continue;
    const double h = t(i + 1) - t(i);
    const double denom = y(i - 1) - 2 * y(i) + y(i + 1);
    double offset = 0;
    if (denom != 0) offset = 0.5 * (y(i - 1) - y(i + 1)) / denom;
    p.times.push_back(t(i) + offset * h);
    p.heights.push_back(y(i) - 0.25 * (y(i - 1) - y(i + 1)) * offset);
  }
  return p;
}

double mean_peak_spacing(const Peaks& peaks) {
  if (peaks.times.size() < 2) return kNaN;
  return (peaks.times.back() - peaks.times.front()) / static_cast<double>(peaks.times.size() - 1);
}

}  // namespace twb
