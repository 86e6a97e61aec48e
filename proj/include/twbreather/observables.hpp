#pragma once

// Ensemble accumulators and the conversion of symmetrically ordered (Wigner)
// averages into normally ordered observables.
//
// With c = [psi_j, psi_j^dagger] (1/dz on the balanced grid), a single lattice
// point obeys
//   <psi^dagger psi>             = <|psi|^2>_W - c/2
//   <psi^dagger^2 psi^2>         = <|psi|^4>_W - 2 c <|psi|^2>_W + c^2/2
//   <psi^dagger_j psi_l>         = <psi*_j psi_l>_W - P_jl / (2 dz)
// where P is the projector onto the active modes (identity when balanced).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "twbreather/errors.hpp"
#include "twbreather/init.hpp"
#include "twbreather/lattice.hpp"

namespace twb {

enum class Ordering {
  /// Ensemble of Wigner fields: apply the vacuum corrections.
  symmetric,
  /// Noise-free classical field: report moments as they are.
  classical,
};

template <typename Scalar = double>
struct ClassicalInvariants {
  Scalar number = 0;
  Scalar momentum = 0;
  Scalar energy = 0;
};

/// N = dz sum|psi|^2, P = dz sum Im(psi* d psi), H = dz sum(|d psi|^2 + C|psi|^4).
template <typename Scalar>
ClassicalInvariants<Scalar> classical_invariants(const ComplexVector<Scalar>& psi,
                                                 SpectralTransform<Scalar>& transform, Scalar C) {
  const Grid<Scalar>& g = transform.grid();
  const ComplexVector<Scalar> d = spectral_derivative(psi, transform);
  ClassicalInvariants<Scalar> inv;
  inv.number = g.dz * psi.squaredNorm();
  inv.momentum = g.dz * (psi.conjugate().cwiseProduct(d)).imag().sum();
  inv.energy = g.dz * (d.squaredNorm() + C * psi.array().abs2().square().sum());
  return inv;
}

template <typename Scalar>
ClassicalInvariants<Scalar> classical_invariants(const ComplexVector<Scalar>& psi, const Grid<Scalar>& grid,
                                                 Scalar C) {
  SpectralTransform<Scalar> t(grid);
  return classical_invariants(psi, t, C);
}

/// Density-weighted mean position of one field.
template <typename Scalar>
Scalar com_position(const ComplexVector<Scalar>& psi, const Grid<Scalar>& grid) {
  const RealVector<Scalar> n = psi.cwiseAbs2();
  const Scalar norm = n.sum();
  if (!(norm > 0)) throw NumericalError("com_position: zero-norm field");
  return grid.z.dot(n) / norm;
}

/// Drift of one trajectory's invariants relative to its t=0 values:
/// |dN|/N, |dP|/(N max|k|), |dH|/|H|.
template <typename Scalar>
ClassicalInvariants<Scalar> invariant_drift(const ClassicalInvariants<Scalar>& now,
                                            const ClassicalInvariants<Scalar>& initial, Scalar max_k) {
  ClassicalInvariants<Scalar> d;
  d.number = initial.number > 0 ? std::abs(now.number - initial.number) / initial.number : 0;
  d.momentum = initial.number > 0 ? std::abs(now.momentum - initial.momentum) / (initial.number * max_k) : 0;
  d.energy = initial.energy != 0 ? std::abs(now.energy - initial.energy) / std::abs(initial.energy) : 0;
  return d;
}

/// Running ensemble sums for a fixed set of snapshots. Accumulators form a
/// commutative monoid under merge().
template <typename Scalar = double>
struct Accumulators {
  using RealMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Index M = 0;
  Index snapshots = 0;
  Index count = 0;
  /// Sum of |psi_j|^2, one column per snapshot.
  RealMatrix sum_n;
  /// Sum of |psi_j|^4.
  RealMatrix sum_n2;
  /// snapshot -> slot in sum_g1, or -1 when G1 is not sampled there.
  std::vector<Index> g1_slot;
  /// Sum of psi*_j psi_l. Only the lower triangle (and diagonal) is filled.
  std::vector<ComplexMatrix<Scalar>> sum_g1;
  /// Sum of the first position moment A = dz sum z_j |psi_j|^2, and of A^2.
  RealVector<Scalar> sum_first;
  RealVector<Scalar> sum_first_sq;
  /// Sum of the per-trajectory centre of mass X, and of X^2.
  RealVector<Scalar> sum_com;
  RealVector<Scalar> sum_com_sq;
  /// Largest per-trajectory invariant drift seen at each snapshot.
  RealVector<Scalar> max_drift_number;
  RealVector<Scalar> max_drift_momentum;
  RealVector<Scalar> max_drift_energy;
  std::vector<int> batch_ids;

  Index g1_snapshot_count() const { return static_cast<Index>(sum_g1.size()); }
  bool has_g1(Index snapshot) const { return g1_slot.at(static_cast<std::size_t>(snapshot)) >= 0; }
};

/// Empty accumulators for M points and `snapshots` snapshots, sampling G1 at
/// every `g1_stride`-th snapshot (and the last). g1_stride = 0 disables G1.
template <typename Scalar = double>
Accumulators<Scalar> make_accumulators(Index M, Index snapshots, Index g1_stride) {
  Accumulators<Scalar> acc;
  acc.M = M;
  acc.snapshots = snapshots;
  acc.sum_n.setZero(M, snapshots);
  acc.sum_n2.setZero(M, snapshots);
  acc.g1_slot.assign(static_cast<std::size_t>(snapshots), -1);
  if (g1_stride > 0) {
    for (Index s = 0; s < snapshots; ++s) {
      if (s % g1_stride == 0 || s == snapshots - 1) {
        acc.g1_slot[static_cast<std::size_t>(s)] = static_cast<Index>(acc.sum_g1.size());
        acc.sum_g1.push_back(ComplexMatrix<Scalar>::Zero(M, M));
      }
    }
  }
  acc.sum_first.setZero(snapshots);
  acc.sum_first_sq.setZero(snapshots);
  acc.sum_com.setZero(snapshots);
  acc.sum_com_sq.setZero(snapshots);
  acc.max_drift_number.setZero(snapshots);
  acc.max_drift_momentum.setZero(snapshots);
  acc.max_drift_energy.setZero(snapshots);
  return acc;
}

/// One trajectory's snapshot fields, plus optional invariant drifts.
template <typename Scalar = double>
struct TrajectoryRecord {
  std::uint64_t index = 0;
  int batch_id = 0;
  std::vector<ComplexVector<Scalar>> snapshots;
  std::vector<ClassicalInvariants<Scalar>> drift;
  bool aborted = false;
  std::string abort_reason;
};

/// Adds one field to snapshot `s` of the running sums. Does not touch count.
template <typename Scalar>
void accumulate_snapshot(Accumulators<Scalar>& acc, Index s, const ComplexVector<Scalar>& psi,
                         const Grid<Scalar>& grid) {
  if (psi.size() != acc.M) throw ShapeError("accumulate: field length mismatch");
  if (s < 0 || s >= acc.snapshots) throw ShapeError("accumulate: snapshot index out of range");
  const RealVector<Scalar> n = psi.cwiseAbs2();
  acc.sum_n.col(s) += n;
  acc.sum_n2.col(s) += n.cwiseAbs2();
  const Index slot = acc.g1_slot[static_cast<std::size_t>(s)];
  if (slot >= 0) {
    // Lower triangle of conj(psi) conj(psi)^H, i.e. psi*_j psi_l.
    acc.sum_g1[static_cast<std::size_t>(slot)].template selfadjointView<Eigen::Lower>().rankUpdate(
        psi.conjugate());
  }
  const Scalar first = grid.dz * grid.z.dot(n);
  acc.sum_first(s) += first;
  acc.sum_first_sq(s) += first * first;
  const Scalar norm = n.sum();
  const Scalar x = norm > 0 ? grid.z.dot(n) / norm : Scalar(0);
  acc.sum_com(s) += x;
  acc.sum_com_sq(s) += x * x;
}

/// Absorbs a whole trajectory (all snapshots); count increases by one.
template <typename Scalar>
void accumulate(Accumulators<Scalar>& acc, const TrajectoryRecord<Scalar>& record,
                const Grid<Scalar>& grid) {
  if (static_cast<Index>(record.snapshots.size()) != acc.snapshots) {
    throw ShapeError("accumulate: trajectory has " + std::to_string(record.snapshots.size()) +
                     " snapshots, accumulators expect " + std::to_string(acc.snapshots));
  }
  for (Index s = 0; s < acc.snapshots; ++s) {
    accumulate_snapshot(acc, s, record.snapshots[static_cast<std::size_t>(s)], grid);
  }
  for (std::size_t s = 0; s < record.drift.size() && static_cast<Index>(s) < acc.snapshots; ++s) {
    const auto i = static_cast<Index>(s);
    acc.max_drift_number(i) = std::max(acc.max_drift_number(i), record.drift[s].number);
    acc.max_drift_momentum(i) = std::max(acc.max_drift_momentum(i), record.drift[s].momentum);
    acc.max_drift_energy(i) = std::max(acc.max_drift_energy(i), record.drift[s].energy);
  }
  acc.batch_ids.push_back(record.batch_id);
  ++acc.count;
}

/// Single-snapshot convenience: accumulators with one snapshot.
template <typename Scalar>
void accumulate(Accumulators<Scalar>& acc, const WignerField<Scalar>& field, const Grid<Scalar>& grid,
                int batch_id = 0) {
  TrajectoryRecord<Scalar> r;
  r.batch_id = batch_id;
  r.snapshots.push_back(field.values);
  accumulate(acc, r, grid);
}

template <typename Scalar>
void merge_into(Accumulators<Scalar>& a, const Accumulators<Scalar>& b) {
  if (b.count == 0 && b.M == 0) return;
  if (a.count == 0 && a.M == 0) {
    a = b;
    return;
  }
  if (a.M != b.M || a.snapshots != b.snapshots || a.g1_slot != b.g1_slot) {
    throw ShapeError("merge: accumulators have different shapes");
  }
  a.count += b.count;
  a.sum_n += b.sum_n;
  a.sum_n2 += b.sum_n2;
  for (std::size_t i = 0; i < a.sum_g1.size(); ++i) a.sum_g1[i] += b.sum_g1[i];
  a.sum_first += b.sum_first;
  a.sum_first_sq += b.sum_first_sq;
  a.sum_com += b.sum_com;
  a.sum_com_sq += b.sum_com_sq;
  a.max_drift_number = a.max_drift_number.cwiseMax(b.max_drift_number);
  a.max_drift_momentum = a.max_drift_momentum.cwiseMax(b.max_drift_momentum);
  a.max_drift_energy = a.max_drift_energy.cwiseMax(b.max_drift_energy);
  a.batch_ids.insert(a.batch_ids.end(), b.batch_ids.begin(), b.batch_ids.end());
}

template <typename Scalar>
Accumulators<Scalar> merge(Accumulators<Scalar> a, const Accumulators<Scalar>& b) {
  merge_into(a, b);
  return a;
}

namespace detail {

template <typename Scalar>
void require_count(const Accumulators<Scalar>& acc, Index minimum, const char* what) {
  if (acc.count < minimum) {
    throw EmptyEnsembleError(std::string(what) + " needs at least " + std::to_string(minimum) +
                             " trajectories, have " + std::to_string(acc.count));
  }
}

template <typename Scalar>
void require_snapshot(const Accumulators<Scalar>& acc, Index s) {
  if (s < 0 || s >= acc.snapshots) throw ShapeError("snapshot index out of range");
}

}  // namespace detail

/// <n_j> = <|psi_j|^2>_W - c/2.
template <typename Scalar>
RealVector<Scalar> density(const Accumulators<Scalar>& acc, const Grid<Scalar>& grid, Index s = 0,
                           Ordering ordering = Ordering::symmetric) {
  detail::require_count(acc, 1, "density");
  detail::require_snapshot(acc, s);
  RealVector<Scalar> n = acc.sum_n.col(s) / static_cast<Scalar>(acc.count);
  if (ordering == Ordering::symmetric) n.array() -= grid.commutator() / 2;
  return n;
}

/// Ensemble number estimate dz sum_j <n_j>.
template <typename Scalar>
Scalar number(const Accumulators<Scalar>& acc, const Grid<Scalar>& grid, Index s = 0,
              Ordering ordering = Ordering::symmetric) {
  return grid.dz * density(acc, grid, s, ordering).sum();
}

/// Normally ordered G2(z_j, z_j).
template <typename Scalar>
RealVector<Scalar> g2_diagonal(const Accumulators<Scalar>& acc, const Grid<Scalar>& grid, Index s = 0,
                               Ordering ordering = Ordering::symmetric) {
  detail::require_count(acc, 1, "g2_diagonal");
  detail::require_snapshot(acc, s);
  const auto count = static_cast<Scalar>(acc.count);
  const RealVector<Scalar> w2 = acc.sum_n.col(s) / count;
  const RealVector<Scalar> w4 = acc.sum_n2.col(s) / count;
  if (ordering == Ordering::classical) return w4;
  const Scalar c = grid.commutator();
  return (w4.array() - 2 * c * w2.array() + c * c / 2).matrix();
}

/// mu = dz sum_j G2(z_j, z_j) / N^2.
template <typename Scalar>
Scalar mu(const Accumulators<Scalar>& acc, const Grid<Scalar>& grid, Scalar N, Index s = 0,
          Ordering ordering = Ordering::symmetric) {
  if (!(N > 0)) throw ConfigError("mu: N must be positive");
  return grid.dz * g2_diagonal(acc, grid, s, ordering).sum() / (N * N);
}

/// Normally ordered, Hermitian G1_jl = <psi^dagger_j psi_l>.
template <typename Scalar>
ComplexMatrix<Scalar> g1_matrix(const Accumulators<Scalar>& acc, const Grid<Scalar>& grid, Index s,
                                Ordering ordering = Ordering::symmetric) {
  detail::require_count(acc, 1, "g1_matrix");
  detail::require_snapshot(acc, s);
  const Index slot = acc.g1_slot[static_cast<std::size_t>(s)];
  if (slot < 0) throw ShapeError("g1_matrix: G1 was not sampled at snapshot " + std::to_string(s));
  const ComplexMatrix<Scalar>& lower = acc.sum_g1[static_cast<std::size_t>(slot)];
  ComplexMatrix<Scalar> g = lower.template triangularView<Eigen::StrictlyLower>();
  g += lower.template triangularView<Eigen::StrictlyLower>().adjoint();
  g.diagonal() = lower.diagonal().real().template cast<std::complex<Scalar>>();
  g /= static_cast<Scalar>(acc.count);
  if (ordering == Ordering::symmetric) {
    const Scalar half = Scalar(1) / (2 * grid.dz);
    if (grid.mode == GridMode::balanced) {
      g.diagonal().array() -= half;
    } else {
      for (Index l = 0; l < grid.M; ++l)
        for (Index j = 0; j < grid.M; ++j) g(j, l) -= half * grid.projector(j, l);
    }
  }
  // Exact Hermiticity; cancels any rounding asymmetry.
  ComplexMatrix<Scalar> h = (g + g.adjoint()) / Scalar(2);
  return h;
}

template <typename Scalar = double>
struct ModeOccupations {
  /// Eigenvalues of dz G1, descending; they sum to the number estimate.
  RealVector<Scalar> values;
  /// Count of eigenvalues below -3 sqrt(trace).
  Index flagged_negative = 0;

  Scalar total() const { return values.sum(); }
};

template <typename Scalar>
ModeOccupations<Scalar> mode_occupations(const ComplexMatrix<Scalar>& g1, const Grid<Scalar>& grid) {
  if (g1.rows() != g1.cols() || g1.rows() != grid.M) throw ShapeError("mode_occupations: bad matrix shape");
  const ComplexMatrix<Scalar> op = grid.dz * g1;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix<Scalar>> solver(op, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    Eigen::JacobiSVD<ComplexMatrix<Scalar>> svd(op);
    const auto& sv = svd.singularValues();
    const Scalar cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
    throw NumericalError("Hermitian eigensolver did not converge (condition number " +
                         std::to_string(static_cast<double>(cond)) + ")");
  }
  ModeOccupations<Scalar> out;
  out.values = solver.eigenvalues().reverse();
  const Scalar threshold = -3 * std::sqrt(std::max(std::abs(out.values.sum()), Scalar(1)));
  out.flagged_negative = (out.values.array() < threshold).count();
  return out;
}

/// (1/4) Tr(C K C K) for C = diag(dz z), K = P/dz.
template <typename Scalar>
Scalar com_vacuum_variance(const Grid<Scalar>& grid) {
  const Scalar z2 = grid.z.squaredNorm();
  if (grid.mode == GridMode::balanced) return z2 / 4;
  const auto M = static_cast<Scalar>(grid.M);
  const Scalar zsum = grid.z.sum();
  return ((1 - 2 / M) * z2 + zsum * zsum / (M * M)) / 4;
}

/// Variance of the centre of mass from the position-moment sums.
/// Symmetric ordering removes the vacuum term (1/4) sum_jl z_j z_l |P_jl|^2
/// from the Wigner variance of A = dz sum z|psi|^2 before dividing by N^2.
template <typename Scalar>
Scalar com_variance(const Accumulators<Scalar>& acc, const Grid<Scalar>& grid, Scalar N, Index s = 0,
                    Ordering ordering = Ordering::symmetric) {
  detail::require_count(acc, 1, "com_variance");
  detail::require_snapshot(acc, s);
  if (!(N > 0)) throw ConfigError("com_variance: N must be positive");
  const auto count = static_cast<Scalar>(acc.count);
  const Scalar mean = acc.sum_first(s) / count;
  Scalar var = acc.sum_first_sq(s) / count - mean * mean;
  if (ordering == Ordering::symmetric) var -= com_vacuum_variance(grid);
  return var / (N * N);
}

/// Raw per-trajectory centre-of-mass variance, without ordering correction.
template <typename Scalar>
Scalar com_proxy_variance(const Accumulators<Scalar>& acc, Index s = 0) {
  detail::require_count(acc, 1, "com_proxy_variance");
  const auto count = static_cast<Scalar>(acc.count);
  const Scalar mean = acc.sum_com(s) / count;
  return acc.sum_com_sq(s) / count - mean * mean;
}

struct BatchEstimate {
  double mean = 0;
  double error = 0;
};

/// Mean of batch means and its standard error, std(batch means) / sqrt(B).
inline BatchEstimate batch_error(std::span<const double> batch_means) {
  const std::size_t B = batch_means.size();
  if (B < 2) throw EmptyEnsembleError("batch_error needs at least 2 batches");
  const double mean = std::accumulate(batch_means.begin(), batch_means.end(), 0.0) / static_cast<double>(B);
  double ss = 0;
  for (double v : batch_means) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(B - 1));
  return {mean, sd / std::sqrt(static_cast<double>(B))};
}

}  // namespace twb
