#pragma once

// Truncated-Wigner equation of motion on the spectral lattice,
//   d psi/dt = i d^2 psi/dz^2 - 2 i C psi (|psi|^2 - 1/dz),
// integrated with fourth-order Runge-Kutta in the interaction picture
// (kinetic part exact in momentum space, nonlinearity by classic RK4 in the
// frame rotating with the half-step kinetic propagator).

#include <cmath>
#include <functional>
#include <string>

#include "twbreather/errors.hpp"
#include "twbreather/init.hpp"
#include "twbreather/lattice.hpp"

namespace twb {

enum class NanCheck { every_snapshot, every_step };

template <typename Scalar = double>
struct StepperConfig {
  Scalar C = Scalar(-0.008);
  Scalar dt = Scalar(5e-4);
  Index n_steps = 10000;
  Index snapshot_stride = 50;
  /// Include the -1/dz ordering term. Off for a pure classical NLS run; it
  /// only adds a global phase.
  bool vacuum_shift = true;
  NanCheck nan_check = NanCheck::every_snapshot;

  Scalar t_final() const { return dt * static_cast<Scalar>(n_steps); }

  void validate() const {
    if (!(dt > 0)) throw ConfigError("time step dt must be positive");
    if (n_steps < 0) throw ConfigError("n_steps must be non-negative");
    if (snapshot_stride < 1) throw ConfigError("snapshot_stride must be >= 1");
    if (!std::isfinite(static_cast<double>(C))) throw ConfigError("coupling C must be finite");
  }

  /// Nonlinear phase accumulated per step at density n_max; above ~0.1 the
  /// step is too coarse.
  Scalar nonlinear_phase_per_step(Scalar n_max) const { return std::abs(C) * n_max * dt; }
};

/// -2 i C psi_j (|psi_j|^2 - shift) into `out`. shift is 1/dz for Wigner
/// fields, 0 for classical ones.
template <typename Scalar>
void nonlinear_rhs_into(const ComplexVector<Scalar>& psi, Scalar C, Scalar shift,
                        ComplexVector<Scalar>& out) {
  const std::complex<Scalar> factor(0, -2 * C);
  out = (factor * psi.array() * (psi.array().abs2() - shift)).matrix();
}

template <typename Scalar>
ComplexVector<Scalar> nonlinear_rhs(const WignerField<Scalar>& field, Scalar C, Scalar dz) {
  if (!field.values.allFinite()) {
    throw IntegrationError("non-finite field passed to nonlinear_rhs", static_cast<double>(field.t));
  }
  ComplexVector<Scalar> out;
  nonlinear_rhs_into(field.values, C, Scalar(1) / dz, out);
  return out;
}

/// exp(-i k^2 h) per spectral bin; projected bins get 0.
template <typename Scalar>
ComplexVector<Scalar> kinetic_phase(const Grid<Scalar>& grid, Scalar h) {
  ComplexVector<Scalar> phase(grid.M);
  for (Index m = 0; m < grid.M; ++m) {
    phase(m) = grid.mask(m) * std::polar(Scalar(1), -grid.k(m) * grid.k(m) * h);
  }
  return phase;
}

/// One trajectory's integrator: owns the transform plans and RK4 scratch.
template <typename Scalar>
class Rk4ipStepper {
 public:
  Rk4ipStepper(const Grid<Scalar>& grid, const StepperConfig<Scalar>& cfg)
      : grid_(&grid),
        cfg_(cfg),
        transform_(grid),
        half_step_(kinetic_phase(grid, cfg.dt / 2)),
        shift_(cfg.vacuum_shift ? Scalar(1) / grid.dz : Scalar(0)) {
    cfg_.validate();
  }

  const StepperConfig<Scalar>& config() const { return cfg_; }
  SpectralTransform<Scalar>& transform() { return transform_; }

  void step(WignerField<Scalar>& field) {
    if (field.values.size() != grid_->M) throw ShapeError("rk4ip step: field length mismatch");
    const Scalar h = cfg_.dt;
    const Scalar C = cfg_.C;
    ComplexVector<Scalar>& psi = field.values;

    transform_.apply_spectral(psi, half_step_, psi_ip_);
    nonlinear_rhs_into(psi, C, shift_, tmp_);
    transform_.apply_spectral(tmp_, half_step_, k1_);

    tmp_ = psi_ip_ + (h / 2) * k1_;
    nonlinear_rhs_into(tmp_, C, shift_, k2_);

    tmp_ = psi_ip_ + (h / 2) * k2_;
    nonlinear_rhs_into(tmp_, C, shift_, k3_);

    tmp_ = psi_ip_ + h * k3_;
    transform_.apply_spectral(tmp_, half_step_, tmp_);
    nonlinear_rhs_into(tmp_, C, shift_, k4_);

    tmp_ = psi_ip_ + (h / 6) * (k1_ + 2 * k2_ + 2 * k3_);
    transform_.apply_spectral(tmp_, half_step_, psi);
    psi += (h / 6) * k4_;
    field.t += h;

    if (cfg_.nan_check == NanCheck::every_step) check_finite(field);
  }

  static void check_finite(const WignerField<Scalar>& field) {
    if (!field.values.allFinite()) {
      throw IntegrationError("non-finite field value", static_cast<double>(field.t));
    }
  }

 private:
  const Grid<Scalar>* grid_;
  StepperConfig<Scalar> cfg_;
  SpectralTransform<Scalar> transform_;
  ComplexVector<Scalar> half_step_;
  Scalar shift_;
  ComplexVector<Scalar> psi_ip_, tmp_, k1_, k2_, k3_, k4_;
};

template <typename Scalar>
WignerField<Scalar> rk4ip_step(WignerField<Scalar> field, const Grid<Scalar>& grid,
                               const StepperConfig<Scalar>& cfg) {
  Rk4ipStepper<Scalar> stepper(grid, cfg);
  stepper.step(field);
  Rk4ipStepper<Scalar>::check_finite(field);
  return field;
}

/// Snapshot callback: (snapshot index, field).
template <typename Scalar>
using SnapshotObserver = std::function<void(Index, const WignerField<Scalar>&)>;

/// Number of observer calls evolve() makes for a config.
template <typename Scalar>
Index snapshot_count(const StepperConfig<Scalar>& cfg) {
  const Index full = cfg.n_steps / cfg.snapshot_stride;
  return 1 + full + (cfg.n_steps % cfg.snapshot_stride != 0 ? 1 : 0);
}

/// Times at which evolve() calls its observer.
template <typename Scalar>
RealVector<Scalar> snapshot_times(const StepperConfig<Scalar>& cfg) {
  RealVector<Scalar> t(snapshot_count(cfg));
  Index s = 0;
  for (Index step = 0; step <= cfg.n_steps; ++step) {
    if (step % cfg.snapshot_stride == 0 || step == cfg.n_steps) {
      t(s++) = cfg.dt * static_cast<Scalar>(step);
    }
  }
  return t;
}

/// Advances the field by cfg.n_steps, calling `observer` at t=0, every
/// snapshot_stride steps and at the final step.
template <typename Scalar>
WignerField<Scalar> evolve(WignerField<Scalar> field, Rk4ipStepper<Scalar>& stepper,
                           const SnapshotObserver<Scalar>& observer) {
  const StepperConfig<Scalar>& cfg = stepper.config();
  Index snapshot = 0;
  Rk4ipStepper<Scalar>::check_finite(field);
  if (observer) observer(snapshot, field);
  ++snapshot;
  for (Index step = 1; step <= cfg.n_steps; ++step) {
    stepper.step(field);
    if (step % cfg.snapshot_stride == 0 || step == cfg.n_steps) {
      Rk4ipStepper<Scalar>::check_finite(field);
      if (observer) observer(snapshot, field);
      ++snapshot;
    }
  }
  return field;
}

template <typename Scalar>
WignerField<Scalar> evolve(WignerField<Scalar> field, const Grid<Scalar>& grid,
                           const StepperConfig<Scalar>& cfg, const SnapshotObserver<Scalar>& observer) {
  Rk4ipStepper<Scalar> stepper(grid, cfg);
  return evolve(std::move(field), stepper, observer);
}

/// Noise-free evolution of the coherent amplitude (classical NLS).
template <typename Scalar>
WignerField<Scalar> meanfield_evolve(const ComplexVector<Scalar>& alpha, const Grid<Scalar>& grid,
                                     const StepperConfig<Scalar>& cfg,
                                     const SnapshotObserver<Scalar>& observer) {
  if (alpha.size() != grid.M) throw ShapeError("meanfield_evolve: alpha length mismatch");
  return evolve(WignerField<Scalar>{alpha, Scalar(0)}, grid, cfg, observer);
}

}  // namespace twb
