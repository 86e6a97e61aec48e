#pragma once

// Periodic 1D lattice, zero-symmetric momentum grid and the unitary
// spectral transform that connects them.
//
// Conventions (fixed, asserted by the Parseval tests):
//   z_j = (j - M/2) dz,                 j = 0..M-1, dz = L/M
//   k_m = (m - M/2 + s) 2pi/L,          s = 1/2 (balanced) or 0 (periodic)
//   forward:  f~_m = M^{-1/2} sum_j f_j exp(-i k_m z_j)
//   inverse:  f_j  = M^{-1/2} sum_m f~_m exp(+i k_m z_j)
// so that sum_j |f_j|^2 = sum_m |f~_m|^2. Spectral bin m holds k_m directly;
// there is no fftshift. The offsets are absorbed into a position phase
// applied before the DFT and a momentum phase (-1)^m applied after it.

#include <complex>
#include <cstdint>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Dense>
#include <fftw3.h>

#include "twbreather/errors.hpp"

namespace twb {

using Index = Eigen::Index;

template <typename Scalar>
using RealVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using ComplexMatrix = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

enum class GridMode {
  /// Half-step shifted momenta: no zero mode, no unpaired Nyquist mode.
  balanced,
  /// Plain DFT momenta; the unpaired Nyquist bin is projected out.
  periodic,
};

inline std::string to_string(GridMode mode) {
  return mode == GridMode::balanced ? "balanced" : "periodic";
}

template <typename Scalar>
struct Grid {
  Index M = 0;
  Scalar L = 0;
  Scalar dz = 0;
  GridMode mode = GridMode::balanced;
  RealVector<Scalar> z;
  /// Momentum of each spectral bin. A projected (inactive) bin stores 0.
  RealVector<Scalar> k;
  /// 1 for active bins, 0 for the projected Nyquist bin in periodic mode.
  RealVector<Scalar> mask;
  /// exp(-i k_0 z_j), applied before the forward DFT.
  ComplexVector<Scalar> pre_phase;
  /// (-1)^m, applied after the forward DFT.
  RealVector<Scalar> post_phase;

  Index center_index() const { return M / 2; }
  Index active_modes() const { return mode == GridMode::balanced ? M : M - 1; }
  Scalar max_abs_k() const { return k.cwiseAbs().maxCoeff(); }

  /// Diagonal of the lattice commutator [psi_j, psi_j^dagger]. Equals 1/dz on
  /// the balanced grid; the periodic projection removes one mode.
  Scalar commutator() const {
    return static_cast<Scalar>(active_modes()) / (static_cast<Scalar>(M) * dz);
  }

  /// Projector onto the active modes in position space, P_jl.
  std::complex<Scalar> projector(Index j, Index l) const {
    Scalar delta = j == l ? Scalar(1) : Scalar(0);
    if (mode == GridMode::balanced) return {delta, 0};
    Scalar sign = ((j - l) % 2 == 0) ? Scalar(1) : Scalar(-1);
    return {delta - sign / static_cast<Scalar>(M), 0};
  }
};

namespace detail {

// exp(-i 2pi num / den) with num reduced exactly in integer arithmetic.
template <typename Scalar>
std::complex<Scalar> exact_phase(std::int64_t num, std::int64_t den) {
  std::int64_t r = num % den;
  if (r < 0) r += den;
  const long double angle = -2.0L * std::numbers::pi_v<long double> *
                            static_cast<long double>(r) / static_cast<long double>(den);
  return {static_cast<Scalar>(std::cos(angle)), static_cast<Scalar>(std::sin(angle))};
}

}  // namespace detail

template <typename Scalar = double>
Grid<Scalar> make_grid(Index M, Scalar L, GridMode mode = GridMode::balanced) {
  if (M < 8 || M % 2 != 0) {
    throw ConfigError("grid mode count M must be even and >= 8, got " + std::to_string(M));
  }
  if (!(L > 0)) throw ConfigError("box length L must be positive");

  Grid<Scalar> g;
  g.M = M;
  g.L = L;
  g.dz = L / static_cast<Scalar>(M);
  g.mode = mode;
  g.z.resize(M);
  g.k.resize(M);
  g.mask.setOnes(M);
  g.pre_phase.resize(M);
  g.post_phase.resize(M);

  const Scalar dk = 2 * std::numbers::pi_v<Scalar> / L;
  // Twice the momentum index offset, so balanced grids stay integral.
  const std::int64_t sigma = mode == GridMode::balanced ? 1 : 0;
  for (Index j = 0; j < M; ++j) {
    // z_j computed as an integer multiple of dz, so z_{M/2} is exactly 0 and
    // z_j = -z_{M-j}.
    g.z(j) = static_cast<Scalar>(j - M / 2) * g.dz;
    const std::int64_t two_m = 2 * static_cast<std::int64_t>(j) - M + sigma;
    g.k(j) = static_cast<Scalar>(two_m) * dk / 2;
    // k_0 z_j / 2pi = (sigma - M)(2j - M) / (4M)
    g.pre_phase(j) = detail::exact_phase<Scalar>((sigma - M) * (2 * static_cast<std::int64_t>(j) - M),
                                                 4 * static_cast<std::int64_t>(M));
    g.post_phase(j) = (j % 2 == 0) ? Scalar(1) : Scalar(-1);
  }
  if (mode == GridMode::periodic) {
    // Bin 0 is k = -M/2 dk, whose partner +M/2 dk is not on the grid.
    g.k(0) = 0;
    g.mask(0) = 0;
  }
  return g;
}

namespace detail {

template <typename Scalar>
struct FftwApi;

template <>
struct FftwApi<double> {
  using plan_type = fftw_plan;
  using complex_type = fftw_complex;
  static plan_type plan(int n, complex_type* in, complex_type* out, int sign) {
    return fftw_plan_dft_1d(n, in, out, sign, FFTW_ESTIMATE);
  }
  static void execute(plan_type p, complex_type* in, complex_type* out) {
    fftw_execute_dft(p, in, out);
  }
  static void destroy(plan_type p) { fftw_destroy_plan(p); }
};

template <>
struct FftwApi<float> {
  using plan_type = fftwf_plan;
  using complex_type = fftwf_complex;
  static plan_type plan(int n, complex_type* in, complex_type* out, int sign) {
    return fftwf_plan_dft_1d(n, in, out, sign, FFTW_ESTIMATE);
  }
  static void execute(plan_type p, complex_type* in, complex_type* out) {
    fftwf_execute_dft(p, in, out);
  }
  static void destroy(plan_type p) { fftwf_destroy_plan(p); }
};

// FFTW's planner is not thread safe; execution of an existing plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// Owns the FFTW plans and scratch for one worker. Not shareable between
/// threads; make one per trajectory worker. The grid must outlive it.
template <typename Scalar>
class SpectralTransform {
  using Api = detail::FftwApi<Scalar>;
  using Complex = std::complex<Scalar>;

 public:
  explicit SpectralTransform(const Grid<Scalar>& grid) : grid_(&grid) { make_plans(); }

  SpectralTransform(const SpectralTransform& other) : grid_(other.grid_) { make_plans(); }
  SpectralTransform& operator=(const SpectralTransform& other) {
    if (this != &other) {
      release();
      grid_ = other.grid_;
      make_plans();
    }
    return *this;
  }
  SpectralTransform(SpectralTransform&& other) noexcept
      : grid_(other.grid_),
        forward_plan_(std::exchange(other.forward_plan_, nullptr)),
        backward_plan_(std::exchange(other.backward_plan_, nullptr)),
        a_(std::move(other.a_)),
        b_(std::move(other.b_)) {}
  SpectralTransform& operator=(SpectralTransform&& other) noexcept {
    if (this != &other) {
      release();
      grid_ = other.grid_;
      forward_plan_ = std::exchange(other.forward_plan_, nullptr);
      backward_plan_ = std::exchange(other.backward_plan_, nullptr);
      a_ = std::move(other.a_);
      b_ = std::move(other.b_);
    }
    return *this;
  }
  ~SpectralTransform() { release(); }

  const Grid<Scalar>& grid() const { return *grid_; }

  void forward(const ComplexVector<Scalar>& in, ComplexVector<Scalar>& out) {
    check(in);
    const Grid<Scalar>& g = *grid_;
    a_ = g.pre_phase.cwiseProduct(in);
    Api::execute(forward_plan_, raw(a_), raw(b_));
    out = b_.cwiseProduct(g.post_phase.template cast<Complex>()) * norm();
  }

  void inverse(const ComplexVector<Scalar>& in, ComplexVector<Scalar>& out) {
    check(in);
    const Grid<Scalar>& g = *grid_;
    a_ = in.cwiseProduct(g.post_phase.template cast<Complex>());
    Api::execute(backward_plan_, raw(a_), raw(b_));
    out = g.pre_phase.conjugate().cwiseProduct(b_) * norm();
  }

  /// out = inverse(multiplier * forward(in)); the momentum phases cancel and
  /// are skipped. `in` and `out` may alias.
  void apply_spectral(const ComplexVector<Scalar>& in, const ComplexVector<Scalar>& multiplier,
                      ComplexVector<Scalar>& out) {
    check(in);
    const Grid<Scalar>& g = *grid_;
    a_ = g.pre_phase.cwiseProduct(in);
    Api::execute(forward_plan_, raw(a_), raw(b_));
    // Plans run only on the buffers they were made for (a_ -> b_), so the
    // alignment FFTW saw at planning time always holds.
    a_ = b_.cwiseProduct(multiplier);
    Api::execute(backward_plan_, raw(a_), raw(b_));
    out = g.pre_phase.conjugate().cwiseProduct(b_) / static_cast<Scalar>(g.M);
  }

 private:
  static typename Api::complex_type* raw(ComplexVector<Scalar>& v) {
    return reinterpret_cast<typename Api::complex_type*>(v.data());
  }

  Scalar norm() const { return Scalar(1) / std::sqrt(static_cast<Scalar>(grid_->M)); }

  void check(const ComplexVector<Scalar>& in) const {
    if (in.size() != grid_->M) {
      throw ShapeError("spectral transform expects length " + std::to_string(grid_->M) +
                       ", got " + std::to_string(in.size()));
    }
  }

  void make_plans() {
    const Index M = grid_->M;
    a_.setZero(M);
    b_.setZero(M);
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    forward_plan_ = Api::plan(static_cast<int>(M), raw(a_), raw(b_), FFTW_FORWARD);
    backward_plan_ = Api::plan(static_cast<int>(M), raw(a_), raw(b_), FFTW_BACKWARD);
  }

  void release() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    if (forward_plan_) Api::destroy(forward_plan_);
    if (backward_plan_) Api::destroy(backward_plan_);
    forward_plan_ = nullptr;
    backward_plan_ = nullptr;
  }

  const Grid<Scalar>* grid_;
  typename Api::plan_type forward_plan_ = nullptr;
  typename Api::plan_type backward_plan_ = nullptr;
  ComplexVector<Scalar> a_;
  ComplexVector<Scalar> b_;
};

template <typename Scalar>
ComplexVector<Scalar> forward_spectral(const ComplexVector<Scalar>& field, const Grid<Scalar>& grid) {
  SpectralTransform<Scalar> t(grid);
  ComplexVector<Scalar> out;
  t.forward(field, out);
  return out;
}

template <typename Scalar>
ComplexVector<Scalar> inverse_spectral(const ComplexVector<Scalar>& spectrum,
                                       const Grid<Scalar>& grid) {
  SpectralTransform<Scalar> t(grid);
  ComplexVector<Scalar> out;
  t.inverse(spectrum, out);
  return out;
}

/// d/dz via i k in momentum space. Reuses the caller's transform.
template <typename Scalar>
ComplexVector<Scalar> spectral_derivative(const ComplexVector<Scalar>& field,
                                          SpectralTransform<Scalar>& transform) {
  const Grid<Scalar>& g = transform.grid();
  if (field.size() != g.M) throw ShapeError("spectral_derivative: length mismatch");
  ComplexVector<Scalar> ik = (g.k.cwiseProduct(g.mask)).template cast<std::complex<Scalar>>() *
                             std::complex<Scalar>(0, 1);
  ComplexVector<Scalar> out;
  transform.apply_spectral(field, ik, out);
  return out;
}

template <typename Scalar>
ComplexVector<Scalar> spectral_derivative(const ComplexVector<Scalar>& field, const Grid<Scalar>& grid) {
  SpectralTransform<Scalar> t(grid);
  return spectral_derivative(field, t);
}

}  // namespace twb
