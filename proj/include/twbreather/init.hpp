#pragma once

#include <cmath>
#include <cstdint>

#include "twbreather/errors.hpp"
#include "twbreather/lattice.hpp"
#include "twbreather/random.hpp"

namespace twb {

/// Mean particle number and position of the sech-shaped coherent mode.
template <typename Scalar = double>
struct InitialStateSpec {
  Scalar N = 1000;
  Scalar center = 0;
};

struct NoiseSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t trajectory_index = 0;
};

/// One trajectory's field on the lattice together with its time.
template <typename Scalar = double>
struct WignerField {
  ComplexVector<Scalar> values;
  Scalar t = 0;
};

/// alpha_j = sqrt(N/2) sech(z_j - center): the fundamental soliton of
/// coupling -2/N.
template <typename Scalar>
ComplexVector<Scalar> coherent_amplitude(const Grid<Scalar>& grid, const InitialStateSpec<Scalar>& spec) {
  if (!(spec.N >= 0)) throw ConfigError("initial particle number N must be non-negative");
  const Scalar amp = std::sqrt(spec.N / 2);
  ComplexVector<Scalar> alpha(grid.M);
  for (Index j = 0; j < grid.M; ++j) {
    alpha(j) = amp / std::cosh(grid.z(j) - spec.center);
  }
  return alpha;
}

/// Draws one sample of the coherent-state Wigner distribution:
/// psi_j = alpha_j + zeta_j / sqrt(2 dz) with unit complex Gaussians zeta.
/// On the periodic grid the noise is projected off the Nyquist bin.
template <typename Scalar>
WignerField<Scalar> sample_wigner(const ComplexVector<Scalar>& alpha, const Grid<Scalar>& grid,
                                  const NoiseSpec& noise) {
  if (alpha.size() != grid.M) throw ShapeError("sample_wigner: alpha length mismatch");
  RandomStream stream = seed_stream(noise.master_seed, noise.trajectory_index);
  const Scalar scale = Scalar(1) / std::sqrt(2 * grid.dz);
  ComplexVector<Scalar> xi(grid.M);
  for (Index j = 0; j < grid.M; ++j) {
    const std::complex<double> zeta = stream.complex_gaussian();
    xi(j) = std::complex<Scalar>(static_cast<Scalar>(zeta.real()), static_cast<Scalar>(zeta.imag())) *
            scale;
  }
  if (grid.mode == GridMode::periodic) {
    SpectralTransform<Scalar> t(grid);
    t.apply_spectral(xi, grid.mask.template cast<std::complex<Scalar>>(), xi);
  }
  return {alpha + xi, Scalar(0)};
}

}  // namespace twb
