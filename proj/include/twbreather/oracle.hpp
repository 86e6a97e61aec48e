#pragma once

#include <iosfwd>

namespace twb {

/// Single-mode check of the ordering corrections. Three independent routes
/// for a coherent state |alpha> on one lattice point of spacing dz:
///   * quadrature of the analytic Wigner Gaussian -> symmetric moments,
///   * truncated Fock-space matrices              -> symmetric and normal moments,
///   * the library's density / G2 corrections applied to the Wigner moments.
struct SingleModeOracle {
  double alpha2 = 2;
  double dz = 1;

  // Wigner moments <|psi|^2>_W, <|psi|^4>_W by quadrature.
  double wigner_n = 0;
  double wigner_n2 = 0;
  // Same moments as Weyl-ordered Fock-space expectation values.
  double fock_symmetric_n = 0;
  double fock_symmetric_n2 = 0;
  // Normally ordered <psi^dagger psi> and <psi^dagger^2 psi^2> in Fock space.
  double fock_density = 0;
  double fock_g2 = 0;
  // Library corrections applied to the quadrature moments.
  double corrected_density = 0;
  double corrected_g2 = 0;

  double max_error = 0;
  bool passed = false;
};

SingleModeOracle run_single_mode_oracle(double alpha2 = 2, double dz = 1, double tolerance = 1e-10);

void print_oracle(std::ostream& out, const SingleModeOracle& r);

}  // namespace twb
