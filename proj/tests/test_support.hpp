#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include "twbreather/lattice.hpp"

namespace twb::testing {

// Property-test input: complex field with independent N(0,1) parts.
inline ComplexVector<double> random_field(Index M, std::uint32_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  ComplexVector<double> f(M);
  for (Index j = 0; j < M; ++j) f(j) = {g(rng), g(rng)};
  return f;
}

inline double rel_max_diff(const ComplexVector<double>& a, const ComplexVector<double>& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline ComplexVector<double> plane_wave(const Grid<double>& g, double k) {
  ComplexVector<double> f(g.M);
  for (Index j = 0; j < g.M; ++j) f(j) = std::polar(1.0, k * g.z(j));
  return f;
}

// Mean and standard error of a sample accumulated on the fly.
struct RunningStat {
  double n = 0, sum = 0, sum2 = 0;
  void add(double x) {
    n += 1;
    sum += x;
    sum2 += x * x;
  }
  double mean() const { return sum / n; }
  double var() const { return (sum2 - sum * sum / n) / (n - 1); }
  double sem() const { return std::sqrt(var() / n); }
};

}  // namespace twb::testing
