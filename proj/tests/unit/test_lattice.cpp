#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"
#include "twbreather/errors.hpp"
#include "twbreather/lattice.hpp"

using namespace twb;
using twb::testing::plane_wave;
using twb::testing::random_field;
using twb::testing::rel_max_diff;

TEST_CASE("grid geometry at production size") {
  const auto g = make_grid<double>(512, 20.0);
  CHECK(g.dz == 0.0390625);
  CHECK(g.z(256) == 0.0);
  CHECK(g.dz * static_cast<double>(g.M) == 20.0);
  for (Index j = 1; j < g.M; ++j) CHECK(g.z(j) + g.z(g.M - j) == 0.0);
  CHECK(g.max_abs_k() == doctest::Approx(2 * std::numbers::pi / 20 * 255.5).epsilon(1e-14));
  CHECK(g.max_abs_k() == doctest::Approx(80.27).epsilon(1e-3));
}

TEST_CASE("balanced k grid is antisymmetric and sums to zero") {
  for (Index M : {8, 16, 64, 256, 512}) {
    for (double L : {8.0, 20.0, 3.7}) {
      const auto g = make_grid<double>(M, L);
      CHECK(std::abs(g.k.sum()) < 1e-14 * g.max_abs_k() * static_cast<double>(M));
      for (Index m = 0; m < M; ++m) CHECK(g.k(m) == -g.k(M - 1 - m));
      std::vector<double> sorted(g.k.data(), g.k.data() + M);
      std::sort(sorted.begin(), sorted.end());
      for (Index m = 0; m < M; ++m) CHECK(sorted[static_cast<std::size_t>(m)] == -sorted[static_cast<std::size_t>(M - 1 - m)]);
      CHECK(std::find(sorted.begin(), sorted.end(), 0.0) == sorted.end());
    }
  }
}

TEST_CASE("M=8, L=8 momenta are odd multiples of pi/8") {
  const auto g = make_grid<double>(8, 8.0);
  const double unit = std::numbers::pi / 8;
  const double expected[] = {-7, -5, -3, -1, 1, 3, 5, 7};
  for (Index m = 0; m < 8; ++m) CHECK(g.k(m) == doctest::Approx(expected[m] * unit).epsilon(1e-15));
}

TEST_CASE("periodic grid projects the unpaired Nyquist bin") {
  const auto g = make_grid<double>(64, 20.0, GridMode::periodic);
  CHECK(g.mask.sum() == 63);
  CHECK(g.mask(0) == 0);
  CHECK(std::abs(g.k.sum()) < 1e-12);
  CHECK(g.k(32) == 0.0);
  CHECK(g.commutator() == doctest::Approx(63.0 / (64 * g.dz)));
}

TEST_CASE("invalid grids are configuration errors") {
  CHECK_THROWS_AS(make_grid<double>(7, 20.0), ConfigError);
  CHECK_THROWS_AS(make_grid<double>(6, 20.0), ConfigError);
  CHECK_THROWS_AS(make_grid<double>(33, 20.0), ConfigError);
  CHECK_THROWS_AS(make_grid<double>(64, 0.0), ConfigError);
  CHECK_THROWS_AS(make_grid<double>(64, -1.0), ConfigError);
}

TEST_CASE("zero field transforms to zero") {
  const auto g = make_grid<double>(64, 20.0);
  const ComplexVector<double> zero = ComplexVector<double>::Zero(64);
  CHECK(forward_spectral(zero, g).cwiseAbs().maxCoeff() == 0.0);
  CHECK(inverse_spectral(zero, g).cwiseAbs().maxCoeff() == 0.0);
  CHECK(spectral_derivative(zero, g).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("plane waves map to single bins and back") {
  for (GridMode mode : {GridMode::balanced, GridMode::periodic}) {
    const auto g = make_grid<double>(128, 20.0, mode);
    SpectralTransform<double> t(g);
    for (Index m = 0; m < g.M; ++m) {
      if (g.mask(m) == 0) continue;
      ComplexVector<double> spec;
      t.forward(plane_wave(g, g.k(m)), spec);
      const double peak = std::abs(spec(m));
      spec(m) = 0;
      CHECK(spec.cwiseAbs().maxCoeff() / peak < 1e-12);

      ComplexVector<double> unit = ComplexVector<double>::Zero(g.M), back;
      unit(m) = std::sqrt(static_cast<double>(g.M));
      t.inverse(unit, back);
      CHECK(rel_max_diff(back, plane_wave(g, g.k(m))) < 1e-12);
    }
  }
}

TEST_CASE("round trip and Parseval on random fields") {
  for (std::uint32_t seed = 1; seed <= 20; ++seed) {
    const Index M = Index{8} << (seed % 7);
    const auto g = make_grid<double>(M, 5.0 + seed);
    const ComplexVector<double> f = random_field(M, seed);
    const ComplexVector<double> F = forward_spectral(f, g);
    CHECK(rel_max_diff(inverse_spectral(F, g), f) < 1e-12);
    CHECK(std::abs(F.squaredNorm() - f.squaredNorm()) / f.squaredNorm() < 1e-12);
  }
}

TEST_CASE("spectral derivative of every plane wave") {
  for (GridMode mode : {GridMode::balanced, GridMode::periodic}) {
    const auto g = make_grid<double>(64, 20.0, mode);
    SpectralTransform<double> t(g);
    for (Index m = 0; m < g.M; ++m) {
      if (g.mask(m) == 0) continue;
      const ComplexVector<double> f = plane_wave(g, g.k(m));
      const ComplexVector<double> expected = std::complex<double>(0, g.k(m)) * f;
      const ComplexVector<double> d = spectral_derivative(f, t);
      CHECK((d - expected).cwiseAbs().maxCoeff() / std::max(std::abs(g.k(m)), 1.0) < 1e-12);
    }
  }
}

TEST_CASE("spectral derivative of a Gaussian") {
  const auto g = make_grid<double>(256, 20.0);
  ComplexVector<double> f(g.M), expected(g.M);
  for (Index j = 0; j < g.M; ++j) {
    const double z = g.z(j);
    f(j) = std::exp(-z * z);
    expected(j) = -2 * z * std::exp(-z * z);
  }
  CHECK((spectral_derivative(f, g) - expected).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("length mismatch is a shape error") {
  const auto g = make_grid<double>(64, 20.0);
  SpectralTransform<double> t(g);
  ComplexVector<double> out;
  CHECK_THROWS_AS(t.forward(ComplexVector<double>::Zero(32), out), ShapeError);
  CHECK_THROWS_AS(t.inverse(ComplexVector<double>::Zero(65), out), ShapeError);
  CHECK_THROWS_AS(spectral_derivative(ComplexVector<double>(ComplexVector<double>::Zero(8)), g), ShapeError);
}

TEST_CASE("copied transforms own independent plans") {
  const auto g = make_grid<double>(64, 20.0);
  SpectralTransform<double> a(g);
  SpectralTransform<double> b = a;
  SpectralTransform<double> c(std::move(a));
  const ComplexVector<double> f = random_field(64, 3);
  ComplexVector<double> fb, fc;
  b.forward(f, fb);
  c.forward(f, fc);
  CHECK((fb - fc).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("concurrent transforms agree with serial ones") {
  const auto g = make_grid<double>(256, 20.0);
  const ComplexVector<double> f = random_field(256, 11);
  const ComplexVector<double> serial = forward_spectral(f, g);
  std::vector<ComplexVector<double>> results(4);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < results.size(); ++i) {
    threads.emplace_back([&, i] {
      SpectralTransform<double> t(g);
      for (int rep = 0; rep < 200; ++rep) t.forward(f, results[i]);
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& r : results) CHECK((r - serial).cwiseAbs().maxCoeff() == 0.0);
}

#ifdef TWB_HAVE_FFTW3F
TEST_CASE("single precision transform round trip") {
  const auto g = make_grid<float>(128, 20.0f);
  ComplexVector<float> f = random_field(128, 5).cast<std::complex<float>>();
  const ComplexVector<float> F = forward_spectral(f, g);
  const ComplexVector<float> back = inverse_spectral(F, g);
  CHECK((back - f).cwiseAbs().maxCoeff() / f.cwiseAbs().maxCoeff() < 1e-5f);
  CHECK(std::abs(F.squaredNorm() - f.squaredNorm()) / f.squaredNorm() < 1e-5f);
}
#endif
