#include <cmath>

#include "doctest.h"
#include "test_support.hpp"
#include "twbreather/errors.hpp"
#include "twbreather/init.hpp"

using namespace twb;
using twb::testing::RunningStat;

TEST_CASE("coherent amplitude is the sech mode") {
  const auto g = make_grid<double>(512, 20.0);
  const auto alpha = coherent_amplitude(g, InitialStateSpec<double>{1000, 0});
  CHECK(alpha(g.center_index()).real() == doctest::Approx(22.360680).epsilon(1e-7));
  CHECK(alpha.imag().cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::abs(g.dz * alpha.squaredNorm() - 1000) / 1000 < 1e-4);

  const auto zero = coherent_amplitude(g, InitialStateSpec<double>{0, 0});
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(coherent_amplitude(g, InitialStateSpec<double>{-1, 0}), ConfigError);
}

TEST_CASE("shifted sech mode peaks at its centre") {
  const auto g = make_grid<double>(256, 20.0);
  const auto alpha = coherent_amplitude(g, InitialStateSpec<double>{1000, 1.25});
  Index arg = 0;
  alpha.cwiseAbs().maxCoeff(&arg);
  CHECK(g.z(arg) == doctest::Approx(1.25).epsilon(1e-12));
}

TEST_CASE("same noise spec regenerates the same field") {
  const auto g = make_grid<double>(64, 20.0);
  const auto alpha = coherent_amplitude(g, InitialStateSpec<double>{100, 0});
  const auto a = sample_wigner(alpha, g, NoiseSpec{7, 12});
  const auto b = sample_wigner(alpha, g, NoiseSpec{7, 12});
  const auto c = sample_wigner(alpha, g, NoiseSpec{7, 13});
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.values - c.values).cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.t == 0.0);
  CHECK_THROWS_AS(sample_wigner(ComplexVector<double>::Zero(32).eval(), g, NoiseSpec{}), ShapeError);
}

TEST_CASE("vacuum noise carries half a quantum per mode") {
  const auto g = make_grid<double>(16, 4.0);
  const ComplexVector<double> vac = ComplexVector<double>::Zero(16);
  const int n = 100000;
  const double scale = std::sqrt(2 * g.dz);
  std::vector<RunningStat> mod2(16);
  ComplexVector<double> mean = ComplexVector<double>::Zero(16);
  ComplexMatrix<double> pair = ComplexMatrix<double>::Zero(16, 16);
  for (int i = 0; i < n; ++i) {
    const ComplexVector<double> zeta = sample_wigner(vac, g, NoiseSpec{3, static_cast<std::uint64_t>(i)}).values * scale;
    for (Index j = 0; j < 16; ++j) mod2[static_cast<std::size_t>(j)].add(std::norm(zeta(j)) / (2 * g.dz));
    mean += zeta;
    pair += zeta * zeta.transpose();
  }
  mean /= n;
  pair /= n;
  const double bound = 3 / std::sqrt(n);
  for (Index j = 0; j < 16; ++j) {
    const auto& st = mod2[static_cast<std::size_t>(j)];
    CHECK(std::abs(st.mean() - 1 / (2 * g.dz)) < 3 * st.sem());
    CHECK(std::abs(mean(j)) < bound);
    for (Index l = 0; l < 16; ++l) CHECK(std::abs(pair(j, l)) < bound);
  }
}

TEST_CASE("Wigner samples scatter around alpha with variance 1/(2 dz)") {
  const auto g = make_grid<double>(256, 20.0);
  const double N = 1000;
  const auto alpha = coherent_amplitude(g, InitialStateSpec<double>{N, 0});
  const int n = 10000;
  ComplexVector<double> sum = ComplexVector<double>::Zero(g.M);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(g.M);
  RunningStat number;
  for (int i = 0; i < n; ++i) {
    const auto f = sample_wigner(alpha, g, NoiseSpec{11, static_cast<std::uint64_t>(i)});
    const ComplexVector<double> d = f.values - alpha;
    sum += d;
    sq += d.cwiseAbs2();
    number.add(g.dz * f.values.squaredNorm());
  }
  const double s = 1 / (2 * g.dz);
  // Per-component mean deviation in units of its standard error sqrt(s/2/n).
  const double se = std::sqrt(s / 2 / n);
  int outside3 = 0;
  double worst = 0;
  for (Index j = 0; j < g.M; ++j) {
    for (double dev : {sum(j).real() / n, sum(j).imag() / n}) {
      outside3 += std::abs(dev) > 3 * se;
      worst = std::max(worst, std::abs(dev) / se);
    }
  }
  // 512 components at 3 sigma: about 1.4 expected outside.
  CHECK(outside3 <= 6);
  CHECK(worst < 5);

  // Variance of |psi - alpha|^2 around s is s^2 per sample.
  const double var_se = s / std::sqrt(n);
  int var_outside = 0;
  for (Index j = 0; j < g.M; ++j) var_outside += std::abs(sq(j) / n - s) > 3 * var_se;
  CHECK(var_outside <= 6);

  // Number estimator and Poissonian fluctuations. The Wigner number variance
  // exceeds the quantum one by the symmetric-ordering term M/4.
  const double n_est = number.mean() - static_cast<double>(g.M) / 2;
  CHECK(std::abs(n_est - N) < 3 * number.sem());
  CHECK(std::abs(number.var() - N) / N < 0.1);
  CHECK(std::abs(number.var() - static_cast<double>(g.M) / 4 - N) / N < 0.05);
}

TEST_CASE("periodic grid noise has no Nyquist component") {
  const auto g = make_grid<double>(32, 20.0, GridMode::periodic);
  const ComplexVector<double> vac = ComplexVector<double>::Zero(32);
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto f = sample_wigner(vac, g, NoiseSpec{5, i});
    const auto spec = forward_spectral(f.values, g);
    CHECK(std::abs(spec(0)) < 1e-12 * spec.norm());
  }
}
