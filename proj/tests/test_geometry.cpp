#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <berglab/geometry.hpp>

#include <cmath>
#include <complex>
#include <numbers>

using namespace berglab;

namespace {

constexpr double kPi = std::numbers::pi;

double real_integral(const std::function<double(const ChartPoint&)>& f,
                     const QuadratureRule& rule) {
  return integrate([&](const ChartPoint& x) { return Complex(f(x)); }, rule)
      .real();
}

// log of j!(p-j)!/(p+1)!, the FS monomial norm on the area-1 sphere.
double log_beta_norm(int p, int j) {
  return std::lgamma(j + 1.0) + std::lgamma(p - j + 1.0) -
         std::lgamma(p + 2.0);
}

}  // namespace

TEST_CASE("volume normalization for every model") {
  {
    KahlerModel m = KahlerModel::projective_line();
    QuadratureRule rule = m.default_rule(8);
    double total = 0.0;
    for (double w : rule.weights) {
      CHECK(w > 0.0);
      total += w;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(real_integral([](const ChartPoint&) { return 1.0; }, rule) ==
          doctest::Approx(1.0).epsilon(1e-10));
  }
  {
    KahlerModel m = KahlerModel::flat_torus(Complex(0.0, 1.0));
    QuadratureRule rule = m.default_rule(8);
    CHECK(real_integral([](const ChartPoint&) { return 1.0; }, rule) ==
          doctest::Approx(1.0).epsilon(1e-10));
  }
  {
    KahlerModel m = KahlerModel::projective_product();
    QuadratureRule rule = m.default_rule(8);
    // weights integrate theta^2/2!, so the total must again be 1
    CHECK(real_integral([](const ChartPoint&) { return 1.0; }, rule) ==
          doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("flat torus rejects non-positive Im tau") {
  CHECK_THROWS_AS(KahlerModel::flat_torus(Complex(1.0, 0.0)), InvalidParams);
  CHECK_THROWS_AS(KahlerModel::flat_torus(Complex(0.5, -2.0)), InvalidParams);
}

TEST_CASE("volume density closed forms") {
  KahlerModel m = KahlerModel::projective_line();
  CHECK(m.volume_density(ChartPoint::p1(0.0)) ==
        doctest::Approx(1.0 / kPi).epsilon(1e-14));
  CHECK(m.volume_density(ChartPoint::p1(1.0)) ==
        doctest::Approx(1.0 / (4.0 * kPi)).epsilon(1e-14));

  KahlerModel t = KahlerModel::flat_torus(Complex(0.0, 1.0));
  CHECK(t.volume_density({0, {Complex(0.3, 0.7)}}) ==
        doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("scalar curvature: sphere 8pi, torus 0, product 16pi") {
  KahlerModel m = KahlerModel::projective_line();
  // Gauss-Bonnet: area-1 round sphere has Gaussian curvature 4pi, scalar 8pi.
  double want = 8.0 * kPi;
  QuadratureRule grid = m.default_rule(10);
  int checked = 0;
  for (const ChartPoint& x : grid.nodes) {
    if (checked >= 100) break;
    CHECK(m.scalar_curvature(x) == doctest::Approx(want).epsilon(1e-8));
    ++checked;
  }
  KahlerModel t = KahlerModel::flat_torus(Complex(0.2, 1.5));
  CHECK(t.scalar_curvature({0, {Complex(0.1, 0.2)}}) ==
        doctest::Approx(0.0).epsilon(1e-12));

  KahlerModel pr = KahlerModel::projective_product();
  CHECK(pr.scalar_curvature(ChartPoint::product(Complex(0.3, 0.1),
                                                Complex(-0.2, 0.4))) ==
        doctest::Approx(16.0 * kPi).epsilon(1e-8));
}

TEST_CASE("integrate: closed-form integrands") {
  KahlerModel m = KahlerModel::projective_line();
  QuadratureRule rule = m.default_rule(8);
  // s = |z|^2/(1+|z|^2) is Beta(2,1)-distributed under FS area measure
  auto f = [](const ChartPoint& x) {
    double q = std::norm(x.coords[0]);
    double s = q / (1.0 + q);
    return x.chart_id == 0 ? s : 1.0 - s;
  };
  CHECK(real_integral(f, rule) == doctest::Approx(0.5).epsilon(1e-10));

  KahlerModel t = KahlerModel::flat_torus(Complex(0.0, 1.0));
  QuadratureRule trule = t.default_rule(8);
  Complex osc = integrate(
      [](const ChartPoint& x) {
        return std::exp(Complex(0.0, 2.0 * kPi * x.coords[0].real()));
      },
      trule);
  CHECK(std::abs(osc) < 1e-10);
}

TEST_CASE("integrate rejects non-finite values") {
  KahlerModel m = KahlerModel::projective_line();
  QuadratureRule rule = m.default_rule(4);
  CHECK_THROWS_AS(
      integrate([](const ChartPoint&) { return Complex(std::nan("")); }, rule),
      NonFiniteIntegrand);
}

TEST_CASE("quadrature exactness: Beta moments up to degree 60") {
  KahlerModel m = KahlerModel::projective_line();
  for (int p = 0; p <= 60; p += 6) {
    QuadratureRule rule = m.default_rule(p);
    for (int j = 0; j <= p; ++j) {
      auto f = [&](const ChartPoint& x) {
        double q = std::norm(x.coords[0]);
        double s = q / (1.0 + q);
        // |z|^{2j}(1+|z|^2)^{-p} = s^j (1-s)^{p-j}, same in either chart
        // with j <-> p-j
        int jj = x.chart_id == 0 ? j : p - j;
        return std::pow(s, jj) * std::pow(1.0 - s, p - jj);
      };
      double got = real_integral(f, rule);
      // under dv the variable s is uniform on [0,1], so this is a Beta integral
      double want = std::exp(log_beta_norm(p, j));
      CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("curvature eigenvalues") {
  KahlerModel m = KahlerModel::projective_line();
  TwoForm theta = m.reference_form();
  ChartPoint x = ChartPoint::p1(Complex(0.4, -0.3));

  auto eig = curvature_eigenvalues(theta, theta, x);
  REQUIRE(eig.size() == 1);
  CHECK(eig[0] == doctest::Approx(2.0 * kPi).epsilon(1e-12));

  auto eig2 = curvature_eigenvalues(theta.scaled(2.0), theta, x);
  CHECK(eig2[0] == doctest::Approx(4.0 * kPi).epsilon(1e-12));

  // r1 c1(F1) + r2 c1(F2) with both factors FS and r1 = r2 = 1
  TwoForm sum = TwoForm::sum(theta, theta);
  auto eig3 = curvature_eigenvalues(sum, theta, x);
  CHECK(eig3[0] == doctest::Approx(4.0 * kPi).epsilon(1e-12));

  KahlerModel pr = KahlerModel::projective_product();
  TwoForm pt = pr.reference_form();
  ChartPoint y = ChartPoint::product(Complex(0.2, 0.1), Complex(-0.5, 0.3));
  auto eig4 = curvature_eigenvalues(pt.scaled(2.0), pt, y);
  REQUIRE(eig4.size() == 2);
  CHECK(eig4[0] == doctest::Approx(4.0 * kPi).epsilon(1e-12));
  CHECK(eig4[1] == doctest::Approx(4.0 * kPi).epsilon(1e-12));

  CHECK_THROWS_AS(curvature_eigenvalues(theta.scaled(-1.0), theta, x),
                  NotPositive);
}

TEST_CASE("eigenvalue product equals determinant ratio") {
  KahlerModel pr = KahlerModel::projective_product();
  TwoForm theta = pr.reference_form();
  // a non-diagonal Kahler perturbation of the product form
  TwoForm omega(2, [&](const ChartPoint& x) {
    Cmat H = theta.matrix(x);
    Cmat B(2, 2);
    B << 0.3, Complex(0.1, 0.05), Complex(0.1, -0.05), 0.5;
    return Cmat(H + 0.2 * B * H.norm());
  });
  for (Complex z : {Complex(0.0, 0.0), Complex(0.7, -0.2), Complex(-1.3, 0.6)}) {
    ChartPoint x = ChartPoint::product(z, Complex(0.4, 0.4));
    auto eig = curvature_eigenvalues(omega, theta, x);
    double prod = 1.0;
    for (double a : eig) prod *= a / (2.0 * kPi);
    double want = (omega.matrix(x).determinant() /
                   theta.matrix(x).determinant())
                      .real();
    CHECK(prod == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("integration is bit-stable across thread counts") {
  KahlerModel m = KahlerModel::projective_line();
  QuadratureRule rule = m.default_rule(30);
  auto f = [](const ChartPoint& x) {
    double q = std::norm(x.coords[0]);
    return Complex(std::sin(3.0 * q / (1.0 + q)), std::cos(q / (1.0 + q)));
  };
  setenv("BERGMAN_LAB_THREADS", "1", 1);
  Complex v1 = integrate(f, rule);
  setenv("BERGMAN_LAB_THREADS", "8", 1);
  Complex v8 = integrate(f, rule);
  unsetenv("BERGMAN_LAB_THREADS");
  CHECK(v1.real() == v8.real());
  CHECK(v1.imag() == v8.imag());
}
