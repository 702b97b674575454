#include "berglab/geometry.hpp"

#include <cmath>
#include <numbers>

#include "berglab/parallel.hpp"

namespace berglab {

namespace {
constexpr double kPi = std::numbers::pi;
}

namespace detail {

void gauss_legendre01(int n, std::vector<double>& x, std::vector<double>& w) {
  // Nodes on [-1,1] by Newton on P_n, then mapped to [0,1] with weight sum 1.
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double wi = 2.0 / ((1.0 - t * t) * dp * dp);
    x[i] = 0.5 * (1.0 - t);
    x[n - 1 - i] = 0.5 * (1.0 + t);
    w[i] = 0.5 * wi;
    w[n - 1 - i] = 0.5 * wi;
  }
}

}  // namespace detail

KahlerModel KahlerModel::projective_line() {
  KahlerModel m;
  m.kind_ = ModelKind::ProjectiveLine;
  m.n_ = 1;
  return m;
}

KahlerModel KahlerModel::projective_product() {
  KahlerModel m;
  m.kind_ = ModelKind::ProjectiveProduct;
  m.n_ = 2;
  return m;
}

KahlerModel KahlerModel::flat_torus(Complex tau) {
  if (!(tau.imag() > 0.0))
    throw InvalidParams("flat_torus: Im tau must be positive");
  KahlerModel m;
  m.kind_ = ModelKind::FlatTorus;
  m.n_ = 1;
  m.tau_ = tau;
  return m;
}

KahlerModel make_model(ModelKind kind, Complex tau) {
  switch (kind) {
    case ModelKind::ProjectiveLine:
      return KahlerModel::projective_line();
    case ModelKind::ProjectiveProduct:
      return KahlerModel::projective_product();
    case ModelKind::FlatTorus:
      return KahlerModel::flat_torus(tau);
  }
  throw InvalidParams("make_model: unknown kind");
}

namespace {

// Unit-area Fubini-Study density in either affine chart.
double fs_density(Complex z) {
  double q = 1.0 + std::norm(z);
  return 1.0 / (kPi * q * q);
}

}  // namespace

double KahlerModel::volume_density(const ChartPoint& x) const {
  switch (kind_) {
    case ModelKind::ProjectiveLine:
      return fs_density(x.coords[0]);
    case ModelKind::ProjectiveProduct:
      return fs_density(x.coords[0]) * fs_density(x.coords[1]);
    case ModelKind::FlatTorus:
      return 1.0 / tau_.imag();
  }
  return 0.0;
}

double KahlerModel::scalar_curvature(const ChartPoint&) const {
  // Constant-curvature reference metrics: the unit-area round sphere has
  // Gaussian curvature 4*pi, hence scalar curvature 8*pi.
  switch (kind_) {
    case ModelKind::ProjectiveLine:
      return 8.0 * kPi;
    case ModelKind::ProjectiveProduct:
      return 16.0 * kPi;
    case ModelKind::FlatTorus:
      return 0.0;
  }
  return 0.0;
}

TwoForm KahlerModel::reference_form() const {
  KahlerModel self = *this;
  return TwoForm(n_, [self](const ChartPoint& x) {
    int n = self.complex_dim();
    Cmat H = Cmat::Zero(n, n);
    switch (self.kind()) {
      case ModelKind::ProjectiveLine:
        H(0, 0) = fs_density(x.coords[0]);
        break;
      case ModelKind::ProjectiveProduct:
        H(0, 0) = fs_density(x.coords[0]);
        H(1, 1) = fs_density(x.coords[1]);
        break;
      case ModelKind::FlatTorus:
        H(0, 0) = 1.0 / self.tau().imag();
        break;
    }
    return H;
  });
}

namespace {

QuadratureRule p1_rule(int degree) {
  int ns = 2 * degree + 8;
  int ntheta = 2 * degree + 8;
  QuadratureRule rule;
  QuadratureRule::Radial rad;
  detail::gauss_legendre01(ns, rad.s, rad.ws);
  rad.ntheta = ntheta;
  rule.declared_degree = degree;
  rule.nodes.reserve(static_cast<std::size_t>(ns) * ntheta);
  rule.weights.reserve(static_cast<std::size_t>(ns) * ntheta);
  for (int i = 0; i < ns; ++i) {
    double s = rad.s[i];
    double r = std::sqrt(s / (1.0 - s));
    double w = rad.ws[i] / ntheta;
    for (int t = 0; t < ntheta; ++t) {
      double th = 2.0 * kPi * t / ntheta;
      rule.nodes.push_back(ChartPoint::p1(Complex(r * std::cos(th), r * std::sin(th))));
      rule.weights.push_back(w);
    }
  }
  rule.radial.push_back(std::move(rad));
  return rule;
}

QuadratureRule torus_rule(int degree, Complex tau) {
  int nn = 4 * degree + 16;
  QuadratureRule rule;
  rule.declared_degree = degree;
  double w = 1.0 / (static_cast<double>(nn) * nn);
  rule.nodes.reserve(static_cast<std::size_t>(nn) * nn);
  rule.weights.reserve(static_cast<std::size_t>(nn) * nn);
  for (int i = 0; i < nn; ++i) {
    double x1 = (i + 0.5) / nn;
    for (int j = 0; j < nn; ++j) {
      double x2 = (j + 0.5) / nn;
      Complex z = x1 + tau * x2;
      rule.nodes.push_back(ChartPoint::p1(z));
      rule.weights.push_back(w);
    }
  }
  return rule;
}

}  // namespace

QuadratureRule KahlerModel::default_rule(int degree) const {
  switch (kind_) {
    case ModelKind::ProjectiveLine:
      return p1_rule(degree);
    case ModelKind::FlatTorus:
      return torus_rule(degree, tau_);
    case ModelKind::ProjectiveProduct: {
      QuadratureRule f = p1_rule(degree);
      QuadratureRule rule;
      rule.declared_degree = degree;
      std::size_t nf = f.nodes.size();
      rule.nodes.reserve(nf * nf);
      rule.weights.reserve(nf * nf);
      for (std::size_t i = 0; i < nf; ++i)
        for (std::size_t j = 0; j < nf; ++j) {
          rule.nodes.push_back(ChartPoint::product(f.nodes[i].coords[0],
                                                   f.nodes[j].coords[0]));
          rule.weights.push_back(f.weights[i] * f.weights[j]);
        }
      rule.radial.push_back(f.radial[0]);
      rule.radial.push_back(f.radial[0]);
      return rule;
    }
  }
  return {};
}

Complex integrate(const std::function<Complex(const ChartPoint&)>& integrand,
                  const QuadratureRule& rule) {
  std::size_t n = rule.nodes.size();
  std::vector<Complex> terms(n);
  parallel_for(n, [&](std::size_t i) {
    terms[i] = rule.weights[i] * integrand(rule.nodes[i]);
  });
  for (const Complex& t : terms)
    if (!std::isfinite(t.real()) || !std::isfinite(t.imag()))
      throw NonFiniteIntegrand("integrate: non-finite integrand value");
  return pairwise_sum(std::span<const Complex>(terms));
}

std::vector<double> curvature_eigenvalues(const TwoForm& omega,
                                          const TwoForm& theta,
                                          const ChartPoint& x) {
  Cmat Ho = omega.matrix(x);
  Cmat Ht = theta.matrix(x);
  Eigen::LLT<Cmat> llt(Ht);
  if (llt.info() != Eigen::Success)
    throw NotPositive("curvature_eigenvalues: reference form not positive");
  Cmat L = llt.matrixL();
  Cmat B = L.triangularView<Eigen::Lower>().solve(Ho);
  B = L.triangularView<Eigen::Lower>().solve(B.adjoint().eval()).adjoint();
  Eigen::SelfAdjointEigenSolver<Cmat> es(B);
  std::vector<double> a;
  a.reserve(B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    double lam = es.eigenvalues()[j];
    if (!(lam > 0.0))
      throw NotPositive("curvature_eigenvalues: form not positive definite");
    a.push_back(2.0 * kPi * lam);
  }
  return a;
}

}  // namespace berglab
