#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace berglab {

using Complex = std::complex<double>;
using Cvec = Eigen::VectorXcd;
using Cmat = Eigen::MatrixXcd;

struct InvalidParams : std::runtime_error {
  explicit InvalidParams(const std::string& m) : std::runtime_error(m) {}
};
struct NonFiniteIntegrand : std::runtime_error {
  explicit NonFiniteIntegrand(const std::string& m) : std::runtime_error(m) {}
};
struct NotPositive : std::runtime_error {
  explicit NotPositive(const std::string& m) : std::runtime_error(m) {}
};

/// A point of one of the model manifolds, given in a chart.
/// ProjectiveLine: chart 0 is z, chart 1 is w = 1/z.
/// ProjectiveProduct: chart_id = 2*c1 + c2 combines the factor charts.
/// FlatTorus: single chart 0, coordinate modulo the lattice Z + tau*Z.
struct ChartPoint {
  int chart_id = 0;
  std::vector<Complex> coords;

  static ChartPoint p1(Complex z, int chart = 0) { return {chart, {z}}; }
  static ChartPoint product(Complex z, Complex w, int chart = 0) {
    return {chart, {z, w}};
  }
};

enum class ModelKind { ProjectiveLine, ProjectiveProduct, FlatTorus };

/// Smooth (1,1)-form, stored through its Hermitian coefficient matrix H with
/// the convention  form = (i/2) * sum_jk H_jk dz_j ^ dzbar_k,
/// so that form^n / n! has density det H against chart Lebesgue measure.
class TwoForm {
 public:
  TwoForm() = default;
  TwoForm(int dim, std::function<Cmat(const ChartPoint&)> coeff)
      : dim_(dim), coeff_(std::move(coeff)) {}

  int dim() const { return dim_; }
  Cmat matrix(const ChartPoint& x) const { return coeff_(x); }

  TwoForm scaled(double c) const {
    auto f = coeff_;
    return TwoForm(dim_, [f, c](const ChartPoint& x) { return Cmat(c * f(x)); });
  }
  static TwoForm sum(const TwoForm& a, const TwoForm& b) {
    auto fa = a.coeff_, fb = b.coeff_;
    return TwoForm(a.dim_,
                   [fa, fb](const ChartPoint& x) { return Cmat(fa(x) + fb(x)); });
  }

 private:
  int dim_ = 0;
  std::function<Cmat(const ChartPoint&)> coeff_;
};

/// Nodes/weights realizing integration against dv_X = theta^n / n!.
/// The optional radial structure (ProjectiveLine rules) records the
/// s = |z|^2/(1+|z|^2) substitution used for fast Gram assembly.
struct QuadratureRule {
  std::vector<ChartPoint> nodes;
  std::vector<double> weights;
  int declared_degree = 0;

  struct Radial {
    std::vector<double> s;        // Gauss-Legendre nodes in (0,1)
    std::vector<double> ws;       // their weights, summing to 1
    int ntheta = 0;               // uniform angular nodes
  };
  std::vector<Radial> radial;     // one entry per factor when available
};

class KahlerModel {
 public:
  static KahlerModel projective_line();
  static KahlerModel projective_product();
  static KahlerModel flat_torus(Complex tau);

  ModelKind kind() const { return kind_; }
  int complex_dim() const { return n_; }
  Complex tau() const { return tau_; }

  /// Density of dv_X against chart Lebesgue measure.
  double volume_density(const ChartPoint& x) const;
  /// Scalar curvature of the metric of the reference form at x.
  double scalar_curvature(const ChartPoint& x) const;
  /// Reference Kahler form (unit total volume).
  TwoForm reference_form() const;
  /// Default rule sized for Gram integrands of bundle degree `degree`.
  QuadratureRule default_rule(int degree) const;

 private:
  ModelKind kind_;
  int n_;
  Complex tau_{0.0, 1.0};
};

KahlerModel make_model(ModelKind kind, Complex tau = Complex(0.0, 1.0));

/// Deterministic quadrature sum (pairwise reduction, parallel over nodes).
Complex integrate(const std::function<Complex(const ChartPoint&)>& integrand,
                  const QuadratureRule& rule);

/// Eigenvalues a_j = 2*pi * eig(H_omega, H_theta), ascending. Both forms must
/// be positive definite at x; then prod a_j / 2pi = omega^n / theta^n at x.
std::vector<double> curvature_eigenvalues(const TwoForm& omega,
                                          const TwoForm& theta,
                                          const ChartPoint& x);

namespace detail {
/// Gauss-Legendre nodes/weights on [0,1], weights summing to 1.
void gauss_legendre01(int n, std::vector<double>& x, std::vector<double>& w);
}  // namespace detail

}  // namespace berglab
