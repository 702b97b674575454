#include "berglab/bergman.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "berglab/parallel.hpp"

namespace berglab {

namespace {

constexpr double kPi = std::numbers::pi;

double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Normalized monomial powers c_j * t^j * (1+|t|^2)^{-d/2}, c_j^2 = (d+1)C(d,j).
// Every entry is bounded by sqrt(d+1), so no overflow at any degree.
void p1_scaled_powers(int d, Complex t, Cvec& vals, Cvec* ders) {
  vals.resize(d + 1);
  // Anchor the two-sided recurrence at the peak index; starting from j = 0
  // underflows to an all-zero vector once (1 - s)^{d/2} drops below DBL_MIN.
  double q = std::norm(t);
  double s = q / (1.0 + q);
  int jp = std::clamp(static_cast<int>(std::lround(d * s)), 0, d);
  double logmag = 0.5 * (std::log(d + 1.0) + std::lgamma(d + 1.0) -
                         std::lgamma(jp + 1.0) - std::lgamma(d - jp + 1.0)) -
                  0.5 * d * std::log1p(q);
  if (jp > 0) logmag += 0.5 * jp * std::log(q);
  vals[jp] = std::polar(std::exp(logmag), jp * std::arg(t));
  Complex u = vals[jp];
  for (int j = jp; j < d; ++j) {
    u *= t * std::sqrt((d - j) / (j + 1.0));
    vals[j + 1] = u;
  }
  u = vals[jp];
  for (int j = jp; j > 0; --j) {
    u /= t * std::sqrt((d - j + 1.0) / j);
    vals[j - 1] = u;
  }
  if (ders) {
    ders->resize(d + 1);
    (*ders)[0] = Complex(0.0);
    for (int j = 1; j <= d; ++j)
      (*ders)[j] =
          std::sqrt(static_cast<double>(j) * (d - j + 1)) * vals[j - 1];
  }
}

// Same sections seen in the flipped chart: f_j -> c_j w^{d-j} (c_{d-j} = c_j).
void p1_scaled_powers_flipped(int d, Complex w, Cvec& vals, Cvec* ders) {
  Cvec tv, td;
  p1_scaled_powers(d, w, tv, ders ? &td : nullptr);
  vals.resize(d + 1);
  if (ders) ders->resize(d + 1);
  for (int j = 0; j <= d; ++j) {
    vals[j] = tv[d - j];
    if (ders) (*ders)[j] = td[d - j];
  }
}

// Level-d theta basis on C/(Z + tau Z) with the Gaussian weight folded in.
// Normalized by the closed-form common norm (2 d Im tau)^{-1/4}.
void theta_values(int d, Complex tau, Complex z, Cvec& vals, Cvec* ders) {
  double imtau = tau.imag();
  double y = z.imag();
  double nrm = std::pow(2.0 * d * imtau, 0.25);
  int K = static_cast<int>(std::ceil(std::sqrt(43.0 / (kPi * d * imtau)))) + 2;
  vals.resize(d);
  if (ders) ders->resize(d);
  const Complex I(0.0, 1.0);
  for (int j = 0; j < d; ++j) {
    double cj = static_cast<double>(j) / d;
    long k0 = std::lround(-y / imtau - cj);
    Complex sum(0.0), dsum(0.0);
    for (long k = k0 - K; k <= k0 + K; ++k) {
      double q = static_cast<double>(k) + cj;
      Complex expo = I * kPi * tau * static_cast<double>(d) * q * q +
                     2.0 * kPi * I * static_cast<double>(d) * q * z;
      expo -= kPi * d * y * y / imtau;
      Complex term = std::exp(expo);
      sum += term;
      if (ders) dsum += term * (2.0 * kPi * I * static_cast<double>(d) * q);
    }
    vals[j] = nrm * sum;
    if (ders) (*ders)[j] = nrm * dsum;
  }
}

}  // namespace

SectionBasis::SectionBasis(HermitianLineBundle bundle) : bundle_(std::move(bundle)) {
  switch (bundle_.model().kind()) {
    case ModelKind::ProjectiveLine:
      dim_ = bundle_.degrees()[0] + 1;
      break;
    case ModelKind::ProjectiveProduct:
      dim_ = (bundle_.degrees()[0] + 1) * (bundle_.degrees()[1] + 1);
      break;
    case ModelKind::FlatTorus:
      dim_ = bundle_.degrees()[0];
      break;
  }
}

double SectionBasis::log_normalization(int j) const {
  switch (bundle_.model().kind()) {
    case ModelKind::ProjectiveLine: {
      int d = bundle_.degrees()[0];
      return 0.5 * (std::log(d + 1.0) + log_choose(d, j));
    }
    case ModelKind::ProjectiveProduct: {
      int d = bundle_.degrees()[0], e = bundle_.degrees()[1];
      int a = j / (e + 1), b = j % (e + 1);
      return 0.5 * (std::log(d + 1.0) + log_choose(d, a) + std::log(e + 1.0) +
                    log_choose(e, b));
    }
    case ModelKind::FlatTorus:
      return 0.25 * std::log(2.0 * bundle_.degrees()[0] *
                             bundle_.model().tau().imag());
  }
  return 0.0;
}

Cvec SectionBasis::weighted_values(const ChartPoint& x) const {
  Cvec v;
  std::vector<Cvec> unused;
  weighted_jet(x, v, unused);
  return v;
}

void SectionBasis::weighted_jet(const ChartPoint& x, Cvec& values,
                                std::vector<Cvec>& derivs) const {
  bool want = true;
  switch (bundle_.model().kind()) {
    case ModelKind::ProjectiveLine: {
      int d = bundle_.degrees()[0];
      derivs.resize(1);
      if (x.chart_id == 0)
        p1_scaled_powers(d, x.coords[0], values, want ? &derivs[0] : nullptr);
      else
        p1_scaled_powers_flipped(d, x.coords[0], values,
                                 want ? &derivs[0] : nullptr);
      break;
    }
    case ModelKind::ProjectiveProduct: {
      int d = bundle_.degrees()[0], e = bundle_.degrees()[1];
      int c0 = x.chart_id / 2, c1 = x.chart_id % 2;
      Cvec va, da, vb, db;
      if (c0 == 0)
        p1_scaled_powers(d, x.coords[0], va, &da);
      else
        p1_scaled_powers_flipped(d, x.coords[0], va, &da);
      if (c1 == 0)
        p1_scaled_powers(e, x.coords[1], vb, &db);
      else
        p1_scaled_powers_flipped(e, x.coords[1], vb, &db);
      values.resize(dim_);
      derivs.assign(2, Cvec(dim_));
      for (int a = 0; a <= d; ++a)
        for (int b = 0; b <= e; ++b) {
          int idx = a * (e + 1) + b;
          values[idx] = va[a] * vb[b];
          derivs[0][idx] = da[a] * vb[b];
          derivs[1][idx] = va[a] * db[b];
        }
      break;
    }
    case ModelKind::FlatTorus: {
      derivs.resize(1);
      theta_values(bundle_.degrees()[0], bundle_.model().tau(), x.coords[0],
                   values, &derivs[0]);
      break;
    }
  }
  double eps = bundle_.perturbation_scale();
  if (eps != 0.0) {
    double s = std::exp(-0.5 * eps * bundle_.psi_value(x));
    values *= s;
    for (auto& dv : derivs) dv *= s;
  }
}

SectionBasis raw_basis(const HermitianLineBundle& bundle) {
  return SectionBasis(bundle);
}

int dimension(const HermitianLineBundle& bundle) {
  return SectionBasis(bundle).dimension();
}

namespace {

Cmat assemble_gram(const SectionBasis& basis, const QuadratureRule& rule) {
  const HermitianLineBundle& bundle = basis.bundle();
  int dim = basis.dimension();
  bool radial = bundle.model().kind() == ModelKind::ProjectiveLine &&
                !rule.radial.empty();
  if (radial) {
    int d = bundle.degrees()[0];
    const auto& rad = rule.radial[0];
    int ns = static_cast<int>(rad.s.size());
    int nt = rad.ntheta;
    double eps = bundle.perturbation_scale();
    // E(i,j) = c_j s^{j/2} (1-s)^{(d-j)/2}, bounded by sqrt(d+1).
    Eigen::MatrixXd E(ns, dim);
    for (int i = 0; i < ns; ++i) {
      double ls = std::log(rad.s[i]), l1s = std::log1p(-rad.s[i]);
      for (int j = 0; j <= d; ++j)
        E(i, j) = std::exp(basis.log_normalization(j) + 0.5 * j * ls +
                           0.5 * (d - j) * l1s);
    }
    Cmat G = Cmat::Zero(dim, dim);
    if (eps == 0.0) {
      // Rotation-invariant weight: angular integral is exactly diagonal.
      for (int j = 0; j <= d; ++j) {
        double g = 0.0;
        for (int i = 0; i < ns; ++i) g += rad.ws[i] * E(i, j) * E(i, j);
        G(j, j) = g;
      }
      return G;
    }
    // A(i,m) = (1/nt) sum_t e^{i m theta_t} exp(-eps psi(z_{i,t})).
    const PsiFunction& psi = psi_catalog(bundle.model(), bundle.psi_id());
    Cmat A(ns, d + 1);
    parallel_for(static_cast<std::size_t>(ns), [&](std::size_t i) {
      double r = std::sqrt(rad.s[i] / (1.0 - rad.s[i]));
      std::vector<double> w(nt);
      for (int t = 0; t < nt; ++t) {
        double th = 2.0 * kPi * t / nt;
        Complex z(r * std::cos(th), r * std::sin(th));
        w[t] = std::exp(-eps * psi.value(ChartPoint::p1(z)));
      }
      for (int m = 0; m <= d; ++m) {
        Complex acc(0.0);
        for (int t = 0; t < nt; ++t) {
          double th = 2.0 * kPi * m * t / nt;
          acc += w[t] * Complex(std::cos(th), std::sin(th));
        }
        A(i, m) = acc / static_cast<double>(nt);
      }
    });
    parallel_for(static_cast<std::size_t>(dim), [&](std::size_t jj) {
      int j = static_cast<int>(jj);
      for (int k = 0; k <= j; ++k) {
        Complex g(0.0);
        for (int i = 0; i < ns; ++i)
          g += rad.ws[i] * E(i, j) * E(i, k) * A(i, j - k);
        G(j, k) = g;
        G(k, j) = std::conj(g);
      }
    });
    return G;
  }
  // Generic path: G = B^H B with rows sqrt(w_i) * weighted values.
  std::size_t nn = rule.nodes.size();
  Cmat B(nn, dim);
  parallel_for(nn, [&](std::size_t i) {
    Cvec v = basis.weighted_values(rule.nodes[i]);
    B.row(i) = std::sqrt(rule.weights[i]) * v.transpose();
  });
  return Cmat(B.adjoint() * B);
}

}  // namespace

GramMatrix gram_matrix(const SectionBasis& basis, const QuadratureRule& rule) {
  GramMatrix out;
  out.rule_degree = rule.declared_degree;
  bool perturbed = basis.bundle().perturbation_scale() != 0.0;
  Cmat G = assemble_gram(basis, rule);
  if (perturbed) {
    QuadratureRule fine =
        basis.bundle().model().default_rule(2 * rule.declared_degree + 4);
    Cmat Gf = assemble_gram(basis, fine);
    out.richardson_error = (Gf - G).cwiseAbs().maxCoeff();
    G = std::move(Gf);
  }
  out.G = std::move(G);
  Eigen::SelfAdjointEigenSolver<Cmat> es(out.G);
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  if (!(out.min_eigenvalue > 0.0))
    throw NotPositive("gram_matrix: Gram matrix not positive definite");
  out.condition = es.eigenvalues().maxCoeff() / out.min_eigenvalue;
  if (out.condition > 1e8)
    throw IllConditioned("gram_matrix: condition number above 1e8");
  return out;
}

OrthonormalBasis orthonormalize(const SectionBasis& basis, const GramMatrix& G) {
  int dim = static_cast<int>(G.G.rows());
  if (G.condition < 1e6) {
    Eigen::LLT<Cmat> llt(G.G);
    if (llt.info() != Eigen::Success)
      throw NotPositive("orthonormalize: Cholesky failed");
    Cmat T = Cmat(llt.matrixL())
                 .adjoint()
                 .triangularView<Eigen::Upper>()
                 .solve(Cmat::Identity(dim, dim));
    return OrthonormalBasis(basis, std::move(T), OrthonormalBasis::Method::Cholesky);
  }
  Eigen::SelfAdjointEigenSolver<Cmat> es(G.G);
  Cmat T = es.eigenvectors() *
           es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
           es.eigenvectors().adjoint();
  return OrthonormalBasis(basis, std::move(T), OrthonormalBasis::Method::Svd);
}

OrthonormalBasis orthonormal_basis(const HermitianLineBundle& bundle) {
  SectionBasis basis(bundle);
  QuadratureRule rule = bundle.model().default_rule(bundle.max_degree());
  GramMatrix G = gram_matrix(basis, rule);
  return orthonormalize(basis, G);
}

Cvec OrthonormalBasis::values(const ChartPoint& x) const {
  return T_.transpose() * basis_.weighted_values(x);
}

void OrthonormalBasis::jet(const ChartPoint& x, Cvec& values,
                           std::vector<Cvec>& derivs) const {
  Cvec v;
  std::vector<Cvec> dv;
  basis_.weighted_jet(x, v, dv);
  values = T_.transpose() * v;
  derivs.resize(dv.size());
  for (std::size_t a = 0; a < dv.size(); ++a) derivs[a] = T_.transpose() * dv[a];
}

double bergman_function(const OrthonormalBasis& onb, const ChartPoint& x) {
  return onb.values(x).squaredNorm();
}

double bergman_kernel2(const OrthonormalBasis& onb, const ChartPoint& x,
                       const ChartPoint& y) {
  Cvec rx = onb.values(x);
  Cvec ry = onb.values(y);
  return std::abs(ry.dot(rx));
}

Cmat fubini_study_current(const OrthonormalBasis& onb, const ChartPoint& x) {
  Cvec r;
  std::vector<Cvec> D;
  onb.jet(x, r, D);
  int n = static_cast<int>(D.size());
  double u = r.squaredNorm();
  Cmat H(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Complex cross = D[b].dot(D[a]);           // sum d_aS conj(d_bS)
      Complex ra = r.dot(D[a]);                 // sum d_aS conj(S)
      Complex rb = r.dot(D[b]);
      H(a, b) = (u * cross - ra * std::conj(rb)) / (kPi * u * u);
    }
  return H;
}

}  // namespace berglab
