#include "berglab/random_sections.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include <boost/multiprecision/cpp_int.hpp>

#include "berglab/parallel.hpp"

namespace berglab {

namespace {
constexpr double kPi = std::numbers::pi;
}

// ---------------------------------------------------------------- RngStream

namespace {

std::uint64_t splitmix(std::uint64_t& s) {
  s += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t p, std::uint64_t index) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix(s);
  s = a ^ (p * 0xD6E8FEB86659FD93ULL);
  a = splitmix(s);
  s = a ^ (index * 0xCA5A826395121157ULL);
  state_ = splitmix(s);
}

std::uint64_t RngStream::next_u64() { return splitmix(state_); }

double RngStream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double th = 2.0 * kPi * u2;
  spare_ = r * std::sin(th);
  have_spare_ = true;
  return r * std::cos(th);
}

Complex RngStream::complex_gaussian() {
  double x = gaussian();
  double y = gaussian();
  return Complex(x, y) / std::sqrt(2.0);
}

SectionSample sample_section(const OrthonormalBasis& onb, RngStream& rng) {
  int d = onb.dimension();
  SectionSample s;
  s.coefficients.resize(d);
  for (int j = 0; j < d; ++j) s.coefficients[j] = rng.complex_gaussian();
  double nrm = s.coefficients.norm();
  if (!(nrm > 0.0)) throw ZeroSection("sample_section: zero draw");
  s.coefficients /= nrm;
  return s;
}

// -------------------------------------------------------------- polynomial roots

namespace {

// Horner value and derivative of sum c_k z^k.
void horner(const Cvec& c, Complex z, Complex& f, Complex& df) {
  f = Complex(0.0);
  df = Complex(0.0);
  for (int k = static_cast<int>(c.size()) - 1; k >= 0; --k) {
    df = df * z + f;
    f = f * z + c[k];
  }
}

Complex newton_polish(const Cvec& c, Complex z) {
  for (int it = 0; it < 40; ++it) {
    Complex f, df;
    horner(c, z, f, df);
    if (std::abs(df) < 1e-300) break;
    Complex step = f / df;
    z -= step;
    if (std::abs(step) < 1e-14 * std::max(1.0, std::abs(z))) break;
  }
  return z;
}

// Parlett-Reinsch balancing by powers of two; eigenvalues unchanged.
void balance(Cmat& A) {
  const double radix = 2.0;
  int n = static_cast<int>(A.rows());
  bool done = false;
  while (!done) {
    done = true;
    for (int i = 0; i < n; ++i) {
      double r = 0.0, col = 0.0;
      for (int j = 0; j < n; ++j)
        if (j != i) {
          r += std::abs(A(i, j));
          col += std::abs(A(j, i));
        }
      if (r == 0.0 || col == 0.0) continue;
      double f = 1.0;
      double s = col + r;
      while (col < r / radix) {
        col *= radix;
        r /= radix;
        f *= radix;
      }
      while (col >= r * radix) {
        col /= radix;
        r *= radix;
        f /= radix;
      }
      if ((col + r) < 0.95 * s && f != 1.0) {
        done = false;
        A.row(i) /= f;
        A.col(i) *= f;
      }
    }
  }
}

std::vector<Complex> companion_roots(const Cvec& c) {
  int n = static_cast<int>(c.size()) - 1;  // exact degree, c[n] != 0
  if (n == 0) return {};
  if (n == 1) return {-c[0] / c[1]};
  Cmat A = Cmat::Zero(n, n);
  for (int k = 0; k < n; ++k) A(k, n - 1) = -c[k] / c[n];
  for (int k = 1; k < n; ++k) A(k, k - 1) = 1.0;
  balance(A);
  Eigen::ComplexEigenSolver<Cmat> es(A, false);
  std::vector<Complex> roots(n);
  for (int k = 0; k < n; ++k) roots[k] = es.eigenvalues()[k];
  return roots;
}

// Homogeneous representative [a0 : a1] with point = a1/a0 in chart 0.
std::pair<Complex, Complex> homog(const ChartPoint& x) {
  if (x.chart_id == 0) return {Complex(1.0), x.coords[0]};
  return {x.coords[0], Complex(1.0)};
}

double chordal(const ChartPoint& x, const ChartPoint& y) {
  auto [a0, a1] = homog(x);
  auto [b0, b1] = homog(y);
  double na = std::sqrt(std::norm(a0) + std::norm(a1));
  double nb = std::sqrt(std::norm(b0) + std::norm(b1));
  return std::abs(a0 * b1 - a1 * b0) / (na * nb);
}

ChartPoint root_point(Complex z) {
  if (std::abs(z) <= 1.0) return ChartPoint::p1(z);
  ChartPoint x;
  x.chart_id = 1;
  x.coords = {1.0 / z};
  return x;
}

void add_clustered(ZeroSet& zs, const ChartPoint& pt, int mult, double tol) {
  for (std::size_t i = 0; i < zs.points.size(); ++i)
    if (chordal(zs.points[i], pt) < tol) {
      zs.multiplicities[i] += mult;
      return;
    }
  zs.points.push_back(pt);
  zs.multiplicities.push_back(mult);
}

}  // namespace

ZeroSet monomial_zeros(const Cvec& b) {
  int d = static_cast<int>(b.size()) - 1;
  double scale = b.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw ZeroSection("monomial_zeros: zero polynomial");
  int top = d;
  while (top > 0 && b[top] == Complex(0.0)) --top;
  int bot = 0;
  while (bot < top && b[bot] == Complex(0.0)) ++bot;
  ZeroSet zs;
  zs.expected_total = d;
  if (d - top > 0) {
    ChartPoint inf;
    inf.chart_id = 1;
    inf.coords = {Complex(0.0)};
    zs.points.push_back(inf);
    zs.multiplicities.push_back(d - top);
  }
  if (bot > 0) add_clustered(zs, ChartPoint::p1(Complex(0.0)), bot, 1e-8);
  int n = top - bot;
  if (n > 0) {
    Cvec c = b.segment(bot, n + 1);
    Cvec crev(n + 1);
    for (int k = 0; k <= n; ++k) crev[k] = c[n - k];
    for (Complex z : companion_roots(c)) {
      // polish in whichever chart keeps the iterate bounded
      if (std::abs(z) <= 1.0) {
        z = newton_polish(c, z);
      } else {
        Complex w = newton_polish(crev, 1.0 / z);
        z = w == Complex(0.0) ? Complex(1e300) : 1.0 / w;
      }
      add_clustered(zs, root_point(z), 1, 1e-8);
    }
  }
  return zs;
}

namespace {

// Monomial coefficients of sum_j c_j S_j for a projective-line basis.
Cvec monomial_coeffs_cp1(const OrthonormalBasis& onb, const Cvec& coeffs) {
  const SectionBasis& basis = onb.basis();
  Cvec t = onb.transform() * coeffs;
  Cvec b(t.size());
  for (int k = 0; k < t.size(); ++k)
    b[k] = t[k] * std::exp(basis.log_normalization(k));
  return b;
}

}  // namespace

ZeroSet zeros_cp1(const OrthonormalBasis& onb, const SectionSample& sample) {
  if (onb.basis().bundle().model().kind() != ModelKind::ProjectiveLine)
    throw InvalidParams("zeros_cp1: projective-line sections only");
  return monomial_zeros(monomial_coeffs_cp1(onb, sample.coefficients));
}

// ------------------------------------------------- exact bivariate resultant

namespace {

using BigRat = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

BigRat rat_from_double(double x) {
  if (x == 0.0) return BigRat(0);
  int e = 0;
  double m = std::frexp(x, &e);  // x = m * 2^e, |m| in [0.5, 1)
  long long im = std::llround(m * 9007199254740992.0);  // m * 2^53
  BigRat r(im);
  e -= 53;
  if (e > 0)
    r *= BigRat(BigInt(1) << e);
  else if (e < 0)
    r /= BigRat(BigInt(1) << (-e));
  return r;
}

struct CRat {
  BigRat re, im;
  CRat() = default;
  CRat(BigRat r, BigRat i) : re(std::move(r)), im(std::move(i)) {}
  explicit CRat(long v) : re(v), im(0) {}
  bool is_zero() const { return re == 0 && im == 0; }
};

CRat operator+(const CRat& a, const CRat& b) { return {a.re + b.re, a.im + b.im}; }
CRat operator-(const CRat& a, const CRat& b) { return {a.re - b.re, a.im - b.im}; }
CRat operator*(const CRat& a, const CRat& b) {
  return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}
CRat operator/(const CRat& a, const CRat& b) {
  BigRat n = b.re * b.re + b.im * b.im;
  return {(a.re * b.re + a.im * b.im) / n, (a.im * b.re - a.re * b.im) / n};
}

CRat crat_from_complex(Complex z) {
  return {rat_from_double(z.real()), rat_from_double(z.imag())};
}

// Exact determinant over Q(i) by Gaussian elimination.
CRat exact_det(std::vector<std::vector<CRat>> A) {
  int n = static_cast<int>(A.size());
  CRat det(1);
  for (int k = 0; k < n; ++k) {
    int piv = -1;
    for (int i = k; i < n; ++i)
      if (!A[i][k].is_zero()) {
        piv = i;
        break;
      }
    if (piv < 0) return CRat(0);
    if (piv != k) {
      std::swap(A[piv], A[k]);
      det = CRat(-1) * det;
    }
    det = det * A[k][k];
    for (int i = k + 1; i < n; ++i) {
      if (A[i][k].is_zero()) continue;
      CRat f = A[i][k] / A[k][k];
      for (int j = k; j < n; ++j) A[i][j] = A[i][j] - f * A[k][j];
    }
  }
  return det;
}

// Sylvester resultant in w of two bidegree-(dz, dw) coefficient matrices
// B(j,k) = coeff of z^j w^k, evaluated at integer z-nodes and recovered by
// exact Newton interpolation. Result is the list of resultant coefficients
// (ascending in z), exact.
std::vector<CRat> resultant_in_w(const std::vector<std::vector<CRat>>& B1,
                                 const std::vector<std::vector<CRat>>& B2,
                                 int dz, int dw) {
  int deg = 2 * dz * dw;
  int npts = deg + 1;
  std::vector<CRat> nodes(npts), vals(npts);
  for (int t = 0; t < npts; ++t) {
    long zt = t - deg / 2 - (deg % 2);
    nodes[t] = CRat(zt);
    // evaluate the two w-polynomials at z = zt
    auto eval = [&](const std::vector<std::vector<CRat>>& B) {
      std::vector<CRat> c(dw + 1, CRat(0));
      for (int k = 0; k <= dw; ++k) {
        CRat acc(0);
        for (int j = dz; j >= 0; --j) acc = acc * nodes[t] + B[j][k];
        c[k] = acc;
      }
      return c;
    };
    std::vector<CRat> p = eval(B1), q = eval(B2);
    int n2 = 2 * dw;
    std::vector<std::vector<CRat>> S(n2, std::vector<CRat>(n2, CRat(0)));
    for (int r = 0; r < dw; ++r)
      for (int k = 0; k <= dw; ++k) S[r][r + k] = p[dw - k];
    for (int r = 0; r < dw; ++r)
      for (int k = 0; k <= dw; ++k) S[dw + r][r + k] = q[dw - k];
    vals[t] = exact_det(S);
  }
  // Newton divided differences, then expansion to monomial coefficients.
  std::vector<CRat> dd = vals;
  for (int lev = 1; lev < npts; ++lev)
    for (int i = npts - 1; i >= lev; --i)
      dd[i] = (dd[i] - dd[i - 1]) / (nodes[i] - nodes[i - lev]);
  std::vector<CRat> coeffs(npts, CRat(0));
  std::vector<CRat> base(1, CRat(1));  // product of (z - node_j)
  for (int lev = 0; lev < npts; ++lev) {
    for (std::size_t j = 0; j < base.size(); ++j)
      coeffs[j] = coeffs[j] + dd[lev] * base[j];
    if (lev + 1 < npts) {
      base.push_back(CRat(0));
      for (int j = static_cast<int>(base.size()) - 1; j >= 1; --j)
        base[j] = base[j - 1] - nodes[lev] * base[j];
      base[0] = CRat(0) - nodes[lev] * base[0];
    }
  }
  return coeffs;
}

double rat_log2(const BigRat& r) {
  if (r == 0) return -1e300;
  BigInt n = boost::multiprecision::numerator(r);
  BigInt d = boost::multiprecision::denominator(r);
  if (n < 0) n = -n;
  return static_cast<double>(boost::multiprecision::msb(n)) -
         static_cast<double>(boost::multiprecision::msb(d));
}

// Convert the exact coefficient list to doubles after a common power-of-two
// rescale, so huge exact values do not overflow.
Cvec crat_poly_to_double(const std::vector<CRat>& c) {
  double top = -1e300;
  for (const CRat& v : c)
    top = std::max({top, rat_log2(v.re), rat_log2(v.im)});
  long shift = top <= -1e299 ? 0 : std::lround(top);
  BigRat pw(1);
  if (shift > 0)
    pw = BigRat(BigInt(1) << shift);
  else if (shift < 0)
    pw = BigRat(1) / BigRat(BigInt(1) << (-shift));
  Cvec out(c.size());
  for (std::size_t j = 0; j < c.size(); ++j)
    out[j] = Complex((c[j].re / pw).convert_to<double>(),
                     (c[j].im / pw).convert_to<double>());
  return out;
}

struct BiPoly {
  int dz = 0, dw = 0;
  Cmat B;  // B(j,k) = coeff of z^j w^k
  Complex eval(Complex z, Complex w) const {
    Complex acc(0.0);
    for (int j = dz; j >= 0; --j) {
      Complex row(0.0);
      for (int k = dw; k >= 0; --k) row = row * w + B(j, k);
      acc = acc * z + row;
    }
    return acc;
  }
  Complex dz_eval(Complex z, Complex w) const {
    Complex acc(0.0);
    for (int j = dz; j >= 1; --j) {
      Complex row(0.0);
      for (int k = dw; k >= 0; --k) row = row * w + B(j, k);
      acc = acc * z + static_cast<double>(j) * row;
    }
    return acc;
  }
  Complex dw_eval(Complex z, Complex w) const {
    Complex acc(0.0);
    for (int j = dz; j >= 0; --j) {
      Complex row(0.0);
      for (int k = dw; k >= 1; --k) row = row * w + static_cast<double>(k) * B(j, k);
      acc = acc * z + row;
    }
    return acc;
  }
  Cvec w_poly_at(Complex z) const {
    Cvec c(dw + 1);
    for (int k = 0; k <= dw; ++k) {
      Complex acc(0.0);
      for (int j = dz; j >= 0; --j) acc = acc * z + B(j, k);
      c[k] = acc;
    }
    return c;
  }
};

BiPoly bipoly_from_section(const OrthonormalBasis& onb, const Cvec& coeffs) {
  const SectionBasis& basis = onb.basis();
  const auto& degs = basis.bundle().degrees();
  BiPoly P;
  P.dz = degs[0];
  P.dw = degs[1];
  Cvec t = onb.transform() * coeffs;
  P.B = Cmat::Zero(P.dz + 1, P.dw + 1);
  for (int j = 0; j <= P.dz; ++j)
    for (int k = 0; k <= P.dw; ++k) {
      int idx = j * (P.dw + 1) + k;
      P.B(j, k) = t[idx] * std::exp(basis.log_normalization(idx));
    }
  return P;
}

void newton2d(const BiPoly& s1, const BiPoly& s2, Complex& z, Complex& w) {
  for (int it = 0; it < 30; ++it) {
    Complex f1 = s1.eval(z, w), f2 = s2.eval(z, w);
    Complex a = s1.dz_eval(z, w), b = s1.dw_eval(z, w);
    Complex c = s2.dz_eval(z, w), d = s2.dw_eval(z, w);
    Complex det = a * d - b * c;
    if (std::abs(det) < 1e-300) break;
    Complex sz = (d * f1 - b * f2) / det;
    Complex sw = (a * f2 - c * f1) / det;
    z -= sz;
    w -= sw;
    if (std::abs(sz) + std::abs(sw) <
        1e-14 * std::max(1.0, std::abs(z) + std::abs(w)))
      break;
  }
}

ChartPoint product_point(Complex z, Complex w) {
  int c0 = std::abs(z) <= 1.0 ? 0 : 1;
  int c1 = std::abs(w) <= 1.0 ? 0 : 1;
  ChartPoint x;
  x.chart_id = 2 * c0 + c1;
  x.coords = {c0 == 0 ? z : 1.0 / z, c1 == 0 ? w : 1.0 / w};
  return x;
}

}  // namespace

ZeroSet common_zeros_p1xp1(const OrthonormalBasis& onb, const Cvec& coeffs1,
                           const Cvec& coeffs2) {
  const KahlerModel& model = onb.basis().bundle().model();
  if (model.kind() != ModelKind::ProjectiveProduct)
    throw InvalidParams("common_zeros_p1xp1: product sections only");
  BiPoly s1 = bipoly_from_section(onb, coeffs1);
  BiPoly s2 = bipoly_from_section(onb, coeffs2);
  int dz = s1.dz, dw = s1.dw;
  // normalize scale before the exact conversion so rationals stay modest
  double n1 = s1.B.cwiseAbs().maxCoeff(), n2 = s2.B.cwiseAbs().maxCoeff();
  if (!(n1 > 0.0) || !(n2 > 0.0))
    throw ZeroSection("common_zeros_p1xp1: zero section");
  std::vector<std::vector<CRat>> B1(dz + 1, std::vector<CRat>(dw + 1)),
      B2(dz + 1, std::vector<CRat>(dw + 1));
  for (int j = 0; j <= dz; ++j)
    for (int k = 0; k <= dw; ++k) {
      B1[j][k] = crat_from_complex(s1.B(j, k) / n1);
      B2[j][k] = crat_from_complex(s2.B(j, k) / n2);
    }
  std::vector<CRat> res = resultant_in_w(B1, B2, dz, dw);
  bool all_zero = true;
  for (const CRat& c : res)
    if (!c.is_zero()) {
      all_zero = false;
      break;
    }
  if (all_zero)
    throw DegeneratePair("common_zeros_p1xp1: resultant vanishes identically");
  ZeroSet zroots = monomial_zeros(crat_poly_to_double(res));
  ZeroSet out;
  out.expected_total = 2 * dz * dw;
  double tol = 1e-8;
  for (std::size_t i = 0; i < zroots.points.size(); ++i) {
    const ChartPoint& zp = zroots.points[i];
    int mult = zroots.multiplicities[i];
    if (zp.chart_id == 1 && zp.coords[0] == Complex(0.0)) {
      // resultant degree drop: common mass on the z = infinity line
      ChartPoint x;
      x.chart_id = 2;
      x.coords = {Complex(0.0), Complex(0.0)};
      out.points.push_back(x);
      out.multiplicities.push_back(mult);
      continue;
    }
    Complex z = zp.chart_id == 0 ? zp.coords[0] : 1.0 / zp.coords[0];
    // candidate w values: roots of s1(z, .), pick the best against s2
    Cvec wp = s1.w_poly_at(z);
    double wscale = wp.cwiseAbs().maxCoeff();
    Complex best_w(0.0);
    double best = 1e300;
    if (wscale > 1e-13 * n1) {
      ZeroSet wroots = monomial_zeros(wp);
      for (std::size_t k = 0; k < wroots.points.size(); ++k) {
        const ChartPoint& wq = wroots.points[k];
        if (wq.chart_id == 1 && wq.coords[0] == Complex(0.0)) continue;
        Complex w = wq.chart_id == 0 ? wq.coords[0] : 1.0 / wq.coords[0];
        double score = std::abs(s2.eval(z, w)) / n2;
        if (score < best) {
          best = score;
          best_w = w;
        }
      }
    } else {
      // s1(z, .) degenerates; fall back to s2's roots
      ZeroSet wroots = monomial_zeros(s2.w_poly_at(z));
      for (std::size_t k = 0; k < wroots.points.size(); ++k) {
        const ChartPoint& wq = wroots.points[k];
        if (wq.chart_id == 1 && wq.coords[0] == Complex(0.0)) continue;
        Complex w = wq.chart_id == 0 ? wq.coords[0] : 1.0 / wq.coords[0];
        double score = std::abs(s1.eval(z, w)) / n1;
        if (score < best) {
          best = score;
          best_w = w;
        }
      }
    }
    Complex w = best_w;
    newton2d(s1, s2, z, w);
    // cluster in the product chordal metric
    ChartPoint pt = product_point(z, w);
    bool merged = false;
    for (std::size_t k = 0; k < out.points.size(); ++k) {
      ChartPoint pa, pb;
      pa.chart_id = out.points[k].chart_id / 2;
      pa.coords = {out.points[k].coords[0]};
      pb.chart_id = pt.chart_id / 2;
      pb.coords = {pt.coords[0]};
      ChartPoint qa, qb;
      qa.chart_id = out.points[k].chart_id % 2;
      qa.coords = {out.points[k].coords[1]};
      qb.chart_id = pt.chart_id % 2;
      qb.coords = {pt.coords[1]};
      if (chordal(pa, pb) < tol && chordal(qa, qb) < tol) {
        out.multiplicities[k] += mult;
        merged = true;
        break;
      }
    }
    if (!merged) {
      out.points.push_back(pt);
      out.multiplicities.push_back(mult);
    }
  }
  return out;
}

// --------------------------------------------------------------- test forms

namespace {

double p1_form_value(const std::string& id, int chart, Complex t) {
  double q = 1.0 + std::norm(t);
  if (id == "phi-one") return 1.0;
  if (id == "phi-cap-north")
    return chart == 0 ? 1.0 / (q * q) : std::norm(t) * std::norm(t) / (q * q);
  if (id == "phi-re-moment") return t.real() / q;  // same formula in both charts
  if (id == "phi-bump-eq") return std::norm(t) / (q * q);
  if (id == "phi-im-moment") return (chart == 0 ? 1.0 : -1.0) * t.imag() / q;
  throw InvalidParams("unknown test form id: " + id);
}

double torus_form_value(const std::string& id, Complex tau, Complex z) {
  double x2 = z.imag() / tau.imag();
  double x1 = z.real() - x2 * tau.real();
  if (id == "phi-one") return 1.0;
  if (id == "phi-cap-north") return std::cos(2.0 * kPi * x1);
  if (id == "phi-re-moment") return std::sin(2.0 * kPi * x1);
  if (id == "phi-bump-eq") return std::cos(2.0 * kPi * x2);
  if (id == "phi-im-moment") return std::sin(2.0 * kPi * (x1 + x2));
  throw InvalidParams("unknown test form id: " + id);
}

std::function<double(const ChartPoint&)> form_evaluator(const KahlerModel& model,
                                                        const std::string& id) {
  switch (model.kind()) {
    case ModelKind::ProjectiveLine:
      return [id](const ChartPoint& x) {
        return p1_form_value(id, x.chart_id, x.coords[0]);
      };
    case ModelKind::ProjectiveProduct:
      return [id](const ChartPoint& x) {
        return 0.5 * (p1_form_value(id, x.chart_id / 2, x.coords[0]) +
                      p1_form_value(id, x.chart_id % 2, x.coords[1]));
      };
    case ModelKind::FlatTorus: {
      Complex tau = model.tau();
      return [id, tau](const ChartPoint& x) {
        return torus_form_value(id, tau, x.coords[0]);
      };
    }
  }
  throw InvalidParams("form_evaluator: unknown model");
}

// Grid-measured sup of |phi| + |first derivs| + |second derivs| in chart
// coordinates, 1.05 margin. Deterministic layout.
double measure_c2(const KahlerModel& model,
                  const std::function<double(const ChartPoint&)>& phi) {
  const double h = 1e-3;
  double sup = 0.0;
  auto probe = [&](const ChartPoint& x0) {
    int n = model.complex_dim();
    auto at = [&](int coord, double dx, double dy) {
      ChartPoint x = x0;
      x.coords[coord] += Complex(dx, dy);
      return phi(x);
    };
    double f0 = phi(x0);
    double total = std::abs(f0);
    for (int c = 0; c < n; ++c) {
      double fx = (at(c, h, 0) - at(c, -h, 0)) / (2 * h);
      double fy = (at(c, 0, h) - at(c, 0, -h)) / (2 * h);
      double fxx = (at(c, h, 0) - 2 * f0 + at(c, -h, 0)) / (h * h);
      double fyy = (at(c, 0, h) - 2 * f0 + at(c, 0, -h)) / (h * h);
      ChartPoint xpp = x0, xpm = x0, xmp = x0, xmm = x0;
      xpp.coords[c] += Complex(h, h);
      xpm.coords[c] += Complex(h, -h);
      xmp.coords[c] += Complex(-h, h);
      xmm.coords[c] += Complex(-h, -h);
      double fxy = (phi(xpp) - phi(xpm) - phi(xmp) + phi(xmm)) / (4 * h * h);
      total += std::abs(fx) + std::abs(fy) + std::abs(fxx) + std::abs(fyy) +
               std::abs(fxy);
    }
    sup = std::max(sup, total);
  };
  const int g = 17;
  switch (model.kind()) {
    case ModelKind::ProjectiveLine:
      for (int chart = 0; chart < 2; ++chart)
        for (int i = 0; i < g; ++i)
          for (int j = 0; j < g; ++j) {
            ChartPoint x;
            x.chart_id = chart;
            x.coords = {Complex(-1.0 + 2.0 * i / (g - 1), -1.0 + 2.0 * j / (g - 1))};
            probe(x);
          }
      break;
    case ModelKind::ProjectiveProduct: {
      const int g2 = 7;
      for (int chart = 0; chart < 4; ++chart)
        for (int i = 0; i < g2; ++i)
          for (int j = 0; j < g2; ++j)
            for (int k = 0; k < g2; ++k)
              for (int l = 0; l < g2; ++l) {
                ChartPoint x;
                x.chart_id = chart;
                x.coords = {
                    Complex(-1.0 + 2.0 * i / (g2 - 1), -1.0 + 2.0 * j / (g2 - 1)),
                    Complex(-1.0 + 2.0 * k / (g2 - 1), -1.0 + 2.0 * l / (g2 - 1))};
                probe(x);
              }
      break;
    }
    case ModelKind::FlatTorus:
      for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
          ChartPoint x;
          x.chart_id = 0;
          x.coords = {static_cast<double>(i) / g +
                      model.tau() * (static_cast<double>(j) / g)};
          probe(x);
        }
      break;
  }
  return 1.05 * sup;
}

std::mutex catalog_mutex;

}  // namespace

std::vector<std::string> form_catalog_ids() {
  return {"phi-one", "phi-cap-north", "phi-re-moment", "phi-bump-eq",
          "phi-im-moment"};
}

const std::vector<TestForm>& form_catalog(const KahlerModel& model) {
  static std::map<std::string, std::vector<TestForm>> cache;
  std::string key = std::to_string(static_cast<int>(model.kind()));
  if (model.kind() == ModelKind::FlatTorus)
    key += "," + std::to_string(model.tau().real()) + "," +
           std::to_string(model.tau().imag());
  std::lock_guard<std::mutex> lock(catalog_mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<TestForm> forms;
  for (const std::string& id : form_catalog_ids()) {
    TestForm f;
    f.id = id;
    f.value = form_evaluator(model, id);
    f.c2_norm = measure_c2(model, f.value);
    forms.push_back(std::move(f));
  }
  return cache.emplace(key, std::move(forms)).first->second;
}

// ----------------------------------------------------------------- pairings

double wedge_pairing(const KahlerModel& model, const std::vector<TwoForm>& forms,
                     const std::function<double(const ChartPoint&)>& phi,
                     const QuadratureRule& rule) {
  int n = model.complex_dim();
  if (static_cast<int>(forms.size()) > n)
    throw InvalidParams("wedge_pairing: too many forms");
  std::vector<TwoForm> full = forms;
  while (static_cast<int>(full.size()) < n) full.push_back(model.reference_form());
  auto integrand = [&](const ChartPoint& x) -> Complex {
    double dens;
    if (n == 1) {
      dens = full[0].matrix(x)(0, 0).real();
    } else {
      Cmat A = full[0].matrix(x), B = full[1].matrix(x);
      dens = (A(0, 0) * B(1, 1) + A(1, 1) * B(0, 0) - A(0, 1) * B(1, 0) -
              A(1, 0) * B(0, 1))
                 .real();
    }
    return phi(x) * dens / model.volume_density(x);
  };
  return integrate(integrand, rule).real();
}

double pair_zero_current(const KahlerModel& model, const ZeroSet& zeros,
                         const TestForm& phi, double A, int m,
                         const TwoForm& omega, const QuadratureRule& rule) {
  double mass = 0.0;
  for (std::size_t i = 0; i < zeros.points.size(); ++i)
    mass += zeros.multiplicities[i] * phi.value(zeros.points[i]);
  mass /= std::pow(A, m);
  std::vector<TwoForm> forms(m, omega);
  return mass - wedge_pairing(model, forms, phi.value, rule);
}

double fs_current_pairing(const OrthonormalBasis& onb, int m,
                          const TestForm& phi, double A, const TwoForm& omega,
                          const QuadratureRule& rule) {
  const KahlerModel& model = onb.basis().bundle().model();
  TwoForm gamma_over_A(model.complex_dim(), [&onb, A](const ChartPoint& x) {
    return Cmat((fubini_study_current(onb, x) / A).eval());
  });
  std::vector<TwoForm> g(m, gamma_over_A), w(m, omega);
  return wedge_pairing(model, g, phi.value, rule) -
         wedge_pairing(model, w, phi.value, rule);
}

// ----------------------------------------------------------- combinatorics

double sampling_constant(int d_p, int m) {
  long d_pm = static_cast<long>(m) * (d_p - 1);
  if (d_pm <= 0) return 0.0;
  double lg = (static_cast<double>(m) / d_pm) * std::lgamma(d_p) -
              std::lgamma(d_pm + 1.0) / d_pm;
  return std::exp(lg);
}

CombinatoricsRecord combinatorics(const BundleSequence& seq, int p, int m) {
  const KahlerModel& model = seq.model();
  int n = model.complex_dim();
  if (p < 1 || m < 1 || m > n)
    throw InvalidParams("combinatorics: need p >= 1, 1 <= m <= n");
  HermitianLineBundle bundle = seq.bundle_at(p);
  CombinatoricsRecord rec;
  rec.d_p = dimension(bundle);
  rec.d_pm = static_cast<long>(m) * (rec.d_p - 1);
  rec.c_pm = sampling_constant(rec.d_p, m);
  QuadratureRule rule = model.default_rule(16);
  TwoForm c1 = bundle.chern_form();
  auto one = [](const ChartPoint&) { return 1.0; };
  std::vector<TwoForm> f1(m, c1);
  rec.delta1 = wedge_pairing(model, f1, one, rule);
  std::vector<TwoForm> f2(m - 1, c1);
  rec.delta2 = wedge_pairing(model, f2, one, rule) / rec.c_pm;
  return rec;
}

// --------------------------------------------------- Monte Carlo estimators

std::vector<DiscrepancyRecord> discrepancy_records(const BundleSequence& seq,
                                                   int p, int m, int N,
                                                   std::uint64_t seed) {
  const KahlerModel& model = seq.model();
  int n = model.complex_dim();
  if (!((n == 1 && m == 1) || (n == 2 && m == 2)))
    throw InvalidParams("discrepancy_records: m = n in {1, 2} only");
  HermitianLineBundle bundle = seq.bundle_at(p);
  OrthonormalBasis onb = orthonormal_basis(bundle);
  TwoForm omega = seq.omega();
  double A = seq.A(p);
  QuadratureRule rule = model.default_rule(12);
  const std::vector<TestForm>& catalog = form_catalog(model);
  // <omega^m, phi> is sample independent
  std::vector<double> base(catalog.size());
  for (std::size_t f = 0; f < catalog.size(); ++f) {
    std::vector<TwoForm> forms(m, omega);
    base[f] = wedge_pairing(model, forms, catalog[f].value, rule);
  }
  std::vector<std::vector<DiscrepancyRecord>> rows(N);
  parallel_for(static_cast<std::size_t>(N), [&](std::size_t i) {
    ZeroSet zeros;
    if (n == 1) {
      RngStream rng(seed, p, i);
      zeros = zeros_cp1(onb, sample_section(onb, rng));
    } else {
      // two sections per sample; retry on degenerate pairs with fresh indices
      std::uint64_t off = 0;
      for (;;) {
        RngStream r1(seed, p, 2 * i + off);
        RngStream r2(seed, p, 2 * i + 1 + off);
        try {
          zeros = common_zeros_p1xp1(onb, sample_section(onb, r1).coefficients,
                                     sample_section(onb, r2).coefficients);
          break;
        } catch (const DegeneratePair&) {
          off += 2ULL * static_cast<std::uint64_t>(N) + 1024;
        }
      }
    }
    for (std::size_t f = 0; f < catalog.size(); ++f) {
      DiscrepancyRecord rec;
      rec.p = p;
      rec.A = A;
      rec.m = m;
      rec.form_id = catalog[f].id;
      rec.seed = seed;
      rec.sample = i;
      double mass = 0.0;
      for (std::size_t k = 0; k < zeros.points.size(); ++k)
        mass += zeros.multiplicities[k] * catalog[f].value(zeros.points[k]);
      rec.value = mass / std::pow(A, m) - base[f];
      rows[i].push_back(std::move(rec));
    }
  });
  std::vector<DiscrepancyRecord> out;
  out.reserve(static_cast<std::size_t>(N) * catalog.size());
  for (auto& r : rows)
    for (auto& rec : r) out.push_back(std::move(rec));
  return out;
}

ExceptionalSetEstimate exceptional_fraction(const BundleSequence& seq, int p,
                                            int m, double eps, int N,
                                            std::uint64_t seed) {
  const KahlerModel& model = seq.model();
  int n = model.complex_dim();
  if (!((n == 1 && m == 1) || (n == 2 && m == 2)))
    throw InvalidParams("exceptional_fraction: m = n in {1, 2} only");
  if (N < 1) throw InvalidParams("exceptional_fraction: N >= 1");
  HermitianLineBundle bundle = seq.bundle_at(p);
  OrthonormalBasis onb = orthonormal_basis(bundle);
  double A = seq.A(p);
  QuadratureRule rule = model.default_rule(12);
  const std::vector<TestForm>& catalog = form_catalog(model);
  // <gamma_p^m, phi> (unnormalized) per catalog form, sample independent
  TwoForm gamma(model.complex_dim(), [&onb](const ChartPoint& x) {
    return Cmat(fubini_study_current(onb, x));
  });
  std::vector<double> base(catalog.size());
  for (std::size_t f = 0; f < catalog.size(); ++f) {
    std::vector<TwoForm> forms(m, gamma);
    base[f] = wedge_pairing(model, forms, catalog[f].value, rule);
  }
  double thresh = std::pow(A, m) * eps;
  std::vector<char> exceptional(N, 0);
  parallel_for(static_cast<std::size_t>(N), [&](std::size_t i) {
    ZeroSet zeros;
    if (n == 1) {
      RngStream rng(seed, p, i);
      zeros = zeros_cp1(onb, sample_section(onb, rng));
    } else {
      RngStream r1(seed, p, 2 * i);
      RngStream r2(seed, p, 2 * i + 1);
      zeros = common_zeros_p1xp1(onb, sample_section(onb, r1).coefficients,
                                 sample_section(onb, r2).coefficients);
    }
    for (std::size_t f = 0; f < catalog.size(); ++f) {
      double mass = 0.0;
      for (std::size_t k = 0; k < zeros.points.size(); ++k)
        mass += zeros.multiplicities[k] * catalog[f].value(zeros.points[k]);
      if (std::abs(mass - base[f]) / catalog[f].c2_norm >= thresh) {
        exceptional[i] = 1;
        break;
      }
    }
  });
  int count = 0;
  for (char e : exceptional) count += e;
  ExceptionalSetEstimate est;
  est.p = p;
  est.eps = eps;
  est.samples = N;
  est.fraction = static_cast<double>(count) / N;
  const double z = 1.959963984540054;
  double ph = est.fraction;
  double denom = 1.0 + z * z / N;
  double center = (ph + z * z / (2.0 * N)) / denom;
  double half =
      z / denom * std::sqrt(ph * (1.0 - ph) / N + z * z / (4.0 * N * N));
  est.wilson_lo = std::max(0.0, center - half);
  est.wilson_hi = std::min(1.0, center + half);
  return est;
}

}  // namespace berglab
