#include "berglab/bundles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace berglab {

namespace {

constexpr double kPi = std::numbers::pi;

// Lattice coordinates of z in the fundamental parallelogram basis {1, tau}.
void torus_coords(Complex z, Complex tau, double& x1, double& x2) {
  x2 = z.imag() / tau.imag();
  x1 = z.real() - tau.real() * x2;
}

PsiFunction make_p1_psi(const std::string& id) {
  PsiFunction psi;
  psi.id = id;
  if (id == "psi-zero") {
    psi.value = [](const ChartPoint&) { return 0.0; };
    psi.hessian = [](const ChartPoint&) { return Cmat::Zero(1, 1); };
  } else if (id == "psi-bump-1") {
    // -4/(5(1+|z|^2)): well at the origin with complex Hessian +0.8 there;
    // relative Hessian stays above -0.8, so curvature survives every p >= 1.
    psi.value = [](const ChartPoint& x) {
      double q = std::norm(x.coords[0]);
      return x.chart_id == 0 ? -0.8 / (1.0 + q) : -0.8 * q / (1.0 + q);
    };
    psi.hessian = [](const ChartPoint& x) {
      double q = std::norm(x.coords[0]);
      double c = 1.0 + q;
      double h = 0.8 * (x.chart_id == 0 ? (1.0 - q) : (q - 1.0)) / (c * c * c);
      Cmat H(1, 1);
      H(0, 0) = h;
      return H;
    };
  } else if (id == "psi-re-1") {
    // (1/2) Re z/(1+|z|^2)^2.
    psi.value = [](const ChartPoint& x) {
      Complex z = x.coords[0];
      double q = std::norm(z);
      double c = (1.0 + q) * (1.0 + q);
      return x.chart_id == 0 ? 0.5 * z.real() / c : 0.5 * z.real() * q / c;
    };
    psi.hessian = [](const ChartPoint& x) {
      Complex z = x.coords[0];
      double q = std::norm(z);
      double c4 = std::pow(1.0 + q, 4);
      double h = x.chart_id == 0 ? z.real() * (q - 2.0) / c4
                                 : z.real() * (1.0 - 2.0 * q) / c4;
      Cmat H(1, 1);
      H(0, 0) = h;
      return H;
    };
  } else {
    throw InvalidParams("unknown psi id: " + id);
  }
  return psi;
}

PsiFunction make_torus_psi(const std::string& id, Complex tau) {
  PsiFunction psi;
  psi.id = id;
  Complex alpha(0.5, 0.5 * tau.real() / tau.imag());
  double a2 = std::norm(alpha);
  double scale = 1.0 / (8.0 * kPi * a2 * tau.imag());
  if (id == "psi-zero") {
    psi.value = [](const ChartPoint&) { return 0.0; };
    psi.hessian = [](const ChartPoint&) { return Cmat::Zero(1, 1); };
  } else if (id == "psi-bump-1" || id == "psi-re-1") {
    bool use_cos = (id == "psi-bump-1");
    psi.value = [tau, scale, use_cos](const ChartPoint& x) {
      double x1, x2;
      torus_coords(x.coords[0], tau, x1, x2);
      return scale * (use_cos ? std::cos(2.0 * kPi * x1) : std::sin(2.0 * kPi * x1));
    };
    psi.hessian = [tau, scale, a2, use_cos](const ChartPoint& x) {
      double x1, x2;
      torus_coords(x.coords[0], tau, x1, x2);
      double d11 = -4.0 * kPi * kPi * scale *
                   (use_cos ? std::cos(2.0 * kPi * x1) : std::sin(2.0 * kPi * x1));
      Cmat H(1, 1);
      H(0, 0) = a2 * d11;
      return H;
    };
  } else {
    throw InvalidParams("unknown psi id: " + id);
  }
  return psi;
}

PsiFunction make_product_psi(const std::string& id) {
  PsiFunction psi;
  psi.id = id;
  PsiFunction base = make_p1_psi(id);
  psi.value = [base](const ChartPoint& x) {
    ChartPoint a{x.chart_id / 2, {x.coords[0]}};
    ChartPoint b{x.chart_id % 2, {x.coords[1]}};
    return base.value(a) + base.value(b);
  };
  psi.hessian = [base](const ChartPoint& x) {
    ChartPoint a{x.chart_id / 2, {x.coords[0]}};
    ChartPoint b{x.chart_id % 2, {x.coords[1]}};
    Cmat H = Cmat::Zero(2, 2);
    H(0, 0) = base.hessian(a)(0, 0);
    H(1, 1) = base.hessian(b)(0, 0);
    return H;
  };
  return psi;
}

}  // namespace

const PsiFunction& psi_catalog(const KahlerModel& model, const std::string& id) {
  static std::map<std::string, PsiFunction> cache;
  std::string key;
  switch (model.kind()) {
    case ModelKind::ProjectiveLine:
      key = "p1:" + id;
      break;
    case ModelKind::ProjectiveProduct:
      key = "pp:" + id;
      break;
    case ModelKind::FlatTorus:
      key = "t:" + std::to_string(model.tau().real()) + ":" +
            std::to_string(model.tau().imag()) + ":" + id;
      break;
  }
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  PsiFunction psi;
  switch (model.kind()) {
    case ModelKind::ProjectiveLine:
      psi = make_p1_psi(id);
      break;
    case ModelKind::ProjectiveProduct:
      psi = make_product_psi(id);
      break;
    case ModelKind::FlatTorus:
      psi = make_torus_psi(id, model.tau());
      break;
  }
  return cache.emplace(key, std::move(psi)).first->second;
}

std::vector<std::string> psi_catalog_ids() {
  return {"psi-zero", "psi-bump-1", "psi-re-1"};
}

HermitianLineBundle::HermitianLineBundle(KahlerModel model,
                                         std::vector<int> degrees,
                                         std::string psi_id, double eps)
    : model_(std::move(model)),
      degrees_(std::move(degrees)),
      psi_id_(std::move(psi_id)),
      eps_(eps) {
  std::size_t expect = model_.kind() == ModelKind::ProjectiveProduct ? 2 : 1;
  if (degrees_.size() != expect)
    throw InvalidParams("bundle degree data does not match model");
  for (int d : degrees_)
    if (d < 0) throw InvalidParams("bundle degree must be nonnegative");
  if (model_.kind() == ModelKind::FlatTorus && degrees_[0] < 1)
    throw InvalidParams("torus polarization multiple must be >= 1");
  if (eps_ != 0.0) check_positivity(model_.default_rule(8));
}

int HermitianLineBundle::max_degree() const {
  return *std::max_element(degrees_.begin(), degrees_.end());
}

double HermitianLineBundle::psi_value(const ChartPoint& x) const {
  if (eps_ == 0.0) return 0.0;
  return psi_catalog(model_, psi_id_).value(x);
}

double HermitianLineBundle::log_weight(const ChartPoint& x) const {
  double phi = 0.0;
  switch (model_.kind()) {
    case ModelKind::ProjectiveLine:
      phi = degrees_[0] * std::log1p(std::norm(x.coords[0]));
      break;
    case ModelKind::ProjectiveProduct:
      phi = degrees_[0] * std::log1p(std::norm(x.coords[0])) +
            degrees_[1] * std::log1p(std::norm(x.coords[1]));
      break;
    case ModelKind::FlatTorus: {
      double y = x.coords[0].imag();
      phi = 2.0 * kPi * degrees_[0] * y * y / model_.tau().imag();
      break;
    }
  }
  if (eps_ != 0.0) phi += eps_ * psi_catalog(model_, psi_id_).value(x);
  return -phi;
}

Cmat HermitianLineBundle::chern_curvature(const ChartPoint& x) const {
  int n = model_.complex_dim();
  Cmat H = Cmat::Zero(n, n);
  switch (model_.kind()) {
    case ModelKind::ProjectiveLine: {
      double q = 1.0 + std::norm(x.coords[0]);
      H(0, 0) = degrees_[0] / (kPi * q * q);
      break;
    }
    case ModelKind::ProjectiveProduct: {
      double q0 = 1.0 + std::norm(x.coords[0]);
      double q1 = 1.0 + std::norm(x.coords[1]);
      H(0, 0) = degrees_[0] / (kPi * q0 * q0);
      H(1, 1) = degrees_[1] / (kPi * q1 * q1);
      break;
    }
    case ModelKind::FlatTorus:
      H(0, 0) = degrees_[0] / model_.tau().imag();
      break;
  }
  if (eps_ != 0.0)
    H += (eps_ / kPi) * psi_catalog(model_, psi_id_).hessian(x);
  return H;
}

TwoForm HermitianLineBundle::chern_form() const {
  HermitianLineBundle self = *this;
  return TwoForm(model_.complex_dim(), [self](const ChartPoint& x) {
    return self.chern_curvature(x);
  });
}

void HermitianLineBundle::check_positivity(const QuadratureRule& grid) const {
  for (const ChartPoint& x : grid.nodes) {
    Eigen::SelfAdjointEigenSolver<Cmat> es(chern_curvature(x));
    if (!(es.eigenvalues().minCoeff() > 0.0))
      throw PositivityLost("curvature not positive at a grid node");
  }
}

namespace {

// Continued-fraction convergents (numerator, denominator) of r.
std::vector<std::pair<long, long>> convergents(double r, int depth) {
  std::vector<std::pair<long, long>> out;
  long h0 = 1, h1 = static_cast<long>(std::floor(r));
  long k0 = 0, k1 = 1;
  double x = r;
  out.emplace_back(h1, k1);
  for (int i = 1; i < depth; ++i) {
    double frac = x - std::floor(x);
    if (frac < 1e-12) break;  // rational within precision: CF terminates
    x = 1.0 / frac;
    long a = static_cast<long>(std::floor(x));
    long h2 = a * h1 + h0;
    long k2 = a * k1 + k0;
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
    out.emplace_back(h1, k1);
  }
  return out;
}

}  // namespace

RayApproximation diophantine_ray(const std::vector<double>& rays, int depth) {
  if (rays.empty() || depth < 1) throw NonPositiveRay("empty ray or depth < 1");
  for (double r : rays)
    if (!(r > 0.0)) throw NonPositiveRay("ray components must be positive");

  // Denominators come from the ray with the deepest continued fraction;
  // rational rays terminate early and would give too few convergents.
  std::vector<std::pair<long, long>> best;
  for (double r : rays) {
    auto cv = convergents(r, depth);
    if (cv.size() > best.size()) best = cv;
  }
  std::vector<long> denoms;
  for (const auto& [num, den] : best) denoms.push_back(den);
  // Rational rays: extend with multiples of the exact denominator.
  long last = denoms.back();
  while (static_cast<int>(denoms.size()) < depth)
    denoms.push_back(last + denoms.back());

  RayApproximation out;
  out.rays = rays;
  for (long p : denoms) {
    RayApproximation::Entry e;
    e.p = p;
    for (double r : rays) e.m.push_back(std::lround(r * p));
    double worst = 0.0;
    for (std::size_t j = 0; j < rays.size(); ++j)
      worst = std::max(worst, std::abs(static_cast<double>(e.m[j]) / p - rays[j]) *
                                  static_cast<double>(p) * p);
    out.bound = std::max(out.bound, worst);
    out.entries.push_back(std::move(e));
  }
  return out;
}

BundleSequence BundleSequence::power_ray(const KahlerModel& model) {
  BundleSequence s;
  s.kind_ = SequenceKind::PowerRay;
  s.model_ = model;
  s.a_ = std::numeric_limits<double>::infinity();
  s.omega_scale_ = 1.0;
  return s;
}

BundleSequence BundleSequence::perturbed_power(const KahlerModel& model,
                                               const std::string& psi_id,
                                               double a) {
  if (!(a > 0.0)) throw InvalidParams("perturbed_power: a must be positive");
  BundleSequence s;
  s.kind_ = SequenceKind::PerturbedPower;
  s.model_ = model;
  s.psi_id_ = psi_id;
  s.a_ = a;
  s.omega_scale_ = 1.0;
  return s;
}

BundleSequence BundleSequence::multi_ray(const KahlerModel& model,
                                         const std::vector<int>& factor_degrees,
                                         const RayApproximation& ray) {
  if (model.kind() != ModelKind::ProjectiveLine)
    throw InvalidParams("multi_ray implemented on ProjectiveLine");
  if (factor_degrees.size() != ray.rays.size())
    throw InvalidParams("multi_ray: one degree per ray component");
  if (factor_degrees.empty() || factor_degrees[0] < 1)
    throw InvalidParams("multi_ray: first factor must be strictly positive");
  BundleSequence s;
  s.kind_ = SequenceKind::MultiRay;
  s.model_ = model;
  s.a_ = 2.0;
  s.factor_degrees_ = factor_degrees;
  s.ray_ = ray;
  s.omega_scale_ = 0.0;
  for (std::size_t j = 0; j < ray.rays.size(); ++j)
    s.omega_scale_ += ray.rays[j] * factor_degrees[j];
  return s;
}

TwoForm BundleSequence::omega() const {
  return model_.reference_form().scaled(omega_scale_);
}

HermitianLineBundle BundleSequence::bundle_at(int p) const {
  if (p < 1) throw InvalidParams("bundle_at: p >= 1 required");
  switch (kind_) {
    case SequenceKind::PowerRay:
      if (model_.kind() == ModelKind::ProjectiveProduct)
        return HermitianLineBundle(model_, {p, p});
      return HermitianLineBundle(model_, {p});
    case SequenceKind::PerturbedPower: {
      double eps = std::pow(static_cast<double>(p), 1.0 - a_);
      if (model_.kind() == ModelKind::ProjectiveProduct)
        return HermitianLineBundle(model_, {p, p}, psi_id_, eps);
      return HermitianLineBundle(model_, {p}, psi_id_, eps);
    }
    case SequenceKind::MultiRay: {
      for (const auto& e : ray_.entries) {
        if (e.p == p) {
          long d = 0;
          for (std::size_t j = 0; j < e.m.size(); ++j)
            d += e.m[j] * factor_degrees_[j];
          return HermitianLineBundle(model_, {static_cast<int>(d)});
        }
      }
      throw InvalidParams("bundle_at: p not among ray denominators");
    }
  }
  throw InvalidParams("bundle_at: bad sequence");
}

double approximation_defect(const BundleSequence& seq, int p,
                            const QuadratureRule& grid) {
  if (grid.nodes.empty()) throw InvalidParams("approximation_defect: empty grid");
  HermitianLineBundle bundle = seq.bundle_at(p);
  TwoForm omega = seq.omega();
  TwoForm theta = seq.model().reference_form();
  double ap = seq.A(p);
  double worst = 0.0;
  for (const ChartPoint& x : grid.nodes) {
    Cmat D = bundle.chern_curvature(x) / ap - omega.matrix(x);
    Cmat Ht = theta.matrix(x);
    Eigen::LLT<Cmat> llt(Ht);
    Cmat L = llt.matrixL();
    Cmat B = L.triangularView<Eigen::Lower>().solve(D);
    B = L.triangularView<Eigen::Lower>().solve(B.adjoint().eval()).adjoint();
    Eigen::SelfAdjointEigenSolver<Cmat> es(B);
    worst = std::max(worst, es.eigenvalues().cwiseAbs().maxCoeff());
  }
  return worst;
}

double curvature_lower_bound(const HermitianLineBundle& bundle,
                             const QuadratureRule& grid) {
  if (grid.nodes.empty()) throw InvalidParams("curvature_lower_bound: empty grid");
  TwoForm theta = bundle.model().reference_form();
  TwoForm c1 = bundle.chern_form();
  double lo = std::numeric_limits<double>::infinity();
  for (const ChartPoint& x : grid.nodes)
    lo = std::min(lo, curvature_eigenvalues(c1, theta, x).front());
  return lo;
}

}  // namespace berglab
