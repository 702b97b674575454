// Acceptance gate: one line per criterion, exit code = number of failures.
// Tolerances are pinned here, not configurable.

#include <berglab/asymptotics.hpp>
#include <berglab/bergman.hpp>
#include <berglab/bundles.hpp>
#include <berglab/experiments.hpp>
#include <berglab/geometry.hpp>
#include <berglab/model_kernel.hpp>
#include <berglab/random_sections.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <map>
#include <numbers>
#include <string>
#include <vector>

using namespace berglab;

namespace {

constexpr double kPi = std::numbers::pi;

int failures = 0;

void report(int idx, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %02d %-28s %s\n", ok ? "PASS" : "FAIL", idx, name,
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double q90(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(std::floor(0.9 * (v.size() - 1)))];
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) {
    sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// squared Pearson correlation (regression with intercept)
double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  int n = static_cast<int>(x.size());
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
  mx /= n; my /= n;
  double cxy = 0, cxx = 0, cyy = 0;
  for (int i = 0; i < n; ++i) {
    cxy += (x[i] - mx) * (y[i] - my);
    cxx += (x[i] - mx) * (x[i] - mx);
    cyy += (y[i] - my) * (y[i] - my);
  }
  return cxy * cxy / (cxx * cyy);
}

// 1: constant Bergman function equal to the section count, under 30 s
void criterion_exact_baseline() {
  auto t0 = std::chrono::steady_clock::now();
  KahlerModel m = KahlerModel::projective_line();
  std::vector<ChartPoint> grid;
  for (int i = 0; i < 25; ++i) {
    double r = 0.12 * (i % 5 + 1), th = 2.0 * kPi * (i / 5) / 5.0;
    grid.push_back(ChartPoint::p1(std::polar(3.0 * r, th)));
    grid.push_back({1, {std::polar(3.0 * r, th + 0.31)}});
  }
  double worst = 0.0;
  for (int p = 1; p <= 40; ++p) {
    OrthonormalBasis onb = orthonormal_basis(HermitianLineBundle(m, {p}));
    double lo = 1e300, hi = -1e300;
    for (const ChartPoint& x : grid) {
      double v = bergman_function(onb, x);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    worst = std::max(worst, (hi - lo) / hi);
    worst = std::max(worst, std::abs(hi / (p + 1.0) - 1.0));
  }
  double secs = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0).count();
  report(1, "exact-kernel baseline", worst < 1e-8 && secs < 30.0,
         fmt("worst rel dev %.2e (tol 1e-8), %.1f s (limit 30)", worst, secs));
}

// 2: two-term expansion coefficients on sphere and torus
void criterion_expansion_coefficients() {
  auto fit_on = [](const KahlerModel& m, const ChartPoint& x0) {
    std::vector<ExpansionSample> s;
    for (int p : {10, 20, 30, 40, 60, 80}) {
      OrthonormalBasis onb = orthonormal_basis(HermitianLineBundle(m, {p}));
      s.push_back({p, static_cast<double>(p), bergman_function(onb, x0)});
    }
    return fit_expansion(s, 1);
  };
  ExpansionFit sph = fit_on(KahlerModel::projective_line(),
                            ChartPoint::p1(Complex(0.0, 0.0)));
  ExpansionFit tor = fit_on(KahlerModel::flat_torus(Complex(0.0, 1.0)),
                            {0, {Complex(0.37, 0.22)}});
  bool ok = std::abs(sph.coeffs[0] - 1.0) < 0.01 &&
            std::abs(sph.coeffs[1] - 1.0) < 0.05 &&
            std::abs(tor.coeffs[0] - 1.0) < 0.01 &&
            std::abs(tor.coeffs[1]) < 0.05;
  report(2, "expansion coefficients", ok,
         fmt("sphere b0=%.4f b1=%.4f (want 1,1), torus b0=%.4f b1=%.4f "
             "(want 1,0)",
             sph.coeffs[0], sph.coeffs[1], tor.coeffs[0], tor.coeffs[1]));
}

// 3: perturbation exponent shows up as the convergence rate
void criterion_perturbed_rate() {
  KahlerModel m = KahlerModel::projective_line();
  ChartPoint x0 = ChartPoint::p1(Complex(0.0, 0.0));
  auto slope_for = [&](double a) {
    BundleSequence seq = BundleSequence::perturbed_power(m, "psi-bump-1", a);
    auto [b0, b1] = predicted_coefficients(m, seq.omega(), x0);
    (void)b1;
    std::vector<double> lx, ly;
    for (int p : {25, 50, 100, 200, 400}) {
      OrthonormalBasis onb = orthonormal_basis(seq.bundle_at(p));
      double r = std::abs(bergman_function(onb, x0) / seq.A(p) - b0);
      lx.push_back(std::log(seq.A(p)));
      ly.push_back(std::log(r));
    }
    return ls_slope(lx, ly);
  };
  double s_half = slope_for(0.5);
  double s_two = slope_for(2.0);
  bool ok = -s_half >= 0.45 && -s_half <= 0.6 && -s_two >= 0.85 &&
            -s_two <= 1.15;
  report(3, "perturbed convergence rate", ok,
         fmt("a=0.5 slope %.3f (want -[0.45,0.6]), a=2 slope %.3f "
             "(want ~ -1)",
             s_half, s_two));
}

// 4: model kernel identities
void criterion_model_kernel() {
  KahlerModel m = KahlerModel::projective_line();
  ModelFrame f = make_frame(m, m.reference_form(),
                            ChartPoint::p1(Complex(0.0, 0.0)));
  double worst_res = 0.0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      for (int k = 0; k < 10; ++k) {
        Cvec Z(1), W(1);
        Z[0] = Complex(-2.0 + 0.4 * i, -2.0 + 0.4 * j);
        W[0] = Complex(-2.0 + 0.4 * k, 0.3);
        worst_res = std::max(worst_res, annihilation_residual(f, Z, W));
      }
  double defect = reproducing_defect(f, 6.0, 80);
  Cvec zero(1);
  zero[0] = Complex(0.0);
  double diag_err = std::abs(model_kernel(f, zero, zero).real() - 1.0);
  bool ok = worst_res <= 1e-12 && defect <= 1e-6 && diag_err <= 1e-12;
  report(4, "model kernel identities", ok,
         fmt("annihilation %.1e (tol 1e-12), reproducing %.1e (tol 1e-6), "
             "diagonal %.1e (tol 1e-12)",
             worst_res, defect, diag_err));
}

// 5: near-diagonal window defect decays like the square root of the power
void criterion_rescaled_window() {
  KahlerModel m = KahlerModel::projective_line();
  ModelFrame f = make_frame(m, m.reference_form(),
                            ChartPoint::p1(Complex(0.0, 0.0)));
  std::vector<double> lx, ly;
  bool monotone = true;
  double prev = 1e300;
  for (int p : {10, 20, 40, 80}) {
    OrthonormalBasis onb = orthonormal_basis(HermitianLineBundle(m, {p}));
    double v = rescaled_comparison(onb, f, p, 2.0);
    monotone = monotone && v < prev;
    prev = v;
    lx.push_back(std::log(static_cast<double>(p)));
    ly.push_back(std::log(v));
  }
  double expo = -ls_slope(lx, ly);
  bool ok = monotone && expo >= 0.4 && expo <= 0.6;
  report(5, "near-diagonal window decay", ok,
         fmt("monotone=%d, decay exponent %.3f (want [0.4,0.6])",
             monotone ? 1 : 0, expo));
}

// 6: zero-current equidistribution with speed, curve case
void criterion_equidistribution_speed() {
  KahlerModel m = KahlerModel::projective_line();
  BundleSequence seq = BundleSequence::power_ray(m);
  std::map<std::string, double> c2;
  for (const TestForm& f : form_catalog(m)) c2[f.id] = f.c2_norm;
  std::vector<int> ps = {25, 50, 100, 200};
  std::vector<double> xs, qs;
  bool bound_ok = true, frac_ok = true;
  double prev_frac = 2.0;
  std::string detail;
  for (int p : ps) {
    auto recs = discrepancy_records(seq, p, 1, 400, 20260825);
    std::vector<double> vals;
    std::map<std::uint64_t, double> per_sample;
    for (const auto& r : recs) {
      double v = std::abs(r.value) / c2.at(r.form_id);
      vals.push_back(v);
      per_sample[r.sample] = std::max(per_sample[r.sample], v);
    }
    double q = q90(vals);
    double x = std::log(static_cast<double>(p)) / p;
    xs.push_back(x);
    qs.push_back(q);
    // log p / p is an upper bound, not the observed rate; the constant
    // 0.05 is pinned with a wide margin above the measured values
    if (q > 0.05 * x) bound_ok = false;
    double eps = 4.0 * std::log(static_cast<double>(p)) / p;
    int exc = 0;
    for (const auto& [idx, v] : per_sample)
      if (v >= eps) ++exc;
    double frac = static_cast<double>(exc) / per_sample.size();
    if (frac > prev_frac) frac_ok = false;
    prev_frac = frac;
    detail += fmt("p=%d q90=%.2e frac=%.2f; ", p, q, frac);
  }
  // observed decay is faster than log p / p, so the fit is a shape
  // correlation with intercept plus the explicit upper-bound check above
  double r2 = r_squared(xs, qs);
  bool ok = r2 > 0.95 && bound_ok && frac_ok;
  report(6, "equidistribution speed m=1", ok,
         detail + fmt("R2=%.3f (>0.95), bound_ok=%d, frac monotone=%d", r2,
                      bound_ok ? 1 : 0, frac_ok ? 1 : 0));
}

// 7: simultaneous zeros on the product surface
void criterion_product_zeros() {
  KahlerModel m = KahlerModel::projective_product();
  QuadratureRule rule = m.default_rule(8);
  TwoForm omega = m.reference_form();
  const auto& catalog = form_catalog(m);
  bool counts_ok = true, decreasing = true;
  double prev_q = 1e300;
  std::string detail;
  for (int d = 2; d <= 6; ++d) {
    OrthonormalBasis onb = orthonormal_basis(HermitianLineBundle(m, {d, d}));
    std::vector<double> vals;
    int degenerate = 0;
    for (int i = 0; i < 100; ++i) {
      RngStream r1(777, d, 2 * i), r2(777, d, 2 * i + 1);
      Cvec c1 = sample_section(onb, r1).coefficients;
      Cvec c2v = sample_section(onb, r2).coefficients;
      ZeroSet zs;
      try {
        zs = common_zeros_p1xp1(onb, c1, c2v);
      } catch (const DegeneratePair&) {
        ++degenerate;
        continue;
      }
      int total = 0;
      for (int mlt : zs.multiplicities) total += mlt;
      if (total != 2 * d * d) counts_ok = false;
      for (const TestForm& f : catalog)
        vals.push_back(
            std::abs(pair_zero_current(m, zs, f, d, 2, omega, rule)) /
            f.c2_norm);
    }
    double q = q90(vals);
    if (q >= prev_q) decreasing = false;
    prev_q = q;
    detail += fmt("d=%d q90=%.2e deg=%d; ", d, q, degenerate);
  }
  report(7, "product simultaneous zeros", counts_ok && decreasing,
         detail + fmt("counts_ok=%d, q90 decreasing=%d", counts_ok ? 1 : 0,
                      decreasing ? 1 : 0));
}

// 8: expected-current speed for the induced projective metric
void criterion_fs_speed() {
  KahlerModel m = KahlerModel::projective_line();
  const auto& catalog = form_catalog(m);
  QuadratureRule rule = m.default_rule(10);
  BundleSequence power = BundleSequence::power_ray(m);
  double worst_exact = 0.0;
  for (int p : {10, 40}) {
    OrthonormalBasis onb = orthonormal_basis(power.bundle_at(p));
    for (const TestForm& f : catalog)
      worst_exact = std::max(
          worst_exact,
          std::abs(fs_current_pairing(onb, 1, f, power.A(p), power.omega(),
                                      rule)));
  }
  BundleSequence pert = BundleSequence::perturbed_power(m, "psi-bump-1", 0.5);
  std::vector<std::pair<double, double>> recs;
  for (int p : {25, 50, 100, 200, 400}) {
    OrthonormalBasis onb = orthonormal_basis(pert.bundle_at(p));
    double worst = 0.0;
    for (const TestForm& f : catalog)
      worst = std::max(worst, std::abs(fs_current_pairing(
                                  onb, 1, f, pert.A(p), pert.omega(), rule)) /
                                  f.c2_norm);
    recs.push_back({pert.A(p), worst});
  }
  RateFit fit = fit_rate(recs);
  bool ok = worst_exact <= 1e-8 && fit.r2 > 0.95;
  report(8, "expected-current speed", ok,
         fmt("exact case %.1e (tol 1e-8), perturbed fit R2=%.4f (>0.95) "
             "a_hat=%.2f",
             worst_exact, fit.r2, fit.a_hat));
}

// 9: sampling constants and intermediate degrees
void criterion_degrees() {
  double e = std::exp(1.0);
  bool const_ok = true;
  for (int mm = 1; mm <= 4 && const_ok; ++mm)
    for (int p = 1; p <= 500; ++p) {
      double c = sampling_constant(p + 1, mm);
      if (!(c > 1.0 / (2.0 * e * mm) && c < 2.0 * e / mm)) {
        const_ok = false;
        break;
      }
    }
  KahlerModel p1 = KahlerModel::projective_line();
  KahlerModel pr = KahlerModel::projective_product();
  BundleSequence s1 = BundleSequence::power_ray(p1);
  BundleSequence s2 = BundleSequence::power_ray(pr);
  bool degree_ok = true;
  for (int p : {4, 12, 100}) {
    CombinatoricsRecord r = combinatorics(s1, p, 1);
    if (std::abs(r.delta1 - p) > 1e-8 * p) degree_ok = false;
  }
  for (int p : {4, 12}) {
    // bidegree (p,p): first degree 2p, second 2p^2, both integers
    CombinatoricsRecord r1 = combinatorics(s2, p, 1);
    CombinatoricsRecord r2 = combinatorics(s2, p, 2);
    if (std::abs(r1.delta1 - 2.0 * p) > 1e-8 * p) degree_ok = false;
    if (std::abs(r2.delta1 - 2.0 * p * p) > 1e-8 * p * p) degree_ok = false;
  }
  double M1 = 4.0 * e;
  bool bracket_ok = true;
  for (int p = 8; p <= 500; ++p) {
    CombinatoricsRecord r = combinatorics(s1, p, 1);
    double ratio = r.delta1 / r.delta2;
    if (!(ratio >= p / M1 && ratio <= M1 * p)) bracket_ok = false;
  }
  report(9, "sampling constants, degrees", const_ok && degree_ok && bracket_ok,
         fmt("constants_ok=%d, degree exactness=%d, ratio bracket=%d",
             const_ok ? 1 : 0, degree_ok ? 1 : 0, bracket_ok ? 1 : 0));
}

// 10: off-diagonal kernel decay in the power
void criterion_off_diagonal() {
  KahlerModel m = KahlerModel::projective_line();
  ChartPoint x = ChartPoint::p1(Complex(0.0, 0.0));
  ChartPoint y = ChartPoint::p1(Complex(0.5, 0.0));
  std::vector<double> xs, ys;
  for (int p : {10, 20, 30, 40, 60, 80}) {
    OrthonormalBasis onb = orthonormal_basis(HermitianLineBundle(m, {p}));
    xs.push_back(static_cast<double>(p));
    ys.push_back(std::log(bergman_kernel2(onb, x, y)));
  }
  double slope = ls_slope(xs, ys);
  bool ok = slope <= -0.05;
  report(10, "off-diagonal decay", ok,
         fmt("d(log K)/dp = %.4f (want <= -0.05)", slope));
}

// 11: deterministic reports, thread-count invariance
void criterion_determinism() {
  ExperimentConfig cfg;
  cfg.experiment = "zeros-equidist";
  cfg.p_list = {6, 12};
  cfg.samples = 10;
  cfg.seed = 424242;
  Report a = run(cfg);
  Report b = run(cfg);
  setenv("BERGMAN_LAB_THREADS", "1", 1);
  Report c = run(cfg);
  setenv("BERGMAN_LAB_THREADS", "8", 1);
  Report d = run(cfg);
  unsetenv("BERGMAN_LAB_THREADS");
  bool ok = a.body.dump() == b.body.dump() && a.csv == b.csv &&
            a.body.dump() == c.body.dump() && c.body.dump() == d.body.dump();
  report(11, "deterministic reports", ok,
         ok ? "byte-identical across repeats and thread counts"
            : "report bodies differ");
}

}  // namespace

int main() {
  criterion_exact_baseline();
  criterion_expansion_coefficients();
  criterion_perturbed_rate();
  criterion_model_kernel();
  criterion_rescaled_window();
  criterion_equidistribution_speed();
  criterion_product_zeros();
  criterion_fs_speed();
  criterion_degrees();
  criterion_off_diagonal();
  criterion_determinism();
  std::printf("%d of 11 criteria passed\n", 11 - failures);
  return failures;
}
