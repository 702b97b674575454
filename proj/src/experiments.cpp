#include "berglab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "berglab/asymptotics.hpp"
#include "berglab/bergman.hpp"
#include "berglab/bundles.hpp"
#include "berglab/model_kernel.hpp"
#include "berglab/random_sections.hpp"

namespace berglab {

const char* kToolVersion = "0.1.0";

namespace {

using nlohmann::json;

KahlerModel model_from_config(const ExperimentConfig& cfg) {
  if (cfg.model == "projective-line") return KahlerModel::projective_line();
  if (cfg.model == "projective-product") return KahlerModel::projective_product();
  if (cfg.model == "flat-torus") return KahlerModel::flat_torus(cfg.tau);
  throw ConfigInvalid("unknown model: " + cfg.model);
}

BundleSequence sequence_from_config(const ExperimentConfig& cfg,
                                    const KahlerModel& model) {
  if (cfg.sequence == "power") return BundleSequence::power_ray(model);
  if (cfg.sequence == "perturbed-power")
    return BundleSequence::perturbed_power(model, cfg.psi_id, cfg.a);
  if (cfg.sequence == "multi-ray") {
    RayApproximation ray = diophantine_ray(cfg.rays, 12);
    std::vector<int> degs(cfg.rays.size(), 1);
    return BundleSequence::multi_ray(model, degs, ray);
  }
  throw ConfigInvalid("unknown sequence: " + cfg.sequence);
}

// Deterministic probe grid, volume-spread, 50 points.
std::vector<ChartPoint> probe_grid(const KahlerModel& model, int count) {
  std::vector<ChartPoint> pts;
  const double golden = 0.6180339887498949;
  switch (model.kind()) {
    case ModelKind::ProjectiveLine:
      for (int i = 0; i < count; ++i) {
        double s = (i + 0.5) / count;
        double r = std::sqrt(s / (1.0 - s));
        double th = 2.0 * std::numbers::pi * std::fmod(golden * i, 1.0);
        Complex z(r * std::cos(th), r * std::sin(th));
        pts.push_back(std::abs(z) <= 1.0 ? ChartPoint::p1(z)
                                         : ChartPoint::p1(1.0 / z, 1));
      }
      break;
    case ModelKind::ProjectiveProduct:
      for (int i = 0; i < count; ++i) {
        double s1 = (i + 0.5) / count;
        double s2 = std::fmod(golden * i + 0.31, 1.0);
        double r1 = std::sqrt(s1 / (1.0 - s1));
        double r2 = std::sqrt(s2 / (1.0 - s2));
        double t1 = 2.0 * std::numbers::pi * std::fmod(0.37 * i, 1.0);
        double t2 = 2.0 * std::numbers::pi * std::fmod(0.71 * i + 0.11, 1.0);
        Complex z(r1 * std::cos(t1), r1 * std::sin(t1));
        Complex w(r2 * std::cos(t2), r2 * std::sin(t2));
        int c0 = std::abs(z) <= 1.0 ? 0 : 1;
        int c1 = std::abs(w) <= 1.0 ? 0 : 1;
        ChartPoint x;
        x.chart_id = 2 * c0 + c1;
        x.coords = {c0 == 0 ? z : 1.0 / z, c1 == 0 ? w : 1.0 / w};
        pts.push_back(x);
      }
      break;
    case ModelKind::FlatTorus:
      for (int i = 0; i < count; ++i) {
        double x1 = (i + 0.5) / count;
        double x2 = std::fmod(golden * i, 1.0);
        pts.push_back(ChartPoint::p1(x1 + model.tau() * x2));
      }
      break;
  }
  return pts;
}

ChartPoint default_probe(const KahlerModel& model) {
  switch (model.kind()) {
    case ModelKind::ProjectiveLine:
      return ChartPoint::p1(Complex(0.0, 0.0));
    case ModelKind::ProjectiveProduct:
      return ChartPoint::product(Complex(0.0), Complex(0.0));
    case ModelKind::FlatTorus:
      return ChartPoint::p1(Complex(0.1, 0.2));
  }
  return ChartPoint::p1(Complex(0.0));
}

std::string csv_escape(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// --------------------------------------------------------------- bergman-scan

Report run_bergman_scan(const ExperimentConfig& cfg) {
  KahlerModel model = model_from_config(cfg);
  BundleSequence seq = sequence_from_config(cfg, model);
  QuadratureRule grid8 = model.default_rule(8);
  std::vector<ChartPoint> probes = probe_grid(model, 50);
  json rows = json::array();
  std::ostringstream csv;
  csv << "p,A_p,d_p,P_min,P_max,P_probe,a_p,gap_report\n";
  bool pass = true;
  for (int p : cfg.p_list) {
    HermitianLineBundle bundle = seq.bundle_at(p);
    OrthonormalBasis onb = orthonormal_basis(bundle);
    double pmin = 1e300, pmax = -1e300;
    for (const ChartPoint& x : probes) {
      double v = bergman_function(onb, x);
      pmin = std::min(pmin, v);
      pmax = std::max(pmax, v);
    }
    double pprobe = bergman_function(onb, default_probe(model));
    double ap = curvature_lower_bound(bundle, grid8) / seq.A(p);
    double gap = 2.0 * ap - cfg.gap_constant;
    int dp = dimension(bundle);
    if (cfg.sequence == "power") {
      // unperturbed reference metrics: P_p is the constant d_p
      if (std::abs(pmax - pmin) > 1e-8 * pmax ||
          std::abs(pprobe - dp) > 1e-8 * dp)
        pass = false;
    }
    json row;
    row["p"] = p;
    row["A_p"] = seq.A(p);
    row["d_p"] = dp;
    row["P_min"] = pmin;
    row["P_max"] = pmax;
    row["P_probe"] = pprobe;
    row["a_p"] = ap;
    row["gap_report"] = gap;
    rows.push_back(row);
    csv << p << ',' << csv_escape(seq.A(p)) << ',' << dp << ','
        << csv_escape(pmin) << ',' << csv_escape(pmax) << ','
        << csv_escape(pprobe) << ',' << csv_escape(ap) << ','
        << csv_escape(gap) << '\n';
  }
  Report rep;
  rep.body["rows"] = rows;
  rep.body["summary"] = {{"pass", pass}};
  rep.csv = csv.str();
  rep.pass = pass;
  return rep;
}

// -------------------------------------------------------------- expansion-fit

Report run_expansion_fit(const ExperimentConfig& cfg) {
  KahlerModel model = model_from_config(cfg);
  BundleSequence seq = sequence_from_config(cfg, model);
  ChartPoint x0 = default_probe(model);
  int n = model.complex_dim();
  std::vector<ExpansionSample> samples;
  json rows = json::array();
  std::ostringstream csv;
  csv << "p,A_p,P_x0\n";
  for (int p : cfg.p_list) {
    OrthonormalBasis onb = orthonormal_basis(seq.bundle_at(p));
    ExpansionSample s;
    s.p = p;
    s.A = seq.A(p);
    s.P = bergman_function(onb, x0);
    samples.push_back(s);
    rows.push_back({{"p", s.p}, {"A_p", s.A}, {"P_x0", s.P}});
    csv << s.p << ',' << csv_escape(s.A) << ',' << csv_escape(s.P) << '\n';
  }
  double a = seq.exponent_a();
  int k = a > 4.0 ? 1 : std::max(0, static_cast<int>(std::ceil(a)) - 1);
  k = std::max(k, 1);
  ExpansionFit fit = fit_expansion(samples, k, n);
  auto [b0, b1] = predicted_coefficients(model, seq.omega(), x0);
  fit.predicted_b0 = b0;
  fit.predicted_b1 = b1;
  bool pass = std::abs(fit.coeffs[0] - b0) <= 0.01 * std::abs(b0) &&
              std::abs(fit.coeffs[1] - b1) <= 0.05 * std::max(1.0, std::abs(b1));
  Report rep;
  rep.body["rows"] = rows;
  rep.body["summary"] = {{"pass", pass},
                         {"k", k},
                         {"coeffs", fit.coeffs},
                         {"residual", fit.residual},
                         {"predicted_b0", b0},
                         {"predicted_b1", b1}};
  rep.csv = csv.str();
  rep.pass = pass;
  return rep;
}

// --------------------------------------------------------------- model-kernel

Report run_model_kernel(const ExperimentConfig& cfg) {
  KahlerModel model = model_from_config(cfg);
  BundleSequence seq = sequence_from_config(cfg, model);
  ChartPoint x0 = default_probe(model);
  ModelFrame frame = make_frame(model, seq.omega(), x0);
  int n = model.complex_dim();
  // annihilation residual over a 10^3-point grid
  double res_max = 0.0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      for (int l = 0; l < 10; ++l) {
        Cvec Z(n), Zp(n);
        for (int c = 0; c < n; ++c) {
          Z[c] = Complex(-1.0 + 0.2 * i + 0.03 * c, -1.0 + 0.2 * j);
          Zp[c] = Complex(-1.0 + 0.2 * l, 0.1 * (l % 3) - 0.1 * c);
        }
        res_max = std::max(res_max, annihilation_residual(frame, Z, Zp));
      }
  double defect = reproducing_defect(frame, 6.0);
  double b0 = 1.0;
  for (double aj : frame.a) b0 *= aj / (2.0 * std::numbers::pi);
  Cvec zero = Cvec::Zero(n);
  double p00_diff = std::abs(model_kernel(frame, zero, zero).real() - b0);
  json rows = json::array();
  std::ostringstream csv;
  csv << "p,A_p,rescaled_defect\n";
  std::vector<std::pair<double, double>> decay;
  for (int p : cfg.p_list) {
    OrthonormalBasis onb = orthonormal_basis(seq.bundle_at(p));
    double v = rescaled_comparison(onb, frame, p, 2.0);
    decay.emplace_back(seq.A(p), v);
    rows.push_back({{"p", p}, {"A_p", seq.A(p)}, {"rescaled_defect", v}});
    csv << p << ',' << csv_escape(seq.A(p)) << ',' << csv_escape(v) << '\n';
  }
  bool pass = res_max <= 1e-12 && defect <= 1e-6 && p00_diff <= 1e-12;
  double slope = 0.0;
  if (decay.size() >= 2) {
    slope = log_slope(decay);
    for (std::size_t i = 1; i < decay.size(); ++i)
      if (decay[i].second >= decay[i - 1].second) pass = false;
  }
  Report rep;
  rep.body["rows"] = rows;
  rep.body["summary"] = {{"pass", pass},
                         {"annihilation_residual_max", res_max},
                         {"reproducing_defect", defect},
                         {"p00_vs_density_ratio", p00_diff},
                         {"decay_slope", slope}};
  rep.csv = csv.str();
  rep.pass = pass;
  return rep;
}

// ------------------------------------------------------------- zeros-equidist

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return 0.0;
  double idx = q * (v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(idx);
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = idx - lo;
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

Report run_zeros_equidist(const ExperimentConfig& cfg) {
  KahlerModel model = model_from_config(cfg);
  BundleSequence seq = sequence_from_config(cfg, model);
  const std::vector<TestForm>& catalog = form_catalog(model);
  json rows = json::array();
  std::ostringstream csv;
  csv << "p,A_p,m,seed,sample,form_id,value\n";
  std::vector<std::pair<double, double>> p90;  // (A, 90th pct of sup ratio)
  std::vector<double> fractions;
  bool pass = true;
  for (int p : cfg.p_list) {
    std::vector<DiscrepancyRecord> recs =
        discrepancy_records(seq, p, cfg.m, cfg.samples, cfg.seed);
    std::vector<double> sup_ratio(cfg.samples, 0.0);
    for (const DiscrepancyRecord& r : recs) {
      double c2 = 1.0;
      for (const TestForm& f : catalog)
        if (f.id == r.form_id) c2 = f.c2_norm;
      sup_ratio[r.sample] =
          std::max(sup_ratio[r.sample], std::abs(r.value) / c2);
      rows.push_back({{"p", r.p},
                      {"A_p", r.A},
                      {"m", r.m},
                      {"seed", r.seed},
                      {"sample", r.sample},
                      {"form_id", r.form_id},
                      {"value", r.value}});
      csv << r.p << ',' << csv_escape(r.A) << ',' << r.m << ',' << r.seed
          << ',' << r.sample << ',' << r.form_id << ','
          << csv_escape(r.value) << '\n';
    }
    p90.emplace_back(seq.A(p), percentile(sup_ratio, 0.9));
    double eps = 4.0 * std::log(seq.A(p)) / seq.A(p);
    ExceptionalSetEstimate est =
        exceptional_fraction(seq, p, cfg.m, eps, cfg.samples, cfg.seed);
    fractions.push_back(est.fraction);
  }
  json summary;
  summary["p90"] = json::array();
  for (auto& pr : p90)
    summary["p90"].push_back({{"A_p", pr.first}, {"value", pr.second}});
  summary["exceptional_fractions"] = fractions;
  for (std::size_t i = 1; i < fractions.size(); ++i)
    if (fractions[i] > fractions[i - 1]) pass = false;
  if (p90.size() >= 4) {
    // 90th percentile against C log A / A
    RateFit fit = fit_rate(p90);
    summary["rate_fit"] = {{"C1", fit.C1},
                           {"C2", fit.C2},
                           {"a_hat", fit.a_hat},
                           {"r2", fit.r2}};
    if (!(fit.r2 > 0.95)) pass = false;
  }
  summary["pass"] = pass;
  Report rep;
  rep.body["rows"] = rows;
  rep.body["summary"] = summary;
  rep.csv = csv.str();
  rep.pass = pass;
  return rep;
}

// ------------------------------------------------------------------ fs-speed

Report run_fs_speed(const ExperimentConfig& cfg) {
  KahlerModel model = model_from_config(cfg);
  BundleSequence seq = sequence_from_config(cfg, model);
  const std::vector<TestForm>& catalog = form_catalog(model);
  QuadratureRule rule = model.default_rule(12);
  TwoForm omega = seq.omega();
  json rows = json::array();
  std::ostringstream csv;
  csv << "p,A_p,m,form_id,value\n";
  std::vector<std::pair<double, double>> worst;  // (A, max_phi |value|/c2)
  for (int p : cfg.p_list) {
    OrthonormalBasis onb = orthonormal_basis(seq.bundle_at(p));
    double w = 0.0;
    for (const TestForm& f : catalog) {
      double v = fs_current_pairing(onb, cfg.m, f, seq.A(p), omega, rule);
      w = std::max(w, std::abs(v) / f.c2_norm);
      rows.push_back({{"p", p},
                      {"A_p", seq.A(p)},
                      {"m", cfg.m},
                      {"form_id", f.id},
                      {"value", v}});
      csv << p << ',' << csv_escape(seq.A(p)) << ',' << cfg.m << ',' << f.id
          << ',' << csv_escape(v) << '\n';
    }
    worst.emplace_back(seq.A(p), w);
  }
  bool pass = true;
  json summary;
  if (cfg.sequence == "power") {
    double mx = 0.0;
    for (auto& pr : worst) mx = std::max(mx, pr.second);
    summary["max_normalized_value"] = mx;
    pass = mx <= 1e-8;
  } else if (worst.size() >= 4) {
    RateFit fit = fit_rate(worst);
    summary["rate_fit"] = {{"C1", fit.C1},
                           {"C2", fit.C2},
                           {"a_hat", fit.a_hat},
                           {"r2", fit.r2},
                           {"exact", fit.exact}};
    pass = fit.exact || fit.r2 > 0.95;
  }
  summary["pass"] = pass;
  Report rep;
  rep.body["rows"] = rows;
  rep.body["summary"] = summary;
  rep.csv = csv.str();
  rep.pass = pass;
  return rep;
}

// ------------------------------------------------------------------- degrees

Report run_degrees(const ExperimentConfig& cfg) {
  KahlerModel model = model_from_config(cfg);
  BundleSequence seq = sequence_from_config(cfg, model);
  json rows = json::array();
  std::ostringstream csv;
  csv << "p,d_p,d_pm,c_pm,delta1,delta2,ratio\n";
  bool pass = true;
  const double M1 = 4.0 * std::numbers::e;
  for (int p : cfg.p_list) {
    CombinatoricsRecord rec = combinatorics(seq, p, cfg.m);
    double ratio = rec.delta2 != 0.0 ? rec.delta1 / rec.delta2 : 0.0;
    double lo = 1.0 / (2.0 * std::numbers::e * cfg.m);
    double hi = 2.0 * std::numbers::e / cfg.m;
    if (rec.d_pm > 0 && !(rec.c_pm > lo && rec.c_pm < hi)) pass = false;
    if (p >= 8) {
      double A = seq.A(p);
      if (!(ratio >= A / M1 && ratio <= A * M1)) pass = false;
    }
    rows.push_back({{"p", p},
                    {"d_p", rec.d_p},
                    {"d_pm", rec.d_pm},
                    {"c_pm", rec.c_pm},
                    {"delta1", rec.delta1},
                    {"delta2", rec.delta2},
                    {"ratio", ratio}});
    csv << p << ',' << rec.d_p << ',' << rec.d_pm << ','
        << csv_escape(rec.c_pm) << ',' << csv_escape(rec.delta1) << ','
        << csv_escape(rec.delta2) << ',' << csv_escape(ratio) << '\n';
  }
  Report rep;
  rep.body["rows"] = rows;
  rep.body["summary"] = {{"pass", pass}};
  rep.csv = csv.str();
  rep.pass = pass;
  return rep;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  if (!j.contains("experiment")) throw ConfigInvalid("missing 'experiment'");
  cfg.experiment = j.at("experiment").get<std::string>();
  cfg.model = j.value("model", cfg.model);
  if (j.contains("tau")) {
    auto t = j.at("tau");
    cfg.tau = Complex(t.at(0).get<double>(), t.at(1).get<double>());
  }
  cfg.sequence = j.value("sequence", cfg.sequence);
  cfg.a = j.value("a", cfg.a);
  cfg.psi_id = j.value("psi_id", cfg.psi_id);
  if (j.contains("rays")) cfg.rays = j.at("rays").get<std::vector<double>>();
  if (j.contains("p")) {
    cfg.p_list = j.at("p").get<std::vector<int>>();
  } else if (j.contains("p_range")) {
    auto r = j.at("p_range");
    int step = r.size() > 2 ? r.at(2).get<int>() : 1;
    for (int p = r.at(0).get<int>(); p <= r.at(1).get<int>(); p += step)
      cfg.p_list.push_back(p);
  }
  cfg.m = j.value("m", cfg.m);
  cfg.samples = j.value("samples", cfg.samples);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out = j.value("out", cfg.out);
  cfg.format = j.value("format", cfg.format);
  cfg.gap_constant = j.value("gap_constant", cfg.gap_constant);
  return cfg;
}

std::vector<std::string> validate(const ExperimentConfig& cfg) {
  std::vector<std::string> diags;
  static const std::vector<std::string> experiments = {
      "bergman-scan", "expansion-fit", "model-kernel",
      "zeros-equidist", "fs-speed", "degrees"};
  if (std::find(experiments.begin(), experiments.end(), cfg.experiment) ==
      experiments.end())
    diags.push_back("unknown experiment: " + cfg.experiment);
  if (cfg.model != "projective-line" && cfg.model != "projective-product" &&
      cfg.model != "flat-torus")
    diags.push_back("unknown model: " + cfg.model);
  if (cfg.model == "flat-torus" && !(cfg.tau.imag() > 0.0))
    diags.push_back("tau must have positive imaginary part");
  if (cfg.sequence != "power" && cfg.sequence != "perturbed-power" &&
      cfg.sequence != "multi-ray")
    diags.push_back("unknown sequence: " + cfg.sequence);
  if (cfg.sequence == "perturbed-power" && !(cfg.a > 0.0))
    diags.push_back("perturbed-power needs a > 0");
  if (cfg.sequence == "multi-ray" && cfg.rays.empty())
    diags.push_back("multi-ray needs a nonempty ray list");
  if (cfg.p_list.empty()) diags.push_back("p list must be nonempty");
  for (std::size_t i = 1; i < cfg.p_list.size(); ++i)
    if (cfg.p_list[i] <= cfg.p_list[i - 1]) {
      diags.push_back("p list must be strictly increasing");
      break;
    }
  for (int p : cfg.p_list)
    if (p < 1) {
      diags.push_back("p values must be >= 1");
      break;
    }
  if (cfg.experiment == "zeros-equidist" && cfg.samples < 1)
    diags.push_back("zeros-equidist needs samples >= 1");
  if (cfg.format != "csv" && cfg.format != "json")
    diags.push_back("format must be csv or json");
  int n = cfg.model == "projective-product" ? 2 : 1;
  if (cfg.m < 1 || cfg.m > n)
    diags.push_back("m must satisfy 1 <= m <= complex dimension");
  return diags;
}

Report run(const ExperimentConfig& cfg) {
  std::vector<std::string> diags = validate(cfg);
  if (!diags.empty()) {
    std::string msg = "invalid config:";
    for (const std::string& d : diags) msg += " [" + d + "]";
    throw ConfigInvalid(msg);
  }
  Report rep;
  if (cfg.experiment == "bergman-scan")
    rep = run_bergman_scan(cfg);
  else if (cfg.experiment == "expansion-fit")
    rep = run_expansion_fit(cfg);
  else if (cfg.experiment == "model-kernel")
    rep = run_model_kernel(cfg);
  else if (cfg.experiment == "zeros-equidist")
    rep = run_zeros_equidist(cfg);
  else if (cfg.experiment == "fs-speed")
    rep = run_fs_speed(cfg);
  else
    rep = run_degrees(cfg);
  json echo;
  echo["experiment"] = cfg.experiment;
  echo["model"] = cfg.model;
  if (cfg.model == "flat-torus") echo["tau"] = {cfg.tau.real(), cfg.tau.imag()};
  echo["sequence"] = cfg.sequence;
  if (cfg.sequence == "perturbed-power") {
    echo["a"] = cfg.a;
    echo["psi_id"] = cfg.psi_id;
  }
  if (cfg.sequence == "multi-ray") echo["rays"] = cfg.rays;
  echo["p"] = cfg.p_list;
  echo["m"] = cfg.m;
  echo["samples"] = cfg.samples;
  echo["seed"] = cfg.seed;
  echo["gap_constant"] = cfg.gap_constant;
  rep.body["config"] = echo;
  rep.body["version"] = kToolVersion;
  return rep;
}

void write_report(const Report& report, const ExperimentConfig& cfg,
                  double wall_ms) {
  std::string payload;
  if (cfg.format == "json") {
    json full = report.body;
    full["wall_time_ms"] = wall_ms;
    payload = full.dump(2);
    payload += '\n';
  } else {
    payload = report.csv;
  }
  if (cfg.out.empty()) {
    std::cout << payload;
    return;
  }
  std::filesystem::path target(cfg.out);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string());
    f << payload;
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace berglab
