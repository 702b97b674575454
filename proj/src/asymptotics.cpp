#include "berglab/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace berglab {

namespace {
constexpr double kPi = std::numbers::pi;
}

ExpansionFit fit_expansion(const std::vector<ExpansionSample>& samples, int k,
                           int n) {
  std::set<double> distinct;
  for (const auto& s : samples) distinct.insert(s.A);
  if (static_cast<int>(distinct.size()) < k + 2)
    throw RankDeficient("fit_expansion: need at least k+2 distinct A values");
  int rows = static_cast<int>(samples.size());
  Eigen::MatrixXd M(rows, k + 1);
  Eigen::VectorXd y(rows);
  for (int i = 0; i < rows; ++i) {
    double Ainv = 1.0 / samples[i].A;
    double t = 1.0;
    for (int r = 0; r <= k; ++r) {
      M(i, r) = t;
      t *= Ainv;
    }
    y(i) = samples[i].P / std::pow(samples[i].A, n);
  }
  Eigen::VectorXd scale(k + 1);
  for (int r = 0; r <= k; ++r) {
    scale(r) = M.col(r).norm();
    if (scale(r) == 0.0) throw RankDeficient("fit_expansion: zero column");
    M.col(r) /= scale(r);
  }
  Eigen::VectorXd c = (M.transpose() * M).ldlt().solve(M.transpose() * y);
  ExpansionFit fit;
  fit.samples = samples;
  fit.residual = (M * c - y).norm();
  fit.coeffs.resize(k + 1);
  for (int r = 0; r <= k; ++r) fit.coeffs[r] = c(r) / scale(r);
  return fit;
}

std::pair<double, double> predicted_coefficients(const KahlerModel& model,
                                                 const TwoForm& omega,
                                                 const ChartPoint& x0) {
  std::vector<double> a = curvature_eigenvalues(omega, model.reference_form(), x0);
  double b0 = 1.0;
  for (double aj : a) b0 *= aj / (2.0 * kPi);
  double c = a.front() / (2.0 * kPi);
  double r = model.scalar_curvature(x0) / c;
  double b1 = b0 * r / (8.0 * kPi);
  return {b0, b1};
}

namespace {

// SSE of the two-term model at fixed exponent a, with the best (C1, C2).
double rate_sse(const std::vector<std::pair<double, double>>& rec, double a,
                double* C1, double* C2) {
  int n = static_cast<int>(rec.size());
  Eigen::MatrixXd M(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    double A = rec[i].first;
    M(i, 0) = std::log(A) / A;
    M(i, 1) = std::pow(A, -a);
    y(i) = std::abs(rec[i].second);
  }
  Eigen::Vector2d c = (M.transpose() * M).ldlt().solve(M.transpose() * y);
  if (C1) *C1 = c(0);
  if (C2) *C2 = c(1);
  return (M * c - y).squaredNorm();
}

}  // namespace

RateFit fit_rate(std::vector<std::pair<double, double>> records) {
  std::sort(records.begin(), records.end());
  std::set<double> distinct;
  for (const auto& r : records) distinct.insert(r.first);
  if (distinct.size() < 4)
    throw DegenerateData("fit_rate: need at least 4 distinct A values");
  RateFit fit;
  bool all_small = true;
  double sum = 0.0;
  for (const auto& r : records) {
    if (std::abs(r.second) >= 1e-12) all_small = false;
    sum += std::abs(r.second);
  }
  if (all_small) {
    fit.exact = true;
    fit.r2 = 1.0;
    return fit;
  }
  double mean = sum / records.size();
  double sstot = 0.0;
  for (const auto& r : records)
    sstot += (std::abs(r.second) - mean) * (std::abs(r.second) - mean);
  double best_a = 0.05, best_sse = 1e300;
  for (double a = 0.05; a <= 3.0 + 1e-12; a += 0.005) {
    double sse = rate_sse(records, a, nullptr, nullptr);
    fit.loss_profile.emplace_back(a, sse);
    if (sse < best_sse) {
      best_sse = sse;
      best_a = a;
    }
  }
  // golden-section refinement around the grid minimum
  double lo = std::max(0.05, best_a - 0.005), hi = std::min(3.0, best_a + 0.005);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = rate_sse(records, x1, nullptr, nullptr);
  double f2 = rate_sse(records, x2, nullptr, nullptr);
  for (int it = 0; it < 40; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = rate_sse(records, x1, nullptr, nullptr);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = rate_sse(records, x2, nullptr, nullptr);
    }
  }
  double a = 0.5 * (lo + hi);
  double sse = rate_sse(records, a, &fit.C1, &fit.C2);
  if (sse > best_sse) {
    a = best_a;
    sse = rate_sse(records, a, &fit.C1, &fit.C2);
  }
  fit.a_hat = a;
  fit.r2 = sstot > 0.0 ? 1.0 - sse / sstot : 1.0;
  return fit;
}

double log_slope(const std::vector<std::pair<double, double>>& records) {
  int n = static_cast<int>(records.size());
  if (n < 2) throw DegenerateData("log_slope: need at least 2 records");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : records) {
    if (!(r.second > 0.0))
      throw DegenerateData("log_slope: values must be positive");
    double x = std::log(r.first), y = std::log(r.second);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace berglab
