#include "berglab/model_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace berglab {

namespace {

constexpr double kPi = std::numbers::pi;

ChartPoint displaced(const ChartPoint& x0, const std::vector<double>& lambda,
                     const Cvec& U) {
  ChartPoint x = x0;
  for (int j = 0; j < static_cast<int>(lambda.size()); ++j)
    x.coords[j] += lambda[j] * U[j];
  return x;
}

}  // namespace

ModelFrame make_frame(const KahlerModel& model, const TwoForm& omega,
                      const ChartPoint& x0) {
  ModelFrame frame;
  frame.x0 = x0;
  frame.a = curvature_eigenvalues(omega, model.reference_form(), x0);
  Cmat Ht = model.reference_form().matrix(x0);
  int n = model.complex_dim();
  frame.lambda.resize(n);
  for (int j = 0; j < n; ++j) frame.lambda[j] = 1.0 / std::sqrt(Ht(j, j).real());
  std::vector<double> lam = frame.lambda;
  double v0 = model.volume_density(x0);
  frame.kappa = [model, x0, lam, v0](const Cvec& U) {
    return model.volume_density(displaced(x0, lam, U)) / v0;
  };
  return frame;
}

Complex model_kernel(const ModelFrame& frame, const Cvec& Z, const Cvec& Zp) {
  Complex expo(0.0);
  double amp = 1.0;
  for (std::size_t j = 0; j < frame.a.size(); ++j) {
    double a = frame.a[j];
    amp *= a / (2.0 * kPi);
    expo += -0.25 * a *
            (std::norm(Z[j]) + std::norm(Zp[j]) - 2.0 * Z[j] * std::conj(Zp[j]));
  }
  return amp * std::exp(expo);
}

double annihilation_residual(const ModelFrame& frame, const Cvec& Z,
                             const Cvec& Zp) {
  Complex P = model_kernel(frame, Z, Zp);
  double res = 0.0;
  for (std::size_t j = 0; j < frame.a.size(); ++j) {
    // d/dzbar_j of the exponent is -a_j z_j / 4.
    Complex dP = -0.25 * frame.a[j] * Z[j] * P;
    res += std::abs(2.0 * dP + 0.5 * frame.a[j] * Z[j] * P);
  }
  return res;
}

double annihilation_residual(
    const ModelFrame& frame, const Cvec& Z, const Cvec& Zp,
    const std::function<Complex(const Cvec&, const Cvec&)>& kernel) {
  const double h = 1e-5;
  double res = 0.0;
  for (std::size_t j = 0; j < frame.a.size(); ++j) {
    Cvec Zx = Z, Zy = Z;
    Zx[j] += h;
    Cvec Zxm = Z;
    Zxm[j] -= h;
    Zy[j] += Complex(0.0, h);
    Cvec Zym = Z;
    Zym[j] -= Complex(0.0, h);
    Complex Fx = (kernel(Zx, Zp) - kernel(Zxm, Zp)) / (2.0 * h);
    Complex Fy = (kernel(Zy, Zp) - kernel(Zym, Zp)) / (2.0 * h);
    Complex dzbar = 0.5 * (Fx + Complex(0.0, 1.0) * Fy);
    res += std::abs(2.0 * dzbar + 0.5 * frame.a[j] * Z[j] * kernel(Z, Zp));
  }
  return res;
}

namespace {

// One complex coordinate of the reproducing integral: numeric part on the
// box plus a certified tail bound.
struct CoordDefect {
  Complex integral;
  double kernel;
  double tail;
};

CoordDefect coord_reproducing(double a, Complex z, Complex zp, double R,
                              int nodes) {
  std::vector<double> x, w;
  detail::gauss_legendre01(nodes, x, w);
  auto k1 = [a](Complex u, Complex v) {
    return (a / (2.0 * kPi)) *
           std::exp(-0.25 * a *
                    (std::norm(u) + std::norm(v) - 2.0 * u * std::conj(v)));
  };
  Complex acc(0.0);
  for (int i = 0; i < nodes; ++i) {
    double wr = (2.0 * x[i] - 1.0) * R;
    for (int jj = 0; jj < nodes; ++jj) {
      double wi = (2.0 * x[jj] - 1.0) * R;
      Complex W(wr, wi);
      acc += w[i] * w[jj] * k1(z, W) * k1(W, zp);
    }
  }
  acc *= 4.0 * R * R;  // weights sum to 1 on [0,1] per axis
  // |k1(z,W) k1(W,zp)| <= (a/2pi)^2 exp(-a(|W|-rho)^2/2) outside |W| <= R
  // with rho = max(|z|,|zp|); integrate the radial bound past R.
  double rho = std::max(std::abs(z), std::abs(zp));
  double t = std::sqrt(a / 2.0) * (R - rho);
  double tail = (a * a / (2.0 * kPi)) *
                (std::exp(-0.5 * a * (R - rho) * (R - rho)) / a +
                 rho * std::sqrt(kPi / (2.0 * a)) * std::erfc(t));
  CoordDefect out;
  out.integral = acc;
  out.kernel = std::abs(k1(z, zp));
  out.tail = tail;
  return out;
}

}  // namespace

double reproducing_defect(const ModelFrame& frame, double box_radius,
                          int nodes_per_axis) {
  int n = static_cast<int>(frame.a.size());
  double worst = 0.0;
  // 3x3 complex grid per coordinate inside the unit disk, same for Z and Z'.
  std::vector<Complex> pts;
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j) {
      Complex c(0.5 * i, 0.5 * j);
      if (std::abs(c) <= 1.0) pts.push_back(c);
    }
  for (Complex z : pts)
    for (Complex zp : pts) {
      double num = 1.0, ker = 1.0, tail = 0.0, prodmax = 1.0;
      Complex numc(1.0);
      for (int j = 0; j < n; ++j) {
        CoordDefect cd =
            coord_reproducing(frame.a[j], z, zp, box_radius, nodes_per_axis);
        numc *= cd.integral;
        ker *= cd.kernel;
        tail = tail * std::max(std::abs(cd.integral), cd.kernel) +
               cd.tail * prodmax;
        prodmax *= std::max(std::abs(cd.integral), cd.kernel);
      }
      num = std::abs(numc);
      double defect = std::abs(num - ker) + tail;
      worst = std::max(worst, defect);
    }
  return worst;
}

double rescaled_comparison(const OrthonormalBasis& onb, const ModelFrame& frame,
                           int p, double window_radius) {
  const KahlerModel& model = onb.basis().bundle().model();
  int n = model.complex_dim();
  double A = static_cast<double>(p);
  double lam_max = *std::max_element(frame.lambda.begin(), frame.lambda.end());
  if (lam_max * window_radius / std::sqrt(A) > 2.0)
    throw WindowTooLarge("rescaled_comparison: window leaves the chart");
  // 9x9 grid per complex coordinate, clipped to |Z| <= q.
  std::vector<Cvec> grid;
  double q = window_radius;
  if (n == 1) {
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 9; ++j) {
        Complex z(-q + i * q / 4.0, -q + j * q / 4.0);
        if (std::abs(z) <= q) {
          Cvec Z(1);
          Z[0] = z;
          grid.push_back(Z);
        }
      }
  } else {
    // keep the pair count manageable: 5 points per coordinate on axes
    std::vector<Complex> c1;
    for (int i = 0; i < 5; ++i) c1.push_back(Complex(-q + i * q / 2.0, 0.0));
    for (Complex u : c1)
      for (Complex v : c1) {
        Cvec Z(2);
        Z[0] = u;
        Z[1] = v;
        if (Z.norm() <= q * std::sqrt(2.0)) grid.push_back(Z);
      }
  }
  std::size_t ng = grid.size();
  std::vector<Cvec> vals(ng);
  std::vector<double> kap(ng);
  for (std::size_t i = 0; i < ng; ++i) {
    Cvec U = grid[i] / std::sqrt(A);
    vals[i] = onb.values(displaced(frame.x0, frame.lambda, U));
    kap[i] = frame.kappa(U);
  }
  double An = std::pow(A, n);
  double worst = 0.0;
  for (std::size_t i = 0; i < ng; ++i)
    for (std::size_t j = 0; j < ng; ++j) {
      double P2 = std::abs(vals[j].dot(vals[i]));
      double lhs = P2 / An * std::sqrt(kap[i] * kap[j]);
      double rhs = std::abs(model_kernel(frame, grid[i], grid[j]));
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  return worst;
}

}  // namespace berglab
