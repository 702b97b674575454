#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "berglab/bergman.hpp"
#include "berglab/bundles.hpp"
#include "berglab/geometry.hpp"

namespace berglab {

struct DegeneratePair : std::runtime_error {
  explicit DegeneratePair(const std::string& m) : std::runtime_error(m) {}
};

/// Counter-based stream: state hashed from (seed, p, index), so every sample
/// is reproducible in isolation and independent of scheduling.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t p, std::uint64_t index);
  std::uint64_t next_u64();
  double uniform();            // in (0,1)
  double gaussian();           // N(0,1), own Box-Muller for bit stability
  Complex complex_gaussian();  // standard complex normal, E|c|^2 = 1

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

struct SectionSample {
  Cvec coefficients;  // unit vector in the orthonormal basis
  std::uint64_t seed = 0;
  int p = 0;
  std::uint64_t index = 0;
};

/// Fubini-Study-uniform point of the projectivized section space: normalized
/// standard complex Gaussian in the orthonormal coordinates.
SectionSample sample_section(const OrthonormalBasis& onb, RngStream& rng);

struct ZeroSet {
  std::vector<ChartPoint> points;
  std::vector<int> multiplicities;
  int expected_total = 0;
};

/// All roots, with multiplicity, of the degree-d polynomial with the given
/// monomial coefficients (ascending). Degree drop at the top is recorded as
/// the infinity point (chart 1, w = 0). Balanced companion matrix plus
/// Newton polish; chordal clustering tolerance 1e-8.
ZeroSet monomial_zeros(const Cvec& monomial_coeffs);

/// Zero set of sum_j c_j S_j on the projective line.
ZeroSet zeros_cp1(const OrthonormalBasis& onb, const SectionSample& sample);

/// Common zeros of two sections on the product of projective lines,
/// bidegrees (d,e) each: exact-arithmetic Sylvester resultant in the second
/// variable, then per-root solve and two-variable Newton polish.
/// expected_total = 2de. Throws DegeneratePair when the resultant vanishes
/// identically.
ZeroSet common_zeros_p1xp1(const OrthonormalBasis& onb, const Cvec& coeffs1,
                           const Cvec& coeffs2);

struct TestForm {
  std::string id;
  std::function<double(const ChartPoint&)> value;
  double c2_norm = 0.0;  // grid-measured sup of |phi|+|grad|+|hess|, x1.05
};

const std::vector<TestForm>& form_catalog(const KahlerModel& model);
std::vector<std::string> form_catalog_ids();

/// <wedge of the given (1,1)-forms (padded with the reference form up to top
/// degree), phi> by quadrature. Normalization: the reference form theta has
/// <theta^n, 1> = n! on these unit-volume models.
double wedge_pairing(const KahlerModel& model, const std::vector<TwoForm>& forms,
                     const std::function<double(const ChartPoint&)>& phi,
                     const QuadratureRule& rule);

/// A^{-m} sum mult*phi(point) - <omega^m wedge theta^{n-m}, phi>.
double pair_zero_current(const KahlerModel& model, const ZeroSet& zeros,
                         const TestForm& phi, double A, int m,
                         const TwoForm& omega, const QuadratureRule& rule);

/// <(gamma_p/A)^m wedge theta^{n-m} - omega^m wedge theta^{n-m}, phi> with
/// gamma_p the Fubini-Study current of the orthonormal basis.
double fs_current_pairing(const OrthonormalBasis& onb, int m,
                          const TestForm& phi, double A, const TwoForm& omega,
                          const QuadratureRule& rule);

struct CombinatoricsRecord {
  int d_p = 0;
  long d_pm = 0;
  double c_pm = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
};

/// ((d_p-1)!)^{m/d_pm} / (d_pm!)^{1/d_pm} with d_pm = m(d_p-1), via log-gamma.
double sampling_constant(int d_p, int m);

CombinatoricsRecord combinatorics(const BundleSequence& seq, int p, int m);

struct ExceptionalSetEstimate {
  int p = 0;
  double eps = 0.0;
  int samples = 0;
  double fraction = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 1.0;
};

/// Fraction of N samples whose zero current deviates from gamma_p^m by at
/// least A^m * eps against some catalog form (normalized by its C2 bound).
/// Restricting the sup to the finite catalog under-estimates the true
/// exceptional measure.
ExceptionalSetEstimate exceptional_fraction(const BundleSequence& seq, int p,
                                            int m, double eps, int N,
                                            std::uint64_t seed);

struct DiscrepancyRecord {
  int p = 0;
  double A = 0.0;
  int m = 0;
  std::string form_id;
  std::uint64_t seed = 0;
  std::uint64_t sample = 0;
  double value = 0.0;
};

/// One record per (sample, catalog form): value = <A^{-m}[s=0] - omega^m, phi>.
std::vector<DiscrepancyRecord> discrepancy_records(const BundleSequence& seq,
                                                   int p, int m, int N,
                                                   std::uint64_t seed);

}  // namespace berglab
