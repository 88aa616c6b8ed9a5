#pragma once

// Truncated-Fock-basis single-mode states: quadrature statistics (the forward
// model used by the simulator) and iterative maximum-likelihood reconstruction.
//
// Conventions: x = (a + a^dagger)/sqrt(2), vacuum quadrature variance 1/2,
// p(x|theta) = sum_mn rho_mn e^{i(n-m)theta} psi_m(x) psi_n(x), so a coherent
// state's mean is sqrt(2)|alpha| cos(theta - arg alpha).

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pulsequad/quadrature_batch.hpp"

namespace pulsequad {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

class DensityMatrix {
 public:
  /// Validates: Hermitian to 1e-10, unit trace to 1e-10, min eigenvalue > -1e-8.
  explicit DensityMatrix(ComplexMatrix elements);

  static DensityMatrix vacuum(int dim);
  static DensityMatrix fock(int n, int dim);
  /// |psi><psi| for a normalized psi.
  static DensityMatrix pure(const StateVector& psi);

  int dim() const { return static_cast<int>(rho_.rows()); }
  const ComplexMatrix& elements() const { return rho_; }
  Complex operator()(int m, int n) const { return rho_(m, n); }
  double purity() const;

 private:
  ComplexMatrix rho_;
};

struct StateModel {
  enum class Kind { vacuum, coherent, fock, mixture };

  Kind kind = Kind::vacuum;
  Complex alpha{0.0, 0.0};
  int photons = 0;
  std::vector<double> weights;
  std::vector<StateModel> components;
  /// Loss-channel efficiency applied when the state is realized.
  double efficiency = 1.0;

  static StateModel vacuum();
  static StateModel coherent(Complex alpha, double efficiency = 1.0);
  static StateModel fock(int n, double efficiency = 1.0);
  static StateModel mixture(std::vector<double> weights, std::vector<StateModel> components,
                            double efficiency = 1.0);

  void validate() const;
};

/// Density matrix of `state` at Fock cutoff `dim`, including its loss channel.
DensityMatrix realize(const StateModel& state, int dim);

/// Normalized truncated coherent state vector.
StateVector coherent_vector(Complex alpha, int dim);
StateVector fock_vector(int n, int dim);

/// Oscillator eigenfunction <x|n> via the two-term recurrence.
double fock_wavefunction(int n, double x);
/// Fills out[0..out.size()) with psi_0(x) .. psi_{N-1}(x).
void fock_wavefunctions(double x, std::span<double> out);

/// p(x|theta) = <x_theta|rho|x_theta>, clamped at 0.
double quadrature_pdf(const DensityMatrix& rho, double theta, double x);

/// Bosonic loss (generalized Bernoulli transformation) with transmissivity eta.
DensityMatrix loss_channel(const DensityMatrix& rho, double eta);

/// Inverse-CDF sampler over a tabulated p(x|theta) on [-8, 8] with 2^14 grid points.
/// Works for any theta at O(dim log grid) per draw.
class QuadratureSampler {
 public:
  explicit QuadratureSampler(const DensityMatrix& rho);

  /// Quadrature value at CDF level u in [0, 1).
  double draw(double theta, double u) const;
  template <class Urbg>
  double operator()(double theta, Urbg& rng) const {
    return draw(theta, std::uniform_real_distribution<double>(0.0, 1.0)(rng));
  }

  static constexpr double kGridMin = -8.0;
  static constexpr double kGridMax = 8.0;
  static constexpr std::size_t kGridPoints = std::size_t{1} << 14;

 private:
  double cdf_at(std::size_t i, std::span<const Complex> phase_factors) const;

  // Cumulative integrals of the k-th off-diagonal band, k = 0 .. bands-1.
  std::vector<std::vector<Complex>> band_cdf_;
  std::vector<int> band_order_;
};

QuadratureBatch sample_quadratures(const StateModel& state, const PhaseSchedule& phases,
                                   std::size_t n, std::uint64_t seed, int cutoff = 10);

struct MleOptions {
  int cutoff = 10;
  /// Detection efficiency folded into the POVM (adjoint loss map). 1 = no correction.
  double eta = 1.0;
  double bin_width = 0.1;
  double tol = 1e-9;
  int max_iter = 2000;
  /// More distinct phases than this are grouped into this many equal bins over [0, 2pi).
  std::size_t max_phase_groups = 64;
};

struct MleResult {
  DensityMatrix rho;
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
  std::size_t cells = 0;
};

MleResult mle_reconstruct(const QuadratureBatch& batch, const MleOptions& options = {});

struct WignerGrid {
  std::vector<double> x_axis;
  std::vector<double> p_axis;
  /// Row-major, values[i * p_axis.size() + j] = W(x_i, p_j).
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * p_axis.size() + j]; }
};

double wigner_at(const DensityMatrix& rho, double x, double p);
WignerGrid wigner(const DensityMatrix& rho, std::vector<double> x_axis, std::vector<double> p_axis);
std::vector<double> linspace(double lo, double hi, std::size_t n);

struct PhotonStatistics {
  std::vector<double> probs;
};

PhotonStatistics photon_statistics(const DensityMatrix& rho);

/// <psi|rho|psi> clamped to [0, 1].
double fidelity_pure(const DensityMatrix& rho, const StateVector& target);
double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

struct OffsetEstimate {
  double offset = 0.0;
  double uncertainty = 0.0;
  std::size_t pairs = 0;
};

/// Calibration offset from Pr(X_theta) = Pr(-X_{theta+pi}): pairs of phase groups
/// (theta, theta + pi) within `phase_tol`, each holding at least `min_samples`.
OffsetEstimate symmetry_offset_check(const QuadratureBatch& batch, double phase_tol = 0.05,
                                     std::size_t min_samples = 100);

}  // namespace pulsequad
