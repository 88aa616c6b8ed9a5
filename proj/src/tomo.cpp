#include "pulsequad/tomo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <utility>

#include <boost/math/quadrature/gauss.hpp>

#include "pulsequad/random.hpp"

namespace pulsequad {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_phase(double theta) {
  double t = std::fmod(theta, 2.0 * kPi);
  if (t < 0.0) t += 2.0 * kPi;
  return t;
}

// Pascal triangle rows 0..n_max, exact in double for the sizes used here.
std::vector<std::vector<double>> binomials(int n_max) {
  std::vector<std::vector<double>> c(n_max + 1);
  for (int n = 0; n <= n_max; ++n) {
    c[n].assign(n + 1, 1.0);
    for (int k = 1; k < n; ++k) c[n][k] = c[n - 1][k - 1] + c[n - 1][k];
  }
  return c;
}

// amp[m][k] = sqrt(C(m+k, k) eta^m (1-eta)^k), m + k < dim.
std::vector<std::vector<double>> loss_amplitudes(int dim, double eta) {
  const auto c = binomials(dim);
  std::vector<std::vector<double>> amp(dim);
  for (int m = 0; m < dim; ++m) {
    amp[m].resize(dim - m);
    for (int k = 0; m + k < dim; ++k)
      amp[m][k] = std::sqrt(c[m + k][k] * std::pow(eta, m) * std::pow(1.0 - eta, k));
  }
  return amp;
}

}  // namespace

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix(ComplexMatrix elements) : rho_(std::move(elements)) {
  if (rho_.rows() == 0 || rho_.rows() != rho_.cols())
    throw std::invalid_argument("DensityMatrix: matrix must be square and non-empty");
  if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() >= 1e-10)
    throw std::invalid_argument("DensityMatrix: not Hermitian");
  if (std::abs(rho_.trace() - Complex(1.0, 0.0)) >= 1e-10)
    throw std::invalid_argument("DensityMatrix: trace differs from 1");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= -1e-8)
    throw std::invalid_argument("DensityMatrix: not positive semidefinite");
}

DensityMatrix DensityMatrix::vacuum(int dim) { return fock(0, dim); }

DensityMatrix DensityMatrix::fock(int n, int dim) {
  if (dim < 1 || n < 0 || n >= dim) throw std::invalid_argument("fock: need 0 <= n < dim");
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  m(n, n) = 1.0;
  return DensityMatrix(std::move(m));
}

DensityMatrix DensityMatrix::pure(const StateVector& psi) {
  return DensityMatrix(psi * psi.adjoint());
}

double DensityMatrix::purity() const { return (rho_ * rho_).trace().real(); }

// ---------------------------------------------------------------------------
// StateModel

StateModel StateModel::vacuum() { return {}; }

StateModel StateModel::coherent(Complex alpha, double efficiency) {
  StateModel s;
  s.kind = Kind::coherent;
  s.alpha = alpha;
  s.efficiency = efficiency;
  return s;
}

StateModel StateModel::fock(int n, double efficiency) {
  StateModel s;
  s.kind = Kind::fock;
  s.photons = n;
  s.efficiency = efficiency;
  return s;
}

StateModel StateModel::mixture(std::vector<double> weights, std::vector<StateModel> components,
                               double efficiency) {
  StateModel s;
  s.kind = Kind::mixture;
  s.weights = std::move(weights);
  s.components = std::move(components);
  s.efficiency = efficiency;
  return s;
}

void StateModel::validate() const {
  if (!(efficiency >= 0.0 && efficiency <= 1.0))
    throw std::invalid_argument("state efficiency must lie in [0, 1]");
  switch (kind) {
    case Kind::vacuum:
      break;
    case Kind::coherent:
      if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag()))
        throw std::invalid_argument("coherent amplitude must be finite");
      break;
    case Kind::fock:
      if (photons < 0) throw std::invalid_argument("Fock photon number must be >= 0");
      break;
    case Kind::mixture: {
      if (weights.empty() || weights.size() != components.size())
        throw std::invalid_argument("mixture needs one weight per component");
      double total = 0.0;
      for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("mixture weights must be nonnegative");
        total += w;
      }
      if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mixture weights must sum to 1");
      for (const auto& c : components) c.validate();
      break;
    }
  }
}

StateVector coherent_vector(Complex alpha, int dim) {
  if (dim < 1) throw std::invalid_argument("coherent_vector: dim must be positive");
  StateVector v(dim);
  v(0) = 1.0;
  for (int n = 1; n < dim; ++n) v(n) = v(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  return v / v.norm();
}

StateVector fock_vector(int n, int dim) {
  if (dim < 1 || n < 0 || n >= dim) throw std::invalid_argument("fock_vector: need 0 <= n < dim");
  StateVector v = StateVector::Zero(dim);
  v(n) = 1.0;
  return v;
}

DensityMatrix realize(const StateModel& state, int dim) {
  state.validate();
  if (dim < 1) throw std::invalid_argument("realize: cutoff must be positive");
  auto ideal = [&]() -> DensityMatrix {
    switch (state.kind) {
      case StateModel::Kind::vacuum:
        return DensityMatrix::vacuum(dim);
      case StateModel::Kind::coherent:
        return DensityMatrix::pure(coherent_vector(state.alpha, dim));
      case StateModel::Kind::fock:
        if (state.photons >= dim) throw std::invalid_argument("realize: Fock number exceeds cutoff");
        return DensityMatrix::fock(state.photons, dim);
      case StateModel::Kind::mixture: {
        ComplexMatrix sum = ComplexMatrix::Zero(dim, dim);
        for (std::size_t i = 0; i < state.weights.size(); ++i)
          sum += state.weights[i] * realize(state.components[i], dim).elements();
        sum = 0.5 * (sum + sum.adjoint()).eval();
        sum /= sum.trace().real();
        return DensityMatrix(std::move(sum));
      }
    }
    throw std::invalid_argument("realize: unsupported state");
  }();
  return state.efficiency < 1.0 ? loss_channel(ideal, state.efficiency) : ideal;
}

// ---------------------------------------------------------------------------
// Quadrature statistics

void fock_wavefunctions(double x, std::span<double> out) {
  if (out.empty()) return;
  out[0] = std::pow(kPi, -0.25) * std::exp(-0.5 * x * x);
  if (out.size() > 1) out[1] = std::sqrt(2.0) * x * out[0];
  for (std::size_t n = 1; n + 1 < out.size(); ++n) {
    const double nd = static_cast<double>(n);
    out[n + 1] = x * std::sqrt(2.0 / (nd + 1.0)) * out[n] - std::sqrt(nd / (nd + 1.0)) * out[n - 1];
  }
}

double fock_wavefunction(int n, double x) {
  if (n < 0) throw std::invalid_argument("fock_wavefunction: negative photon number");
  std::vector<double> psi(static_cast<std::size_t>(n) + 1);
  fock_wavefunctions(x, psi);
  return psi.back();
}

double quadrature_pdf(const DensityMatrix& rho, double theta, double x) {
  const int d = rho.dim();
  std::vector<double> psi(d);
  fock_wavefunctions(x, psi);
  const auto& r = rho.elements();
  double p = 0.0;
  for (int m = 0; m < d; ++m) {
    p += r(m, m).real() * psi[m] * psi[m];
    for (int n = m + 1; n < d; ++n)
      p += 2.0 * (r(m, n) * std::polar(1.0, (n - m) * theta)).real() * psi[m] * psi[n];
  }
  return std::max(p, 0.0);
}

DensityMatrix loss_channel(const DensityMatrix& rho, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("loss_channel: eta must lie in [0, 1]");
  if (eta == 1.0) return rho;
  const int d = rho.dim();
  const auto amp = loss_amplitudes(d, eta);
  const auto& r = rho.elements();
  ComplexMatrix out = ComplexMatrix::Zero(d, d);
  for (int m = 0; m < d; ++m)
    for (int n = 0; n < d; ++n) {
      Complex acc = 0.0;
      for (int k = 0; m + k < d && n + k < d; ++k) acc += amp[m][k] * amp[n][k] * r(m + k, n + k);
      out(m, n) = acc;
    }
  out = 0.5 * (out + out.adjoint()).eval();
  return DensityMatrix(std::move(out));
}

// ---------------------------------------------------------------------------
// Sampling

QuadratureSampler::QuadratureSampler(const DensityMatrix& rho) {
  const int d = rho.dim();
  const auto& r = rho.elements();
  const double h = (kGridMax - kGridMin) / static_cast<double>(kGridPoints - 1);

  std::vector<std::vector<Complex>> bands(d, std::vector<Complex>(kGridPoints));
  std::vector<double> psi(d);
  std::vector<double> band_max(d, 0.0);
  for (std::size_t i = 0; i < kGridPoints; ++i) {
    fock_wavefunctions(kGridMin + h * static_cast<double>(i), psi);
    for (int k = 0; k < d; ++k) {
      Complex g = 0.0;
      for (int m = 0; m + k < d; ++m) g += r(m, m + k) * (psi[m] * psi[m + k]);
      bands[k][i] = g;
      band_max[k] = std::max(band_max[k], std::abs(g));
    }
  }
  for (int k = 0; k < d; ++k) {
    if (k > 0 && band_max[k] < 1e-14) continue;
    std::vector<Complex> cum(kGridPoints);
    cum[0] = 0.0;
    for (std::size_t i = 1; i < kGridPoints; ++i) cum[i] = cum[i - 1] + 0.5 * h * (bands[k][i - 1] + bands[k][i]);
    band_cdf_.push_back(std::move(cum));
    band_order_.push_back(k);
  }
}

double QuadratureSampler::cdf_at(std::size_t i, std::span<const Complex> phase_factors) const {
  double c = band_cdf_[0][i].real();
  for (std::size_t b = 1; b < band_cdf_.size(); ++b) c += 2.0 * (phase_factors[b] * band_cdf_[b][i]).real();
  return c;
}

double QuadratureSampler::draw(double theta, double u) const {
  std::vector<Complex> factors(band_order_.size());
  for (std::size_t b = 0; b < band_order_.size(); ++b) factors[b] = std::polar(1.0, band_order_[b] * theta);

  const double total = cdf_at(kGridPoints - 1, factors);
  const double target = u * total;
  std::size_t lo = 0, hi = kGridPoints - 1;  // invariant: cdf(lo) < target <= cdf(hi)
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (cdf_at(mid, factors) < target)
      lo = mid;
    else
      hi = mid;
  }
  const double h = (kGridMax - kGridMin) / static_cast<double>(kGridPoints - 1);
  const double c_lo = cdf_at(lo, factors);
  const double c_hi = cdf_at(hi, factors);
  const double frac = c_hi > c_lo ? std::clamp((target - c_lo) / (c_hi - c_lo), 0.0, 1.0) : 0.5;
  return kGridMin + h * (static_cast<double>(lo) + frac);
}

QuadratureBatch sample_quadratures(const StateModel& state, const PhaseSchedule& phases, std::size_t n,
                                   std::uint64_t seed, int cutoff) {
  if (n == 0) throw std::invalid_argument("sample_quadratures: n must be >= 1");
  if (!phases.fits(n)) throw std::invalid_argument("sample_quadratures: phase schedule length mismatch");
  const QuadratureSampler sampler(realize(state, cutoff));
  Rng rng = make_rng(seed, 0x71756164);
  QuadratureBatch batch;
  batch.values.resize(n);
  batch.phases.emplace(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double theta = phases.at(k);
    (*batch.phases)[k] = theta;
    batch.values[k] = sampler(theta, rng);
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Maximum-likelihood reconstruction

namespace {

struct Cell {
  std::size_t group;
  long bin;
  bool operator<(const Cell& o) const { return group != o.group ? group < o.group : bin < o.bin; }
};

// Integral over [x0, x1] of psi_a psi_b, a, b < dim.
Eigen::MatrixXd band_overlap(double x0, double x1, int dim) {
  using Gauss = boost::math::quadrature::gauss<double, 10>;
  const auto& nodes = Gauss::abscissa();
  const auto& weights = Gauss::weights();
  const double half = 0.5 * (x1 - x0), mid = 0.5 * (x0 + x1);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd psi(dim);
  auto add = [&](double x, double w) {
    fock_wavefunctions(x, std::span<double>(psi.data(), dim));
    acc.noalias() += (w * half) * psi * psi.transpose();
  };
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] == 0.0) {
      add(mid, weights[i]);
    } else {
      add(mid + half * nodes[i], weights[i]);
      add(mid - half * nodes[i], weights[i]);
    }
  }
  return acc;
}

double log_likelihood(const Eigen::VectorXd& counts, const Eigen::VectorXd& probs) {
  double ll = 0.0;
  for (Eigen::Index j = 0; j < counts.size(); ++j) ll += counts(j) * std::log(std::max(probs(j), 1e-300));
  return ll;
}

}  // namespace

MleResult mle_reconstruct(const QuadratureBatch& batch, const MleOptions& options) {
  batch.validate();
  if (!batch.phases) throw std::invalid_argument("mle_reconstruct: batch has no LO phases");
  if (batch.size() == 0) throw std::invalid_argument("mle_reconstruct: empty batch");
  if (options.cutoff < 2) throw std::invalid_argument("mle_reconstruct: cutoff must be >= 2");
  if (!(options.bin_width > 0.0)) throw std::invalid_argument("mle_reconstruct: bin_width must be > 0");
  if (!(options.eta > 0.0 && options.eta <= 1.0)) throw std::invalid_argument("mle_reconstruct: eta must lie in (0, 1]");
  if (options.max_iter < 1 || options.max_phase_groups < 1)
    throw std::invalid_argument("mle_reconstruct: max_iter and max_phase_groups must be positive");

  const int d = options.cutoff;
  const auto& phases = *batch.phases;

  // Phase groups: exact schedule values, or equal bins when there are too many.
  std::vector<double> distinct;
  distinct.reserve(phases.size());
  for (double t : phases) distinct.push_back(wrap_phase(t));
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const bool binned = distinct.size() > options.max_phase_groups;
  const double group_width = 2.0 * kPi / static_cast<double>(options.max_phase_groups);
  std::vector<double> group_phase;
  if (binned) {
    for (std::size_t g = 0; g < options.max_phase_groups; ++g) group_phase.push_back((g + 0.5) * group_width);
  } else {
    group_phase = distinct;
  }
  auto group_of = [&](double theta) -> std::size_t {
    const double t = wrap_phase(theta);
    if (binned) return std::min(static_cast<std::size_t>(t / group_width), options.max_phase_groups - 1);
    return static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), t) - distinct.begin());
  };

  std::map<Cell, double> histogram;
  for (std::size_t k = 0; k < batch.size(); ++k)
    histogram[Cell{group_of(phases[k]), static_cast<long>(std::floor(batch.values[k] / options.bin_width))}] += 1.0;

  const Eigen::Index n_cells = static_cast<Eigen::Index>(histogram.size());
  const Eigen::Index d2 = static_cast<Eigen::Index>(d) * d;
  // Row j holds conj(vec(Pi_j)) (column-major vec) so that p = Re(P vec(rho)).
  ComplexMatrix povm(n_cells, d2);
  Eigen::VectorXd counts(n_cells);
  const auto amp = options.eta < 1.0 ? loss_amplitudes(d, options.eta) : std::vector<std::vector<double>>{};

  Eigen::Index j = 0;
  std::map<long, Eigen::MatrixXd> overlap_cache;
  for (const auto& [cell, count] : histogram) {
    auto it = overlap_cache.find(cell.bin);
    if (it == overlap_cache.end()) {
      const double x0 = static_cast<double>(cell.bin) * options.bin_width;
      it = overlap_cache.emplace(cell.bin, band_overlap(x0, x0 + options.bin_width, d)).first;
    }
    const Eigen::MatrixXd& ov = it->second;
    const double theta = group_phase[cell.group];
    ComplexMatrix pi(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) pi(a, b) = std::polar(ov(a, b), (a - b) * theta);
    if (options.eta < 1.0) {
      ComplexMatrix lossy = ComplexMatrix::Zero(d, d);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
          for (int k = 0; k <= std::min(a, b); ++k) lossy(a, b) += amp[a - k][k] * amp[b - k][k] * pi(a - k, b - k);
      pi = std::move(lossy);
    }
    povm.row(j) = Eigen::Map<const Eigen::VectorXcd>(pi.data(), d2).conjugate().transpose();
    counts(j) = count;
    ++j;
  }

  const double total = counts.sum();
  auto probabilities = [&](const ComplexMatrix& rho) -> Eigen::VectorXd {
    return (povm * Eigen::Map<const Eigen::VectorXcd>(rho.data(), d2)).real();
  };

  ComplexMatrix rho = ComplexMatrix::Identity(d, d) / static_cast<double>(d);
  Eigen::VectorXd probs = probabilities(rho);
  double ll = log_likelihood(counts, probs);
  std::vector<double> history{ll};
  bool converged = false;
  int iter = 0;
  const ComplexMatrix identity = ComplexMatrix::Identity(d, d);

  while (iter < options.max_iter) {
    ++iter;
    Eigen::VectorXd w(n_cells);
    for (Eigen::Index i = 0; i < n_cells; ++i) w(i) = counts(i) / (total * std::max(probs(i), 1e-300));
    const Eigen::VectorXcd r_vec = povm.adjoint() * w.cast<Complex>();
    const ComplexMatrix r = Eigen::Map<const ComplexMatrix>(r_vec.data(), d, d);

    // Full R rho R step; fall back to the diluted operator (I + eps R)/(1 + eps) if the
    // likelihood would drop, which guarantees monotone ascent for small eps.
    double eps = 0.0;
    bool accepted = false;
    ComplexMatrix next;
    Eigen::VectorXd next_probs;
    double next_ll = ll;
    for (int attempt = 0; attempt < 40; ++attempt) {
      const ComplexMatrix step = attempt == 0 ? r : ((identity + eps * r) / (1.0 + eps)).eval();
      next = step * rho * step;
      next = 0.5 * (next + next.adjoint()).eval();
      next /= next.trace().real();
      next_probs = probabilities(next);
      next_ll = log_likelihood(counts, next_probs);
      if (next_ll >= ll) {
        accepted = true;
        break;
      }
      eps = attempt == 0 ? 1.0 : 0.5 * eps;
    }
    if (!accepted) {
      converged = true;
      break;
    }
    const double gain = (next_ll - ll) / std::abs(ll);
    rho = std::move(next);
    probs = std::move(next_probs);
    ll = next_ll;
    history.push_back(ll);
    if (gain < options.tol) {
      converged = true;
      break;
    }
  }

  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  return MleResult{DensityMatrix(std::move(rho)), std::move(history), iter, converged,
                   static_cast<std::size_t>(n_cells)};
}

// ---------------------------------------------------------------------------
// Wigner function, photon statistics, fidelity

double wigner_at(const DensityMatrix& rho, double x, double p) {
  const int d = rho.dim();
  const auto& r = rho.elements();
  const double r2 = x * x + p * p;
  const double gauss = std::exp(-r2) / kPi;
  const Complex beta_conj = std::sqrt(2.0) * Complex(x, -p);
  double w = 0.0;
  for (int n = 0; n < d; ++n) {
    Complex power = 1.0;  // (sqrt(2) (x - i p))^(m - n)
    for (int m = n; m < d; ++m) {
      const double lag = std::assoc_laguerre(static_cast<unsigned>(n), static_cast<unsigned>(m - n), 2.0 * r2);
      const double norm = std::exp(0.5 * (std::lgamma(n + 1.0) - std::lgamma(m + 1.0)));
      const Complex kernel = ((n % 2 == 0) ? 1.0 : -1.0) * norm * power * lag * gauss;
      if (m == n)
        w += r(n, n).real() * kernel.real();
      else
        w += 2.0 * (r(m, n) * kernel).real();
      power *= beta_conj;
    }
  }
  return w;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n < 2) return {lo};
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

WignerGrid wigner(const DensityMatrix& rho, std::vector<double> x_axis, std::vector<double> p_axis) {
  WignerGrid g{std::move(x_axis), std::move(p_axis), {}};
  g.values.resize(g.x_axis.size() * g.p_axis.size());
  for (std::size_t i = 0; i < g.x_axis.size(); ++i)
    for (std::size_t j = 0; j < g.p_axis.size(); ++j) g.values[i * g.p_axis.size() + j] = wigner_at(rho, g.x_axis[i], g.p_axis[j]);
  return g;
}

PhotonStatistics photon_statistics(const DensityMatrix& rho) {
  PhotonStatistics s;
  s.probs.resize(rho.dim());
  for (int n = 0; n < rho.dim(); ++n) s.probs[n] = std::max(rho(n, n).real(), 0.0);
  return s;
}

double fidelity_pure(const DensityMatrix& rho, const StateVector& target) {
  if (target.size() != rho.dim()) throw std::invalid_argument("fidelity_pure: dimension mismatch");
  const double f = (target.adjoint() * rho.elements() * target)(0, 0).real();
  return std::clamp(f, 0.0, 1.0);
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("trace_distance: dimension mismatch");
  const ComplexMatrix diff = a.elements() - b.elements();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(diff, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

// ---------------------------------------------------------------------------
// Calibration offset from the theta / theta + pi symmetry

OffsetEstimate symmetry_offset_check(const QuadratureBatch& batch, double phase_tol, std::size_t min_samples) {
  batch.validate();
  if (!batch.phases) throw std::invalid_argument("symmetry_offset_check: batch has no LO phases");

  struct Moments {
    double n = 0, sum = 0, sum2 = 0;
  };
  std::map<double, Moments> groups;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    auto& g = groups[wrap_phase((*batch.phases)[k])];
    const double x = batch.values[k];
    g.n += 1.0;
    g.sum += x;
    g.sum2 += x * x;
  }
  std::vector<std::pair<double, Moments>> usable;
  for (const auto& [theta, m] : groups)
    if (m.n >= static_cast<double>(min_samples)) usable.emplace_back(theta, m);

  std::vector<bool> used(usable.size(), false);
  double sum_offsets = 0.0, sum_var = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < usable.size(); ++i) {
    if (used[i]) continue;
    std::size_t best = usable.size();
    double best_err = phase_tol;
    for (std::size_t k = i + 1; k < usable.size(); ++k) {
      if (used[k]) continue;
      double err = std::abs(usable[k].first - usable[i].first - kPi);
      if (err < best_err) {
        best_err = err;
        best = k;
      }
    }
    if (best == usable.size()) continue;
    used[i] = used[best] = true;
    double mean[2], var_of_mean[2];
    for (int s = 0; s < 2; ++s) {
      const Moments& m = usable[s == 0 ? i : best].second;
      mean[s] = m.sum / m.n;
      const double var = (m.sum2 - m.n * mean[s] * mean[s]) / (m.n - 1.0);
      var_of_mean[s] = var / m.n;
    }
    sum_offsets += 0.5 * (mean[0] + mean[1]);
    sum_var += 0.25 * (var_of_mean[0] + var_of_mean[1]);
    ++pairs;
  }
  if (pairs == 0) throw std::invalid_argument("symmetry_offset_check: no (theta, theta + pi) phase pairs");
  const double p = static_cast<double>(pairs);
  return OffsetEstimate{sum_offsets / p, std::sqrt(sum_var) / p, pairs};
}

}  // namespace pulsequad
