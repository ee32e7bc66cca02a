// tomography.hpp
//
// Two-qubit state reconstruction from 16-setting count records (linear
// inversion with PSD projection, and Poisson maximum-likelihood over the
// factorized cone rho = T^dag T / Tr(T^dag T)), entanglement measures,
// parametric-bootstrap error bars, and assembly of the four-dimensional
// mixed-state estimate from the six two-dimensional subspaces.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "swapsim/measurement.hpp"
#include "swapsim/state_algebra.hpp"

namespace swapsim {

// ---------------------------------------------------------------------------
// Hermitian matrix square root with small-negative-eigenvalue clipping

namespace detail {

inline Eigen::MatrixXcd sqrtm_psd(const Eigen::MatrixXcd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (h + h.adjoint()));
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::sqrt(std::max(ev(i), 0.0));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

// Uhlmann fidelity Tr(sqrt(sqrt(rho) sigma sqrt(rho)))^2.  For pure sigma
// this reduces to <psi|rho|psi>.
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim() || rho.basis != sigma.basis)
    throw std::invalid_argument("fidelity: dimension/basis mismatch");
  Eigen::MatrixXcd s = detail::sqrtm_psd(rho.mat);
  Eigen::MatrixXcd inner = s * sigma.mat * s;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (inner + inner.adjoint()),
                                                     Eigen::EigenvaluesOnly);
  double tr = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    tr += std::sqrt(std::max(es.eigenvalues()(i), 0.0));
  double f = tr * tr;
  return std::clamp(f, 0.0, 1.0);
}

// Wootters concurrence from the spectrum of R = sqrt(sqrt(rho) rho~ sqrt(rho)),
// rho~ = (sy x sy) rho^* (sy x sy): C = max(0, l1 - l2 - l3 - l4).
inline double concurrence(const DensityMatrix& rho) {
  if (rho.dim() != 4) throw std::invalid_argument("concurrence: need a two-qubit state");
  Eigen::MatrixXcd yy = Eigen::MatrixXcd::Zero(4, 4);
  const Complex i1{0.0, 1.0};
  // sigma_y (x) sigma_y on the ordered product basis
  Eigen::Matrix2cd sy;
  sy << Complex{0, 0}, -i1, i1, Complex{0, 0};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) yy(2 * a + c, 2 * b + d) = sy(a, b) * sy(c, d);
  Eigen::MatrixXcd rho_tilde = yy * rho.mat.conjugate() * yy;
  Eigen::MatrixXcd s = detail::sqrtm_psd(rho.mat);
  Eigen::MatrixXcd a = s * rho_tilde * s;
  // eigenvalues of R are the square roots of the eigenvalues of a
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (a + a.adjoint()),
                                                     Eigen::EigenvaluesOnly);
  std::array<double, 4> lam{};
  for (int k = 0; k < 4; ++k) lam[k] = std::sqrt(std::max(es.eigenvalues()(k), 0.0));
  std::sort(lam.begin(), lam.end(), std::greater<>());
  return std::max(0.0, lam[0] - lam[1] - lam[2] - lam[3]);
}

// Singlet fidelity of the Werner mixture V|Psi-><Psi-| + (1-V) I/4.
inline double fidelity_vs_visibility(double visibility) {
  if (visibility < 0.0 || visibility > 1.0)
    throw std::invalid_argument("fidelity_vs_visibility: visibility out of [0,1]");
  return visibility + (1.0 - visibility) * 0.25;
}

// ---------------------------------------------------------------------------
// reconstruction

enum class ReconstructionMethod { linear, mle };

struct ReconstructionResult {
  DensityMatrix rho;
  ReconstructionMethod method = ReconstructionMethod::linear;
  double log_likelihood = 0.0;
  long iterations = 0;
  bool converged = true;
  std::vector<double> ll_history;  // accepted-step log-likelihoods (mle)
};

namespace detail {

struct TomoProblem {
  std::vector<BasisKet> basis;              // 4-ket subspace basis
  std::vector<Eigen::MatrixXcd> operators;  // 16 projection operators
  Eigen::VectorXd counts;                   // background-corrected counts
  double total_counts = 0.0;
};

inline TomoProblem make_problem(const std::vector<CountRecord>& records) {
  if (records.size() != 16)
    throw std::invalid_argument("reconstruct: expected exactly 16 count records");
  int l1 = records.front().setting.arm_a.l1;
  int l2 = records.front().setting.arm_a.l2;
  std::set<std::pair<int, int>> kinds_seen;
  for (const auto& r : records) {
    if (r.setting.arm_a.l1 != l1 || r.setting.arm_a.l2 != l2 || r.setting.arm_d.l1 != l1 ||
        r.setting.arm_d.l2 != l2)
      throw std::invalid_argument("reconstruct: records span multiple subspaces");
    kinds_seen.insert({static_cast<int>(r.setting.arm_a.kind),
                       static_cast<int>(r.setting.arm_d.kind)});
  }
  if (kinds_seen.size() != 16)
    throw std::invalid_argument("reconstruct: records do not cover the 16 canonical settings");

  TomoProblem pr;
  pr.basis = subspace_basis(l1, l2);
  pr.counts.resize(16);
  for (int i = 0; i < 16; ++i) {
    pr.operators.push_back(setting_operator(records[i].setting, pr.basis));
    pr.counts(i) = subtract_background(records[i]);
    pr.total_counts += pr.counts(i);
  }
  if (pr.total_counts <= 0.0)
    throw std::invalid_argument("reconstruct: total corrected counts are zero");
  return pr;
}

inline Eigen::VectorXd born_probabilities(const TomoProblem& pr, const Eigen::MatrixXcd& rho) {
  Eigen::VectorXd p(16);
  for (int i = 0; i < 16; ++i) p(i) = std::max((rho * pr.operators[i]).trace().real(), 0.0);
  return p;
}

// Poisson log-likelihood with the overall count scale profiled out
// (mu_i = s p_i, s = sum n / sum p); factorial terms dropped.
inline double poisson_loglik(const TomoProblem& pr, const Eigen::MatrixXcd& rho) {
  Eigen::VectorXd p = born_probabilities(pr, rho);
  double psum = p.sum();
  if (psum <= 0.0) return -std::numeric_limits<double>::infinity();
  double scale = pr.total_counts / psum;
  double ll = 0.0;
  for (int i = 0; i < 16; ++i) {
    double mu = scale * std::max(p(i), 1e-300);
    if (pr.counts(i) > 0.0) ll += pr.counts(i) * std::log(mu);
    ll -= mu;
  }
  return ll;
}

inline DensityMatrix clip_to_physical(const std::vector<BasisKet>& basis,
                                      const Eigen::MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (m + m.adjoint()));
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::max(ev(i), 0.0);
  double tr = ev.sum();
  if (tr <= 0.0) throw std::runtime_error("reconstruct: projection collapsed to zero");
  Eigen::MatrixXcd out = es.eigenvectors() * (ev / tr).asDiagonal() * es.eigenvectors().adjoint();
  return DensityMatrix{basis, std::move(out)};
}

}  // namespace detail

// Least-squares inversion of the Born-rule system, then projection to the
// nearest PSD unit-trace matrix by eigenvalue clipping and renormalization.
inline ReconstructionResult reconstruct_linear(const std::vector<CountRecord>& records) {
  detail::TomoProblem pr = detail::make_problem(records);

  // normalization from the four mode-basis settings (their operators sum to
  // the subspace identity)
  double nhat = 0.0;
  for (int i = 0; i < 16; ++i) {
    const auto& s = records[i].setting;
    bool basis_a = s.arm_a.kind == ProjectorKind::ket_l1 || s.arm_a.kind == ProjectorKind::ket_l2;
    bool basis_d = s.arm_d.kind == ProjectorKind::ket_l1 || s.arm_d.kind == ProjectorKind::ket_l2;
    if (basis_a && basis_d) nhat += pr.counts(i);
  }
  if (nhat <= 0.0)
    throw std::invalid_argument("reconstruct_linear: no counts in the normalization settings");

  // real parameterization: x = (diag(4); Re/Im upper off-diagonals(12))
  auto param_index = [](int i, int j) {  // i < j
    static const int off[4][4] = {{0, 0, 1, 2}, {0, 0, 3, 4}, {0, 0, 0, 5}, {0, 0, 0, 0}};
    return 4 + 2 * off[i][j];
  };
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(16, 16);
  Eigen::VectorXd b(16);
  for (int s = 0; s < 16; ++s) {
    const Eigen::MatrixXcd& op = pr.operators[s];
    for (int i = 0; i < 4; ++i) a(s, i) = op(i, i).real();
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        a(s, param_index(i, j)) = 2.0 * op(j, i).real();
        a(s, param_index(i, j) + 1) = -2.0 * op(j, i).imag();
      }
    b(s) = pr.counts(s) / nhat;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 16)
    throw std::logic_error("reconstruct_linear: singular measurement matrix");
  Eigen::VectorXd x = qr.solve(b);

  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(4, 4);
  for (int i = 0; i < 4; ++i) rho(i, i) = x(i);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      rho(i, j) = Complex{x(param_index(i, j)), x(param_index(i, j) + 1)};
      rho(j, i) = std::conj(rho(i, j));
    }
  double tr = rho.trace().real();
  if (std::abs(tr) < 0.1) throw std::runtime_error("reconstruct_linear: degenerate trace");
  rho /= tr;

  ReconstructionResult res;
  res.rho = detail::clip_to_physical(pr.basis, rho);
  res.method = ReconstructionMethod::linear;
  res.log_likelihood = detail::poisson_loglik(pr, res.rho.mat);
  res.iterations = 0;
  res.converged = true;
  return res;
}

namespace detail {

// upper-triangular T <-> 16 real parameters
inline Eigen::MatrixXcd t_from_params(const Eigen::VectorXd& x) {
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(4, 4);
  int k = 0;
  for (int i = 0; i < 4; ++i) t(i, i) = x(k++);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      t(i, j) = Complex{x(k), x(k + 1)};
      k += 2;
    }
  return t;
}

struct MleObjective {
  const TomoProblem* pr;

  // negative profiled log-likelihood and its gradient in the T parameters
  double value(const Eigen::VectorXd& x) const {
    Eigen::MatrixXcd t = t_from_params(x);
    Eigen::MatrixXcd m = t.adjoint() * t;
    double tr = m.trace().real();
    if (tr <= 0.0) return std::numeric_limits<double>::infinity();
    Eigen::MatrixXcd rho = m / tr;
    Eigen::VectorXd p = born_probabilities(*pr, rho);
    double psum = p.sum();
    if (psum <= 0.0) return std::numeric_limits<double>::infinity();
    double ll = 0.0;
    for (int i = 0; i < 16; ++i)
      if (pr->counts(i) > 0.0) ll += pr->counts(i) * std::log(std::max(p(i), 1e-300));
    ll -= pr->total_counts * std::log(psum);
    return -ll;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    Eigen::MatrixXcd t = t_from_params(x);
    Eigen::MatrixXcd m = t.adjoint() * t;
    double tr = m.trace().real();
    Eigen::MatrixXcd rho = m / tr;
    Eigen::VectorXd p = born_probabilities(*pr, rho);
    double psum = std::max(p.sum(), 1e-300);
    // dLL/drho = sum_i (n_i/p_i - N/sum p) Pi_i
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(4, 4);
    for (int i = 0; i < 16; ++i) {
      double w = -pr->total_counts / psum;
      if (pr->counts(i) > 0.0) w += pr->counts(i) / std::max(p(i), 1e-300);
      g += w * pr->operators[i];
    }
    Eigen::MatrixXcd h = (g - (g * rho).trace() * Eigen::MatrixXcd::Identity(4, 4)) / tr;
    Eigen::MatrixXcd ht = h * t.adjoint();  // dLL/dT_{ij} ~ 2 (h T^dag)_{ji}
    Eigen::VectorXd grad(16);
    int k = 0;
    for (int i = 0; i < 4; ++i) grad(k++) = -2.0 * ht(i, i).real();
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        grad(k++) = -2.0 * ht(j, i).real();
        grad(k++) = 2.0 * ht(j, i).imag();
      }
    return grad;
  }
};

}  // namespace detail

// Poisson maximum likelihood over rho = T^dag T / Tr(T^dag T), maximized by
// BFGS with backtracking line search, started from the linear estimate.
// Converged when the per-step improvement drops below 1e-10 or the gradient
// norm below 1e-8; the returned likelihood is never below the linear one.
inline ReconstructionResult reconstruct_mle(const std::vector<CountRecord>& records,
                                            long max_iterations = 100000) {
  detail::TomoProblem pr = detail::make_problem(records);
  ReconstructionResult lin = reconstruct_linear(records);

  // full-rank starting point near the linear estimate
  Eigen::MatrixXcd rho0 =
      0.999 * lin.rho.mat + 0.001 * 0.25 * Eigen::MatrixXcd::Identity(4, 4);
  Eigen::LLT<Eigen::MatrixXcd> llt(rho0);
  Eigen::MatrixXcd t0 = llt.matrixL().adjoint();  // rho0 = T^dag T with T upper
  Eigen::VectorXd x(16);
  {
    int k = 0;
    for (int i = 0; i < 4; ++i) x(k++) = t0(i, i).real();
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        x(k++) = t0(i, j).real();
        x(k++) = t0(i, j).imag();
      }
  }

  detail::MleObjective obj{&pr};
  Eigen::MatrixXd binv = Eigen::MatrixXd::Identity(16, 16);
  double f = obj.value(x);
  Eigen::VectorXd grad = obj.gradient(x);

  ReconstructionResult res;
  res.method = ReconstructionMethod::mle;
  res.ll_history.push_back(-f);
  res.converged = false;

  long it = 0;
  for (; it < max_iterations; ++it) {
    if (grad.norm() < 1e-8) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = -binv * grad;
    if (dir.dot(grad) >= 0.0) {  // not a descent direction; reset
      binv = Eigen::MatrixXd::Identity(16, 16);
      dir = -grad;
    }
    double step = 1.0;
    double slope = grad.dot(dir);
    double f_new = f;
    Eigen::VectorXd x_new = x;
    bool accepted = false;
    while (step > 1e-18) {
      x_new = x + step * dir;
      f_new = obj.value(x_new);
      if (f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.converged = true;  // no further improvement possible
      break;
    }
    Eigen::VectorXd grad_new = obj.gradient(x_new);
    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd yv = grad_new - grad;
    double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(16, 16);
      Eigen::MatrixXd left = eye - (s * yv.transpose()) / sy;
      binv = left * binv * left.transpose() + (s * s.transpose()) / sy;
    }
    double improvement = f - f_new;
    x = x_new;
    f = f_new;
    grad = grad_new;
    res.ll_history.push_back(-f);
    if (improvement < 1e-10) {
      res.converged = true;
      ++it;
      break;
    }
  }
  res.iterations = it;

  Eigen::MatrixXcd t = detail::t_from_params(x);
  Eigen::MatrixXcd m = t.adjoint() * t;
  Eigen::MatrixXcd rho = m / m.trace().real();
  rho = 0.5 * (rho + rho.adjoint());
  res.rho = DensityMatrix{pr.basis, std::move(rho)};
  res.log_likelihood = detail::poisson_loglik(pr, res.rho.mat);

  // the maximizer must not end below the feasible linear estimate
  if (res.log_likelihood < lin.log_likelihood) {
    res.rho = lin.rho;
    res.log_likelihood = lin.log_likelihood;
  }
  return res;
}

inline ReconstructionResult reconstruct(const std::vector<CountRecord>& records,
                                        ReconstructionMethod method) {
  return method == ReconstructionMethod::linear ? reconstruct_linear(records)
                                                : reconstruct_mle(records);
}

// ---------------------------------------------------------------------------
// bootstrap error bars

struct EntanglementReport {
  double fidelity_to_singlet = 0.0;
  double fidelity_err = 0.0;
  double concurrence = 0.0;
  double concurrence_err = 0.0;
  int n_resamples = 0;
};

inline DensityMatrix subspace_singlet(int l1, int l2) {
  int lo = std::min(l1, l2), hi = std::max(l1, l2);
  PureState psi = bell_state(lo, hi, BellSign::minus, Path::A, Path::D);
  std::vector<BasisKet> basis = subspace_basis(lo, hi);
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(4);
  for (int i = 0; i < 4; ++i) v(i) = psi.amplitude(basis[i]);
  return DensityMatrix{std::move(basis), v * v.adjoint()};
}

// Parametric Poisson bootstrap: resample raw counts with the observed
// values as intensities, re-run the reconstruction, report the sample
// standard deviation of fidelity-to-singlet and concurrence.
inline EntanglementReport error_bars(const std::vector<CountRecord>& records,
                                     ReconstructionMethod method, int n_resamples,
                                     std::uint64_t seed) {
  if (n_resamples < 100)
    throw std::invalid_argument("error_bars: need at least 100 resamples");
  double total_raw = 0.0;
  for (const auto& r : records) total_raw += r.fourfold_raw;
  if (total_raw <= 0.0) throw std::invalid_argument("error_bars: zero-count records");

  DensityMatrix target = subspace_singlet(records.front().setting.arm_a.l1,
                                          records.front().setting.arm_a.l2);
  ReconstructionResult base = reconstruct(records, method);

  std::vector<double> fids, concs;
  fids.reserve(n_resamples);
  concs.reserve(n_resamples);
  for (int r = 0; r < n_resamples; ++r) {
    std::vector<CountRecord> resampled = records;
    for (std::size_t i = 0; i < resampled.size(); ++i) {
      std::mt19937_64 rng(mix_seed(mix_seed(seed, r), i));
      resampled[i].fourfold_raw =
          static_cast<double>(poisson_draw(rng, records[i].fourfold_raw));
    }
    try {
      ReconstructionResult rr = reconstruct(resampled, method);
      fids.push_back(fidelity(rr.rho, target));
      concs.push_back(concurrence(rr.rho));
    } catch (const std::invalid_argument&) {
      // a resample with no counts carries no information; skip it
    }
  }
  auto sample_std = [](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (v.size() - 1));
  };

  EntanglementReport rep;
  rep.fidelity_to_singlet = fidelity(base.rho, target);
  rep.concurrence = concurrence(base.rho);
  rep.fidelity_err = sample_std(fids);
  rep.concurrence_err = sample_std(concs);
  rep.n_resamples = static_cast<int>(fids.size());
  return rep;
}

// ---------------------------------------------------------------------------
// four-dimensional assembly

struct Assembled4D {
  DensityMatrix rho;
  std::vector<std::vector<bool>> measured;  // false = unmeasured element
};

inline std::vector<int> four_mode_list() { return {-2, -1, 1, 2}; }

inline std::vector<BasisKet> four_mode_basis() {
  std::vector<BasisKet> basis;
  for (int a : four_mode_list())
    for (int d : four_mode_list()) basis.push_back(ket2(Path::A, a, Path::D, d));
  return basis;
}

inline std::vector<std::pair<int, int>> four_mode_subspaces() {
  std::vector<std::pair<int, int>> out;
  auto modes = four_mode_list();
  for (std::size_t i = 0; i < modes.size(); ++i)
    for (std::size_t j = i + 1; j < modes.size(); ++j) out.push_back({modes[i], modes[j]});
  return out;  // six pairs
}

// Mixture weight of a two-mode subspace: |c_|a||^2 |c_|b||^2 (unnormalized).
inline double subspace_weight(const SpiralSpectrum& spec, int a, int b) {
  int ia = std::abs(a), ib = std::abs(b);
  if (ia >= static_cast<int>(spec.c.size()) || ib >= static_cast<int>(spec.c.size()))
    throw std::invalid_argument("subspace_weight: mode outside spectrum");
  return std::norm(spec.c[ia]) * std::norm(spec.c[ib]);
}

// Weighted embedding of the six reconstructed subspace matrices into the
// 16-dimensional two-photon basis.  Cross-subspace coherences are never
// measured; they stay zero and are flagged in the mask.
inline Assembled4D assemble_4d(const std::map<std::pair<int, int>, DensityMatrix>& subspace_rhos,
                               const SpiralSpectrum& spectrum) {
  auto basis = four_mode_basis();
  auto subspaces = four_mode_subspaces();
  const int dim = static_cast<int>(basis.size());

  double wsum = 0.0;
  for (auto [a, b] : subspaces) wsum += subspace_weight(spectrum, a, b);
  if (wsum <= 0.0) throw std::invalid_argument("assemble_4d: spectrum gives zero total weight");

  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  std::vector<std::vector<bool>> measured(dim, std::vector<bool>(dim, false));

  auto global_index = [&](const BasisKet& k) {
    for (int i = 0; i < dim; ++i)
      if (basis[i] == k) return i;
    throw std::invalid_argument("assemble_4d: subspace ket outside the four-mode basis");
  };

  for (auto [a, b] : subspaces) {
    auto it = subspace_rhos.find({a, b});
    if (it == subspace_rhos.end()) it = subspace_rhos.find({b, a});
    if (it == subspace_rhos.end())
      throw std::invalid_argument("assemble_4d: missing subspace (" + std::to_string(a) + "," +
                                  std::to_string(b) + ")");
    const DensityMatrix& rho_s = it->second;
    if (rho_s.dim() != 4) throw std::invalid_argument("assemble_4d: subspace matrix is not 4x4");
    double w = subspace_weight(spectrum, a, b) / wsum;
    std::vector<int> gi(4);
    for (int i = 0; i < 4; ++i) gi[i] = global_index(rho_s.basis[i]);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        m(gi[i], gi[j]) += w * rho_s.mat(i, j);
        measured[gi[i]][gi[j]] = true;
      }
  }

  double tr = m.trace().real();
  if (tr <= 0.0) throw std::runtime_error("assemble_4d: zero trace");
  m /= tr;
  return Assembled4D{DensityMatrix{basis, std::move(m)}, std::move(measured)};
}

// The analytic swapped mixture on the four-mode basis: equal-singlet
// projectors weighted by the spectrum products, normalized.
inline DensityMatrix swap_mixture_prediction(const SpiralSpectrum& spectrum) {
  auto basis = four_mode_basis();
  const int dim = static_cast<int>(basis.size());
  auto subspaces = four_mode_subspaces();
  double wsum = 0.0;
  for (auto [a, b] : subspaces) wsum += subspace_weight(spectrum, a, b);
  if (wsum <= 0.0)
    throw std::invalid_argument("swap_mixture_prediction: spectrum gives zero weight");

  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  auto global_index = [&](const BasisKet& k) {
    for (int i = 0; i < dim; ++i)
      if (basis[i] == k) return i;
    throw std::logic_error("swap_mixture_prediction: ket lookup failed");
  };
  for (auto [a, b] : subspaces) {
    PureState psi = bell_state(a, b, BellSign::minus, Path::A, Path::D);
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim);
    for (const auto& [k, amp] : psi.terms) v(global_index(k)) = amp;
    m += (subspace_weight(spectrum, a, b) / wsum) * (v * v.adjoint());
  }
  return DensityMatrix{basis, std::move(m)};
}

// Fidelity evaluated on the target's support: components of rho outside
// the kets carrying target weight (unmeasured coherences, residual noise
// weight on the double-occupation diagonal) are excluded and the retained
// block renormalized before the Uhlmann fidelity.
inline double fidelity_on_support(const DensityMatrix& rho, const DensityMatrix& target) {
  if (rho.basis != target.basis)
    throw std::invalid_argument("fidelity_on_support: basis mismatch");
  std::vector<int> keep;
  for (Eigen::Index i = 0; i < target.dim(); ++i)
    if (target.mat(i, i).real() > 1e-14) keep.push_back(static_cast<int>(i));
  if (keep.empty()) throw std::invalid_argument("fidelity_on_support: empty target support");

  const int n = static_cast<int>(keep.size());
  Eigen::MatrixXcd a(n, n), b(n, n);
  std::vector<BasisKet> sub_basis;
  for (int i = 0; i < n; ++i) {
    sub_basis.push_back(rho.basis[keep[i]]);
    for (int j = 0; j < n; ++j) {
      a(i, j) = rho.mat(keep[i], keep[j]);
      b(i, j) = target.mat(keep[i], keep[j]);
    }
  }
  double tra = a.trace().real();
  if (tra <= 0.0) throw std::invalid_argument("fidelity_on_support: rho has no support weight");
  a /= tra;
  b /= b.trace().real();
  return fidelity(DensityMatrix{sub_basis, std::move(a)}, DensityMatrix{sub_basis, std::move(b)});
}

// ---------------------------------------------------------------------------
// density-matrix JSON import/export (round-trips bit-exactly)

inline nlohmann::ordered_json density_matrix_to_json(const DensityMatrix& rho,
                                                     const std::vector<std::vector<bool>>* mask =
                                                         nullptr) {
  nlohmann::ordered_json j;
  j["basis"] = nlohmann::ordered_json::array();
  for (const auto& k : rho.basis) {
    nlohmann::ordered_json ket = nlohmann::ordered_json::array();
    for (const auto& [p, l] : k.photons)
      ket.push_back({std::string(1, path_letter(p)), l});
    j["basis"].push_back(ket);
  }
  auto matrix_part = [&](auto getter) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < rho.dim(); ++i) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (Eigen::Index jj = 0; jj < rho.dim(); ++jj) row.push_back(getter(i, jj));
      rows.push_back(row);
    }
    return rows;
  };
  j["real"] = matrix_part([&](auto i, auto jj) { return rho.mat(i, jj).real(); });
  j["imag"] = matrix_part([&](auto i, auto jj) { return rho.mat(i, jj).imag(); });
  if (mask) {
    // mask holds measured flags; the file records the unmeasured elements
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : *mask) {
      nlohmann::ordered_json r = nlohmann::ordered_json::array();
      for (bool v : row) r.push_back(v ? 0 : 1);
      rows.push_back(r);
    }
    j["unmeasured"] = rows;
  }
  return j;
}

inline DensityMatrix density_matrix_from_json(const nlohmann::json& j,
                                              std::vector<std::vector<bool>>* mask_out = nullptr) {
  std::vector<BasisKet> basis;
  for (const auto& ket : j.at("basis")) {
    std::vector<std::pair<Path, int>> ph;
    for (const auto& entry : ket)
      ph.emplace_back(path_from_letter(entry.at(0).get<std::string>().at(0)),
                      entry.at(1).get<int>());
    basis.emplace_back(std::move(ph));
  }
  const auto& re = j.at("real");
  const auto& im = j.at("imag");
  const int n = static_cast<int>(basis.size());
  Eigen::MatrixXcd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int jj = 0; jj < n; ++jj)
      m(i, jj) = Complex{re.at(i).at(jj).get<double>(), im.at(i).at(jj).get<double>()};
  if (mask_out && j.contains("unmeasured")) {
    mask_out->clear();
    for (const auto& row : j.at("unmeasured")) {
      std::vector<bool> r;
      for (const auto& v : row) r.push_back(v.get<int>() == 0);  // back to measured flags
      mask_out->push_back(std::move(r));
    }
  }
  return DensityMatrix{std::move(basis), std::move(m)};
}

}  // namespace swapsim
