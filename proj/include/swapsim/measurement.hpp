// measurement.hpp
//
// Detection-chain simulation: SLM hologram projector settings, Born-rule
// probabilities, the Werner-type visibility noise model, deterministic
// Poisson count sampling, the four-fold background-rate model with
// subtraction, and the Hong-Ou-Mandel dip model and fitter.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "swapsim/state_algebra.hpp"

namespace swapsim {

// ---------------------------------------------------------------------------
// deterministic RNG helpers

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 step over seed ^ golden-ratio-scrambled stream index
  std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double uniform01(std::mt19937_64& rng) {
  return (rng() >> 11) * 0x1.0p-53;  // 53-bit mantissa, engine-portable
}

// Exact Poisson sampler (chunked Knuth); deterministic for a given engine
// state, unlike std::poisson_distribution which is implementation-defined.
inline std::uint64_t poisson_draw(std::mt19937_64& rng, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("poisson_draw: negative rate");
  std::uint64_t total = 0;
  while (lambda > 30.0) {
    double chunk = 30.0;
    double limit = std::exp(-chunk);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform01(rng);
    } while (p > limit);
    total += k - 1;
    lambda -= chunk;
  }
  if (lambda > 0.0) {
    double limit = std::exp(-lambda);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform01(rng);
    } while (p > limit);
    total += k - 1;
  }
  return total;
}

// ---------------------------------------------------------------------------
// tomography projectors and settings

// The four hologram states per arm, on an ordered two-mode subspace (l1, l2):
//   |l1>, |l2>, (|l1>+|l2>)/sqrt(2), (|l1>+i|l2>)/sqrt(2)
enum class ProjectorKind : int { ket_l1 = 0, ket_l2 = 1, superpos = 2, superpos_i = 3 };

inline const char* projector_kind_token(ProjectorKind k) {
  switch (k) {
    case ProjectorKind::ket_l1: return "l1";
    case ProjectorKind::ket_l2: return "l2";
    case ProjectorKind::superpos: return "p";
    case ProjectorKind::superpos_i: return "pi";
  }
  throw std::invalid_argument("projector_kind_token: bad kind");
}

inline ProjectorKind projector_kind_from_token(const std::string& t) {
  if (t == "l1") return ProjectorKind::ket_l1;
  if (t == "l2") return ProjectorKind::ket_l2;
  if (t == "p") return ProjectorKind::superpos;
  if (t == "pi") return ProjectorKind::superpos_i;
  throw std::invalid_argument("projector_kind_from_token: bad token '" + t + "'");
}

struct ProjectorSpec {
  int l1 = 0, l2 = 0;  // subspace modes, in the order the settings were generated
  ProjectorKind kind = ProjectorKind::ket_l1;

  // amplitudes on (|l1>, |l2>)
  std::array<Complex, 2> amplitudes() const {
    const double r = 1.0 / std::sqrt(2.0);
    switch (kind) {
      case ProjectorKind::ket_l1: return {Complex{1, 0}, Complex{0, 0}};
      case ProjectorKind::ket_l2: return {Complex{0, 0}, Complex{1, 0}};
      case ProjectorKind::superpos: return {Complex{r, 0}, Complex{r, 0}};
      case ProjectorKind::superpos_i: return {Complex{r, 0}, Complex{0, r}};
    }
    throw std::invalid_argument("ProjectorSpec::amplitudes: bad kind");
  }

  // amplitude on a given mode
  Complex amplitude_on(int mode) const {
    auto a = amplitudes();
    if (mode == l1) return a[0];
    if (mode == l2) return a[1];
    return Complex{0, 0};
  }
};

struct MeasurementSetting {
  ProjectorSpec arm_a;
  ProjectorSpec arm_d;
  int index = 0;  // 0..15 in generation order

  std::string id() const {
    return std::string(projector_kind_token(arm_a.kind)) + "." +
           projector_kind_token(arm_d.kind);
  }
};

inline std::vector<MeasurementSetting> tomography_settings(int l1, int l2) {
  if (l1 == l2) throw std::invalid_argument("tomography_settings: degenerate subspace");
  std::vector<MeasurementSetting> out;
  out.reserve(16);
  int idx = 0;
  for (int a = 0; a < 4; ++a)
    for (int d = 0; d < 4; ++d) {
      MeasurementSetting s;
      s.arm_a = ProjectorSpec{l1, l2, static_cast<ProjectorKind>(a)};
      s.arm_d = ProjectorSpec{l1, l2, static_cast<ProjectorKind>(d)};
      s.index = idx++;
      out.push_back(s);
    }
  return out;
}

// The canonical two-photon subspace basis |l_lo l_lo>, |l_lo l_hi>,
// |l_hi l_lo>, |l_hi l_hi> with numerically sorted modes (first label is
// the photon in A, second in D).
inline std::vector<BasisKet> subspace_basis(int la, int lb) {
  if (la == lb) throw std::invalid_argument("subspace_basis: degenerate subspace");
  int lo = std::min(la, lb), hi = std::max(la, lb);
  return {ket2(Path::A, lo, Path::D, lo), ket2(Path::A, lo, Path::D, hi),
          ket2(Path::A, hi, Path::D, lo), ket2(Path::A, hi, Path::D, hi)};
}

// Projection operator |a><a| (x) |d><d| of a setting, expressed on the
// basis kets of a density matrix.  Basis kets must be two-photon A,D kets;
// kets outside the setting's subspace contribute zero rows.
inline Eigen::MatrixXcd setting_operator(const MeasurementSetting& s,
                                         const std::vector<BasisKet>& basis) {
  Eigen::VectorXcd v(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const BasisKet& k = basis[i];
    if (k.photon_count() != 2 || k.count_in(Path::A) != 1 || k.count_in(Path::D) != 1)
      throw std::invalid_argument("setting_operator: basis ket is not a two-photon A,D ket");
    v(i) = s.arm_a.amplitude_on(k.mode_in(Path::A)) * s.arm_d.amplitude_on(k.mode_in(Path::D));
  }
  return v * v.adjoint();
}

inline double ideal_probability(const DensityMatrix& rho, const MeasurementSetting& s) {
  Eigen::MatrixXcd op = setting_operator(s, rho.basis);
  double p = (rho.mat * op).trace().real();
  if (p < 0.0 && p > -1e-12) p = 0.0;
  if (p < 0.0 || p > 1.0 + 1e-12)
    throw std::logic_error("ideal_probability: probability out of range");
  return std::min(p, 1.0);
}

// Werner-type mixture V * rho + (1 - V) * I/4 on a two-qubit subspace.
inline DensityMatrix apply_visibility_noise(const DensityMatrix& rho_pure, double visibility) {
  if (visibility < 0.0 || visibility > 1.0)
    throw std::invalid_argument("apply_visibility_noise: visibility out of [0,1]");
  if (rho_pure.dim() != 4)
    throw std::invalid_argument("apply_visibility_noise: expected a 4-dimensional state");
  Eigen::MatrixXcd m = visibility * rho_pure.mat +
                       (1.0 - visibility) * 0.25 * Eigen::MatrixXcd::Identity(4, 4);
  return DensityMatrix{rho_pure.basis, std::move(m)};
}

// ---------------------------------------------------------------------------
// count rates and records

struct RatesConfig {
  double singles_a_hz = 0.0, singles_b_hz = 0.0, singles_c_hz = 0.0, singles_d_hz = 0.0;
  double pair_ab_hz = 0.0, pair_cd_hz = 0.0, pair_ac_hz = 0.0, pair_bd_hz = 0.0;
  double rep_rate_hz = 8.0e7;
};

// (C_AB C_CD + C_AC C_BD) / R
inline double genuine_fourfold_rate(double c_ab, double c_cd, double c_ac, double c_bd,
                                    double rep_rate) {
  if (rep_rate <= 0.0) throw std::invalid_argument("genuine_fourfold_rate: rep rate <= 0");
  return (c_ab * c_cd + c_ac * c_bd) / rep_rate;
}

// (C_AB S_C S_D + S_A S_B C_CD + C_AC S_B S_D + S_A S_C C_BD)/R^2
//   + S_A S_B S_C S_D / R^3
inline double background_rate(const RatesConfig& r) {
  if (r.rep_rate_hz <= 0.0) throw std::invalid_argument("background_rate: rep rate <= 0");
  const double R = r.rep_rate_hz;
  double two_plus_two = r.pair_ab_hz * r.singles_c_hz * r.singles_d_hz +
                        r.singles_a_hz * r.singles_b_hz * r.pair_cd_hz +
                        r.pair_ac_hz * r.singles_b_hz * r.singles_d_hz +
                        r.singles_a_hz * r.singles_c_hz * r.pair_bd_hz;
  double all_singles = r.singles_a_hz * r.singles_b_hz * r.singles_c_hz * r.singles_d_hz;
  return two_plus_two / (R * R) + all_singles / (R * R * R);
}

struct CountRecord {
  MeasurementSetting setting;
  double fourfold_raw = 0.0;  // counts (integral when sampled)
  double duration_s = 0.0;
  RatesConfig rates;
};

inline double subtract_background(const CountRecord& rec) {
  if (rec.duration_s <= 0.0) throw std::invalid_argument("subtract_background: duration <= 0");
  double expected = rec.duration_s * background_rate(rec.rates);
  return std::max(0.0, rec.fourfold_raw - expected);
}

struct NoiseModel {
  double visibility = 1.0;
  RatesConfig background;
  std::uint64_t seed = 0;
};

// Simulate one tomography run: per setting, fourfold_raw ~ Poisson of
// duration * (peak_rate * Born probability + background rate).  The Werner
// visibility mixture is applied to rho first.  Each setting draws from its
// own seed stream, so records are independent of evaluation order.
inline std::vector<CountRecord> simulate_counts(const DensityMatrix& rho,
                                                const std::vector<MeasurementSetting>& settings,
                                                double peak_fourfold_rate_hz, double duration_s,
                                                const NoiseModel& noise) {
  if (peak_fourfold_rate_hz <= 0.0)
    throw std::invalid_argument("simulate_counts: peak rate must be > 0");
  if (duration_s <= 0.0) throw std::invalid_argument("simulate_counts: duration must be > 0");
  DensityMatrix noisy = apply_visibility_noise(rho, noise.visibility);
  double bg = background_rate(noise.background);
  std::vector<CountRecord> out;
  out.reserve(settings.size());
  for (const auto& s : settings) {
    double p = ideal_probability(noisy, s);
    double lambda = duration_s * (peak_fourfold_rate_hz * p + bg);
    std::mt19937_64 rng(mix_seed(noise.seed, static_cast<std::uint64_t>(s.index)));
    CountRecord rec;
    rec.setting = s;
    rec.fourfold_raw = static_cast<double>(poisson_draw(rng, lambda));
    rec.duration_s = duration_s;
    rec.rates = noise.background;
    out.push_back(rec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// record import/export: one line per record, bit-exact round-trip

namespace detail {

inline std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline std::string count_record_line(const CountRecord& r) {
  std::string s;
  s += std::to_string(r.setting.index);
  s += ' ';
  s += projector_kind_token(r.setting.arm_a.kind);
  s += ' ';
  s += projector_kind_token(r.setting.arm_d.kind);
  s += ' ';
  s += std::to_string(r.setting.arm_a.l1);
  s += ' ';
  s += std::to_string(r.setting.arm_a.l2);
  for (double v : {r.fourfold_raw, r.duration_s, r.rates.singles_a_hz, r.rates.singles_b_hz,
                   r.rates.singles_c_hz, r.rates.singles_d_hz, r.rates.pair_ab_hz,
                   r.rates.pair_cd_hz, r.rates.pair_ac_hz, r.rates.pair_bd_hz,
                   r.rates.rep_rate_hz}) {
    s += ' ';
    s += detail::g17(v);
  }
  return s;
}

inline CountRecord count_record_from_line(const std::string& line) {
  std::istringstream in(line);
  CountRecord r;
  std::string ka, kd;
  int l1 = 0, l2 = 0;
  if (!(in >> r.setting.index >> ka >> kd >> l1 >> l2))
    throw std::invalid_argument("count_record_from_line: malformed line '" + line + "'");
  r.setting.arm_a = ProjectorSpec{l1, l2, projector_kind_from_token(ka)};
  r.setting.arm_d = ProjectorSpec{l1, l2, projector_kind_from_token(kd)};
  if (!(in >> r.fourfold_raw >> r.duration_s >> r.rates.singles_a_hz >> r.rates.singles_b_hz >>
        r.rates.singles_c_hz >> r.rates.singles_d_hz >> r.rates.pair_ab_hz >> r.rates.pair_cd_hz >>
        r.rates.pair_ac_hz >> r.rates.pair_bd_hz >> r.rates.rep_rate_hz))
    throw std::invalid_argument("count_record_from_line: malformed line '" + line + "'");
  return r;
}

inline void write_count_records(std::ostream& os, const std::vector<CountRecord>& recs) {
  for (const auto& r : recs) os << count_record_line(r) << '\n';
}

inline std::vector<CountRecord> read_count_records(std::istream& is) {
  std::vector<CountRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    out.push_back(count_record_from_line(line));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hong-Ou-Mandel dip

// baseline * (1 - V * exp(-(x - center)^2 / (2 width^2)))
inline double hom_dip_model(double position_um, double center_um, double width_um,
                            double visibility, double baseline_rate_hz) {
  if (width_um <= 0.0) throw std::invalid_argument("hom_dip_model: width must be > 0");
  if (visibility < 0.0 || visibility > 1.0)
    throw std::invalid_argument("hom_dip_model: visibility out of [0,1]");
  double z = (position_um - center_um) / width_um;
  return baseline_rate_hz * (1.0 - visibility * std::exp(-0.5 * z * z));
}

struct HomFit {
  double center_um = 0.0, width_um = 0.0, visibility = 0.0, baseline_rate_hz = 0.0;
  double center_err = 0.0, width_err = 0.0, visibility_err = 0.0, baseline_err = 0.0;
  bool converged = false;
  int iterations = 0;
  double residual_sum_sq = 0.0;
};

namespace detail {

// Levenberg-Marquardt on theta = (baseline_counts, V, center, width) for
// counts_i ~ baseline_counts * (1 - V exp(-(x_i-c)^2/(2 w^2))).
inline bool hom_lm(const std::vector<double>& x, const std::vector<double>& y,
                   Eigen::Vector4d& theta, int& iters, double& ssq) {
  const int n = static_cast<int>(x.size());
  auto model = [&](const Eigen::Vector4d& t, int i) {
    double z = (x[i] - t(2)) / t(3);
    return t(0) * (1.0 - t(1) * std::exp(-0.5 * z * z));
  };
  auto sum_sq = [&](const Eigen::Vector4d& t) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      double r = y[i] - model(t, i);
      s += r * r;
    }
    return s;
  };

  double lambda = 1e-3;
  ssq = sum_sq(theta);
  iters = 0;
  for (int it = 0; it < 500; ++it) {
    ++iters;
    Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
    Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
    for (int i = 0; i < n; ++i) {
      double z = (x[i] - theta(2)) / theta(3);
      double g = std::exp(-0.5 * z * z);
      Eigen::Vector4d J;
      J(0) = 1.0 - theta(1) * g;                       // d/d baseline
      J(1) = -theta(0) * g;                            // d/d V
      J(2) = -theta(0) * theta(1) * g * z / theta(3);  // d/d center
      J(3) = -theta(0) * theta(1) * g * z * z / theta(3);  // d/d width
      double r = y[i] - model(theta, i);
      jtj += J * J.transpose();
      jtr += J * r;
    }
    Eigen::Matrix4d damped = jtj;
    for (int k = 0; k < 4; ++k) damped(k, k) += lambda * std::max(jtj(k, k), 1e-12);
    Eigen::Vector4d step = damped.ldlt().solve(jtr);
    Eigen::Vector4d cand = theta + step;
    cand(3) = std::abs(cand(3));  // model is even in the width
    if (cand(3) < 1e-9) cand(3) = 1e-9;
    double cand_ssq = sum_sq(cand);
    if (cand_ssq < ssq) {
      double rel = (ssq - cand_ssq) / std::max(ssq, 1e-300);
      theta = cand;
      ssq = cand_ssq;
      lambda = std::max(lambda * 0.3, 1e-12);
      if (rel < 1e-14 && step.norm() < 1e-12 * (1.0 + theta.norm())) return true;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) return ssq < 1e-20 || it > 20;
    }
  }
  return false;
}

}  // namespace detail

// Least-squares fit of hom_dip_model to a scan of fourfold counts.  The
// counts axis is fitted in recorded counts; rates are reported by dividing
// through the acquisition duration.
inline HomFit fit_hom_dip(const std::vector<double>& positions_um,
                          const std::vector<double>& counts, double duration_s) {
  const int n = static_cast<int>(positions_um.size());
  if (n < 5 || counts.size() != positions_um.size())
    throw std::invalid_argument("fit_hom_dip: need at least 5 scan points");
  if (duration_s <= 0.0) throw std::invalid_argument("fit_hom_dip: duration must be > 0");

  // initial guesses: baseline from the upper half of the counts, dip
  // position from the minimum
  std::vector<double> sorted = counts;
  std::sort(sorted.begin(), sorted.end());
  double base0 = 0.0;
  for (int i = n / 2; i < n; ++i) base0 += sorted[i];
  base0 /= (n - n / 2);
  if (base0 <= 0.0) base0 = 1.0;
  int imin = 0;
  for (int i = 1; i < n; ++i)
    if (counts[i] < counts[imin]) imin = i;
  double v0 = std::clamp(1.0 - counts[imin] / base0, 0.05, 0.999);
  double span = *std::max_element(positions_um.begin(), positions_um.end()) -
                *std::min_element(positions_um.begin(), positions_um.end());
  if (span <= 0.0) throw std::invalid_argument("fit_hom_dip: degenerate scan positions");

  Eigen::Vector4d best = Eigen::Vector4d::Zero();
  double best_ssq = std::numeric_limits<double>::infinity();
  int best_iters = 0;
  bool any = false;
  for (double wfrac : {0.03, 0.08, 0.2, 0.4}) {
    Eigen::Vector4d theta(base0, v0, positions_um[imin], wfrac * span);
    int iters = 0;
    double ssq = 0.0;
    bool ok = detail::hom_lm(positions_um, counts, theta, iters, ssq);
    if (ok && ssq < best_ssq) {
      best = theta;
      best_ssq = ssq;
      best_iters = iters;
      any = true;
    }
  }
  if (!any) {
    HomFit fail;
    fail.converged = false;
    return fail;
  }

  // parameter covariance from the Jacobian at the optimum
  Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
  for (int i = 0; i < n; ++i) {
    double z = (positions_um[i] - best(2)) / best(3);
    double g = std::exp(-0.5 * z * z);
    Eigen::Vector4d J;
    J(0) = 1.0 - best(1) * g;
    J(1) = -best(0) * g;
    J(2) = -best(0) * best(1) * g * z / best(3);
    J(3) = -best(0) * best(1) * g * z * z / best(3);
    jtj += J * J.transpose();
  }
  double sigma2 = best_ssq / std::max(n - 4, 1);
  Eigen::Matrix4d cov = sigma2 * jtj.inverse();

  HomFit fit;
  fit.baseline_rate_hz = best(0) / duration_s;
  fit.visibility = std::clamp(best(1), 0.0, 1.0);
  fit.center_um = best(2);
  fit.width_um = best(3);
  fit.baseline_err = std::sqrt(std::max(cov(0, 0), 0.0)) / duration_s;
  fit.visibility_err = std::sqrt(std::max(cov(1, 1), 0.0));
  fit.center_err = std::sqrt(std::max(cov(2, 2), 0.0));
  fit.width_err = std::sqrt(std::max(cov(3, 3), 0.0));
  fit.converged = true;
  fit.iterations = best_iters;
  fit.residual_sum_sq = best_ssq;
  return fit;
}

// Synthesize a dip scan with Poisson statistics (noiseless for seed-free use
// pass the expected counts straight to fit_hom_dip instead).
inline std::vector<double> simulate_hom_scan(const std::vector<double>& positions_um,
                                             double center_um, double width_um, double visibility,
                                             double baseline_rate_hz, double duration_s,
                                             std::uint64_t seed) {
  std::vector<double> counts;
  counts.reserve(positions_um.size());
  for (std::size_t i = 0; i < positions_um.size(); ++i) {
    double rate = hom_dip_model(positions_um[i], center_um, width_um, visibility, baseline_rate_hz);
    std::mt19937_64 rng(mix_seed(seed, i));
    counts.push_back(static_cast<double>(poisson_draw(rng, rate * duration_s)));
  }
  return counts;
}

}  // namespace swapsim
