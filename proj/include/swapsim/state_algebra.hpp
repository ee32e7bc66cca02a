// state_algebra.hpp
//
// Sparse multi-photon state algebra for orbital-angular-momentum (OAM)
// photons distributed over four experiment paths A..D.  A basis ket is the
// multiset of (path, OAM) photon labels; pure states are sparse complex
// superpositions of such kets; density matrices carry an explicit ordered
// ket basis.  All operations are pure functions of their inputs.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace swapsim {

using Complex = std::complex<double>;

// tolerances shared across the library
inline constexpr double kNormTol = 1e-12;   // state normalization
inline constexpr double kHermTol = 1e-10;   // Hermiticity / trace checks
inline constexpr double kPsdTol = 1e-10;    // eigenvalue floor for PSD checks
inline constexpr double kAmpPrune = 1e-15;  // drop amplitudes below this

enum class Path : std::uint8_t { A = 0, B = 1, C = 2, D = 3 };

inline char path_letter(Path p) {
  switch (p) {
    case Path::A: return 'A';
    case Path::B: return 'B';
    case Path::C: return 'C';
    case Path::D: return 'D';
  }
  throw std::invalid_argument("path_letter: bad path");
}

inline Path path_from_letter(char c) {
  switch (c) {
    case 'A': return Path::A;
    case 'B': return Path::B;
    case 'C': return Path::C;
    case 'D': return Path::D;
  }
  throw std::invalid_argument(std::string("path_from_letter: bad letter '") + c + "'");
}

// One photon per entry: (path, OAM index).  Kept sorted by (path, mode) so
// equal kets compare equal; two photons may share a path transiently during
// beamsplitter expansion (then the pair forms a per-path multiset).
struct BasisKet {
  std::vector<std::pair<Path, int>> photons;

  BasisKet() = default;
  BasisKet(std::initializer_list<std::pair<Path, int>> ph) : photons(ph) { canonicalize(); }
  explicit BasisKet(std::vector<std::pair<Path, int>> ph) : photons(std::move(ph)) {
    canonicalize();
  }

  void canonicalize() { std::sort(photons.begin(), photons.end()); }

  int photon_count() const { return static_cast<int>(photons.size()); }

  int count_in(Path p) const {
    int n = 0;
    for (const auto& [q, l] : photons) n += (q == p);
    return n;
  }

  std::set<Path> occupied_paths() const {
    std::set<Path> out;
    for (const auto& [q, l] : photons) out.insert(q);
    return out;
  }

  bool bunched() const {
    for (std::size_t i = 1; i < photons.size(); ++i)
      if (photons[i].first == photons[i - 1].first) return true;
    return false;
  }

  // mode of the single photon in path p; throws unless exactly one is there
  int mode_in(Path p) const {
    int found = 0, mode = 0;
    for (const auto& [q, l] : photons)
      if (q == p) { ++found; mode = l; }
    if (found != 1) throw std::logic_error("BasisKet::mode_in: path not singly occupied");
    return mode;
  }

  // split into (photons on `paths`, remaining photons)
  std::pair<BasisKet, BasisKet> split(const std::set<Path>& paths) const {
    BasisKet in, out;
    for (const auto& ph : photons)
      (paths.count(ph.first) ? in : out).photons.push_back(ph);
    return {in, out};  // already sorted: subsequences of a sorted vector
  }

  int total_oam() const {
    int s = 0;
    for (const auto& [q, l] : photons) s += l;
    return s;
  }

  std::string str() const {
    std::string s = "|";
    for (std::size_t i = 0; i < photons.size(); ++i) {
      if (i) s += ',';
      s += path_letter(photons[i].first);
      s += ':';
      s += std::to_string(photons[i].second);
    }
    return s + ">";
  }

  auto operator<=>(const BasisKet&) const = default;
};

inline BasisKet ket2(Path p, int lp, Path q, int lq) { return BasisKet{{p, lp}, {q, lq}}; }

// Sparse superposition over basis kets.  Terms with amplitude below
// kAmpPrune are removed; every ket must carry the same photon number
// (path patterns may differ mid-beamsplitter).
struct PureState {
  std::map<BasisKet, Complex> terms;

  PureState() = default;
  explicit PureState(std::map<BasisKet, Complex> t) : terms(std::move(t)) { prune(); }

  void add(const BasisKet& k, Complex a) {
    auto it = terms.find(k);
    if (it == terms.end())
      terms.emplace(k, a);
    else
      it->second += a;
  }

  void prune() {
    for (auto it = terms.begin(); it != terms.end();)
      it = (std::abs(it->second) < kAmpPrune) ? terms.erase(it) : std::next(it);
  }

  bool empty() const { return terms.empty(); }

  Complex amplitude(const BasisKet& k) const {
    auto it = terms.find(k);
    return it == terms.end() ? Complex{0.0, 0.0} : it->second;
  }

  double norm_sq() const {
    double s = 0.0;
    for (const auto& [k, a] : terms) s += std::norm(a);
    return s;
  }

  double norm() const { return std::sqrt(norm_sq()); }

  int photon_count() const {
    if (terms.empty()) throw std::invalid_argument("PureState::photon_count: empty state");
    int n = terms.begin()->first.photon_count();
    for (const auto& [k, a] : terms)
      if (k.photon_count() != n)
        throw std::logic_error("PureState: non-uniform photon count");
    return n;
  }

  std::set<Path> occupied_paths() const {
    std::set<Path> out;
    for (const auto& [k, a] : terms)
      for (const auto& [q, l] : k.photons) out.insert(q);
    return out;
  }

  PureState& normalize() {
    double n = norm();
    if (n < kAmpPrune) throw std::invalid_argument("PureState::normalize: zero state");
    for (auto& [k, a] : terms) a /= n;
    return *this;
  }

  PureState normalized() const {
    PureState s = *this;
    s.normalize();
    return s;
  }

  PureState& operator*=(Complex c) {
    for (auto& [k, a] : terms) a *= c;
    prune();
    return *this;
  }

  PureState& operator+=(const PureState& o) {
    for (const auto& [k, a] : o.terms) add(k, a);
    prune();
    return *this;
  }
};

inline PureState operator*(Complex c, PureState s) {
  s *= c;
  return s;
}

inline PureState operator+(PureState a, const PureState& b) {
  a += b;
  return a;
}

enum class BellSign { plus, minus };

// (|l>|k> +/- |k>|l>)/sqrt(2) on the two given paths
inline PureState bell_state(int ell, int ell2, BellSign sign, Path p, Path q) {
  if (p == q) throw std::invalid_argument("bell_state: paths must be distinct");
  if (sign == BellSign::minus && ell == ell2)
    throw std::invalid_argument("bell_state: antisymmetric state with equal modes vanishes");
  const double r = 1.0 / std::sqrt(2.0);
  PureState s;
  s.add(ket2(p, ell, q, ell2), Complex{r, 0.0});
  s.add(ket2(p, ell2, q, ell), Complex{sign == BellSign::plus ? r : -r, 0.0});
  s.prune();
  return s.normalize();
}

// SPDC spiral spectrum: c[l] is the pair amplitude for the (+l,-l) term,
// c[0] the amplitude of the Gaussian |0>|0> term.
struct SpiralSpectrum {
  std::vector<Complex> c;  // index l = 0..N

  SpiralSpectrum() = default;
  explicit SpiralSpectrum(std::vector<Complex> coeffs) : c(std::move(coeffs)) {}
  static SpiralSpectrum from_reals(std::initializer_list<double> v) {
    std::vector<Complex> cc;
    for (double x : v) cc.emplace_back(x, 0.0);
    return SpiralSpectrum{std::move(cc)};
  }

  int max_ell() const { return static_cast<int>(c.size()) - 1; }

  double norm_sq() const {
    double s = 0.0;
    for (const auto& a : c) s += std::norm(a);
    return s;
  }

  SpiralSpectrum& normalize() {
    double n = std::sqrt(norm_sq());
    if (n < kAmpPrune) throw std::invalid_argument("SpiralSpectrum::normalize: all-zero spectrum");
    for (auto& a : c) a /= n;
    return *this;
  }

  SpiralSpectrum normalized() const {
    SpiralSpectrum s = *this;
    s.normalize();
    return s;
  }
};

// sum_{l=1..N} c_l |Psi+_{-l,l}> + c_0 |0>|0> on paths (p, q), normalized
inline PureState spdc_state(const SpiralSpectrum& spectrum, Path p, Path q) {
  if (spectrum.c.empty() || spectrum.norm_sq() < kAmpPrune)
    throw std::invalid_argument("spdc_state: empty spectrum");
  PureState s;
  if (std::abs(spectrum.c[0]) > 0.0) {
    PureState g;
    g.add(ket2(p, 0, q, 0), Complex{1.0, 0.0});
    s += spectrum.c[0] * g;
  }
  for (int l = 1; l <= spectrum.max_ell(); ++l) {
    if (std::abs(spectrum.c[l]) == 0.0) continue;
    s += spectrum.c[l] * bell_state(-l, l, BellSign::plus, p, q);
  }
  if (s.empty()) throw std::invalid_argument("spdc_state: empty spectrum");
  return s.normalize();
}

inline PureState tensor(const PureState& a, const PureState& b) {
  auto pa = a.occupied_paths();
  auto pb = b.occupied_paths();
  for (Path p : pa)
    if (pb.count(p))
      throw std::invalid_argument("tensor: overlapping path " + std::string(1, path_letter(p)));
  PureState out;
  for (const auto& [ka, aa] : a.terms)
    for (const auto& [kb, ab] : b.terms) {
      std::vector<std::pair<Path, int>> ph = ka.photons;
      ph.insert(ph.end(), kb.photons.begin(), kb.photons.end());
      out.add(BasisKet(std::move(ph)), aa * ab);
    }
  out.prune();
  return out;
}

// <a|b>, conjugate-linear in the first argument
inline Complex inner_product(const PureState& a, const PureState& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("inner_product: empty state");
  if (a.photon_count() != b.photon_count() || a.occupied_paths() != b.occupied_paths())
    throw std::invalid_argument("inner_product: mismatched bases");
  Complex s{0.0, 0.0};
  for (const auto& [k, av] : a.terms) {
    auto it = b.terms.find(k);
    if (it != b.terms.end()) s += std::conj(av) * it->second;
  }
  return s;
}

// Relabel paths (used for the B'/C' -> B/C convention and for mirroring
// pair states between source crystals).  Map must be injective on the
// state's occupied paths.
inline PureState relabel_paths(const PureState& s, const std::map<Path, Path>& m) {
  std::set<Path> targets;
  for (Path p : s.occupied_paths()) {
    Path t = m.count(p) ? m.at(p) : p;
    if (!targets.insert(t).second)
      throw std::invalid_argument("relabel_paths: map not injective on occupied paths");
  }
  PureState out;
  for (const auto& [k, a] : s.terms) {
    std::vector<std::pair<Path, int>> ph;
    ph.reserve(k.photons.size());
    for (const auto& [q, l] : k.photons) ph.emplace_back(m.count(q) ? m.at(q) : q, l);
    out.add(BasisKet(std::move(ph)), a);
  }
  out.prune();
  return out;
}

// Hermitian unit-trace matrix over an explicit ordered ket basis.
struct DensityMatrix {
  std::vector<BasisKet> basis;
  Eigen::MatrixXcd mat;

  DensityMatrix() = default;
  DensityMatrix(std::vector<BasisKet> b, Eigen::MatrixXcd m)
      : basis(std::move(b)), mat(std::move(m)) {
    if (mat.rows() != mat.cols() || mat.rows() != static_cast<Eigen::Index>(basis.size()))
      throw std::invalid_argument("DensityMatrix: basis/matrix size mismatch");
  }

  Eigen::Index dim() const { return mat.rows(); }

  int index_of(const BasisKet& k) const {
    for (std::size_t i = 0; i < basis.size(); ++i)
      if (basis[i] == k) return static_cast<int>(i);
    return -1;
  }

  double trace() const { return mat.trace().real(); }

  double hermiticity_error() const { return (mat - mat.adjoint()).cwiseAbs().maxCoeff(); }

  Eigen::VectorXd eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (mat + mat.adjoint()),
                                                       Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }

  bool is_physical(double herm_tol = kHermTol, double psd_tol = kPsdTol) const {
    if (hermiticity_error() > herm_tol) return false;
    if (std::abs(mat.trace().real() - 1.0) > herm_tol) return false;
    if (std::abs(mat.trace().imag()) > herm_tol) return false;
    return eigenvalues().minCoeff() > -psd_tol;
  }

  void require_physical() const {
    if (!is_physical()) throw std::logic_error("DensityMatrix: invariant violation");
  }
};

inline DensityMatrix pure_density(const PureState& psi) {
  PureState s = psi.normalized();
  std::vector<BasisKet> basis;
  basis.reserve(s.terms.size());
  for (const auto& [k, a] : s.terms) basis.push_back(k);
  Eigen::VectorXcd v(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) v(i) = s.terms.at(basis[i]);
  return DensityMatrix{std::move(basis), v * v.adjoint()};
}

// Reduced density matrix on keep_paths; output normalized to unit trace.
inline DensityMatrix partial_trace(const PureState& state, const std::set<Path>& keep_paths) {
  if (state.empty()) throw std::invalid_argument("partial_trace: empty state");
  auto occ = state.occupied_paths();
  if (keep_paths.empty()) throw std::invalid_argument("partial_trace: keep set empty");
  for (Path p : keep_paths)
    if (!occ.count(p)) throw std::invalid_argument("partial_trace: keep path not occupied");
  if (keep_paths == occ)
    throw std::invalid_argument("partial_trace: keep set equals occupied set");

  // group amplitudes by the traced-out photon content
  std::map<BasisKet, std::vector<std::pair<BasisKet, Complex>>> groups;
  int kept_count = -1;
  for (const auto& [k, a] : state.terms) {
    auto [kept, traced] = k.split(keep_paths);
    if (kept_count < 0) kept_count = kept.photon_count();
    if (kept.photon_count() != kept_count)
      throw std::logic_error("partial_trace: non-uniform kept photon count");
    groups[traced].emplace_back(kept, a);
  }

  std::set<BasisKet> kept_kets;
  for (const auto& [tr, vec] : groups)
    for (const auto& [k, a] : vec) kept_kets.insert(k);
  std::vector<BasisKet> basis(kept_kets.begin(), kept_kets.end());

  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(basis.size(), basis.size());
  auto idx = [&](const BasisKet& k) {
    return std::distance(basis.begin(), std::lower_bound(basis.begin(), basis.end(), k));
  };
  for (const auto& [tr, vec] : groups)
    for (const auto& [k1, a1] : vec)
      for (const auto& [k2, a2] : vec) m(idx(k1), idx(k2)) += a1 * std::conj(a2);

  double tr = m.trace().real();
  if (tr < kAmpPrune) throw std::invalid_argument("partial_trace: zero-trace result");
  return DensityMatrix{std::move(basis), m / tr};
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, const std::set<Path>& keep_paths) {
  if (rho.basis.empty()) throw std::invalid_argument("partial_trace: empty basis");
  std::set<Path> occ;
  for (const auto& k : rho.basis)
    for (const auto& [q, l] : k.photons) occ.insert(q);
  if (keep_paths.empty()) throw std::invalid_argument("partial_trace: keep set empty");
  for (Path p : keep_paths)
    if (!occ.count(p)) throw std::invalid_argument("partial_trace: keep path not occupied");
  if (keep_paths == occ)
    throw std::invalid_argument("partial_trace: keep set equals occupied set");

  std::vector<std::pair<BasisKet, BasisKet>> parts;  // (kept, traced) per basis ket
  parts.reserve(rho.basis.size());
  std::set<BasisKet> kept_kets;
  for (const auto& k : rho.basis) {
    auto [kept, traced] = k.split(keep_paths);
    kept_kets.insert(kept);
    parts.emplace_back(kept, traced);
  }
  std::vector<BasisKet> basis(kept_kets.begin(), kept_kets.end());
  auto idx = [&](const BasisKet& k) {
    return std::distance(basis.begin(), std::lower_bound(basis.begin(), basis.end(), k));
  };
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(basis.size(), basis.size());
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (std::size_t j = 0; j < parts.size(); ++j)
      if (parts[i].second == parts[j].second)
        m(idx(parts[i].first), idx(parts[j].first)) += rho.mat(i, j);
  double tr = m.trace().real();
  if (tr < kAmpPrune) throw std::invalid_argument("partial_trace: zero-trace result");
  return DensityMatrix{std::move(basis), m / tr};
}

// Project the photons on the projector's occupied paths onto `projector`;
// returns the (unnormalized-probability, renormalized remainder state).
// Used for BC Bell projections and purification filters.
struct ProjectionResult {
  PureState state;      // remaining paths, renormalized
  double probability;   // squared norm of the projected component
};

inline ProjectionResult project_onto(const PureState& state, const PureState& projector) {
  if (projector.empty()) throw std::invalid_argument("project_onto: empty projector");
  PureState proj = projector.normalized();
  std::set<Path> pp = proj.occupied_paths();
  PureState out;
  for (const auto& [k, a] : state.terms) {
    auto [on_proj, rest] = k.split(pp);
    Complex c = proj.amplitude(on_proj);
    if (std::abs(c) > 0.0) out.add(rest, std::conj(c) * a);
  }
  out.prune();
  if (out.empty()) return {PureState{}, 0.0};
  double p = out.norm_sq();
  return {out.normalized(), p};
}

}  // namespace swapsim
