// purification.hpp
//
// BC-filter purification: projecting the coincidence-conditioned
// four-photon state onto a superposition of BC singlets leaves photons A
// and D in a pure high-dimensional entangled state.  Includes purity and
// Schmidt-rank diagnostics.

#pragma once

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "swapsim/state_algebra.hpp"

namespace swapsim {

inline constexpr double kSchmidtTol = 1e-10;

struct FilterSpec {
  PureState target;  // normalized two-photon BC state

  explicit FilterSpec(PureState t) : target(std::move(t)) {
    if (target.empty()) throw std::invalid_argument("FilterSpec: empty target");
    if (target.occupied_paths() != std::set<Path>{Path::B, Path::C})
      throw std::invalid_argument("FilterSpec: target must live on paths B,C");
    target.normalize();
  }
};

// |x> = (sum_{n=1..N} |Psi-_{n,-n}>_BC) / sqrt(N)
inline FilterSpec x_filter(int n_levels) {
  if (n_levels < 1) throw std::invalid_argument("x_filter: need at least one level");
  PureState s;
  for (int n = 1; n <= n_levels; ++n) s += bell_state(n, -n, BellSign::minus, Path::B, Path::C);
  return FilterSpec{s.normalize()};
}

inline FilterSpec singlet_filter(int l1, int l2) {
  return FilterSpec{bell_state(l1, l2, BellSign::minus, Path::B, Path::C)};
}

struct FilterResult {
  PureState ad_state;          // renormalized
  double success_probability;  // squared norm before renormalization
};

inline FilterResult apply_filter(const PureState& post_selected, const FilterSpec& filter) {
  if (post_selected.empty()) throw std::invalid_argument("apply_filter: empty state");
  ProjectionResult pr = project_onto(post_selected, filter.target);
  if (pr.probability < kAmpPrune)
    throw std::invalid_argument("apply_filter: filter is orthogonal to every BC component");
  return {pr.state, pr.probability};
}

inline double purity(const DensityMatrix& rho) { return (rho.mat * rho.mat).trace().real(); }

// Number of singular values above `tolerance` of the amplitude matrix
// across the given bipartition of occupied paths.
inline int schmidt_rank(const PureState& state, const std::set<Path>& part_a,
                        const std::set<Path>& part_b, double tolerance = kSchmidtTol) {
  if (state.empty()) throw std::invalid_argument("schmidt_rank: empty state");
  auto occ = state.occupied_paths();
  if (part_a.empty() || part_b.empty())
    throw std::invalid_argument("schmidt_rank: trivial cut");
  std::set<Path> uni;
  for (Path p : part_a) {
    if (part_b.count(p)) throw std::invalid_argument("schmidt_rank: overlapping cut");
    uni.insert(p);
  }
  for (Path p : part_b) uni.insert(p);
  if (uni != occ) throw std::invalid_argument("schmidt_rank: cut must cover the occupied paths");

  PureState s = state.normalized();
  std::map<BasisKet, int> rows, cols;
  std::vector<std::pair<std::pair<int, int>, Complex>> entries;
  for (const auto& [k, a] : s.terms) {
    auto [ka, kb] = k.split(part_a);
    int ri = rows.emplace(ka, static_cast<int>(rows.size())).first->second;
    int ci = cols.emplace(kb, static_cast<int>(cols.size())).first->second;
    entries.push_back({{ri, ci}, a});
  }
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(rows.size(), cols.size());
  for (const auto& [rc, a] : entries) m(rc.first, rc.second) += a;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tolerance) ++rank;
  return rank;
}

// Coefficients <Psi-_{n,-n}|psi> of a two-photon A,D state on the diagonal
// singlet family, n = 1..max_ell.
inline std::vector<Complex> singlet_coefficients(const PureState& ad_state, int max_ell) {
  if (ad_state.occupied_paths() != std::set<Path>{Path::A, Path::D})
    throw std::invalid_argument("singlet_coefficients: state must live on paths A,D");
  std::vector<Complex> out;
  out.reserve(max_ell);
  PureState s = ad_state.normalized();
  for (int n = 1; n <= max_ell; ++n) {
    PureState psi = bell_state(n, -n, BellSign::minus, Path::A, Path::D);
    Complex c{0.0, 0.0};
    for (const auto& [k, a] : psi.terms) c += std::conj(a) * s.amplitude(k);
    out.push_back(c);
  }
  return out;
}

// Number of antisymmetric pair components above tolerance, over every mode
// pair present in the state.
inline int singlet_component_count(const PureState& ad_state, double tolerance = kSchmidtTol) {
  if (ad_state.occupied_paths() != std::set<Path>{Path::A, Path::D})
    throw std::invalid_argument("singlet_component_count: state must live on paths A,D");
  PureState s = ad_state.normalized();
  std::set<int> modes;
  for (const auto& [k, a] : s.terms)
    for (const auto& [p, l] : k.photons) modes.insert(l);
  int count = 0;
  for (auto it = modes.begin(); it != modes.end(); ++it)
    for (auto jt = std::next(it); jt != modes.end(); ++jt) {
      PureState psi = bell_state(*it, *jt, BellSign::minus, Path::A, Path::D);
      Complex c{0.0, 0.0};
      for (const auto& [k, a] : psi.terms) c += std::conj(a) * s.amplitude(k);
      if (std::abs(c) > tolerance) ++count;
    }
  return count;
}

}  // namespace swapsim
