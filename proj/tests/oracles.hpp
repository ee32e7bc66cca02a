// Test-side analytic oracles, kept independent of the circuit expansion
// they are used to check.
//
// For a source spectrum {c_0, c_1..c_N} on each crystal, expanding the
// beamsplitter rules term by term and collecting coincidence components
// gives the post-selected singlet mixture on A,D with unnormalized weights
//
//   diagonal pairs   (n,-n):          |c_n|^4 / 4
//   Gaussian pairs   (0,n), (0,-n):   |c_0 c_n|^2 / 2   each
//   mixed pairs, m<n, {m,n} signs:    |c_m c_n|^2 / 4   each of the four
//
// and total coincidence probability equal to their sum.  The Gaussian
// sector carries twice the per-projector weight of a naive uniform-K
// reading: its two input pathways interfere into two product terms rather
// than four.

#pragma once

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "swapsim/state_algebra.hpp"

namespace swaptest {

using ModePair = std::pair<int, int>;  // (lo, hi), lo < hi

struct SwapOracle {
  std::map<ModePair, double> weights;  // normalized singlet weights
  double keep_probability = 0.0;       // coincidence post-selection probability
};

inline SwapOracle analytic_swap(const swapsim::SpiralSpectrum& spectrum) {
  const auto& c = spectrum.c;
  const int n_max = spectrum.max_ell();
  auto p2 = [&](int l) { return std::norm(c[l]); };

  std::map<ModePair, double> u;  // unnormalized weights
  auto add = [&](int a, int b, double w) {
    if (w <= 0.0) return;
    u[{std::min(a, b), std::max(a, b)}] += w;
  };

  for (int n = 1; n <= n_max; ++n) add(-n, n, p2(n) * p2(n) / 4.0);
  for (int n = 1; n <= n_max; ++n) {
    add(0, n, p2(0) * p2(n) / 2.0);
    add(0, -n, p2(0) * p2(n) / 2.0);
  }
  for (int m = 1; m <= n_max; ++m)
    for (int n = m + 1; n <= n_max; ++n) {
      double w = p2(m) * p2(n) / 4.0;
      add(n, -m, w);
      add(-n, m, w);
      add(n, m, w);
      add(-n, -m, w);
    }

  SwapOracle out;
  double total = 0.0;
  for (const auto& [pair, w] : u) total += w;
  out.keep_probability = total;
  for (const auto& [pair, w] : u) out.weights[pair] = w / total;
  return out;
}

// Expected Schmidt coefficients of the post-selected state across AD|BC:
// square roots of the normalized weights (each singlet product appears once).
inline std::vector<double> analytic_schmidt_coefficients(const swapsim::SpiralSpectrum& spec) {
  SwapOracle o = analytic_swap(spec);
  std::vector<double> sv;
  for (const auto& [pair, w] : o.weights) sv.push_back(std::sqrt(w));
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

// Closed-form Werner-state values for a singlet weight V.
inline double werner_concurrence(double v) { return std::max(0.0, (3.0 * v - 1.0) / 2.0); }
inline double werner_singlet_fidelity(double v) { return v + (1.0 - v) / 4.0; }

// The analytic swapped density matrix on the union basis of its singlets.
inline swapsim::DensityMatrix analytic_swap_density(const swapsim::SpiralSpectrum& spectrum) {
  using namespace swapsim;
  SwapOracle o = analytic_swap(spectrum);
  std::set<BasisKet> kets;
  std::vector<std::pair<PureState, double>> comps;
  for (const auto& [pair, w] : o.weights) {
    PureState psi = bell_state(pair.first, pair.second, BellSign::minus, Path::A, Path::D);
    for (const auto& [k, a] : psi.terms) kets.insert(k);
    comps.push_back({psi, w});
  }
  std::vector<BasisKet> basis(kets.begin(), kets.end());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(basis.size(), basis.size());
  auto idx = [&](const BasisKet& k) {
    return std::distance(basis.begin(), std::lower_bound(basis.begin(), basis.end(), k));
  };
  for (const auto& [psi, w] : comps) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(basis.size());
    for (const auto& [k, a] : psi.terms) v(idx(k)) = a;
    m += w * (v * v.adjoint());
  }
  return DensityMatrix{std::move(basis), std::move(m)};
}

}  // namespace swaptest
