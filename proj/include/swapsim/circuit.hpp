// circuit.hpp
//
// The entanglement-swapping optical circuit: the 50:50 beamsplitter acting
// on paths B and C (mirror compensation baked in, so helicity is
// preserved), coincidence post-selection, the swapped A-D mixed state, and
// the conditional "transcription" bookkeeping.
//
// Beamsplitter rules (B and C keep their names through the splitter):
//   |l>_B -> (|l>_C - |l>_B)/sqrt(2)
//   |l>_C -> (|l>_B + |l>_C)/sqrt(2)
//
// Amplitudes are tracked at creation-operator-monomial level so that kets
// with two photons in one output path pick up the bosonic sqrt(n!) factor
// and the transformation stays exactly unitary.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "swapsim/state_algebra.hpp"

namespace swapsim {

namespace detail {

inline double occupancy_factor(const BasisKet& k) {
  // product over (path,mode) of n!, as a double (n <= 4 here)
  double f = 1.0;
  int run = 1;
  for (std::size_t i = 1; i < k.photons.size(); ++i) {
    if (k.photons[i] == k.photons[i - 1]) {
      ++run;
      f *= run;
    } else {
      run = 1;
    }
  }
  return f;
}

}  // namespace detail

inline PureState beamsplitter_bc(const PureState& state) {
  if (state.empty()) throw std::invalid_argument("beamsplitter_bc: empty state");
  bool touches_bs = false;
  for (const auto& [k, a] : state.terms)
    if (k.count_in(Path::B) > 0 || k.count_in(Path::C) > 0) touches_bs = true;
  if (!touches_bs) throw std::invalid_argument("beamsplitter_bc: no photon in B or C");

  const double r = 1.0 / std::sqrt(2.0);
  std::map<BasisKet, Complex> monomials;  // creation-operator monomial coefficients

  for (const auto& [ket, amp] : state.terms) {
    // |ket> = prod (a+)^n / sqrt(n!) |0>, so the input monomial coefficient
    // carries a 1/sqrt(prod n!) relative to the ket amplitude
    Complex base = amp / std::sqrt(detail::occupancy_factor(ket));

    // expand the product of transformed creation operators photon by photon
    std::vector<std::pair<BasisKet, Complex>> partial{{BasisKet{}, base}};
    for (const auto& [p, l] : ket.photons) {
      std::vector<std::pair<Path, Complex>> branches;
      if (p == Path::B) {
        branches = {{Path::C, Complex{r, 0.0}}, {Path::B, Complex{-r, 0.0}}};
      } else if (p == Path::C) {
        branches = {{Path::B, Complex{r, 0.0}}, {Path::C, Complex{r, 0.0}}};
      } else {
        branches = {{p, Complex{1.0, 0.0}}};
      }
      std::vector<std::pair<BasisKet, Complex>> next;
      next.reserve(partial.size() * branches.size());
      for (const auto& [mono, c] : partial)
        for (const auto& [q, w] : branches) {
          BasisKet m = mono;
          m.photons.emplace_back(q, l);
          next.emplace_back(std::move(m), c * w);
        }
      partial = std::move(next);
    }
    for (auto& [mono, c] : partial) {
      mono.canonicalize();
      monomials[mono] += c;
    }
  }

  PureState out;
  for (const auto& [mono, c] : monomials) {
    Complex a = c * std::sqrt(detail::occupancy_factor(mono));
    if (std::abs(a) >= kAmpPrune) out.add(mono, a);
  }
  out.prune();
  return out;
}

// Post-selection on one photon in each beamsplitter output path.
struct PostSelectionResult {
  PureState state;       // renormalized coincidence component
  double probability;    // squared norm of the kept component
  double normalization;  // K = 1/sqrt(probability)
};

inline PostSelectionResult postselect_coincidence(const PureState& state) {
  if (state.empty()) throw std::invalid_argument("postselect_coincidence: empty state");
  PureState kept;
  for (const auto& [k, a] : state.terms)
    if (k.count_in(Path::B) == 1 && k.count_in(Path::C) == 1) kept.add(k, a);
  kept.prune();
  double p = kept.empty() ? 0.0 : kept.norm_sq();
  if (p < kAmpPrune)
    throw std::invalid_argument("postselect_coincidence: zero coincidence amplitude");
  return {kept.normalized(), p, 1.0 / std::sqrt(p)};
}

// Full swap pipeline: beamsplitter -> coincidence post-selection -> trace
// over B and C.  Input is the pre-beamsplitter four-photon state.
inline DensityMatrix swapped_density_matrix(const PureState& input) {
  PureState after = beamsplitter_bc(input);
  PostSelectionResult ps = postselect_coincidence(after);
  return partial_trace(ps.state, {Path::A, Path::D});
}

inline long antisymmetric_dimension(int d) {
  if (d < 2) throw std::invalid_argument("antisymmetric_dimension: d must be >= 2");
  return static_cast<long>(d) * (d - 1) / 2;
}

// Conditional A-D state given a BC Bell projection, for a source whose two
// crystals emit the pair states `input_ab` and `input_cd`.  Both emission
// assignments (ab in AB with cd in CD, and vice versa) contribute
// coherently with equal amplitude; when the two pair states coincide the
// assignments are the same term.
inline PureState transcription_trace(const PureState& input_ab, const PureState& input_cd,
                                     const PureState& projector_bc) {
  if (input_ab.occupied_paths() != std::set<Path>{Path::A, Path::B})
    throw std::invalid_argument("transcription_trace: first input must live on paths A,B");
  if (input_cd.occupied_paths() != std::set<Path>{Path::C, Path::D})
    throw std::invalid_argument("transcription_trace: second input must live on paths C,D");
  if (projector_bc.occupied_paths() != std::set<Path>{Path::B, Path::C})
    throw std::invalid_argument("transcription_trace: projector must live on paths B,C");

  PureState direct = tensor(input_ab.normalized(), input_cd.normalized());
  PureState mirror = tensor(relabel_paths(input_cd, {{Path::C, Path::A}, {Path::D, Path::B}}),
                            relabel_paths(input_ab, {{Path::A, Path::C}, {Path::B, Path::D}}))
                         .normalized();

  // same physical emission either way? then there is only one term
  PureState input = direct;
  Complex ov = inner_product(direct, mirror);
  if (std::abs(std::abs(ov) - 1.0) > 1e-9) {
    input = direct + mirror;
    input.normalize();
  }

  PureState after = beamsplitter_bc(input);
  PostSelectionResult ps = postselect_coincidence(after);
  ProjectionResult proj = project_onto(ps.state, projector_bc);
  if (proj.probability < kAmpPrune)
    throw std::invalid_argument("transcription_trace: zero-amplitude projection");
  return proj.state;
}

}  // namespace swapsim
