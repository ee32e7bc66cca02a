#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "swapsim/state_algebra.hpp"
#include "test_helpers.hpp"

using namespace swapsim;
using swaptest::max_abs_diff;

namespace {
const double kR2 = 1.0 / std::sqrt(2.0);
}

TEST_CASE("bell_state definition and sign conventions") {
  PureState psi = bell_state(-1, 1, BellSign::plus, Path::A, Path::B);
  CHECK(psi.terms.size() == 2);
  CHECK(std::abs(psi.amplitude(ket2(Path::A, -1, Path::B, 1)) - Complex{kR2, 0}) < 1e-15);
  CHECK(std::abs(psi.amplitude(ket2(Path::A, 1, Path::B, -1)) - Complex{kR2, 0}) < 1e-15);

  PureState m = bell_state(2, -1, BellSign::minus, Path::A, Path::D);
  CHECK(std::abs(m.amplitude(ket2(Path::A, 2, Path::D, -1)) - Complex{kR2, 0}) < 1e-15);
  CHECK(std::abs(m.amplitude(ket2(Path::A, -1, Path::D, 2)) - Complex{-kR2, 0}) < 1e-15);

  CHECK_THROWS_AS(bell_state(1, 1, BellSign::minus, Path::A, Path::B), std::invalid_argument);
  CHECK_THROWS_AS(bell_state(1, 2, BellSign::plus, Path::A, Path::A), std::invalid_argument);
}

TEST_CASE("bell_state swap symmetry") {
  for (auto [l, k] : {std::pair{-1, 1}, {2, -1}, {1, 2}}) {
    PureState sm1 = bell_state(l, k, BellSign::minus, Path::A, Path::B);
    PureState sm2 = bell_state(k, l, BellSign::minus, Path::A, Path::B);
    CHECK(std::abs(inner_product(sm1, sm2) - Complex{-1.0, 0}) < 1e-12);
    PureState sp1 = bell_state(l, k, BellSign::plus, Path::A, Path::B);
    PureState sp2 = bell_state(k, l, BellSign::plus, Path::A, Path::B);
    CHECK(std::abs(inner_product(sp1, sp2) - Complex{1.0, 0}) < 1e-12);
  }
}

TEST_CASE("spdc_state examples") {
  SUBCASE("single pair term") {
    auto s = spdc_state(SpiralSpectrum::from_reals({0.0, 1.0}), Path::A, Path::B);
    PureState expected = bell_state(-1, 1, BellSign::plus, Path::A, Path::B);
    CHECK(std::abs(inner_product(s, expected) - Complex{1.0, 0}) < 1e-12);
  }
  SUBCASE("two equal pair terms give the four-ket factor") {
    auto s = spdc_state(SpiralSpectrum::from_reals({0.0, kR2, kR2}), Path::A, Path::B);
    CHECK(s.terms.size() == 4);
    for (const auto& [ket, amp] : s.terms) CHECK(std::abs(amp - Complex{0.5, 0}) < 1e-12);
  }
  SUBCASE("Gaussian-only spectrum") {
    auto s = spdc_state(SpiralSpectrum::from_reals({1.0}), Path::C, Path::D);
    CHECK(s.terms.size() == 1);
    CHECK(std::abs(s.amplitude(ket2(Path::C, 0, Path::D, 0)) - Complex{1.0, 0}) < 1e-15);
  }
  SUBCASE("empty spectrum rejected") {
    CHECK_THROWS_AS(spdc_state(SpiralSpectrum{}, Path::A, Path::B), std::invalid_argument);
    CHECK_THROWS_AS(spdc_state(SpiralSpectrum::from_reals({0.0, 0.0}), Path::A, Path::B),
                    std::invalid_argument);
  }
}

TEST_CASE("tensor products") {
  PureState ab = bell_state(-1, 1, BellSign::plus, Path::A, Path::B);
  PureState cd = bell_state(-1, 1, BellSign::plus, Path::C, Path::D);
  PureState full = tensor(ab, cd);
  CHECK(full.terms.size() == 4);
  for (const auto& [k, a] : full.terms) CHECK(std::abs(a - Complex{0.5, 0}) < 1e-12);

  auto spdc2 = SpiralSpectrum::from_reals({0.0, kR2, kR2});
  PureState eq2 = tensor(spdc_state(spdc2, Path::A, Path::B), spdc_state(spdc2, Path::C, Path::D));
  CHECK(eq2.terms.size() == 16);
  CHECK(std::abs(eq2.norm() - 1.0) < 1e-12);

  CHECK_THROWS_AS(tensor(ab, bell_state(-1, 1, BellSign::plus, Path::A, Path::C)),
                  std::invalid_argument);
}

TEST_CASE("inner products") {
  PureState plus = bell_state(-1, 1, BellSign::plus, Path::A, Path::B);
  PureState minus = bell_state(-1, 1, BellSign::minus, Path::A, Path::B);
  CHECK(std::abs(inner_product(plus, plus) - Complex{1, 0}) < 1e-14);
  CHECK(std::abs(inner_product(plus, minus)) < 1e-14);
  PureState a = bell_state(-1, 2, BellSign::minus, Path::A, Path::B);
  PureState b = bell_state(-2, 1, BellSign::minus, Path::A, Path::B);
  CHECK(std::abs(inner_product(a, b)) < 1e-14);

  PureState other_paths = bell_state(-1, 1, BellSign::plus, Path::A, Path::C);
  CHECK_THROWS_AS(inner_product(plus, other_paths), std::invalid_argument);
}

TEST_CASE("normalize is idempotent and norms are consistent") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    PureState s = swaptest::random_two_photon_state(rng, Path::A, Path::D, 2);
    CHECK(std::abs(s.norm() - 1.0) < 1e-12);
    PureState again = s.normalized();
    CHECK(std::abs(inner_product(s, again) - Complex{1, 0}) < 1e-12);
    Complex self = inner_product(s, s);
    CHECK(self.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(self.imag()) < 1e-14);
  }
}

TEST_CASE("partial trace of product states returns the factors") {
  PureState ad = bell_state(-1, 1, BellSign::minus, Path::A, Path::D);
  PureState bc = bell_state(-1, 1, BellSign::minus, Path::B, Path::C);
  DensityMatrix rho = partial_trace(tensor(ad, bc), {Path::A, Path::D});
  DensityMatrix expected = pure_density(ad);
  REQUIRE(rho.basis == expected.basis);
  CHECK(max_abs_diff(rho.mat, expected.mat) < 1e-12);
  rho.require_physical();
}

TEST_CASE("partial trace of a maximally entangled pair is maximally mixed") {
  PureState ab = bell_state(-1, 1, BellSign::plus, Path::A, Path::B);
  DensityMatrix rho = partial_trace(ab, {Path::A});
  REQUIRE(rho.dim() == 2);
  CHECK(max_abs_diff(rho.mat, 0.5 * Eigen::MatrixXcd::Identity(2, 2)) < 1e-12);
}

TEST_CASE("partial trace argument validation") {
  PureState ab = bell_state(-1, 1, BellSign::plus, Path::A, Path::B);
  CHECK_THROWS_AS(partial_trace(ab, {}), std::invalid_argument);
  CHECK_THROWS_AS(partial_trace(ab, {Path::A, Path::B}), std::invalid_argument);
  CHECK_THROWS_AS(partial_trace(ab, {Path::C}), std::invalid_argument);
}

TEST_CASE("tensor then trace factorization property") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    PureState ab = swaptest::random_two_photon_state(rng, Path::A, Path::B, 2);
    PureState cd = swaptest::random_two_photon_state(rng, Path::C, Path::D, 2);
    PureState joint = tensor(ab, cd);
    DensityMatrix left = partial_trace(joint, {Path::A, Path::B});
    DensityMatrix expect_left = pure_density(ab);
    REQUIRE(left.basis == expect_left.basis);
    CHECK(max_abs_diff(left.mat, expect_left.mat) < 1e-10);
    left.require_physical();

    DensityMatrix right = partial_trace(joint, {Path::C, Path::D});
    DensityMatrix expect_right = pure_density(cd);
    REQUIRE(right.basis == expect_right.basis);
    CHECK(max_abs_diff(right.mat, expect_right.mat) < 1e-10);
  }
}

TEST_CASE("partial trace of a density matrix input") {
  PureState ad = bell_state(-2, 2, BellSign::minus, Path::A, Path::D);
  PureState bc = bell_state(-1, 1, BellSign::plus, Path::B, Path::C);
  DensityMatrix joint = pure_density(tensor(ad, bc));
  DensityMatrix reduced = partial_trace(joint, {Path::A, Path::D});
  DensityMatrix expected = pure_density(ad);
  REQUIRE(reduced.basis == expected.basis);
  CHECK(max_abs_diff(reduced.mat, expected.mat) < 1e-12);
}

TEST_CASE("relabel paths") {
  PureState cd = bell_state(-1, 2, BellSign::plus, Path::C, Path::D);
  PureState ab = relabel_paths(cd, {{Path::C, Path::A}, {Path::D, Path::B}});
  CHECK(ab.occupied_paths() == std::set<Path>{Path::A, Path::B});
  PureState expected = bell_state(-1, 2, BellSign::plus, Path::A, Path::B);
  CHECK(std::abs(inner_product(ab, expected) - Complex{1, 0}) < 1e-12);
}

TEST_CASE("project_onto conditions on a path subset") {
  PureState ad = bell_state(-1, 1, BellSign::minus, Path::A, Path::D);
  PureState bc = bell_state(-1, 1, BellSign::minus, Path::B, Path::C);
  PureState joint = tensor(ad, bc);
  ProjectionResult pr = project_onto(joint, bc);
  CHECK(pr.probability == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(inner_product(pr.state, ad) - Complex{1, 0}) < 1e-12);

  PureState orth = bell_state(-2, 2, BellSign::minus, Path::B, Path::C);
  ProjectionResult zero = project_onto(joint, orth);
  CHECK(zero.probability == 0.0);
}

TEST_CASE("spiral spectrum normalization") {
  SpiralSpectrum s = SpiralSpectrum::from_reals({1.0, 2.0, 2.0});
  s.normalize();
  CHECK(s.norm_sq() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(SpiralSpectrum::from_reals({0.0, 0.0}).normalize(), std::invalid_argument);
}

TEST_CASE("basis ket ordering and helpers") {
  BasisKet k{{Path::D, 1}, {Path::A, -1}};
  CHECK(k.photons.front().first == Path::A);
  CHECK(k.mode_in(Path::D) == 1);
  CHECK(k.total_oam() == 0);
  CHECK(!k.bunched());
  BasisKet b{{Path::B, 1}, {Path::B, 1}};
  CHECK(b.bunched());
  CHECK(b.count_in(Path::B) == 2);
}
