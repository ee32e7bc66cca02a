// Shared helpers for the test suites: deterministic random generators for
// states and spectra, and matrix comparison utilities.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "swapsim/state_algebra.hpp"

namespace swaptest {

using swapsim::BasisKet;
using swapsim::Complex;
using swapsim::Path;
using swapsim::PureState;
using swapsim::SpiralSpectrum;

inline double max_abs_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

inline double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd d = a - b;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (d + d.adjoint()),
                                                     Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline Complex random_complex(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return Complex{g(rng), g(rng)};
}

// random normalized spectrum over l = 0..n (set c0_zero to drop the
// Gaussian term, as in the experimental configs)
inline SpiralSpectrum random_spectrum(std::mt19937_64& rng, int n, bool c0_zero) {
  std::vector<Complex> c(n + 1);
  for (int l = 0; l <= n; ++l) c[l] = random_complex(rng);
  if (c0_zero) c[0] = Complex{0.0, 0.0};
  SpiralSpectrum s{std::move(c)};
  return s.normalized();
}

// random normalized two-photon state on paths (p, q) over modes [-m, m]
inline PureState random_two_photon_state(std::mt19937_64& rng, Path p, Path q, int m) {
  PureState s;
  for (int lp = -m; lp <= m; ++lp)
    for (int lq = -m; lq <= m; ++lq)
      s.add(swapsim::ket2(p, lp, q, lq), random_complex(rng));
  return s.normalize();
}

// random density matrix of dimension n (Ginibre construction, full rank)
inline Eigen::MatrixXcd random_density(std::mt19937_64& rng, int n) {
  Eigen::MatrixXcd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = random_complex(rng);
  Eigen::MatrixXcd rho = g * g.adjoint();
  rho += 1e-6 * Eigen::MatrixXcd::Identity(n, n);
  return rho / rho.trace().real();
}

// random unitary via QR of a Ginibre matrix
inline Eigen::MatrixXcd random_unitary(std::mt19937_64& rng, int n) {
  Eigen::MatrixXcd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = random_complex(rng);
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
  Eigen::MatrixXcd q = qr.householderQ();
  Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i) {
    Complex d = r(i, i) / std::abs(r(i, i));
    q.col(i) *= d;
  }
  return q;
}

}  // namespace swaptest
