#pragma once

// Seeded generators for fixtures: Haar-random unitaries, random states, and
// random maximally entangled bases. Every generator takes an explicit engine
// so that fixtures are reproducible from a recorded seed.

#include <random>

#include "locmeas/bipartite.hpp"
#include "locmeas/core.hpp"
#include "locmeas/error_basis.hpp"

namespace locmeas {

using Rng = std::mt19937_64;

inline ComplexMatrix random_ginibre(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  ComplexMatrix g(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) g(i, j) = Complex(gauss(rng), gauss(rng));
  return g;
}

// Haar-distributed unitary: QR of a Ginibre matrix with the R diagonal's
// phases folded into Q.
inline ComplexMatrix random_unitary(Index d, Rng& rng) {
  const ComplexMatrix g = random_ginibre(d, d, rng);
  Eigen::HouseholderQR<ComplexMatrix> qr(g);
  ComplexMatrix q = qr.householderQ();
  const ComplexMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index k = 0; k < d; ++k) {
    const Complex rkk = r(k, k);
    const double mag = std::abs(rkk);
    q.col(k) *= (mag > 0) ? rkk / mag : Complex(1.0, 0.0);
  }
  return q;
}

inline Complex random_phase(Rng& rng) {
  std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);
  return std::polar(1.0, uni(rng));
}

inline ComplexVector random_state_vector(Index d, Rng& rng) {
  ComplexVector v = random_ginibre(d, 1, rng).col(0);
  return v / v.norm();
}

// Full-rank random density operator (Ginibre ensemble).
inline ComplexMatrix random_density(Index d, Rng& rng) {
  const ComplexMatrix g = random_ginibre(d, d, rng);
  ComplexMatrix rho = g * g.adjoint();
  return rho / rho.trace().real();
}

// Random maximally entangled basis: shift-and-multiply unitaries
// X^a Z^b diag(mu^(a)) with independent unimodular diagonals per shift,
// rotated by Haar unitaries on both sides. Any diagonal choice keeps the
// family trace-orthogonal, and generic phases destroy multiplicative
// closure, so these serve as the generic negative fixtures for d >= 3.
inline MeasurementBasis random_me_basis(Index d, Rng& rng, const Tolerance& tol) {
  const UnitaryErrorBasis wh = gen_weyl_heisenberg(d);
  std::vector<ComplexMatrix> twists;
  for (Index a = 0; a < d; ++a) {
    ComplexMatrix diag = ComplexMatrix::Zero(d, d);
    for (Index k = 0; k < d; ++k) diag(k, k) = random_phase(rng);
    twists.push_back(std::move(diag));
  }
  const ComplexMatrix w1 = random_unitary(d, rng);
  const ComplexMatrix w2 = random_unitary(d, rng);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<ComplexMatrix> ops;
  ops.reserve(wh.unitaries.size());
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b)
      ops.push_back(scale * w1 *
                    wh.unitaries[static_cast<std::size_t>(a * d + b)] *
                    twists[static_cast<std::size_t>(a)] * w2);
  return validate_measurement_basis(std::move(ops), tol);
}

}  // namespace locmeas
