#pragma once

// Unitary error bases: validation, the multiplicative-closure ("nice") test
// with Latin-square and phase extraction, the decision procedure for
// equivalence to a nice basis under local unitaries, and standard generators.

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "locmeas/bipartite.hpp"
#include "locmeas/core.hpp"

namespace locmeas {

// n x n table whose rows and columns are each a permutation of {0..n-1}.
struct LatinSquare {
  int n = 0;
  std::vector<int> table;  // row-major

  int at(int i, int j) const { return table[static_cast<std::size_t>(i) * n + j]; }
  int& at(int i, int j) { return table[static_cast<std::size_t>(i) * n + j]; }

  bool valid() const {
    if (table.size() != static_cast<std::size_t>(n) * n) return false;
    std::vector<bool> seen;
    for (int i = 0; i < n; ++i) {
      seen.assign(static_cast<std::size_t>(n), false);
      for (int j = 0; j < n; ++j) {
        const int v = at(i, j);
        if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)]) return false;
        seen[static_cast<std::size_t>(v)] = true;
      }
    }
    for (int j = 0; j < n; ++j) {
      seen.assign(static_cast<std::size_t>(n), false);
      for (int i = 0; i < n; ++i) {
        const int v = at(i, j);
        if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)]) return false;
        seen[static_cast<std::size_t>(v)] = true;
      }
    }
    return true;
  }

  // J(k, i) = j such that table(i, j) = k. Inherits the Latin property.
  LatinSquare inverse_in_second_argument() const {
    LatinSquare out{n, std::vector<int>(table.size(), -1)};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.at(at(i, j), i) = j;
    return out;
  }

  // J(k, j) = i such that table(i, j) = k.
  LatinSquare inverse_in_first_argument() const {
    LatinSquare out{n, std::vector<int>(table.size(), -1)};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.at(at(i, j), j) = i;
    return out;
  }
};

// d^2 unitaries of dimension d, pairwise orthogonal in the Hilbert-Schmidt
// inner product. Equivalently, {|U_i>>/sqrt(d)} is a maximally entangled
// basis; the correspondence is one-to-one.
struct UnitaryErrorBasis {
  std::vector<ComplexMatrix> unitaries;
  Index dim = 0;
};

inline UnitaryErrorBasis validate_ueb(std::vector<ComplexMatrix> unitaries,
                                      const Tolerance& tol) {
  if (unitaries.empty()) throw ValidationError("unitary error basis is empty");
  const Index d = unitaries.front().rows();
  if (unitaries.size() != static_cast<std::size_t>(d) * d) {
    throw ValidationError("unitary error basis at dimension " + std::to_string(d) +
                          " needs " + std::to_string(d * d) + " elements, got " +
                          std::to_string(unitaries.size()));
  }
  for (std::size_t i = 0; i < unitaries.size(); ++i) {
    const ComplexMatrix& u = unitaries[i];
    if (u.rows() != d || u.cols() != d) {
      throw ValidationError("element " + std::to_string(i) + " has shape " +
                            shape_string(u), static_cast<int>(i));
    }
    const double dev = (u.adjoint() * u - identity(d)).norm();
    if (dev > tol.eps_sum * std::sqrt(static_cast<double>(d))) {
      throw ValidationError("element " + std::to_string(i) + " is not unitary "
                            "(deviation " + std::to_string(dev) + ")",
                            static_cast<int>(i), -1, dev);
    }
  }
  for (std::size_t i = 0; i < unitaries.size(); ++i) {
    for (std::size_t j = i + 1; j < unitaries.size(); ++j) {
      const double overlap = std::abs((unitaries[i].adjoint() * unitaries[j]).trace());
      if (overlap > tol.eps_sum * d) {
        throw ValidationError("elements " + std::to_string(i) + " and " +
                              std::to_string(j) + " are not trace-orthogonal "
                              "(overlap " + std::to_string(overlap) + ")",
                              static_cast<int>(i), static_cast<int>(j), overlap);
      }
    }
  }
  return UnitaryErrorBasis{std::move(unitaries), d};
}

// Witness of multiplicative closure: U_i U_j = phases(i,j) * U_{k_table(i,j)}
// with unimodular phases. Phases are stored exactly as extracted; no gauge is
// imposed on them.
struct NicenessCertificate {
  LatinSquare k_table;
  ComplexMatrix phases;  // d^2 x d^2, entry (i,j) = c_ij
};

struct NicenessOptions {
  // Continue scanning after the first match and reject double matches. A
  // double match is mathematically impossible for a trace-orthogonal family
  // and signals a misconfigured tolerance.
  bool exhaustive_uniqueness = false;
};

// First product U_i U_j that failed to resolve to a basis element.
struct NicenessFailure {
  int i = -1;
  int j = -1;
};

inline std::optional<NicenessCertificate> check_nice(const UnitaryErrorBasis& ueb,
                                                     const Tolerance& tol,
                                                     const NicenessOptions& opts = {},
                                                     NicenessFailure* failure = nullptr) {
  const int n = static_cast<int>(ueb.unitaries.size());
  NicenessCertificate cert;
  cert.k_table = LatinSquare{n, std::vector<int>(static_cast<std::size_t>(n) * n, -1)};
  cert.phases = ComplexMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const ComplexMatrix prod = ueb.unitaries[static_cast<std::size_t>(i)] *
                                 ueb.unitaries[static_cast<std::size_t>(j)];
      int match = -1;
      Complex phase;
      for (int k = 0; k < n; ++k) {
        const auto alpha = proportional_up_to_scalar(
            prod, ueb.unitaries[static_cast<std::size_t>(k)], tol);
        if (!alpha) continue;
        if (match >= 0) {
          throw NumericalError(
              "closure scan found two matches for product (" + std::to_string(i) +
              "," + std::to_string(j) + "); tolerances are inconsistent with the "
              "basis");
        }
        match = k;
        phase = *alpha;
        if (!opts.exhaustive_uniqueness) break;
      }
      if (match < 0 || std::abs(std::abs(phase) - 1.0) > tol.eps_prop * 10) {
        if (failure) *failure = NicenessFailure{i, j};
        return std::nullopt;
      }
      cert.k_table.at(i, j) = match;
      cert.phases(i, j) = phase;
    }
  }
  if (!cert.k_table.valid()) {
    throw NumericalError("closure table of a trace-orthogonal family is not a "
                         "Latin square; tolerances are inconsistent");
  }
  return cert;
}

// Equivalence to a nice basis under U_i -> c_i W_1 U_i W_2 is decided by
// closure of the single transformed family {U_j^dagger U_i}: it holds for
// one j iff it holds for every j.
struct LuNiceResult {
  bool equivalent = false;
  int witness_j = 0;  // the j whose transformed family certified the verdict
  std::optional<NicenessCertificate> certificate;
};

inline UnitaryErrorBasis transformed_family(const UnitaryErrorBasis& ueb, int j) {
  std::vector<ComplexMatrix> t;
  t.reserve(ueb.unitaries.size());
  const ComplexMatrix adj = ueb.unitaries[static_cast<std::size_t>(j)].adjoint();
  for (const auto& u : ueb.unitaries) t.push_back(adj * u);
  return UnitaryErrorBasis{std::move(t), ueb.dim};
}

inline LuNiceResult check_lu_equivalent_to_nice(const UnitaryErrorBasis& ueb,
                                                const Tolerance& tol, int j = 0,
                                                NicenessFailure* failure = nullptr) {
  if (j < 0 || j >= static_cast<int>(ueb.unitaries.size())) {
    throw DimensionError("witness index j out of range");
  }
  auto cert = check_nice(transformed_family(ueb, j), tol, {}, failure);
  return LuNiceResult{cert.has_value(), j, std::move(cert)};
}

// Empirical confirmation that the verdict is j-independent.
inline std::vector<LuNiceResult> check_lu_equivalent_all_j(const UnitaryErrorBasis& ueb,
                                                           const Tolerance& tol) {
  std::vector<LuNiceResult> out;
  for (int j = 0; j < static_cast<int>(ueb.unitaries.size()); ++j) {
    out.push_back(check_lu_equivalent_to_nice(ueb, tol, j));
  }
  return out;
}

inline ComplexMatrix pauli_x() {
  ComplexMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

inline ComplexMatrix pauli_y() {
  ComplexMatrix m(2, 2);
  m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
  return m;
}

inline ComplexMatrix pauli_z() {
  ComplexMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

inline UnitaryErrorBasis gen_pauli() {
  return UnitaryErrorBasis{{identity(2), pauli_x(), pauli_y(), pauli_z()}, 2};
}

// Clock-and-shift basis {X^a Z^b} with X the cyclic shift and Z the phase
// clock at the d-th root of unity; element index is a*d + b. Closed under
// multiplication for every d (d = 1 gives the single unitary {1}).
inline UnitaryErrorBasis gen_weyl_heisenberg(Index d) {
  if (d < 1) throw DimensionError("dimension must be at least 1");
  ComplexMatrix shift = ComplexMatrix::Zero(d, d);
  for (Index k = 0; k < d; ++k) shift((k + 1) % d, k) = 1.0;
  ComplexMatrix clock = ComplexMatrix::Zero(d, d);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(d);
  for (Index k = 0; k < d; ++k) clock(k, k) = std::polar(1.0, step * k);

  std::vector<ComplexMatrix> us;
  us.reserve(static_cast<std::size_t>(d) * d);
  ComplexMatrix xa = identity(d);
  for (Index a = 0; a < d; ++a) {
    ComplexMatrix cur = xa;
    for (Index b = 0; b < d; ++b) {
      us.push_back(cur);
      cur = cur * clock;
    }
    xa = shift * xa;
  }
  return UnitaryErrorBasis{std::move(us), d};
}

// Lift of a maximally entangled basis to the corresponding unitary family
// via U_i = sqrt(d) M_i. Fails (with the first offending index) when some
// element is not maximally entangled.
struct UebLift {
  std::optional<UnitaryErrorBasis> ueb;
  int failing_index = -1;
};

inline UebLift basis_to_ueb(const MeasurementBasis& basis, const Tolerance& tol) {
  const Index d = basis.dim();
  const double scale = std::sqrt(static_cast<double>(d));
  std::vector<ComplexMatrix> us;
  us.reserve(basis.ops.size());
  for (std::size_t i = 0; i < basis.ops.size(); ++i) {
    ComplexMatrix u = scale * basis.ops[i];
    if ((u.adjoint() * u - identity(d)).norm() > tol.eps_sum * d) {
      return UebLift{std::nullopt, static_cast<int>(i)};
    }
    us.push_back(std::move(u));
  }
  return UebLift{UnitaryErrorBasis{std::move(us), d}, -1};
}

// The maximally entangled basis generated by a unitary error basis.
inline MeasurementBasis ueb_to_basis(const UnitaryErrorBasis& ueb,
                                     const Tolerance& tol) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(ueb.dim));
  std::vector<ComplexMatrix> ops;
  ops.reserve(ueb.unitaries.size());
  for (const auto& u : ueb.unitaries) ops.push_back(scale * u);
  return validate_measurement_basis(std::move(ops), tol);
}

}  // namespace locmeas
