#pragma once

// Bipartite vectors in operator form, POVM validation, and the contraction
// identity that reduces a joint measurement branch to a single operator
// product.
//
// Conventions, fixed once and asserted in every reshaping. A bipartite
// vector is stored as the operator E : H_in -> H_out whose entry (j, i) is
// the amplitude on |i>_in |j>_out. The four roles and their spaces:
//
//   role          operator maps        vector lives on
//   Alice    A :  R_A -> S_A           S_A (x) R_A
//   Bob      B :  S_B -> R_B           S_B (x) R_B
//   target   M :  S_B -> S_A           S_A (x) S_B
//   resource R :  R_B -> R_A           R_A (x) R_B
//
// In each case the row-major flattening of the matrix gives the vector
// amplitudes with the FIRST listed factor major. The definition is not
// symmetric in the two factors, so every helper below names which space is
// which.

#include <optional>
#include <utility>
#include <vector>

#include "locmeas/core.hpp"

namespace locmeas {

struct DoubleKet {
  ComplexMatrix op;  // dim_out x dim_in

  Index dim_in() const { return op.cols(); }
  Index dim_out() const { return op.rows(); }

  // Amplitudes with the output factor major (see table above).
  ComplexVector vector() const {
    ComplexVector v(op.size());
    for (Index r = 0; r < op.rows(); ++r)
      for (Index c = 0; c < op.cols(); ++c) v(r * op.cols() + c) = op(r, c);
    return v;
  }

  double norm() const { return op.norm(); }
};

// Reshapes a joint state vector on S_A (x) S_B (S_A major) into the operator
// M : S_B -> S_A with M(a, b) = psi_ab. Pure relabeling; round-trips exactly.
inline DoubleKet to_double_ket(const ComplexVector& amplitudes, Index dim_a,
                               Index dim_b) {
  if (amplitudes.size() != dim_a * dim_b) {
    throw DimensionError("to_double_ket: expected " +
                         std::to_string(dim_a * dim_b) + " amplitudes, got " +
                         std::to_string(amplitudes.size()));
  }
  ComplexMatrix m(dim_a, dim_b);
  for (Index a = 0; a < dim_a; ++a)
    for (Index b = 0; b < dim_b; ++b) m(a, b) = amplitudes(a * dim_b + b);
  return DoubleKet{std::move(m)};
}

inline ComplexVector from_double_ket(const DoubleKet& k) { return k.vector(); }

inline Index schmidt_rank(const DoubleKet& k, const Tolerance& tol) {
  return numeric_rank(k.op, tol);
}

// Reduction of a rank-1 localization branch: with A : R_A -> S_A,
// R : R_B -> R_A and B : S_B -> R_B, the partial trace over the resource
// spaces of (|A><A| (x) |B><B|)(I (x) |R><R|) collapses to the single Kraus
// factor A R^* B : S_B -> S_A, where * is the entrywise conjugate in the
// computational basis.
inline DoubleKet contract_triple(const DoubleKet& alice, const DoubleKet& resource,
                                 const DoubleKet& bob) {
  if (alice.dim_in() != resource.dim_out() || resource.dim_in() != bob.dim_out()) {
    throw DimensionError("contract_triple: incompatible chain " +
                         shape_string(alice.op) + " * " +
                         shape_string(resource.op) + "^* * " +
                         shape_string(bob.op));
  }
  return DoubleKet{alice.op * resource.op.conjugate() * bob.op};
}

// True iff M M^dagger is the maximally mixed marginal. Callers must pass a
// unit-Frobenius-norm square operator.
inline bool is_maximally_entangled(const ComplexMatrix& m, const Tolerance& tol) {
  if (m.rows() != m.cols()) {
    throw DimensionError("is_maximally_entangled: non-square " + shape_string(m));
  }
  const double norm = m.norm();
  if (std::abs(norm - 1.0) > 100 * tol.eps_sum) {
    throw ValidationError("is_maximally_entangled: operator norm " +
                          std::to_string(norm) + " is not 1");
  }
  const Index d = m.rows();
  return (m * m.adjoint() - identity(d) / static_cast<double>(d)).norm() <=
         tol.eps_sum;
}

struct Povm {
  std::vector<ComplexMatrix> elements;
  std::vector<std::string> labels;  // optional outcome identifiers
};

// Hermiticity, positivity and completeness checks; throws ValidationError
// naming the first offending element.
inline Povm validate_povm(std::vector<ComplexMatrix> elements, const Tolerance& tol,
                          std::vector<std::string> labels = {}) {
  if (elements.empty()) throw ValidationError("POVM has no elements");
  const Index dim = elements.front().rows();
  ComplexMatrix sum = ComplexMatrix::Zero(dim, dim);
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const ComplexMatrix& e = elements[i];
    if (e.rows() != dim || e.cols() != dim) {
      throw ValidationError("POVM element " + std::to_string(i) + " has shape " +
                            shape_string(e) + ", expected " +
                            std::to_string(dim) + "x" + std::to_string(dim),
                            static_cast<int>(i));
    }
    if (!all_finite(e)) {
      throw ValidationError("POVM element " + std::to_string(i) +
                            " has non-finite entries", static_cast<int>(i));
    }
    const double herm_dev = (e - e.adjoint()).norm();
    if (herm_dev > tol.eps_sum) {
      throw ValidationError("POVM element " + std::to_string(i) +
                            " is not Hermitian (deviation " +
                            std::to_string(herm_dev) + ")",
                            static_cast<int>(i), -1, herm_dev);
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig((e + e.adjoint()) / 2.0);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (min_eig < -tol.eps_sum) {
      throw ValidationError("POVM element " + std::to_string(i) +
                            " has negative eigenvalue " + std::to_string(min_eig),
                            static_cast<int>(i), -1, -min_eig);
    }
    sum += e;
  }
  const double completeness_dev = (sum - identity(dim)).norm();
  if (completeness_dev > tol.eps_sum) {
    throw ValidationError("POVM elements do not sum to identity (deviation " +
                          std::to_string(completeness_dev) + ")", -1, -1,
                          completeness_dev);
  }
  if (!labels.empty() && labels.size() != elements.size()) {
    throw ValidationError("POVM label count does not match element count");
  }
  return Povm{std::move(elements), std::move(labels)};
}

// Rank-1 POVM stored through its kets: element c is |k_c><k_c| with the
// outcome weight absorbed into the ket length. Non-redundant: no two kets
// are proportional.
struct RankOnePovm {
  std::vector<DoubleKet> kets;

  Index dim_in() const { return kets.empty() ? 0 : kets.front().dim_in(); }
  Index dim_out() const { return kets.empty() ? 0 : kets.front().dim_out(); }
  std::size_t size() const { return kets.size(); }

  std::vector<ComplexMatrix> projectors() const {
    std::vector<ComplexMatrix> out;
    out.reserve(kets.size());
    for (const auto& k : kets) {
      const ComplexVector v = k.vector();
      out.push_back(v * v.adjoint());
    }
    return out;
  }
};

inline void validate_rank_one_povm(const RankOnePovm& p, const Tolerance& tol) {
  if (p.kets.empty()) throw ValidationError("rank-1 POVM has no kets");
  const Index din = p.dim_in();
  const Index dout = p.dim_out();
  const Index joint = din * dout;
  ComplexMatrix sum = ComplexMatrix::Zero(joint, joint);
  for (std::size_t i = 0; i < p.kets.size(); ++i) {
    if (p.kets[i].dim_in() != din || p.kets[i].dim_out() != dout) {
      throw ValidationError("rank-1 POVM ket " + std::to_string(i) +
                            " has inconsistent shape", static_cast<int>(i));
    }
    const ComplexVector v = p.kets[i].vector();
    sum += v * v.adjoint();
  }
  const double dev = (sum - identity(joint)).norm();
  if (dev > tol.eps_sum) {
    throw ValidationError("rank-1 POVM does not resolve the identity (deviation " +
                          std::to_string(dev) + ")", -1, -1, dev);
  }
  for (std::size_t i = 0; i < p.kets.size(); ++i) {
    for (std::size_t j = i + 1; j < p.kets.size(); ++j) {
      if (proportional_up_to_scalar(p.kets[i].op, p.kets[j].op, tol)) {
        throw ValidationError("rank-1 POVM is redundant: kets " +
                              std::to_string(i) + " and " + std::to_string(j) +
                              " are proportional",
                              static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
}

// Orthonormal family of target operators M_i : S_B -> S_A; the joint vectors
// form an orthonormal basis of S_A (x) S_B. Square equal-dimension bases are
// the main case, rectangular ones arise from block constructions.
struct MeasurementBasis {
  std::vector<ComplexMatrix> ops;
  Index dim_a = 0;  // output space S_A
  Index dim_b = 0;  // input space S_B

  Index dim() const {
    if (dim_a != dim_b) {
      throw DimensionError("basis is not square: " + std::to_string(dim_a) +
                           "x" + std::to_string(dim_b));
    }
    return dim_a;
  }
  std::size_t size() const { return ops.size(); }
};

inline MeasurementBasis validate_measurement_basis(std::vector<ComplexMatrix> ops,
                                                   const Tolerance& tol) {
  if (ops.empty()) throw ValidationError("measurement basis has no elements");
  const Index da = ops.front().rows();
  const Index db = ops.front().cols();
  const std::size_t expected = static_cast<std::size_t>(da * db);
  if (ops.size() != expected) {
    throw ValidationError("measurement basis on a " + std::to_string(da) + "x" +
                          std::to_string(db) + " space needs " +
                          std::to_string(expected) + " elements, got " +
                          std::to_string(ops.size()));
  }
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (ops[i].rows() != da || ops[i].cols() != db) {
      throw ValidationError("basis element " + std::to_string(i) +
                            " has shape " + shape_string(ops[i]),
                            static_cast<int>(i));
    }
    if (!all_finite(ops[i])) {
      throw ValidationError("basis element " + std::to_string(i) +
                            " has non-finite entries", static_cast<int>(i));
    }
  }
  for (std::size_t i = 0; i < ops.size(); ++i) {
    for (std::size_t j = i; j < ops.size(); ++j) {
      const Complex overlap = (ops[i].adjoint() * ops[j]).trace();
      const double expected_overlap = (i == j) ? 1.0 : 0.0;
      const double dev = std::abs(overlap - expected_overlap);
      if (dev > tol.eps_sum) {
        throw ValidationError("basis elements " + std::to_string(i) + " and " +
                              std::to_string(j) + " violate orthonormality: <" +
                              std::to_string(i) + "," + std::to_string(j) +
                              "> = " + std::to_string(std::abs(overlap)),
                              static_cast<int>(i), static_cast<int>(j), dev);
      }
    }
  }
  return MeasurementBasis{std::move(ops), da, db};
}

// Standard partial trace of a density operator on H_1 (x) H_2; keep = 1
// traces out the second factor, keep = 2 the first.
inline ComplexMatrix partial_trace(const ComplexMatrix& rho, int keep, Index d1,
                                   Index d2) {
  if (rho.rows() != d1 * d2 || rho.cols() != d1 * d2) {
    throw DimensionError("partial_trace: state is " + shape_string(rho) +
                         ", factors are " + std::to_string(d1) + " and " +
                         std::to_string(d2));
  }
  if (keep != 1 && keep != 2) {
    throw DimensionError("partial_trace: keep must be 1 or 2");
  }
  if (keep == 1) {
    ComplexMatrix out = ComplexMatrix::Zero(d1, d1);
    for (Index i = 0; i < d1; ++i)
      for (Index j = 0; j < d1; ++j)
        for (Index k = 0; k < d2; ++k) out(i, j) += rho(i * d2 + k, j * d2 + k);
    return out;
  }
  ComplexMatrix out = ComplexMatrix::Zero(d2, d2);
  for (Index i = 0; i < d2; ++i)
    for (Index j = 0; j < d2; ++j)
      for (Index k = 0; k < d1; ++k) out(i, j) += rho(k * d2 + i, k * d2 + j);
  return out;
}

// Result of refining a POVM to a rank-1 non-redundant one. Entry c of
// `refined_to_original` lists (original outcome, weight) pairs whose weights
// sum to 1; reconstructing original statistics is
//   p(a) = sum_c weight(a|c) p_refined(c).
// Original outcomes that were (numerically) zero have an empty preimage.
struct RefinedPovm {
  RankOnePovm povm;
  std::vector<std::vector<std::pair<int, double>>> refined_to_original;

  std::vector<std::vector<int>> original_preimages(std::size_t original_count) const {
    std::vector<std::vector<int>> pre(original_count);
    for (std::size_t c = 0; c < refined_to_original.size(); ++c)
      for (const auto& [orig, w] : refined_to_original[c])
        pre[static_cast<std::size_t>(orig)].push_back(static_cast<int>(c));
    return pre;
  }

  std::vector<double> fold_statistics(const std::vector<double>& refined_probs,
                                      std::size_t original_count) const {
    std::vector<double> out(original_count, 0.0);
    for (std::size_t c = 0; c < refined_to_original.size(); ++c)
      for (const auto& [orig, w] : refined_to_original[c])
        out[static_cast<std::size_t>(orig)] += w * refined_probs[c];
    return out;
  }
};

namespace detail {

// Deterministic phase fix: rotate the first component above threshold to the
// positive real axis. Keeps refinements reproducible across runs.
inline ComplexVector phase_fixed(ComplexVector v) {
  const double scale = v.norm();
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12 * scale) {
      v *= std::conj(v(i)) / std::abs(v(i));
      break;
    }
  }
  return v;
}

}  // namespace detail

// Refines a POVM into a rank-1 non-redundant one: spectral-decomposes each
// element into weighted rank-1 pieces, then merges pieces lying on the same
// ray by summation. Near-proportional but distinct pieces are NOT merged;
// the merge relation is the exact one, realized at eps_prop.
inline RefinedPovm refine_povm(const Povm& p, const Tolerance& tol) {
  struct Piece {
    ComplexVector ket;  // weight absorbed: piece = |ket><ket|
    int original;
    double trace;
  };
  std::vector<Piece> pieces;
  const Index dim = p.elements.empty() ? 0 : p.elements.front().rows();
  for (std::size_t a = 0; a < p.elements.size(); ++a) {
    const ComplexMatrix herm = (p.elements[a] + p.elements[a].adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(herm);
    if (eig.info() != Eigen::Success) {
      throw NumericalError("refine_povm: eigendecomposition failed on element " +
                           std::to_string(a));
    }
    const double max_eig = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (eig.eigenvalues().minCoeff() < -tol.eps_sum) {
      throw ValidationError("refine_povm: element " + std::to_string(a) +
                            " is not positive semidefinite",
                            static_cast<int>(a));
    }
    // Descending eigenvalue order with a deterministic phase convention.
    for (Index k = eig.eigenvalues().size() - 1; k >= 0; --k) {
      const double lambda = eig.eigenvalues()(k);
      if (lambda <= tol.eps_rank * std::max(max_eig, 0.0) || lambda <= 0.0) continue;
      ComplexVector v = detail::phase_fixed(eig.eigenvectors().col(k));
      pieces.push_back(Piece{std::sqrt(lambda) * v, static_cast<int>(a), lambda});
    }
  }

  // Merge proportional pieces. Class representatives keep insertion order.
  std::vector<ComplexMatrix> class_sums;           // summed rank-1 operators
  std::vector<std::vector<const Piece*>> classes;  // members per class
  for (const Piece& piece : pieces) {
    const ComplexMatrix op = piece.ket * piece.ket.adjoint();
    bool placed = false;
    for (std::size_t c = 0; c < class_sums.size(); ++c) {
      if (proportional_up_to_scalar(op, class_sums[c], tol)) {
        class_sums[c] += op;
        classes[c].push_back(&piece);
        placed = true;
        break;
      }
    }
    if (!placed) {
      class_sums.push_back(op);
      classes.push_back({&piece});
    }
  }

  RefinedPovm out;
  for (std::size_t c = 0; c < class_sums.size(); ++c) {
    // The class sum is rank-1 by construction; extract its ket.
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(class_sums[c]);
    const Index top = eig.eigenvalues().size() - 1;
    ComplexVector ket = detail::phase_fixed(eig.eigenvectors().col(top)) *
                        std::sqrt(std::max(eig.eigenvalues()(top), 0.0));
    // Store each refined outcome as a ket on the original space (column
    // vector viewed as an operator C^1 -> H for DoubleKet bookkeeping).
    ComplexMatrix as_op(dim, 1);
    for (Index i = 0; i < dim; ++i) as_op(i, 0) = ket(i);
    out.povm.kets.push_back(DoubleKet{as_op});

    double class_trace = 0.0;
    for (const Piece* piece : classes[c]) class_trace += piece->trace;
    std::vector<std::pair<int, double>> weights;
    for (const Piece* piece : classes[c]) {
      weights.emplace_back(piece->original, piece->trace / class_trace);
    }
    // Collapse duplicate originals within a class.
    std::vector<std::pair<int, double>> folded;
    for (const auto& [orig, w] : weights) {
      bool found = false;
      for (auto& [o2, w2] : folded) {
        if (o2 == orig) {
          w2 += w;
          found = true;
          break;
        }
      }
      if (!found) folded.emplace_back(orig, w);
    }
    out.refined_to_original.push_back(std::move(folded));
  }
  return out;
}

}  // namespace locmeas
