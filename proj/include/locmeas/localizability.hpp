#pragma once

// Decision engine and synthesizer for localizing rank-1 PVMs with a shared
// entangled resource and non-adaptive local measurements: triple-product
// closure, the equal-resource classification, explicit protocol
// construction, direct verification by brute tensor contraction, resource
// compression, and the outcome-count bound.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "locmeas/bipartite.hpp"
#include "locmeas/core.hpp"
#include "locmeas/error_basis.hpp"

namespace locmeas {

// Deterministic classical post-processing f : X x Y -> Z for rank-1
// localizations. In the equal-resource regime with a full-Schmidt-rank
// target the table is forced to be a Latin square.
struct PatternFunction {
  int x_size = 0;
  int y_size = 0;
  int z_size = 0;
  std::vector<int> table;  // row-major, x major

  int at(int a, int b) const {
    return table[static_cast<std::size_t>(a) * y_size + b];
  }
  int& at(int a, int b) {
    return table[static_cast<std::size_t>(a) * y_size + b];
  }

  bool is_latin() const {
    if (x_size != y_size || y_size != z_size) return false;
    LatinSquare ls{x_size, table};
    return ls.valid();
  }
};

// Rank-1 localization tuple. Alice operators map R_A -> S_A, Bob operators
// S_B -> R_B, the resource R_B -> R_A; the resource ket has unit norm and
// proportionality constants are re-derived at verification time rather than
// stored.
struct Localization {
  DoubleKet resource;
  RankOnePovm alice;
  RankOnePovm bob;
  PatternFunction pattern;

  Index dim_sa() const { return alice.dim_out(); }
  Index dim_ra() const { return alice.dim_in(); }
  Index dim_sb() const { return bob.dim_in(); }
  Index dim_rb() const { return bob.dim_out(); }
};

enum class VerdictReason {
  Localizable,
  NotMaxEntangledBasis,
  NotNice,
  MixedRanks,
  OutOfHypothesis,  // no element of maximal Schmidt rank: the equal-resource
                    // criterion makes no statement, distinct from a rejection
};

inline const char* to_string(VerdictReason r) {
  switch (r) {
    case VerdictReason::Localizable: return "Localizable";
    case VerdictReason::NotMaxEntangledBasis: return "NotMaxEntangledBasis";
    case VerdictReason::NotNice: return "NotNice";
    case VerdictReason::MixedRanks: return "MixedRanks";
    case VerdictReason::OutOfHypothesis: return "OutOfHypothesis";
  }
  return "?";
}

struct Verdict {
  bool localizable = false;
  VerdictReason reason = VerdictReason::OutOfHypothesis;
  int witness_index = -1;                        // failing element, if any
  std::array<int, 3> witness_triple{-1, -1, -1}; // failing (i, j, k), if any
};

// Closure table l(i, j, k) with M_i M_j^{-1} M_k proportional to M_l, or the
// first failing triple. Requires every element to be invertible; a singular
// element alongside a full-rank one is rejected immediately since closure is
// impossible then.
struct ClosureResult {
  bool closed = false;
  std::vector<int> table;  // l = table[(i*n + j)*n + k]
  std::array<int, 3> failing_triple{-1, -1, -1};

  int at(int i, int j, int k, int n) const {
    return table[(static_cast<std::size_t>(i) * n + j) * n + k];
  }
};

inline ClosureResult triple_product_closure(const MeasurementBasis& basis,
                                            const Tolerance& tol) {
  const Index d = basis.dim();
  const int n = static_cast<int>(basis.size());
  for (int j = 0; j < n; ++j) {
    if (numeric_rank(basis.ops[static_cast<std::size_t>(j)], tol) != d) {
      throw NumericalError("triple products need invertible elements; element " +
                           std::to_string(j) + " is singular");
    }
  }
  std::vector<ComplexMatrix> inverses;
  inverses.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    inverses.push_back(inverse_checked(basis.ops[static_cast<std::size_t>(j)], tol));
  }

  ClosureResult result;
  result.table.assign(static_cast<std::size_t>(n) * n * n, -1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const ComplexMatrix left =
          basis.ops[static_cast<std::size_t>(i)] * inverses[static_cast<std::size_t>(j)];
      for (int k = 0; k < n; ++k) {
        const ComplexMatrix prod = left * basis.ops[static_cast<std::size_t>(k)];
        int match = -1;
        for (int l = 0; l < n; ++l) {
          if (proportional_up_to_scalar(prod, basis.ops[static_cast<std::size_t>(l)],
                                        tol)) {
            match = l;
            break;
          }
        }
        if (match < 0) {
          result.closed = false;
          result.failing_triple = {i, j, k};
          return result;
        }
        result.table[(static_cast<std::size_t>(i) * n + j) * n + k] = match;
      }
    }
  }
  result.closed = true;
  return result;
}

// Equal-resource decision: a square rank-1 PVM basis with at least one
// element of maximal Schmidt rank is localizable by an equal-sized resource
// iff it is a maximally entangled basis whose lifted unitary family is
// LU-equivalent to a multiplicatively closed one.
inline Verdict classify_equal_resource(const MeasurementBasis& basis,
                                       const Tolerance& tol) {
  const Index d = basis.dim();
  std::vector<Index> ranks;
  ranks.reserve(basis.size());
  Index max_rank = 0;
  for (const auto& op : basis.ops) {
    ranks.push_back(numeric_rank(op, tol));
    max_rank = std::max(max_rank, ranks.back());
  }
  if (max_rank < d) {
    return Verdict{false, VerdictReason::OutOfHypothesis};
  }
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (ranks[i] < d) {
      Verdict v{false, VerdictReason::MixedRanks};
      v.witness_index = static_cast<int>(i);
      return v;
    }
  }
  for (std::size_t i = 0; i < basis.ops.size(); ++i) {
    if (!is_maximally_entangled(basis.ops[i], tol)) {
      Verdict v{false, VerdictReason::NotMaxEntangledBasis};
      v.witness_index = static_cast<int>(i);
      return v;
    }
  }
  const UebLift lift = basis_to_ueb(basis, tol);
  if (!lift.ueb) {
    Verdict v{false, VerdictReason::NotMaxEntangledBasis};
    v.witness_index = lift.failing_index;
    return v;
  }
  NicenessFailure fail;
  const LuNiceResult nice = check_lu_equivalent_to_nice(*lift.ueb, tol, 0, &fail);
  if (!nice.equivalent) {
    Verdict v{false, VerdictReason::NotNice};
    v.witness_triple = {fail.i, 0, fail.j};
    return v;
  }
  return Verdict{true, VerdictReason::Localizable};
}

// Explicit localization of a localizable basis: both parties measure in the
// target basis itself, the resource is the transposed j-th element, and the
// pattern comes from the triple-product table at that j. Any j works; the
// default is 0.
inline Localization construct_localization(const MeasurementBasis& basis, int j,
                                           const Tolerance& tol) {
  const Index d = basis.dim();
  const int n = static_cast<int>(basis.size());
  if (j < 0 || j >= n) {
    throw DimensionError("resource index " + std::to_string(j) +
                         " out of range [0," + std::to_string(n) + ")");
  }
  for (int i = 0; i < n; ++i) {
    if (numeric_rank(basis.ops[static_cast<std::size_t>(i)], tol) != d) {
      throw NumericalError("construct_localization called on a basis with a "
                           "singular element (index " + std::to_string(i) + ")");
    }
  }
  const ComplexMatrix inv_j =
      inverse_checked(basis.ops[static_cast<std::size_t>(j)], tol);

  PatternFunction pattern{n, n, n, std::vector<int>(static_cast<std::size_t>(n) * n, -1)};
  for (int i = 0; i < n; ++i) {
    const ComplexMatrix left = basis.ops[static_cast<std::size_t>(i)] * inv_j;
    for (int k = 0; k < n; ++k) {
      const ComplexMatrix prod = left * basis.ops[static_cast<std::size_t>(k)];
      int match = -1;
      for (int l = 0; l < n; ++l) {
        const auto alpha = proportional_up_to_scalar(
            prod, basis.ops[static_cast<std::size_t>(l)], tol);
        if (alpha) {
          match = l;
          break;
        }
      }
      if (match < 0) {
        throw NumericalError("construct_localization called on a non-localizable "
                             "basis: no match for triple (" + std::to_string(i) +
                             "," + std::to_string(j) + "," + std::to_string(k) + ")");
      }
      pattern.at(i, k) = match;
    }
  }

  Localization loc;
  loc.resource = DoubleKet{basis.ops[static_cast<std::size_t>(j)].transpose()};
  for (int i = 0; i < n; ++i) {
    loc.alice.kets.push_back(DoubleKet{basis.ops[static_cast<std::size_t>(i)]});
    loc.bob.kets.push_back(DoubleKet{basis.ops[static_cast<std::size_t>(i)]});
  }
  loc.pattern = std::move(pattern);
  return loc;
}

// Localization in fully general (not necessarily rank-1) form: local POVM
// elements on S_A (x) R_A and S_B (x) R_B, a resource density operator on
// R_A (x) R_B, and stochastic post-processing p(c | a, b).
struct GeneralLocalization {
  std::vector<ComplexMatrix> alice_elements;  // on S_A (x) R_A, S_A major
  std::vector<ComplexMatrix> bob_elements;    // on S_B (x) R_B, S_B major
  ComplexMatrix resource_state;               // density on R_A (x) R_B, R_A major
  std::vector<Eigen::MatrixXd> post_processing;  // per outcome c: |X| x |Y|
  Index dim_sa = 0, dim_ra = 0, dim_sb = 0, dim_rb = 0;
};

inline GeneralLocalization to_general(const Localization& loc) {
  GeneralLocalization gen;
  gen.dim_sa = loc.dim_sa();
  gen.dim_ra = loc.dim_ra();
  gen.dim_sb = loc.dim_sb();
  gen.dim_rb = loc.dim_rb();
  for (const auto& k : loc.alice.kets) {
    const ComplexVector v = k.vector();  // S_A major when out-major flattened
    gen.alice_elements.push_back(v * v.adjoint());
  }
  for (const auto& k : loc.bob.kets) {
    // Bob vectors are S_B major: amplitude (s_b, r_b) = B(r_b, s_b).
    ComplexVector v(k.op.size());
    for (Index sb = 0; sb < k.dim_in(); ++sb)
      for (Index rb = 0; rb < k.dim_out(); ++rb)
        v(sb * k.dim_out() + rb) = k.op(rb, sb);
    gen.bob_elements.push_back(v * v.adjoint());
  }
  const ComplexVector r = loc.resource.vector();  // R_A major
  gen.resource_state = r * r.adjoint();
  gen.post_processing.assign(
      static_cast<std::size_t>(loc.pattern.z_size),
      Eigen::MatrixXd::Zero(loc.pattern.x_size, loc.pattern.y_size));
  for (int a = 0; a < loc.pattern.x_size; ++a)
    for (int b = 0; b < loc.pattern.y_size; ++b)
      gen.post_processing[static_cast<std::size_t>(loc.pattern.at(a, b))](a, b) = 1.0;
  return gen;
}

// Direct evaluation of one joint branch: the partial trace over R_A, R_B of
// (A (x) B)(I (x) psi), written as an explicit index contraction with no
// structural shortcut. This is the independent oracle that the algebraic
// fast paths are checked against.
inline ComplexMatrix branch_reduction(const ComplexMatrix& alice_el,
                                      const ComplexMatrix& bob_el,
                                      const ComplexMatrix& resource, Index dsa,
                                      Index dra, Index dsb, Index drb) {
  ComplexMatrix t = ComplexMatrix::Zero(dsa * dsb, dsa * dsb);
  for (Index sa = 0; sa < dsa; ++sa)
    for (Index sb = 0; sb < dsb; ++sb)
      for (Index sa2 = 0; sa2 < dsa; ++sa2)
        for (Index sb2 = 0; sb2 < dsb; ++sb2) {
          Complex acc(0.0, 0.0);
          for (Index ra = 0; ra < dra; ++ra)
            for (Index rb = 0; rb < drb; ++rb)
              for (Index ra2 = 0; ra2 < dra; ++ra2)
                for (Index rb2 = 0; rb2 < drb; ++rb2)
                  acc += alice_el(sa * dra + ra, sa2 * dra + ra2) *
                         bob_el(sb * drb + rb, sb2 * drb + rb2) *
                         resource(ra2 * drb + rb2, ra * drb + rb);
          t(sa * dsb + sb, sa2 * dsb + sb2) = acc;
        }
  return t;
}

struct VerificationReport {
  double max_residual = 0.0;
  std::vector<double> per_outcome_residuals;
  bool schmidt_precheck_applicable = false;
  bool schmidt_precheck_ok = true;
  std::string schmidt_note;
  bool structure_applicable = false;
  bool structure_ok = true;
  std::string structure_note;

  bool passed(double eps) const {
    return schmidt_precheck_ok && structure_ok && max_residual <= eps;
  }
};

// Checks a localization against explicit target POVM elements by brute
// contraction of every branch. Local POVMs and the post-processing are
// validated first.
inline VerificationReport verify_localization(
    const std::vector<ComplexMatrix>& target_elements,
    const GeneralLocalization& gen, const Tolerance& tol) {
  const Index joint = gen.dim_sa * gen.dim_sb;
  for (const auto& m : target_elements) {
    if (m.rows() != joint || m.cols() != joint) {
      throw DimensionError("target element is " + shape_string(m) +
                           ", expected " + std::to_string(joint) + "x" +
                           std::to_string(joint));
    }
  }
  validate_povm(gen.alice_elements, tol);
  validate_povm(gen.bob_elements, tol);
  if (gen.resource_state.rows() != gen.dim_ra * gen.dim_rb) {
    throw DimensionError("resource state dimension mismatch");
  }
  const double res_trace_dev = std::abs(gen.resource_state.trace() - Complex(1.0));
  if (res_trace_dev > tol.eps_sum) {
    throw ValidationError("resource state has trace deviating by " +
                          std::to_string(res_trace_dev));
  }
  const std::size_t nx = gen.alice_elements.size();
  const std::size_t ny = gen.bob_elements.size();
  if (gen.post_processing.size() != target_elements.size()) {
    throw DimensionError("post-processing outcome count mismatch");
  }
  for (std::size_t a = 0; a < nx; ++a) {
    for (std::size_t b = 0; b < ny; ++b) {
      double total = 0.0;
      for (const auto& pc : gen.post_processing) {
        const double p = pc(static_cast<Index>(a), static_cast<Index>(b));
        if (p < -tol.eps_sum) {
          throw ValidationError("negative post-processing probability");
        }
        total += p;
      }
      if (std::abs(total - 1.0) > tol.eps_sum) {
        throw ValidationError("post-processing for branch (" + std::to_string(a) +
                              "," + std::to_string(b) + ") sums to " +
                              std::to_string(total));
      }
    }
  }

  VerificationReport report;

  // Branch reductions, evaluated once and reused for every outcome.
  std::vector<ComplexMatrix> branches(nx * ny);
  for (std::size_t a = 0; a < nx; ++a)
    for (std::size_t b = 0; b < ny; ++b)
      branches[a * ny + b] =
          branch_reduction(gen.alice_elements[a], gen.bob_elements[b],
                           gen.resource_state, gen.dim_sa, gen.dim_ra, gen.dim_sb,
                           gen.dim_rb);

  report.per_outcome_residuals.resize(target_elements.size(), 0.0);
  for (std::size_t c = 0; c < target_elements.size(); ++c) {
    ComplexMatrix acc = ComplexMatrix::Zero(joint, joint);
    for (std::size_t a = 0; a < nx; ++a)
      for (std::size_t b = 0; b < ny; ++b) {
        const double p = gen.post_processing[c](static_cast<Index>(a),
                                                static_cast<Index>(b));
        if (p != 0.0) acc += p * branches[a * ny + b];
      }
    const double res = (acc - target_elements[c]).norm();
    report.per_outcome_residuals[c] = res;
    report.max_residual = std::max(report.max_residual, res);
  }
  return report;
}

// Rank-1 wrapper: adds the Schmidt-rank necessary conditions (the resource
// and each party's operators must reach the largest target Schmidt rank) and
// the structural facts forced in the equal-resource full-rank regime (local
// PVMs of exactly d^2 full-rank elements and a Latin-square pattern).
inline VerificationReport verify_localization(const MeasurementBasis& target,
                                              const Localization& loc,
                                              const Tolerance& tol) {
  if (target.dim_a != loc.dim_sa() || target.dim_b != loc.dim_sb()) {
    throw DimensionError("localization does not act on the target's spaces");
  }
  validate_rank_one_povm(loc.alice, tol);
  validate_rank_one_povm(loc.bob, tol);

  std::vector<ComplexMatrix> target_elements;
  target_elements.reserve(target.size());
  for (const auto& op : target.ops) {
    const ComplexVector v = DoubleKet{op}.vector();
    target_elements.push_back(v * v.adjoint());
  }

  VerificationReport report =
      verify_localization(target_elements, to_general(loc), tol);

  Index max_target_rank = 0;
  for (const auto& op : target.ops)
    max_target_rank = std::max(max_target_rank, numeric_rank(op, tol));

  report.schmidt_precheck_applicable = true;
  const Index resource_rank = schmidt_rank(loc.resource, tol);
  Index max_alice = 0, max_bob = 0;
  for (const auto& k : loc.alice.kets)
    max_alice = std::max(max_alice, schmidt_rank(k, tol));
  for (const auto& k : loc.bob.kets)
    max_bob = std::max(max_bob, schmidt_rank(k, tol));
  if (resource_rank < max_target_rank) {
    report.schmidt_precheck_ok = false;
    report.schmidt_note = "resource Schmidt rank " + std::to_string(resource_rank) +
                          " below target maximum " + std::to_string(max_target_rank);
  } else if (max_alice < max_target_rank || max_bob < max_target_rank) {
    report.schmidt_precheck_ok = false;
    report.schmidt_note = "local operator Schmidt ranks (" +
                          std::to_string(max_alice) + "," + std::to_string(max_bob) +
                          ") below target maximum " + std::to_string(max_target_rank);
  }

  // Structural constraints hold when all five spaces share one dimension and
  // the target reaches full Schmidt rank.
  const Index d = target.dim_a;
  const bool equal_sized = target.dim_b == d && loc.dim_ra() == d && loc.dim_rb() == d;
  if (equal_sized && max_target_rank == d) {
    report.structure_applicable = true;
    const std::size_t n = static_cast<std::size_t>(d) * d;
    if (loc.alice.size() != n || loc.bob.size() != n) {
      report.structure_ok = false;
      report.structure_note = "local POVMs must have exactly " + std::to_string(n) +
                              " outcomes";
    } else if (!loc.pattern.is_latin()) {
      report.structure_ok = false;
      report.structure_note = "pattern table is not a Latin square";
    } else {
      for (std::size_t i = 0; i < loc.alice.size(); ++i) {
        if (schmidt_rank(loc.alice.kets[i], tol) != d ||
            schmidt_rank(loc.bob.kets[i], tol) != d) {
          report.structure_ok = false;
          report.structure_note = "local operator " + std::to_string(i) +
                                  " is not full rank";
          break;
        }
      }
    }
  }
  return report;
}

// Conjugates a localization of the basis {N_c} into one of the basis
// {M_i} related by u_A M_i u_B^T = phase * N_{perm(i)}.
inline Localization conjugate_localization(const Localization& loc,
                                           const ComplexMatrix& u_a,
                                           const ComplexMatrix& u_b,
                                           const std::vector<int>& perm) {
  Localization out;
  out.resource = loc.resource;
  for (const auto& k : loc.alice.kets)
    out.alice.kets.push_back(DoubleKet{u_a.adjoint() * k.op});
  for (const auto& k : loc.bob.kets)
    out.bob.kets.push_back(DoubleKet{k.op * u_b.conjugate()});
  std::vector<int> inverse(perm.size(), -1);
  for (std::size_t i = 0; i < perm.size(); ++i)
    inverse[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
  out.pattern = loc.pattern;
  for (auto& entry : out.pattern.table)
    entry = inverse[static_cast<std::size_t>(entry)];
  return out;
}

// Localization of the party-swapped target {M_i^T}: transpose every role and
// flip the pattern's arguments.
inline Localization party_swap_localization(const Localization& loc) {
  Localization out;
  out.resource = DoubleKet{loc.resource.op.transpose()};
  for (const auto& k : loc.bob.kets)
    out.alice.kets.push_back(DoubleKet{k.op.transpose()});
  for (const auto& k : loc.alice.kets)
    out.bob.kets.push_back(DoubleKet{k.op.transpose()});
  out.pattern = PatternFunction{loc.pattern.y_size, loc.pattern.x_size,
                                loc.pattern.z_size,
                                std::vector<int>(loc.pattern.table.size(), -1)};
  for (int a = 0; a < out.pattern.x_size; ++a)
    for (int b = 0; b < out.pattern.y_size; ++b)
      out.pattern.at(a, b) = loc.pattern.at(b, a);
  return out;
}

// Shrinks an oversized resource onto its local supports, conjugating the
// local operators with the same isometries; the reduced tuple reproduces the
// original outcome operators exactly. Outcomes whose operators vanish after
// compression are dropped.
inline Localization compress_resource(const Localization& loc, const Tolerance& tol) {
  if (loc.dim_sa() != loc.dim_sb()) {
    throw DimensionError("compression expects equal target dimensions");
  }
  const Index d = loc.dim_sa();
  const Index dra = loc.dim_ra();
  const Index drb = loc.dim_rb();
  if (dra < d || drb < d) {
    throw DimensionError("resource spaces are smaller than the target dimension");
  }
  const SvdResult dec = svd(loc.resource.op);
  const Index rank = numeric_rank(loc.resource.op, tol);
  if (rank > d) {
    throw ValidationError("resource Schmidt rank " + std::to_string(rank) +
                          " exceeds the target dimension " + std::to_string(d));
  }
  const ComplexMatrix va = dec.u.leftCols(d);             // isometry C^d -> R_A
  const ComplexMatrix vb = dec.v.leftCols(d).conjugate(); // isometry C^d -> R_B

  Localization out;
  out.resource = DoubleKet{va.adjoint() * loc.resource.op * vb.conjugate()};
  std::vector<int> alice_kept, bob_kept;
  for (std::size_t a = 0; a < loc.alice.size(); ++a) {
    ComplexMatrix compressed = loc.alice.kets[a].op * va.conjugate();
    if (compressed.norm() <= tol.eps_sum) continue;
    alice_kept.push_back(static_cast<int>(a));
    out.alice.kets.push_back(DoubleKet{std::move(compressed)});
  }
  for (std::size_t b = 0; b < loc.bob.size(); ++b) {
    ComplexMatrix compressed = vb.adjoint() * loc.bob.kets[b].op;
    if (compressed.norm() <= tol.eps_sum) continue;
    bob_kept.push_back(static_cast<int>(b));
    out.bob.kets.push_back(DoubleKet{std::move(compressed)});
  }
  out.pattern = PatternFunction{static_cast<int>(alice_kept.size()),
                                static_cast<int>(bob_kept.size()),
                                loc.pattern.z_size, {}};
  out.pattern.table.resize(static_cast<std::size_t>(out.pattern.x_size) *
                           out.pattern.y_size);
  for (int a = 0; a < out.pattern.x_size; ++a)
    for (int b = 0; b < out.pattern.y_size; ++b)
      out.pattern.at(a, b) =
          loc.pattern.at(alice_kept[static_cast<std::size_t>(a)],
                         bob_kept[static_cast<std::size_t>(b)]);
  validate_rank_one_povm(out.alice, tol);
  validate_rank_one_povm(out.bob, tol);
  return out;
}

// Upper bound on the number of local outcomes needed by any localization:
// (|Z| - 1) * (dim of the full four-party space)^2 + 1.
inline std::uint64_t outcome_bound(std::uint64_t z_size, std::uint64_t dim_sa,
                                   std::uint64_t dim_sb, std::uint64_t dim_ra,
                                   std::uint64_t dim_rb) {
  const std::uint64_t total = dim_sa * dim_sb * dim_ra * dim_rb;
  return (z_size - 1) * total * total + 1;
}

}  // namespace locmeas
