#pragma once

// Dense complex linear algebra primitives with an explicit tolerance policy.
// Everything downstream (basis validation, localizability decisions, protocol
// simulation) is built on the three operations defined here: proportionality
// up to a complex scalar, SVD, and tolerance-based numeric rank.

#include <complex>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace locmeas {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

// Carries the offending element pair and the measured deviation so callers
// (CLI reports in particular) can surface structured diagnostics.
struct ValidationError : Error {
  int index_a = -1;
  int index_b = -1;
  double deviation = 0.0;

  explicit ValidationError(const std::string& msg, int a = -1, int b = -1,
                           double dev = 0.0)
      : Error(msg), index_a(a), index_b(b), deviation(dev) {}
};

struct NumericalError : Error {
  using Error::Error;
};

// Relative slacks realizing the exact-arithmetic relations "proportional to",
// "rank", and "sums to identity" in floating point. Defaults sit three orders
// of magnitude above double-precision SVD noise at the dimensions this
// library targets.
struct Tolerance {
  double eps_prop = 1e-9;  // proportionality slack, relative to |A|_F
  double eps_rank = 1e-8;  // singular-value cutoff, relative to sigma_max
  double eps_sum = 1e-9;   // completeness / orthonormality slack

  void validate() const {
    auto check = [](double v, const char* name) {
      if (!(v > 0.0) || !(v < 1e-2)) {
        throw ValidationError(std::string("tolerance ") + name +
                              " must lie in (0, 1e-2)");
      }
    };
    check(eps_prop, "eps_prop");
    check(eps_rank, "eps_rank");
    check(eps_sum, "eps_sum");
  }

  // Environment overrides, used by the CLI and echoed into every report.
  static Tolerance from_env() {
    Tolerance tol;
    auto load = [](const char* name, double& slot) {
      if (const char* v = std::getenv(name)) {
        slot = std::strtod(v, nullptr);
      }
    };
    load("LOCMEAS_EPS_PROP", tol.eps_prop);
    load("LOCMEAS_EPS_RANK", tol.eps_rank);
    load("LOCMEAS_EPS_SUM", tol.eps_sum);
    tol.validate();
    return tol;
  }
};

inline bool all_finite(const ComplexMatrix& m) {
  return m.allFinite();
}

inline std::string shape_string(const ComplexMatrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

inline void require_same_shape(const ComplexMatrix& a, const ComplexMatrix& b,
                               const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " +
                         shape_string(a) + " vs " + shape_string(b));
  }
}

// Decides A = alpha * B and returns alpha when it holds.
//
// The relation is asymmetric: the zero matrix is proportional to everything
// (alpha = 0), while a nonzero A is never proportional to the zero matrix.
// alpha is the Frobenius projection coefficient <B,A>/|B|^2, which is stable
// near zero entries where entrywise ratios are not; alpha = 0 is accepted
// only when A itself vanishes within eps_prop * |B|_F.
inline std::optional<Complex> proportional_up_to_scalar(const ComplexMatrix& a,
                                                        const ComplexMatrix& b,
                                                        const Tolerance& tol) {
  require_same_shape(a, b, "proportional_up_to_scalar");
  const double norm_a = a.norm();
  const double norm_b = b.norm();
  if (norm_b == 0.0) {
    if (norm_a == 0.0) return Complex(0.0, 0.0);
    return std::nullopt;
  }
  if (norm_a <= tol.eps_prop * norm_b) return Complex(0.0, 0.0);
  const Complex alpha = (b.conjugate().cwiseProduct(a)).sum() / (norm_b * norm_b);
  const double residual = (a - alpha * b).norm();
  if (residual <= tol.eps_prop * norm_a) return alpha;
  return std::nullopt;
}

struct SvdResult {
  ComplexMatrix u;           // left singular vectors, columns
  RealVector singular_values;  // nonnegative, descending
  ComplexMatrix v;           // right singular vectors, A = U S V^dagger
};

inline SvdResult svd(const ComplexMatrix& a) {
  Eigen::JacobiSVD<ComplexMatrix> solver(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("svd failed to converge on a " + shape_string(a) +
                         " matrix");
  }
  return SvdResult{solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

// Count of singular values above eps_rank * sigma_max; zero for the zero
// matrix. For a bipartite vector stored as an operator this is its Schmidt
// rank.
inline Index numeric_rank(const ComplexMatrix& a, const Tolerance& tol) {
  if (a.size() == 0) return 0;
  const RealVector sv = svd(a).singular_values;
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  const double cutoff = tol.eps_rank * sv(0);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  return rank;
}

// Inverses are only meaningful on numerically full-rank matrices; the
// localizability scans guarantee full rank on every path where an inverse
// appears, and this guard turns a violated assumption into a hard error
// instead of amplified noise.
inline ComplexMatrix inverse_checked(const ComplexMatrix& a, const Tolerance& tol) {
  if (a.rows() != a.cols()) {
    throw DimensionError("inverse of non-square " + shape_string(a) + " matrix");
  }
  if (numeric_rank(a, tol) != a.rows()) {
    throw NumericalError("inverse of numerically singular matrix (" +
                         shape_string(a) + ")");
  }
  return a.inverse();
}

inline ComplexMatrix identity(Index d) {
  return ComplexMatrix::Identity(d, d);
}

inline bool approx_hermitian(const ComplexMatrix& m, double eps) {
  return (m - m.adjoint()).norm() <= eps;
}

}  // namespace locmeas
