#pragma once

// Reference computations used by tests and cross-checks. Each routine is
// algorithmically unrelated to the production path it validates.

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include "skipfree/model.hpp"

namespace skipfree {

using Rational = boost::multiprecision::cpp_rational;

/// The generator restricted to states 1..N. The diagonal keeps -Q(x), so
/// jumps to 0 and to states above N act as killing.
struct DenseSubGenerator {
  int N = 0;
  Eigen::MatrixXd Q;  // Q(i, j) for states i + 1, j + 1
};

DenseSubGenerator make_sub_generator(const SkipFreeGenerator& gen, int N);

/// Column y of W^(q) from the linear system of the eigen-equation (rows
/// x = 1..y-1 plus the band condition at x = y), solved by dense Gaussian
/// elimination with partial pivoting. Throws SingularSystem on a zero pivot.
std::vector<double> dense_scale_solve(const SkipFreeGenerator& gen, double q, State y);
std::vector<std::complex<double>> dense_scale_solve(const SkipFreeGenerator& gen, std::complex<double> q, State y);

/// Same system in exact rational arithmetic. Rates are converted from their
/// double values exactly, so chains with dyadic rates give exact fractions.
/// Intended for y <= 15.
std::vector<Rational> dense_scale_solve_exact(const SkipFreeGenerator& gen, const Rational& q, State y);

/// Pivoted elimination on a dense square system, shared by the routines above.
template <class T>
std::vector<T> pivoted_solve(std::vector<std::vector<T>> a, std::vector<T> b);

struct DecayEigenResult {
  double value = 0.0;  // -(leading eigenvalue of the sub-generator)
  double lower = 0.0;  // Collatz-Wielandt bracket
  double upper = 0.0;
  int iterations = 0;
  std::vector<double> vector;  // right Perron vector of (-Q_N)^{-1}, max-normalised
};

/// Slowest decay rate of the sub-generator by inverse power iteration at
/// shift 0. -Q_N is a nonsingular M-matrix; its LU factors are formed
/// without subtractions (row deficits are carried and diagonals rebuilt from
/// them), so every solve is componentwise accurate even when Q_N is far from
/// normal. The iteration stops when the Collatz-Wielandt bracket has relative
/// width below rel_tol. Throws IterationDivergence after max_iter sweeps.
DecayEigenResult leading_decay_eigenvalue(const DenseSubGenerator& sub, double rel_tol = 1e-12,
                                          int max_iter = 500000);

enum class ActionSide {
  Left,   // v^T exp(t Q_N), propagates a measure
  Right,  // exp(t Q_N) v, propagates a function of the starting state
};

/// exp(t Q_N) applied to v by Pade scaling-and-squaring. Throws OverflowGuard
/// when t ||Q_N|| is out of range or the result is not finite.
Eigen::VectorXd matrix_exponential_action(const DenseSubGenerator& sub, const Eigen::VectorXd& v, double t,
                                          ActionSide side = ActionSide::Left);

}  // namespace skipfree
