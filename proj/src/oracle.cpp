#include "skipfree/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "skipfree/error.hpp"

namespace skipfree {

namespace {

double pivot_size(double v) { return std::abs(v); }
double pivot_size(const std::complex<double>& v) { return std::abs(v); }
Rational pivot_size(const Rational& v) { return v < 0 ? Rational(-v) : v; }

bool is_zero(double v) { return v == 0.0; }
bool is_zero(const std::complex<double>& v) { return v == std::complex<double>{}; }
bool is_zero(const Rational& v) { return v == 0; }

// Rows x = 1..y-1: sum_z Q(x,z) w(z) - q w(x) = 0; row y: Q(y,y-1) w(y-1) = 1.
template <class T, class Conv>
std::vector<T> scale_system_solve(const SkipFreeGenerator& gen, const T& q, State y, Conv conv) {
  if (y < 1 || y > gen.horizon()) throw Error(ErrorCode::HorizonExceeded, "dense_scale_solve: y out of range");
  const auto n = static_cast<std::size_t>(y);
  std::vector<std::vector<T>> a(n, std::vector<T>(n, T(0)));
  std::vector<T> b(n, T(0));
  for (State x = 1; x < y; ++x) {
    auto& row = a[static_cast<std::size_t>(x - 1)];
    row[x - 1] = conv(gen.down_rate(x));
    row[x] = T(0) - conv(gen.total_rate(x)) - q;
    for (const UpJump& j : gen.up_rates(x))
      if (x + j.size < y) row[static_cast<std::size_t>(x + j.size)] = conv(j.rate);
  }
  a[n - 1][n - 1] = conv(gen.down_rate(y));
  b[n - 1] = T(1);
  return pivoted_solve(std::move(a), std::move(b));
}

}  // namespace

template <class T>
std::vector<T> pivoted_solve(std::vector<std::vector<T>> a, std::vector<T> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    auto best = pivot_size(a[k][k]);
    for (std::size_t i = k + 1; i < n; ++i) {
      auto s = pivot_size(a[i][k]);
      if (s > best) {
        best = s;
        p = i;
      }
    }
    if (is_zero(a[p][k])) throw Error(ErrorCode::SingularSystem, "zero pivot in column " + std::to_string(k));
    std::swap(a[p], a[k]);
    std::swap(b[p], b[k]);
    for (std::size_t i = k + 1; i < n; ++i) {
      if (is_zero(a[i][k])) continue;
      const T m = a[i][k] / a[k][k];
      for (std::size_t j = k; j < n; ++j) a[i][j] -= m * a[k][j];
      b[i] -= m * b[k];
    }
  }
  std::vector<T> x(n, T(0));
  for (std::size_t i = n; i-- > 0;) {
    T s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

template std::vector<double> pivoted_solve(std::vector<std::vector<double>>, std::vector<double>);
template std::vector<std::complex<double>> pivoted_solve(std::vector<std::vector<std::complex<double>>>,
                                                         std::vector<std::complex<double>>);
template std::vector<Rational> pivoted_solve(std::vector<std::vector<Rational>>, std::vector<Rational>);

DenseSubGenerator make_sub_generator(const SkipFreeGenerator& gen, int N) {
  if (N < 1 || N > gen.horizon()) throw Error(ErrorCode::HorizonExceeded, "sub-generator size out of range");
  DenseSubGenerator sub;
  sub.N = N;
  sub.Q = Eigen::MatrixXd::Zero(N, N);
  for (State x = 1; x <= N; ++x) {
    sub.Q(x - 1, x - 1) = -gen.total_rate(x);
    if (x >= 2) sub.Q(x - 1, x - 2) = gen.down_rate(x);
    for (const UpJump& j : gen.up_rates(x))
      if (x + j.size <= N) sub.Q(x - 1, x - 1 + j.size) = j.rate;
  }
  return sub;
}

std::vector<double> dense_scale_solve(const SkipFreeGenerator& gen, double q, State y) {
  return scale_system_solve<double>(gen, q, y, [](double r) { return r; });
}

std::vector<std::complex<double>> dense_scale_solve(const SkipFreeGenerator& gen, std::complex<double> q, State y) {
  return scale_system_solve<std::complex<double>>(gen, q, y, [](double r) { return std::complex<double>(r); });
}

std::vector<Rational> dense_scale_solve_exact(const SkipFreeGenerator& gen, const Rational& q, State y) {
  return scale_system_solve<Rational>(gen, q, y, [](double r) { return Rational(r); });
}

DecayEigenResult leading_decay_eigenvalue(const DenseSubGenerator& sub, double rel_tol, int max_iter) {
  const int n = sub.N;
  if (n < 1) throw Error(ErrorCode::ParameterViolation, "empty sub-generator");
  DecayEigenResult out;
  if (n == 1) {
    out.value = out.lower = out.upper = -sub.Q(0, 0);
    out.vector = {1.0};
    return out;
  }

  // A = -Q_N with nonpositive off-diagonals; deficit[i] = A's row sum >= 0.
  Eigen::MatrixXd a = -sub.Q;
  std::vector<double> deficit(n);
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) off += sub.Q(i, j);
    deficit[i] = -sub.Q(i, i) - off;
    if (deficit[i] < 0.0) deficit[i] = 0.0;
  }

  // In-place LU without pivoting. The diagonal of the active row is always
  // rebuilt as deficit + sum |off-diagonal|, never by subtraction.
  std::vector<int> last_col(n, 0);   // last nonzero column of U row
  std::vector<int> first_col(n, 0);  // first nonzero column of L row
  for (int i = 0; i < n; ++i) {
    first_col[i] = i;
    last_col[i] = i;
    for (int j = 0; j < n; ++j) {
      if (a(i, j) == 0.0) continue;
      first_col[i] = std::min(first_col[i], j);
      last_col[i] = std::max(last_col[i], j);
    }
  }
  for (int k = 0; k < n; ++k) {
    double pivot = deficit[k];
    for (int j = k + 1; j <= last_col[k]; ++j) pivot -= a(k, j);
    if (!(pivot > 0.0)) throw Error(ErrorCode::SingularSystem, "sub-generator has a conservative closed class");
    a(k, k) = pivot;
    for (int i = k + 1; i < n; ++i) {
      if (first_col[i] > k || a(i, k) == 0.0) continue;
      const double l = a(i, k) / pivot;  // <= 0
      a(i, k) = l;
      for (int j = k + 1; j <= last_col[k]; ++j) {
        if (j == i) continue;
        a(i, j) -= l * a(k, j);  // both terms <= 0
      }
      last_col[i] = std::max(last_col[i], last_col[k]);
      deficit[i] += -l * deficit[k];
    }
  }

  auto solve = [&](const std::vector<double>& rhs) {
    std::vector<double> y(rhs);
    for (int i = 0; i < n; ++i)
      for (int j = first_col[i]; j < i; ++j) y[i] -= a(i, j) * y[j];  // -l * y >= 0
    for (int i = n - 1; i >= 0; --i) {
      double s = y[i];
      for (int j = i + 1; j <= last_col[i]; ++j) s -= a(i, j) * y[j];
      y[i] = s / a(i, i);
    }
    return y;
  };

  std::vector<double> v(n, 1.0);
  for (int it = 1; it <= max_iter; ++it) {
    std::vector<double> w = solve(v);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, top = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = w[i] / v[i];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      top = std::max(top, w[i]);
    }
    for (int i = 0; i < n; ++i) v[i] = w[i] / top;
    // rho((-Q)^{-1}) in [lo, hi], so the decay rate is in [1/hi, 1/lo].
    out.lower = 1.0 / hi;
    out.upper = 1.0 / lo;
    out.iterations = it;
    if (!(lo > 0.0) || !std::isfinite(hi)) throw Error(ErrorCode::IterationDivergence, "lost positivity");
    if (out.upper - out.lower <= rel_tol * out.lower) {
      out.value = 0.5 * (out.lower + out.upper);
      out.vector = std::move(v);
      return out;
    }
  }
  std::ostringstream os;
  os << "no convergence after " << max_iter << " sweeps; bracket [" << out.lower << ", " << out.upper << "]";
  throw Error(ErrorCode::IterationDivergence, os.str());
}

Eigen::VectorXd matrix_exponential_action(const DenseSubGenerator& sub, const Eigen::VectorXd& v, double t,
                                          ActionSide side) {
  if (v.size() != sub.N) throw Error(ErrorCode::ParameterViolation, "vector length does not match sub-generator");
  if (!(t >= 0.0)) throw Error(ErrorCode::ParameterViolation, "t must be >= 0");
  if (!v.allFinite()) throw Error(ErrorCode::OverflowGuard, "input vector is not finite");
  if (t == 0.0) return v;
  const double norm = t * sub.Q.cwiseAbs().rowwise().sum().maxCoeff();
  if (!(norm < 1e12)) throw Error(ErrorCode::OverflowGuard, "t * ||Q_N|| too large for scaling-and-squaring");
  const Eigen::MatrixXd e = (t * sub.Q).exp();
  Eigen::VectorXd out = side == ActionSide::Left ? Eigen::VectorXd(e.transpose() * v) : Eigen::VectorXd(e * v);
  if (!out.allFinite()) throw Error(ErrorCode::OverflowGuard, "matrix exponential produced non-finite values");
  return out;
}

}  // namespace skipfree
