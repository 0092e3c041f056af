#include "skipfree/scale.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "skipfree/error.hpp"

namespace skipfree {

namespace {

double magnitude(double v) { return std::abs(v); }
double magnitude(const Complex& v) { return std::abs(v); }
bool finite(double v) { return std::isfinite(v); }
bool finite(const Complex& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

// Kahan-compensated running sum; also valid for complex values since complex
// addition is componentwise.
template <class T>
struct CompensatedSum {
  T sum{};
  T carry{};
  void add(const T& v) {
    const T y = v - carry;
    const T t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

void check_column_index(const SkipFreeGenerator& gen, State y) {
  if (y < 1 || y > gen.horizon()) {
    std::ostringstream os;
    os << "column y=" << y << " outside 1.." << gen.horizon();
    throw Error(ErrorCode::HorizonExceeded, os.str());
  }
}

template <class T>
std::vector<T> column_impl(const SkipFreeGenerator& gen, T q, State y) {
  check_column_index(gen, y);
  std::vector<T> w(static_cast<std::size_t>(y) + 1, T{});  // w[y] = 0 sentinel
  w[y - 1] = T(1.0) / gen.down_rate(y);
  for (State x = y - 1; x >= 1; --x) {
    CompensatedSum<T> row;
    row.add(-gen.total_rate(x) * w[x]);
    for (const UpJump& j : gen.up_rates(x)) {
      const State z = x + j.size;
      if (z >= y) break;  // W(z, y) = 0 beyond the diagonal; jumps are sorted
      row.add(j.rate * w[z]);
    }
    const T value = (q * w[x] - row.sum) / gen.down_rate(x);
    if (!finite(value)) {
      std::ostringstream os;
      os << "W(" << x - 1 << "," << y << ") left the double range";
      throw Error(ErrorCode::ScaleOverflow, os.str());
    }
    w[x - 1] = value;
  }
  w.pop_back();
  return w;
}

template <class T>
BasicScaleTable<T> table_impl(const SkipFreeGenerator& gen, T q, int N, const ScaleTableOptions& options) {
  if (N < 1 || N > gen.horizon()) {
    std::ostringstream os;
    os << "table horizon " << N << " outside 1.." << gen.horizon();
    throw Error(ErrorCode::HorizonExceeded, os.str());
  }
  std::vector<std::vector<T>> cols(static_cast<std::size_t>(N) + 1);
  for (State y = 1; y <= N; ++y) cols[y] = column_impl(gen, q, y);
  BasicScaleTable<T> table(q, N, std::move(cols));
  if (options.verify) {
    const double rel = relative_eigen_residual(gen, table);
    if (!(rel <= options.residual_tol)) {
      std::ostringstream os;
      os << "eigen-equation residual " << rel << " exceeds " << options.residual_tol;
      throw Error(ErrorCode::NonConvergent, os.str());
    }
  }
  return table;
}

template <class T>
double residual_impl(const SkipFreeGenerator& gen, const BasicScaleTable<T>& w) {
  double worst = 0.0;
  const int N = w.horizon();
  for (State y = 1; y <= N; ++y) {
    for (State x = 1; x <= y; ++x) {
      T acc = gen.down_rate(x) * w(x - 1, y) - gen.total_rate(x) * w(x, y);
      for (const UpJump& j : gen.up_rates(x)) acc += j.rate * w(x + j.size, y);
      const T target = (x == y ? T(1.0) : T{}) + w.q() * w(x, y);
      worst = std::max(worst, magnitude(acc - target));
    }
  }
  return worst;
}

template <class T>
double relative_residual_impl(const SkipFreeGenerator& gen, const BasicScaleTable<T>& w) {
  double max_rate = 0.0;
  for (State x = 1; x <= w.horizon(); ++x) max_rate = std::max(max_rate, gen.total_rate(x));
  const double scale = std::max(max_rate * w.max_abs(), 1.0);
  return residual_impl(gen, w) / scale;
}

template <class T>
std::vector<T> poly_column_impl(const SkipFreeGenerator& gen, T q, State y) {
  check_column_index(gen, y);
  const ScaleTable base = scale_table(gen, 0.0, y);
  const auto n = static_cast<std::size_t>(y);
  std::vector<T> term(n), acc(n);
  for (State x = 0; x < y; ++x) term[x] = T(base(x, y));
  acc = term;
  T qn(1.0);
  // term_n = W^{n+1}(., y); the power vanishes for n > y - 1.
  for (int power = 1; power < y; ++power) {
    std::vector<T> next(n, T{});
    for (State z = 0; z < y; ++z) {
      T s{};
      for (State u = z + 1; u < y; ++u) s += base(z, u) * term[u];
      next[z] = s;
    }
    term.swap(next);
    qn *= q;
    for (State x = 0; x < y; ++x) acc[x] += qn * term[x];
  }
  return acc;
}

template <class T>
double resolvent_impl(const SkipFreeGenerator& gen, T q, T r, int N) {
  const BasicScaleTable<T> wq = scale_table(gen, q, N);
  const BasicScaleTable<T> wr = scale_table(gen, r, N);
  double worst = 0.0;
  for (State y = 1; y <= N; ++y) {
    for (State x = 0; x < y; ++x) {
      T product{};
      for (State z = x + 1; z < y; ++z) product += wq(x, z) * wr(z, y);
      worst = std::max(worst, magnitude(wq(x, y) - wr(x, y) - (q - r) * product));
    }
  }
  return worst;
}

}  // namespace

template <class T>
BasicScaleTable<T>::BasicScaleTable(T q, int horizon, std::vector<std::vector<T>> columns)
    : q_(q), horizon_(horizon), columns_(std::move(columns)) {
  for (const auto& col : columns_)
    for (const T& v : col) max_abs_ = std::max(max_abs_, magnitude(v));
}

template class BasicScaleTable<double>;
template class BasicScaleTable<Complex>;

std::vector<double> scale_column(const SkipFreeGenerator& gen, double q, State y) { return column_impl(gen, q, y); }
std::vector<Complex> scale_column(const SkipFreeGenerator& gen, Complex q, State y) { return column_impl(gen, q, y); }

ScaleTable scale_table(const SkipFreeGenerator& gen, double q, int N, const ScaleTableOptions& options) {
  return table_impl(gen, q, N, options);
}
ComplexScaleTable scale_table(const SkipFreeGenerator& gen, Complex q, int N, const ScaleTableOptions& options) {
  return table_impl(gen, q, N, options);
}

double eigen_residual(const SkipFreeGenerator& gen, const ScaleTable& table) { return residual_impl(gen, table); }
double eigen_residual(const SkipFreeGenerator& gen, const ComplexScaleTable& table) { return residual_impl(gen, table); }
double relative_eigen_residual(const SkipFreeGenerator& gen, const ScaleTable& table) {
  return relative_residual_impl(gen, table);
}
double relative_eigen_residual(const SkipFreeGenerator& gen, const ComplexScaleTable& table) {
  return relative_residual_impl(gen, table);
}

std::vector<double> poly_column(const SkipFreeGenerator& gen, double q, State y) { return poly_column_impl(gen, q, y); }
std::vector<Complex> poly_column(const SkipFreeGenerator& gen, Complex q, State y) {
  return poly_column_impl(gen, q, y);
}

double poly_eval(const SkipFreeGenerator& gen, double q, State x, State y) {
  if (x < 0 || x >= y) throw Error(ErrorCode::OrderingViolation, "poly_eval needs 0 <= x < y");
  return poly_column_impl(gen, q, y)[static_cast<std::size_t>(x)];
}
Complex poly_eval(const SkipFreeGenerator& gen, Complex q, State x, State y) {
  if (x < 0 || x >= y) throw Error(ErrorCode::OrderingViolation, "poly_eval needs 0 <= x < y");
  return poly_column_impl(gen, q, y)[static_cast<std::size_t>(x)];
}

double resolvent_residual(const SkipFreeGenerator& gen, double q, double r, int N) {
  return resolvent_impl(gen, q, r, N);
}
double resolvent_residual(const SkipFreeGenerator& gen, Complex q, Complex r, int N) {
  return resolvent_impl(gen, q, r, N);
}

double exit_weight(const SkipFreeGenerator& gen, double q, State x, State y, State z) {
  if (q < 0.0) throw Error(ErrorCode::ParameterViolation, "exit_weight requires q >= 0");
  if (!(0 <= y && y <= x && x < z)) throw Error(ErrorCode::OrderingViolation, "exit_weight requires y <= x < z");
  if (x == y) return 1.0;
  const std::vector<double> col = scale_column(gen, q, z);
  return col[x] / col[y];
}

double potential_density(const SkipFreeGenerator& gen, double q, State x, State y, State z) {
  if (q < 0.0) throw Error(ErrorCode::ParameterViolation, "potential_density requires q >= 0");
  if (!(0 < x && 0 < y && x < z && y < z))
    throw Error(ErrorCode::OrderingViolation, "potential_density requires 0 < x, y < z");
  const std::vector<double> col_z = scale_column(gen, q, z);
  const std::vector<double> col_y = scale_column(gen, q, y);
  const double w_xy = x < y ? col_y[x] : 0.0;
  return col_y[0] * col_z[x] / col_z[0] - w_xy;
}

}  // namespace skipfree
