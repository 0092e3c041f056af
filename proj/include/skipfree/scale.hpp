#pragma once

#include <complex>
#include <vector>

#include "skipfree/model.hpp"

namespace skipfree {

using Complex = std::complex<double>;

/// Column y of the q-scale function: entry x holds W^(q)(x, y), 0 <= x < y.
///
/// Built by the downward triangular recursion
///   W(y-1, y) = 1 / Q(y, y-1),
///   W(x-1, y) = [q W(x, y) - sum_{x <= z < y} Q(x, z) W(z, y)] / Q(x, x-1),
/// which reads only rows 1..y-1 of the generator. The row sum runs over
/// ascending z with compensated summation, so the column is bit-identical for
/// every horizon >= y. Throws HorizonExceeded for y > horizon and
/// ScaleOverflow if an entry leaves the double range.
std::vector<double> scale_column(const SkipFreeGenerator& gen, double q, State y);
std::vector<Complex> scale_column(const SkipFreeGenerator& gen, Complex q, State y);

/// W^(q)(x, y) for 0 <= x < y <= horizon, implicitly 0 for x >= y.
template <class T>
class BasicScaleTable {
 public:
  BasicScaleTable() = default;
  BasicScaleTable(T q, int horizon, std::vector<std::vector<T>> columns);

  T q() const { return q_; }
  int horizon() const { return horizon_; }

  T operator()(State x, State y) const {
    if (y < 1 || y > horizon_ || x < 0 || x >= y) return T{};
    return columns_[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
  }

  const std::vector<T>& column(State y) const { return columns_.at(static_cast<std::size_t>(y)); }

  /// Largest |W(x, y)| in the table; callers use it to judge overflow risk.
  double max_abs() const { return max_abs_; }

 private:
  T q_{};
  int horizon_ = 0;
  std::vector<std::vector<T>> columns_;  // index 0 unused
  double max_abs_ = 0.0;
};

using ScaleTable = BasicScaleTable<double>;
using ComplexScaleTable = BasicScaleTable<Complex>;

struct ScaleTableOptions {
  bool verify = false;       // check the eigen-equation residual after building
  double residual_tol = 1e-10;
};

/// All columns y = 1..N. With options.verify set, throws NonConvergent when the
/// relative eigen-equation residual exceeds options.residual_tol.
ScaleTable scale_table(const SkipFreeGenerator& gen, double q, int N, const ScaleTableOptions& options = {});
ComplexScaleTable scale_table(const SkipFreeGenerator& gen, Complex q, int N, const ScaleTableOptions& options = {});

/// max over 1 <= x <= y <= N of |sum_z Q(x,z) W(z,y) - delta_xy - q W(x,y)|.
/// Row x = y checks the band condition Q(y,y-1) W(y-1,y) = 1.
double eigen_residual(const SkipFreeGenerator& gen, const ScaleTable& table);
double eigen_residual(const SkipFreeGenerator& gen, const ComplexScaleTable& table);

/// Residual relative to (max row rate) * (max |W|), the scale of the terms.
double relative_eigen_residual(const SkipFreeGenerator& gen, const ScaleTable& table);
double relative_eigen_residual(const SkipFreeGenerator& gen, const ComplexScaleTable& table);

/// W^(q)(x, y) through the polynomial representation
///   sum_{0 <= n <= y-x-1} q^n W^{n+1}(x, y),
/// with the powers of the q = 0 table applied as triangular matrix-vector
/// products over states < y. Cross-check for scale_column.
double poly_eval(const SkipFreeGenerator& gen, double q, State x, State y);
Complex poly_eval(const SkipFreeGenerator& gen, Complex q, State x, State y);

/// Whole column of the polynomial representation (x = 0..y-1).
std::vector<double> poly_column(const SkipFreeGenerator& gen, double q, State y);
std::vector<Complex> poly_column(const SkipFreeGenerator& gen, Complex q, State y);

/// max over 0 <= x < y <= N of
///   |W^(q)(x,y) - W^(r)(x,y) - (q - r) sum_{x<z<y} W^(q)(x,z) W^(r)(z,y)|.
double resolvent_residual(const SkipFreeGenerator& gen, double q, double r, int N);
double resolvent_residual(const SkipFreeGenerator& gen, Complex q, Complex r, int N);

/// E_x[e^{-q tau_y}, tau_y < tau_z^+] = W^(q)(x,z) / W^(q)(y,z) for y <= x < z
/// (x = y returns 1). Requires q >= 0.
double exit_weight(const SkipFreeGenerator& gen, double q, State x, State y, State z);

/// Expected discounted local time at y before tau_0 ^ tau_z^+ started from x:
///   W(0,y) W(x,z) / W(0,z) - W(x,y),  0 < x, y < z, q >= 0.
double potential_density(const SkipFreeGenerator& gen, double q, State x, State y, State z);

}  // namespace skipfree
