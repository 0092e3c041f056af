#include "skipfree/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "skipfree/error.hpp"
#include "skipfree/oracle.hpp"
#include "skipfree/scale.hpp"

namespace skipfree {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_horizon(const SkipFreeGenerator& gen, int N, const char* who) {
  if (N < 1 || N > gen.horizon()) {
    std::ostringstream os;
    os << who << ": horizon " << N << " outside 1.." << gen.horizon();
    throw Error(ErrorCode::HorizonExceeded, os.str());
  }
}

// sum_{y<=N} W^(q)(x,y) for x = 0..N, from the full table.
std::vector<double> row_sums(const ScaleTable& table) {
  const int N = table.horizon();
  std::vector<double> s(static_cast<std::size_t>(N) + 1, 0.0);
  for (State x = 0; x <= N; ++x) {
    double acc = 0.0;
    for (State y = x + 1; y <= N; ++y) acc += table(x, y);
    s[x] = acc;
  }
  return s;
}

double lsq_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

void check_schedule(const std::vector<int>& schedule, const SkipFreeGenerator& gen) {
  if (schedule.empty()) throw Error(ErrorCode::ParameterViolation, "empty horizon schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (i > 0 && schedule[i] <= schedule[i - 1])
      throw Error(ErrorCode::OrderingViolation, "horizon schedule must be strictly increasing");
    check_horizon(gen, schedule[i], "schedule");
  }
}

}  // namespace

std::string to_string(Boundary b) {
  switch (b) {
    case Boundary::Entrance: return "Entrance";
    case Boundary::Natural: return "Natural";
    case Boundary::Inconclusive: return "Inconclusive";
  }
  return "?";
}

std::string to_string(QsdVerdict v) {
  switch (v) {
    case QsdVerdict::NoQsd: return "NoQsd";
    case QsdVerdict::Unique: return "Unique";
    case QsdVerdict::Family: return "Family";
    case QsdVerdict::Inconclusive: return "Inconclusive";
  }
  return "?";
}

bool scale_positive_up_to(const SkipFreeGenerator& gen, double lambda, int N) {
  check_horizon(gen, N, "positivity check");
  try {
    for (State y = 1; y <= N; ++y)
      if (!(scale_column(gen, -lambda, y)[0] > 0.0)) return false;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ScaleOverflow) return false;
    throw;
  }
  return true;
}

GEval g_function(const SkipFreeGenerator& gen, double q, State x, int N, const GOptions& options) {
  check_horizon(gen, N, "g_function");
  if (x < 0) throw Error(ErrorCode::OrderingViolation, "g_function: x must be >= 0");
  const int half = N / 2;
  if (x > 0 && x >= half) throw Error(ErrorCode::HorizonExceeded, "g_function: need x < N/2");
  GEval out;
  out.q = q;
  out.x = x;
  out.horizon_pair = {half, N};
  if (q < 0.0) {
    if (options.lambda0_bound && -q >= *options.lambda0_bound)
      throw Error(ErrorCode::NegativeQTooDeep, "q is at or below -lambda0");
    if (!scale_positive_up_to(gen, -q, N))
      throw Error(ErrorCode::NegativeQTooDeep, "W^(q)(0,.) not positive up to the horizon");
  }
  if (x == 0 || q == 0.0) {
    out.value = 1.0;
  } else {
    const std::vector<double> top = scale_column(gen, q, N);
    const std::vector<double> mid = scale_column(gen, q, half);
    out.value = top[x] / top[0];
    out.discrepancy = std::abs(out.value - mid[x] / mid[0]);
    if (out.discrepancy > options.tol) {
      std::ostringstream os;
      os << "g ratio moved by " << out.discrepancy << " between horizons " << half << " and " << N;
      throw Error(ErrorCode::NonConvergent, os.str());
    }
  }
  if (options.entrance) {
    const std::vector<double> s = row_sums(scale_table(gen, q, N));
    out.entrance_form = (1.0 + q * s[x]) / (1.0 + q * s[0]);
  }
  return out;
}

std::vector<double> g_profile(const SkipFreeGenerator& gen, double q) {
  const int M = gen.horizon();
  std::vector<double> g(static_cast<std::size_t>(M) + 1, 1.0);
  if (q == 0.0) return g;
  const std::vector<double> col = scale_column(gen, q, M);
  for (State y = 0; y < M; ++y) g[y] = col[y] / col[0];
  g[M] = 0.0;
  return g;
}

double geometric_tail(const std::vector<double>& w) {
  if (w.size() < 2) return kInf;
  const std::size_t span = std::min<std::size_t>(10, w.size());
  const double a = w[w.size() - span];
  const double b = w.back();
  if (b <= 0.0) return 0.0;
  if (a <= 0.0) return kInf;
  const double r = std::pow(b / a, 1.0 / static_cast<double>(span - 1));
  if (!(r < 1.0)) return kInf;
  return b * r / (1.0 - r);
}

HEval h_function(const SkipFreeGenerator& gen, double lambda, double q, State x, int N) {
  check_horizon(gen, N, "h_function");
  if (!(q > -lambda)) throw Error(ErrorCode::ParameterViolation, "h_function requires q > -lambda");
  if (x < 0 || x >= N) throw Error(ErrorCode::OrderingViolation, "h_function requires 0 <= x < N");
  // The sum weights y by E_y[e^{-q tau_x}] = g(y) / g(x); skip-free paths
  // from y to 0 pass through x.
  const std::vector<double> g = g_profile(gen, q);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(N - x));
  double sum = 0.0;
  for (State y = x + 1; y <= N; ++y) {
    const double t = g[y] / g[x] * scale_column(gen, -lambda, y)[x];
    terms.push_back(t);
    sum += t;
  }
  HEval out;
  out.lambda = lambda;
  out.q = q;
  out.x = x;
  out.value = 1.0 - (lambda + q) * sum;
  out.tail_bound = (lambda + q) * geometric_tail(terms);
  out.ratio_form = scale_column(gen, -lambda, N)[x] / scale_column(gen, q, N)[x];
  return out;
}

double h_at_zero_inverse_form(const SkipFreeGenerator& gen, double q, State x, int N) {
  check_horizon(gen, N, "h_at_zero_inverse_form");
  if (x < 0 || x >= N) throw Error(ErrorCode::OrderingViolation, "requires 0 <= x < N");
  double sum = 0.0;
  for (State y = x + 1; y <= N; ++y) sum += scale_column(gen, q, y)[x];
  return 1.0 / (1.0 + q * sum);
}

double occupation_density_halfline(const SkipFreeGenerator& gen, double q, State x, State y, int N,
                                   const GOptions& options) {
  check_horizon(gen, N, "occupation_density_halfline");
  if (x < 1 || y < 1) throw Error(ErrorCode::OrderingViolation, "requires x, y >= 1");
  if (y >= N) throw Error(ErrorCode::HorizonExceeded, "y must lie below the horizon");
  const double g = g_function(gen, q, x, N, options).value;
  const std::vector<double> col = scale_column(gen, q, y);
  const double w_xy = x < y ? col[x] : 0.0;
  return g * col[0] - w_xy;
}

BoundaryClassification classify_boundary(const SkipFreeGenerator& gen, const std::vector<int>& schedule,
                                         const BoundaryCriteria& criteria,
                                         std::optional<Boundary> analytic_override) {
  check_schedule(schedule, gen);
  const int N = schedule.back();
  std::vector<double> w(static_cast<std::size_t>(N) + 1, 0.0);
  for (State y = 1; y <= N; ++y) w[y] = scale_column(gen, 0.0, y)[0];

  BoundaryClassification out;
  out.schedule = schedule;
  double partial = 0.0;
  std::size_t next = 0;
  for (State y = 1; y <= N; ++y) {
    partial += w[y];
    if (y == schedule[next]) {
      out.partial_sums.push_back(partial);
      out.last_terms.push_back(w[y]);
      ++next;
    }
  }

  const int from = std::max(1, (3 * N) / 4);
  std::vector<double> lx, ly;
  for (State y = from; y <= N; ++y) {
    lx.push_back(std::log(static_cast<double>(y)));
    ly.push_back(std::log(w[y]));
    if (y < N) out.tail_ratio = std::max(out.tail_ratio, w[y + 1] / w[y]);
  }
  out.fitted_power = lx.size() >= 2 ? -lsq_slope(lx, ly) : 0.0;
  out.tail_bound = out.tail_ratio < 1.0 ? w[N] * out.tail_ratio / (1.0 - out.tail_ratio) : kInf;

  const bool ratio_summable = out.tail_ratio <= criteria.ratio_max && out.tail_bound <= criteria.cauchy_tol * partial;
  if (N >= 4 && (ratio_summable || out.fitted_power > criteria.power_min))
    out.numeric_verdict = Boundary::Entrance;
  else if (N >= 4 && w[N] >= criteria.natural_floor && out.fitted_power <= criteria.trend_tol)
    out.numeric_verdict = Boundary::Natural;
  else
    out.numeric_verdict = Boundary::Inconclusive;

  out.analytic_override = analytic_override;
  out.verdict = analytic_override.value_or(out.numeric_verdict);
  return out;
}

std::optional<Boundary> birth_death_family_boundary(const RateSeries& birth, const RateSeries& death) {
  auto is_const = [](const RateSeries& s) { return s.expr.rfind("const:", 0) == 0; };
  auto is_linear = [](const RateSeries& s) { return s.expr.rfind("linear:", 0) == 0; };
  if (is_const(birth) && is_const(death)) return Boundary::Natural;
  if ((is_const(birth) || is_linear(birth)) && death.expr == "square") return Boundary::Entrance;
  return std::nullopt;
}

Lambda0Estimate find_lambda0(const SkipFreeGenerator& gen, const std::vector<int>& schedule,
                             const Lambda0Options& options) {
  check_schedule(schedule, gen);
  if (!(options.tol > 0.0)) throw Error(ErrorCode::ParameterViolation, "tol must be positive");
  Lambda0Estimate out;
  out.horizon_schedule = schedule;
  for (const int N : schedule) {
    double lo = 0.0;
    double hi = gen.min_total_rate(N);
    int retries = 0;
    while (scale_positive_up_to(gen, hi, N)) {
      if (++retries > options.max_bracket_retries) {
        std::ostringstream os;
        os << "W^(-lambda)(0,.) stays positive up to lambda=" << hi << " at N=" << N;
        throw Error(ErrorCode::BracketFailure, os.str());
      }
      lo = hi;
      hi *= 2.0;
    }
    while (hi - lo > options.tol) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (scale_positive_up_to(gen, mid, N) ? lo : hi) = mid;
    }
    if (!out.per_n.empty() && lo > out.per_n.back() + options.tol) {
      std::ostringstream os;
      os << "estimate rose from " << out.per_n.back() << " to " << lo << " at N=" << N;
      throw Error(ErrorCode::NonMonotoneSchedule, os.str());
    }
    out.per_n.push_back(lo);
    out.per_n_bracket.emplace_back(lo, hi);
  }
  out.bracket = out.per_n_bracket.back();
  out.value = out.bracket.first;
  if (options.eigen_crosscheck) {
    const double eig = leading_decay_eigenvalue(make_sub_generator(gen, schedule.back())).value;
    out.eigen_crosscheck = eig;
    out.eigen_discrepancy = std::abs(out.value - eig);
  }
  return out;
}

Qsd compute_qsd(const SkipFreeGenerator& gen, double lambda, int N, const QsdOptions& options) {
  check_horizon(gen, N, "compute_qsd");
  if (!(lambda > 0.0)) throw Error(ErrorCode::ParameterViolation, "compute_qsd requires lambda > 0");
  Qsd out;
  out.lambda = lambda;
  out.weights.reserve(static_cast<std::size_t>(N));
  for (State x = 1; x <= N; ++x) {
    const double w = lambda * scale_column(gen, -lambda, x)[0];
    if (w < -options.negative_tol) {
      std::ostringstream os;
      os << "nu(" << x << ") = " << w << " < 0; lambda exceeds lambda0";
      throw Error(ErrorCode::NegativeWeight, os.str());
    }
    out.weights.push_back(w);
    out.mass += w;
  }
  out.tail = geometric_tail(out.weights);
  out.defect = 1.0 - out.mass - out.tail;
  out.subprobability = out.mass + out.tail < 1.0 - options.mass_tol;
  return out;
}

QsdSetReport qsd_set_report(const SkipFreeGenerator& gen, const std::vector<int>& schedule,
                            const QsdSetOptions& options) {
  QsdSetReport out;
  out.boundary = classify_boundary(gen, schedule, options.criteria, options.analytic_override);
  out.lambda0 = find_lambda0(gen, schedule, options.lambda0);
  switch (out.boundary.verdict) {
    case Boundary::Entrance:
      out.verdict = QsdVerdict::Unique;
      out.qsd = compute_qsd(gen, out.lambda0.value, schedule.back());
      break;
    case Boundary::Natural:
      out.verdict = out.lambda0.value > options.zero_tol ? QsdVerdict::Family : QsdVerdict::NoQsd;
      break;
    case Boundary::Inconclusive:
      out.verdict = QsdVerdict::Inconclusive;
      break;
  }
  return out;
}

YaglomResidue yaglom_residue(const SkipFreeGenerator& gen, double lambda0, int N, const ResidueWindow& window) {
  check_horizon(gen, N, "yaglom_residue");
  if (!(lambda0 > 0.0)) throw Error(ErrorCode::ParameterViolation, "yaglom_residue requires lambda0 > 0");
  if (window.k_last - window.k_first < 2) throw Error(ErrorCode::ParameterViolation, "window needs three points");

  const auto n = static_cast<std::size_t>(N);
  std::vector<std::vector<double>> samples;  // (lambda0 - lambda) g~(x) per window step
  for (int k = window.k_first; k <= window.k_last; ++k) {
    const double eps = std::ldexp(lambda0, -k);
    const double lambda = lambda0 - eps;
    const std::vector<double> s = row_sums(scale_table(gen, -lambda, N));
    const double denom = 1.0 - lambda * s[0];
    std::vector<double> r(n);
    for (State x = 1; x <= N; ++x) r[x - 1] = eps * (1.0 - lambda * s[x]) / denom;
    samples.push_back(std::move(r));
  }

  // Halving eps: R = 2 r(eps/2) - r(eps) removes the linear term.
  std::vector<std::vector<double>> extrap;
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = 2.0 * samples[k + 1][i] - samples[k][i];
    extrap.push_back(std::move(e));
  }

  YaglomResidue out;
  out.rho = extrap.back();
  out.method = "richardson-1 over eps_k = lambda0 * 2^-k, k = " + std::to_string(window.k_first) + ".." +
               std::to_string(window.k_last);
  const std::vector<double>& prev = extrap[extrap.size() - 2];
  for (std::size_t i = 0; i < n; ++i)
    out.extrapolation_change = std::max(out.extrapolation_change, std::abs(out.rho[i] - prev[i]) / std::abs(out.rho[i]));
  for (std::size_t i = 0; i < n; ++i)
    out.ratio_drift = std::max(out.ratio_drift, std::abs(prev[i] / prev[0] - out.rho[i] / out.rho[0]));

  for (std::size_t i = 0; i < n; ++i) {
    if (!(out.rho[i] > 0.0)) {
      std::ostringstream os;
      os << "residue at x=" << i + 1 << " is " << out.rho[i];
      throw Error(ErrorCode::WindowNonConvergent, os.str());
    }
  }
  if (out.extrapolation_change > window.rel_tol) {
    std::ostringstream os;
    os << "last two extrapolants differ by " << out.extrapolation_change << " (relative)";
    throw Error(ErrorCode::WindowNonConvergent, os.str());
  }
  return out;
}

}  // namespace skipfree
