#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skipfree/model.hpp"
#include "skipfree/model_io.hpp"

namespace skipfree {

// ---------------------------------------------------------------- g and h

struct GOptions {
  double tol = 1e-6;                    // allowed two-horizon discrepancy
  std::optional<double> lambda0_bound;  // rejects q <= -bound when set
  bool entrance = false;                // also evaluate the entrance-case form
};

/// g^(q)(x) = E_x[exp(-q tau_0)].
struct GEval {
  double q = 0.0;
  State x = 0;
  double value = 0.0;
  std::pair<int, int> horizon_pair{0, 0};
  double discrepancy = 0.0;
  /// (1 + q sum W^(q)(x,y)) / (1 + q sum W^(q)(0,y)), sums over y <= N.
  std::optional<double> entrance_form;
};

/// Ratio estimate W^(q)(x,N) / W^(q)(0,N) compared against horizon N/2.
/// q = 0 returns 1 (absorption is certain by assumption); x = 0 returns 1.
/// Throws NegativeQTooDeep when q < 0 and W^(q)(0,y) loses positivity or
/// q <= -lambda0_bound, NonConvergent when the discrepancy exceeds tol, and
/// HorizonExceeded unless x < N/2 <= N <= horizon.
GEval g_function(const SkipFreeGenerator& gen, double q, State x, int N, const GOptions& options = {});

/// g^(q)(y) for y = 0..gen.horizon() from the single column at the top of the
/// stored horizon: g(y) ~ W^(q)(y,M) / W^(q)(0,M). Exactly 1 everywhere for q = 0.
std::vector<double> g_profile(const SkipFreeGenerator& gen, double q);

/// h^(q)(lambda; x).
struct HEval {
  double lambda = 0.0;
  double q = 0.0;
  State x = 0;
  double value = 0.0;
  double tail_bound = 0.0;
  /// W^(-lambda)(x,N) / W^(q)(x,N).
  double ratio_form = 0.0;
};

/// 1 - (lambda + q) sum_{x<y<=N} [g^(q)(y) / g^(q)(x)] W^(-lambda)(x,y) with g
/// from g_profile; at x = 0 the weight is g^(q)(y). tail_bound is a geometric
/// extrapolation of the last ten terms.
/// Throws ParameterViolation unless q > -lambda.
HEval h_function(const SkipFreeGenerator& gen, double lambda, double q, State x, int N);

/// Entrance-chain inversion at lambda = 0: 1 / (1 + q sum_{y<=N} W^(q)(x,y)).
double h_at_zero_inverse_form(const SkipFreeGenerator& gen, double q, State x, int N);

/// u^(q)(x,y) = g^(q)(x) W^(q)(0,y) - W^(q)(x,y), expected discounted time
/// at y before absorption. Requires 1 <= x, 1 <= y < N.
double occupation_density_halfline(const SkipFreeGenerator& gen, double q, State x, State y, int N,
                                   const GOptions& options = {});

// --------------------------------------------------------------- boundary

enum class Boundary { Entrance, Natural, Inconclusive };
std::string to_string(Boundary b);

struct BoundaryCriteria {
  double ratio_max = 0.999;     // sustained W(0,y+1)/W(0,y) bound over the tail window
  double cauchy_tol = 1e-2;     // ratio tail bound relative to the partial sum
  double power_min = 1.1;       // fitted decay exponent that counts as summable
  double natural_floor = 1e-6;  // last-term lower bound for Natural
  double trend_tol = 0.05;      // fitted exponent at most this counts as non-decreasing
};

struct BoundaryClassification {
  Boundary verdict = Boundary::Inconclusive;
  Boundary numeric_verdict = Boundary::Inconclusive;
  std::vector<int> schedule;
  std::vector<double> partial_sums;  // sum_{y<=N} W(0,y) per schedule entry
  std::vector<double> last_terms;    // W(0,N) per schedule entry
  double tail_ratio = 0.0;           // max successive ratio over [3N/4, N]
  double fitted_power = 0.0;         // p in W(0,y) ~ C y^{-p} over the same window
  double tail_bound = 0.0;           // ratio-test bound on the omitted tail
  std::optional<Boundary> analytic_override;
};

/// Numerical entrance/natural test on the tail window of the largest schedule
/// horizon. Entrance: the ratio test bounds the tail below cauchy_tol times the
/// partial sum, or the fitted power exceeds power_min. Natural: the last term
/// is at least natural_floor and the fitted power is at most trend_tol.
/// Otherwise Inconclusive. A supplied override replaces the verdict; the
/// numerical one is kept in numeric_verdict.
BoundaryClassification classify_boundary(const SkipFreeGenerator& gen, const std::vector<int>& schedule,
                                         const BoundaryCriteria& criteria = {},
                                         std::optional<Boundary> analytic_override = std::nullopt);

/// Closed-form verdict for the built-in birth-death families: constant birth
/// and death rates are Natural; constant or linear birth with square death is
/// Entrance. Anything else has no override.
std::optional<Boundary> birth_death_family_boundary(const RateSeries& birth, const RateSeries& death);

// ---------------------------------------------------------------- lambda0

struct Lambda0Options {
  double tol = 1e-6;  // bracket width per horizon
  int max_bracket_retries = 30;
  bool eigen_crosscheck = true;
};

struct Lambda0Estimate {
  double value = 0.0;  // lower end of the final bracket
  std::pair<double, double> bracket{0.0, 0.0};
  std::vector<int> horizon_schedule;
  std::vector<double> per_n;  // lower bracket end per horizon
  std::vector<std::pair<double, double>> per_n_bracket;
  std::optional<double> eigen_crosscheck;  // sub-generator on {1..N_max}
  std::optional<double> eigen_discrepancy;
};

/// True when W^(-lambda)(0,y) > 0 for every 1 <= y <= N.
bool scale_positive_up_to(const SkipFreeGenerator& gen, double lambda, int N);

/// Bisection per horizon on the positivity predicate, starting from
/// lambda_hi = min_{x<=N} Q(x) and doubling on BracketFailure. Throws
/// NonMonotoneSchedule when a later horizon gives a larger estimate (beyond
/// tol), BracketFailure when retries run out, OrderingViolation for a
/// schedule that is not increasing.
Lambda0Estimate find_lambda0(const SkipFreeGenerator& gen, const std::vector<int>& schedule,
                             const Lambda0Options& options = {});

// -------------------------------------------------------------------- QSD

struct QsdOptions {
  double negative_tol = 1e-12;   // weights below -negative_tol are rejected
  double mass_tol = 1e-3;        // subprobability threshold beyond the tail
};

struct Qsd {
  double lambda = 0.0;
  std::vector<double> weights;  // weights[x-1] = nu(x), x = 1..N
  double mass = 0.0;
  double tail = 0.0;    // geometric extrapolation of the last ten weights
  double defect = 0.0;  // 1 - mass - tail
  bool subprobability = false;
};

/// nu_lambda(x) = lambda W^(-lambda)(0,x). Throws NegativeWeight when some
/// weight is below -negative_tol, ParameterViolation unless lambda > 0.
Qsd compute_qsd(const SkipFreeGenerator& gen, double lambda, int N, const QsdOptions& options = {});

/// Geometric tail allowance sum_{y>N} w(y) extrapolated from the last ten
/// entries of w; infinity when they do not decay.
double geometric_tail(const std::vector<double>& w);

enum class QsdVerdict { NoQsd, Unique, Family, Inconclusive };
std::string to_string(QsdVerdict v);

struct QsdSetOptions {
  BoundaryCriteria criteria;
  Lambda0Options lambda0;
  double zero_tol = 1e-3;  // lambda0 at or below this counts as 0
  std::optional<Boundary> analytic_override;
};

struct QsdSetReport {
  BoundaryClassification boundary;
  Lambda0Estimate lambda0;
  QsdVerdict verdict = QsdVerdict::Inconclusive;
  std::optional<Qsd> qsd;  // nu_{lambda0} for Unique
};

QsdSetReport qsd_set_report(const SkipFreeGenerator& gen, const std::vector<int>& schedule,
                            const QsdSetOptions& options = {});

// ---------------------------------------------------------------- Yaglom

struct ResidueWindow {
  int k_first = 4;  // eps_k = lambda0 * 2^-k
  int k_last = 10;
  double rel_tol = 1e-4;  // agreement of the last two extrapolants
};

struct YaglomResidue {
  std::vector<double> rho;  // rho[x-1], x = 1..N
  std::string method;
  double extrapolation_change = 0.0;  // max relative change between the last two extrapolants
  double ratio_drift = 0.0;           // max change of rho(x)/rho(1) between the last two extrapolants
};

/// rho(x) = lim (lambda0 - lambda) g~^(-lambda)(x) with
/// g~ = (1 - lambda sum W^(-lambda)(x,y)) / (1 - lambda sum W^(-lambda)(0,y)),
/// sums over y <= N, sampled at lambda = lambda0 - eps_k and extrapolated to
/// eps = 0 with first-order Richardson. Throws WindowNonConvergent when the
/// extrapolants disagree or a residue is not positive.
YaglomResidue yaglom_residue(const SkipFreeGenerator& gen, double lambda0, int N, const ResidueWindow& window = {});

}  // namespace skipfree
