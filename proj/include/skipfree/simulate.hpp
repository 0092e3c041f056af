#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "skipfree/model.hpp"

namespace skipfree {

struct SimConfig {
  State initial_state = 1;
  std::vector<double> initial_law;  // weights for x = 1, 2, ...; used instead of initial_state when non-empty
  double t_max = 1e6;
  int horizon_cap = 0;  // 0 means gen.horizon(); paths above it are escapes
  std::uint64_t replicates = 1;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::optional<State> exit_level;  // stop at the first entrance to [z, inf)
  std::vector<double> t_checks;     // survivor snapshots, ascending
  int threads = 1;
  std::uint64_t chunk_size = 4096;  // replicates per work unit; fixes the reduction tree
};

/// Sufficient statistics of an ensemble. Escaped replicates are discarded
/// from every statistic except the escape counters.
struct SimEnsemble {
  SimConfig config;
  int cap = 0;

  std::uint64_t replicates = 0;
  std::uint64_t absorbed = 0;
  std::uint64_t censored = 0;  // alive at t_max
  std::uint64_t escaped = 0;
  std::uint64_t exited = 0;    // stopped at the exit level

  std::vector<double> absorption_times;          // tau_0, replicate order
  std::vector<std::uint64_t> absorption_index;   // replicate of each absorption time
  std::vector<std::uint64_t> censored_index;
  std::vector<std::uint64_t> escaped_index;

  std::vector<std::vector<std::uint64_t>> survivor_hist;  // [check][state]
  std::vector<std::uint64_t> survivors;                   // per check

  std::vector<double> occupation_sum;    // [state], time spent before stopping
  std::vector<double> occupation_sumsq;  // [state], sum of squared per-path times

  std::vector<std::uint64_t> min_hist;        // [m], paths whose running minimum is m
  std::vector<std::uint64_t> undecided_min;   // [m], same for censored paths
};

/// Event-driven simulation of the chain. Replicate i draws from the Philox
/// stream (seed, stream_id, i); chunks of chunk_size replicates are reduced in
/// chunk order, so results do not depend on the thread count.
/// Throws ConfigError on invalid settings.
SimEnsemble simulate_ensemble(const SkipFreeGenerator& gen, const SimConfig& config);

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// P_x[tau_y < tau_z^+] from an ensemble run with exit_level z from the point
/// start x. Censored paths that have not reached y are dropped.
/// Throws InsufficientData when the ensemble does not match (y, x, z).
Estimate estimate_exit_prob(const SimEnsemble& ens, State y, State x, State z);

/// Mean time spent at y before the path stopped. Throws InsufficientData
/// when a path was censored (the mean would be biased) or no path survived
/// the escape filter.
Estimate estimate_occupation(const SimEnsemble& ens, State y);

struct ConditionedLaw {
  double t = 0.0;
  std::uint64_t survivors = 0;
  std::vector<double> prob;   // [state]
  std::vector<double> lower;  // 95% Wilson interval
  std::vector<double> upper;
};

/// Law of X_t given tau_0 > t. Throws InsufficientSurvivors below
/// min_survivors, InsufficientData when t is not a configured check time.
ConditionedLaw estimate_conditioned_law(const SimEnsemble& ens, double t, std::uint64_t min_survivors = 100);

/// Total variation between an empirical law indexed by state and weights
/// nu[x-1], x = 1..; missing entries count as 0.
double total_variation(const std::vector<double>& law, const std::vector<double>& nu);

struct DecayFitOptions {
  double tail_fraction = 0.25;   // top quantile of absorption times used
  double censor_fraction = 0.8;  // times at or above this fraction of t_max are dropped
  std::uint64_t min_at_risk = 30;  // the window ends when this many paths remain
  int grid_points = 200;
  int jackknife_groups = 20;
  std::uint64_t min_absorptions = 1000;
};

/// Decay rate from the empirical survival function on the upper tail of the
/// absorption times: log S(t), sampled on a uniform time grid spanning the top
/// quantile, is regressed on {1, t, log t, 1/t} and the rate is minus the t
/// coefficient. The extra regressors absorb the polynomial
/// prefactor of the survival tail. Stderr from a delete-a-group jackknife over
/// replicate blocks. Throws InsufficientData below min_absorptions.
Estimate estimate_decay_rate(const SimEnsemble& ens, const DecayFitOptions& options = {});

/// Kolmogorov-Smirnov distance between samples and Exp(rate).
double ks_exponential(std::vector<double> samples, double rate);

/// Asymptotic 1% critical value of the one-sample KS statistic.
double ks_critical_1pct(std::size_t n);

}  // namespace skipfree
