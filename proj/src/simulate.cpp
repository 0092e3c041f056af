#include "skipfree/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include <Eigen/Dense>

#include "skipfree/error.hpp"
#include "skipfree/rng.hpp"

namespace skipfree {

namespace {

struct ChunkStats {
  std::uint64_t absorbed = 0, censored = 0, escaped = 0, exited = 0;
  std::vector<double> absorption_times;
  std::vector<std::uint64_t> absorption_index, censored_index, escaped_index;
  std::vector<std::vector<std::uint64_t>> survivor_hist;
  std::vector<double> occ_sum, occ_sumsq;
  std::vector<std::uint64_t> min_hist, undecided_min;

  ChunkStats(int cap, std::size_t checks)
      : survivor_hist(checks, std::vector<std::uint64_t>(static_cast<std::size_t>(cap) + 1, 0)),
        occ_sum(static_cast<std::size_t>(cap) + 1, 0.0),
        occ_sumsq(static_cast<std::size_t>(cap) + 1, 0.0),
        min_hist(static_cast<std::size_t>(cap) + 1, 0),
        undecided_min(static_cast<std::size_t>(cap) + 1, 0) {}
};

// Per-path scratch so an escaped path can be discarded without touching the
// chunk totals.
struct PathScratch {
  std::vector<double> occ;
  std::vector<State> touched;
  std::vector<State> snapshot;  // state at each check, -1 when not alive

  PathScratch(int cap, std::size_t checks) : occ(static_cast<std::size_t>(cap) + 1, 0.0), snapshot(checks, -1) {}

  void add(State x, double dt) {
    if (occ[x] == 0.0 && dt > 0.0) touched.push_back(x);
    occ[x] += dt;
  }
};

enum class Outcome { Absorbed, Censored, Escaped, Exited };

void validate_config(const SkipFreeGenerator& gen, const SimConfig& c, int cap) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
  if (c.replicates < 1) fail("replicates must be >= 1");
  if (!(c.t_max > 0.0)) fail("t_max must be > 0");
  if (cap < 1 || cap > gen.horizon()) fail("horizon_cap must lie in 1..horizon");
  if (c.threads < 1) fail("threads must be >= 1");
  if (c.chunk_size < 1) fail("chunk_size must be >= 1");
  if (!std::is_sorted(c.t_checks.begin(), c.t_checks.end())) fail("t_checks must be ascending");
  for (double t : c.t_checks)
    if (!(t >= 0.0)) fail("t_checks must be >= 0");
  if (c.initial_law.empty()) {
    if (c.initial_state < 1 || c.initial_state > cap) fail("initial_state must lie in 1..horizon_cap");
  } else {
    if (c.initial_law.size() > static_cast<std::size_t>(cap)) fail("initial_law extends beyond horizon_cap");
    double total = 0.0;
    for (double w : c.initial_law) {
      if (!(w >= 0.0)) fail("initial_law weights must be >= 0");
      total += w;
    }
    if (!(total > 0.0)) fail("initial_law has no mass");
  }
  if (c.exit_level && (*c.exit_level < 1 || *c.exit_level > cap)) fail("exit_level must lie in 1..horizon_cap");
}

}  // namespace

SimEnsemble simulate_ensemble(const SkipFreeGenerator& gen, const SimConfig& config) {
  const int cap = config.horizon_cap > 0 ? config.horizon_cap : gen.horizon();
  validate_config(gen, config, cap);

  std::vector<double> cdf;
  if (!config.initial_law.empty()) {
    cdf.resize(config.initial_law.size());
    std::partial_sum(config.initial_law.begin(), config.initial_law.end(), cdf.begin());
    const double total = cdf.back();
    for (double& c : cdf) c /= total;
  }
  const std::size_t n_checks = config.t_checks.size();
  const std::uint64_t n_chunks = (config.replicates + config.chunk_size - 1) / config.chunk_size;

  auto run_chunk = [&](std::uint64_t chunk) {
    ChunkStats st(cap, n_checks);
    PathScratch path(cap, n_checks);
    const std::uint64_t first = chunk * config.chunk_size;
    const std::uint64_t last = std::min(config.replicates, first + config.chunk_size);
    for (std::uint64_t rep = first; rep < last; ++rep) {
      ReplicateStream rng(config.seed, config.stream_id, rep);
      State x = config.initial_state;
      if (!cdf.empty()) {
        const double u = rng.uniform();
        x = static_cast<State>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()) + 1;
        x = std::min<State>(x, static_cast<State>(cdf.size()));
      }
      State running_min = x;
      double t = 0.0;
      std::size_t next_check = 0;
      Outcome outcome;
      if (config.exit_level && x >= *config.exit_level) {
        outcome = Outcome::Exited;
      } else {
        for (;;) {
          const double rate = gen.total_rate(x);
          const double t_next = t + rng.exponential(rate);
          const double t_stop = std::min(t_next, config.t_max);
          while (next_check < n_checks && config.t_checks[next_check] < t_stop) path.snapshot[next_check++] = x;
          path.add(x, t_stop - t);
          if (t_next >= config.t_max) {
            outcome = Outcome::Censored;
            break;
          }
          t = t_next;
          double u = rng.uniform() * rate - gen.down_rate(x);
          State y = x - 1;
          const auto& ups = gen.up_rates(x);
          if (u >= 0.0 && !ups.empty()) {
            y = x + ups.back().size;
            for (const UpJump& j : ups) {
              u -= j.rate;
              if (u < 0.0) {
                y = x + j.size;
                break;
              }
            }
          }
          x = y;
          running_min = std::min(running_min, x);
          if (x == 0) {
            outcome = Outcome::Absorbed;
            break;
          }
          if (config.exit_level && x >= *config.exit_level) {
            outcome = Outcome::Exited;
            break;
          }
          if (x > cap) {
            outcome = Outcome::Escaped;
            break;
          }
        }
      }

      if (outcome == Outcome::Escaped) {
        ++st.escaped;
        st.escaped_index.push_back(rep);
      } else {
        switch (outcome) {
          case Outcome::Absorbed:
            ++st.absorbed;
            st.absorption_times.push_back(t);
            st.absorption_index.push_back(rep);
            break;
          case Outcome::Censored:
            ++st.censored;
            st.censored_index.push_back(rep);
            ++st.undecided_min[running_min];
            break;
          default:
            ++st.exited;
            break;
        }
        ++st.min_hist[running_min];
        for (std::size_t k = 0; k < n_checks; ++k)
          if (path.snapshot[k] >= 0) ++st.survivor_hist[k][path.snapshot[k]];
        for (State s : path.touched) {
          st.occ_sum[s] += path.occ[s];
          st.occ_sumsq[s] += path.occ[s] * path.occ[s];
        }
      }
      for (State s : path.touched) path.occ[s] = 0.0;
      path.touched.clear();
      std::fill(path.snapshot.begin(), path.snapshot.end(), -1);
    }
    return st;
  };

  std::vector<std::optional<ChunkStats>> chunks(n_chunks);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (std::uint64_t c = next++; c < n_chunks; c = next++) chunks[c] = run_chunk(c);
  };
  const int n_threads = static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(config.threads), n_chunks));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SimEnsemble ens;
  ens.config = config;
  ens.cap = cap;
  ens.replicates = config.replicates;
  ens.survivor_hist.assign(n_checks, std::vector<std::uint64_t>(static_cast<std::size_t>(cap) + 1, 0));
  ens.survivors.assign(n_checks, 0);
  ens.occupation_sum.assign(static_cast<std::size_t>(cap) + 1, 0.0);
  ens.occupation_sumsq.assign(static_cast<std::size_t>(cap) + 1, 0.0);
  ens.min_hist.assign(static_cast<std::size_t>(cap) + 1, 0);
  ens.undecided_min.assign(static_cast<std::size_t>(cap) + 1, 0);
  for (auto& slot : chunks) {
    ChunkStats& st = *slot;
    ens.absorbed += st.absorbed;
    ens.censored += st.censored;
    ens.escaped += st.escaped;
    ens.exited += st.exited;
    ens.absorption_times.insert(ens.absorption_times.end(), st.absorption_times.begin(), st.absorption_times.end());
    ens.absorption_index.insert(ens.absorption_index.end(), st.absorption_index.begin(), st.absorption_index.end());
    ens.censored_index.insert(ens.censored_index.end(), st.censored_index.begin(), st.censored_index.end());
    ens.escaped_index.insert(ens.escaped_index.end(), st.escaped_index.begin(), st.escaped_index.end());
    for (std::size_t k = 0; k < n_checks; ++k)
      for (std::size_t s = 0; s <= static_cast<std::size_t>(cap); ++s) ens.survivor_hist[k][s] += st.survivor_hist[k][s];
    for (std::size_t s = 0; s <= static_cast<std::size_t>(cap); ++s) {
      ens.occupation_sum[s] += st.occ_sum[s];
      ens.occupation_sumsq[s] += st.occ_sumsq[s];
      ens.min_hist[s] += st.min_hist[s];
      ens.undecided_min[s] += st.undecided_min[s];
    }
    slot.reset();
  }
  for (std::size_t k = 0; k < n_checks; ++k)
    ens.survivors[k] = std::accumulate(ens.survivor_hist[k].begin(), ens.survivor_hist[k].end(), std::uint64_t{0});
  return ens;
}

Estimate estimate_exit_prob(const SimEnsemble& ens, State y, State x, State z) {
  const SimConfig& c = ens.config;
  if (!c.initial_law.empty() || c.initial_state != x || !c.exit_level || *c.exit_level != z)
    throw Error(ErrorCode::InsufficientData, "ensemble was not run from x with exit level z");
  if (y < 0 || y >= z) throw Error(ErrorCode::OrderingViolation, "exit probability needs 0 <= y < z");
  std::uint64_t hits = 0, undecided = 0;
  for (State m = 0; m <= ens.cap; ++m) {
    if (m <= y)
      hits += ens.min_hist[m];
    else
      undecided += ens.undecided_min[m];
  }
  const std::uint64_t decided = ens.replicates - ens.escaped - undecided;
  if (decided == 0) throw Error(ErrorCode::InsufficientData, "no decided paths");
  const double n = static_cast<double>(decided);
  const double p = static_cast<double>(hits) / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

Estimate estimate_occupation(const SimEnsemble& ens, State y) {
  if (y < 0) throw Error(ErrorCode::OrderingViolation, "state must be >= 0");
  if (ens.censored > 0) throw Error(ErrorCode::InsufficientData, "censored paths bias the occupation mean");
  const std::uint64_t kept = ens.replicates - ens.escaped;
  if (kept < 2) throw Error(ErrorCode::InsufficientData, "fewer than two usable paths");
  if (y > ens.cap || (ens.config.exit_level && y >= *ens.config.exit_level)) return {0.0, 0.0};
  const double n = static_cast<double>(kept);
  const double mean = ens.occupation_sum[y] / n;
  const double var = std::max(0.0, (ens.occupation_sumsq[y] - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

ConditionedLaw estimate_conditioned_law(const SimEnsemble& ens, double t, std::uint64_t min_survivors) {
  const auto& checks = ens.config.t_checks;
  std::size_t k = checks.size();
  for (std::size_t i = 0; i < checks.size(); ++i)
    if (checks[i] == t) k = i;
  if (k == checks.size()) throw Error(ErrorCode::InsufficientData, "t is not a configured check time");
  ConditionedLaw out;
  out.t = t;
  out.survivors = ens.survivors[k];
  if (out.survivors < min_survivors) {
    std::ostringstream os;
    os << out.survivors << " survivors at t=" << t << ", need " << min_survivors;
    throw Error(ErrorCode::InsufficientSurvivors, os.str());
  }
  const double n = static_cast<double>(out.survivors);
  const double z = 1.959963984540054;
  const double z2 = z * z;
  const std::size_t size = ens.survivor_hist[k].size();
  out.prob.assign(size, 0.0);
  out.lower.assign(size, 0.0);
  out.upper.assign(size, 0.0);
  for (std::size_t s = 0; s < size; ++s) {
    const double p = static_cast<double>(ens.survivor_hist[k][s]) / n;
    const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
    out.prob[s] = p;
    out.lower[s] = std::max(0.0, centre - half);
    out.upper[s] = std::min(1.0, centre + half);
  }
  return out;
}

double total_variation(const std::vector<double>& law, const std::vector<double>& nu) {
  const std::size_t n = std::max(law.size(), nu.size() + 1);
  double tv = 0.0;
  for (std::size_t s = 1; s < n; ++s) {
    const double a = s < law.size() ? law[s] : 0.0;
    const double b = s - 1 < nu.size() ? nu[s - 1] : 0.0;
    tv += std::abs(a - b);
  }
  return 0.5 * tv;
}

namespace {

struct DecayWindow {
  double t_lo = 0.0;
  double t_hi = 0.0;
};

// One regression fit; `skip_lo..skip_hi` excludes a block of replicates. With
// no fixed window the window is derived from the retained sample.
double decay_fit(const SimEnsemble& ens, const DecayFitOptions& o, std::uint64_t skip_lo, std::uint64_t skip_hi,
                 DecayWindow* window, bool fixed) {
  auto skipped = [&](std::uint64_t r) { return r >= skip_lo && r < skip_hi; };
  std::uint64_t removed = skip_hi - skip_lo;
  for (std::uint64_t r : ens.escaped_index)
    if (skipped(r)) --removed;
  const std::uint64_t at_risk = ens.replicates - ens.escaped - removed;

  const double cutoff = o.censor_fraction * ens.config.t_max;
  std::vector<double> times;
  times.reserve(ens.absorption_times.size());
  for (std::size_t i = 0; i < ens.absorption_times.size(); ++i)
    if (!skipped(ens.absorption_index[i]) && ens.absorption_times[i] < cutoff) times.push_back(ens.absorption_times[i]);
  std::sort(times.begin(), times.end());
  const std::size_t m = times.size();
  if (m < 2) throw Error(ErrorCode::InsufficientData, "too few absorption times for the decay fit");
  // Window: from the lower edge of the top quantile to the time where only
  // min_at_risk paths remain; S(t) is sampled on a uniform time grid so the
  // late tail is not outweighed by the dense early order statistics.
  if (!fixed) {
    const auto first = static_cast<std::size_t>(std::floor((1.0 - o.tail_fraction) * static_cast<double>(m)));
    const std::uint64_t keep = at_risk > o.min_at_risk ? at_risk - o.min_at_risk : 0;
    const std::size_t last = std::min<std::size_t>(m - 1, static_cast<std::size_t>(keep));
    window->t_lo = times[std::min(first, m - 1)];
    window->t_hi = times[last];
  }
  const double t_lo = window->t_lo, t_hi = window->t_hi;
  std::vector<double> ts, ls;
  for (int k = 0; k < o.grid_points && t_hi > t_lo; ++k) {
    const double t = t_lo + (t_hi - t_lo) * static_cast<double>(k) / static_cast<double>(o.grid_points - 1);
    const auto before = static_cast<double>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
    const double alive = static_cast<double>(at_risk) - before;  // tau >= t
    if (alive < 1.0) break;
    ts.push_back(t);
    ls.push_back(std::log(alive / static_cast<double>(at_risk)));
  }
  if (ts.size() < 8) throw Error(ErrorCode::InsufficientData, "too few tail points for the decay fit");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(ts.size()), 4);
  Eigen::VectorXd Y(static_cast<Eigen::Index>(ts.size()));
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    X(r, 0) = 1.0;
    X(r, 1) = ts[i];
    X(r, 2) = std::log(ts[i]);
    X(r, 3) = 1.0 / ts[i];
    Y(r) = ls[i];
  }
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(Y);
  return -beta(1);
}

}  // namespace

Estimate estimate_decay_rate(const SimEnsemble& ens, const DecayFitOptions& options) {
  if (ens.absorption_times.size() < options.min_absorptions) {
    std::ostringstream os;
    os << ens.absorption_times.size() << " absorption times, need " << options.min_absorptions;
    throw Error(ErrorCode::InsufficientData, os.str());
  }
  if (options.jackknife_groups < 2) throw Error(ErrorCode::ParameterViolation, "jackknife needs >= 2 groups");
  Estimate out;
  DecayWindow window;
  out.value = decay_fit(ens, options, 0, 0, &window, false);
  const auto G = static_cast<std::uint64_t>(options.jackknife_groups);
  std::vector<double> theta;
  for (std::uint64_t g = 0; g < G; ++g) {
    const std::uint64_t lo = ens.replicates * g / G;
    const std::uint64_t hi = ens.replicates * (g + 1) / G;
    // Replicates share the full-sample window; a moving window lets a few
    // tail paths shift the fit range and understates the spread.
    theta.push_back(decay_fit(ens, options, lo, hi, &window, true));
  }
  const double mean = std::accumulate(theta.begin(), theta.end(), 0.0) / static_cast<double>(G);
  double ss = 0.0;
  for (double v : theta) ss += (v - mean) * (v - mean);
  out.stderr_ = std::sqrt(static_cast<double>(G - 1) / static_cast<double>(G) * ss);
  return out;
}

double ks_exponential(std::vector<double> samples, double rate) {
  if (samples.empty()) throw Error(ErrorCode::InsufficientData, "no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = 1.0 - std::exp(-rate * samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

}  // namespace skipfree
