#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "skipfree/error.hpp"
#include "skipfree/model.hpp"
#include "skipfree/model_io.hpp"
#include "skipfree/oracle.hpp"
#include "skipfree/scale.hpp"
#include "skipfree/simulate.hpp"
#include "skipfree/spectral.hpp"

namespace skipfree::cli {

using ojson = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

// JSON cannot hold inf/nan; they are written as null.
ojson num(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

struct Loaded {
  ModelFile file;
  SkipFreeGenerator gen;
};

Loaded load(const Common& c) {
  ModelFile file = load_model(c.model_path);
  SkipFreeGenerator gen = to_generator(file);
  return {std::move(file), std::move(gen)};
}

std::optional<Boundary> override_for(const ModelFile& m) {
  if (m.kind != ModelFile::Kind::BirthDeath) return std::nullopt;
  return birth_death_family_boundary(m.birth, m.death);
}

std::vector<int> resolve_schedule(const ScheduleArgs& a, const SkipFreeGenerator& gen) {
  if (!a.schedule.empty()) return a.schedule;
  const int N = gen.horizon();
  std::vector<int> s;
  for (int v : {N / 4, N / 2, N})
    if (v >= 1 && (s.empty() || v > s.back())) s.push_back(v);
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path);
  out << text;
}

ojson manifest(const Common& c, const ojson& params, Clock::time_point start) {
  ojson m;
  m["command"] = c.command;
  m["model"] = c.model_path;
  m["params"] = params;
  m["tool_version"] = kToolVersion;
  m["wall_time_s"] = std::chrono::duration<double>(Clock::now() - start).count();
  return m;
}

void emit(const Common& c, const ojson& params, const ojson& result, Clock::time_point start) {
  ojson doc;
  doc["manifest"] = manifest(c, params, start);
  doc["result"] = result;
  write_text(c.out, doc.dump(2) + "\n");
}

ojson to_json(const BoundaryClassification& b) {
  ojson j;
  j["verdict"] = to_string(b.verdict);
  j["numeric_verdict"] = to_string(b.numeric_verdict);
  j["schedule"] = b.schedule;
  ojson ps = ojson::array();
  for (double v : b.partial_sums) ps.push_back(num(v));
  j["partial_sums"] = ps;
  ojson lt = ojson::array();
  for (double v : b.last_terms) lt.push_back(num(v));
  j["last_terms"] = lt;
  j["tail_ratio"] = num(b.tail_ratio);
  j["fitted_power"] = num(b.fitted_power);
  j["tail_bound"] = num(b.tail_bound);
  j["analytic_override"] = b.analytic_override ? ojson(to_string(*b.analytic_override)) : ojson(nullptr);
  return j;
}

ojson to_json(const Lambda0Estimate& e) {
  ojson j;
  j["value"] = e.value;
  j["bracket"] = {e.bracket.first, e.bracket.second};
  j["bracket_width"] = e.bracket.second - e.bracket.first;
  j["horizon_schedule"] = e.horizon_schedule;
  ojson per = ojson::array();
  for (std::size_t i = 0; i < e.per_n.size(); ++i)
    per.push_back({{"N", e.horizon_schedule[i]},
                   {"estimate", e.per_n[i]},
                   {"bracket", {e.per_n_bracket[i].first, e.per_n_bracket[i].second}}});
  j["per_horizon"] = per;
  j["eigen_crosscheck"] = e.eigen_crosscheck ? ojson(*e.eigen_crosscheck) : ojson(nullptr);
  j["eigen_discrepancy"] = e.eigen_discrepancy ? ojson(*e.eigen_discrepancy) : ojson(nullptr);
  return j;
}

ojson schedule_params(const std::vector<int>& schedule, double tol) {
  ojson p;
  p["horizon_schedule"] = schedule;
  p["tol"] = tol;
  return p;
}

}  // namespace

std::uint64_t default_seed() {
  const char* env = std::getenv("SKIPFREE_SEED");
  if (!env) return 0;
  std::uint64_t v = 0;
  const std::string s(env);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return (ec == std::errc() && ptr == s.data() + s.size()) ? v : 0;
}

int cmd_validate(const Common& c) {
  const auto start = Clock::now();
  const Loaded m = load(c);
  const SkipFreeGenerator& g = m.gen;
  double down_lo = std::numeric_limits<double>::infinity(), down_hi = 0.0;
  double up_lo = std::numeric_limits<double>::infinity(), up_hi = 0.0;
  double tot_lo = std::numeric_limits<double>::infinity(), tot_hi = 0.0;
  int beyond = 0;
  for (State x = 1; x <= g.horizon(); ++x) {
    down_lo = std::min(down_lo, g.down_rate(x));
    down_hi = std::max(down_hi, g.down_rate(x));
    tot_lo = std::min(tot_lo, g.total_rate(x));
    tot_hi = std::max(tot_hi, g.total_rate(x));
    for (const UpJump& j : g.up_rates(x)) {
      up_lo = std::min(up_lo, j.rate);
      up_hi = std::max(up_hi, j.rate);
      if (x + j.size > g.horizon()) ++beyond;
    }
  }
  ojson r;
  r["valid"] = true;
  r["kind"] = m.file.kind == ModelFile::Kind::BirthDeath ? "birth_death" : "explicit";
  r["horizon"] = g.horizon();
  r["band"] = g.band();
  r["down_rate_range"] = {down_lo, down_hi};
  r["up_rate_range"] = g.band() > 0 ? ojson({up_lo, up_hi}) : ojson(nullptr);
  r["total_rate_range"] = {tot_lo, tot_hi};
  r["up_jumps_beyond_horizon"] = beyond;
  r["checks"] = {"state 0 absorbing", "no downward jumps of size >= 2", "down rates positive",
                 "rates finite and nonnegative", "diagonal rebuilt from row sums"};
  emit(c, ojson::object(), r, start);
  return kSuccess;
}

int cmd_scale(const Common& c, const ScaleArgs& a) {
  const auto start = Clock::now();
  const Loaded m = load(c);
  const int N = a.horizon.value_or(m.gen.horizon());
  const ScaleTable table = scale_table(m.gen, a.q, N, {.verify = true});
  ojson params;
  params["q"] = a.q;
  params["horizon"] = N;
  std::ostringstream os;
  os << "# " << manifest(c, params, start).dump() << "\n";
  os << "x,y,q,w\n";
  const std::string q = fmt(a.q);
  for (State y = 1; y <= N; ++y)
    for (State x = 0; x < y; ++x) os << x << ',' << y << ',' << q << ',' << fmt(table(x, y)) << '\n';
  write_text(c.out, os.str());
  return kSuccess;
}

int cmd_boundary(const Common& c, const ScheduleArgs& a) {
  const auto start = Clock::now();
  const Loaded m = load(c);
  const std::vector<int> schedule = resolve_schedule(a, m.gen);
  const BoundaryClassification b = classify_boundary(m.gen, schedule, {}, override_for(m.file));
  emit(c, schedule_params(schedule, a.tol), to_json(b), start);
  return kSuccess;
}

int cmd_lambda0(const Common& c, const ScheduleArgs& a) {
  const auto start = Clock::now();
  const Loaded m = load(c);
  const std::vector<int> schedule = resolve_schedule(a, m.gen);
  const Lambda0Estimate e = find_lambda0(m.gen, schedule, {.tol = a.tol});
  emit(c, schedule_params(schedule, a.tol), to_json(e), start);
  return kSuccess;
}

int cmd_qsd(const Common& c, const QsdArgs& a) {
  const auto start = Clock::now();
  const Loaded m = load(c);
  const std::vector<int> schedule = resolve_schedule(a.schedule, m.gen);
  QsdSetOptions opts;
  opts.lambda0.tol = a.schedule.tol;
  opts.analytic_override = override_for(m.file);
  const QsdSetReport rep = qsd_set_report(m.gen, schedule, opts);

  ojson params = schedule_params(schedule, a.schedule.tol);
  params["lambda"] = a.lambda;
  ojson r;
  r["boundary"] = to_json(rep.boundary);
  r["lambda0"] = to_json(rep.lambda0);
  r["verdict"] = to_string(rep.verdict);

  std::optional<double> lambda;
  if (a.lambda == "auto") {
    const double width = rep.lambda0.bracket.second - rep.lambda0.bracket.first;
    if (rep.verdict == QsdVerdict::Unique)
      lambda = rep.lambda0.value;
    else if (rep.verdict == QsdVerdict::Family)
      lambda = rep.lambda0.value - width;
  } else {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(a.lambda.data(), a.lambda.data() + a.lambda.size(), v);
    if (ec != std::errc() || ptr != a.lambda.data() + a.lambda.size() || !(v > 0.0))
      throw Error(ErrorCode::ConfigError, "--lambda must be 'auto' or a positive number");
    lambda = v;
  }
  r["lambda"] = lambda ? ojson(*lambda) : ojson(nullptr);
  if (lambda) {
    const Qsd q = compute_qsd(m.gen, *lambda, schedule.back());
    ojson jq;
    jq["lambda"] = q.lambda;
    jq["mass"] = q.mass;
    jq["tail"] = num(q.tail);
    jq["defect"] = num(q.defect);
    jq["subprobability"] = q.subprobability;
    if (!a.weights_out.empty()) {
      std::ostringstream os;
      os << "x,nu\n";
      for (std::size_t i = 0; i < q.weights.size(); ++i) os << i + 1 << ',' << fmt(q.weights[i]) << '\n';
      write_text(a.weights_out, os.str());
      jq["weights_csv"] = a.weights_out;
    } else {
      jq["weights"] = q.weights;
    }
    r["qsd"] = jq;
  } else {
    r["qsd"] = nullptr;
  }
  emit(c, params, r, start);
  return kSuccess;
}

int cmd_simulate(const Common& c, const SimulateArgs& a) {
  const auto start = Clock::now();
  const Loaded m = load(c);
  SimConfig cfg;
  cfg.initial_state = a.x0;
  cfg.replicates = a.reps;
  cfg.seed = a.seed;
  cfg.t_max = a.t_max;
  cfg.t_checks = a.t_checks;
  std::sort(cfg.t_checks.begin(), cfg.t_checks.end());
  cfg.exit_level = a.exit_level;
  cfg.horizon_cap = a.horizon_cap.value_or(0);
  cfg.threads = c.threads;
  const SimEnsemble ens = simulate_ensemble(m.gen, cfg);

  ojson params;
  params["x0"] = a.x0;
  params["reps"] = a.reps;
  params["seed"] = a.seed;
  params["t_max"] = a.t_max;
  params["t_checks"] = cfg.t_checks;
  params["exit_level"] = a.exit_level ? ojson(*a.exit_level) : ojson(nullptr);
  params["horizon_cap"] = ens.cap;

  ojson r;
  r["replicates"] = ens.replicates;
  r["absorbed"] = ens.absorbed;
  r["censored"] = ens.censored;
  r["escaped"] = ens.escaped;
  r["exited"] = ens.exited;
  r["escape_fraction"] = static_cast<double>(ens.escaped) / static_cast<double>(ens.replicates);
  if (!ens.absorption_times.empty()) {
    double s = 0.0;
    for (double t : ens.absorption_times) s += t;
    r["mean_absorption_time"] = s / static_cast<double>(ens.absorption_times.size());
  }
  try {
    const Estimate d = estimate_decay_rate(ens);
    r["decay_rate"] = {{"value", d.value}, {"stderr", d.stderr_}};
  } catch (const Error& e) {
    r["decay_rate"] = {{"error", e.what()}};
  }
  ojson checks = ojson::array();
  for (double t : cfg.t_checks) {
    ojson jc;
    jc["t"] = t;
    try {
      const ConditionedLaw law = estimate_conditioned_law(ens, t);
      jc["survivors"] = law.survivors;
      ojson states = ojson::array();
      for (std::size_t s = 1; s < law.prob.size(); ++s)
        if (law.prob[s] > 0.0) states.push_back({{"x", s}, {"p", law.prob[s]}, {"lo", law.lower[s]}, {"hi", law.upper[s]}});
      jc["law"] = states;
    } catch (const Error& e) {
      jc["error"] = e.what();
    }
    checks.push_back(jc);
  }
  r["conditioned_law"] = checks;
  if (ens.censored == 0 && ens.escaped < ens.replicates) {
    ojson occ = ojson::array();
    for (State y = 1; y <= ens.cap; ++y) {
      if (ens.occupation_sum[y] == 0.0) continue;
      const Estimate o = estimate_occupation(ens, y);
      occ.push_back({{"y", y}, {"mean", o.value}, {"stderr", o.stderr_}});
    }
    r["occupation"] = occ;
  }
  if (!a.times_out.empty()) {
    std::ostringstream os;
    os << "tau0\n";
    for (double t : ens.absorption_times) os << fmt(t) << '\n';
    write_text(a.times_out, os.str());
    r["absorption_times_csv"] = a.times_out;
  }
  emit(c, params, r, start);
  return kSuccess;
}

namespace {

struct VerifyTable {
  ojson rows = ojson::array();
  bool ok = true;

  void add(const std::string& check, const std::string& detail, double formula, std::optional<double> oracle,
           std::optional<double> mc, std::optional<double> mc_stderr, double tolerance, bool pass) {
    ojson r;
    r["check"] = check;
    r["detail"] = detail;
    r["formula"] = num(formula);
    r["oracle"] = oracle ? num(*oracle) : ojson(nullptr);
    r["mc"] = mc ? num(*mc) : ojson(nullptr);
    r["mc_stderr"] = mc_stderr ? num(*mc_stderr) : ojson(nullptr);
    r["tolerance"] = tolerance;
    r["pass"] = pass;
    rows.push_back(r);
    ok = ok && pass;
  }
};

double rational_to_double(const Rational& r) { return static_cast<double>(r); }

}  // namespace

int cmd_verify(const Common& c, const VerifyArgs& a) {
  const auto start = Clock::now();
  const Loaded m = load(c);
  const SkipFreeGenerator& gen = m.gen;
  if (gen.horizon() < 4) throw Error(ErrorCode::ParameterViolation, "verify needs a horizon of at least 4");
  const std::vector<int> schedule = resolve_schedule(a.schedule, gen);
  VerifyTable t;
  constexpr double kSigma = 3.0;

  // Resolvent identity.
  const int nr = std::min(20, gen.horizon());
  for (auto [q, r] : {std::pair{1.0, -0.1}, {0.5, 0.0}, {2.0, 1.0}}) {
    const double res = resolvent_residual(gen, q, r, nr);
    const double scale = std::max(scale_table(gen, q, nr).max_abs(), scale_table(gen, r, nr).max_abs());
    t.add("resolvent", "q=" + fmt(q) + " r=" + fmt(r) + " N=" + std::to_string(nr), res, std::nullopt, std::nullopt,
          std::nullopt, 1e-9 * scale, res <= 1e-9 * scale);
  }

  // Recursion vs dense elimination.
  const int nd = std::min(40, gen.horizon());
  for (double q : {-0.05, 0.0, 1.0}) {
    double worst = 0.0;
    for (State y = 1; y <= nd; ++y) {
      const auto rec = scale_column(gen, q, y);
      const auto dense = dense_scale_solve(gen, q, y);
      for (State x = 0; x < y; ++x) worst = std::max(worst, std::abs(rec[x] - dense[x]) / std::abs(dense[x]));
    }
    t.add("scale_vs_dense", "q=" + fmt(q) + " N=" + std::to_string(nd), worst, std::nullopt, std::nullopt,
          std::nullopt, 1e-10, worst <= 1e-10);
  }

  // Exit probabilities and potential densities below level 3.
  const State z = 3;
  std::vector<SimEnsemble> exits;
  for (State x0 : {1, 2}) {
    SimConfig cfg;
    cfg.initial_state = x0;
    cfg.exit_level = z;
    cfg.replicates = a.reps;
    cfg.seed = a.seed;
    cfg.stream_id = static_cast<std::uint64_t>(x0);
    cfg.threads = c.threads;
    exits.push_back(simulate_ensemble(gen, cfg));
  }
  const auto exact = dense_scale_solve_exact(gen, Rational(0), z);
  for (State x0 : {1, 2}) {
    const double f = exit_weight(gen, 0.0, x0, 0, z);
    const double o = rational_to_double(exact[x0] / exact[0]);
    const Estimate e = estimate_exit_prob(exits[x0 - 1], 0, x0, z);
    const bool pass = std::abs(f - o) <= 1e-12 * o && std::abs(e.value - f) <= kSigma * e.stderr_;
    t.add("exit_probability", "y=0 x=" + std::to_string(x0) + " z=3", f, o, e.value, e.stderr_, kSigma, pass);
  }
  for (State x0 : {1, 2}) {
    const State y = 1;
    const double f = potential_density(gen, 0.0, x0, y, z);
    const auto col_y = dense_scale_solve_exact(gen, Rational(0), y);
    const Rational wxy = x0 < y ? col_y[x0] : Rational(0);
    const double o = rational_to_double(col_y[0] * exact[x0] / exact[0] - wxy);
    const Estimate e = estimate_occupation(exits[x0 - 1], y);
    const bool pass = std::abs(f - o) <= 1e-12 * o && std::abs(e.value - f) <= kSigma * e.stderr_;
    t.add("potential_density", "x=" + std::to_string(x0) + " y=1 z=3", f, o, e.value, e.stderr_, kSigma, pass);
  }

  // Half-line occupation density at (2, 2), q = 0.
  {
    SimConfig cfg;
    cfg.initial_state = 2;
    cfg.replicates = a.reps;
    cfg.seed = a.seed;
    cfg.stream_id = 3;
    cfg.threads = c.threads;
    const SimEnsemble ens = simulate_ensemble(gen, cfg);
    const double f = occupation_density_halfline(gen, 0.0, 2, 2, schedule.back());
    const double o = rational_to_double(dense_scale_solve_exact(gen, Rational(0), 2)[0]);
    bool pass = std::abs(f - o) <= 1e-12 * o;
    std::optional<double> mc, se;
    if (ens.censored == 0) {
      const Estimate e = estimate_occupation(ens, 2);
      mc = e.value;
      se = e.stderr_;
      pass = pass && std::abs(e.value - f) <= kSigma * e.stderr_;
    } else {
      pass = false;
    }
    t.add("halfline_occupation", "x=2 y=2 q=0", f, o, mc, se, kSigma, pass);
  }

  // lambda0 by bisection, eigen oracle and Monte Carlo tail fit.
  const Lambda0Estimate l0 = find_lambda0(gen, schedule, {.tol = a.schedule.tol});
  {
    SimConfig cfg;
    cfg.initial_state = 1;
    cfg.replicates = a.reps;
    cfg.seed = a.seed;
    cfg.stream_id = 4;
    cfg.threads = c.threads;
    const SimEnsemble ens = simulate_ensemble(gen, cfg);
    std::optional<double> mc, se;
    bool pass = l0.eigen_crosscheck && std::abs(l0.value - *l0.eigen_crosscheck) <= 1e-3 * *l0.eigen_crosscheck;
    try {
      const Estimate d = estimate_decay_rate(ens);
      mc = d.value;
      se = d.stderr_;
      pass = pass && std::abs(d.value - l0.value) <= std::max(1e-3 * l0.value, kSigma * d.stderr_);
    } catch (const Error&) {
      pass = false;
    }
    t.add("lambda0", "N=" + std::to_string(schedule.back()), l0.value, l0.eigen_crosscheck, mc, se, 1e-3, pass);
  }

  // Mass identity lambda sum W^(-lambda)(0,y) + h(lambda;0) = 1 on a lambda grid.
  if (l0.value > 0.0) {
    const int N = schedule.back();
    for (int k = 1; k <= 5; ++k) {
      const double lambda = l0.value * k / 5.0;
      const Qsd q = compute_qsd(gen, lambda, N);
      const HEval h = h_function(gen, lambda, 1e-6, 0, N);
      const double lhs = q.mass + h.value;
      const double tol = 1e-3 + (std::isfinite(q.tail) ? q.tail : 0.0) + (std::isfinite(h.tail_bound) ? h.tail_bound : 0.0);
      t.add("mass_identity", "lambda=" + fmt(lambda), lhs, 1.0, std::nullopt, std::nullopt, tol,
            std::abs(lhs - 1.0) <= tol);
    }
  }

  ojson params = schedule_params(schedule, a.schedule.tol);
  params["reps"] = a.reps;
  params["seed"] = a.seed;
  ojson r;
  r["all_pass"] = t.ok;
  r["checks"] = t.rows;
  emit(c, params, r, start);
  return t.ok ? kSuccess : kVerification;
}

}  // namespace skipfree::cli
