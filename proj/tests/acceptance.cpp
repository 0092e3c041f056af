// Acceptance run: one PASS/FAIL line per criterion. With an argument, runs
// only that criterion (ctest registers each one separately).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "commands.hpp"
#include "corpus.hpp"
#include "skipfree/error.hpp"
#include "skipfree/oracle.hpp"
#include "skipfree/scale.hpp"
#include "skipfree/simulate.hpp"
#include "skipfree/spectral.hpp"

using namespace skipfree;
using skipfree::testing::chain_a;
using skipfree::testing::chain_b;
using skipfree::testing::critical_chain;

namespace {

constexpr double kScaleRel = 1e-10;
constexpr double kResidualRel = 1e-10;
constexpr double kPolyRel = 1e-9;
constexpr double kResolventRel = 1e-9;
constexpr double kChainAClosed = 1e-12;
constexpr double kChainBClosed = 1e-10;
constexpr double kSigmas = 3.0;
constexpr double kLambdaRel = 1e-3;
constexpr double kMassMin = 0.999;
constexpr double kIdentityTol = 1e-3;
constexpr double kHRootTol = 1e-3;
constexpr double kTvMax = 0.05;
constexpr double kInvarianceTol = 1e-3;
constexpr double kZeroLambda = 1e-2;
constexpr double kHProbe = 1e-6;  // q used for h(lambda; 0)
constexpr std::uint64_t kSeed = 7;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

const std::vector<SkipFreeGenerator>& corpus() {
  static const std::vector<SkipFreeGenerator> c = skipfree::testing::corpus();
  return c;
}

Outcome scale_recursion() {
  double worst = 0.0, worst_res = 0.0;
  for (const auto& gen : corpus()) {
    for (double q : {-0.05, 0.0, 0.3, 1.0}) {
      for (State y = 1; y <= gen.horizon(); ++y) {
        const auto rec = scale_column(gen, q, y);
        const auto dense = dense_scale_solve(gen, q, y);
        for (State x = 0; x < y; ++x) worst = std::max(worst, rel_err(rec[x], dense[x]));
      }
      worst_res = std::max(worst_res, relative_eigen_residual(gen, scale_table(gen, q, gen.horizon())));
    }
  }
  return {worst <= kScaleRel && worst_res <= kResidualRel,
          "max rel diff vs dense " + sci(worst) + ", max rel residual " + sci(worst_res)};
}

Outcome polynomial_form() {
  double worst = 0.0;
  for (const auto& gen : corpus()) {
    for (double q : {-0.1, 0.5, 2.0}) {
      for (State y = 1; y <= gen.horizon(); ++y) {
        const auto rec = scale_column(gen, q, y);
        const auto poly = poly_column(gen, q, y);
        for (State x = 0; x < y; ++x) worst = std::max(worst, rel_err(poly[x], rec[x]));
      }
    }
  }
  return {worst <= kPolyRel, "max rel diff " + sci(worst)};
}

Outcome resolvent() {
  std::vector<SkipFreeGenerator> gens{chain_a(), chain_b()};
  for (const auto& g : corpus())
    if (g.horizon() >= 20 && gens.size() < 12) gens.push_back(g);
  constexpr int N = 20;
  double worst = 0.0;
  for (const auto& gen : gens) {
    for (auto [q, r] : {std::pair{1.0, -0.1}, {0.5, 0.0}, {2.0, 1.0}}) {
      const double scale = std::max(scale_table(gen, q, N).max_abs(), scale_table(gen, r, N).max_abs());
      worst = std::max(worst, resolvent_residual(gen, q, r, N) / scale);
    }
  }
  return {gens.size() == 12 && worst <= kResolventRel,
          std::to_string(gens.size()) + " chains, max residual / max entry " + sci(worst)};
}

Outcome closed_form() {
  const auto a = scale_table(chain_a(), 0.0, 40);
  double err_a = 0.0;
  for (State x = 1; x <= 40; ++x) err_a = std::max(err_a, std::abs(a(0, x) - (1.0 - std::ldexp(1.0, -x))));
  const auto spec_b = make_birth_death(40, [](State) { return 1.0; }, [](State x) { return double(x) * x; });
  const auto cf = bd_closed_form(spec_b);
  const auto b = scale_table(build_birth_death(spec_b), 0.0, 40);
  double err_b = 0.0;
  for (State x = 1; x <= 40; ++x) err_b = std::max(err_b, rel_err(b(0, x), cf.scale_at_zero(x)));
  return {err_a <= kChainAClosed && err_b <= kChainBClosed,
          "chain A abs err " + sci(err_a) + ", chain B rel err " + sci(err_b)};
}

SimEnsemble chain_a_exit_run(State x0) {
  SimConfig cfg;
  cfg.initial_state = x0;
  cfg.exit_level = 3;
  cfg.replicates = 100000;
  cfg.seed = kSeed;
  cfg.stream_id = static_cast<std::uint64_t>(x0);
  cfg.threads = threads();
  return simulate_ensemble(chain_a(), cfg);
}

Outcome exit_probabilities() {
  const auto gen = chain_a();
  const auto exact = dense_scale_solve_exact(gen.restricted(3), Rational(0), 3);
  const Rational p1 = exact[1] / exact[0], p2 = exact[2] / exact[0];
  const bool exact_ok = p1 == Rational(6, 7) && p2 == Rational(4, 7);
  std::ostringstream d;
  d << "oracle " << p1 << ", " << p2;
  bool ok = exact_ok;
  for (State x0 : {1, 2}) {
    const Estimate e = estimate_exit_prob(chain_a_exit_run(x0), 0, x0, 3);
    const double target = x0 == 1 ? 6.0 / 7.0 : 4.0 / 7.0;
    const double z = (e.value - target) / e.stderr_;
    ok = ok && std::abs(z) <= kSigmas;
    d << "; MC x=" << x0 << " " << e.value << " (z=" << sci(z) << ")";
  }
  return {ok, d.str()};
}

Outcome potential_densities() {
  const auto gen = chain_a();
  std::ostringstream d;
  bool ok = true;
  auto check = [&](const char* label, double formula, double target, const Estimate& e) {
    const double z = (e.value - target) / e.stderr_;
    ok = ok && std::abs(formula - target) <= 1e-12 && std::abs(z) <= kSigmas;
    d << label << " formula " << formula << " MC " << e.value << " (z=" << sci(z) << "); ";
  };
  check("(1,1,3)", potential_density(gen, 0.0, 1, 1, 3), 3.0 / 7.0, estimate_occupation(chain_a_exit_run(1), 1));
  check("(2,1,3)", potential_density(gen, 0.0, 2, 1, 3), 2.0 / 7.0, estimate_occupation(chain_a_exit_run(2), 1));
  SimConfig cfg;
  cfg.initial_state = 2;
  cfg.replicates = 100000;
  cfg.seed = kSeed;
  cfg.stream_id = 3;
  cfg.threads = threads();
  const SimEnsemble half = simulate_ensemble(gen, cfg);
  check("halfline (2,2)", occupation_density_halfline(gen, 0.0, 2, 2, 400), 0.75, estimate_occupation(half, 2));
  return {ok, d.str()};
}

Outcome lambda0_triangulation() {
  const auto gen = chain_a();
  const Lambda0Estimate bis = find_lambda0(gen, {100, 200, 400}, {.tol = 1e-6});
  const DecayEigenResult eig = leading_decay_eigenvalue(make_sub_generator(gen, 400));
  SimConfig cfg;
  cfg.initial_state = 1;
  cfg.replicates = 100000;
  cfg.seed = kSeed;
  cfg.stream_id = 4;
  cfg.threads = threads();
  const SimEnsemble ens = simulate_ensemble(gen, cfg);
  const Estimate mc = estimate_decay_rate(ens);
  auto agree = [&](double a, double b, double sigma) {
    return std::abs(a - b) <= std::max(kLambdaRel * std::max(a, b), kSigmas * sigma);
  };
  const bool ok = ens.absorbed == 100000 && agree(bis.value, eig.value, 0.0) && agree(bis.value, mc.value, mc.stderr_) &&
                  agree(eig.value, mc.value, mc.stderr_) && std::abs(eig.value - 0.1716) <= 1e-3;
  std::ostringstream d;
  d.precision(10);
  d << "bisection " << bis.value << ", eigen " << eig.value << ", MC " << mc.value << " +- " << mc.stderr_;
  return {ok, d.str()};
}

Outcome qsd_dichotomy() {
  std::ostringstream d;
  bool ok = true;
  const auto b = chain_b();
  const QsdSetReport rb = qsd_set_report(b, {50, 100, 200});
  ok = ok && rb.verdict == QsdVerdict::Unique && rb.qsd && rb.qsd->mass >= kMassMin;
  d << "chain B " << to_string(rb.verdict) << " mass " << (rb.qsd ? rb.qsd->mass : 0.0);

  const auto a = chain_a();
  const QsdSetReport ra = qsd_set_report(a, {100, 200, 400});
  ok = ok && ra.verdict == QsdVerdict::Family;
  d << "; chain A " << to_string(ra.verdict);
  const double l0 = ra.lambda0.value;
  for (double lambda : {l0 / 2.0, l0}) {
    const Qsd nu = compute_qsd(a, lambda, 400);
    SimConfig cfg;
    cfg.initial_law = nu.weights;
    cfg.replicates = 10000;
    cfg.seed = kSeed;
    cfg.stream_id = lambda == l0 ? 6 : 5;
    cfg.threads = threads();
    const SimEnsemble ens = simulate_ensemble(a, cfg);
    const double ks = ks_exponential(ens.absorption_times, lambda);
    const double crit = ks_critical_1pct(ens.absorption_times.size());
    ok = ok && nu.mass >= kMassMin && ens.absorbed == 10000 && ks <= crit;
    d << "; lambda " << sci(lambda) << " mass " << nu.mass << " KS " << sci(ks) << "/" << sci(crit);
  }
  return {ok, d.str()};
}

Outcome mass_identity() {
  std::ostringstream d;
  bool ok = true;
  double worst = 0.0;
  for (auto [gen, N] : {std::pair{chain_a(), 400}, {chain_b(), 200}}) {
    const double l0 = find_lambda0(gen, {N / 4, N / 2, N}, {.tol = 1e-10}).value;
    for (int k = 1; k <= 5; ++k) {
      const double lambda = l0 * k / 5.0;
      const Qsd nu = compute_qsd(gen, lambda, N);
      const HEval h = h_function(gen, lambda, kHProbe, 0, N);
      const double gap = std::abs(nu.mass + h.value - 1.0);
      const double allowance = kIdentityTol + (std::isfinite(nu.tail) ? nu.tail : 0.0) +
                               (std::isfinite(h.tail_bound) ? h.tail_bound : 0.0);
      ok = ok && gap <= allowance;
      worst = std::max(worst, gap);
    }
  }
  d << "max |mass + h - 1| " << sci(worst) << " over 10 points";
  return {ok, d.str()};
}

Outcome entrance_h_root() {
  const auto b = chain_b();
  const double l0 = find_lambda0(b, {100, 200, 400}, {.tol = 1e-13}).value;
  const HEval h = h_function(b, l0, kHProbe, 0, 200);
  return {std::abs(h.value) <= kHRootTol, "lambda0 " + sci(l0) + ", h(lambda0; 0) " + sci(h.value)};
}

Outcome yaglom_limit() {
  const auto b = chain_b();
  const double l0 = find_lambda0(b, {100, 200, 400}, {.tol = 1e-13}).value;
  const Qsd nu = compute_qsd(b, l0, 200);
  const double t = 10.0 / l0;
  SimConfig cfg;
  cfg.initial_state = 1;
  cfg.replicates = 1000000;
  cfg.seed = kSeed;
  cfg.stream_id = 8;
  cfg.t_checks = {t};
  cfg.threads = threads();
  const SimEnsemble ens = simulate_ensemble(b, cfg);
  const std::uint64_t survivors = ens.survivors.at(0);
  // The estimator needs 100 survivors; below that the distance is reported but
  // the criterion fails.
  if (survivors == 0) return {false, "no survivors at t = " + sci(t)};
  const ConditionedLaw law = estimate_conditioned_law(ens, t, 1);
  const double tv = total_variation(law.prob, nu.weights);
  return {survivors >= 100 && tv <= kTvMax,
          "t " + sci(t) + ", survivors " + std::to_string(survivors) + " of 1e6 (estimator needs 100), TV " + sci(tv)};
}

Outcome rho_invariance() {
  const auto b = chain_b();
  const double l0 = find_lambda0(b, {100, 200, 400}, {.tol = 1e-13}).value;
  const YaglomResidue r = yaglom_residue(b, l0, 100);
  const Eigen::VectorXd rho = Eigen::Map<const Eigen::VectorXd>(r.rho.data(), static_cast<Eigen::Index>(r.rho.size()));
  const Eigen::VectorXd moved = matrix_exponential_action(make_sub_generator(b, 100), rho, 1.0, ActionSide::Right);
  const double res = (moved - std::exp(-l0) * rho).lpNorm<Eigen::Infinity>() / rho.lpNorm<Eigen::Infinity>();
  const bool positive = rho.minCoeff() > 0.0;
  return {positive && res <= kInvarianceTol,
          "relative residual " + sci(res) + ", min rho " + sci(rho.minCoeff())};
}

Outcome no_qsd() {
  const QsdSetReport r = qsd_set_report(critical_chain(), {200, 400, 800});
  return {r.lambda0.value <= kZeroLambda && r.verdict == QsdVerdict::NoQsd,
          "lambda0 " + sci(r.lambda0.value) + ", verdict " + to_string(r.verdict)};
}

std::string without_wall_time(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line, out;
  while (std::getline(in, line))
    if (line.find("\"wall_time_s\"") == std::string::npos) out += line + "\n";
  return out;
}

Outcome determinism() {
  const auto dir = std::filesystem::temp_directory_path();
  std::vector<std::filesystem::path> files{dir / "skipfree_verify_1.json", dir / "skipfree_verify_2.json"};
  std::vector<int> codes;
  for (std::size_t i = 0; i < files.size(); ++i) {
    cli::Common c;
    c.command = "verify";
    c.model_path = MODELS_DIR "/chainA.json";
    c.out = files[i].string();
    c.threads = i == 0 ? 1 : 4;
    cli::VerifyArgs v;
    v.reps = 100000;
    v.seed = kSeed;
    codes.push_back(cli::cmd_verify(c, v));
  }
  const std::string a = without_wall_time(files[0]), b = without_wall_time(files[1]);
  for (const auto& f : files) std::filesystem::remove(f);
  return {!a.empty() && a == b && codes[0] == codes[1],
          "exit codes " + std::to_string(codes[0]) + "/" + std::to_string(codes[1]) + ", " + std::to_string(a.size()) +
              " bytes, threads 1 vs 4" + (a == b ? ", identical" : ", DIFFER")};
}

const std::vector<std::pair<const char*, std::function<Outcome()>>> kCriteria{
    {"scale recursion vs dense solve", scale_recursion},
    {"polynomial representation", polynomial_form},
    {"resolvent identity", resolvent},
    {"birth-death closed form", closed_form},
    {"exit probabilities", exit_probabilities},
    {"potential densities", potential_densities},
    {"lambda0 triangulation", lambda0_triangulation},
    {"QSD set dichotomy", qsd_dichotomy},
    {"mass identity", mass_identity},
    {"entrance h-root", entrance_h_root},
    {"Yaglom limit", yaglom_limit},
    {"rho invariance", rho_invariance},
    {"no QSD at zero decay", no_qsd},
    {"verify determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::size_t first = 1, last = kCriteria.size();
  if (argc > 1) {
    first = last = static_cast<std::size_t>(std::stoul(argv[1]));
    if (first < 1 || first > kCriteria.size()) {
      std::cerr << "criterion must be 1.." << kCriteria.size() << '\n';
      return 2;
    }
  }
  bool all = true;
  for (std::size_t i = first; i <= last; ++i) {
    const auto& [name, run] = kCriteria[i - 1];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && o.pass;
    std::printf("criterion %2zu %s  %s [%.1fs]  %s\n", i, o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
