#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "skipfree/error.hpp"

namespace {

using namespace skipfree::cli;

const char* kUnits =
    "Units: rates and lambda in events per unit time; times (--t-max, --t-checks, tau0) in\n"
    "model time units; QSD weights (nu) and conditioned laws in probability mass; scale\n"
    "values w in inverse rate units (time).\n\n"
    "Outputs: JSON {manifest, result} on stdout or --out. CSV files start with the manifest\n"
    "as a '#' comment line. scale: columns x,y,q,w. qsd --weights-out: columns x,nu.\n"
    "simulate --times-out: column tau0 (absorption time).\n\n"
    "Exit codes: 0 success, 1 validation error, 2 numeric failure, 3 verification failure.\n"
    "SKIPFREE_SEED sets the default --seed.";

void add_model(CLI::App* sub, Common& c) {
  sub->add_option("model", c.model_path, "Model JSON file")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "Output path (default: stdout)");
  sub->add_option("--threads", c.threads, "Worker thread cap")->check(CLI::PositiveNumber);
}

void add_schedule(CLI::App* sub, ScheduleArgs& s) {
  sub->add_option("--horizon-schedule", s.schedule, "Increasing horizons a,b,c (default N/4,N/2,N)")
      ->delimiter(',');
  sub->add_option("--tol", s.tol, "Bisection bracket width on lambda (rate)")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scale functions, decay parameter and quasi-stationary laws of downward skip-free chains"};
  app.footer(kUnits);
  app.require_subcommand(1);

  Common common;
  ScaleArgs scale;
  ScheduleArgs boundary, lambda0;
  QsdArgs qsd;
  SimulateArgs sim;
  VerifyArgs verify;
  sim.seed = default_seed();
  verify.seed = default_seed();

  auto* v = app.add_subcommand("validate", "Load and validate a model; report horizon and rate ranges");
  add_model(v, common);

  auto* s = app.add_subcommand("scale", "Emit the q-scale table W^(q)(x,y) as CSV x,y,q,w");
  add_model(s, common);
  s->add_option("--q", scale.q, "Discount rate q (rate; may be negative above -lambda0)");
  s->add_option("--horizon", scale.horizon, "Largest y (default: model horizon)")->check(CLI::PositiveNumber);

  auto* b = app.add_subcommand("boundary", "Classify the boundary at infinity (Entrance/Natural/Inconclusive)");
  add_model(b, common);
  add_schedule(b, boundary);

  auto* l = app.add_subcommand("lambda0", "Estimate the decay parameter lambda0 (rate) by bisection");
  add_model(l, common);
  add_schedule(l, lambda0);

  auto* q = app.add_subcommand("qsd", "QSD verdict and weights nu_lambda (probability mass)");
  add_model(q, common);
  add_schedule(q, qsd.schedule);
  q->add_option("--lambda", qsd.lambda, "'auto' or a positive rate");
  q->add_option("--weights-out", qsd.weights_out, "Write weights as CSV x,nu instead of embedding them");

  auto* m = app.add_subcommand("simulate", "Monte Carlo ensemble: absorption, decay-rate fit, conditioned laws");
  add_model(m, common);
  m->add_option("--x0", sim.x0, "Initial state")->check(CLI::PositiveNumber);
  m->add_option("--reps", sim.reps, "Replicates")->check(CLI::PositiveNumber);
  m->add_option("--seed", sim.seed, "Seed (default: SKIPFREE_SEED or 0)");
  m->add_option("--t-max", sim.t_max, "Censoring time (time)")->check(CLI::PositiveNumber);
  m->add_option("--t-checks", sim.t_checks, "Snapshot times t1,t2,... (time)")->delimiter(',');
  m->add_option("--exit-level", sim.exit_level, "Stop paths on reaching this level or above");
  m->add_option("--horizon-cap", sim.horizon_cap, "Paths above this state count as escaped");
  m->add_option("--times-out", sim.times_out, "Write absorption times as CSV tau0");

  auto* c = app.add_subcommand("verify", "Formula vs oracle vs Monte Carlo cross-checks; exit 3 on any failure");
  add_model(c, common);
  add_schedule(c, verify.schedule);
  c->add_option("--reps", verify.reps, "Replicates per Monte Carlo check")->check(CLI::PositiveNumber);
  c->add_option("--seed", verify.seed, "Seed (default: SKIPFREE_SEED or 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kSuccess : kValidation;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    common.command = sub->get_name();
    if (sub == v) return cmd_validate(common);
    if (sub == s) return cmd_scale(common, scale);
    if (sub == b) return cmd_boundary(common, boundary);
    if (sub == l) return cmd_lambda0(common, lambda0);
    if (sub == q) return cmd_qsd(common, qsd);
    if (sub == m) return cmd_simulate(common, sim);
    return cmd_verify(common, verify);
  } catch (const skipfree::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return skipfree::is_validation_error(e.code()) ? kValidation : kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
}
