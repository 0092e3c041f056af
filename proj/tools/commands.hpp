#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace skipfree::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kSuccess = 0,
  kValidation = 1,
  kNumeric = 2,
  kVerification = 3,
};

struct Common {
  std::string command;
  std::string model_path;
  std::string out;  // empty: stdout
  int threads = 1;
};

struct ScaleArgs {
  double q = 0.0;
  std::optional<int> horizon;
};

struct ScheduleArgs {
  std::vector<int> schedule;  // empty: {N/4, N/2, N} of the model horizon
  double tol = 1e-6;
};

struct QsdArgs {
  ScheduleArgs schedule;
  std::string lambda = "auto";
  std::string weights_out;
};

struct SimulateArgs {
  int x0 = 1;
  std::uint64_t reps = 10000;
  std::uint64_t seed = 0;
  double t_max = 1e6;
  std::vector<double> t_checks;
  std::optional<int> exit_level;
  std::optional<int> horizon_cap;
  std::string times_out;
};

struct VerifyArgs {
  ScheduleArgs schedule;
  std::uint64_t reps = 100000;
  std::uint64_t seed = 0;
};

int cmd_validate(const Common& common);
int cmd_scale(const Common& common, const ScaleArgs& args);
int cmd_boundary(const Common& common, const ScheduleArgs& args);
int cmd_lambda0(const Common& common, const ScheduleArgs& args);
int cmd_qsd(const Common& common, const QsdArgs& args);
int cmd_simulate(const Common& common, const SimulateArgs& args);
int cmd_verify(const Common& common, const VerifyArgs& args);

/// Seed from SKIPFREE_SEED, or 0 when unset or malformed.
std::uint64_t default_seed();

}  // namespace skipfree::cli
