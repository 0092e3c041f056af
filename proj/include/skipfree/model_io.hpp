#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skipfree/model.hpp"

namespace skipfree {

/// A per-state rate sequence given either as an explicit array (x = 1, 2, ...)
/// or as a built-in family expression: "const:c", "linear:a,b" (a + b x),
/// "square" (x^2).
struct RateSeries {
  std::vector<double> values;
  std::string expr;  // empty when values are explicit

  bool is_expr() const { return !expr.empty(); }
  double at(State x) const;
};

struct ExplicitRow {
  State x = 0;
  double down = 0.0;
  std::vector<UpJump> up;
  /// Optional absolute-target rates Q(x, y); lets a file express any entry.
  std::vector<std::pair<State, double>> rates;
};

struct ModelFile {
  enum class Kind { BirthDeath, Explicit };

  Kind kind = Kind::BirthDeath;
  int horizon = 0;
  RateSeries birth;  // BirthDeath only
  RateSeries death;
  std::vector<ExplicitRow> rows;  // Explicit only, ascending x
};

/// Parses a model document. Errors are ParseError naming the field path,
/// e.g. "explicit.rows[2].down".
ModelFile parse_model(std::string_view text);
ModelFile load_model(const std::filesystem::path& path);

/// Canonical JSON emission; parse_model(emit_model(m)) re-emits byte-identically.
std::string emit_model(const ModelFile& model);

RawRateTable to_rate_table(const ModelFile& model);
std::optional<BirthDeathSpec> to_birth_death_spec(const ModelFile& model);

/// Expands the rates and runs validate_generator / build_birth_death.
SkipFreeGenerator to_generator(const ModelFile& model);

}  // namespace skipfree
