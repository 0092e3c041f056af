#pragma once

#include <map>
#include <utility>
#include <vector>

namespace skipfree {

/// A state of the chain. State 0 is the trap.
using State = int;

/// One upward jump out of a state: target offset j >= 1 and its rate.
struct UpJump {
  int size;
  double rate;
};

/// Off-diagonal rates Q(x, y), x in 1..horizon, as read from a file or
/// assembled by hand. Diagonal entries are ignored; they are reconstructed.
struct RawRateTable {
  int horizon = 0;
  std::map<std::pair<State, State>, double> rates;

  void set(State from, State to, double rate) { rates[{from, to}] = rate; }
};

/// Validated generator of a downward skip-free chain absorbed at 0.
///
/// Rows 1..horizon are stored. Upward jumps may target states beyond the
/// horizon; they are kept and counted in total_rate(x), so every quantity
/// that only reads rows below some level is exact for the infinite chain.
/// Immutable after construction.
class SkipFreeGenerator {
 public:
  int horizon() const { return horizon_; }

  double down_rate(State x) const { return rows_[check(x)].down; }
  const std::vector<UpJump>& up_rates(State x) const { return rows_[check(x)].up; }
  double total_rate(State x) const { return rows_[check(x)].total; }

  /// Q(x, y) including the diagonal; 0 for x == 0.
  double rate(State x, State y) const;

  /// Largest row size j over all stored up jumps (0 for a pure-death chain).
  int band() const { return band_; }
  double max_total_rate() const { return max_total_; }
  double min_total_rate(int up_to) const;

  /// Same rates, rows 1..new_horizon only.
  SkipFreeGenerator restricted(int new_horizon) const;

 private:
  friend SkipFreeGenerator validate_generator(const RawRateTable& raw);

  struct Row {
    double down = 0.0;
    std::vector<UpJump> up;
    double total = 0.0;
  };

  std::size_t check(State x) const;

  int horizon_ = 0;
  int band_ = 0;
  double max_total_ = 0.0;
  std::vector<Row> rows_;  // index 0 unused
};

/// Checks skip-free structure, trap at 0, signs, positive down rates, and
/// rebuilds the diagonal. Throws Error on violation.
SkipFreeGenerator validate_generator(const RawRateTable& raw);

/// Birth-death rates lambda(x), mu(x) for x = 1..horizon (index x-1).
struct BirthDeathSpec {
  std::vector<double> birth;
  std::vector<double> death;
  int horizon = 0;

  double lambda(State x) const { return birth.at(static_cast<std::size_t>(x - 1)); }
  double mu(State x) const { return death.at(static_cast<std::size_t>(x - 1)); }
};

/// Convenience constructor from rate functions evaluated at x = 1..horizon.
template <class Birth, class Death>
BirthDeathSpec make_birth_death(int horizon, Birth birth, Death death) {
  BirthDeathSpec spec;
  spec.horizon = horizon;
  for (State x = 1; x <= horizon; ++x) {
    spec.birth.push_back(static_cast<double>(birth(x)));
    spec.death.push_back(static_cast<double>(death(x)));
  }
  return spec;
}

void validate_birth_death(const BirthDeathSpec& spec);

SkipFreeGenerator build_birth_death(const BirthDeathSpec& spec);

/// Feller speed measure pi and scale s of a birth-death chain, indexed by
/// state (speed[0] is unused and left at 0, scale_s[0] = 0).
struct BdClosedForm {
  std::vector<double> speed;
  std::vector<double> scale_s;

  /// s(x) pi(x), which equals the 0-scale function W(0, x).
  double scale_at_zero(State x) const {
    return scale_s.at(static_cast<std::size_t>(x)) * speed.at(static_cast<std::size_t>(x));
  }
};

BdClosedForm bd_closed_form(const BirthDeathSpec& spec);

}  // namespace skipfree
