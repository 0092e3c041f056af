#include "skipfree/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "skipfree/error.hpp"

namespace skipfree {

namespace {

std::string row_context(State x, State y) {
  std::ostringstream os;
  os << "row x=" << x << ", target y=" << y;
  return os.str();
}

}  // namespace

std::size_t SkipFreeGenerator::check(State x) const {
  if (x < 1 || x > horizon_) {
    std::ostringstream os;
    os << "state " << x << " outside stored rows 1.." << horizon_;
    throw Error(ErrorCode::HorizonExceeded, os.str());
  }
  return static_cast<std::size_t>(x);
}

double SkipFreeGenerator::rate(State x, State y) const {
  if (x == 0) return 0.0;
  const Row& row = rows_[check(x)];
  if (y == x - 1) return row.down;
  if (y == x) return -row.total;
  if (y > x) {
    for (const UpJump& j : row.up)
      if (x + j.size == y) return j.rate;
  }
  return 0.0;
}

double SkipFreeGenerator::min_total_rate(int up_to) const {
  double m = std::numeric_limits<double>::infinity();
  for (State x = 1; x <= std::min(up_to, horizon_); ++x) m = std::min(m, rows_[x].total);
  return m;
}

SkipFreeGenerator SkipFreeGenerator::restricted(int new_horizon) const {
  if (new_horizon < 1 || new_horizon > horizon_)
    throw Error(ErrorCode::HorizonExceeded, "restriction horizon out of range");
  SkipFreeGenerator out;
  out.horizon_ = new_horizon;
  out.rows_.assign(rows_.begin(), rows_.begin() + new_horizon + 1);
  for (State x = 1; x <= new_horizon; ++x) {
    out.max_total_ = std::max(out.max_total_, out.rows_[x].total);
    for (const UpJump& j : out.rows_[x].up) out.band_ = std::max(out.band_, j.size);
  }
  return out;
}

SkipFreeGenerator validate_generator(const RawRateTable& raw) {
  if (raw.horizon < 1) throw Error(ErrorCode::ParseError, "horizon must be >= 1");

  SkipFreeGenerator gen;
  gen.horizon_ = raw.horizon;
  gen.rows_.resize(static_cast<std::size_t>(raw.horizon) + 1);

  for (const auto& [key, rate] : raw.rates) {
    const auto [x, y] = key;
    if (x == y) continue;  // diagonal is rebuilt
    if (!std::isfinite(rate)) throw Error(ErrorCode::NegativeRate, "non-finite rate at " + row_context(x, y));
    if (rate < 0.0) throw Error(ErrorCode::NegativeRate, row_context(x, y));
    if (rate == 0.0) continue;
    if (x == 0) throw Error(ErrorCode::TrapViolation, "state 0 must be absorbing: " + row_context(x, y));
    if (x < 0 || y < 0) throw Error(ErrorCode::ParseError, "negative state at " + row_context(x, y));
    if (x > raw.horizon)
      throw Error(ErrorCode::HorizonExceeded, row_context(x, y) + " beyond horizon");
    if (y <= x - 2) throw Error(ErrorCode::NonSkipFree, "downward jump of size >= 2 at " + row_context(x, y));
    auto& row = gen.rows_[static_cast<std::size_t>(x)];
    if (y == x - 1) {
      row.down = rate;
    } else {
      row.up.push_back({y - x, rate});  // map order: ascending y, hence ascending j
    }
  }

  for (State x = 1; x <= raw.horizon; ++x) {
    auto& row = gen.rows_[static_cast<std::size_t>(x)];
    if (!(row.down > 0.0)) {
      std::ostringstream os;
      os << "Q(" << x << "," << x - 1 << ") must be positive";
      throw Error(ErrorCode::ZeroDownRate, os.str());
    }
    double total = row.down;
    for (const UpJump& j : row.up) {
      total += j.rate;
      gen.band_ = std::max(gen.band_, j.size);
    }
    row.total = total;
    gen.max_total_ = std::max(gen.max_total_, total);
  }
  return gen;
}

void validate_birth_death(const BirthDeathSpec& spec) {
  const auto n = static_cast<std::size_t>(spec.horizon);
  if (spec.horizon < 1) throw Error(ErrorCode::ParseError, "birth-death horizon must be >= 1");
  if (spec.birth.size() < n || spec.death.size() < n)
    throw Error(ErrorCode::ParseError, "birth/death arrays shorter than horizon");
  for (State x = 1; x <= spec.horizon; ++x) {
    if (!std::isfinite(spec.lambda(x)) || spec.lambda(x) < 0.0)
      throw Error(ErrorCode::NegativeRate, "birth rate at x=" + std::to_string(x));
    if (!(spec.mu(x) > 0.0))
      throw Error(ErrorCode::ZeroDownRate, "death rate at x=" + std::to_string(x) + " must be positive");
    if (x < spec.horizon && !(spec.lambda(x) > 0.0))
      throw Error(ErrorCode::ParameterViolation,
                  "birth rate at interior x=" + std::to_string(x) + " must be positive (irreducibility)");
  }
}

SkipFreeGenerator build_birth_death(const BirthDeathSpec& spec) {
  validate_birth_death(spec);
  RawRateTable raw;
  raw.horizon = spec.horizon;
  for (State x = 1; x <= spec.horizon; ++x) {
    raw.set(x, x - 1, spec.mu(x));
    if (spec.lambda(x) > 0.0) raw.set(x, x + 1, spec.lambda(x));
  }
  return validate_generator(raw);
}

BdClosedForm bd_closed_form(const BirthDeathSpec& spec) {
  validate_birth_death(spec);
  const auto n = static_cast<std::size_t>(spec.horizon);
  BdClosedForm out;
  out.speed.assign(n + 1, 0.0);
  out.scale_s.assign(n + 1, 0.0);
  out.speed[1] = 1.0;
  for (State x = 2; x <= spec.horizon; ++x)
    out.speed[x] = out.speed[x - 1] * spec.lambda(x - 1) / spec.mu(x);
  double s = 1.0 / spec.mu(1);
  out.scale_s[1] = s;
  for (State x = 2; x <= spec.horizon; ++x) {
    s += 1.0 / (out.speed[x - 1] * spec.lambda(x - 1));
    out.scale_s[x] = s;
  }
  return out;
}

}  // namespace skipfree
