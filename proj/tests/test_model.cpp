#include <doctest.h>

#include <cmath>
#include <random>

#include "corpus.hpp"
#include "skipfree/error.hpp"
#include "skipfree/model.hpp"
#include "skipfree/model_io.hpp"

using namespace skipfree;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::ParseError;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

RawRateTable mm1(int N) {
  RawRateTable raw;
  raw.horizon = N;
  for (State x = 1; x <= N; ++x) {
    raw.set(x, x - 1, 2.0);
    raw.set(x, x + 1, 1.0);
  }
  return raw;
}

}  // namespace

TEST_CASE("M/M/1 table validates with total rate 3") {
  const auto gen = validate_generator(mm1(10));
  CHECK(gen.horizon() == 10);
  CHECK(gen.band() == 1);
  for (State x = 1; x <= 10; ++x) {
    CHECK(gen.total_rate(x) == 3.0);
    CHECK(gen.rate(x, x) == -3.0);
    CHECK(gen.rate(x, x - 1) == 2.0);
    CHECK(gen.rate(x, x + 1) == 1.0);
  }
  CHECK(gen.rate(0, 1) == 0.0);
  CHECK(gen.rate(0, 0) == 0.0);
}

TEST_CASE("structural violations") {
  auto raw = mm1(5);
  raw.set(3, 1, 0.5);
  CHECK(code_of([&] { validate_generator(raw); }) == ErrorCode::NonSkipFree);

  raw = mm1(5);
  raw.set(2, 1, 0.0);
  CHECK(code_of([&] { validate_generator(raw); }) == ErrorCode::ZeroDownRate);

  raw = mm1(5);
  raw.set(2, 4, -1.0);
  CHECK(code_of([&] { validate_generator(raw); }) == ErrorCode::NegativeRate);

  raw = mm1(5);
  raw.set(0, 1, 1.0);
  CHECK(code_of([&] { validate_generator(raw); }) == ErrorCode::TrapViolation);
}

TEST_CASE("birth-death construction") {
  const auto a = testing::chain_a(20);
  for (State x = 1; x <= 20; ++x) {
    CHECK(a.down_rate(x) == 2.0);
    REQUIRE(a.up_rates(x).size() == 1);
    CHECK(a.up_rates(x)[0].size == 1);
    CHECK(a.total_rate(x) == 3.0);
  }
  const auto b = testing::chain_b(20);
  CHECK(b.down_rate(3) == 9.0);
  REQUIRE(b.up_rates(3).size() == 1);
  CHECK(b.up_rates(3)[0].size == 1);
  CHECK(b.up_rates(3)[0].rate == 1.0);

  const auto broken = make_birth_death(5, [](State x) { return x == 3 ? 0.0 : 1.0; }, [](State) { return 1.0; });
  CHECK_THROWS_AS(build_birth_death(broken), Error);
}

TEST_CASE("closed form of chain A") {
  const auto cf = bd_closed_form(make_birth_death(30, [](State) { return 1.0; }, [](State) { return 2.0; }));
  CHECK(cf.speed[1] == 1.0);
  CHECK(cf.scale_s[0] == 0.0);
  CHECK(cf.scale_s[1] == doctest::Approx(0.5));
  CHECK(cf.scale_s[2] == doctest::Approx(1.5));
  CHECK(cf.scale_at_zero(1) == doctest::Approx(0.5));
  CHECK(cf.scale_at_zero(2) == doctest::Approx(0.75));
  CHECK(cf.scale_at_zero(3) == doctest::Approx(0.875));
  for (State x = 1; x <= 30; ++x) {
    CHECK(cf.speed[x] == doctest::Approx(std::ldexp(1.0, 1 - x)));
    CHECK(cf.scale_at_zero(x) == doctest::Approx(1.0 - std::ldexp(1.0, -x)).epsilon(1e-14));
  }
}

TEST_CASE("closed form of chain B approaches 1/x^2") {
  const auto cf = bd_closed_form(make_birth_death(50, [](State) { return 1.0; }, [](State x) { return double(x) * x; }));
  double fact = 1.0;
  for (State x = 1; x <= 12; ++x) {
    fact *= x;
    CHECK(cf.speed[x] == doctest::Approx(1.0 / (fact * fact)));
  }
  CHECK(cf.scale_at_zero(50) * 2500.0 == doctest::Approx(1.0).epsilon(0.05));
  for (State x = 2; x <= 50; ++x) CHECK(cf.scale_s[x] > cf.scale_s[x - 1]);
}

TEST_CASE("restriction keeps rows and rates") {
  std::mt19937_64 rng(3);
  const auto gen = testing::random_generator(rng);
  const auto r = gen.restricted(4);
  CHECK(r.horizon() == 4);
  for (State x = 1; x <= 4; ++x) {
    CHECK(r.total_rate(x) == gen.total_rate(x));
    CHECK(r.down_rate(x) == gen.down_rate(x));
  }
  CHECK_THROWS_AS((void)r.down_rate(5), Error);
}

TEST_CASE("row sums vanish on the random corpus") {
  for (const auto& gen : testing::corpus(20, 11)) {
    for (State x = 1; x <= gen.horizon(); ++x) {
      double s = gen.down_rate(x);
      for (const auto& j : gen.up_rates(x)) s += j.rate;
      CHECK(s == doctest::Approx(gen.total_rate(x)).epsilon(1e-15));
    }
  }
}

TEST_CASE("model files") {
  const std::string text = R"({
  "kind": "birth_death",
  "horizon": 5,
  "birth_death": {
    "birth": "const:1",
    "death": [
      1.0,
      4.0,
      9.0,
      16.0,
      25.0
    ]
  }
}
)";

  SUBCASE("round trip is byte-identical") {
    const ModelFile m = parse_model(text);
    CHECK(emit_model(m) == text);
    CHECK(emit_model(parse_model(emit_model(m))) == text);
    const auto gen = to_generator(m);
    CHECK(gen.down_rate(4) == 16.0);
    CHECK(gen.total_rate(5) == 26.0);
  }

  SUBCASE("explicit rows round trip") {
    const std::string ex = R"({"kind":"explicit","horizon":3,"explicit":{"rows":[
      {"x":1,"down":2.0,"up":{"2":0.5}},{"x":2,"down":1.0},{"x":3,"down":3.0,"up":{"1":1.0}}]}})";
    const ModelFile m = parse_model(ex);
    const std::string canon = emit_model(m);
    CHECK(emit_model(parse_model(canon)) == canon);
    const auto gen = to_generator(m);
    CHECK(gen.band() == 2);
    CHECK(gen.rate(1, 3) == 0.5);
    CHECK(gen.rate(3, 4) == 1.0);
  }

  SUBCASE("family expressions") {
    RateSeries s;
    s.expr = "linear:1,0.5";
    CHECK(s.at(4) == 3.0);
    s.expr = "square";
    CHECK(s.at(7) == 49.0);
  }

  SUBCASE("missing death names the field") {
    const auto msg = message_of([] {
      parse_model(R"({"kind":"birth_death","horizon":3,"birth_death":{"birth":"const:1"}})");
    });
    CHECK(msg.find("birth_death.death") != std::string::npos);
  }

  SUBCASE("short array names the field") {
    const auto msg = message_of([] {
      parse_model(R"({"kind":"birth_death","horizon":3,"birth_death":{"birth":"const:1","death":[1,2]}})");
    });
    CHECK(msg.find("birth_death.death") != std::string::npos);
  }

  SUBCASE("bad row field names the row") {
    const auto msg = message_of([] {
      parse_model(R"({"kind":"explicit","horizon":2,"explicit":{"rows":[{"x":1,"down":1},{"x":2,"down":"a"}]}})");
    });
    CHECK(msg.find("explicit.rows[1].down") != std::string::npos);
  }

  SUBCASE("skip-free violation from a file") {
    const ModelFile m = parse_model(
        R"({"kind":"explicit","horizon":3,"explicit":{"rows":[{"x":1,"down":1},{"x":2,"down":1},{"x":3,"down":1,"rates":{"1":0.5}}]}})");
    CHECK(code_of([&] { to_generator(m); }) == ErrorCode::NonSkipFree);
  }

  SUBCASE("unknown family") {
    CHECK(code_of([] {
            parse_model(R"({"kind":"birth_death","horizon":3,"birth_death":{"birth":"cubic","death":"square"}})");
          }) == ErrorCode::ParseError);
  }
}

TEST_CASE("error classes") {
  CHECK(is_validation_error(ErrorCode::ParseError));
  CHECK(is_validation_error(ErrorCode::NonSkipFree));
  CHECK_FALSE(is_validation_error(ErrorCode::BracketFailure));
  CHECK_FALSE(is_validation_error(ErrorCode::ScaleOverflow));
  CHECK(to_string(ErrorCode::NegativeWeight) == "NegativeWeight");
}
