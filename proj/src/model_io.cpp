#include "skipfree/model_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "skipfree/error.hpp"

namespace skipfree {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ParseError, path + ": " + what);
}

double parse_real(std::string_view s, const std::string& path) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) fail(path, "bad number '" + std::string(s) + "'");
  return v;
}

void check_expr(const std::string& expr, const std::string& path) {
  if (expr == "square") return;
  if (expr.rfind("const:", 0) == 0) {
    parse_real(std::string_view(expr).substr(6), path);
    return;
  }
  if (expr.rfind("linear:", 0) == 0) {
    const std::string_view body = std::string_view(expr).substr(7);
    const auto comma = body.find(',');
    if (comma == std::string_view::npos) fail(path, "linear family needs 'linear:a,b'");
    parse_real(body.substr(0, comma), path);
    parse_real(body.substr(comma + 1), path);
    return;
  }
  fail(path, "unknown rate family '" + expr + "'");
}

double number_field(const json& obj, const char* key, const std::string& path) {
  const std::string here = path + "." + key;
  if (!obj.contains(key)) fail(here, "missing field");
  const json& v = obj.at(key);
  if (!v.is_number()) fail(here, "expected a number");
  return v.get<double>();
}

RateSeries parse_series(const json& parent, const char* key, const std::string& path) {
  const std::string here = path + "." + key;
  if (!parent.contains(key)) fail(here, "missing field");
  const json& v = parent.at(key);
  RateSeries out;
  if (v.is_string()) {
    out.expr = v.get<std::string>();
    check_expr(out.expr, here);
  } else if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(here + "[" + std::to_string(i) + "]", "expected a number");
      out.values.push_back(v[i].get<double>());
    }
  } else {
    fail(here, "expected an array of rates or a family expression string");
  }
  return out;
}

int parse_positive_key(const std::string& key, const std::string& path) {
  int j = 0;
  auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), j);
  if (ec != std::errc() || ptr != key.data() + key.size() || j < 1)
    fail(path, "jump key '" + key + "' must be a positive integer");
  return j;
}

ExplicitRow parse_row(const json& r, const std::string& path) {
  if (!r.is_object()) fail(path, "expected an object");
  ExplicitRow row;
  if (!r.contains("x")) fail(path + ".x", "missing field");
  if (!r.at("x").is_number_integer()) fail(path + ".x", "expected an integer state");
  row.x = r.at("x").get<int>();
  row.down = number_field(r, "down", path);
  if (r.contains("up")) {
    const json& up = r.at("up");
    if (!up.is_object()) fail(path + ".up", "expected an object of jump size -> rate");
    for (const auto& [k, v] : up.items()) {
      const std::string here = path + ".up." + k;
      const int j = parse_positive_key(k, here);
      if (!v.is_number()) fail(here, "expected a number");
      row.up.push_back({j, v.get<double>()});
    }
    std::sort(row.up.begin(), row.up.end(), [](const UpJump& a, const UpJump& b) { return a.size < b.size; });
  }
  if (r.contains("rates")) {
    const json& rates = r.at("rates");
    if (!rates.is_object()) fail(path + ".rates", "expected an object of target -> rate");
    for (const auto& [k, v] : rates.items()) {
      const std::string here = path + ".rates." + k;
      int y = 0;
      auto [ptr, ec] = std::from_chars(k.data(), k.data() + k.size(), y);
      if (ec != std::errc() || ptr != k.data() + k.size() || y < 0) fail(here, "target must be a state index");
      if (!v.is_number()) fail(here, "expected a number");
      row.rates.emplace_back(y, v.get<double>());
    }
    std::sort(row.rates.begin(), row.rates.end());
  }
  return row;
}

void format_series_for_json(const RateSeries& s, ordered_json& out) {
  if (s.is_expr()) {
    out = s.expr;
  } else {
    out = ordered_json::array();
    for (double v : s.values) out.push_back(v);
  }
}

}  // namespace

double RateSeries::at(State x) const {
  if (!is_expr()) {
    if (x < 1 || static_cast<std::size_t>(x) > values.size())
      throw Error(ErrorCode::ParseError, "rate array has no entry for x=" + std::to_string(x));
    return values[static_cast<std::size_t>(x - 1)];
  }
  if (expr == "square") return static_cast<double>(x) * static_cast<double>(x);
  if (expr.rfind("const:", 0) == 0) return parse_real(std::string_view(expr).substr(6), "expr");
  const std::string_view body = std::string_view(expr).substr(7);
  const auto comma = body.find(',');
  const double a = parse_real(body.substr(0, comma), "expr");
  const double b = parse_real(body.substr(comma + 1), "expr");
  return a + b * static_cast<double>(x);
}

ModelFile parse_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("document", e.what());
  }
  if (!doc.is_object()) fail("document", "expected an object");

  ModelFile m;
  if (!doc.contains("kind") || !doc.at("kind").is_string()) fail("kind", "missing or not a string");
  const std::string kind = doc.at("kind").get<std::string>();
  if (!doc.contains("horizon") || !doc.at("horizon").is_number_integer()) fail("horizon", "missing or not an integer");
  m.horizon = doc.at("horizon").get<int>();
  if (m.horizon < 1) fail("horizon", "must be >= 1");

  if (kind == "birth_death") {
    m.kind = ModelFile::Kind::BirthDeath;
    if (!doc.contains("birth_death") || !doc.at("birth_death").is_object()) fail("birth_death", "missing section");
    const json& bd = doc.at("birth_death");
    m.birth = parse_series(bd, "birth", "birth_death");
    m.death = parse_series(bd, "death", "birth_death");
    for (const auto* s : {&m.birth, &m.death}) {
      if (!s->is_expr() && s->values.size() < static_cast<std::size_t>(m.horizon))
        fail(s == &m.birth ? "birth_death.birth" : "birth_death.death",
             "array has " + std::to_string(s->values.size()) + " entries, horizon is " + std::to_string(m.horizon));
    }
  } else if (kind == "explicit") {
    m.kind = ModelFile::Kind::Explicit;
    if (!doc.contains("explicit") || !doc.at("explicit").is_object()) fail("explicit", "missing section");
    const json& ex = doc.at("explicit");
    if (!ex.contains("rows") || !ex.at("rows").is_array()) fail("explicit.rows", "missing or not an array");
    const json& rows = ex.at("rows");
    for (std::size_t i = 0; i < rows.size(); ++i)
      m.rows.push_back(parse_row(rows[i], "explicit.rows[" + std::to_string(i) + "]"));
    std::stable_sort(m.rows.begin(), m.rows.end(), [](const ExplicitRow& a, const ExplicitRow& b) { return a.x < b.x; });
    for (std::size_t i = 1; i < m.rows.size(); ++i)
      if (m.rows[i].x == m.rows[i - 1].x) fail("explicit.rows", "duplicate row x=" + std::to_string(m.rows[i].x));
  } else {
    fail("kind", "expected \"birth_death\" or \"explicit\", got \"" + kind + "\"");
  }
  return m;
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

std::string emit_model(const ModelFile& model) {
  ordered_json doc;
  if (model.kind == ModelFile::Kind::BirthDeath) {
    doc["kind"] = "birth_death";
    doc["horizon"] = model.horizon;
    ordered_json birth, death;
    format_series_for_json(model.birth, birth);
    format_series_for_json(model.death, death);
    doc["birth_death"]["birth"] = birth;
    doc["birth_death"]["death"] = death;
  } else {
    doc["kind"] = "explicit";
    doc["horizon"] = model.horizon;
    ordered_json rows = ordered_json::array();
    for (const ExplicitRow& r : model.rows) {
      ordered_json row;
      row["x"] = r.x;
      row["down"] = r.down;
      ordered_json up = ordered_json::object();
      for (const UpJump& j : r.up) up[std::to_string(j.size)] = j.rate;
      row["up"] = up;
      if (!r.rates.empty()) {
        ordered_json rates = ordered_json::object();
        for (const auto& [y, v] : r.rates) rates[std::to_string(y)] = v;
        row["rates"] = rates;
      }
      rows.push_back(row);
    }
    doc["explicit"]["rows"] = rows;
  }
  return doc.dump(2) + "\n";
}

RawRateTable to_rate_table(const ModelFile& model) {
  RawRateTable raw;
  raw.horizon = model.horizon;
  if (model.kind == ModelFile::Kind::BirthDeath) {
    for (State x = 1; x <= model.horizon; ++x) {
      raw.set(x, x - 1, model.death.at(x));
      raw.set(x, x + 1, model.birth.at(x));
    }
    return raw;
  }
  for (const ExplicitRow& r : model.rows) {
    raw.set(r.x, r.x - 1, r.down);
    for (const UpJump& j : r.up) raw.set(r.x, r.x + j.size, j.rate);
    for (const auto& [y, v] : r.rates) raw.set(r.x, y, v);
  }
  return raw;
}

std::optional<BirthDeathSpec> to_birth_death_spec(const ModelFile& model) {
  if (model.kind != ModelFile::Kind::BirthDeath) return std::nullopt;
  return make_birth_death(
      model.horizon, [&](State x) { return model.birth.at(x); }, [&](State x) { return model.death.at(x); });
}

SkipFreeGenerator to_generator(const ModelFile& model) {
  if (auto bd = to_birth_death_spec(model)) return build_birth_death(*bd);
  return validate_generator(to_rate_table(model));
}

}  // namespace skipfree
