#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  Run r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string model(const char* name) { return std::string(MODELS_DIR) + "/" + name; }

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "skipfree_cli_test";
  fs::create_directories(dir);
  return dir;
}

fs::path write(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string without_wall_time(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line))
    if (line.find("\"wall_time_s\"") == std::string::npos) out += line + "\n";
  return out;
}

}  // namespace

TEST_CASE("validate") {
  const Run ok = run("validate " + model("chainA.json"));
  REQUIRE(ok.code == 0);
  const json j = json::parse(ok.out);
  CHECK(j["result"]["horizon"] == 800);
  CHECK(j["result"]["down_rate_range"][0] == 2.0);
  CHECK(j["manifest"]["command"] == "validate");
  CHECK(j["manifest"]["tool_version"].is_string());

  const auto bad = write("nonskipfree.json", R"({"kind":"explicit","horizon":3,"explicit":{"rows":[
    {"x":1,"down":1},{"x":2,"down":1},{"x":3,"down":1,"rates":{"1":0.5}}]}})");
  const Run r = run("validate " + bad.string());
  CHECK(r.code == 1);
  CHECK(r.out.find("NonSkipFree") != std::string::npos);
  CHECK(r.out.find("3") != std::string::npos);

  const auto missing = write("missing.json", R"({"kind":"birth_death","horizon":3,"birth_death":{"birth":"const:1"}})");
  const Run m = run("validate " + missing.string());
  CHECK(m.code == 1);
  CHECK(m.out.find("birth_death.death") != std::string::npos);

  CHECK(run("validate " + model("skip2.json")).code == 0);
}

TEST_CASE("scale") {
  const Run r = run("scale " + model("chainA.json") + " --q 0 --horizon 5");
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("# {", 0) == 0);
  CHECK(r.out.find("\nx,y,q,w\n") != std::string::npos);
  CHECK(r.out.find("\n0,5,0,0.96875\n") != std::string::npos);

  const Run one = run("scale " + model("chainA.json") + " --horizon 1");
  REQUIRE(one.code == 0);
  CHECK(one.out.substr(one.out.find("x,y,q,w\n")) == "x,y,q,w\n0,1,0,0.5\n");

  const Run neg = run("scale " + model("chainA.json") + " --q -0.05 --horizon 200");
  REQUIRE(neg.code == 0);
  std::istringstream in(neg.out);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.rfind("0,", 0) != 0) continue;
    ++rows;
    CHECK(std::stod(line.substr(line.rfind(',') + 1)) > 0.0);
  }
  CHECK(rows == 200);
}

TEST_CASE("boundary") {
  const Run a = run("boundary " + model("chainA.json"));
  REQUIRE(a.code == 0);
  CHECK(json::parse(a.out)["result"]["verdict"] == "Natural");
  const Run b = run("boundary " + model("chainB.json") + " --horizon-schedule 100,200,400");
  REQUIRE(b.code == 0);
  const json jb = json::parse(b.out)["result"];
  CHECK(jb["verdict"] == "Entrance");
  CHECK(jb["numeric_verdict"] == "Entrance");
  CHECK(jb["analytic_override"] == "Entrance");
}

TEST_CASE("lambda0") {
  const Run r = run("lambda0 " + model("chainA.json") + " --horizon-schedule 100,200,400");
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["result"]["value"].get<double>() == doctest::Approx(0.1716).epsilon(1e-3));
  CHECK(j["result"]["bracket_width"].get<double>() <= 1e-4);
  CHECK(j["result"].contains("eigen_discrepancy"));
  CHECK(j["manifest"]["params"]["horizon_schedule"] == json::array({100, 200, 400}));

  CHECK(run("lambda0 " + model("chainA.json") + " --horizon-schedule 200,100").code == 1);
  CHECK(run("lambda0 " + model("chainA.json") + " --horizon-schedule 1").code == 2);
}

TEST_CASE("qsd") {
  const fs::path weights = scratch() / "weights.csv";
  const Run r = run("qsd " + model("chainB.json") + " --lambda auto --weights-out " + weights.string());
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out)["result"];
  CHECK(j["verdict"] == "Unique");
  CHECK(j["qsd"]["mass"].get<double>() >= 0.999);
  const std::string csv = slurp(weights);
  CHECK(csv.rfind("x,nu\n1,", 0) == 0);

  const Run a = run("qsd " + model("chainA.json") + " --horizon-schedule 100,200,400");
  REQUIRE(a.code == 0);
  const json ja = json::parse(a.out)["result"];
  CHECK(ja["verdict"] == "Family");
  CHECK(ja["lambda"].get<double>() < ja["lambda0"]["value"].get<double>());
  CHECK(ja["qsd"]["weights"].size() == 400);

  // Above lambda0 the weights go negative: a numeric failure.
  CHECK(run("qsd " + model("chainA.json") + " --horizon-schedule 100,200,400 --lambda 0.5").code == 2);
  CHECK(run("qsd " + model("chainA.json") + " --lambda nope").code == 1);
}

TEST_CASE("simulate is byte-stable") {
  const std::string args = "simulate " + model("chainA.json") + " --x0 2 --reps 5000 --seed 3 --t-checks 1,2";
  const Run a = run(args + " --threads 1");
  const Run b = run(args + " --threads 4");
  REQUIRE(a.code == 0);
  CHECK(without_wall_time(a.out) == without_wall_time(b.out));
  const json j = json::parse(a.out)["result"];
  CHECK(j["absorbed"] == 5000);
  CHECK(j["conditioned_law"].size() == 2);

  const Run c = run(args + " --seed 4");
  CHECK(without_wall_time(a.out) != without_wall_time(c.out));
}

TEST_CASE("seed from the environment") {
  const std::string args = "simulate " + model("chainA.json") + " --reps 2000";
  const std::string cmd = "SKIPFREE_SEED=9 " + std::string(CLI_PATH) + " " + args;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  pclose(pipe);
  CHECK(json::parse(out)["manifest"]["params"]["seed"] == 9);
  CHECK(without_wall_time(out) == without_wall_time(run(args + " --seed 9").out));
}

TEST_CASE("verify on chain A") {
  const Run r = run("verify " + model("chainA.json") + " --reps 100000 --seed 7");
  CHECK(r.code == 0);
  const json j = json::parse(r.out)["result"];
  CHECK(j["all_pass"] == true);
  std::set<std::string> kinds;
  for (const auto& row : j["checks"]) kinds.insert(row["check"].get<std::string>());
  for (const char* k : {"resolvent", "scale_vs_dense", "exit_probability", "potential_density", "halfline_occupation",
                        "lambda0", "mass_identity"})
    CHECK(kinds.count(k) == 1);
}

TEST_CASE("help documents units and exit codes") {
  const Run r = run("--help");
  CHECK(r.code == 0);
  for (const char* s : {"events per unit time", "probability mass", "x,y,q,w", "Exit codes"})
    CHECK(r.out.find(s) != std::string::npos);
  CHECK(run("").code == 1);
  CHECK(run("validate /nonexistent.json").code == 1);
}
