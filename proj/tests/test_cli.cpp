#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dirac_darboux/cli.hpp"

using namespace dirac_darboux;
using namespace dirac_darboux::cli;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(DD_CLI_PATH) + " " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (size_t n = fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string preset(const std::string& name) { return std::string(DD_PRESETS_DIR) + "/" + name; }

fs::path scratch(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("dd_cli_" + std::to_string(getpid()) + "_" + tag);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_config(const std::string& tag, const json& j) {
  const fs::path p = scratch(tag) / "config.json";
  std::ofstream(p) << j.dump();
  return p;
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  return json::parse(in);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Table parse_csv(const std::string& text) {
  Table t;
  std::stringstream ss(text);
  std::string line;
  if (std::getline(ss, line)) t.header = split(line);
  while (std::getline(ss, line))
    if (!line.empty()) t.rows.push_back(split(line));
  return t;
}

}  // namespace

TEST_CASE("parse_config accepts the presets") {
  for (const char* name : {"fig1.json", "fig2.json", "fig1_im_a.json", "fig3.json", "fig4.json", "soc.json"}) {
    CAPTURE(name);
    CHECK_NOTHROW(load_config(preset(name)));
  }
  const ModelConfig c = load_config(preset("soc.json"));
  CHECK(c.kind == ModelKind::spin_orbit);
  CHECK(c.lambda_mode == "equal_to_v1_tilde");
  CHECK(c.grid_n == 6001);
}

TEST_CASE("parse_config rejects malformed input") {
  auto kind_of = [](const json& j) {
    try {
      parse_config(j);
    } catch (const Error& e) {
      return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::invalid_input;
  };
  json base = load_json(preset("fig1.json"));
  json unknown = base;
  unknown["colour"] = 1;
  CHECK(kind_of(unknown) == ErrorKind::invalid_input);
  json missing = base;
  missing.erase("eps2");
  CHECK(kind_of(missing) == ErrorKind::invalid_input);
  json text = base;
  text["v"] = "minus two";
  CHECK(kind_of(text) == ErrorKind::invalid_input);
  json bad_grid = base;
  bad_grid["grid"] = {{"x_min", -1}, {"x_max", 1}, {"n_points", 2.5}};
  CHECK(kind_of(bad_grid) == ErrorKind::invalid_input);
  json bad_tol = base;
  bad_tol["tolerances"] = {{"oracle", -1}};
  CHECK(kind_of(bad_tol) == ErrorKind::invalid_input);
  CHECK(kind_of(json{{"model", "quartic"}}) == ErrorKind::invalid_input);
  CHECK(kind_of(json{{"model", "spin_orbit"}, {"v1", 1}, {"eps1", 0.6}}) == ErrorKind::invalid_input);
}

TEST_CASE("parse_config reads grid and tolerances") {
  json j = load_json(preset("fig1.json"));
  j["grid"] = {{"x_min", -10}, {"x_max", 10}, {"n_points", 201}};
  j["tolerances"] = {{"oracle", 1e-6}};
  const ModelConfig c = parse_config(j);
  CHECK(c.grid_n == 201);
  CHECK(c.grid_x_min == -10.0);
  CHECK(c.tol.oracle == 1e-6);
  CHECK(c.tol.intertwining == 1e-6);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, -1.0, 0.1, 1.0 / 3.0, 6.02e23, -2.5e-300}) CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("verify passes on every preset") {
  for (const char* name : {"fig1.json", "fig2.json", "fig1_im_a.json", "fig3.json", "fig4.json", "soc.json"}) {
    CAPTURE(name);
    const RunResult r = run("verify " + preset(name));
    CHECK(r.code == 0);
    CHECK(r.out.find("overall pass") != std::string::npos);
  }
}

TEST_CASE("verify fails when the potential is shifted by 0.1 sigma3") {
  for (const char* name : {"fig1.json", "fig3.json", "soc.json"}) {
    CAPTURE(name);
    json j = load_json(preset(name));
    j["potential_shift_sigma3"] = 0.1;
    const RunResult r = run("verify " + write_config(std::string("shift_") + name, j).string());
    CHECK(r.code == 1);
  }
}

TEST_CASE("verify --json emits a parsable report") {
  const RunResult r = run("verify --json " + preset("fig1.json"));
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["status"] == "pass");
  CHECK(j["checks"].size() > 3);
}

TEST_CASE("build outputs are byte-identical across runs") {
  for (const char* name : {"fig1.json", "fig3.json"}) {
    CAPTURE(name);
    const fs::path a = scratch(std::string("a_") + name), b = scratch(std::string("b_") + name);
    REQUIRE(run("build " + preset(name) + " --out " + a.string()).code == 0);
    REQUIRE(run("build " + preset(name) + " --out " + b.string()).code == 0);
    for (const char* file : {"potentials.csv", "bound_states.csv", "model.json"}) {
      CAPTURE(file);
      CHECK(slurp(a / file) == slurp(b / file));
      CHECK_FALSE(slurp(a / file).empty());
    }
  }
}

TEST_CASE("fig1 build: w tilde column is even and two states are listed") {
  const fs::path d = scratch("fig1_even");
  REQUIRE(run("build " + preset("fig1.json") + " --out " + d.string()).code == 0);
  const Table t = parse_csv(slurp(d / "potentials.csv"));
  const int col = t.column("Re_w_t");
  REQUIRE(col > 0);
  REQUIRE(t.rows.size() == 6001);
  for (size_t i = 0; i < t.rows.size(); i += 50)
    CHECK_THAT(std::stod(t.rows[i][col]), WithinAbs(std::stod(t.rows[t.rows.size() - 1 - i][col]), 1e-8));
  const json m = load_json((d / "model.json").string());
  CHECK(m["bound_states"].size() == 2);
}

TEST_CASE("fig3 build: four normalized density columns") {
  const fs::path d = scratch("fig3_density");
  REQUIRE(run("build " + preset("fig3.json") + " --out " + d.string()).code == 0);
  const Table t = parse_csv(slurp(d / "bound_states.csv"));
  REQUIRE(t.header.size() == 5);
  CHECK(t.header[0] == "x");
  const Grid g = Grid::standard();
  for (int c = 1; c <= 4; ++c) {
    std::vector<double> p;
    for (const auto& row : t.rows) p.push_back(std::stod(row[c]));
    CHECK_THAT(simpson<double>(p, g.step()), WithinAbs(1.0, 5e-6));
  }
}

TEST_CASE("degenerate seed energies give an empty bound-state file and a warning") {
  json j = load_json(preset("fig1.json"));
  j["eps2"] = -1;
  const fs::path cfg = write_config("degenerate", j);
  const fs::path d = scratch("degenerate_out");
  REQUIRE(run("build " + cfg.string() + " --out " + d.string()).code == 0);
  CHECK(slurp(d / "bound_states.csv").empty());
  CHECK_FALSE(load_json((d / "model.json").string())["warnings"].empty());
}

TEST_CASE("exit codes for input and numerical errors") {
  json unknown = load_json(preset("fig1.json"));
  unknown["colour"] = 1;
  CHECK(run("verify " + write_config("unknown", unknown).string()).code == 2);
  CHECK(run("verify /nonexistent/config.json").code == 2);
  CHECK(run("frobnicate").code == 2);
  json out_of_band = load_json(preset("fig1.json"));
  out_of_band["eps1"] = -3;
  CHECK(run("verify " + write_config("band", out_of_band).string()).code == 2);
  json node = load_json(preset("fig1.json"));
  node["eps1"] = 2;
  node["eps2"] = -1;
  CHECK(run("verify " + write_config("node", node).string()).code == 3);
}

TEST_CASE("scatter: free model is transparent") {
  const json j = {{"model", "free2x2"}, {"v", -2}, {"w", 5}};
  const RunResult r = run("scatter " + write_config("free", j).string() + " --energies -6,7");
  REQUIRE(r.code == 0);
  const Table t = parse_csv(r.out);
  REQUIRE(t.rows.size() == 2);
  for (const auto& row : t.rows) {
    CHECK(std::abs(std::stod(row[t.column("abs_R")])) < 1e-12);
    CHECK_THAT(std::stod(row[t.column("abs_T")]), WithinAbs(1.0, 1e-9));
    CHECK(row[t.column("status")] == "ok");
  }
}

TEST_CASE("scatter: transformed models are reflectionless and band energies are skipped") {
  const fs::path out = scratch("scatter") / "fig1.csv";
  REQUIRE(run("scatter " + preset("fig1.json") + " --energies 7,0.5 --out " + out.string()).code == 0);
  const Table t = parse_csv(slurp(out));
  REQUIRE(t.rows.size() == 2);
  CHECK(std::stod(t.rows[0][t.column("abs_R")]) < 1e-6);
  CHECK(t.rows[1][t.column("status")] == "skip");
  CHECK(t.rows[1][t.column("reason")] == "in band");
  const RunResult r3 = run("scatter " + preset("fig3.json") + " --energies -3");
  REQUIRE(r3.code == 0);
  const Table t3 = parse_csv(r3.out);
  CHECK(std::stod(t3.rows[0][t3.column("abs_R")]) < 1e-6);
  CHECK(run("scatter " + preset("fig1.json") + " --energies 7,abc").code == 2);
}
