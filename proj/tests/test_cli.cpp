#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(CPBOUND_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string config(const char* name) { return std::string(CPBOUND_CONFIG_DIR) + "/" + name; }

std::string temp_config(const char* name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path.string();
}

}  // namespace

TEST_CASE("bound on the exponential config") {
  const Run r = cli("bound " + config("exponential.json"));
  REQUIRE(r.status == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["bound"]["total"].get<double>() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(j["seed"].get<std::uint64_t>() == 1);
}

TEST_CASE("simulate is byte-identical for a fixed seed") {
  const std::string args = "simulate " + config("hyperexponential.json") + " -s 42";
  const Run a = cli(args);
  const Run b = cli(args + " -j 1");
  REQUIRE(a.status == 0);
  REQUIRE(b.status == 0);
  CHECK(a.out == b.out);
  CHECK(nlohmann::json::parse(a.out)["seed"].get<std::uint64_t>() == 42);
}

TEST_CASE("output file and format options") {
  const auto path = std::filesystem::temp_directory_path() / "cpbound_cli_sweep.json";
  std::filesystem::remove(path);
  const Run r = cli("sweep " + config("hyperexponential.json") + " -f json -o " + path.string());
  REQUIRE(r.status == 0);
  CHECK(r.out.empty());
  std::ifstream in(path);
  const auto j = nlohmann::json::parse(in);
  CHECK(j.contains("rows"));
}

TEST_CASE("sweep csv minimum") {
  const Run r = cli("sweep " + config("hyperexponential.json"));
  REQUIRE(r.status == 0);
  std::istringstream in(r.out);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  REQUIRE(rows.size() == 4);
  const auto& header = rows.front();
  const auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };
  const std::size_t total = col("total"), gamma = col("gamma"), status = col("status");
  REQUIRE(total < header.size());
  double best = 1e300;
  std::string best_gamma;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][status] != "ok") continue;
    const double v = std::stod(rows[i][total]);
    if (v < best) best = v, best_gamma = rows[i][gamma];
  }
  CHECK(best_gamma == "1");
  CHECK(best == doctest::Approx(0.1215277777777779).epsilon(1e-12));
  CHECK(rows[1][status] == "Inapplicable");
}

TEST_CASE("exit statuses") {
  SUBCASE("unknown key") {
    const auto path = temp_config("cpbound_cli_unknown.json",
                                  R"({"model": {"type": "renewal", "interarrival": {"family": "exponential", "params": [1]}},
                                      "t": 1, "colour": "red"})");
    CHECK(cli("bound " + path).status == 2);
  }
  SUBCASE("malformed json") {
    const auto path = temp_config("cpbound_cli_bad.json", "{\"t\": ");
    CHECK(cli("bound " + path).status == 2);
  }
  SUBCASE("missing file") { CHECK(cli("bound /nonexistent/cpbound.json").status == 2); }
  SUBCASE("inapplicable") {
    const auto path = temp_config("cpbound_cli_uniform.json",
                                  R"({"model": {"type": "renewal", "interarrival": {"family": "uniform", "params": [0, 2]}},
                                      "gamma": 1, "t": 3})");
    const Run r = cli("bound " + path);
    CHECK(r.status == 1);
    CHECK(r.out.empty());
  }
  SUBCASE("sweep needs a sweep block") { CHECK(cli("sweep " + config("exponential.json")).status == 2); }
  SUBCASE("no subcommand") { CHECK(cli("").status == 2); }
}
