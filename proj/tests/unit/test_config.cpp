#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "galforge/config.hpp"

using namespace galforge;

namespace {

std::filesystem::path write_temp_config(const std::string& name, const std::string& body) {
  const std::filesystem::path path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_SUITE_BEGIN("config");

TEST_CASE("defaults cover the documented keys") {
  const Config config = Config::defaults();
  CHECK(config.get("run.mode") == "joint");
  CHECK(config.get_size("run.cycles") == 10);
  CHECK(config.get_size("al.b") == 50);
  CHECK(config.get("al.sigma") == "entropy");
  CHECK(config.get("gal.b_rule") == "equal_l");
  CHECK(config.get_size("opt.k") == 6);
  CHECK(config.get_size("opt.steps") == 10);
  CHECK(config.get_double("opt.alpha_ratio") == 0.2);
  CHECK(config.get_double("opt.epsilon_max") == 0.5);
  CHECK(config.get_double("opt.epsilon_fixed") == -1.0);
  CHECK(config.get_size("generator.T") == 50);
  CHECK(config.get_size("classifier.epochs") == 200);
  CHECK(config.get("classifier.arch") == "mlp-64x64");
  CHECK(config.get_bool("opt.chain_factor"));
  CHECK_FALSE(config.get_bool("run.emit_wall_ms"));
  CHECK(config.get_u64_list("run.seeds") == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
}

TEST_CASE("unknown keys are rejected everywhere") {
  Config config = Config::defaults();
  CHECK_THROWS_AS(config.set("nope.key", "1"), std::invalid_argument);
  CHECK_THROWS_AS(config.get("nope.key"), std::invalid_argument);
  CHECK_THROWS_AS(config.set_override("nope.key=1"), std::invalid_argument);
  CHECK(config.known("run.mode"));
  CHECK_FALSE(config.known("run.modes"));
}

TEST_CASE("set_override requires key=value") {
  Config config = Config::defaults();
  CHECK_THROWS_AS(config.set_override("run.mode"), std::invalid_argument);
  config.set_override("run.mode=al");
  CHECK(config.get("run.mode") == "al");
}

TEST_CASE("typed getters validate their input") {
  Config config = Config::defaults();
  config.set("run.cycles", "abc");
  CHECK_THROWS_AS(config.get_size("run.cycles"), std::invalid_argument);
  config.set("opt.epsilon_max", "not_a_number");
  CHECK_THROWS_AS(config.get_double("opt.epsilon_max"), std::invalid_argument);
  config.set("opt.chain_factor", "maybe");
  CHECK_THROWS_AS(config.get_bool("opt.chain_factor"), std::invalid_argument);
  config.set("opt.chain_factor", "false");
  CHECK_FALSE(config.get_bool("opt.chain_factor"));
}

TEST_CASE("seed lists accept commas and spaces") {
  Config config = Config::defaults();
  config.set("run.seeds", "3,1,2");
  CHECK(config.get_u64_list("run.seeds") == std::vector<std::uint64_t>{3, 1, 2});
  config.set("run.seeds", "4 5 6");
  CHECK(config.get_u64_list("run.seeds") == std::vector<std::uint64_t>{4, 5, 6});
  config.set("run.seeds", "");
  CHECK_THROWS_AS(config.get_u64_list("run.seeds"), std::invalid_argument);
}

TEST_CASE("config files load with comments and precedence") {
  const auto path = write_temp_config("galforge_test_config.cfg",
                                      "# experiment\n"
                                      "run.mode = al\n"
                                      "al.b = 25\n"
                                      "\n"
                                      "al.sigma = margin\n");
  Config config = Config::defaults();
  config.load_file(path);
  std::filesystem::remove(path);
  CHECK(config.get("run.mode") == "al");
  CHECK(config.get_size("al.b") == 25);
  CHECK(config.get("al.sigma") == "margin");
  // later sources override earlier ones
  config.set_override("al.b=30");
  CHECK(config.get_size("al.b") == 30);
}

TEST_CASE("malformed config lines are rejected with the line number") {
  const auto path =
      write_temp_config("galforge_test_config_bad.cfg", "run.mode = al\nthis line is bad\n");
  Config config = Config::defaults();
  try {
    config.load_file(path);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("explicitly_set tracks only touched keys") {
  Config config = Config::defaults();
  CHECK_FALSE(config.explicitly_set("world.classes"));
  config.set("world.classes", "7");
  CHECK(config.explicitly_set("world.classes"));
  CHECK_FALSE(config.explicitly_set("world.dim"));
}

TEST_CASE("echo emits sorted key = value lines including every key") {
  const Config config = Config::defaults();
  const std::string echo = config.echo();
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < echo.size()) {
    const std::size_t end = echo.find('\n', start);
    lines.push_back(echo.substr(start, end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  CHECK(lines.size() >= 30);
  for (std::size_t i = 1; i < lines.size(); ++i) CHECK(lines[i - 1] < lines[i]);
  CHECK(echo.find("run.mode = joint") != std::string::npos);
  CHECK(echo.find("opt.epsilon_fixed = -1") != std::string::npos);
}

TEST_CASE("missing config file fails") {
  Config config = Config::defaults();
  CHECK_THROWS(config.load_file("/nonexistent/galforge.cfg"));
}

TEST_SUITE_END();
