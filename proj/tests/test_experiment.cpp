#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "horolab/experiment.hpp"

using namespace horolab;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = HOROLAB_CONFIG_DIR;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("horolab-test-" + tag + "-" + std::to_string(std::random_device{}()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string config_error(const std::string& text) {
  TempDir dir("cfg");
  fs::copy(kConfigs / "groups", dir.path / "groups");
  fs::copy(kConfigs / "actions", dir.path / "actions");
  write(dir.path / "c.json", text);
  try {
    load_config(dir.path / "c.json");
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string("\"") + HOROLAB_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
#ifdef WEXITSTATUS
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
#else
  return status;
#endif
}

std::size_t file_count(const fs::path& dir) {
  if (!fs::exists(dir)) return 0;
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) ++n;
  return n;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("group and action loaders") {
  const auto f2 = load_group(kConfigs / "groups" / "f2.json");
  CHECK(f2.family() == Family::Free);
  CHECK(f2.rank() == 2);
  const auto z = load_group(kConfigs / "groups" / "z2z3_rules.json");
  CHECK(z.num_generators() == 3);
  CHECK(z.format(z.element("bb")) == "B");
  CHECK(validate_geodesics(z, 6).passed());

  const auto g = testing::free_group(2);
  const auto s3 = load_action(g, kConfigs / "actions" / "s3_regular.json");
  CHECK(s3.size() == 6);
  const auto inline_action =
      action_from_json(g, R"j({"m": 3, "generators": {"a": [1, 2, 0], "b": "(0 1)"}})j");
  CHECK(inline_action.perm(1) == inline_action.perm(0).inverse());
  CHECK(inline_action.perm(3) == inline_action.perm(2));

  try {
    load_action(g, kConfigs / "actions" / "nontransitive.json");
    FAIL("expected ActionInvalid");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ActionInvalid);
    CHECK(std::string(e.what()).find("action not transitive") != std::string::npos);
  }
  CHECK_THROWS_AS(group_from_json(R"j({"family": "free", "rank": 0})j"), Error);
  CHECK_THROWS_AS(group_from_json(R"j({"family": "tree"})j"), Error);
  CHECK_THROWS_AS(group_from_json("{"), Error);
}

TEST_CASE("shipped configs load") {
  for (const char* name : {"f2_full.json", "f3.json", "z2z3.json", "f2_parity.json"}) {
    const auto c = load_config(kConfigs / name);
    CHECK(c.group != nullptr);
    CHECK(c.output_dir.is_absolute());
  }
  const auto c = load_config(kConfigs / "f2_full.json", 99);
  CHECK(c.seed == 99);
  REQUIRE(c.actions.size() == 1);
  CHECK(c.actions[0].points.size() == 6);
  CHECK(c.actions[0].joint_ns == std::vector<int>{6, 8, 10, 12});
}

TEST_CASE("config errors name the field") {
  const std::string base = R"j("group": "groups/f2.json")j";
  CHECK(config_error("{" + base + R"j(, "blocks": {"H": 0}})j").find("/blocks/H") != std::string::npos);
  CHECK(config_error("{" + base + R"j(, "colour": 1})j").find("/colour: unknown field") !=
        std::string::npos);
  CHECK(config_error("{" + base + R"j(, "spectral": {"arithmetic": "fuzzy"}})j")
            .find("/spectral/arithmetic") != std::string::npos);
  CHECK(config_error("{" + base + R"j(, "spectral": {"density_n": [3, 1]}})j")
            .find("/spectral/density_n") != std::string::npos);
  CHECK(config_error(R"j({"seed": 1})j").find("/group") != std::string::npos);
  CHECK(config_error("{" + base +
                     R"j(, "actions": [{"action": "actions/z2_parity.json", "x": 5, "n_range": [1, 2]}]})j")
            .find("/actions/0/x") != std::string::npos);
  CHECK(config_error("{" + base +
                     R"j(, "actions": [{"action": "actions/z2_parity.json", "n_range": [1]}]})j")
            .find("/actions/0/n_range") != std::string::npos);
  CHECK(config_error("{" + base +
                     R"j(, "actions": [{"action": "actions/z2_parity.json", "n_range": [1, 2], "quotient": "bogus"}]})j")
            .find("/actions/0/quotient") != std::string::npos);
  CHECK(config_error(R"j({"group": "groups/f2.json", "actions": [{"action": "actions/z2_parity.json", "n_range": [1, 2], "quotient": {"kind": "abelian", "moduli": [3], "images": {"a": [1], "A": [1]}}}]})j")
            .find("/actions/0/quotient") != std::string::npos);
}

TEST_CASE("nontransitive action through the CLI") {
  TempDir dir("nt");
  fs::copy(kConfigs / "groups", dir.path / "groups");
  fs::copy(kConfigs / "actions", dir.path / "actions");
  write(dir.path / "c.json",
        R"j({"group": "groups/f2.json", "output": {"dir": "out"},
            "actions": [{"action": "actions/nontransitive.json", "n_range": [1, 3]}]})j");
  const int code = run_cli("average --config \"" + (dir.path / "c.json").string() + "\"",
                           dir.path / "log.txt");
  CHECK(code != 0);
  CHECK(slurp(dir.path / "log.txt").find("action not transitive") != std::string::npos);
  CHECK(!fs::exists(dir.path / "out"));
}

TEST_CASE("dry run writes nothing") {
  TempDir dir("dry");
  const int code = run_cli("all --dry-run --config \"" + (kConfigs / "f2_parity.json").string() +
                               "\" --out \"" + (dir.path / "out").string() + "\"",
                           dir.path / "log.txt");
  CHECK(code == 0);
  CHECK(file_count(dir.path / "out") == 0);
  CHECK(slurp(dir.path / "log.txt").find("would write") != std::string::npos);
}

TEST_CASE("reports are byte-identical across runs") {
  TempDir dir("rep");
  const std::string cfg = (kConfigs / "f2_parity.json").string();
  for (const char* run : {"a", "b"}) {
    const int code = run_cli("average --config \"" + cfg + "\" --out \"" +
                                 (dir.path / run).string() + "\"",
                             dir.path / (std::string(run) + ".log"));
    CHECK(code == 0);
  }
  REQUIRE(file_count(dir.path / "a") == 2);
  for (const auto& e : fs::directory_iterator(dir.path / "a"))
    CHECK(slurp(e.path()) == slurp(dir.path / "b" / e.path().filename()));
  const std::string csv = slurp(dir.path / "a" / "experiment-plain.csv");
  CHECK(csv.rfind("# horolab seed=7 mode=", 0) == 0);
  CHECK(csv.find("n,x,average,deviation,tv_distance") != std::string::npos);
}

TEST_CASE("in-process run on a small config") {
  TempDir dir("inproc");
  auto c = load_config(kConfigs / "f2_parity.json", 3);
  c.output_dir = dir.path;
  std::ostringstream log;
  const auto r = run_experiment(c, "average", false, log);
  CHECK(r.passed());
  CHECK(r.files_written.size() == 2);
  CHECK(slurp(dir.path / "experiment-parity.csv").find("# horolab seed=3") == 0);
  CHECK_THROWS_AS(run_experiment(c, "plot", false, log), Error);
}

}  // TEST_SUITE
