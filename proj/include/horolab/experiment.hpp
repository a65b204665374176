#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "horolab/actions.hpp"
#include "horolab/spectral.hpp"

namespace horolab {

/// Group from a JSON file: {"family": "free", "rank": 2} or
/// {"family": "free-product-of-cyclics", "orders": [2, 3]} or
/// {"family": "user-supplied", "generators": [...], "inverses": {...},
///  "rules": [["lhs", "rhs"], ...], "delta": 1}.
GroupSpec load_group(const std::filesystem::path& path);
GroupSpec group_from_json(const std::string& text, const std::string& where = "group");

/// Action from a JSON file, either {"m": 6, "generators": {"a": "(0 1)", ...}}
/// (cycle strings or image arrays) or {"regular": {"degree": 3, "base": 1,
/// "generators": {...}}}. Missing inverse generators get inverse permutations.
FiniteAction load_action(const GroupPtr& spec, const std::filesystem::path& path);
FiniteAction action_from_json(const GroupPtr& spec, const std::string& text,
                              const std::string& where = "action");

struct ActionRun {
  std::string name;
  std::filesystem::path action_path;
  std::vector<double> f;
  std::string f_description;
  std::vector<std::uint32_t> points;
  FiniteQuotient quotient;
  int n_from = 1;
  int n_to = 1;
  bool joint = false;
  int joint_R = 2;
  int joint_H = 1;
  int joint_W = 0;
  std::vector<int> joint_ns;
  double joint_slack = 0.01;
};

struct ExperimentConfig {
  std::filesystem::path path;
  std::string group_description;
  GroupPtr group;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir;

  int spheres_max_n = 8;
  int spheres_dump_max_n = 4;

  int validate_radius = 6;
  std::size_t rips_triangles = 200;

  bool adaptive = false;
  int block_H = 1;
  int block_W = 0;
  int max_H = 6;
  std::size_t seed_rays = 64;
  int enumeration_depth = 16;
  std::size_t determinism_pairs = 1000;
  int determinism_depth = 3;
  std::size_t injectivity_samples = 1000;
  int injectivity_depth = 8;
  std::size_t consistency_samples = 200;

  int growth_max_n = 10;
  Arithmetic arithmetic = Arithmetic::Exact;
  double tolerance = 1e-12;
  double rate_tolerance = 2e-2;
  int density_n_from = 4;
  int density_n_to = 8;
  int recursion_levels = 8;
  int tail_kmax = 40;
  std::string generation_ray;
  int generation_n_max = 6;
  int mtp_n_max = 6;
  std::size_t quasiconformal_pairs = 50;
  int quasiconformal_max_g = 4;

  std::vector<ActionRun> actions;
};

/// Throws ConfigInvalid naming the offending field, e.g. "/blocks/H".
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override = std::nullopt);

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"spheres", "blocks", "spectral", "average",
                                          "joint",   "validate", "all"};
  return s;
}

struct RunResult {
  std::vector<std::string> files_written;
  std::vector<std::string> failed_assertions;
  bool passed() const { return failed_assertions.empty(); }
};

/// Runs one subcommand and writes its reports into config.output_dir (or only
/// prints the plan when dry_run is set). Progress goes to `log`.
RunResult run_experiment(const ExperimentConfig& config, const std::string& subcommand,
                         bool dry_run, std::ostream& log);

}  // namespace horolab
