// One line per acceptance check; exit status 1 if any check fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "horolab/actions.hpp"
#include "horolab/experiment.hpp"
#include "horolab/spectral.hpp"
#include "oracles.hpp"

using namespace horolab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

GroupPtr make(GroupSpec g) { return std::make_shared<const GroupSpec>(std::move(g)); }

BlockGraph graph_for(const GroupPtr& g, const BlockShape& shape, int depth = 16) {
  return enumerate_blocks(g, shape, sample_seed_rays(*g, shape, 32, depth, 11), depth);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome spheres_f2() {
  const auto f2 = GroupSpec::free_group(2);
  const SphereIndex s(f2, 12);
  std::uint64_t bad = 0;
  for (int n = 1; n <= 12; ++n)
    if (s.sphere(n).size() != oracle::free_sphere_size_formula(2, n)) ++bad;
  return {bad == 0, "|S(12)| = " + std::to_string(s.sphere(12).size())};
}

Outcome blocks_f2() {
  const auto f2 = make(GroupSpec::free_group(2));
  const auto g = graph_for(f2, BlockShape::make(*f2, 1, 0));
  const auto m = adjacency_matrix(g);
  const int p = find_period(m);
  const auto pr = perron(m, p);
  const bool uniform =
      pr.exact_vector && *pr.exact_vector == std::vector<Rational>(4, Rational(1, 4));
  const bool ok = g.closed() && g.size() == 4 && g.edges().size() == 12 && p == 1 &&
                  pr.exact_eigenvalue && *pr.exact_eigenvalue == 3 && uniform;
  std::ostringstream d;
  d << g.size() << " vertices, " << g.edges().size() << " edges, p = " << p << ", eigenvalue "
    << (pr.exact_eigenvalue ? to_string(*pr.exact_eigenvalue) : std::to_string(pr.eigenvalue));
  return {ok, d.str()};
}

Outcome determinism(BlockShape& z_shape) {
  std::ostringstream d;
  bool ok = true;
  for (int rank : {2, 3}) {
    const auto g = make(GroupSpec::free_group(rank));
    const int depth = rank == 2 ? 4 : 3;
    const auto r = determinism_test(g, BlockShape::make(*g, 1, 0), 1000, depth,
                                    default_ray_length(*g, 1, 0, depth), 101 + rank);
    ok = ok && r.passed() && r.pairs_tested == 1000;
    d << "F" << rank << ": " << r.violations << " violations at depth " << depth << "; ";
  }
  const auto z = make(GroupSpec::free_product_of_cyclics({2, 3}));
  const auto s = choose_block_parameters(z, 1000, 8, 107);
  z_shape = s.shape;
  const auto& last = s.attempts.back();
  ok = ok && last.passed() && last.pairs_tested == 1000;
  d << "Z/2*Z/3: (H,W) = (" << s.shape.H << "," << s.shape.W << "), " << last.violations
    << " violations at depth 8";
  return {ok, d.str()};
}

Outcome injectivity(const BlockShape& z_shape) {
  std::ostringstream d;
  bool ok = true;
  for (int rank : {2, 3}) {
    const auto g = make(GroupSpec::free_group(rank));
    const auto r = coding_injectivity_test(g, BlockShape::make(*g, 1, 0), 1000, 8, 201 + rank);
    ok = ok && r.passed() && r.samples == 1000;
    d << "F" << rank << ": " << r.collisions << " collisions; ";
  }
  const auto z = make(GroupSpec::free_product_of_cyclics({2, 3}));
  const auto r = coding_injectivity_test(z, BlockShape::make(*z, z_shape.H, z_shape.W), 1000, 8, 205);
  ok = ok && r.passed() && r.samples == 1000;
  d << "Z/2*Z/3: " << r.collisions << " collisions";
  return {ok, d.str()};
}

Outcome identities(const BlockShape& z_shape) {
  bool ok = true;
  std::ostringstream d;
  for (int rank : {2, 3}) {
    const auto g = make(GroupSpec::free_group(rank));
    const auto m = adjacency_matrix(graph_for(g, BlockShape::make(*g, 1, 0)));
    std::vector<ExactDensity> levels;
    Rational scale = 1;
    for (int k = 0; k <= 10; ++k, scale /= (2 * rank - 1))
      levels.push_back({std::vector<Rational>(2 * rank, scale / (2 * rank)), k});
    ok = ok && density_recursion_check(levels, m).passed();
  }
  d << "recursion exact on F2, F3; ";

  const auto f2 = make(GroupSpec::free_group(2));
  const auto f2_shape = BlockShape::make(*f2, 1, 0);
  const auto f2_graph = graph_for(f2, f2_shape);
  Word ray_a(60, 0);
  const auto gen_f2 = generation_growth_check(f2, RayPrefix(*f2, ray_a), 8, f2_graph, 3.0);
  const auto z = make(GroupSpec::free_product_of_cyclics({2, 3}));
  const auto z_graph = graph_for(z, z_shape, 24);
  Word ray_ab;
  while (ray_ab.size() < 60) ray_ab += z->parse("ab");
  const auto gen_z =
      generation_growth_check(z, RayPrefix(*z, ray_ab), 6, z_graph, std::sqrt(2.0));
  ok = ok && gen_f2.passed() && gen_z.passed();
  d << "generation counts equal (F2 n<=8, Z/2*Z/3 n<=6); ";

  std::size_t mtp_fail = 0;
  const SphereIndex f2_spheres(*f2, 8);
  const SphereIndex z_spheres(*z, 8);
  for (int n = 1; n <= 8; ++n) {
    if (!mtp_check(f2, n, f2_shape, &f2_graph, &f2_spheres).passed()) ++mtp_fail;
    if (!mtp_check(z, n, z_shape, &z_graph, &z_spheres).passed()) ++mtp_fail;
  }
  ok = ok && mtp_fail == 0;
  d << "mass transport failures: " << mtp_fail;
  return {ok, d.str()};
}

Outcome tail_masses() {
  const auto f2 = make(GroupSpec::free_group(2));
  const auto m = adjacency_matrix(graph_for(f2, BlockShape::make(*f2, 1, 0)));
  const ExactDensity u{std::vector<Rational>(4, Rational(1, 4)), 0};
  const auto r = tail_mass_check(u, m, Rational(3), 40);
  bool exact = r.level_masses.size() == 41;
  Rational expect(2, 3);
  for (std::size_t k = 0; exact && k < r.level_masses.size(); ++k, expect /= 3)
    exact = r.level_masses[k] == to_string(expect);
  return {r.passed() && exact, "level 40 mass " + r.level_masses.back()};
}

Outcome quasiconformal() {
  const auto f2 = make(GroupSpec::free_group(2));
  oracle::Gen gen(301);
  int tested = 0, failed = 0;
  while (tested < 50) {
    const std::string g = gen.reduced_word(2, static_cast<int>(gen.below(5)));
    const std::string w = gen.reduced_word(2, 1 + static_cast<int>(gen.below(6)));
    if (w.size() <= g.size() && g.compare(0, w.size(), w) == 0) continue;
    if (!quasiconformal_check_tree(f2, f2->element(g.empty() ? "e" : g), f2->parse(w)).passed())
      ++failed;
    ++tested;
  }
  return {failed == 0, std::to_string(tested) + " pairs, " + std::to_string(failed) + " mismatches"};
}

std::vector<oracle::Perm> oracle_perms(const FiniteAction& act) {
  std::vector<oracle::Perm> out;
  for (std::size_t g = 0; g < act.group().num_generators(); ++g)
    out.push_back(act.perm(static_cast<Gen>(g)).images());
  return out;
}

std::vector<std::string> oracle_words(const GroupSpec& spec, const Transversal& t) {
  std::vector<std::string> out;
  for (const auto& k : t.K) out.push_back(k.is_identity() ? "" : spec.format(k));
  return out;
}

FiniteAction s3_action(const GroupPtr& f2) {
  const auto a = Permutation::parse_cycles("(1 2)", 3, 1);
  const auto b = Permutation::parse_cycles("(1 2 3)", 3, 1);
  return FiniteAction::regular(f2, {a, a.inverse(), b, b.inverse()});
}

Outcome equidistribution() {
  const auto f2 = make(GroupSpec::free_group(2));
  const auto act = s3_action(f2);
  const auto K = make_transversal(*f2, FiniteQuotient::parity(*f2));
  const SphereIndex spheres(*f2, 12);
  double worst = 0;
  bool oracle_agrees = true;
  for (std::uint32_t x = 0; x < act.size(); ++x) {
    oracle_agrees = oracle_agrees &&
                    spherical_counts(act, x, 12, K, &spheres) ==
                        oracle::free_spherical_counts(2, oracle_perms(act), 12, x,
                                                      oracle_words(*f2, K));
    for (std::uint32_t y = 0; y < act.size(); ++y) {
      std::vector<double> f(act.size(), 0.0);
      f[y] = 1.0;
      worst = std::max(worst, std::abs(spherical_average(act, f, x, 12, K, &spheres) - 1.0 / 6));
    }
  }
  std::ostringstream d;
  d << "max |average - 1/6| at n = 12: " << worst
    << (oracle_agrees ? ", counts match the oracle" : ", counts DIFFER from the oracle");
  return {worst <= 0.02 && oracle_agrees, d.str()};
}

Outcome parity_example() {
  const auto f2 = make(GroupSpec::free_group(2));
  const auto s = Permutation::parse_cycles("(0 1)", 2);
  const FiniteAction act(f2, {s, s, s, s});
  const auto plain = make_transversal(*f2, FiniteQuotient::trivial(*f2));
  const auto par = make_transversal(*f2, FiniteQuotient::parity(*f2));
  const SphereIndex spheres(*f2, 12);
  const std::vector<double> f{1.0, 0.0};
  bool ok = true;
  for (int n = 1; n <= 12; ++n) {
    ok = ok && spherical_average(act, f, 0, n, plain, &spheres) == (n % 2 == 0 ? 1.0 : 0.0);
    ok = ok && spherical_average(act, f, 0, n, par, &spheres) == 0.5;
  }
  return {ok, "K = {e} alternates 1, 0; K = {e, a} gives 1/2 for n = 1..12"};
}

Outcome joint_tv() {
  const auto f2 = make(GroupSpec::free_group(2));
  const auto act = s3_action(f2);
  const auto K = make_transversal(*f2, FiniteQuotient::parity(*f2));
  const SphereIndex spheres(*f2, 12);
  const auto shape = BlockShape::make(*f2, 1, 0);
  std::vector<double> tv;
  bool ok = true;
  for (int n : {6, 8, 10, 12}) {
    tv.push_back(joint_empirical(act, 0, K, n, 2, shape, &spheres).tv_distance);
    ok = ok && std::abs(tv.back() - oracle::free_joint_tv(2, oracle_perms(act), n, 2, 0,
                                                          oracle_words(*f2, K))) < 1e-12;
  }
  ok = ok && tv.back() <= 0.05;
  for (std::size_t i = 1; i < tv.size(); ++i) ok = ok && tv[i] <= tv[i - 1] + 0.01;
  std::ostringstream d;
  d << "TV at n = 6, 8, 10, 12:";
  for (double t : tv) d << " " << t;
  return {ok, d.str()};
}

Outcome reproducible() {
  const fs::path base =
      fs::temp_directory_path() / ("horolab-acceptance-" + std::to_string(std::random_device{}()));
  const std::string cfg = (fs::path(HOROLAB_CONFIG_DIR) / "f2_full.json").string();
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("\"") + HOROLAB_CLI + "\" all --config \"" + cfg +
                            "\" --out \"" + (base / run).string() + "\" > \"" +
                            (base.string() + "-" + run + ".log") + "\" 2>&1";
    fs::create_directories(base);
    ok = ok && std::system(cmd.c_str()) == 0;
  }
  std::size_t files = 0, differ = 0;
  if (fs::exists(base / "a"))
    for (const auto& e : fs::directory_iterator(base / "a")) {
      ++files;
      if (slurp(e.path()) != slurp(base / "b" / e.path().filename())) ++differ;
    }
  std::size_t files_b = 0;
  if (fs::exists(base / "b"))
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(base / "b")) ++files_b;
  ok = ok && files == 9 && files_b == 9 && differ == 0;
  fs::remove_all(base);
  fs::remove(base.string() + "-a.log");
  fs::remove(base.string() + "-b.log");
  return {ok, std::to_string(files) + " report files, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main() {
  BlockShape z_shape;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"F2 sphere sizes 4*3^(n-1), n <= 12, under 60 s", spheres_f2},
      {"F2 block graph, Perron data and period", blocks_f2},
      {"determinism of child blocks, 1000 pairs per family", [&] { return determinism(z_shape); }},
      {"coding injectivity, 1000 rays at depth 8 per family", [&] { return injectivity(z_shape); }},
      {"density recursion, generation counts, mass transport", [&] { return identities(z_shape); }},
      {"F2 tail masses (2/3) 3^-k for k <= 40", tail_masses},
      {"F2 cylinder pushforward masses, 50 pairs", quasiconformal},
      {"F2 on S3 with parity transversal, n = 12, under 5 min", equidistribution},
      {"F2 on Z/2, transversal needed", parity_example},
      {"joint law TV over n = 6, 8, 10, 12", joint_tv},
      {"byte-identical report bundles across two runs", reproducible},
  };
  const std::vector<double> limits{60, 0, 0, 0, 0, 0, 0, 300, 0, 0, 0};
  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limits[i] > 0 && secs >= limits[i]) {
      o.pass = false;
      o.detail += "; over time limit";
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << i + 1 << "  "
              << checks[i].first << " | " << o.detail << " | " << std::fixed
              << std::setprecision(1) << secs << " s" << std::defaultfloat << std::endl;
  }
  std::cout << (failures == 0 ? "all acceptance checks passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
