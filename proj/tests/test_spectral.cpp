#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "horolab/spectral.hpp"
#include "oracles.hpp"

using namespace horolab;
using testing::free_group;
using testing::periodic_ray;

namespace {

BlockGraph graph_for(const GroupPtr& g, int depth = 12) {
  const auto shape = BlockShape::make(*g, 1, 0);
  return enumerate_blocks(g, shape, sample_seed_rays(*g, shape, 16, depth, 4), depth);
}

AdjacencyMatrix from_rows(const std::vector<std::vector<int>>& rows) {
  AdjacencyMatrix m(rows.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
  return m;
}

ExactDensity exact(std::vector<Rational> w, int level = 0) { return ExactDensity{std::move(w), level}; }

ExactDensity uniform(std::size_t n, Rational scale = 1, int level = 0) {
  return exact(std::vector<Rational>(n, scale / Rational(n)), level);
}

// F2 transfer matrix from the reduced-word rule, in the graph's vertex order.
std::vector<std::vector<oracle::Frac>> f2_oracle_matrix(const GroupSpec& f2, const BlockGraph& g) {
  std::vector<std::vector<oracle::Frac>> m(4, std::vector<oracle::Frac>(4));
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t b = 0; b < 4; ++b) {
      const auto lc = f2.generators().label(g.vertices()[c].parent_generator());
      const auto lb = f2.generators().label(g.vertices()[b].parent_generator());
      m[c][b] = oracle::Frac(lb != oracle::free_inverse(lc) ? 1 : 0);
    }
  return m;
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("growth data") {
  const auto f2 = growth_data(*free_group(2), 10);
  for (const auto& r : f2.ratios) CHECK(r == 3);
  CHECK(std::abs(f2.rate_estimate - std::log(3.0)) < 1e-9);
  const auto f3 = growth_data(*free_group(3), 7);
  for (const auto& r : f3.ratios) CHECK(r == 5);
  CHECK(std::abs(f3.rate_estimate - std::log(5.0)) < 1e-9);

  const auto z = testing::z2z3();
  const auto g = graph_for(z);
  const auto m = adjacency_matrix(g);
  const int p = find_period(m);
  const auto pr = perron(m, p);
  const auto zg = growth_data(*z, 14);
  CHECK(std::abs(zg.rate_estimate - std::log(pr.eigenvalue) / p) < 1e-2);
}

TEST_CASE("periods") {
  const auto f2 = free_group(2);
  const auto m = adjacency_matrix(graph_for(f2));
  CHECK(find_period(m) == 1);
  const auto sq = boolean_power(m, 2);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(sq(i, j) == 1);
  CHECK(is_primitive(m, {0, 1, 2, 3}));

  CHECK(find_period(from_rows({{0, 1}, {1, 0}})) == 2);
  CHECK(find_period(AdjacencyMatrix::identity(3)) == 1);
  CHECK(find_period(from_rows({{0, 1, 0}, {0, 0, 1}, {1, 0, 0}})) == 3);
  // a 2-cycle feeding a 3-cycle
  const auto mixed = from_rows({{0, 1, 0, 0, 0},
                                {1, 0, 0, 0, 0},
                                {0, 1, 0, 0, 1},
                                {0, 0, 1, 0, 0},
                                {0, 0, 0, 1, 0}});
  const auto s = period_structure(mixed);
  CHECK(s.period == 6);
  CHECK(s.recurrent_components.size() == 2);
  for (const auto& comp : cyclic_class_primitivity(mixed, s))
    for (bool b : comp) CHECK(b);
  CHECK(find_period(AdjacencyMatrix(2, 2)) == 1);

  const auto z = adjacency_matrix(graph_for(testing::z2z3()));
  CHECK(find_period(z) == 2);
}

TEST_CASE("Perron data") {
  const auto m2 = adjacency_matrix(graph_for(free_group(2)));
  const auto p2 = perron(m2, 1);
  REQUIRE(p2.exact_eigenvalue.has_value());
  CHECK(*p2.exact_eigenvalue == 3);
  CHECK(*p2.exact_vector == std::vector<Rational>(4, Rational(1, 4)));
  CHECK(std::abs(p2.growth_factor() - 3) < 1e-12);

  const auto m3 = adjacency_matrix(graph_for(free_group(3)));
  const auto p3 = perron(m3, 1);
  REQUIRE(p3.exact_eigenvalue.has_value());
  CHECK(*p3.exact_eigenvalue == 5);
  CHECK(*p3.exact_vector == std::vector<Rational>(6, Rational(1, 6)));

  const auto one = perron(AdjacencyMatrix::identity(1), 1);
  CHECK(one.eigenvalue == 1);
  CHECK(one.vector == std::vector<double>{1.0});

  const auto zm = adjacency_matrix(graph_for(testing::z2z3()));
  const auto pz = perron(zm, 2);
  REQUIRE(pz.exact_eigenvalue.has_value());
  CHECK(*pz.exact_eigenvalue == 2);
  CHECK(*pz.exact_vector == std::vector<Rational>(3, Rational(1, 3)));

  PerronOptions fl;
  fl.mode = Arithmetic::Float;
  const auto pf = perron(m2, 1, fl);
  CHECK(!pf.exact_eigenvalue);
  CHECK(std::abs(pf.eigenvalue - 3) < 1e-10);
  CHECK(pf.residual < 1e-10);
}

TEST_CASE("density recursion") {
  const auto m = adjacency_matrix(graph_for(free_group(2)));
  std::vector<ExactDensity> levels;
  Rational s = 1;
  for (int k = 0; k < 8; ++k, s /= 3) levels.push_back(uniform(4, s, k));
  const auto ok = density_recursion_check(levels, m);
  CHECK(ok.passed());
  CHECK(ok.levels_checked == 7);

  CHECK(density_recursion_check({exact({0, 0, 0, 0}, 0), exact({0, 0, 0, 0}, 1)}, m).passed());

  const auto bad = density_recursion_check(
      {uniform(4), exact({Rational(7, 60), Rational(3, 60), Rational(1, 12), Rational(1, 12)}, 1)},
      m);
  CHECK(!bad.passed());

  std::vector<FloatDensity> fl;
  for (const auto& v : levels) fl.push_back(to_float(v));
  CHECK(density_recursion_check(fl, m, 1e-12).passed());
  fl[1].weights[0] += 1e-6;
  CHECK(!density_recursion_check(fl, m, 1e-12).passed());
}

TEST_CASE("alpha shift") {
  const auto f2 = free_group(2);
  const auto g = graph_for(f2);
  const auto m = adjacency_matrix(g);
  CHECK(alpha_shift(uniform(4), m, 1) == uniform(4));
  CHECK(presolve(uniform(4), m) == uniform(4, Rational(1, 3), 1));

  // the presolve of (1/2,1/2,0,0) by exact solve has negative entries
  const auto w = oracle::solve(f2_oracle_matrix(*f2, g), {oracle::Frac(1, 2), oracle::Frac(1, 2),
                                                         oracle::Frac(0), oracle::Frac(0)});
  CHECK(w[0] == oracle::Frac(1, 3));
  CHECK(w[1] == oracle::Frac(1, 3));
  CHECK(w[2] == oracle::Frac(-1, 6));
  CHECK(w[3] == oracle::Frac(-1, 6));
  try {
    alpha_shift(exact({Rational(1, 2), Rational(1, 2), 0, 0}), m, 1);
    FAIL("expected NotInRecurrentCone");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotInRecurrentCone);
  }

  // presolve inverts M on a strictly positive image
  const std::vector<Rational> w0{Rational(1, 10), Rational(2, 10), Rational(3, 10), Rational(4, 10)};
  const auto v = exact(m.cast<Rational>() * w0, 0);
  const auto back = presolve(v, m);
  CHECK(back.weights == w0);
  CHECK(back.level == 1);
  const auto fb = presolve(to_float(v), m);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(fb.weights[i] - to_double(w0[i])) < 1e-12);

  // Perron vectors are fixed by alpha^p
  const auto zm = adjacency_matrix(graph_for(testing::z2z3()));
  const auto pz = perron(zm, 2);
  const auto eta = exact(*pz.exact_vector);
  CHECK(alpha_shift(alpha_shift(eta, zm, 2), zm, 2) == eta);
}

TEST_CASE("empirical densities") {
  const auto f2 = free_group(2);
  const auto g = graph_for(f2);
  for (int n = 1; n <= 5; ++n)
    CHECK(empirical_block_densities(f2, g, n) == uniform(4));
  CHECK_THROWS_AS(empirical_block_densities(f2, g, 0), Error);

  const auto shape = BlockShape::make(*f2, 1, 0);
  const auto partial = enumerate_blocks(f2, shape, {periodic_ray(*f2, "a", 40)}, 0);
  try {
    empirical_block_densities(f2, partial, 3);
    FAIL("expected NotClosed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotClosed);
  }

  const auto z = testing::z2z3();
  const auto zg = graph_for(z);
  for (int n = 2; n <= 8; ++n) CHECK(empirical_block_densities(z, zg, n).total() == 1);
}

TEST_CASE("tail masses") {
  const auto m = adjacency_matrix(graph_for(free_group(2)));
  const auto r = tail_mass_check(uniform(4), m, Rational(3), 40);
  CHECK(r.passed());
  REQUIRE(r.level_masses.size() == 41);
  CHECK(r.level_masses[0] == "2/3");
  CHECK(r.level_masses[1] == "2/9");
  CHECK(std::abs(r.partial_sum - 1) < 1e-15);

  const auto rf = tail_mass_check(to_float(uniform(4)), m, 3.0, 20, 1e-12);
  CHECK(rf.passed());
  CHECK(std::abs(rf.level_masses_float[2] - 2.0 / 27) < 1e-15);
}

TEST_CASE("quasiconformal tree check") {
  const auto f2 = free_group(2);
  CHECK(patterson_sullivan_mass(2, 0) == 1);
  CHECK(patterson_sullivan_mass(2, 3) == Rational(1, 36));

  const auto r = quasiconformal_check_tree(f2, f2->element("a"), f2->parse("b"));
  CHECK(r.original_mass == Rational(1, 4));
  CHECK(r.pushforward_mass == Rational(1, 12));
  CHECK(r.predicted_factor == Rational(1, 3));
  CHECK(r.passed());

  const auto id = quasiconformal_check_tree(f2, Element{}, f2->parse("aB"));
  CHECK(id.predicted_factor == 1);
  CHECK(id.passed());

  const auto up = quasiconformal_check_tree(f2, f2->element("a"), f2->parse("ab"));
  CHECK(up.predicted_factor == 3);
  CHECK(up.pushforward_mass == Rational(1, 4));
  CHECK(up.passed());

  CHECK_THROWS_AS(quasiconformal_check_tree(f2, f2->element("ab"), f2->parse("a")), Error);
  CHECK_THROWS_AS(quasiconformal_check_tree(f2, Element{}, f2->parse("aA")), Error);
  try {
    quasiconformal_check_tree(testing::z2z3(), Element{}, Word(1, 0));
    FAIL("expected NotATree");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotATree);
  }

  oracle::Gen gen(31);
  for (int rank : {2, 3}) {
    const auto g = free_group(rank);
    int tested = 0;
    while (tested < 40) {
      const std::string gw = gen.reduced_word(rank, static_cast<int>(gen.below(5)));
      const std::string cw = gen.reduced_word(rank, 1 + static_cast<int>(gen.below(4)));
      if (gw.compare(0, cw.size(), cw) == 0 && cw.size() <= gw.size()) continue;
      CHECK(quasiconformal_check_tree(g, g->element(gw.empty() ? "e" : gw), g->parse(cw)).passed());
      ++tested;
    }
  }
}

TEST_CASE("generation growth") {
  const auto f2 = free_group(2);
  const auto r = generation_growth_check(f2, periodic_ray(*f2, "a", 60), 6, graph_for(f2), 3.0);
  CHECK(r.passed());
  std::size_t pow3 = 1;
  for (int n = 0; n <= 6; ++n, pow3 *= 3) CHECK(r.direct_counts[n] == pow3);
  CHECK(std::abs(r.upper_constant - 1) < 1e-12);

  const auto z = testing::z2z3();
  const auto zr =
      generation_growth_check(z, periodic_ray(*z, "ab", 60), 6, graph_for(z), std::sqrt(2.0));
  CHECK(zr.passed());
  CHECK(zr.direct_counts.front() == 1);
}

TEST_CASE("mass transport") {
  const auto f2 = free_group(2);
  const auto g = graph_for(f2);
  const auto shape = BlockShape::make(*f2, 1, 0);
  const auto r3 = mtp_check(f2, 3, shape, &g);
  CHECK(r3.passed());
  CHECK(r3.sphere_size == 36);
  CHECK(r3.preimage_total == 36);
  for (const auto& [k, c] : r3.per_block) CHECK(c.first == 9);
  CHECK(mtp_check(f2, 1, shape, &g).passed());
  CHECK_THROWS_AS(mtp_check(f2, 0, shape), Error);

  const auto z = testing::z2z3();
  const auto zg = graph_for(z);
  CHECK(mtp_check(z, 5, BlockShape::make(*z, 1, 0), &zg).passed());
}

}  // TEST_SUITE
