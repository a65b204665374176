#include <map>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace horolab;
using testing::free_group;
using testing::periodic_ray;
using testing::ray_with_prefix;

TEST_SUITE("horofunction") {

TEST_CASE("Busemann patch of aaa... at radius 1") {
  const auto f2 = free_group(2);
  const auto ray = periodic_ray(*f2, "a", 30);
  const auto p = busemann_patch(f2, ray, 1);
  CHECK(p.stabilized());
  CHECK(p.base_value() == 0);
  const std::map<std::string, int> expected{{"e", 0}, {"a", -1}, {"A", 1}, {"b", 1}, {"B", 1}};
  REQUIRE(p.size() == expected.size());
  for (const auto& [w, v] : expected) CHECK(p.value(f2->element(w)) == v);
}

TEST_CASE("Busemann patch of abab... at radius 2") {
  const auto f2 = free_group(2);
  const auto p = busemann_patch(f2, periodic_ray(*f2, "ab", 40), 2);
  CHECK(p.value(f2->element("ab")) == -2);
  CHECK(p.value(f2->element("a")) == -1);
  CHECK(p.value(f2->element("b")) == 1);
  CHECK(p.value(Element{}) == 0);
}

TEST_CASE("Busemann values match the tree oracle") {
  oracle::Gen gen(21);
  for (int rank : {2, 3}) {
    const auto g = free_group(rank);
    const Ball ball(*g, 4);
    for (int i = 0; i < 40; ++i) {
      const std::string ray = gen.reduced_word(rank, 40);
      const auto h = Horofunction::busemann(g, RayPrefix::parse(*g, ray));
      for (const auto& x : ball.elements())
        CHECK(h.value(x) == oracle::tree_busemann(ray, g->format(x) == "e" ? "" : g->format(x)));
    }
  }
}

TEST_CASE("stabilization and ray errors") {
  const auto f2 = free_group(2);
  const auto ball = std::make_shared<const Ball>(*f2, 3);
  oracle::Gen gen(3);
  for (int i = 0; i < 20; ++i) {
    const std::string w = gen.reduced_word(2, 60);
    const auto p1 = busemann_patch(f2, RayPrefix::parse(*f2, w.substr(0, 25)), 3, ball);
    const auto p2 = busemann_patch(f2, RayPrefix::parse(*f2, w), 3, ball);
    CHECK(p1 == p2);
  }
  try {
    busemann_patch(f2, periodic_ray(*f2, "a", 10), 3);
    FAIL("expected NotStabilized");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotStabilized);
  }
  try {
    RayPrefix::parse(*f2, "abBa");
    FAIL("expected RayNotGeodesic");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RayNotGeodesic);
  }
  // a point that leaves the ray after the near truncation sees two values
  const auto h = Horofunction::busemann(f2, periodic_ray(*f2, "a", 20));
  try {
    h.value(f2->element("aaaaaaaaaaaaaaaaaab"));
    FAIL("expected NotStabilized");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotStabilized);
  }
}

TEST_CASE("patches satisfy the horofunction axioms") {
  for (const auto& g : {free_group(2), free_group(3), testing::z2z3()}) {
    Rng rng(17);
    for (int i = 0; i < 15; ++i) {
      const auto ray = random_ray(*g, 40, rng);
      const auto p = busemann_patch(g, ray, 4);
      const auto c = check_patch(p);
      CHECK_MESSAGE(c.passed(), c.witness);
    }
  }
  // translates of h_n are horofunctions on small patches too
  const auto f2 = free_group(2);
  const auto h = Horofunction::distance_to(f2, f2->element("abab"), 4);
  const auto p = HorofunctionPatch::tabulate(h, 3, nullptr, false);
  CHECK(check_patch(p).passed());
  CHECK(p.value(f2->element("ab")) == -2);
}

TEST_CASE("parent map") {
  const auto f2 = free_group(2);
  const auto h = Horofunction::busemann(f2, periodic_ray(*f2, "a", 30));
  CHECK(f2->format(parent_at(h, Element{})) == "a");
  CHECK(parent_at(h, f2->element("b")).is_identity());

  const auto patch = busemann_patch(f2, periodic_ray(*f2, "a", 30), 3);
  CHECK(f2->format(parent_at(patch, Element{})) == "a");
  try {
    parent_at(patch, f2->element("abb"));
    FAIL("expected PatchBoundary");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PatchBoundary);
  }

  for (const auto& g : {free_group(2), testing::z2z3()}) {
    Rng rng(5);
    const Ball ball(*g, 3);
    for (int i = 0; i < 10; ++i) {
      const auto hh = Horofunction::busemann(g, random_ray(*g, 40, rng));
      for (const auto& x : ball.elements()) {
        const Element p = parent_at(hh, x);
        CHECK(hh.value(p) == hh.value(x) - 1);
        CHECK(dist(*g, p, x) == 1);
      }
    }
  }
}

TEST_CASE("parent horofunction") {
  const auto f2 = free_group(2);
  const auto pa = busemann_patch(f2, periodic_ray(*f2, "a", 40), 4);
  const auto par = parent_horofunction(pa);
  CHECK(par.radius() == 3);
  CHECK(par.base_value() == pa.base_value() - 1);
  const auto again = busemann_patch(f2, periodic_ray(*f2, "a", 40), 3, pa.ball());
  for (std::size_t i = 0; i < par.size(); ++i) CHECK(par.values()[i] == again.values()[i] - 1);

  const auto pb = busemann_patch(f2, ray_with_prefix(*f2, "b", "a", 40), 4);
  const auto parb = parent_horofunction(pb);
  for (std::size_t i = 0; i < parb.size(); ++i) CHECK(parb.values()[i] == again.values()[i] - 1);

  oracle::Gen gen(8);
  auto cur = busemann_patch(f2, RayPrefix::parse(*f2, gen.reduced_word(2, 40)), 6);
  for (int n = 1; n <= 5; ++n) {
    cur = parent_horofunction(cur);
    CHECK(cur.base_value() == -n);
  }
  const auto tiny = busemann_patch(f2, periodic_ray(*f2, "a", 40), 1);
  CHECK_THROWS_AS(parent_horofunction(tiny), Error);
}

TEST_CASE("blocks") {
  const auto f2 = free_group(2);
  const auto ha = Horofunction::busemann(f2, periodic_ray(*f2, "a", 30));
  const Block ba = block_of(ha, 1, 0);
  CHECK(ba.key() == "e:0|a:-1");
  REQUIRE(ba.members().size() == 2);
  CHECK(ba.members()[0] == BlockMember{Element{}, 0});
  CHECK(f2->format(ba.members()[1].element) == "a");
  CHECK(ba.members()[1].offset == -1);
  CHECK(f2->generators().label(ba.parent_generator()) == "a");

  const auto hb = Horofunction::busemann(f2, ray_with_prefix(*f2, "b", "a", 30));
  CHECK(block_of(hb, 1, 0).key() == "e:0|b:-1");
  CHECK(block_of(ha.shifted(7), 1, 0) == ba);
  CHECK(block_of(ha, 2, 1).members().front() == BlockMember{Element{}, 0});

  const auto patch = busemann_patch(f2, periodic_ray(*f2, "a", 30), 1);
  try {
    block_of(patch, 1, 0);
    FAIL("expected PatchTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PatchTooSmall);
  }
  const auto patch2 = busemann_patch(f2, periodic_ray(*f2, "a", 30), 2);
  CHECK(block_of(patch2, 1, 0) == ba);
  CHECK(block_key_less("e:0|a:-1", "e:0|aa:-1"));
  CHECK(block_key_less("e:0|A:-1", "e:0|a:-1"));
  CHECK_THROWS_AS(BlockShape::make(*f2, 0, 0), Error);
}

TEST_CASE("children in a tree") {
  const auto f2 = free_group(2);
  const auto h = Horofunction::busemann(f2, periodic_ray(*f2, "a", 30));
  const auto kids = children(h);
  REQUIRE(kids.size() == 3);
  std::vector<std::string> keys;
  for (const auto& k : kids) {
    keys.push_back(block_of(k, 1, 0).key());
    CHECK(parent_horofunction(k).value(Element{}) == h.value(Element{}));
  }
  // children through A, b, B in generator order
  CHECK(keys == std::vector<std::string>{"e:0|a:-1", "e:0|B:-1", "e:0|b:-1"});
}

TEST_CASE("determinism on small samples") {
  const auto f2 = free_group(2);
  const auto shape = BlockShape::make(*f2, 1, 0);
  const auto r = determinism_test(f2, shape, 50, 3, default_ray_length(*f2, 1, 0, 3), 9);
  CHECK(r.passed());
  CHECK(r.pairs_tested == 50);

  const auto z = testing::z2z3();
  const auto search = choose_block_parameters(z, 100, 6, 9);
  CHECK(search.shape.H == 1);
  CHECK(search.shape.W == 0);
  CHECK(search.attempts.back().passed());
}

}  // TEST_SUITE
