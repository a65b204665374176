#pragma once

#include <climits>
#include <concepts>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "horolab/error.hpp"
#include "horolab/group.hpp"
#include "horolab/rng.hpp"

namespace horolab {

using GroupPtr = std::shared_ptr<const GroupSpec>;

/// Stabilization margin added beyond the last truncation: 2*delta + 2.
int default_stabilization_margin(const GroupSpec& spec);

/// Ray length that keeps every evaluation made by block/coding experiments of
/// the given depth inside the stabilized region.
int default_ray_length(const GroupSpec& spec, int H, int W, int depth);

/// Prefix of a geodesic ray from e, stored as its normal form.
class RayPrefix {
 public:
  /// Throws RayNotGeodesic unless every prefix of `word` is a normal form.
  RayPrefix(const GroupSpec& spec, Word word);
  static RayPrefix parse(const GroupSpec& spec, std::string_view text) {
    return RayPrefix(spec, spec.parse(text));
  }

  const Word& word() const { return word_; }
  int length() const { return static_cast<int>(word_.size()); }

 private:
  Word word_;
};

/// Random geodesic ray prefix grown one letter at a time; dead ends restart.
RayPrefix random_ray(const GroupSpec& spec, int length, Rng& rng);

/// Lazily evaluated horofunction of distance type: value(f) = d(f, anchor) - t
/// + shift. Busemann functions keep a second, shorter truncation of the ray and
/// every evaluation is checked against it.
class Horofunction {
 public:
  /// h(f) = d(f, r(L)) - L, stabilized against the truncation L - margin.
  static Horofunction busemann(GroupPtr spec, const RayPrefix& ray, int margin);
  static Horofunction busemann(GroupPtr spec, const RayPrefix& ray) {
    const int m = default_stabilization_margin(*spec);
    return busemann(std::move(spec), ray, m);
  }
  /// The translate g.h_n of h_n(f) = d(f,e) - n, i.e. f -> d(f,g) - n.
  static Horofunction distance_to(GroupPtr spec, const Element& g, int n);

  /// Throws NotStabilized when the two truncations disagree at f.
  int value(const Element& f) const;
  /// p^{-1}.h, i.e. f -> h(p f).
  Horofunction recentered(const Element& p) const;
  Horofunction shifted(int c) const;
  int reach() const { return INT_MAX; }
  const GroupSpec& group() const { return *spec_; }
  const GroupPtr& group_ptr() const { return spec_; }

 private:
  GroupPtr spec_;
  Word far_;
  int far_t_ = 0;
  std::optional<Word> near_;
  int near_t_ = 0;
  int shift_ = 0;
};

/// A horofunction tabulated on B(e,R).
class HorofunctionPatch {
 public:
  HorofunctionPatch(GroupPtr spec, std::shared_ptr<const Ball> ball, int radius,
                    std::vector<int> values, bool stabilized);

  /// Tabulates h on B(e,R). `ball` may be shared between patches; it must
  /// have radius >= R.
  template <class Source>
  static HorofunctionPatch tabulate(const Source& h, int R, std::shared_ptr<const Ball> ball,
                                    bool stabilized) {
    if (!ball || ball->radius() < R) ball = std::make_shared<Ball>(h.group(), R);
    std::vector<int> values;
    values.reserve(ball->size(R));
    for (std::size_t i = 0; i < ball->size(R); ++i) values.push_back(h.value(ball->elements()[i]));
    return HorofunctionPatch(h.group_ptr(), std::move(ball), R, std::move(values), stabilized);
  }

  int radius() const { return radius_; }
  int base_value() const { return values_.front(); }
  bool stabilized() const { return stabilized_; }
  /// Values aligned with the shortlex order of B(e, radius).
  const std::vector<int>& values() const { return values_; }
  const std::vector<Element>& elements() const { return ball_->elements(); }
  std::size_t size() const { return values_.size(); }

  /// Throws PatchBoundary outside B(e, radius).
  int value(const Element& g) const;
  /// f -> h(p f) on B(e, radius - |p|).
  HorofunctionPatch recentered(const Element& p) const;
  int reach() const { return radius_; }
  const GroupSpec& group() const { return *spec_; }
  const GroupPtr& group_ptr() const { return spec_; }
  const std::shared_ptr<const Ball>& ball() const { return ball_; }

  friend bool operator==(const HorofunctionPatch& a, const HorofunctionPatch& b) {
    return a.radius_ == b.radius_ && a.values_ == b.values_;
  }

 private:
  GroupPtr spec_;
  std::shared_ptr<const Ball> ball_;
  int radius_;
  std::vector<int> values_;
  bool stabilized_;
};

template <class H>
concept HorofunctionLike = requires(const H& h, const Element& g) {
  { h.value(g) } -> std::convertible_to<int>;
  { h.recentered(g) } -> std::convertible_to<H>;
  { h.reach() } -> std::convertible_to<int>;
  { h.group() } -> std::convertible_to<const GroupSpec&>;
};

/// Busemann patch of `ray` on B(e,R), certified at two truncations.
HorofunctionPatch busemann_patch(GroupPtr spec, const RayPrefix& ray, int R,
                                 std::shared_ptr<const Ball> ball = nullptr);

/// Result of checking the horofunction axioms on a patch.
struct PatchCheck {
  bool lipschitz = true;
  bool distance_like = true;
  bool convex = true;
  std::string witness;
  bool passed() const { return lipschitz && distance_like && convex; }
};

/// 1-Lipschitz on all pairs, distance-like on B(e,R-1), and a vertex-level
/// convexity check along normal-form geodesics with slack 68*delta.
PatchCheck check_patch(const HorofunctionPatch& patch);

/// Par_h(g): g.a for the order-least generator a with h(g a) = h(g) - 1.
template <HorofunctionLike H>
Element parent_at(const H& h, const Element& g) {
  if (h.reach() != INT_MAX && static_cast<int>(g.length()) + 1 > h.reach())
    throw Error(ErrorCode::PatchBoundary, "parent of an element on the patch boundary");
  const GroupSpec& spec = h.group();
  const int v = h.value(g);
  Word w = g.word;
  w.push_back(0);
  for (std::size_t a = 0; a < spec.num_generators(); ++a) {
    w.back() = static_cast<char>(a);
    Element ga = spec.normalize(w);
    if (h.value(ga) == v - 1) return ga;
  }
  throw Error(ErrorCode::NoDescendingNeighbor,
              "no neighbour of " + spec.format(g) + " decreases the horofunction");
}

/// Par(h) = Par_h(e)^{-1} h.
template <HorofunctionLike H>
H parent_horofunction(const H& h) {
  if (h.reach() < 2) throw Error(ErrorCode::PatchBoundary, "parent needs radius >= 2");
  return h.recentered(parent_at(h, Element{}));
}

/// Children of h: the translates c^{-1} h for generators c with Par_h(c) = e,
/// in generator order.
template <HorofunctionLike H>
std::vector<H> children(const H& h) {
  const GroupSpec& spec = h.group();
  std::vector<H> out;
  for (std::size_t c = 0; c < spec.num_generators(); ++c) {
    const Element g = spec.generator(static_cast<Gen>(c));
    if (g.is_identity()) continue;
    if (parent_at(h, g).is_identity()) out.push_back(h.recentered(g));
  }
  return out;
}

struct BlockMember {
  Element element;
  int offset;  // h(g) - h(e)
  friend bool operator==(const BlockMember&, const BlockMember&) = default;
};

/// An R_B class: members of the parent-chain window with values relative to e.
class Block {
 public:
  Block(const GroupSpec& spec, std::vector<BlockMember> members, int H, int W);

  const std::vector<BlockMember>& members() const { return members_; }
  /// Canonical text form, e.g. "e:0|a:-1"; equal blocks have equal keys.
  const std::string& key() const { return key_; }
  int H() const { return H_; }
  int W() const { return W_; }
  /// Generator a with Par_h(e) = a for every h in the block.
  Gen parent_generator() const { return parent_gen_; }

  friend bool operator==(const Block& a, const Block& b) { return a.key_ == b.key_; }

 private:
  std::vector<BlockMember> members_;
  std::string key_;
  int H_;
  int W_;
  Gen parent_gen_ = 0;
};

/// Shortlex on the canonical serialization.
bool block_key_less(const std::string& a, const std::string& b);

/// (H, W) together with the window B(e,W), computed once per experiment.
struct BlockShape {
  int H = 1;
  int W = 0;
  std::vector<Element> window;

  static BlockShape make(const GroupSpec& spec, int H, int W);
};

template <HorofunctionLike H>
Block block_of(const H& h, const BlockShape& shape) {
  if (h.reach() != INT_MAX && h.reach() < shape.H + shape.W + 1)
    throw Error(ErrorCode::PatchTooSmall, "block window does not fit inside the patch");
  const GroupSpec& spec = h.group();
  const int base = h.value(Element{});
  std::vector<BlockMember> members;
  Element p;
  for (int n = 0; n <= shape.H; ++n) {
    const int level = h.value(p);
    for (const auto& b : shape.window) {
      Element g = spec.normalize(p.word + b.word);
      if (h.value(g) == level) members.push_back({std::move(g), level - base});
    }
    if (n < shape.H) p = parent_at(h, p);
  }
  return Block(spec, std::move(members), shape.H, shape.W);
}

template <HorofunctionLike H>
Block block_of(const H& h, int Hn, int W) {
  return block_of(h, BlockShape::make(h.group(), Hn, W));
}

struct DeterminismReport {
  int H = 0;
  int W = 0;
  int depth = 0;
  std::size_t pairs_tested = 0;
  std::size_t violations = 0;
  std::vector<std::string> witnesses;
  bool passed() const { return violations == 0; }
};

/// Samples ray pairs with equal blocks and compares the multisets of blocks of
/// their descendants generation by generation up to `depth`.
DeterminismReport determinism_test(const GroupPtr& spec, const BlockShape& shape,
                                   std::size_t pairs, int depth, int ray_length,
                                   std::uint64_t seed);

struct BlockParameterSearch {
  BlockShape shape;
  std::vector<DeterminismReport> attempts;
};

/// Grows (H, W) from (1, 0) until determinism_test passes; throws
/// DeterminismViolated with an instruction to raise (H, W) if the cap is hit.
BlockParameterSearch choose_block_parameters(const GroupPtr& spec, std::size_t pairs, int depth,
                                             std::uint64_t seed, int max_H = 6);

}  // namespace horolab
