#include "horolab/horofunction.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>

namespace horolab {

int default_stabilization_margin(const GroupSpec& spec) { return 2 * spec.delta() + 2; }

int default_ray_length(const GroupSpec& spec, int H, int W, int depth) {
  return depth + H + W + 1 + 16 * spec.delta() + default_stabilization_margin(spec);
}

RayPrefix::RayPrefix(const GroupSpec& spec, Word word) : word_(std::move(word)) {
  // Irreducible words are closed under taking factors, so checking the whole
  // word certifies every prefix as a geodesic normal form.
  const Element n = spec.normalize(word_);
  if (n.word != word_)
    throw Error(ErrorCode::RayNotGeodesic,
                spec.format(word_) + " is not a normal form (reduces to " + spec.format(n) + ")");
}

RayPrefix random_ray(const GroupSpec& spec, int length, Rng& rng) {
  const std::size_t k = spec.num_generators();
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Word w;
    bool stuck = false;
    while (static_cast<int>(w.size()) < length && !stuck) {
      std::vector<Gen> options;
      for (std::size_t a = 0; a < k; ++a) {
        Word c = w + static_cast<char>(a);
        if (spec.normalize(c).word == c) options.push_back(static_cast<Gen>(a));
      }
      if (options.empty()) {
        stuck = true;
      } else {
        w.push_back(static_cast<char>(options[rng.below(options.size())]));
      }
    }
    if (!stuck) return RayPrefix(spec, std::move(w));
  }
  throw Error(ErrorCode::RayNotGeodesic, "could not grow a geodesic of the requested length");
}

// ---------------------------------------------------------------------------

Horofunction Horofunction::busemann(GroupPtr spec, const RayPrefix& ray, int margin) {
  if (margin < 1 || margin >= ray.length())
    throw Error(ErrorCode::NotStabilized, "ray too short for the stabilization margin");
  Horofunction h;
  h.spec_ = std::move(spec);
  h.far_ = ray.word();
  h.far_t_ = ray.length();
  h.near_t_ = ray.length() - margin;
  h.near_ = ray.word().substr(0, h.near_t_);
  return h;
}

Horofunction Horofunction::distance_to(GroupPtr spec, const Element& g, int n) {
  Horofunction h;
  h.spec_ = std::move(spec);
  h.far_ = g.word;
  h.far_t_ = n;
  return h;
}

int Horofunction::value(const Element& f) const {
  const Word inv = spec_->formal_inverse(f.word);
  const int v = static_cast<int>(spec_->normalize(inv + far_).length()) - far_t_;
  if (near_) {
    const int u = static_cast<int>(spec_->normalize(inv + *near_).length()) - near_t_;
    if (u != v)
      throw Error(ErrorCode::NotStabilized, "truncations disagree at " + spec_->format(f) +
                                                " (" + std::to_string(u) + " vs " +
                                                std::to_string(v) + "); use a longer ray");
  }
  return v + shift_;
}

Horofunction Horofunction::recentered(const Element& p) const {
  Horofunction h = *this;
  const Word inv = spec_->formal_inverse(p.word);
  h.far_ = spec_->normalize(inv + far_).word;
  if (near_) h.near_ = spec_->normalize(inv + *near_).word;
  return h;
}

Horofunction Horofunction::shifted(int c) const {
  Horofunction h = *this;
  h.shift_ += c;
  return h;
}

// ---------------------------------------------------------------------------

HorofunctionPatch::HorofunctionPatch(GroupPtr spec, std::shared_ptr<const Ball> ball, int radius,
                                     std::vector<int> values, bool stabilized)
    : spec_(std::move(spec)),
      ball_(std::move(ball)),
      radius_(radius),
      values_(std::move(values)),
      stabilized_(stabilized) {
  if (!ball_ || ball_->radius() < radius_ || values_.size() != ball_->size(radius_))
    throw Error(ErrorCode::PatchTooSmall, "patch values do not match B(e,R)");
}

int HorofunctionPatch::value(const Element& g) const {
  if (static_cast<int>(g.length()) > radius_)
    throw Error(ErrorCode::PatchBoundary, spec_->format(g) + " lies outside the patch");
  const auto idx = ball_->index_of(g.word);
  if (!idx) throw Error(ErrorCode::PatchBoundary, spec_->format(g) + " is not a normal form");
  return values_[*idx];
}

HorofunctionPatch HorofunctionPatch::recentered(const Element& p) const {
  const int r = radius_ - static_cast<int>(p.length());
  if (r < 0) throw Error(ErrorCode::PatchBoundary, "recentering outside the patch");
  std::vector<int> vals;
  vals.reserve(ball_->size(r));
  for (std::size_t i = 0; i < ball_->size(r); ++i)
    vals.push_back(value(spec_->normalize(p.word + ball_->elements()[i].word)));
  return HorofunctionPatch(spec_, ball_, r, std::move(vals), stabilized_);
}

HorofunctionPatch busemann_patch(GroupPtr spec, const RayPrefix& ray, int R,
                                 std::shared_ptr<const Ball> ball) {
  const int need = R + 16 * spec->delta() + default_stabilization_margin(*spec);
  if (ray.length() < need)
    throw Error(ErrorCode::NotStabilized, "ray of length " + std::to_string(ray.length()) +
                                              " is shorter than the required " +
                                              std::to_string(need));
  const auto h = Horofunction::busemann(spec, ray);
  // Every evaluation is compared at both truncations, so reaching the end
  // without an exception is the stabilization certificate.
  return HorofunctionPatch::tabulate(h, R, std::move(ball), true);
}

PatchCheck check_patch(const HorofunctionPatch& patch) {
  PatchCheck out;
  const GroupSpec& spec = patch.group();
  const auto& el = patch.elements();
  const std::size_t n = patch.size();
  const int R = patch.radius();

  for (std::size_t i = 0; i < n && out.lipschitz; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(patch.values()[i] - patch.values()[j]) > dist(spec, el[i], el[j])) {
        out.lipschitz = false;
        out.witness = spec.format(el[i]) + "," + spec.format(el[j]);
        break;
      }
    }
  }
  for (std::size_t i = 0; i < n && out.distance_like; ++i) {
    if (static_cast<int>(el[i].length()) > R - 1) break;
    bool found = false;
    for (std::size_t a = 0; a < spec.num_generators() && !found; ++a) {
      const Element ga = spec.normalize(el[i].word + static_cast<char>(a));
      found = patch.value(ga) == patch.values()[i] - 1;
    }
    if (!found) {
      out.distance_like = false;
      out.witness = spec.format(el[i]);
    }
  }
  const double eps = 68.0 * spec.delta();
  Rng rng(0);
  const std::size_t samples = std::min<std::size_t>(n * n, 2000);
  for (std::size_t s = 0; s < samples && out.convex; ++s) {
    const Element& x0 = el[rng.below(n)];
    const Element& x1 = el[rng.below(n)];
    const Element d = spec.normalize(spec.formal_inverse(x0.word) + x1.word);
    const double L = static_cast<double>(d.length());
    if (L == 0) continue;
    const double h0 = patch.value(x0);
    const double h1 = patch.value(x1);
    for (std::size_t t = 1; t < d.length(); ++t) {
      const Element xt = spec.normalize(x0.word + d.word.substr(0, t));
      if (static_cast<int>(xt.length()) > R) continue;
      const double s_ = static_cast<double>(t) / L;
      if (patch.value(xt) > (1 - s_) * h0 + s_ * h1 + eps) {
        out.convex = false;
        out.witness = spec.format(xt);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

bool block_key_less(const std::string& a, const std::string& b) { return shortlex_less(a, b); }

Block::Block(const GroupSpec& spec, std::vector<BlockMember> members, int H, int W)
    : members_(std::move(members)), H_(H), W_(W) {
  std::sort(members_.begin(), members_.end(), [](const BlockMember& x, const BlockMember& y) {
    if (x.element != y.element) return x.element < y.element;
    return x.offset < y.offset;
  });
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  std::ostringstream key;
  bool have_parent = false;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    const auto& m = members_[i];
    if (i) key << '|';
    key << spec.format(m.element) << ':' << m.offset;
    if (!have_parent && m.offset == -1 && m.element.length() == 1) {
      parent_gen_ = static_cast<Gen>(m.element.word[0]);
      have_parent = true;
    }
  }
  key_ = key.str();
}

BlockShape BlockShape::make(const GroupSpec& spec, int H, int W) {
  if (H < 1 || W < 0) throw Error(ErrorCode::ConfigInvalid, "block parameters need H >= 1, W >= 0");
  BlockShape s;
  s.H = H;
  s.W = W;
  SphereIndex idx(spec, W);
  for (int r = 0; r <= W; ++r)
    for (const auto& x : idx.sphere(r)) s.window.push_back(x);
  return s;
}

namespace {

std::vector<std::string> generation_keys(const std::vector<Horofunction>& gen,
                                         const BlockShape& shape) {
  std::vector<std::string> keys;
  keys.reserve(gen.size());
  for (const auto& h : gen) keys.push_back(block_of(h, shape).key());
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

DeterminismReport determinism_test(const GroupPtr& spec, const BlockShape& shape,
                                   std::size_t pairs, int depth, int ray_length,
                                   std::uint64_t seed) {
  DeterminismReport report;
  report.H = shape.H;
  report.W = shape.W;
  report.depth = depth;
  Rng rng(seed);
  std::map<std::string, Horofunction> unpaired;
  std::size_t draws = 0;
  const std::size_t max_draws = 200 * pairs + 1000;
  while (report.pairs_tested < pairs && draws < max_draws) {
    ++draws;
    const auto h = Horofunction::busemann(spec, random_ray(*spec, ray_length, rng));
    const std::string key = block_of(h, shape).key();
    auto it = unpaired.find(key);
    if (it == unpaired.end()) {
      unpaired.emplace(key, h);
      continue;
    }
    const Horofunction other = it->second;
    unpaired.erase(it);
    ++report.pairs_tested;

    std::vector<Horofunction> g1{other}, g2{h};
    for (int d = 1; d <= depth; ++d) {
      std::vector<Horofunction> n1, n2;
      for (const auto& x : g1)
        for (auto& c : children(x)) n1.push_back(std::move(c));
      for (const auto& x : g2)
        for (auto& c : children(x)) n2.push_back(std::move(c));
      if (generation_keys(n1, shape) != generation_keys(n2, shape)) {
        ++report.violations;
        if (report.witnesses.size() < 5)
          report.witnesses.push_back("block " + key + " generation " + std::to_string(d));
        break;
      }
      g1 = std::move(n1);
      g2 = std::move(n2);
    }
  }
  return report;
}

BlockParameterSearch choose_block_parameters(const GroupPtr& spec, std::size_t pairs, int depth,
                                             std::uint64_t seed, int max_H) {
  BlockParameterSearch out;
  for (int H = 1; H <= max_H; ++H) {
    for (int W = 0; W < H; ++W) {
      auto shape = BlockShape::make(*spec, H, W);
      auto report = determinism_test(spec, shape, pairs, depth,
                                     default_ray_length(*spec, H, W, depth), seed);
      const bool ok = report.passed() && report.pairs_tested == pairs;
      out.attempts.push_back(std::move(report));
      if (ok) {
        out.shape = std::move(shape);
        return out;
      }
    }
  }
  throw Error(ErrorCode::DeterminismViolated,
              "no (H, W) with H <= " + std::to_string(max_H) +
                  " passed the determinism test; raise (H, W)");
}

}  // namespace horolab
