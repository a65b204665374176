#include "horolab/group.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <unordered_set>

#include "horolab/error.hpp"
#include "horolab/rng.hpp"

namespace horolab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSymbol: return "UnknownSymbol";
    case ErrorCode::RadiusCapExceeded: return "RadiusCapExceeded";
    case ErrorCode::GeodesicMismatch: return "GeodesicMismatch";
    case ErrorCode::NotStabilized: return "NotStabilized";
    case ErrorCode::RayNotGeodesic: return "RayNotGeodesic";
    case ErrorCode::PatchBoundary: return "PatchBoundary";
    case ErrorCode::PatchTooSmall: return "PatchTooSmall";
    case ErrorCode::NoDescendingNeighbor: return "NoDescendingNeighbor";
    case ErrorCode::NotClosed: return "NotClosed";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NotInRecurrentCone: return "NotInRecurrentCone";
    case ErrorCode::NotATree: return "NotATree";
    case ErrorCode::RelationViolated: return "RelationViolated";
    case ErrorCode::ActionInvalid: return "ActionInvalid";
    case ErrorCode::DeterminismViolated: return "DeterminismViolated";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Free: return "free";
    case Family::FreeProductOfCyclics: return "free-product-of-cyclics";
    case Family::UserSupplied: return "user-supplied";
  }
  return "unknown";
}

bool shortlex_less(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

// ---------------------------------------------------------------------------

GeneratorSet::GeneratorSet(std::vector<std::string> labels, std::vector<Gen> inverse)
    : labels_(std::move(labels)), inverse_(std::move(inverse)) {
  if (labels_.size() != inverse_.size())
    throw Error(ErrorCode::ConfigInvalid, "generator labels and inverse table differ in size");
  if (labels_.empty() || labels_.size() > 64)
    throw Error(ErrorCode::ConfigInvalid, "need between 1 and 64 generators");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const auto& l = labels_[i];
    if (l.empty() || l == "e" || l.find(' ') != std::string::npos)
      throw Error(ErrorCode::ConfigInvalid, "invalid generator label '" + l + "'");
    if (std::count(labels_.begin(), labels_.end(), l) != 1)
      throw Error(ErrorCode::ConfigInvalid, "duplicate generator label '" + l + "'");
    if (inverse_[i] >= labels_.size() || inverse_[inverse_[i]] != i)
      throw Error(ErrorCode::ConfigInvalid, "inverse pairing is not an involution at '" + l + "'");
    if (l.size() != 1) single_char_ = false;
  }
}

std::optional<Gen> GeneratorSet::find(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return static_cast<Gen>(i);
  return std::nullopt;
}

// ---------------------------------------------------------------------------

GroupSpec::GroupSpec(GeneratorSet gens, std::vector<RewriteRule> rules, Family family,
                     int delta)
    : generators_(std::move(gens)), rules_(std::move(rules)), family_(family), delta_(delta) {
  if (delta_ < 1) throw Error(ErrorCode::ConfigInvalid, "delta must be a positive integer");
  by_last_.assign(generators_.size(), {});
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& r = rules_[i];
    if (r.lhs.empty())
      throw Error(ErrorCode::ConfigInvalid, "rewrite rule with empty left side");
    for (char c : r.lhs + r.rhs)
      if (static_cast<Gen>(c) >= generators_.size())
        throw Error(ErrorCode::UnknownSymbol, "rule uses an unknown generator");
    if (!shortlex_less(r.rhs, r.lhs))
      throw Error(ErrorCode::ConfigInvalid,
                  "rule " + format(r.lhs) + " -> " + format(r.rhs) + " is not shortlex-reducing");
    by_last_[static_cast<Gen>(r.lhs.back())].push_back(i);
  }
}

GroupSpec GroupSpec::free_group(int rank, int delta) {
  if (rank < 1 || rank > 26) throw Error(ErrorCode::ConfigInvalid, "free rank must be in 1..26");
  std::vector<std::string> labels;
  std::vector<Gen> inv;
  std::vector<RewriteRule> rules;
  for (int i = 0; i < rank; ++i) {
    labels.push_back(std::string(1, static_cast<char>('a' + i)));
    labels.push_back(std::string(1, static_cast<char>('A' + i)));
    inv.push_back(static_cast<Gen>(2 * i + 1));
    inv.push_back(static_cast<Gen>(2 * i));
  }
  for (int g = 0; g < 2 * rank; ++g) {
    Word lhs{static_cast<char>(g), static_cast<char>(inv[g])};
    rules.push_back({lhs, Word{}});
  }
  GroupSpec spec({std::move(labels), std::move(inv)}, std::move(rules), Family::Free, delta);
  spec.rank_ = rank;
  return spec;
}

GroupSpec GroupSpec::free_product_of_cyclics(const std::vector<int>& orders, int delta) {
  if (orders.empty() || orders.size() > 26)
    throw Error(ErrorCode::ConfigInvalid, "free product needs 1..26 factors");
  std::vector<std::string> labels;
  std::vector<Gen> inv;
  std::vector<RewriteRule> rules;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    const int n = orders[i];
    if (n < 2) throw Error(ErrorCode::ConfigInvalid, "cyclic factor orders must be >= 2");
    const Gen x = static_cast<Gen>(labels.size());
    labels.push_back(std::string(1, static_cast<char>('a' + i)));
    if (n == 2) {
      inv.push_back(x);
      rules.push_back({Word(2, static_cast<char>(x)), Word{}});
      continue;
    }
    const Gen X = static_cast<Gen>(x + 1);
    labels.push_back(std::string(1, static_cast<char>('A' + i)));
    inv.push_back(X);
    inv.push_back(x);
    const char cx = static_cast<char>(x);
    const char cX = static_cast<char>(X);
    rules.push_back({Word{cx, cX}, Word{}});
    rules.push_back({Word{cX, cx}, Word{}});
    // x^j is written x^j for j <= n/2 and X^(n-j) otherwise; for even n the
    // tie x^(n/2) = X^(n/2) resolves to the shortlex-smaller x^(n/2).
    const int up = n / 2 + 1;
    rules.push_back({Word(up, cx), Word(n - up, cX)});
    const int down = (n + 1) / 2;
    rules.push_back({Word(down, cX), Word(n - down, cx)});
  }
  GroupSpec spec({std::move(labels), std::move(inv)}, std::move(rules),
                 Family::FreeProductOfCyclics, delta);
  spec.orders_ = orders;
  return spec;
}

GroupSpec GroupSpec::user_supplied(GeneratorSet generators, std::vector<RewriteRule> rules,
                                   int delta) {
  return GroupSpec(std::move(generators), std::move(rules), Family::UserSupplied, delta);
}

Word GroupSpec::parse(std::string_view text) const {
  Word out;
  std::vector<std::string> tokens;
  if (text.find(' ') != std::string_view::npos || !generators_.single_char_labels()) {
    std::istringstream in{std::string(text)};
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
  } else {
    for (char c : text) tokens.emplace_back(1, c);
  }
  if (tokens.size() == 1 && tokens[0] == "e") return out;
  for (const auto& t : tokens) {
    auto g = generators_.find(t);
    if (!g) throw Error(ErrorCode::UnknownSymbol, "'" + t + "' is not a generator");
    out.push_back(static_cast<char>(*g));
  }
  return out;
}

std::string GroupSpec::format(const Word& w) const {
  if (w.empty()) return "e";
  std::string out;
  const bool sep = !generators_.single_char_labels();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (sep && i > 0) out.push_back(' ');
    out += generators_.label(static_cast<Gen>(w[i]));
  }
  return out;
}

Element GroupSpec::normalize(std::string_view w) const {
  const std::size_t n = generators_.size();
  Word out;
  out.reserve(w.size());
  std::string pending(w.rbegin(), w.rend());
  while (!pending.empty()) {
    const Gen s = static_cast<Gen>(pending.back());
    pending.pop_back();
    if (s >= n) throw Error(ErrorCode::UnknownSymbol, "generator index out of range");
    out.push_back(static_cast<char>(s));
    // `out` was irreducible before the push, so a redex must be a suffix.
    for (std::size_t idx : by_last_[s]) {
      const auto& r = rules_[idx];
      if (out.size() >= r.lhs.size() &&
          out.compare(out.size() - r.lhs.size(), r.lhs.size(), r.lhs) == 0) {
        out.resize(out.size() - r.lhs.size());
        pending.append(r.rhs.rbegin(), r.rhs.rend());
        break;
      }
    }
  }
  return Element{std::move(out)};
}

Element GroupSpec::multiply(const Element& x, const Element& y) const {
  return normalize(x.word + y.word);
}

Word GroupSpec::formal_inverse(std::string_view w) const {
  Word out(w.rbegin(), w.rend());
  for (char& c : out) c = static_cast<char>(generators_.inverse(static_cast<Gen>(c)));
  return out;
}

Element GroupSpec::inverse(const Element& x) const { return normalize(formal_inverse(x.word)); }

int dist(const GroupSpec& spec, const Element& x, const Element& y) {
  return static_cast<int>(spec.normalize(spec.formal_inverse(x.word) + y.word).length());
}

HalfInteger gromov_product(const GroupSpec& spec, const Element& y, const Element& z,
                           const Element& base) {
  return HalfInteger{dist(spec, base, y) + dist(spec, base, z) - dist(spec, y, z)};
}

// ---------------------------------------------------------------------------

SphereIndex::SphereIndex(const GroupSpec& spec, int radius_max, std::size_t element_cap) {
  if (radius_max < 0) throw Error(ErrorCode::ConfigInvalid, "negative radius");
  spheres_.push_back({Element{}});
  std::size_t total = 1;
  const std::size_t k = spec.num_generators();
  for (int n = 0; n < radius_max; ++n) {
    const auto& cur = spheres_.back();
    const std::size_t projected = total + cur.size() * (k > 1 ? k - 1 : 1);
    if (projected > element_cap) {
      std::ostringstream msg;
      msg << "sphere " << n + 1 << " would bring the ball to about " << projected
          << " elements (~" << projected * (sizeof(Element) + n + 1) / (1 << 20)
          << " MiB), cap is " << element_cap;
      throw Error(ErrorCode::RadiusCapExceeded, msg.str());
    }
    std::unordered_set<Word> next;
    next.reserve(cur.size() * k);
    for (const auto& x : cur) {
      Word w = x.word;
      w.push_back(0);
      for (std::size_t g = 0; g < k; ++g) {
        w.back() = static_cast<char>(g);
        Element y = spec.normalize(w);
        if (y.length() == static_cast<std::size_t>(n + 1)) next.insert(std::move(y.word));
      }
    }
    std::vector<Element> level;
    level.reserve(next.size());
    for (auto& w : next) level.push_back(Element{w});
    std::sort(level.begin(), level.end());
    total += level.size();
    spheres_.push_back(std::move(level));
  }
}

std::vector<std::size_t> SphereIndex::sizes() const {
  std::vector<std::size_t> out;
  for (const auto& s : spheres_) out.push_back(s.size());
  return out;
}

std::size_t SphereIndex::ball_size(int r) const {
  std::size_t t = 0;
  for (int i = 0; i <= r; ++i) t += spheres_.at(i).size();
  return t;
}

std::vector<Element> sphere(int n, const GroupSpec& spec, std::size_t element_cap) {
  SphereIndex idx(spec, n, element_cap);
  return idx.sphere(n);
}

Ball::Ball(const GroupSpec& spec, int radius) : radius_(radius) {
  SphereIndex idx(spec, radius);
  for (int r = 0; r <= radius; ++r) {
    for (const auto& x : idx.sphere(r)) elements_.push_back(x);
    prefix_.push_back(elements_.size());
  }
  index_.reserve(elements_.size());
  for (std::size_t i = 0; i < elements_.size(); ++i) index_.emplace(elements_[i].word, i);
}

std::optional<std::size_t> Ball::index_of(const Word& w) const {
  auto it = index_.find(w);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

namespace {

void check_critical_pairs(const GroupSpec& spec, ValidationReport& report) {
  const auto& rules = spec.rules();
  auto record = [&](const Word& overlap, const Element& p, const Element& q) {
    report.confluent = false;
    report.violations.push_back(
        {"confluence", spec.format(overlap),
         "reduces to both " + spec.format(p) + " and " + spec.format(q)});
  };
  for (std::size_t i = 0; i < rules.size(); ++i) {
    for (std::size_t j = 0; j < rules.size(); ++j) {
      const Word& l1 = rules[i].lhs;
      const Word& l2 = rules[j].lhs;
      // proper overlaps: suffix of l1 equals prefix of l2
      for (std::size_t k = 1; k < std::min(l1.size(), l2.size()); ++k) {
        if (l1.compare(l1.size() - k, k, l2, 0, k) != 0) continue;
        const Word overlap = l1 + l2.substr(k);
        const Element p = spec.normalize(rules[i].rhs + l2.substr(k));
        const Element q = spec.normalize(l1.substr(0, l1.size() - k) + rules[j].rhs);
        if (p != q) record(overlap, p, q);
      }
      // inclusion of l2 inside l1
      if (i != j && l2.size() <= l1.size()) {
        for (std::size_t pos = l1.find(l2); pos != Word::npos; pos = l1.find(l2, pos + 1)) {
          const Element p = spec.normalize(rules[i].rhs);
          const Element q =
              spec.normalize(l1.substr(0, pos) + rules[j].rhs + l1.substr(pos + l2.size()));
          if (p != q) record(l1, p, q);
        }
      }
    }
  }
}

}  // namespace

ValidationReport validate_geodesics(const GroupSpec& spec, int radius) {
  ValidationReport report;
  report.radius = radius;
  const std::size_t k = spec.num_generators();

  for (std::size_t g = 0; g < k; ++g) {
    const Gen a = static_cast<Gen>(g);
    Word w{static_cast<char>(a), static_cast<char>(spec.generators().inverse(a))};
    const Element r = spec.normalize(w);
    if (!r.is_identity())
      report.violations.push_back({"inverse", spec.format(w),
                                   "equals e in the group but its normal form has length " +
                                       std::to_string(r.length())});
  }
  check_critical_pairs(spec, report);

  std::unordered_map<Word, int> seen;
  std::vector<Word> frontier{Word{}};
  seen.emplace(Word{}, 0);
  for (int d = 1; d <= radius; ++d) {
    std::vector<Word> next;
    for (const auto& w : frontier) {
      for (std::size_t g = 0; g < k; ++g) {
        Element y = spec.normalize(w + static_cast<char>(g));
        if (seen.count(y.word)) continue;
        if (y.length() != static_cast<std::size_t>(d))
          report.violations.push_back({"length", spec.format(y.word),
                                       "BFS distance " + std::to_string(d) +
                                           " but normal-form length " +
                                           std::to_string(y.length())});
        seen.emplace(y.word, d);
        next.push_back(std::move(y.word));
      }
    }
    frontier = std::move(next);
  }
  report.elements_checked = seen.size();
  return report;
}

void require_geodesic(const GroupSpec& spec, int radius) {
  const auto report = validate_geodesics(spec, radius);
  if (!report.passed()) {
    const auto& v = report.violations.front();
    throw Error(ErrorCode::GeodesicMismatch,
                v.kind + " violation at " + v.witness + ": " + v.detail);
  }
}

RipsReport rips_spot_check(const GroupSpec& spec, int radius, std::size_t triangles,
                           std::uint64_t seed) {
  const Ball ball(spec, radius);
  Rng rng(seed);
  RipsReport report;
  auto side = [&](const Element& x, const Element& y) {
    const Element d = spec.normalize(spec.formal_inverse(x.word) + y.word);
    std::vector<Element> pts;
    for (std::size_t t = 0; t <= d.length(); ++t)
      pts.push_back(spec.normalize(x.word + d.word.substr(0, t)));
    return pts;
  };
  for (std::size_t t = 0; t < triangles; ++t) {
    const Element& x = ball.elements()[rng.below(ball.size())];
    const Element& y = ball.elements()[rng.below(ball.size())];
    const Element& z = ball.elements()[rng.below(ball.size())];
    const std::vector<Element> sides[3] = {side(x, y), side(y, z), side(z, x)};
    bool bad = false;
    for (int s = 0; s < 3; ++s) {
      for (const auto& p : sides[s]) {
        int best = -1;
        for (int o = 0; o < 3; ++o) {
          if (o == s) continue;
          for (const auto& q : sides[o]) {
            const int dq = dist(spec, p, q);
            if (best < 0 || dq < best) best = dq;
          }
        }
        report.max_side_distance = std::max(report.max_side_distance, best);
        if (best > spec.delta()) bad = true;
      }
    }
    ++report.triangles;
    if (bad) ++report.violations;
  }
  return report;
}

}  // namespace horolab
