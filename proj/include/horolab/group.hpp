#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace horolab {

/// Generator index. A Word is a byte string of generator indices, so words
/// hash and compare with the standard string machinery.
using Gen = unsigned char;
using Word = std::string;

/// Shortlex order: shorter first, then lexicographic by generator position.
bool shortlex_less(std::string_view a, std::string_view b);

/// A group element in its canonical (geodesic) normal form.
struct Element {
  Word word;

  std::size_t length() const { return word.size(); }
  bool is_identity() const { return word.empty(); }

  friend bool operator==(const Element&, const Element&) = default;
  friend std::strong_ordering operator<=>(const Element& a, const Element& b) {
    if (a.word.size() != b.word.size()) return a.word.size() <=> b.word.size();
    const int c = a.word.compare(b.word);
    return c < 0 ? std::strong_ordering::less
                 : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
  }
};

struct ElementHash {
  std::size_t operator()(const Element& e) const noexcept {
    return std::hash<std::string>{}(e.word);
  }
};

/// Symmetric generating set with a fixed total order (list position).
class GeneratorSet {
 public:
  GeneratorSet() = default;
  GeneratorSet(std::vector<std::string> labels, std::vector<Gen> inverse);

  std::size_t size() const { return labels_.size(); }
  const std::string& label(Gen g) const { return labels_.at(g); }
  Gen inverse(Gen g) const { return inverse_.at(g); }
  std::optional<Gen> find(std::string_view label) const;
  const std::vector<std::string>& labels() const { return labels_; }
  bool single_char_labels() const { return single_char_; }

 private:
  std::vector<std::string> labels_;
  std::vector<Gen> inverse_;
  bool single_char_ = true;
};

enum class Family { Free, FreeProductOfCyclics, UserSupplied };

std::string_view to_string(Family f);

/// Shortlex-reducing rewrite rule lhs -> rhs.
struct RewriteRule {
  Word lhs;
  Word rhs;
};

/// A finitely generated group given by a terminating rewriting system whose
/// irreducible words are geodesic normal forms.
class GroupSpec {
 public:
  /// Free group on `rank` generators a,A,b,B,... (capital = inverse).
  static GroupSpec free_group(int rank, int delta = 1);
  /// Free product of finite cyclic groups of the given orders (each >= 2).
  /// An order-2 factor contributes one involution, larger orders a pair x, X.
  static GroupSpec free_product_of_cyclics(const std::vector<int>& orders, int delta = 1);
  /// Arbitrary rules; they must be shortlex-reducing. Geodesicity and
  /// confluence are checked separately by validate_geodesics().
  static GroupSpec user_supplied(GeneratorSet generators, std::vector<RewriteRule> rules,
                                 int delta);

  const GeneratorSet& generators() const { return generators_; }
  std::size_t num_generators() const { return generators_.size(); }
  const std::vector<RewriteRule>& rules() const { return rules_; }
  Family family() const { return family_; }
  int delta() const { return delta_; }
  /// Free rank for Family::Free, 0 otherwise.
  int rank() const { return rank_; }
  const std::vector<int>& cyclic_orders() const { return orders_; }

  /// Parses space separated labels, or a bare string when all labels are a
  /// single character. "e" and "" denote the identity.
  Word parse(std::string_view text) const;
  /// Inverse of parse(); the identity is written "e".
  std::string format(const Word& w) const;
  std::string format(const Element& x) const { return format(x.word); }

  Element normalize(std::string_view w) const;
  Element element(std::string_view text) const { return normalize(parse(text)); }
  Element generator(Gen g) const { return normalize(Word(1, static_cast<char>(g))); }
  Element multiply(const Element& x, const Element& y) const;
  Element inverse(const Element& x) const;
  /// Formal inverse of a word (reverse and invert letters), not normalized.
  Word formal_inverse(std::string_view w) const;

 private:
  GroupSpec(GeneratorSet gens, std::vector<RewriteRule> rules, Family family, int delta);

  GeneratorSet generators_;
  std::vector<RewriteRule> rules_;
  std::vector<std::vector<std::size_t>> by_last_;
  Family family_ = Family::UserSupplied;
  int delta_ = 1;
  int rank_ = 0;
  std::vector<int> orders_;
};

/// Word-metric distance: length of normalize(x^-1 y).
int dist(const GroupSpec& spec, const Element& x, const Element& y);

/// Value stored as twice the number, so (y|z)_x is represented exactly.
struct HalfInteger {
  long twice = 0;
  double value() const { return static_cast<double>(twice) / 2.0; }
  friend bool operator==(const HalfInteger&, const HalfInteger&) = default;
  friend auto operator<=>(const HalfInteger&, const HalfInteger&) = default;
};

HalfInteger gromov_product(const GroupSpec& spec, const Element& y, const Element& z,
                           const Element& base);

inline constexpr std::size_t kDefaultElementCap = 20'000'000;

/// Spheres S(e,0..radius_max) in shortlex order.
class SphereIndex {
 public:
  SphereIndex(const GroupSpec& spec, int radius_max,
              std::size_t element_cap = kDefaultElementCap);

  int radius_max() const { return static_cast<int>(spheres_.size()) - 1; }
  const std::vector<Element>& sphere(int n) const { return spheres_.at(n); }
  std::vector<std::size_t> sizes() const;
  std::size_t ball_size(int r) const;

 private:
  std::vector<std::vector<Element>> spheres_;
};

std::vector<Element> sphere(int n, const GroupSpec& spec,
                            std::size_t element_cap = kDefaultElementCap);

/// B(e,R) in shortlex order with constant-time membership lookup. Because the
/// order is shortlex, B(e,r) for r < R is a prefix of the element list.
class Ball {
 public:
  Ball(const GroupSpec& spec, int radius);

  int radius() const { return radius_; }
  const std::vector<Element>& elements() const { return elements_; }
  std::size_t size() const { return elements_.size(); }
  std::size_t size(int r) const { return prefix_.at(r); }
  std::optional<std::size_t> index_of(const Word& w) const;

 private:
  int radius_;
  std::vector<Element> elements_;
  std::vector<std::size_t> prefix_;
  std::unordered_map<Word, std::size_t> index_;
};

struct GeodesicViolation {
  std::string kind;     // "length", "inverse", "confluence"
  std::string witness;  // formatted word
  std::string detail;
};

struct ValidationReport {
  int radius = 0;
  std::size_t elements_checked = 0;
  bool confluent = true;
  std::vector<GeodesicViolation> violations;
  bool passed() const { return violations.empty(); }
};

/// BFS over the Cayley graph compared against normal-form lengths, plus the
/// inverse-pair and critical-pair (confluence) checks on the rule set.
ValidationReport validate_geodesics(const GroupSpec& spec, int radius);

/// Throws GeodesicMismatch with the first witness when validation fails.
void require_geodesic(const GroupSpec& spec, int radius);

struct RipsReport {
  std::size_t triangles = 0;
  std::size_t violations = 0;
  int max_side_distance = 0;
  bool passed() const { return violations == 0; }
};

/// Samples geodesic triangles in B(e,radius) and checks delta-thinness at the
/// vertex level against the declared delta.
RipsReport rips_spot_check(const GroupSpec& spec, int radius, std::size_t triangles,
                           std::uint64_t seed);

}  // namespace horolab
