#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "horolab/horofunction.hpp"

namespace horolab {

/// Permutation of {0..m-1}; composition is right to left, (p * q)(i) = p(q(i)).
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<std::uint32_t> images);
  static Permutation identity(std::size_t m);
  /// Cycle notation such as "(0 1)(2 3 4)" or "()"; `base` is the label of
  /// the first point (0 or 1).
  static Permutation parse_cycles(std::string_view text, std::size_t m, int base = 0);

  std::size_t size() const { return images_.size(); }
  std::uint32_t operator()(std::size_t i) const { return images_[i]; }
  const std::vector<std::uint32_t>& images() const { return images_; }
  Permutation inverse() const;
  bool is_identity() const;
  std::string cycles() const;

  friend Permutation operator*(const Permutation& p, const Permutation& q);
  friend bool operator==(const Permutation&, const Permutation&) = default;
  friend auto operator<=>(const Permutation&, const Permutation&) = default;

 private:
  std::vector<std::uint32_t> images_;
};

/// Closure of `gens` under composition, breadth first from the identity, so
/// index 0 is the identity.
std::vector<Permutation> generated_group(const std::vector<Permutation>& gens);

/// A left action of the group on {0..m-1}: a word acts by its letters from
/// right to left.
class FiniteAction {
 public:
  /// Throws ActionInvalid for wrong sizes, broken inverse pairs, violated
  /// relations, or a nontransitive action ("action not transitive").
  FiniteAction(GroupPtr spec, std::vector<Permutation> perms);

  /// The regular action of the permutation group generated by `images`
  /// (indexed by generator) on its own elements by left multiplication.
  static FiniteAction regular(GroupPtr spec, const std::vector<Permutation>& images);

  std::size_t size() const { return perms_.front().size(); }
  const Permutation& perm(Gen g) const { return perms_.at(g); }
  const GroupSpec& group() const { return *spec_; }
  const GroupPtr& group_ptr() const { return spec_; }

  std::uint32_t act(const Word& w, std::uint32_t x) const;
  Permutation permutation_of(const Word& w) const;

 private:
  GroupPtr spec_;
  std::vector<Permutation> perms_;
};

/// Orbit of x under the generators.
std::vector<std::uint32_t> orbit(const std::vector<Permutation>& perms, std::uint32_t x);

/// A homomorphism onto a finite group given by its multiplication table.
struct FiniteQuotient {
  std::size_t order = 1;
  std::size_t identity = 0;
  std::vector<std::vector<std::uint32_t>> table;  // table[x][y] = x * y
  std::vector<std::uint32_t> images;               // per generator
  std::string description;

  std::uint32_t image_of(const Word& w) const;

  /// Every generator maps to the nontrivial element of Z/2.
  static FiniteQuotient parity(const GroupSpec& spec);
  static FiniteQuotient trivial(const GroupSpec& spec);
  /// Z/n1 x ... x Z/nk; images of generators missing from `images` are the
  /// negatives of their inverses' images.
  static FiniteQuotient abelian(const GroupSpec& spec, const std::vector<int>& moduli,
                                const std::map<Gen, std::vector<int>>& images);
  /// The permutation group generated by the images, given per generator.
  static FiniteQuotient permutations(const GroupSpec& spec, const std::vector<Permutation>& images);
};

struct Transversal {
  FiniteQuotient quotient;
  std::vector<Element> K;
};

/// K = shortlex-least preimages of the elements of the image group. Throws
/// RelationViolated when an inverse pair or rewrite rule maps to a
/// nonidentity element.
Transversal make_transversal(const GroupSpec& spec, const FiniteQuotient& quotient);

/// counts[y] = #{(g, k) in S(e,n) x K : g k x = y}.
std::vector<std::uint64_t> spherical_counts(const FiniteAction& action, std::uint32_t x, int n,
                                            const Transversal& K,
                                            const SphereIndex* spheres = nullptr);

double spherical_average(const FiniteAction& action, const std::vector<double>& f,
                         std::uint32_t x, int n, const Transversal& K,
                         const SphereIndex* spheres = nullptr);

struct ConvergenceRow {
  int n = 0;
  std::uint32_t x = 0;
  double average = 0;
  double deviation = 0;
};

std::vector<ConvergenceRow> convergence_experiment(const FiniteAction& action,
                                                   const std::vector<double>& f, std::uint32_t x,
                                                   const Transversal& K, int n_from, int n_to,
                                                   const SphereIndex* spheres = nullptr);

struct JointResult {
  int n = 0;
  int R = 0;
  std::vector<std::string> patterns;              // sorted pattern keys
  std::vector<std::vector<std::uint64_t>> counts;  // [pattern][point]
  std::uint64_t total = 0;
  std::vector<double> first_marginal;
  std::vector<double> second_marginal;
  double tv_distance = 0;
};

/// Joint law of (Block of g.h_n together with its values on B(e,R), g k x)
/// over g in S(e,n), k in K, and its total variation distance from
/// (first marginal) x (uniform on X).
JointResult joint_empirical(const FiniteAction& action, std::uint32_t x, const Transversal& K,
                            int n, int R, const BlockShape& shape,
                            const SphereIndex* spheres = nullptr);

}  // namespace horolab
