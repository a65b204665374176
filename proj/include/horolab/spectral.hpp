#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "horolab/block_graph.hpp"
#include "horolab/linalg.hpp"

namespace horolab {

enum class Arithmetic { Exact, Float };
std::string_view to_string(Arithmetic a);

/// Nonnegative weights indexed by block-graph vertices, for level k.
template <class T>
struct DensityVector {
  std::vector<T> weights;
  int level = 0;

  T total() const {
    T s(0);
    for (const auto& w : weights) s += w;
    return s;
  }
  friend bool operator==(const DensityVector&, const DensityVector&) = default;
};

using ExactDensity = DensityVector<Rational>;
using FloatDensity = DensityVector<double>;

FloatDensity to_float(const ExactDensity& v);
ExactDensity normalized(const ExactDensity& v);

// --- growth ---------------------------------------------------------------

struct GrowthData {
  std::vector<std::size_t> sphere_sizes;  // n = 0..maxN
  std::vector<Rational> ratios;           // |S(n+1)| / |S(n)| for n >= 1
  double rate_estimate = 0;               // least-squares slope of ln|S(n)|, top half
};

GrowthData growth_data(const GroupSpec& spec, int maxN,
                       std::size_t element_cap = kDefaultElementCap);
GrowthData growth_data(const SphereIndex& spheres);

// --- period and Perron data ----------------------------------------------

struct PeriodStructure {
  int period = 1;
  /// Strongly connected components that contain a cycle.
  std::vector<std::vector<std::size_t>> recurrent_components;
  std::vector<int> component_periods;
  /// For each recurrent component, its cyclic classes (level mod period).
  std::vector<std::vector<std::vector<std::size_t>>> cyclic_classes;
};

PeriodStructure period_structure(const AdjacencyMatrix& m);

/// lcm over recurrent strongly connected components of their periods.
int find_period(const AdjacencyMatrix& m);

/// Wielandt test on the principal submatrix indexed by `subset`.
bool is_primitive(const AdjacencyMatrix& m, const std::vector<std::size_t>& subset);

/// 0/1 pattern of M^e.
AdjacencyMatrix boolean_power(const AdjacencyMatrix& m, unsigned long e);

/// For each recurrent component and each of its cyclic classes, whether M^p
/// restricted to the class is primitive.
std::vector<std::vector<bool>> cyclic_class_primitivity(const AdjacencyMatrix& m,
                                                        const PeriodStructure& s);

struct PerronResult {
  Arithmetic mode = Arithmetic::Float;
  int p = 1;
  double eigenvalue = 0;  // of M^p
  std::vector<double> vector;  // l1-normalized
  std::optional<Rational> exact_eigenvalue;
  std::optional<std::vector<Rational>> exact_vector;
  std::size_t iterations = 0;
  double residual = 0;  // ||M^p v - lambda v||_1

  /// exp(e(Gamma)) implied by the eigenvalue, i.e. eigenvalue^(1/p).
  double growth_factor() const;
};

struct PerronOptions {
  Arithmetic mode = Arithmetic::Exact;
  double tolerance = 1e-12;
  std::size_t iteration_cap = 100'000;
  std::size_t exact_iteration_cap = 64;
};

/// Power iteration on M^p from the uniform vector. In exact mode the iteration
/// first runs in rationals and reports an exact result when it reaches a fixed
/// point; otherwise it falls back to floating point. Throws NoConvergence.
PerronResult perron(const AdjacencyMatrix& m, int p, const PerronOptions& options = {});

// --- density recursion and the shift ------------------------------------

struct RecursionReport {
  Arithmetic mode = Arithmetic::Exact;
  std::size_t levels_checked = 0;
  std::vector<std::string> violations;
  bool passed() const { return violations.empty(); }
};

/// Checks eta_n = M eta_{n+1} for consecutive entries of `vectors`.
RecursionReport density_recursion_check(const std::vector<ExactDensity>& vectors,
                                        const AdjacencyMatrix& m);
RecursionReport density_recursion_check(const std::vector<FloatDensity>& vectors,
                                        const AdjacencyMatrix& m, double tolerance);

/// Basis of the eventual range of M (the subspace M acts invertibly on).
std::vector<std::vector<Rational>> eventual_range(const AdjacencyMatrix& m);

/// The unique w in the eventual range with M w = v, unnormalized, at level
/// v.level + 1. Throws NotInRecurrentCone when v is outside the range or w has
/// a negative entry.
ExactDensity presolve(const ExactDensity& v, const AdjacencyMatrix& m);
FloatDensity presolve(const FloatDensity& v, const AdjacencyMatrix& m);

/// One application of the shift: presolve, then renormalize to mass 1 at the
/// level of v. `p` is only used to validate that M is square and p >= 1.
ExactDensity alpha_shift(const ExactDensity& v, const AdjacencyMatrix& m, int p);
FloatDensity alpha_shift(const FloatDensity& v, const AdjacencyMatrix& m, int p);

// --- empirical measures u_n -------------------------------------------------

/// Block counts of g.h_n over g in S(e,n), keyed by block serialization.
std::map<std::string, std::size_t> empirical_block_counts(const GroupPtr& spec, int n,
                                                          const BlockShape& shape,
                                                          const SphereIndex* spheres = nullptr);

/// Normalized block densities of u_n as a vector over the graph's vertices.
/// Throws NotClosed if u_n charges a block the graph does not contain.
ExactDensity empirical_block_densities(const GroupPtr& spec, const BlockGraph& graph, int n,
                                       const SphereIndex* spheres = nullptr);

// --- tail masses ------------------------------------------------------------

struct TailMassReport {
  Arithmetic mode = Arithmetic::Exact;
  int kmax = 0;
  std::vector<std::string> level_masses;  // exact text or decimal
  std::vector<double> level_masses_float;
  std::vector<double> tails;  // mass of levels >= k
  double partial_sum = 0;
  std::size_t violations = 0;
  bool passed() const { return violations == 0; }
};

/// Builds eta_k by repeated presolve from an alpha-fixed vector and checks that
/// the normalized level-k mass equals (1 - 1/lambda) lambda^-k.
TailMassReport tail_mass_check(const ExactDensity& eigvec, const AdjacencyMatrix& m,
                               const Rational& lambda, int kmax);
TailMassReport tail_mass_check(const FloatDensity& eigvec, const AdjacencyMatrix& m,
                               double lambda, int kmax, double tolerance);

// --- free-group boundary check ---------------------------------------------

struct QuasiconformalReport {
  Rational original_mass;
  Rational pushforward_mass;
  Rational predicted_factor;
  int horofunction_at_g = 0;
  bool passed() const { return pushforward_mass == predicted_factor * original_mass; }
};

/// Patterson-Sullivan mass of the cylinder [w] in F_r.
Rational patterson_sullivan_mass(int rank, std::size_t word_length);

/// Compares (g_* mu)[w] = mu(g^{-1}[w]) with lambda^(h(e)-h(g)) mu[w], where h
/// is a Busemann function of a ray through w. Requires a free group (NotATree)
/// and w not a prefix of g, so that h(g) is constant on [w].
QuasiconformalReport quasiconformal_check_tree(const GroupPtr& spec, const Element& g,
                                               const Word& cylinder);

// --- generation growth and mass transport ---------------------------------

struct GenerationReport {
  std::vector<std::size_t> direct_counts;   // |Gen_n(h,{e})|
  std::vector<std::string> matrix_counts;   // ||M^n v||_1, exact
  bool equal = true;
  double growth_factor = 0;
  double lower_constant = 0;  // max lambda^n / |Gen_n|
  double upper_constant = 0;  // max |Gen_n| / lambda^n
  bool passed() const { return equal; }
};

GenerationReport generation_growth_check(const GroupPtr& spec, const RayPrefix& ray, int n_max,
                                         const BlockGraph& graph, double growth_factor);

struct MtpReport {
  int n = 0;
  std::size_t sphere_size = 0;
  std::size_t preimage_total = 0;
  std::size_t images_outside_sphere = 0;
  /// block key -> (count over S(e,n), count via preimages of S(e,n-1))
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_block;
  std::size_t missing_edges = 0;
  bool passed() const;
};

/// Mass transport on the support of u_n with f = Par.
MtpReport mtp_check(const GroupPtr& spec, int n, const BlockShape& shape,
                    const BlockGraph* graph = nullptr, const SphereIndex* spheres = nullptr);

}  // namespace horolab
