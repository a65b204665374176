#include "horolab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace horolab {

std::string_view to_string(Arithmetic a) { return a == Arithmetic::Exact ? "exact" : "float"; }

FloatDensity to_float(const ExactDensity& v) {
  FloatDensity out;
  out.level = v.level;
  for (const auto& w : v.weights) out.weights.push_back(to_double(w));
  return out;
}

ExactDensity normalized(const ExactDensity& v) {
  ExactDensity out = v;
  const Rational t = v.total();
  if (t != 0)
    for (auto& w : out.weights) w /= t;
  return out;
}

// ---------------------------------------------------------------------------

GrowthData growth_data(const SphereIndex& spheres) {
  GrowthData g;
  g.sphere_sizes = spheres.sizes();
  const int maxN = spheres.radius_max();
  for (int n = 1; n < maxN; ++n)
    g.ratios.push_back(Rational(g.sphere_sizes[n + 1]) / Rational(g.sphere_sizes[n]));
  const int lo = std::max(1, (maxN + 1) / 2);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, k = 0;
  for (int n = lo; n <= maxN; ++n) {
    const double y = std::log(static_cast<double>(g.sphere_sizes[n]));
    sx += n;
    sy += y;
    sxx += static_cast<double>(n) * n;
    sxy += n * y;
    k += 1;
  }
  const double den = k * sxx - sx * sx;
  g.rate_estimate = den > 0 ? (k * sxy - sx * sy) / den : 0.0;
  return g;
}

GrowthData growth_data(const GroupSpec& spec, int maxN, std::size_t element_cap) {
  return growth_data(SphereIndex(spec, maxN, element_cap));
}

// ---------------------------------------------------------------------------

PeriodStructure period_structure(const AdjacencyMatrix& m) {
  const std::size_t n = m.rows();
  // successors of B are the C with entry (C, B) = 1
  std::vector<std::vector<std::size_t>> succ(n);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t b = 0; b < n; ++b)
      if (m(c, b)) succ[b].push_back(c);

  // Tarjan
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> comps;
  int counter = 0;
  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (std::size_t w : succ[v]) {
      if (index[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::size_t> c;
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp[w] = static_cast<int>(comps.size());
        c.push_back(w);
      } while (w != v);
      std::sort(c.begin(), c.end());
      comps.push_back(std::move(c));
    }
  };
  for (std::size_t v = 0; v < n; ++v)
    if (index[v] < 0) visit(v);

  PeriodStructure out;
  std::sort(comps.begin(), comps.end());
  for (auto& c : comps) {
    const int id = comp[c.front()];
    bool has_cycle = false;
    for (std::size_t v : c)
      for (std::size_t w : succ[v])
        if (comp[w] == id) has_cycle = true;
    if (!has_cycle) continue;
    // BFS levels inside the component; period = gcd of level defects.
    std::unordered_map<std::size_t, long> level;
    std::vector<std::size_t> queue{c.front()};
    level[c.front()] = 0;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const std::size_t v = queue[qi];
      for (std::size_t w : succ[v]) {
        if (comp[w] != id || level.count(w)) continue;
        level[w] = level[v] + 1;
        queue.push_back(w);
      }
    }
    long g = 0;
    for (std::size_t v : c)
      for (std::size_t w : succ[v])
        if (comp[w] == id) g = std::gcd(g, std::labs(level[v] + 1 - level[w]));
    const int d = static_cast<int>(std::max(1L, g));
    std::vector<std::vector<std::size_t>> classes(d);
    for (std::size_t v : c) classes[level[v] % d].push_back(v);
    out.recurrent_components.push_back(c);
    out.component_periods.push_back(d);
    out.cyclic_classes.push_back(std::move(classes));
    out.period = std::lcm(out.period, d);
  }
  return out;
}

int find_period(const AdjacencyMatrix& m) { return period_structure(m).period; }

AdjacencyMatrix boolean_power(const AdjacencyMatrix& m, unsigned long e) {
  const std::size_t k = m.rows();
  auto mul = [k](const AdjacencyMatrix& x, const AdjacencyMatrix& y) {
    AdjacencyMatrix z(k, k, 0);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t l = 0; l < k; ++l)
        if (x(i, l))
          for (std::size_t j = 0; j < k; ++j)
            if (y(l, j)) z(i, j) = 1;
    return z;
  };
  AdjacencyMatrix result = AdjacencyMatrix::identity(k);
  AdjacencyMatrix base(k, k, 0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) base(i, j) = m(i, j) ? 1 : 0;
  while (e) {
    if (e & 1u) result = mul(result, base);
    e >>= 1u;
    if (e) base = mul(base, base);
  }
  return result;
}

bool is_primitive(const AdjacencyMatrix& m, const std::vector<std::size_t>& subset) {
  const std::size_t k = subset.size();
  if (k == 0) return false;
  AdjacencyMatrix a(k, k, 0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) a(i, j) = m(subset[i], subset[j]) ? 1 : 0;
  // Wielandt: primitive iff A^((k-1)^2 + 1) is strictly positive.
  const AdjacencyMatrix r = boolean_power(a, (k - 1) * (k - 1) + 1);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if (!r(i, j)) return false;
  return true;
}

std::vector<std::vector<bool>> cyclic_class_primitivity(const AdjacencyMatrix& m,
                                                        const PeriodStructure& s) {
  const AdjacencyMatrix mp = boolean_power(m, static_cast<unsigned long>(s.period));
  std::vector<std::vector<bool>> out;
  for (const auto& classes : s.cyclic_classes) {
    std::vector<bool> row;
    for (const auto& c : classes) row.push_back(is_primitive(mp, c));
    out.push_back(std::move(row));
  }
  return out;
}

double PerronResult::growth_factor() const { return std::pow(eigenvalue, 1.0 / p); }

PerronResult perron(const AdjacencyMatrix& m, int p, const PerronOptions& options) {
  if (p < 1) throw Error(ErrorCode::ConfigInvalid, "period must be >= 1");
  const std::size_t n = m.rows();
  if (n == 0 || m.cols() != n) throw Error(ErrorCode::ConfigInvalid, "matrix must be square");
  PerronResult out;
  out.p = p;

  if (options.mode == Arithmetic::Exact) {
    const Matrix<Rational> mp = power(m.cast<Rational>(), static_cast<unsigned long>(p));
    std::vector<Rational> v(n, Rational(1, static_cast<long>(n)));
    for (std::size_t it = 1; it <= options.exact_iteration_cap; ++it) {
      std::vector<Rational> w = mp * v;
      const Rational lambda = l1_norm(w);
      if (lambda == 0) break;
      for (auto& x : w) x /= lambda;
      if (w == v) {
        out.mode = Arithmetic::Exact;
        out.iterations = it;
        out.exact_eigenvalue = lambda;
        out.exact_vector = w;
        out.eigenvalue = to_double(lambda);
        for (const auto& x : w) out.vector.push_back(to_double(x));
        out.residual = 0;
        return out;
      }
      v = std::move(w);
    }
  }

  const Matrix<double> mp = power(m.cast<double>(), static_cast<unsigned long>(p));
  std::vector<double> v(n, 1.0 / static_cast<double>(n));
  for (std::size_t it = 1; it <= options.iteration_cap; ++it) {
    std::vector<double> w = mp * v;
    const double lambda = l1_norm(w);
    if (lambda == 0)
      throw Error(ErrorCode::NoConvergence, "M^p is nilpotent on the uniform vector");
    for (auto& x : w) x /= lambda;
    double diff = 0;
    for (std::size_t i = 0; i < n; ++i) diff += std::abs(w[i] - v[i]);
    v = std::move(w);
    if (diff <= options.tolerance) {
      out.mode = Arithmetic::Float;
      out.iterations = it;
      out.vector = v;
      const std::vector<double> mv = mp * v;
      out.eigenvalue = l1_norm(mv);
      double r = 0;
      for (std::size_t i = 0; i < n; ++i) r += std::abs(mv[i] - out.eigenvalue * v[i]);
      out.residual = r;
      return out;
    }
  }
  throw Error(ErrorCode::NoConvergence,
              "power iteration did not converge in " + std::to_string(options.iteration_cap) +
                  " steps");
}

// ---------------------------------------------------------------------------

RecursionReport density_recursion_check(const std::vector<ExactDensity>& vectors,
                                        const AdjacencyMatrix& m) {
  RecursionReport r;
  r.mode = Arithmetic::Exact;
  const Matrix<Rational> mq = m.cast<Rational>();
  for (std::size_t i = 0; i + 1 < vectors.size(); ++i) {
    ++r.levels_checked;
    const auto rhs = mq * vectors[i + 1].weights;
    if (rhs != vectors[i].weights) {
      std::ostringstream s;
      s << "level " << vectors[i].level << ": eta_n differs from M eta_{n+1}";
      r.violations.push_back(s.str());
    }
  }
  return r;
}

RecursionReport density_recursion_check(const std::vector<FloatDensity>& vectors,
                                        const AdjacencyMatrix& m, double tolerance) {
  RecursionReport r;
  r.mode = Arithmetic::Float;
  const Matrix<double> md = m.cast<double>();
  for (std::size_t i = 0; i + 1 < vectors.size(); ++i) {
    ++r.levels_checked;
    const auto rhs = md * vectors[i + 1].weights;
    double err = 0;
    for (std::size_t j = 0; j < rhs.size(); ++j) err += std::abs(rhs[j] - vectors[i].weights[j]);
    if (err > tolerance) {
      std::ostringstream s;
      s << "level " << vectors[i].level << ": ||eta_n - M eta_{n+1}||_1 = " << err;
      r.violations.push_back(s.str());
    }
  }
  return r;
}

std::vector<std::vector<Rational>> eventual_range(const AdjacencyMatrix& m) {
  const std::size_t n = m.rows();
  const Matrix<Rational> mq = m.cast<Rational>();
  std::vector<std::vector<Rational>> basis;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Rational> e(n, Rational(0));
    e[i] = 1;
    basis.push_back(std::move(e));
  }
  while (true) {
    Matrix<Rational> img(n, basis.size());
    for (std::size_t j = 0; j < basis.size(); ++j) {
      const auto col = mq * basis[j];
      for (std::size_t i = 0; i < n; ++i) img(i, j) = col[i];
    }
    auto next = column_space_basis(img);
    if (next.size() == basis.size()) return basis;
    basis = std::move(next);
    if (basis.empty()) return basis;
  }
}

namespace {

Matrix<Rational> basis_matrix(const std::vector<std::vector<Rational>>& basis, std::size_t n) {
  Matrix<Rational> b(n, basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) b(i, j) = basis[j][i];
  return b;
}

}  // namespace

ExactDensity presolve(const ExactDensity& v, const AdjacencyMatrix& m) {
  const std::size_t n = m.rows();
  if (v.weights.size() != n) throw Error(ErrorCode::ConfigInvalid, "vector size mismatch");
  const auto basis = eventual_range(m);
  const Matrix<Rational> b = basis_matrix(basis, n);
  const Matrix<Rational> mb = m.cast<Rational>() * b;
  const auto coeff = solve_exact(mb, v.weights);
  if (!coeff)
    throw Error(ErrorCode::NotInRecurrentCone, "M w = v has no solution in the eventual range");
  ExactDensity w;
  w.level = v.level + 1;
  w.weights = b * *coeff;
  for (const auto& x : w.weights)
    if (x < 0)
      throw Error(ErrorCode::NotInRecurrentCone,
                  "the solution of M w = v has a negative entry " + to_string(x));
  return w;
}

FloatDensity presolve(const FloatDensity& v, const AdjacencyMatrix& m) {
  const std::size_t n = m.rows();
  if (v.weights.size() != n) throw Error(ErrorCode::ConfigInvalid, "vector size mismatch");
  const auto basis = eventual_range(m);
  const std::size_t d = basis.size();
  const Matrix<double> b = basis_matrix(basis, n).cast<double>();
  const Matrix<double> mb = m.cast<double>() * b;
  // normal equations (mb^T mb) c = mb^T v, Gaussian elimination with pivoting
  Matrix<double> a(d, d + 1, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < n; ++k) a(i, j) += mb(k, i) * mb(k, j);
    for (std::size_t k = 0; k < n; ++k) a(i, d) += mb(k, i) * v.weights[k];
  }
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < d; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    for (std::size_t j = 0; j <= d; ++j) std::swap(a(col, j), a(piv, j));
    for (std::size_t r = 0; r < d; ++r) {
      if (r == col) continue;
      const double f = a(r, col) / a(col, col);
      for (std::size_t j = 0; j <= d; ++j) a(r, j) -= f * a(col, j);
    }
  }
  std::vector<double> c(d);
  for (std::size_t i = 0; i < d; ++i) c[i] = a(i, d) / a(i, i);
  FloatDensity w;
  w.level = v.level + 1;
  w.weights = b * c;
  const auto back = m.cast<double>() * w.weights;
  double err = 0, scale = 0;
  for (std::size_t i = 0; i < n; ++i) {
    err += std::abs(back[i] - v.weights[i]);
    scale += std::abs(v.weights[i]);
  }
  if (err > 1e-9 * std::max(1.0, scale))
    throw Error(ErrorCode::NotInRecurrentCone, "M w = v has no solution in the eventual range");
  for (auto& x : w.weights) {
    if (x < -1e-12)
      throw Error(ErrorCode::NotInRecurrentCone, "the solution of M w = v has a negative entry");
    x = std::max(x, 0.0);
  }
  return w;
}

ExactDensity alpha_shift(const ExactDensity& v, const AdjacencyMatrix& m, int p) {
  if (p < 1 || m.rows() != m.cols()) throw Error(ErrorCode::ConfigInvalid, "bad period or matrix");
  ExactDensity w = normalized(presolve(v, m));
  w.level = v.level;
  return w;
}

FloatDensity alpha_shift(const FloatDensity& v, const AdjacencyMatrix& m, int p) {
  if (p < 1 || m.rows() != m.cols()) throw Error(ErrorCode::ConfigInvalid, "bad period or matrix");
  FloatDensity w = presolve(v, m);
  const double t = w.total();
  for (auto& x : w.weights) x /= t;
  w.level = v.level;
  return w;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::size_t> empirical_block_counts(const GroupPtr& spec, int n,
                                                          const BlockShape& shape,
                                                          const SphereIndex* spheres) {
  if (n < shape.H)
    throw Error(ErrorCode::PatchTooSmall, "u_n needs n >= H for the parent chain to exist");
  std::optional<SphereIndex> own;
  if (!spheres || spheres->radius_max() < n) {
    own.emplace(*spec, n);
    spheres = &*own;
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& g : spheres->sphere(n))
    ++counts[block_of(Horofunction::distance_to(spec, g, n), shape).key()];
  return counts;
}

ExactDensity empirical_block_densities(const GroupPtr& spec, const BlockGraph& graph, int n,
                                       const SphereIndex* spheres) {
  const auto shape = BlockShape::make(*spec, graph.H(), graph.W());
  const auto counts = empirical_block_counts(spec, n, shape, spheres);
  std::size_t total = 0;
  for (const auto& [k, c] : counts) total += c;
  ExactDensity out;
  out.level = 0;
  out.weights.assign(graph.size(), Rational(0));
  for (const auto& [k, c] : counts) {
    const auto idx = graph.index_of(k);
    if (!idx) throw Error(ErrorCode::NotClosed, "u_n charges block " + k + " missing from graph");
    out.weights[*idx] = Rational(c) / Rational(total);
  }
  return out;
}

// ---------------------------------------------------------------------------

TailMassReport tail_mass_check(const ExactDensity& eigvec, const AdjacencyMatrix& m,
                               const Rational& lambda, int kmax) {
  TailMassReport r;
  r.mode = Arithmetic::Exact;
  r.kmax = kmax;
  const Rational norm0 = eigvec.total();
  // C = sum_k ||eta_k|| = norm0 / (1 - 1/lambda) under the geometric law
  const Rational C = norm0 / (1 - 1 / lambda);
  ExactDensity eta = eigvec;
  Rational partial = 0;
  Rational lam_pow = 1;
  for (int k = 0; k <= kmax; ++k) {
    if (k > 0) {
      eta = presolve(eta, m);
      lam_pow /= lambda;
    }
    const Rational mass = eta.total() / C;
    const Rational expected = (1 - 1 / lambda) * lam_pow;
    if (mass != expected) ++r.violations;
    partial += mass;
    r.level_masses.push_back(to_string(mass));
    r.level_masses_float.push_back(to_double(mass));
    r.tails.push_back(to_double(lam_pow));
  }
  r.partial_sum = to_double(partial);
  if (std::abs(r.partial_sum - to_double(1 - lam_pow / lambda)) > 1e-12) ++r.violations;
  return r;
}

TailMassReport tail_mass_check(const FloatDensity& eigvec, const AdjacencyMatrix& m,
                               double lambda, int kmax, double tolerance) {
  TailMassReport r;
  r.mode = Arithmetic::Float;
  r.kmax = kmax;
  const double C = eigvec.total() / (1 - 1 / lambda);
  FloatDensity eta = eigvec;
  double partial = 0;
  double lam_pow = 1;
  for (int k = 0; k <= kmax; ++k) {
    if (k > 0) {
      eta = presolve(eta, m);
      lam_pow /= lambda;
    }
    const double mass = eta.total() / C;
    const double expected = (1 - 1 / lambda) * lam_pow;
    if (std::abs(mass - expected) > tolerance * std::max(expected, 1e-300) &&
        std::abs(mass - expected) > tolerance * 1e-3)
      ++r.violations;
    partial += mass;
    std::ostringstream s;
    s.precision(17);
    s << mass;
    r.level_masses.push_back(s.str());
    r.level_masses_float.push_back(mass);
    r.tails.push_back(lam_pow);
  }
  r.partial_sum = partial;
  return r;
}

// ---------------------------------------------------------------------------

Rational patterson_sullivan_mass(int rank, std::size_t word_length) {
  if (word_length == 0) return Rational(1);
  Rational m(1, 2 * rank);
  for (std::size_t i = 1; i < word_length; ++i) m /= (2 * rank - 1);
  return m;
}

QuasiconformalReport quasiconformal_check_tree(const GroupPtr& spec, const Element& g,
                                               const Word& cylinder) {
  if (spec->family() != Family::Free)
    throw Error(ErrorCode::NotATree, "the cylinder check needs a free group");
  const Element w = spec->normalize(cylinder);
  if (w.word != cylinder || w.is_identity())
    throw Error(ErrorCode::ConfigInvalid, "cylinder must be a nonempty reduced word");
  if (g.word.compare(0, w.length(), w.word) == 0 && w.length() <= g.length())
    throw Error(ErrorCode::ConfigInvalid, "cylinder is a prefix of g; h(g) is not constant on it");
  const int r = spec->rank();
  QuasiconformalReport rep;
  rep.original_mass = patterson_sullivan_mass(r, w.length());
  // g^{-1}[w] is the cylinder of the reduced word g^{-1} w.
  const Element u = spec->normalize(spec->formal_inverse(g.word) + w.word);
  rep.pushforward_mass = patterson_sullivan_mass(r, u.length());

  // Busemann function of a ray through w, extended by repeating its last letter.
  Word ray = w.word;
  const int need = static_cast<int>(g.length() + w.length()) + 16 * spec->delta() +
                   default_stabilization_margin(*spec) + 2;
  while (static_cast<int>(ray.size()) < need) ray.push_back(ray.back());
  const auto h = Horofunction::busemann(spec, RayPrefix(*spec, ray));
  rep.horofunction_at_g = h.value(g);
  const int expo = h.value(Element{}) - rep.horofunction_at_g;
  Rational f = 1;
  for (int i = 0; i < std::abs(expo); ++i) f *= (2 * r - 1);
  rep.predicted_factor = expo >= 0 ? f : 1 / f;
  return rep;
}

// ---------------------------------------------------------------------------

GenerationReport generation_growth_check(const GroupPtr& spec, const RayPrefix& ray, int n_max,
                                         const BlockGraph& graph, double growth_factor) {
  GenerationReport rep;
  rep.growth_factor = growth_factor;
  const auto shape = BlockShape::make(*spec, graph.H(), graph.W());
  const auto h = Horofunction::busemann(spec, ray);
  const auto start = graph.index_of(block_of(h, shape).key());
  if (!start) throw Error(ErrorCode::NotClosed, "Block(h) is not a vertex of the graph");

  const SphereIndex spheres(*spec, n_max);
  const Matrix<Rational> m = adjacency_matrix(graph).cast<Rational>();
  std::vector<Rational> v(graph.size(), Rational(0));
  v[*start] = 1;
  for (int n = 0; n <= n_max; ++n) {
    std::size_t count = 0;
    for (const auto& g : spheres.sphere(n)) {
      Element p = g;
      for (int i = 0; i < n; ++i) p = parent_at(h, p);
      if (p.is_identity()) ++count;
    }
    const Rational mc = l1_norm(v);
    rep.direct_counts.push_back(count);
    rep.matrix_counts.push_back(to_string(mc));
    if (mc != Rational(count)) rep.equal = false;
    if (count > 0) {
      const double scale = std::pow(growth_factor, n);
      rep.upper_constant = std::max(rep.upper_constant, static_cast<double>(count) / scale);
      rep.lower_constant = std::max(rep.lower_constant, scale / static_cast<double>(count));
    } else {
      rep.equal = false;
    }
    v = m * v;
  }
  return rep;
}

bool MtpReport::passed() const {
  if (preimage_total != sphere_size || images_outside_sphere != 0 || missing_edges != 0)
    return false;
  for (const auto& [k, c] : per_block)
    if (c.first != c.second) return false;
  return true;
}

MtpReport mtp_check(const GroupPtr& spec, int n, const BlockShape& shape, const BlockGraph* graph,
                    const SphereIndex* spheres) {
  if (n < 1) throw Error(ErrorCode::ConfigInvalid, "mtp_check needs n >= 1");
  std::optional<SphereIndex> own;
  if (!spheres || spheres->radius_max() < n) {
    own.emplace(*spec, n);
    spheres = &*own;
  }
  MtpReport rep;
  rep.n = n;
  const auto& top = spheres->sphere(n);
  const auto& below = spheres->sphere(n - 1);
  rep.sphere_size = top.size();
  std::unordered_map<Word, std::size_t> below_index;
  for (std::size_t i = 0; i < below.size(); ++i) below_index.emplace(below[i].word, i);

  const bool blocks = n >= shape.H;
  const bool parent_blocks = n - 1 >= shape.H;
  std::vector<std::vector<std::size_t>> preimages(below.size());
  std::vector<std::string> child_key(top.size());
  for (std::size_t i = 0; i < top.size(); ++i) {
    const auto h = Horofunction::distance_to(spec, top[i], n);
    const Element x = parent_at(h, Element{});
    const Element image = spec->normalize(spec->formal_inverse(x.word) + top[i].word);
    auto it = below_index.find(image.word);
    if (it == below_index.end()) {
      ++rep.images_outside_sphere;
      continue;
    }
    preimages[it->second].push_back(i);
    if (blocks) {
      child_key[i] = block_of(h, shape).key();
      ++rep.per_block[child_key[i]].first;
    }
  }
  for (std::size_t j = 0; j < below.size(); ++j) {
    rep.preimage_total += preimages[j].size();
    if (!blocks) continue;
    std::string parent_key;
    if (parent_blocks)
      parent_key = block_of(Horofunction::distance_to(spec, below[j], n - 1), shape).key();
    for (std::size_t i : preimages[j]) {
      ++rep.per_block[child_key[i]].second;
      if (graph && parent_blocks) {
        const auto from = graph->index_of(parent_key);
        const auto to = graph->index_of(child_key[i]);
        if (!from || !to || !graph->has_edge(*from, *to)) ++rep.missing_edges;
      }
    }
  }
  return rep;
}

}  // namespace horolab
