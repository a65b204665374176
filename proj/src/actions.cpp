#include "horolab/actions.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace horolab {

Permutation::Permutation(std::vector<std::uint32_t> images) : images_(std::move(images)) {
  std::vector<bool> seen(images_.size(), false);
  for (auto y : images_) {
    if (y >= images_.size() || seen[y])
      throw Error(ErrorCode::ActionInvalid, "images do not form a permutation");
    seen[y] = true;
  }
}

Permutation Permutation::identity(std::size_t m) {
  std::vector<std::uint32_t> id(m);
  std::iota(id.begin(), id.end(), 0u);
  return Permutation(std::move(id));
}

Permutation Permutation::parse_cycles(std::string_view text, std::size_t m, int base) {
  std::vector<std::uint32_t> img(m);
  std::iota(img.begin(), img.end(), 0u);
  std::vector<bool> used(m, false);
  std::size_t i = 0;
  auto bad = [&](const std::string& why) {
    return Error(ErrorCode::ActionInvalid, "bad cycle notation '" + std::string(text) + "': " + why);
  };
  auto skip = [&] {
    while (i < text.size() && (std::isspace(static_cast<unsigned char>(text[i])) || text[i] == ','))
      ++i;
  };
  skip();
  while (i < text.size()) {
    if (text[i] != '(') throw bad("expected '('");
    ++i;
    std::vector<std::uint32_t> cycle;
    while (true) {
      skip();
      if (i >= text.size()) throw bad("unterminated cycle");
      if (text[i] == ')') {
        ++i;
        break;
      }
      if (!std::isdigit(static_cast<unsigned char>(text[i]))) throw bad("expected a point");
      long v = 0;
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
        v = v * 10 + (text[i++] - '0');
      v -= base;
      if (v < 0 || static_cast<std::size_t>(v) >= m) throw bad("point out of range");
      if (used[v]) throw bad("point repeated");
      used[v] = true;
      cycle.push_back(static_cast<std::uint32_t>(v));
    }
    for (std::size_t k = 0; k < cycle.size(); ++k) img[cycle[k]] = cycle[(k + 1) % cycle.size()];
    skip();
  }
  return Permutation(std::move(img));
}

Permutation Permutation::inverse() const {
  std::vector<std::uint32_t> inv(images_.size());
  for (std::size_t i = 0; i < images_.size(); ++i) inv[images_[i]] = static_cast<std::uint32_t>(i);
  return Permutation(std::move(inv));
}

bool Permutation::is_identity() const {
  for (std::size_t i = 0; i < images_.size(); ++i)
    if (images_[i] != i) return false;
  return true;
}

std::string Permutation::cycles() const {
  std::ostringstream s;
  std::vector<bool> seen(images_.size(), false);
  for (std::size_t i = 0; i < images_.size(); ++i) {
    if (seen[i] || images_[i] == i) continue;
    s << '(';
    std::size_t j = i;
    bool first = true;
    while (!seen[j]) {
      seen[j] = true;
      s << (first ? "" : " ") << j;
      first = false;
      j = images_[j];
    }
    s << ')';
  }
  const std::string out = s.str();
  return out.empty() ? "()" : out;
}

Permutation operator*(const Permutation& p, const Permutation& q) {
  if (p.size() != q.size()) throw Error(ErrorCode::ActionInvalid, "permutation size mismatch");
  std::vector<std::uint32_t> r(p.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = p(q(i));
  return Permutation(std::move(r));
}

std::vector<Permutation> generated_group(const std::vector<Permutation>& gens) {
  if (gens.empty()) return {Permutation::identity(1)};
  std::vector<Permutation> elems{Permutation::identity(gens.front().size())};
  std::set<Permutation> seen(elems.begin(), elems.end());
  for (std::size_t i = 0; i < elems.size(); ++i)
    for (const auto& s : gens) {
      Permutation p = s * elems[i];
      if (seen.insert(p).second) elems.push_back(std::move(p));
    }
  return elems;
}

std::vector<std::uint32_t> orbit(const std::vector<Permutation>& perms, std::uint32_t x) {
  std::vector<std::uint32_t> out{x};
  std::set<std::uint32_t> seen{x};
  for (std::size_t i = 0; i < out.size(); ++i)
    for (const auto& p : perms)
      if (seen.insert(p(out[i])).second) out.push_back(p(out[i]));
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

FiniteAction::FiniteAction(GroupPtr spec, std::vector<Permutation> perms)
    : spec_(std::move(spec)), perms_(std::move(perms)) {
  const auto& gens = spec_->generators();
  if (perms_.size() != gens.size())
    throw Error(ErrorCode::ActionInvalid, "need one permutation per generator");
  const std::size_t m = perms_.front().size();
  if (m == 0) throw Error(ErrorCode::ActionInvalid, "the action needs at least one point");
  for (std::size_t a = 0; a < perms_.size(); ++a) {
    if (perms_[a].size() != m)
      throw Error(ErrorCode::ActionInvalid, "generator " + gens.label(a) + " acts on " +
                                                std::to_string(perms_[a].size()) + " points, not " +
                                                std::to_string(m));
    if (!(perms_[a] * perms_[gens.inverse(a)]).is_identity())
      throw Error(ErrorCode::ActionInvalid,
                  "perm(" + gens.label(a) + ") is not inverse to perm(" +
                      gens.label(gens.inverse(a)) + ")");
  }
  for (const auto& rule : spec_->rules())
    if (permutation_of(rule.lhs) != permutation_of(rule.rhs))
      throw Error(ErrorCode::ActionInvalid, "relation " + spec_->format(rule.lhs) + " = " +
                                                spec_->format(rule.rhs) + " does not hold");
  if (orbit(perms_, 0).size() != m) throw Error(ErrorCode::ActionInvalid, "action not transitive");
}

FiniteAction FiniteAction::regular(GroupPtr spec, const std::vector<Permutation>& images) {
  const auto elems = generated_group(images);
  std::map<Permutation, std::uint32_t> index;
  for (std::size_t i = 0; i < elems.size(); ++i) index.emplace(elems[i], static_cast<std::uint32_t>(i));
  std::vector<Permutation> perms;
  for (const auto& s : images) {
    std::vector<std::uint32_t> img(elems.size());
    for (std::size_t i = 0; i < elems.size(); ++i) img[i] = index.at(s * elems[i]);
    perms.emplace_back(std::move(img));
  }
  return FiniteAction(std::move(spec), std::move(perms));
}

std::uint32_t FiniteAction::act(const Word& w, std::uint32_t x) const {
  for (auto it = w.rbegin(); it != w.rend(); ++it) x = perms_[static_cast<Gen>(*it)](x);
  return x;
}

Permutation FiniteAction::permutation_of(const Word& w) const {
  Permutation p = Permutation::identity(perms_.front().size());
  for (char c : w) p = p * perms_.at(static_cast<Gen>(c));
  return p;
}

// ---------------------------------------------------------------------------

std::uint32_t FiniteQuotient::image_of(const Word& w) const {
  std::uint32_t x = static_cast<std::uint32_t>(identity);
  for (char c : w) x = table[x][images.at(static_cast<Gen>(c))];
  return x;
}

namespace {

FiniteQuotient from_elements(const std::vector<Permutation>& elems) {
  std::map<Permutation, std::uint32_t> index;
  for (std::size_t i = 0; i < elems.size(); ++i) index.emplace(elems[i], static_cast<std::uint32_t>(i));
  FiniteQuotient q;
  q.order = elems.size();
  q.identity = 0;
  q.table.assign(q.order, std::vector<std::uint32_t>(q.order));
  for (std::size_t i = 0; i < q.order; ++i)
    for (std::size_t j = 0; j < q.order; ++j) q.table[i][j] = index.at(elems[i] * elems[j]);
  return q;
}

}  // namespace

FiniteQuotient FiniteQuotient::parity(const GroupSpec& spec) {
  FiniteQuotient q;
  q.order = 2;
  q.table = {{0, 1}, {1, 0}};
  q.images.assign(spec.num_generators(), 1);
  q.description = "parity";
  return q;
}

FiniteQuotient FiniteQuotient::trivial(const GroupSpec& spec) {
  FiniteQuotient q;
  q.table = {{0}};
  q.images.assign(spec.num_generators(), 0);
  q.description = "trivial";
  return q;
}

FiniteQuotient FiniteQuotient::abelian(const GroupSpec& spec, const std::vector<int>& moduli,
                                       const std::map<Gen, std::vector<int>>& images) {
  std::size_t order = 1;
  for (int n : moduli) {
    if (n < 1) throw Error(ErrorCode::ConfigInvalid, "moduli must be positive");
    order *= static_cast<std::size_t>(n);
  }
  auto encode = [&](std::vector<int> v) {
    std::size_t code = 0;
    for (std::size_t i = 0; i < moduli.size(); ++i)
      code = code * moduli[i] + static_cast<std::size_t>(((v[i] % moduli[i]) + moduli[i]) % moduli[i]);
    return static_cast<std::uint32_t>(code);
  };
  auto decode = [&](std::size_t code) {
    std::vector<int> v(moduli.size());
    for (std::size_t i = moduli.size(); i-- > 0;) {
      v[i] = static_cast<int>(code % moduli[i]);
      code /= moduli[i];
    }
    return v;
  };
  FiniteQuotient q;
  q.order = order;
  q.table.assign(order, std::vector<std::uint32_t>(order));
  for (std::size_t x = 0; x < order; ++x)
    for (std::size_t y = 0; y < order; ++y) {
      auto a = decode(x), b = decode(y);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
      q.table[x][y] = encode(a);
    }
  q.images.assign(spec.num_generators(), 0);
  for (std::size_t g = 0; g < spec.num_generators(); ++g) {
    auto it = images.find(static_cast<Gen>(g));
    if (it != images.end()) {
      if (it->second.size() != moduli.size())
        throw Error(ErrorCode::ConfigInvalid,
                    "image of " + spec.generators().label(g) + " has the wrong arity");
      q.images[g] = encode(it->second);
      continue;
    }
    auto jt = images.find(spec.generators().inverse(static_cast<Gen>(g)));
    if (jt == images.end())
      throw Error(ErrorCode::ConfigInvalid,
                  "no image for " + spec.generators().label(g) + " or its inverse");
    auto neg = jt->second;
    for (auto& v : neg) v = -v;
    q.images[g] = encode(neg);
  }
  q.description = "abelian";
  return q;
}

FiniteQuotient FiniteQuotient::permutations(const GroupSpec& spec,
                                            const std::vector<Permutation>& images) {
  if (images.size() != spec.num_generators())
    throw Error(ErrorCode::ConfigInvalid, "need one permutation image per generator");
  const auto elems = generated_group(images);
  FiniteQuotient q = from_elements(elems);
  for (const auto& s : images)
    q.images.push_back(static_cast<std::uint32_t>(
        std::find(elems.begin(), elems.end(), s) - elems.begin()));
  q.description = "permutations";
  return q;
}

Transversal make_transversal(const GroupSpec& spec, const FiniteQuotient& quotient) {
  if (quotient.images.size() != spec.num_generators())
    throw Error(ErrorCode::ConfigInvalid, "quotient needs one image per generator");
  const auto& gens = spec.generators();
  for (std::size_t a = 0; a < gens.size(); ++a) {
    const Word w{static_cast<char>(a), static_cast<char>(gens.inverse(static_cast<Gen>(a)))};
    if (quotient.image_of(w) != quotient.identity)
      throw Error(ErrorCode::RelationViolated,
                  "inverse pair " + spec.format(w) + " maps to a nonidentity element");
  }
  for (const auto& r : spec.rules())
    if (quotient.image_of(r.lhs) != quotient.image_of(r.rhs))
      throw Error(ErrorCode::RelationViolated, "relator " + spec.format(r.lhs) + " = " +
                                                   spec.format(r.rhs) +
                                                   " maps to a nonidentity element");

  // Size of the image subgroup.
  std::set<std::uint32_t> image{static_cast<std::uint32_t>(quotient.identity)};
  std::vector<std::uint32_t> queue(image.begin(), image.end());
  for (std::size_t i = 0; i < queue.size(); ++i)
    for (auto s : quotient.images) {
      const auto y = quotient.table[queue[i]][s];
      if (image.insert(y).second) queue.push_back(y);
    }

  Transversal t;
  t.quotient = quotient;
  std::set<std::uint32_t> found;
  // A word of length |image| - 1 reaches every image element.
  const SphereIndex spheres(spec, static_cast<int>(image.size()) - 1);
  for (int n = 0; n <= spheres.radius_max() && found.size() < image.size(); ++n)
    for (const auto& g : spheres.sphere(n))
      if (found.insert(quotient.image_of(g.word)).second) t.K.push_back(g);
  return t;
}

// ---------------------------------------------------------------------------

namespace {

const SphereIndex& ensure_spheres(const GroupSpec& spec, int n, const SphereIndex* spheres,
                                  std::optional<SphereIndex>& own) {
  if (spheres && spheres->radius_max() >= n) return *spheres;
  own.emplace(spec, n);
  return *own;
}

}  // namespace

std::vector<std::uint64_t> spherical_counts(const FiniteAction& action, std::uint32_t x, int n,
                                            const Transversal& K, const SphereIndex* spheres) {
  if (x >= action.size()) throw Error(ErrorCode::ConfigInvalid, "point outside X");
  std::optional<SphereIndex> own;
  const auto& sp = ensure_spheres(action.group(), n, spheres, own);
  std::vector<std::uint32_t> starts;
  for (const auto& k : K.K) starts.push_back(action.act(k.word, x));
  std::vector<std::uint64_t> counts(action.size(), 0);
  for (const auto& g : sp.sphere(n))
    for (auto y : starts) ++counts[action.act(g.word, y)];
  return counts;
}

double spherical_average(const FiniteAction& action, const std::vector<double>& f,
                         std::uint32_t x, int n, const Transversal& K,
                         const SphereIndex* spheres) {
  if (f.size() != action.size()) throw Error(ErrorCode::ConfigInvalid, "f must have one value per point");
  const auto counts = spherical_counts(action, x, n, K, spheres);
  std::uint64_t total = 0;
  double s = 0;
  for (std::size_t y = 0; y < counts.size(); ++y) {
    total += counts[y];
    s += f[y] * static_cast<double>(counts[y]);
  }
  return s / static_cast<double>(total);
}

std::vector<ConvergenceRow> convergence_experiment(const FiniteAction& action,
                                                   const std::vector<double>& f, std::uint32_t x,
                                                   const Transversal& K, int n_from, int n_to,
                                                   const SphereIndex* spheres) {
  if (n_from < 0 || n_to < n_from) throw Error(ErrorCode::ConfigInvalid, "bad n_range");
  std::optional<SphereIndex> own;
  const auto& sp = ensure_spheres(action.group(), n_to, spheres, own);
  const double mean = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
  std::vector<ConvergenceRow> rows;
  for (int n = n_from; n <= n_to; ++n) {
    const double avg = spherical_average(action, f, x, n, K, &sp);
    rows.push_back({n, x, avg, std::abs(avg - mean)});
  }
  return rows;
}

JointResult joint_empirical(const FiniteAction& action, std::uint32_t x, const Transversal& K,
                            int n, int R, const BlockShape& shape, const SphereIndex* spheres) {
  if (x >= action.size()) throw Error(ErrorCode::ConfigInvalid, "point outside X");
  if (R < 0) throw Error(ErrorCode::ConfigInvalid, "window radius must be >= 0");
  const GroupSpec& spec = action.group();
  std::optional<SphereIndex> own;
  const auto& sp = ensure_spheres(spec, n, spheres, own);
  const Ball ball(spec, R);
  std::vector<std::uint32_t> starts;
  for (const auto& k : K.K) starts.push_back(action.act(k.word, x));

  const std::size_t m = action.size();
  std::map<std::string, std::vector<std::uint64_t>> table;
  for (const auto& g : sp.sphere(n)) {
    const auto h = Horofunction::distance_to(action.group_ptr(), g, n);
    std::string key = block_of(h, shape).key();
    key += '/';
    const int base = h.value(Element{});
    for (std::size_t i = 0; i < ball.size(); ++i) {
      if (i) key += ',';
      key += std::to_string(h.value(ball.elements()[i]) - base);
    }
    auto& row = table[key];
    if (row.empty()) row.assign(m, 0);
    for (auto y : starts) ++row[action.act(g.word, y)];
  }

  JointResult r;
  r.n = n;
  r.R = R;
  r.second_marginal.assign(m, 0.0);
  for (const auto& [key, row] : table)
    for (auto c : row) r.total += c;
  const double total = static_cast<double>(r.total);
  double tv = 0;
  for (auto& [key, row] : table) {
    const std::uint64_t rs = std::accumulate(row.begin(), row.end(), std::uint64_t{0});
    const double p = static_cast<double>(rs) / total;
    for (std::size_t y = 0; y < m; ++y) {
      const double q = static_cast<double>(row[y]) / total;
      r.second_marginal[y] += q;
      tv += std::abs(q - p / static_cast<double>(m));
    }
    r.patterns.push_back(key);
    r.first_marginal.push_back(p);
    r.counts.push_back(std::move(row));
  }
  r.tv_distance = tv / 2;
  return r;
}

}  // namespace horolab
