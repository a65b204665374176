#include "horolab/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace horolab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void invalid(const std::string& ptr, const std::string& why) {
  throw Error(ErrorCode::ConfigInvalid, ptr + ": " + why);
}

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    invalid(where, std::string("not valid JSON (") + e.what() + ")");
  }
}

std::string read_file(const fs::path& path, const std::string& ptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) invalid(ptr, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void allow_keys(const json& obj, const std::string& ptr, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) invalid(ptr, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) invalid(ptr + "/" + k, "unknown field");
  }
}

template <class T>
T get(const json& obj, const char* key, const std::string& ptr, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  const std::string p = ptr + "/" + key;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) invalid(p, "expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) invalid(p, "expected an integer");
      if (it->template get<long long>() < 0 && std::is_unsigned_v<T>)
        invalid(p, "must be nonnegative");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) invalid(p, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) invalid(p, "expected a string");
    }
    return it->template get<T>();
  } catch (const json::exception& e) {
    invalid(p, e.what());
  }
}

template <class T>
T require(const json& obj, const char* key, const std::string& ptr) {
  if (!obj.contains(key)) invalid(ptr + "/" + key, "missing");
  return get<T>(obj, key, ptr, T{});
}

int require_at_least(int v, int lo, const std::string& p) {
  if (v < lo) invalid(p, "must be >= " + std::to_string(lo));
  return v;
}

Word parse_with(const GeneratorSet& gens, const std::string& text, const std::string& ptr) {
  Word w;
  if (text.empty() || text == "e") return w;
  std::vector<std::string> tokens;
  if (text.find(' ') != std::string::npos || !gens.single_char_labels()) {
    std::istringstream s(text);
    std::string t;
    while (s >> t) tokens.push_back(t);
  } else {
    for (char c : text) tokens.emplace_back(1, c);
  }
  for (const auto& t : tokens) {
    if (t == "e") continue;
    auto g = gens.find(t);
    if (!g) invalid(ptr, "unknown generator '" + t + "'");
    w.push_back(static_cast<char>(*g));
  }
  return w;
}

GroupSpec group_from(const json& j, const std::string& ptr) {
  allow_keys(j, ptr, {"family", "rank", "orders", "generators", "inverses", "rules", "delta",
                      "name"});
  const auto family = require<std::string>(j, "family", ptr);
  const int delta = require_at_least(get<int>(j, "delta", ptr, 1), 1, ptr + "/delta");
  try {
    if (family == "free") {
      const int rank = require_at_least(require<int>(j, "rank", ptr), 1, ptr + "/rank");
      return GroupSpec::free_group(rank, delta);
    }
    if (family == "free-product-of-cyclics") {
      if (!j.contains("orders") || !j["orders"].is_array())
        invalid(ptr + "/orders", "expected an array of integers");
      std::vector<int> orders;
      for (std::size_t i = 0; i < j["orders"].size(); ++i) {
        const auto& o = j["orders"][i];
        if (!o.is_number_integer() || o.get<int>() < 2)
          invalid(ptr + "/orders/" + std::to_string(i), "expected an integer >= 2");
        orders.push_back(o.get<int>());
      }
      return GroupSpec::free_product_of_cyclics(orders, delta);
    }
    if (family == "user-supplied") {
      if (!j.contains("generators") || !j["generators"].is_array())
        invalid(ptr + "/generators", "expected an array of labels");
      std::vector<std::string> labels;
      for (const auto& l : j["generators"]) {
        if (!l.is_string()) invalid(ptr + "/generators", "labels must be strings");
        labels.push_back(l.get<std::string>());
      }
      std::vector<Gen> inverse(labels.size());
      for (std::size_t i = 0; i < labels.size(); ++i) inverse[i] = static_cast<Gen>(i);
      if (j.contains("inverses")) {
        const auto& inv = j["inverses"];
        if (!inv.is_object()) invalid(ptr + "/inverses", "expected an object label -> label");
        for (const auto& [k, v] : inv.items()) {
          auto a = std::find(labels.begin(), labels.end(), k);
          if (a == labels.end() || !v.is_string())
            invalid(ptr + "/inverses/" + k, "unknown generator");
          auto b = std::find(labels.begin(), labels.end(), v.get<std::string>());
          if (b == labels.end()) invalid(ptr + "/inverses/" + k, "unknown inverse generator");
          inverse[a - labels.begin()] = static_cast<Gen>(b - labels.begin());
          inverse[b - labels.begin()] = static_cast<Gen>(a - labels.begin());
        }
      }
      GeneratorSet gens(labels, inverse);
      std::vector<RewriteRule> rules;
      if (j.contains("rules")) {
        if (!j["rules"].is_array()) invalid(ptr + "/rules", "expected an array of pairs");
        for (std::size_t i = 0; i < j["rules"].size(); ++i) {
          const auto& r = j["rules"][i];
          const std::string p = ptr + "/rules/" + std::to_string(i);
          if (!r.is_array() || r.size() != 2 || !r[0].is_string() || !r[1].is_string())
            invalid(p, "expected [lhs, rhs]");
          rules.push_back({parse_with(gens, r[0].get<std::string>(), p),
                           parse_with(gens, r[1].get<std::string>(), p)});
        }
      }
      return GroupSpec::user_supplied(std::move(gens), std::move(rules), delta);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    invalid(ptr, e.what());
  }
  invalid(ptr + "/family", "unknown family '" + family + "'");
}

Permutation permutation_from(const json& v, std::size_t m, int base, const std::string& ptr) {
  try {
    if (v.is_string()) return Permutation::parse_cycles(v.get<std::string>(), m, base);
    if (v.is_array()) {
      if (v.size() != m) invalid(ptr, "expected " + std::to_string(m) + " images");
      std::vector<std::uint32_t> img;
      for (const auto& x : v) {
        if (!x.is_number_integer()) invalid(ptr, "images must be integers");
        const long y = x.get<long>() - base;
        if (y < 0) invalid(ptr, "image out of range");
        img.push_back(static_cast<std::uint32_t>(y));
      }
      return Permutation(std::move(img));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    invalid(ptr, e.what());
  }
  invalid(ptr, "expected cycle notation or an image array");
}

/// Per-generator permutations; inverses filled in when missing.
std::vector<Permutation> generator_images(const GroupSpec& spec, const json& gens, std::size_t m,
                                          int base, const std::string& ptr) {
  if (!gens.is_object()) invalid(ptr, "expected an object label -> permutation");
  const auto& set = spec.generators();
  std::vector<std::optional<Permutation>> perms(set.size());
  for (const auto& [k, v] : gens.items()) {
    auto g = set.find(k);
    if (!g) invalid(ptr + "/" + k, "unknown generator");
    perms[*g] = permutation_from(v, m, base, ptr + "/" + k);
  }
  std::vector<Permutation> out;
  for (std::size_t a = 0; a < set.size(); ++a) {
    if (perms[a]) {
      out.push_back(*perms[a]);
    } else if (perms[set.inverse(a)]) {
      out.push_back(perms[set.inverse(a)]->inverse());
    } else {
      invalid(ptr, "no permutation for " + set.label(a) + " or its inverse");
    }
  }
  return out;
}

FiniteAction action_from(const GroupPtr& spec, const json& j, const std::string& ptr) {
  if (j.contains("regular")) {
    allow_keys(j, ptr, {"regular", "name"});
    const auto& r = j["regular"];
    const std::string p = ptr + "/regular";
    allow_keys(r, p, {"degree", "base", "generators"});
    const int degree = require_at_least(require<int>(r, "degree", p), 1, p + "/degree");
    const int base = get<int>(r, "base", p, 0);
    if (!r.contains("generators")) invalid(p + "/generators", "missing");
    auto images = generator_images(*spec, r["generators"], static_cast<std::size_t>(degree), base,
                                   p + "/generators");
    return FiniteAction::regular(spec, images);
  }
  allow_keys(j, ptr, {"m", "base", "generators", "name"});
  const int m = require_at_least(require<int>(j, "m", ptr), 1, ptr + "/m");
  const int base = get<int>(j, "base", ptr, 0);
  if (!j.contains("generators")) invalid(ptr + "/generators", "missing");
  return FiniteAction(spec, generator_images(*spec, j["generators"], static_cast<std::size_t>(m),
                                             base, ptr + "/generators"));
}

FiniteQuotient quotient_from(const GroupSpec& spec, const json& j, const std::string& ptr) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "parity") return FiniteQuotient::parity(spec);
    if (s == "trivial") return FiniteQuotient::trivial(spec);
    invalid(ptr, "unknown quotient '" + s + "'");
  }
  allow_keys(j, ptr, {"kind", "moduli", "images", "degree", "base", "generators"});
  const auto kind = require<std::string>(j, "kind", ptr);
  if (kind == "parity") return FiniteQuotient::parity(spec);
  if (kind == "trivial") return FiniteQuotient::trivial(spec);
  if (kind == "abelian") {
    if (!j.contains("moduli") || !j["moduli"].is_array()) invalid(ptr + "/moduli", "expected array");
    const auto moduli = j["moduli"].get<std::vector<int>>();
    std::map<Gen, std::vector<int>> images;
    if (!j.contains("images") || !j["images"].is_object())
      invalid(ptr + "/images", "expected an object label -> vector");
    for (const auto& [k, v] : j["images"].items()) {
      auto g = spec.generators().find(k);
      if (!g || !v.is_array()) invalid(ptr + "/images/" + k, "unknown generator or bad vector");
      images[*g] = v.get<std::vector<int>>();
    }
    try {
      return FiniteQuotient::abelian(spec, moduli, images);
    } catch (const Error& e) {
      invalid(ptr + "/images", std::string(e.what()).substr(to_string(e.code()).size() + 2));
    }
  }
  if (kind == "permutations") {
    const int degree = require_at_least(require<int>(j, "degree", ptr), 1, ptr + "/degree");
    const int base = get<int>(j, "base", ptr, 0);
    if (!j.contains("generators")) invalid(ptr + "/generators", "missing");
    return FiniteQuotient::permutations(
        spec, generator_images(spec, j["generators"], static_cast<std::size_t>(degree), base,
                               ptr + "/generators"));
  }
  invalid(ptr + "/kind", "unknown quotient kind '" + kind + "'");
}

// --- output helpers ---------------------------------------------------------

std::string fmt(double x) {
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  std::ostringstream s;
  s << std::setprecision(std::numeric_limits<double>::max_digits10) << x;
  return s.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class Writer {
 public:
  Writer(const ExperimentConfig& c, bool dry_run, std::ostream& log, RunResult& result)
      : c_(c), dry_(dry_run), log_(log), result_(result) {}

  std::string csv_header(Arithmetic mode) const {
    return "# horolab seed=" + std::to_string(c_.seed) + " mode=" + std::string(to_string(mode)) +
           "\n";
  }

  void write(const std::string& name, const std::string& body) {
    const fs::path p = c_.output_dir / name;
    if (dry_) {
      log_ << "  would write " << p.string() << "\n";
      return;
    }
    fs::create_directories(c_.output_dir);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorCode::ConfigInvalid, "/output/dir: cannot write " + p.string());
    out << body;
    result_.files_written.push_back(name);
    log_ << "  wrote " << p.string() << "\n";
  }

  void write_json(const std::string& name, json j) {
    j["seed"] = c_.seed;
    write(name, j.dump(2) + "\n");
  }

  void check(bool ok, const std::string& what) {
    log_ << "  [" << (ok ? "ok" : "FAIL") << "] " << what << "\n";
    if (!ok) result_.failed_assertions.push_back(what);
  }

 private:
  const ExperimentConfig& c_;
  bool dry_;
  std::ostream& log_;
  RunResult& result_;
};

json rational_json(const Rational& q) { return to_string(q); }

}  // namespace

GroupSpec group_from_json(const std::string& text, const std::string& where) {
  return group_from(parse_json(text, where), "");
}

GroupSpec load_group(const fs::path& path) {
  return group_from(parse_json(read_file(path, path.string()), path.string()), path.string());
}

FiniteAction action_from_json(const GroupPtr& spec, const std::string& text,
                              const std::string& where) {
  return action_from(spec, parse_json(text, where), "");
}

FiniteAction load_action(const GroupPtr& spec, const fs::path& path) {
  return action_from(spec, parse_json(read_file(path, path.string()), path.string()),
                     path.string());
}

ExperimentConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed_override) {
  const json j = parse_json(read_file(path, "--config"), path.string());
  allow_keys(j, "", {"name", "group", "seed", "output", "spheres", "validate", "blocks",
                     "spectral", "actions"});
  ExperimentConfig c;
  c.path = path;
  const fs::path dir = path.parent_path();

  if (!j.contains("group")) invalid("/group", "missing");
  const json& g = j["group"];
  if (g.is_string()) {
    const fs::path gp = dir / g.get<std::string>();
    c.group = std::make_shared<const GroupSpec>(load_group(gp));
    c.group_description = g.get<std::string>();
  } else {
    c.group = std::make_shared<const GroupSpec>(group_from(g, "/group"));
    c.group_description = g.dump();
  }

  c.seed = get<std::uint64_t>(j, "seed", "", 1);
  if (seed_override) c.seed = *seed_override;

  const json out = j.value("output", json::object());
  allow_keys(out, "/output", {"dir"});
  c.output_dir = get<std::string>(out, "dir", "/output", "out");
  if (c.output_dir.is_relative()) c.output_dir = (dir / c.output_dir).lexically_normal();

  const json sp = j.value("spheres", json::object());
  allow_keys(sp, "/spheres", {"max_n", "dump_max_n"});
  c.spheres_max_n = require_at_least(get<int>(sp, "max_n", "/spheres", c.spheres_max_n), 0,
                                     "/spheres/max_n");
  c.spheres_dump_max_n = require_at_least(
      get<int>(sp, "dump_max_n", "/spheres", c.spheres_dump_max_n), 0, "/spheres/dump_max_n");

  const json va = j.value("validate", json::object());
  allow_keys(va, "/validate", {"radius", "rips_triangles"});
  c.validate_radius = require_at_least(get<int>(va, "radius", "/validate", c.validate_radius), 1,
                                       "/validate/radius");
  c.rips_triangles = get<std::size_t>(va, "rips_triangles", "/validate", c.rips_triangles);

  const json bl = j.value("blocks", json::object());
  allow_keys(bl, "/blocks",
             {"H", "W", "adaptive", "max_H", "seed_rays", "enumeration_depth", "determinism_pairs",
              "determinism_depth", "injectivity_samples", "injectivity_depth",
              "consistency_samples"});
  c.adaptive = get<bool>(bl, "adaptive", "/blocks", false);
  c.block_H = require_at_least(get<int>(bl, "H", "/blocks", 1), 1, "/blocks/H");
  c.block_W = require_at_least(get<int>(bl, "W", "/blocks", 0), 0, "/blocks/W");
  c.max_H = require_at_least(get<int>(bl, "max_H", "/blocks", c.max_H), 1, "/blocks/max_H");
  c.seed_rays = get<std::size_t>(bl, "seed_rays", "/blocks", c.seed_rays);
  c.enumeration_depth = require_at_least(
      get<int>(bl, "enumeration_depth", "/blocks", c.enumeration_depth), 1,
      "/blocks/enumeration_depth");
  c.determinism_pairs = get<std::size_t>(bl, "determinism_pairs", "/blocks", c.determinism_pairs);
  c.determinism_depth = require_at_least(
      get<int>(bl, "determinism_depth", "/blocks", c.determinism_depth), 1,
      "/blocks/determinism_depth");
  c.injectivity_samples =
      get<std::size_t>(bl, "injectivity_samples", "/blocks", c.injectivity_samples);
  c.injectivity_depth = require_at_least(
      get<int>(bl, "injectivity_depth", "/blocks", c.injectivity_depth), 1,
      "/blocks/injectivity_depth");
  c.consistency_samples =
      get<std::size_t>(bl, "consistency_samples", "/blocks", c.consistency_samples);

  const json sc = j.value("spectral", json::object());
  allow_keys(sc, "/spectral",
             {"max_n", "arithmetic", "tolerance", "rate_tolerance", "density_n", "recursion_levels",
              "tail_kmax", "generation_ray", "generation_n_max", "mtp_n_max",
              "quasiconformal_pairs", "quasiconformal_max_g"});
  c.growth_max_n =
      require_at_least(get<int>(sc, "max_n", "/spectral", c.growth_max_n), 2, "/spectral/max_n");
  const auto mode = get<std::string>(sc, "arithmetic", "/spectral", "exact");
  if (mode == "exact") {
    c.arithmetic = Arithmetic::Exact;
  } else if (mode == "float") {
    c.arithmetic = Arithmetic::Float;
  } else {
    invalid("/spectral/arithmetic", "expected \"exact\" or \"float\"");
  }
  c.tolerance = get<double>(sc, "tolerance", "/spectral", c.tolerance);
  if (!(c.tolerance > 0)) invalid("/spectral/tolerance", "must be positive");
  c.rate_tolerance = get<double>(sc, "rate_tolerance", "/spectral", c.rate_tolerance);
  if (sc.contains("density_n")) {
    const auto& d = sc["density_n"];
    if (!d.is_array() || d.size() != 2 || !d[0].is_number_integer() || !d[1].is_number_integer() ||
        d[0].get<int>() < 1 || d[1].get<int>() < d[0].get<int>())
      invalid("/spectral/density_n", "expected [from, to] with 1 <= from <= to");
    c.density_n_from = d[0].get<int>();
    c.density_n_to = d[1].get<int>();
  }
  c.recursion_levels = require_at_least(
      get<int>(sc, "recursion_levels", "/spectral", c.recursion_levels), 1,
      "/spectral/recursion_levels");
  c.tail_kmax =
      require_at_least(get<int>(sc, "tail_kmax", "/spectral", c.tail_kmax), 0, "/spectral/tail_kmax");
  c.generation_ray = get<std::string>(sc, "generation_ray", "/spectral", "");
  if (!c.generation_ray.empty()) {
    try {
      c.group->parse(c.generation_ray);
    } catch (const Error& e) {
      invalid("/spectral/generation_ray", e.what());
    }
  }
  c.generation_n_max = require_at_least(
      get<int>(sc, "generation_n_max", "/spectral", c.generation_n_max), 0,
      "/spectral/generation_n_max");
  c.mtp_n_max =
      require_at_least(get<int>(sc, "mtp_n_max", "/spectral", c.mtp_n_max), 1, "/spectral/mtp_n_max");
  c.quasiconformal_pairs =
      get<std::size_t>(sc, "quasiconformal_pairs", "/spectral", c.quasiconformal_pairs);
  c.quasiconformal_max_g = require_at_least(
      get<int>(sc, "quasiconformal_max_g", "/spectral", c.quasiconformal_max_g), 0,
      "/spectral/quasiconformal_max_g");

  if (j.contains("actions")) {
    if (!j["actions"].is_array()) invalid("/actions", "expected an array");
    for (std::size_t i = 0; i < j["actions"].size(); ++i) {
      const json& a = j["actions"][i];
      const std::string p = "/actions/" + std::to_string(i);
      allow_keys(a, p, {"name", "action", "f", "x", "quotient", "n_range", "joint"});
      ActionRun run;
      run.name = get<std::string>(a, "name", p, "action" + std::to_string(i));
      run.action_path = dir / require<std::string>(a, "action", p);
      FiniteAction action = [&] {
        try {
          return load_action(c.group, run.action_path);
        } catch (const Error& e) {
          if (e.code() == ErrorCode::ConfigInvalid) throw;
          throw Error(e.code(), std::string(e.what()).substr(to_string(e.code()).size() + 2) +
                                    " (" + p + "/action)");
        }
      }();
      const std::size_t m = action.size();

      const json f = a.value("f", json{{"indicator", 0}});
      if (f.is_object() && f.contains("indicator")) {
        allow_keys(f, p + "/f", {"indicator"});
        const auto y = require<std::size_t>(f, "indicator", p + "/f");
        if (y >= m) invalid(p + "/f/indicator", "point outside X");
        run.f.assign(m, 0.0);
        run.f[y] = 1.0;
        run.f_description = "indicator(" + std::to_string(y) + ")";
      } else if (f.is_object() && f.contains("values")) {
        allow_keys(f, p + "/f", {"values"});
        if (!f["values"].is_array() || f["values"].size() != m)
          invalid(p + "/f/values", "expected " + std::to_string(m) + " numbers");
        for (const auto& v : f["values"]) {
          if (!v.is_number()) invalid(p + "/f/values", "expected numbers");
          run.f.push_back(v.get<double>());
        }
        run.f_description = "values";
      } else {
        invalid(p + "/f", "expected {\"indicator\": y} or {\"values\": [...]}");
      }

      const json x = a.value("x", json(0));
      if (x.is_string() && x.get<std::string>() == "all") {
        for (std::uint32_t y = 0; y < m; ++y) run.points.push_back(y);
      } else if (x.is_number_integer() && x.get<long>() >= 0 &&
                 static_cast<std::size_t>(x.get<long>()) < m) {
        run.points.push_back(x.get<std::uint32_t>());
      } else {
        invalid(p + "/x", "expected a point of X or \"all\"");
      }

      try {
        run.quotient = quotient_from(*c.group, a.value("quotient", json("parity")), p + "/quotient");
        make_transversal(*c.group, run.quotient);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigInvalid) throw;
        invalid(p + "/quotient", e.what());
      }

      if (!a.contains("n_range") || !a["n_range"].is_array() || a["n_range"].size() != 2 ||
          !a["n_range"][0].is_number_integer() || !a["n_range"][1].is_number_integer())
        invalid(p + "/n_range", "expected [from, to]");
      run.n_from = a["n_range"][0].get<int>();
      run.n_to = a["n_range"][1].get<int>();
      if (run.n_from < 0 || run.n_to < run.n_from)
        invalid(p + "/n_range", "expected 0 <= from <= to");

      if (a.contains("joint")) {
        const json& jt = a["joint"];
        const std::string q = p + "/joint";
        allow_keys(jt, q, {"R", "H", "W", "n", "slack"});
        run.joint = true;
        run.joint_R = require_at_least(get<int>(jt, "R", q, 2), 0, q + "/R");
        run.joint_H = require_at_least(get<int>(jt, "H", q, 1), 1, q + "/H");
        run.joint_W = require_at_least(get<int>(jt, "W", q, 0), 0, q + "/W");
        run.joint_slack = get<double>(jt, "slack", q, 0.01);
        if (jt.contains("n")) {
          if (!jt["n"].is_array()) invalid(q + "/n", "expected an array");
          for (const auto& v : jt["n"]) {
            if (!v.is_number_integer() || v.get<int>() < run.joint_H)
              invalid(q + "/n", "entries must be integers >= H");
            run.joint_ns.push_back(v.get<int>());
          }
          std::sort(run.joint_ns.begin(), run.joint_ns.end());
        } else {
          for (int n = std::max(run.n_from, run.joint_H); n <= run.n_to; ++n)
            run.joint_ns.push_back(n);
        }
      }
      c.actions.push_back(std::move(run));
    }
  }
  return c;
}

// ---------------------------------------------------------------------------

namespace {

struct BlockStage {
  BlockShape shape;
  std::optional<BlockGraph> graph;
  json report;
};

class Runner {
 public:
  Runner(const ExperimentConfig& c, bool dry_run, std::ostream& log, RunResult& result)
      : c_(c), spec_(c.group), dry_(dry_run), log_(log), w_(c, dry_run, log, result) {}

  void spheres() {
    log_ << "stage spheres: |S(e,n)| for n <= " << c_.spheres_max_n << ", dump n <= "
         << c_.spheres_dump_max_n << "\n";
    if (dry_) return w_.write("spheres.csv", "");
    const SphereIndex& sp = sphere_index(std::max(c_.spheres_max_n, c_.spheres_dump_max_n));
    std::ostringstream csv;
    csv << w_.csv_header(Arithmetic::Exact) << "radius,shortlex_index,word\n";
    for (int n = 0; n <= c_.spheres_dump_max_n; ++n) {
      const auto& s = sp.sphere(n);
      for (std::size_t i = 0; i < s.size(); ++i)
        csv << n << ',' << i << ',' << csv_field(spec_->format(s[i])) << '\n';
    }
    w_.write("spheres.csv", csv.str());
    log_ << "  sizes:";
    for (int n = 0; n <= c_.spheres_max_n; ++n) log_ << ' ' << sp.sphere(n).size();
    log_ << "\n";
  }

  void validate() {
    log_ << "stage validate: geodesic check to radius " << c_.validate_radius << ", "
         << c_.rips_triangles << " Rips triangles\n";
    if (dry_) return w_.write("validate.json", "");
    const auto v = validate_geodesics(*spec_, c_.validate_radius);
    const auto r = rips_spot_check(*spec_, c_.validate_radius, c_.rips_triangles, c_.seed);
    json j;
    j["mode"] = "exact";
    j["group"] = {{"family", to_string(spec_->family())},
                  {"generators", spec_->generators().labels()},
                  {"delta", spec_->delta()}};
    json viol = json::array();
    for (const auto& x : v.violations)
      viol.push_back({{"kind", x.kind}, {"witness", x.witness}, {"detail", x.detail}});
    j["geodesics"] = {{"radius", v.radius},
                      {"elements_checked", v.elements_checked},
                      {"confluent", v.confluent},
                      {"violations", viol},
                      {"passed", v.passed()}};
    j["rips"] = {{"radius", c_.validate_radius},
                 {"triangles", r.triangles},
                 {"violations", r.violations},
                 {"max_side_distance", r.max_side_distance},
                 {"passed", r.passed()}};
    w_.check(v.passed(), "normal forms are geodesic and the rules are confluent");
    w_.check(r.passed(), "sampled triangles are delta-thin");
    w_.write_json("validate.json", j);
  }

  BlockStage& blocks(bool write) {
    if (blocks_) return *blocks_;
    log_ << "stage blocks: " << (c_.adaptive ? "adaptive (H, W)" : "fixed (H, W)") << ", "
         << c_.determinism_pairs << " determinism pairs to depth " << c_.determinism_depth
         << ", injectivity " << c_.injectivity_samples << " rays to depth "
         << c_.injectivity_depth << "\n";
    blocks_.emplace();
    BlockStage& b = *blocks_;
    if (dry_) {
      if (write) {
        w_.write("block_graph.json", "");
        w_.write("adjacency.csv", "");
        w_.write("blocks_report.json", "");
      }
      return b;
    }
    json attempts = json::array();
    auto report_json = [](const DeterminismReport& d) {
      return json{{"H", d.H},
                  {"W", d.W},
                  {"depth", d.depth},
                  {"pairs_tested", d.pairs_tested},
                  {"violations", d.violations},
                  {"witnesses", d.witnesses}};
    };
    bool determinism_ok = false;
    if (c_.adaptive) {
      try {
        auto search = choose_block_parameters(spec_, c_.determinism_pairs, c_.determinism_depth,
                                              c_.seed, c_.max_H);
        for (const auto& a : search.attempts) attempts.push_back(report_json(a));
        b.shape = std::move(search.shape);
        determinism_ok = true;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DeterminismViolated) throw;
        log_ << "  " << e.what() << "\n";
        b.shape = BlockShape::make(*spec_, c_.max_H, c_.max_H - 1);
      }
    } else {
      b.shape = BlockShape::make(*spec_, c_.block_H, c_.block_W);
      const auto d = determinism_test(
          spec_, b.shape, c_.determinism_pairs, c_.determinism_depth,
          default_ray_length(*spec_, b.shape.H, b.shape.W, c_.determinism_depth), c_.seed);
      attempts.push_back(report_json(d));
      determinism_ok = d.passed() && d.pairs_tested == c_.determinism_pairs;
    }
    w_.check(determinism_ok, "determinism: equal blocks have equal descendant block multisets");

    const auto rays = sample_seed_rays(*spec_, b.shape, c_.seed_rays, c_.enumeration_depth, c_.seed);
    b.graph.emplace(enumerate_blocks(spec_, b.shape, rays, c_.enumeration_depth));
    const BlockGraph& g = *b.graph;
    w_.check(g.closed(), "block enumeration closed");

    const auto inj = coding_injectivity_test(spec_, b.shape, c_.injectivity_samples,
                                             c_.injectivity_depth, c_.seed + 1);
    w_.check(inj.passed(), "coding injectivity at depth " + std::to_string(c_.injectivity_depth));
    const auto cons = graph_consistency_check(spec_, g, c_.consistency_samples,
                                              c_.injectivity_depth, c_.seed + 2);
    w_.check(cons.passed(), "graph consistency on sampled rays");

    b.report = {{"mode", "exact"},
                {"H", b.shape.H},
                {"W", b.shape.W},
                {"adaptive", c_.adaptive},
                {"determinism", attempts},
                {"vertices", g.size()},
                {"edges", g.edges().size()},
                {"closed", g.closed()},
                {"injectivity",
                 {{"samples", inj.samples},
                  {"depth", inj.depth},
                  {"compare_radius", inj.compare_radius},
                  {"distinct_codings", inj.distinct_codings},
                  {"collisions", inj.collisions},
                  {"witnesses", inj.witnesses}}},
                {"consistency",
                 {{"samples", cons.samples},
                  {"unknown_blocks", cons.unknown_blocks},
                  {"parent_label_mismatches", cons.parent_label_mismatches},
                  {"child_set_mismatches", cons.child_set_mismatches},
                  {"non_walks", cons.non_walks}}}};
    log_ << "  H=" << b.shape.H << " W=" << b.shape.W << ": " << g.size() << " blocks, "
         << g.edges().size() << " edges\n";
    if (write) {
      json vertices = json::array();
      for (const auto& v : g.vertices()) vertices.push_back(v.key());
      json edges = json::array();
      for (const auto& [from, to] : g.edges()) edges.push_back({from, to});
      w_.write_json("block_graph.json", {{"H", g.H()},
                                         {"W", g.W()},
                                         {"closed", g.closed()},
                                         {"vertices", vertices},
                                         {"edges", edges}});
      const auto m = adjacency_matrix(g);
      std::ostringstream csv;
      csv << w_.csv_header(Arithmetic::Exact);
      for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) csv << (j ? "," : "") << m(i, j);
        csv << '\n';
      }
      w_.write("adjacency.csv", csv.str());
      w_.write_json("blocks_report.json", b.report);
    }
    return b;
  }

  void spectral() {
    BlockStage& b = blocks(false);
    log_ << "stage spectral: growth to n = " << c_.growth_max_n << ", arithmetic "
         << to_string(c_.arithmetic) << ", tail k <= " << c_.tail_kmax << ", Gen_n n <= "
         << c_.generation_n_max << ", mass transport n <= " << c_.mtp_n_max << "\n";
    if (dry_) {
      w_.write("spectral.json", "");
      w_.write("densities.csv", "");
      return;
    }
    const BlockGraph& g = *b.graph;
    const auto M = adjacency_matrix(g);
    const Arithmetic mode = c_.arithmetic;
    json j;
    j["mode"] = to_string(mode);
    j["H"] = g.H();
    j["W"] = g.W();

    const int max_n = std::max({c_.growth_max_n, c_.density_n_to, c_.mtp_n_max,
                                c_.generation_n_max});
    const SphereIndex& sp = sphere_index(max_n);
    const auto growth = growth_data(sphere_index(c_.growth_max_n));
    json ratios = json::array();
    for (const auto& r : growth.ratios) ratios.push_back(rational_json(r));
    j["growth"] = {{"sphere_sizes", growth.sphere_sizes},
                   {"ratios", ratios},
                   {"rate_estimate", growth.rate_estimate}};

    const auto ps = period_structure(M);
    const auto prim = cyclic_class_primitivity(M, ps);
    bool all_prim = true;
    for (const auto& row : prim)
      for (bool x : row) all_prim = all_prim && x;
    j["period"] = {{"p", ps.period},
                   {"recurrent_components", ps.recurrent_components},
                   {"component_periods", ps.component_periods},
                   {"cyclic_classes", ps.cyclic_classes},
                   {"classes_primitive", prim}};
    w_.check(all_prim, "M^p is primitive on every cyclic class");

    PerronOptions opt;
    opt.mode = mode;
    opt.tolerance = c_.tolerance;
    const auto pr = perron(M, ps.period, opt);
    const double log_rate = std::log(pr.eigenvalue) / pr.p;
    j["perron"] = {{"mode", to_string(pr.mode)},
                   {"p", pr.p},
                   {"eigenvalue", pr.eigenvalue},
                   {"vector", pr.vector},
                   {"iterations", pr.iterations},
                   {"residual", pr.residual},
                   {"growth_factor", pr.growth_factor()},
                   {"log_eigenvalue_over_p", log_rate},
                   {"rate_tolerance", c_.rate_tolerance}};
    if (pr.exact_eigenvalue) {
      j["perron"]["exact_eigenvalue"] = rational_json(*pr.exact_eigenvalue);
      json ev = json::array();
      for (const auto& x : *pr.exact_vector) ev.push_back(rational_json(x));
      j["perron"]["exact_vector"] = ev;
    }
    w_.check(std::abs(log_rate - growth.rate_estimate) <= c_.rate_tolerance,
             "ln(eigenvalue)/p matches the growth rate estimate");
    w_.check(pr.residual <= 1e-10 * pr.eigenvalue, "Perron residual");
    log_ << "  p=" << pr.p << " eigenvalue=" << fmt(pr.eigenvalue) << " (" << to_string(pr.mode)
         << ")\n";

    // Invariant vectors, the shift and the recursion.
    std::vector<std::string> recursion_violations;
    bool alpha_fixed = false;
    json tail;
    if (pr.exact_vector) {
      ExactDensity v{*pr.exact_vector, 0};
      ExactDensity a = v;
      for (int i = 0; i < pr.p; ++i) a = alpha_shift(a, M, pr.p);
      alpha_fixed = a == v;
      std::vector<ExactDensity> levels{v};
      for (int k = 1; k <= c_.recursion_levels; ++k) levels.push_back(presolve(levels.back(), M));
      recursion_violations = density_recursion_check(levels, M).violations;
      const Rational lambda = *pr.exact_eigenvalue;
      if (pr.p == 1) {
        const auto t = tail_mass_check(v, M, lambda, c_.tail_kmax);
        tail = {{"mode", "exact"},
                {"kmax", t.kmax},
                {"level_masses", t.level_masses},
                {"tails", t.tails},
                {"partial_sum", t.partial_sum},
                {"violations", t.violations}};
        w_.check(t.passed(), "level masses follow (1 - 1/lambda) lambda^-k");
      }
    } else {
      FloatDensity v{pr.vector, 0};
      FloatDensity a = v;
      for (int i = 0; i < pr.p; ++i) a = alpha_shift(a, M, pr.p);
      double err = 0;
      for (std::size_t i = 0; i < v.weights.size(); ++i) err += std::abs(a.weights[i] - v.weights[i]);
      alpha_fixed = err <= 1e-9;
      std::vector<FloatDensity> levels{v};
      for (int k = 1; k <= c_.recursion_levels; ++k) levels.push_back(presolve(levels.back(), M));
      recursion_violations = density_recursion_check(levels, M, 1e-9).violations;
      if (pr.p == 1) {
        const auto t = tail_mass_check(v, M, pr.eigenvalue, c_.tail_kmax, 1e-9);
        tail = {{"mode", "float"},
                {"kmax", t.kmax},
                {"level_masses", t.level_masses},
                {"tails", t.tails},
                {"partial_sum", t.partial_sum},
                {"violations", t.violations}};
        w_.check(t.passed(), "level masses follow (1 - 1/lambda) lambda^-k");
      }
    }
    j["alpha_fixed_point"] = {{"mode", to_string(pr.mode)}, {"holds", alpha_fixed}};
    j["recursion"] = {{"mode", to_string(pr.mode)},
                      {"levels", c_.recursion_levels},
                      {"violations", recursion_violations}};
    if (tail.is_null())
      tail = {{"skipped", "geometric level law needs period 1, got p = " + std::to_string(pr.p)}};
    j["tail_mass"] = tail;
    w_.check(alpha_fixed, "alpha^p fixes the Perron vector");
    w_.check(recursion_violations.empty(), "eta_n = M eta_{n+1} on the invariant vectors");

    // Empirical block densities.
    std::vector<ExactDensity> empirical;
    json diag = json::array();
    for (int n = std::max(c_.density_n_from, g.H()); n <= c_.density_n_to; ++n) {
      empirical.push_back(empirical_block_densities(spec_, g, n, &sp));
      empirical.back().level = n;
      double d = 0;
      for (std::size_t i = 0; i < g.size(); ++i)
        d += std::abs(to_double(empirical.back().weights[i]) - pr.vector[i]);
      diag.push_back({{"n", n}, {"l1_distance_to_perron", d}});
    }
    j["empirical"] = {{"mode", "exact"}, {"diagnostic", diag}};

    // Gen_n against matrix powers.
    {
      Word ray;
      if (!c_.generation_ray.empty()) {
        const Word unit = spec_->parse(c_.generation_ray);
        const int len = default_ray_length(*spec_, g.H(), g.W(), c_.generation_n_max);
        while (static_cast<int>(ray.size()) < len) ray += unit;
      } else {
        Rng rng(c_.seed + 3);
        ray = random_ray(*spec_, default_ray_length(*spec_, g.H(), g.W(), c_.generation_n_max), rng)
                  .word();
      }
      const auto gr = generation_growth_check(spec_, RayPrefix(*spec_, ray), c_.generation_n_max, g,
                                              pr.growth_factor());
      j["generation"] = {{"mode", "exact"},
                         {"ray_prefix", spec_->format(ray.substr(0, 8))},
                         {"direct_counts", gr.direct_counts},
                         {"matrix_counts", gr.matrix_counts},
                         {"equal", gr.equal},
                         {"lower_constant", gr.lower_constant},
                         {"upper_constant", gr.upper_constant}};
      w_.check(gr.passed(), "|Gen_n(h,{e})| = ||M^n v||_1 for n <= " +
                                std::to_string(c_.generation_n_max));
    }

    // Mass transport.
    {
      json rows = json::array();
      bool ok = true;
      for (int n = 1; n <= c_.mtp_n_max; ++n) {
        const auto r = mtp_check(spec_, n, b.shape, &g, &sp);
        ok = ok && r.passed();
        json per = json::object();
        for (const auto& [k, v] : r.per_block) per[k] = {v.first, v.second};
        rows.push_back({{"n", n},
                        {"sphere_size", r.sphere_size},
                        {"preimage_total", r.preimage_total},
                        {"images_outside_sphere", r.images_outside_sphere},
                        {"missing_edges", r.missing_edges},
                        {"per_block", per},
                        {"passed", r.passed()}});
      }
      j["mass_transport"] = {{"mode", "exact"}, {"levels", rows}};
      w_.check(ok, "mass transport for n <= " + std::to_string(c_.mtp_n_max));
    }

    // Patterson-Sullivan cylinders (free groups only).
    if (spec_->family() == Family::Free && c_.quasiconformal_pairs > 0) {
      Rng rng(c_.seed + 4);
      const SphereIndex& small = sphere_index(std::max(c_.quasiconformal_max_g, 4));
      json rows = json::array();
      bool ok = true;
      std::size_t done = 0;
      while (done < c_.quasiconformal_pairs) {
        const int lg = static_cast<int>(rng.below(c_.quasiconformal_max_g + 1));
        const auto& sg = small.sphere(lg);
        const Element gg = sg[rng.below(sg.size())];
        const int lw = 1 + static_cast<int>(rng.below(4));
        const auto& sw = small.sphere(lw);
        const Element w = sw[rng.below(sw.size())];
        if (gg.word.size() >= w.word.size() && gg.word.compare(0, w.word.size(), w.word) == 0)
          continue;
        const auto q = quasiconformal_check_tree(spec_, gg, w.word);
        ok = ok && q.passed();
        rows.push_back({{"g", spec_->format(gg)},
                        {"cylinder", spec_->format(w)},
                        {"original_mass", rational_json(q.original_mass)},
                        {"pushforward_mass", rational_json(q.pushforward_mass)},
                        {"predicted_factor", rational_json(q.predicted_factor)},
                        {"h_g", q.horofunction_at_g},
                        {"passed", q.passed()}});
        ++done;
      }
      j["quasiconformal"] = {{"mode", "exact"}, {"pairs", rows}};
      w_.check(ok, "Patterson-Sullivan cylinder masses transform with lambda^(h(e)-h(g))");
    }
    w_.write_json("spectral.json", j);

    std::ostringstream csv;
    csv << w_.csv_header(pr.mode) << "block,perron";
    for (const auto& e : empirical) csv << ",u_" << e.level;
    csv << '\n';
    for (std::size_t i = 0; i < g.size(); ++i) {
      csv << csv_field(g.vertices()[i].key()) << ','
          << (pr.exact_vector ? to_string((*pr.exact_vector)[i]) : fmt(pr.vector[i]));
      for (const auto& e : empirical) csv << ',' << to_string(e.weights[i]);
      csv << '\n';
    }
    w_.write("densities.csv", csv.str());
  }

  void actions(bool averages, bool joint) {
    for (std::size_t r = 0; r < c_.actions.size(); ++r) {
      const ActionRun& run = c_.actions[r];
      const std::string suffix = c_.actions.size() == 1 ? "" : "-" + run.name;
      log_ << "stage " << (averages ? "average" : "joint") << " [" << run.name << "]: n in ["
           << run.n_from << ", " << run.n_to << "], f = " << run.f_description << ", "
           << run.points.size() << " point(s), quotient " << run.quotient.description << "\n";
      if (dry_) {
        if (averages) w_.write("experiment" + suffix + ".csv", "");
        if (joint && run.joint) w_.write("joint" + suffix + ".json", "");
        continue;
      }
      const FiniteAction action = load_action(spec_, run.action_path);
      const Transversal K = make_transversal(*spec_, run.quotient);
      const int top = std::max(run.n_to, run.joint_ns.empty() ? 0 : run.joint_ns.back());
      const SphereIndex& sp = sphere_index(top);

      std::map<std::pair<int, std::uint32_t>, JointResult> joints;
      if (run.joint) {
        const auto shape = BlockShape::make(*spec_, run.joint_H, run.joint_W);
        for (auto x : run.points)
          for (int n : run.joint_ns)
            joints.emplace(std::make_pair(n, x),
                           joint_empirical(action, x, K, n, run.joint_R, shape, &sp));
      }

      if (averages) {
        std::ostringstream csv;
        csv << w_.csv_header(Arithmetic::Float) << "n,x,average,deviation,tv_distance\n";
        for (auto x : run.points)
          for (const auto& row : convergence_experiment(action, run.f, x, K, run.n_from,
                                                        run.n_to, &sp)) {
            csv << row.n << ',' << row.x << ',' << fmt(row.average) << ',' << fmt(row.deviation)
                << ',';
            auto it = joints.find({row.n, x});
            if (it != joints.end()) csv << fmt(it->second.tv_distance);
            csv << '\n';
          }
        w_.write("experiment" + suffix + ".csv", csv.str());
      }

      if (joint && run.joint) {
        json rows = json::array();
        for (auto x : run.points) {
          double prev = std::numeric_limits<double>::infinity();
          bool monotone = true;
          json series = json::array();
          for (int n : run.joint_ns) {
            const auto& jr = joints.at({n, x});
            monotone = monotone && jr.tv_distance <= prev + run.joint_slack;
            prev = jr.tv_distance;
            series.push_back({{"n", n},
                              {"tv_distance", jr.tv_distance},
                              {"patterns", jr.patterns.size()},
                              {"pairs", jr.total},
                              {"first_marginal", jr.first_marginal},
                              {"second_marginal", jr.second_marginal}});
          }
          rows.push_back({{"x", x}, {"monotone_within_slack", monotone}, {"series", series}});
        }
        w_.write_json("joint" + suffix + ".json", {{"mode", "float"},
                                                   {"R", run.joint_R},
                                                   {"H", run.joint_H},
                                                   {"W", run.joint_W},
                                                   {"slack", run.joint_slack},
                                                   {"points", rows}});
      }
    }
  }

 private:
  const SphereIndex& sphere_index(int n) {
    if (!spheres_ || spheres_->radius_max() < n) spheres_.emplace(*spec_, n);
    return *spheres_;
  }

  const ExperimentConfig& c_;
  GroupPtr spec_;
  bool dry_;
  std::ostream& log_;
  Writer w_;
  std::optional<SphereIndex> spheres_;
  std::optional<BlockStage> blocks_;
};

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const std::string& subcommand,
                         bool dry_run, std::ostream& log) {
  RunResult result;
  Runner r(config, dry_run, log, result);
  const bool all = subcommand == "all";
  if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end())
    throw Error(ErrorCode::ConfigInvalid, "unknown subcommand '" + subcommand + "'");
  if (dry_run) log << "dry run: nothing is written\n";
  if (all || subcommand == "spheres") r.spheres();
  if (all || subcommand == "validate") r.validate();
  if (all || subcommand == "blocks") r.blocks(true);
  if (all || subcommand == "spectral") r.spectral();
  if (all || subcommand == "average" || subcommand == "joint")
    r.actions(all || subcommand == "average", all || subcommand == "joint");
  return result;
}

}  // namespace horolab
