#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "horolab/experiment.hpp"

namespace py = pybind11;
using namespace horolab;

namespace {

struct Group {
  GroupPtr spec;
};

Group wrap(GroupSpec g) { return Group{std::make_shared<const GroupSpec>(std::move(g))}; }

std::string word_text(const GroupSpec& g, const Element& x) { return g.format(x); }

std::vector<std::vector<int>> matrix_rows(const AdjacencyMatrix& m) {
  std::vector<std::vector<int>> rows(m.rows(), std::vector<int>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
  return rows;
}

AdjacencyMatrix from_rows(const std::vector<std::vector<int>>& rows) {
  AdjacencyMatrix m(rows.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw std::invalid_argument("matrix must be square");
    for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

FiniteQuotient quotient_named(const GroupSpec& g, const std::string& name) {
  if (name == "parity") return FiniteQuotient::parity(g);
  if (name == "trivial") return FiniteQuotient::trivial(g);
  throw Error(ErrorCode::ConfigInvalid, "quotient must be \"parity\" or \"trivial\"");
}

}  // namespace

PYBIND11_MODULE(_horolab, m) {
  m.doc() = "Horofunctions, block codings and spherical averages on hyperbolic groups";

  py::register_exception<Error>(m, "HorolabError", PyExc_RuntimeError);

  py::class_<Group>(m, "Group")
      .def_static("free", [](int rank) { return wrap(GroupSpec::free_group(rank)); },
                  py::arg("rank"))
      .def_static("free_product_of_cyclics",
                  [](const std::vector<int>& orders) {
                    return wrap(GroupSpec::free_product_of_cyclics(orders));
                  },
                  py::arg("orders"))
      .def_static("from_json", [](const std::string& text) { return wrap(group_from_json(text)); })
      .def_static("load", [](const std::string& path) { return wrap(load_group(path)); })
      .def_property_readonly("generators",
                             [](const Group& g) { return g.spec->generators().labels(); })
      .def_property_readonly("delta", [](const Group& g) { return g.spec->delta(); })
      .def("normalize",
           [](const Group& g, const std::string& w) { return word_text(*g.spec, g.spec->element(w)); })
      .def("multiply",
           [](const Group& g, const std::string& x, const std::string& y) {
             return word_text(*g.spec, g.spec->multiply(g.spec->element(x), g.spec->element(y)));
           })
      .def("inverse",
           [](const Group& g, const std::string& x) {
             return word_text(*g.spec, g.spec->inverse(g.spec->element(x)));
           })
      .def("distance",
           [](const Group& g, const std::string& x, const std::string& y) {
             return dist(*g.spec, g.spec->element(x), g.spec->element(y));
           })
      .def("sphere",
           [](const Group& g, int n) {
             std::vector<std::string> out;
             for (const auto& x : sphere(n, *g.spec)) out.push_back(word_text(*g.spec, x));
             return out;
           })
      .def("sphere_sizes",
           [](const Group& g, int n) { return SphereIndex(*g.spec, n).sizes(); })
      .def("validate",
           [](const Group& g, int radius) { return validate_geodesics(*g.spec, radius).passed(); },
           py::arg("radius") = 6);

  m.def(
      "busemann_patch",
      [](const Group& g, const std::string& ray, int R) {
        const auto p = busemann_patch(g.spec, RayPrefix::parse(*g.spec, ray), R);
        py::dict out;
        for (std::size_t i = 0; i < p.size(); ++i)
          out[py::str(word_text(*g.spec, p.elements()[i]))] = p.values()[i];
        return out;
      },
      py::arg("group"), py::arg("ray"), py::arg("radius"));

  m.def(
      "block_graph",
      [](const Group& g, int H, int W, std::size_t seed_rays, int depth, std::uint64_t seed) {
        const auto shape = BlockShape::make(*g.spec, H, W);
        const auto graph =
            enumerate_blocks(g.spec, shape, sample_seed_rays(*g.spec, shape, seed_rays, depth, seed), depth);
        py::dict out;
        std::vector<std::string> keys;
        for (const auto& v : graph.vertices()) keys.push_back(v.key());
        out["vertices"] = keys;
        out["edges"] = graph.edges();
        out["closed"] = graph.closed();
        out["matrix"] = matrix_rows(adjacency_matrix(graph));
        return out;
      },
      py::arg("group"), py::arg("H") = 1, py::arg("W") = 0, py::arg("seed_rays") = 32,
      py::arg("depth") = 16, py::arg("seed") = 1);

  m.def("find_period", [](const std::vector<std::vector<int>>& rows) {
    return find_period(from_rows(rows));
  });

  m.def(
      "perron",
      [](const std::vector<std::vector<int>>& rows, int p, bool exact) {
        PerronOptions o;
        o.mode = exact ? Arithmetic::Exact : Arithmetic::Float;
        const auto r = perron(from_rows(rows), p, o);
        py::dict out;
        out["eigenvalue"] = r.eigenvalue;
        out["vector"] = r.vector;
        out["exact"] = r.exact_eigenvalue.has_value();
        if (r.exact_eigenvalue) {
          out["exact_eigenvalue"] = to_string(*r.exact_eigenvalue);
          std::vector<std::string> v;
          for (const auto& q : *r.exact_vector) v.push_back(to_string(q));
          out["exact_vector"] = v;
        }
        return out;
      },
      py::arg("matrix"), py::arg("p") = 1, py::arg("exact") = true);

  m.def(
      "transversal",
      [](const Group& g, const std::string& quotient) {
        std::vector<std::string> out;
        for (const auto& k : make_transversal(*g.spec, quotient_named(*g.spec, quotient)).K)
          out.push_back(word_text(*g.spec, k));
        return out;
      },
      py::arg("group"), py::arg("quotient") = "parity");

  m.def(
      "spherical_average",
      [](const Group& g, const std::string& action_json, const std::vector<double>& f,
         std::uint32_t x, int n, const std::string& quotient) {
        const auto action = action_from_json(g.spec, action_json);
        const auto K = make_transversal(*g.spec, quotient_named(*g.spec, quotient));
        if (f.size() != action.size()) throw std::invalid_argument("f needs one value per point");
        return spherical_average(action, f, x, n, K);
      },
      py::arg("group"), py::arg("action"), py::arg("f"), py::arg("x"), py::arg("n"),
      py::arg("quotient") = "parity");

  m.def(
      "run",
      [](const std::string& config, const std::string& subcommand, bool dry_run,
         std::optional<std::uint64_t> seed, std::optional<std::string> out) {
        auto c = load_config(config, seed);
        if (out) c.output_dir = *out;
        std::ostringstream log;
        const auto r = run_experiment(c, subcommand, dry_run, log);
        py::dict d;
        d["files"] = r.files_written;
        d["failed"] = r.failed_assertions;
        d["log"] = log.str();
        return d;
      },
      py::arg("config"), py::arg("subcommand") = "all", py::arg("dry_run") = false,
      py::arg("seed") = py::none(), py::arg("out") = py::none());
}
