#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sspn/bench.hpp"
#include "sspn/dft.hpp"
#include "sspn/infer.hpp"
#include "sspn/model.hpp"
#include "sspn/rdc.hpp"

namespace py = pybind11;
using namespace sspn;

namespace {

TrainConfig config_from_kwargs(uint64_t seed, uint32_t width, uint32_t copies,
                               double rdc_threshold, double cluster_fraction,
                               const std::string& cluster_method) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.width = width;
  cfg.copies = copies;
  cfg.rdc_threshold = rdc_threshold;
  cfg.cluster_fraction = cluster_fraction;
  cfg.cluster_method = cluster_method_from_string(cluster_method);
  return cfg;
}

struct PyModel {
  Model model;

  std::map<std::string, double> estimate(const std::string& query_json,
                                         const std::string& variant,
                                         const std::string& mode) const {
    QuerySpec q = parse_query(query_json, model.schema, model.join_schema, dict_provider(model));
    EstimateOptions opts;
    opts.variant = variant_from_string(variant);
    opts.mode = mode_from_string(mode);
    auto r = estimate_query(model, q, opts);
    if (!r.ok) throw std::runtime_error(r.error);
    return {{"estimate", r.estimate}, {"time_ms", r.time_ms}};
  }

  double selection_cardinality_of(const std::string& query_json) const {
    QuerySpec q = parse_query(query_json, model.schema, model.join_schema, dict_provider(model));
    if (q.relations.size() != 1)
      throw std::runtime_error("selection cardinality expects a single-relation query");
    return selection_cardinality(model, q.relations[0].rel, q.relations[0].predicate);
  }

  std::vector<double> approx_countmin(const std::string& relation,
                                      const std::string& query_json, uint32_t copy) const {
    QuerySpec q = parse_query(query_json, model.schema, model.join_schema, dict_provider(model));
    int rel = model.schema.relation_index(relation);
    if (rel < 0) throw std::runtime_error("unknown relation " + relation);
    const Predicate* pred = nullptr;
    for (const auto& qr : q.relations)
      if (qr.rel == static_cast<uint32_t>(rel)) pred = &qr.predicate;
    if (pred == nullptr) throw std::runtime_error("relation not present in the query");
    InferenceRequest req;
    req.edges = q.join_graph().incident_edges(0);
    // use the relation's incident edges within the query
    for (size_t v = 0; v < q.relations.size(); ++v)
      if (q.relations[v].rel == static_cast<uint32_t>(rel))
        req.edges = q.join_graph().incident_edges(static_cast<uint32_t>(v));
    req.kind = SketchKind::countmin;
    req.copy = copy;
    req.predicate = pred;
    auto r = model_approx(model, static_cast<uint32_t>(rel), req);
    if (!r.is_sketch) throw std::runtime_error("query gives this relation no join edges");
    return r.sketch.counters;
  }

  std::vector<std::string> relation_names() const {
    std::vector<std::string> out;
    for (const auto& r : model.relations) out.push_back(r.name);
    return out;
  }
};

}  // namespace

PYBIND11_MODULE(_sspn, m) {
  m.doc() = "sketched sum-product networks for join cardinality estimation";

  m.def(
      "train",
      [](const std::string& data_dir, const std::string& schema, const std::string& join_schema,
         const std::string& out, uint64_t seed, uint32_t width, uint32_t copies,
         double rdc_threshold, double cluster_fraction, const std::string& cluster_method) {
        TrainConfig cfg = config_from_kwargs(seed, width, copies, rdc_threshold,
                                             cluster_fraction, cluster_method);
        auto art = train_from_csv(data_dir, schema, join_schema, cfg);
        save_model(art.model, out);
      },
      py::arg("data_dir"), py::arg("schema"), py::arg("join_schema"), py::arg("out"),
      py::arg("seed") = 0, py::arg("width") = 1u << 17, py::arg("copies") = 5,
      py::arg("rdc_threshold") = 0.0, py::arg("cluster_fraction") = 0.1,
      py::arg("cluster_method") = "hard-em",
      "Learn one SPN per relation from a directory of <relation>.csv files.");

  py::class_<PyModel>(m, "Model")
      .def_static("load",
                  [](const std::string& path) {
                    auto pm = std::make_unique<PyModel>();
                    pm->model = load_model(path);
                    return pm;
                  })
      .def("estimate", &PyModel::estimate, py::arg("query_json"),
           py::arg("variant") = "fagms-median", py::arg("mode") = "product",
           "Estimate one JSON query line; returns {'estimate', 'time_ms'}.")
      .def("selection_cardinality", &PyModel::selection_cardinality_of, py::arg("query_json"))
      .def("approx_countmin", &PyModel::approx_countmin, py::arg("relation"),
           py::arg("query_json"), py::arg("copy") = 0,
           "Approximate Count-Min counters of the relation's selection.")
      .def_property_readonly("relations", &PyModel::relation_names)
      .def_property_readonly("width",
                             [](const PyModel& pm) { return pm.model.config.width; })
      .def_property_readonly("copies",
                             [](const PyModel& pm) { return pm.model.config.copies; })
      .def_property_readonly("seed", [](const PyModel& pm) { return pm.model.config.seed; });

  m.def(
      "oracle",
      [](const std::string& data_dir, const std::string& schema_path,
         const std::string& join_schema_path, const std::string& query_json, uint64_t budget) {
        Schema schema = load_schema_json(schema_path);
        JoinSchema js = load_join_schema_json(join_schema_path, schema);
        Database db = ingest(data_dir, schema, js);
        QuerySpec q = parse_query(query_json, schema, js, dict_provider(db));
        auto r = exact_cardinality(db, q, budget);
        if (r.budget_exceeded) throw std::runtime_error("oracle budget exceeded");
        return r.cardinality;
      },
      py::arg("data_dir"), py::arg("schema"), py::arg("join_schema"), py::arg("query_json"),
      py::arg("budget") = kOracleDefaultBudget,
      "Exact cardinality by hash-join evaluation with filters applied first.");

  // sketch and transform primitives
  m.def(
      "location_hash",
      [](uint64_t seed, uint64_t width, const std::vector<int64_t>& values) {
        auto f = make_family(HashKind::location, kDefaultDegree, width, seed);
        std::vector<uint64_t> out;
        out.reserve(values.size());
        for (int64_t v : values) out.push_back(eval_location(f, v));
        return out;
      },
      py::arg("seed"), py::arg("width"), py::arg("values"));
  m.def(
      "sign_hash",
      [](uint64_t seed, const std::vector<int64_t>& values) {
        auto f = make_family(HashKind::sign, kDefaultDegree, 0, seed);
        std::vector<int> out;
        out.reserve(values.size());
        for (int64_t v : values) out.push_back(eval_sign(f, v));
        return out;
      },
      py::arg("seed"), py::arg("values"));
  m.def(
      "dft", [](const std::vector<double>& x) { return dft(x); }, py::arg("values"),
      "Forward unnormalized transform; length must be a power of two.");
  m.def(
      "idft",
      [](std::vector<std::complex<double>> freq) { return idft_real(std::move(freq)); },
      py::arg("values"));
  m.def(
      "rdc",
      [](const std::vector<int64_t>& x, const std::vector<int64_t>& y, uint32_t k, double s,
         uint64_t seed) { return rdc(x, y, k, s, seed); },
      py::arg("x"), py::arg("y"), py::arg("k") = kRdcDefaultFeatures,
      py::arg("s") = kRdcDefaultScale, py::arg("seed") = 0,
      "Randomized dependence coefficient in [0, 1].");
  m.def(
      "dyadic_cover",
      [](int64_t lo, int64_t hi) {
        std::vector<std::tuple<int64_t, int64_t, uint32_t>> out;
        for (const auto& iv : dyadic_cover(lo, hi)) out.push_back({iv.lo, iv.hi, iv.level});
        return out;
      },
      py::arg("lo"), py::arg("hi"),
      "Canonical disjoint dyadic cover of [lo, hi] as (lo, hi, level) tuples.");

  m.attr("__version__") = "0.1.0";
}
