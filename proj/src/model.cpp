#include "sspn/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "sspn/random.hpp"

namespace sspn {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'P', 'N'};

uint64_t fnv1a(const char* data, size_t n) {
  uint64_t h = 1469598103934665603ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ull;
  }
  return h;
}

class Writer {
public:
  std::string buf;

  void u8(uint8_t v) { buf.push_back(static_cast<char>(v)); }
  void u16(uint16_t v) { raw(&v, 2); }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void i64(int64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    buf.append(s);
  }

private:
  void raw(const void* p, size_t n) {
    // little-endian hosts only; asserted at load time via the magic layout
    buf.append(static_cast<const char*>(p), n);
  }
};

class Reader {
public:
  Reader(const std::string& bytes, size_t pos) : bytes_(bytes), pos_(pos) {}

  uint8_t u8() { return static_cast<uint8_t>(take(1)[0]); }
  uint16_t u16() { return get<uint16_t>(); }
  uint32_t u32() { return get<uint32_t>(); }
  uint64_t u64() { return get<uint64_t>(); }
  int64_t i64() { return get<int64_t>(); }
  double f64() { return get<double>(); }
  std::string str() {
    uint32_t n = u32();
    const char* p = take(n);
    return std::string(p, n);
  }
  size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

private:
  template <class T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(size_t n) {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("model file truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  const std::string& bytes_;
  size_t pos_;
};

void write_sketch(Writer& w, const SketchVector& s) {
  if (s.config.edges.size() > 64)
    throw std::runtime_error("sketch subsets beyond 64 edges are not serializable");
  w.u8(static_cast<uint8_t>(s.config.kind));
  w.u32(s.config.width);
  w.u32(s.config.copy);
  w.u16(static_cast<uint16_t>(s.config.edges.size()));
  for (uint32_t e : s.config.edges) w.u32(e);
  uint64_t bits = 0;
  for (size_t i = 0; i < s.config.orientations.size(); ++i)
    if (s.config.orientations[i] < 0) bits |= uint64_t{1} << i;
  w.u64(bits);
  uint32_t nnz = 0;
  for (double v : s.counters)
    if (v != 0.0) ++nnz;
  w.u32(nnz);
  for (uint32_t i = 0; i < s.counters.size(); ++i) {
    if (s.counters[i] != 0.0) {
      w.u32(i);
      w.f64(s.counters[i]);
    }
  }
}

SketchVector read_sketch(Reader& r) {
  SketchVector s;
  s.config.kind = static_cast<SketchKind>(r.u8());
  s.config.width = r.u32();
  s.config.copy = r.u32();
  uint16_t nedges = r.u16();
  s.config.edges.resize(nedges);
  for (auto& e : s.config.edges) e = r.u32();
  uint64_t bits = r.u64();
  s.config.orientations.resize(nedges);
  for (size_t i = 0; i < nedges; ++i)
    s.config.orientations[i] = (bits >> i) & 1 ? int8_t{-1} : int8_t{1};
  s.counters.assign(s.config.width, 0.0);
  uint32_t nnz = r.u32();
  for (uint32_t i = 0; i < nnz; ++i) {
    uint32_t idx = r.u32();
    double v = r.f64();
    if (idx >= s.config.width) throw std::runtime_error("sketch index out of range");
    s.counters[idx] = v;
  }
  return s;
}

void write_dictionary(Writer& w, const Dictionary& d) {
  w.u8(static_cast<uint8_t>(d.type));
  w.u64(d.size());
  switch (d.type) {
    case AttrType::integer:
    case AttrType::timestamp:
      for (int64_t v : d.ints) w.i64(v);
      break;
    case AttrType::floating:
      for (double v : d.reals) w.f64(v);
      break;
    case AttrType::categorical:
      for (const auto& v : d.strings) w.str(v);
      break;
  }
}

Dictionary read_dictionary(Reader& r) {
  Dictionary d;
  d.type = static_cast<AttrType>(r.u8());
  uint64_t n = r.u64();
  switch (d.type) {
    case AttrType::integer:
    case AttrType::timestamp:
      d.ints.resize(n);
      for (auto& v : d.ints) v = r.i64();
      break;
    case AttrType::floating:
      d.reals.resize(n);
      for (auto& v : d.reals) v = r.f64();
      break;
    case AttrType::categorical:
      d.strings.resize(n);
      for (auto& v : d.strings) v = r.str();
      break;
  }
  return d;
}

void write_selectivity_leaf(Writer& w, const SelectivityLeaf& leaf) {
  w.u32(leaf.attr);
  w.u64(leaf.row_count);
  w.u64(leaf.null_count);
  w.u64(leaf.distinct_count);
  w.u64(leaf.domain_size);
  w.u16(static_cast<uint16_t>(leaf.levels.size()));
  for (const auto& level : leaf.levels) {
    w.u32(level.width);
    uint32_t nnz = 0;
    for (double v : level.counters)
      if (v != 0.0) ++nnz;
    w.u32(nnz);
    for (uint32_t i = 0; i < level.counters.size(); ++i) {
      if (level.counters[i] != 0.0) {
        w.u32(i);
        w.f64(level.counters[i]);
      }
    }
  }
}

SelectivityLeaf read_selectivity_leaf(Reader& r) {
  SelectivityLeaf leaf;
  leaf.attr = r.u32();
  leaf.row_count = r.u64();
  leaf.null_count = r.u64();
  leaf.distinct_count = r.u64();
  leaf.domain_size = r.u64();
  uint16_t nlevels = r.u16();
  leaf.levels.resize(nlevels);
  for (auto& level : leaf.levels) {
    level.width = r.u32();
    level.counters.assign(level.width, 0.0);
    uint32_t nnz = r.u32();
    for (uint32_t i = 0; i < nnz; ++i) {
      uint32_t idx = r.u32();
      double v = r.f64();
      if (idx >= level.width) throw std::runtime_error("level index out of range");
      level.counters[idx] = v;
    }
  }
  return leaf;
}

void write_sketch_leaf(Writer& w, const SketchLeaf& leaf) {
  w.u16(static_cast<uint16_t>(leaf.attrs.size()));
  for (uint32_t a : leaf.attrs) w.u32(a);
  w.u64(leaf.row_count);
  w.u32(static_cast<uint32_t>(leaf.entries.size()));
  for (const auto& e : leaf.entries) {
    w.u16(static_cast<uint16_t>(e.edges.size()));
    for (uint32_t edge : e.edges) w.u32(edge);
    w.u32(e.copy);
    write_sketch(w, e.agms);
    write_sketch(w, e.countmin);
    write_sketch(w, e.degree);
  }
  w.u8(leaf.has_digest ? 1 : 0);
  if (leaf.has_digest) {
    w.u32(static_cast<uint32_t>(leaf.digest.size()));
    for (const auto& [key, count] : leaf.digest) {
      for (int64_t v : key) w.i64(v);
      w.i64(count);
    }
  }
  w.u16(static_cast<uint16_t>(leaf.attr_selectivity.size()));
  for (const auto& sel : leaf.attr_selectivity) write_selectivity_leaf(w, sel);
}

SketchLeaf read_sketch_leaf(Reader& r) {
  SketchLeaf leaf;
  uint16_t nattrs = r.u16();
  leaf.attrs.resize(nattrs);
  for (auto& a : leaf.attrs) a = r.u32();
  leaf.row_count = r.u64();
  uint32_t nentries = r.u32();
  leaf.entries.resize(nentries);
  for (auto& e : leaf.entries) {
    uint16_t nedges = r.u16();
    e.edges.resize(nedges);
    for (auto& edge : e.edges) edge = r.u32();
    e.copy = r.u32();
    e.agms = read_sketch(r);
    e.countmin = read_sketch(r);
    e.degree = read_sketch(r);
  }
  leaf.has_digest = r.u8() != 0;
  if (leaf.has_digest) {
    uint32_t n = r.u32();
    leaf.digest.resize(n);
    for (auto& [key, count] : leaf.digest) {
      key.resize(nattrs);
      for (auto& v : key) v = r.i64();
      count = r.i64();
    }
  }
  uint16_t nsel = r.u16();
  leaf.attr_selectivity.resize(nsel);
  for (auto& sel : leaf.attr_selectivity) sel = read_selectivity_leaf(r);
  return leaf;
}

void write_node(Writer& w, const SpnNode& node) {
  w.u8(static_cast<uint8_t>(node.type));
  w.u16(static_cast<uint16_t>(node.scope.size()));
  for (uint32_t a : node.scope) w.u32(a);
  w.u64(node.row_count);
  switch (node.type) {
    case SpnNode::Type::sum:
      w.u32(static_cast<uint32_t>(node.children.size()));
      for (uint64_t c : node.child_rows) w.u64(c);
      for (const auto& child : node.children) write_node(w, *child);
      break;
    case SpnNode::Type::product:
      w.u32(static_cast<uint32_t>(node.children.size()));
      for (const auto& child : node.children) write_node(w, *child);
      break;
    case SpnNode::Type::sketch_leaf:
      write_sketch_leaf(w, node.sketch);
      break;
    case SpnNode::Type::selectivity_leaf:
      write_selectivity_leaf(w, node.sel);
      break;
  }
}

std::unique_ptr<SpnNode> read_node(Reader& r) {
  auto node = std::make_unique<SpnNode>();
  node->type = static_cast<SpnNode::Type>(r.u8());
  uint16_t nscope = r.u16();
  node->scope.resize(nscope);
  for (auto& a : node->scope) a = r.u32();
  node->row_count = r.u64();
  switch (node->type) {
    case SpnNode::Type::sum: {
      uint32_t n = r.u32();
      node->child_rows.resize(n);
      for (auto& c : node->child_rows) c = r.u64();
      for (uint32_t i = 0; i < n; ++i) node->children.push_back(read_node(r));
      break;
    }
    case SpnNode::Type::product: {
      uint32_t n = r.u32();
      for (uint32_t i = 0; i < n; ++i) node->children.push_back(read_node(r));
      break;
    }
    case SpnNode::Type::sketch_leaf:
      node->sketch = read_sketch_leaf(r);
      break;
    case SpnNode::Type::selectivity_leaf:
      node->sel = read_selectivity_leaf(r);
      break;
  }
  return node;
}

void write_config(Writer& w, const TrainConfig& cfg) {
  w.f64(cfg.rdc_threshold);
  w.f64(cfg.cluster_fraction);
  w.u8(static_cast<uint8_t>(cfg.cluster_method));
  w.u32(cfg.width);
  w.u32(cfg.copies);
  w.u64(cfg.seed);
  w.u32(cfg.rdc_features);
  w.f64(cfg.rdc_scale);
}

TrainConfig read_config(Reader& r) {
  TrainConfig cfg;
  cfg.rdc_threshold = r.f64();
  cfg.cluster_fraction = r.f64();
  cfg.cluster_method = static_cast<ClusterMethod>(r.u8());
  cfg.width = r.u32();
  cfg.copies = r.u32();
  cfg.seed = r.u64();
  cfg.rdc_features = r.u32();
  cfg.rdc_scale = r.f64();
  return cfg;
}

std::vector<std::vector<EdgeHashAssignment>> derive_assignments(const TrainConfig& cfg,
                                                                const JoinSchema& js) {
  std::vector<std::vector<EdgeHashAssignment>> out(js.edges.size());
  for (uint32_t e = 0; e < js.edges.size(); ++e)
    for (uint32_t c = 0; c < cfg.copies; ++c)
      out[e].push_back(make_edge_assignment(cfg.seed, e, c, cfg.width));
  return out;
}

}  // namespace

RelationInferContext Model::infer_context(uint32_t rel) const {
  RelationInferContext ctx;
  ctx.schema = &schema;
  ctx.join_schema = &join_schema;
  ctx.edge_assign = &edge_assign;
  ctx.master_seed = config.seed;
  ctx.rel = rel;
  return ctx;
}

const SketchVector* Model::root_degree(uint32_t rel, const std::vector<uint32_t>& edges,
                                       uint32_t copy) const {
  for (const auto& rd : relations[rel].root_degrees)
    if (rd.copy == copy && rd.edges == edges) return &rd.sketch;
  return nullptr;
}

Model train_model(const Database& db, const TrainConfig& cfg, TrainTimers* timers) {
  Model m;
  m.config = cfg;
  m.schema = db.schema;
  m.join_schema = db.join_schema;
  m.edge_assign = derive_assignments(cfg, db.join_schema);

  for (uint32_t r = 0; r < db.relations.size(); ++r) {
    const auto& rel = db.relations[r];
    RelationModel rm;
    rm.name = rel.name;
    rm.row_count = rel.row_count;
    for (const auto& col : rel.columns) rm.dicts.push_back(col.dict);

    if (rel.row_count > 0) {
      TrainContext ctx = make_train_context(db.schema, db.join_schema, db, r, cfg,
                                            m.edge_assign, timers);
      std::vector<uint32_t> rows(rel.row_count);
      std::iota(rows.begin(), rows.end(), 0);
      std::vector<uint32_t> scope(rel.columns.size());
      std::iota(scope.begin(), scope.end(), 0);
      rm.spn = train_spn(ctx, std::move(rows), std::move(scope),
                         mix_seed(cfg.seed, 0x400ull, r));

      // exact whole-relation degree sketches back the clamp at inference
      std::vector<uint32_t> all_rows(rel.row_count);
      std::iota(all_rows.begin(), all_rows.end(), 0);
      for (const auto& subset : ctx.subsets) {
        std::vector<std::span<const int64_t>> edge_cols;
        std::vector<int8_t> orientations;
        for (uint32_t e : subset) {
          const JoinEdge& edge = db.join_schema.edges[e];
          edge_cols.push_back(rel.columns[edge_attr_at(edge, r)].codes);
          orientations.push_back(
              edge_orientation_at(db.schema, edge, relation_is_endpoint_a(edge, r)));
        }
        FrequencyTable freq = build_frequency_table(edge_cols, all_rows);
        for (uint32_t copy = 0; copy < cfg.copies; ++copy) {
          std::vector<EdgeHashAssignment> assigns;
          for (uint32_t e : subset) assigns.push_back(m.edge_assign[e][copy]);
          RootDegreeSketch rd;
          rd.edges = subset;
          rd.copy = copy;
          rd.sketch = build_degree(freq, assigns, orientations, cfg.width);
          rm.root_degrees.push_back(std::move(rd));
        }
      }
      std::sort(rm.root_degrees.begin(), rm.root_degrees.end(), [](const auto& a, const auto& b) {
        return std::tie(a.edges, a.copy) < std::tie(b.edges, b.copy);
      });
    }
    m.relations.push_back(std::move(rm));
  }
  return m;
}

std::string serialize_model(const Model& m) {
  Writer w;

  // payload
  Writer p;
  write_config(p, m.config);

  p.u32(static_cast<uint32_t>(m.schema.relations.size()));
  for (const auto& rel : m.schema.relations) {
    p.str(rel.name);
    p.u16(static_cast<uint16_t>(rel.attributes.size()));
    for (const auto& a : rel.attributes) {
      p.str(a.name);
      p.u8(static_cast<uint8_t>(a.type));
      p.u8(a.nullable ? 1 : 0);
    }
  }

  p.u32(static_cast<uint32_t>(m.join_schema.edges.size()));
  for (const auto& e : m.join_schema.edges) {
    p.str(e.id);
    p.u32(e.rel_a);
    p.u32(e.attr_a);
    p.u32(e.rel_b);
    p.u32(e.attr_b);
  }
  p.u32(static_cast<uint32_t>(m.join_schema.templates.size()));
  for (const auto& t : m.join_schema.templates) {
    p.u16(static_cast<uint16_t>(t.size()));
    for (uint32_t e : t) p.u32(e);
  }

  for (const auto& rm : m.relations) {
    p.str(rm.name);
    p.u64(rm.row_count);
    p.u16(static_cast<uint16_t>(rm.dicts.size()));
    for (const auto& d : rm.dicts) write_dictionary(p, d);
    p.u8(rm.spn ? 1 : 0);
    if (rm.spn) write_node(p, *rm.spn);
    p.u32(static_cast<uint32_t>(rm.root_degrees.size()));
    for (const auto& rd : rm.root_degrees) {
      p.u16(static_cast<uint16_t>(rd.edges.size()));
      for (uint32_t e : rd.edges) p.u32(e);
      p.u32(rd.copy);
      write_sketch(p, rd.sketch);
    }
  }

  w.buf.append(kMagic, 4);
  w.u32(kModelVersion);
  w.u64(fnv1a(p.buf.data(), p.buf.size()));
  w.buf.append(p.buf);
  return std::move(w.buf);
}

Model deserialize_model(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw std::runtime_error("not a model file");
  Reader header(bytes, 4);
  uint32_t version = header.u32();
  if (version != kModelVersion)
    throw std::runtime_error("unsupported model version " + std::to_string(version));
  uint64_t checksum = header.u64();
  if (fnv1a(bytes.data() + header.pos(), bytes.size() - header.pos()) != checksum)
    throw std::runtime_error("model checksum mismatch");

  Reader r(bytes, header.pos());
  Model m;
  m.config = read_config(r);

  uint32_t nrel = r.u32();
  for (uint32_t i = 0; i < nrel; ++i) {
    RelationSchema rel;
    rel.name = r.str();
    uint16_t nattr = r.u16();
    for (uint16_t a = 0; a < nattr; ++a) {
      AttrSchema attr;
      attr.name = r.str();
      attr.type = static_cast<AttrType>(r.u8());
      attr.nullable = r.u8() != 0;
      rel.attributes.push_back(std::move(attr));
    }
    m.schema.relations.push_back(std::move(rel));
  }

  uint32_t nedges = r.u32();
  for (uint32_t i = 0; i < nedges; ++i) {
    JoinEdge e;
    e.id = r.str();
    e.rel_a = r.u32();
    e.attr_a = r.u32();
    e.rel_b = r.u32();
    e.attr_b = r.u32();
    m.join_schema.edges.push_back(std::move(e));
  }
  uint32_t ntmpl = r.u32();
  for (uint32_t i = 0; i < ntmpl; ++i) {
    uint16_t n = r.u16();
    std::vector<uint32_t> t(n);
    for (auto& e : t) e = r.u32();
    m.join_schema.templates.push_back(std::move(t));
  }

  for (uint32_t i = 0; i < nrel; ++i) {
    RelationModel rm;
    rm.name = r.str();
    rm.row_count = r.u64();
    uint16_t ndicts = r.u16();
    for (uint16_t d = 0; d < ndicts; ++d) rm.dicts.push_back(read_dictionary(r));
    if (r.u8()) rm.spn = read_node(r);
    uint32_t nrd = r.u32();
    for (uint32_t d = 0; d < nrd; ++d) {
      RootDegreeSketch rd;
      uint16_t ne = r.u16();
      rd.edges.resize(ne);
      for (auto& e : rd.edges) e = r.u32();
      rd.copy = r.u32();
      rd.sketch = read_sketch(r);
      rm.root_degrees.push_back(std::move(rd));
    }
    m.relations.push_back(std::move(rm));
  }
  if (!r.done()) throw std::runtime_error("trailing bytes in model file");

  m.edge_assign = derive_assignments(m.config, m.join_schema);
  return m;
}

void save_model(const Model& m, const std::string& path) {
  std::string bytes = serialize_model(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

uint64_t model_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string& bytes = buf.str();
  if (bytes.size() < 16) throw std::runtime_error("model file truncated");
  uint64_t checksum = 0;
  std::memcpy(&checksum, bytes.data() + 8, 8);
  return checksum;
}

namespace {

const Dictionary& model_dict(const void* ctx, uint32_t rel, uint32_t attr) {
  return static_cast<const Model*>(ctx)->relations[rel].dicts[attr];
}

}  // namespace

DictProvider dict_provider(const Model& m) { return {&m, &model_dict}; }

InferResult model_approx(const Model& m, uint32_t rel, const InferenceRequest& request,
                         InferAudit* audit) {
  const RelationModel& rm = m.relations[rel];
  if (!rm.spn) {
    // empty relation: zero mass
    InferResult r;
    if (request.edges.empty()) {
      r.is_sketch = false;
      r.scalar = 0.0;
      return r;
    }
    r.is_sketch = true;
    r.sketch.config.kind = request.kind;
    r.sketch.config.width = m.config.width;
    r.sketch.config.copy = request.copy;
    r.sketch.config.edges = request.edges;
    for (uint32_t e : request.edges) {
      const JoinEdge& edge = m.join_schema.edges[e];
      r.sketch.config.orientations.push_back(
          edge_orientation_at(m.schema, edge, relation_is_endpoint_a(edge, rel)));
    }
    r.sketch.counters.assign(m.config.width, 0.0);
    return r;
  }
  RelationInferContext ctx = m.infer_context(rel);
  return approx_sketch(ctx, *rm.spn, request, audit);
}

double selection_cardinality(const Model& m, uint32_t rel, const Predicate& predicate) {
  InferenceRequest req;
  req.predicate = &predicate;
  InferResult r = model_approx(m, rel, req);
  return static_cast<double>(m.relations[rel].row_count) * r.scalar;
}

BoundSketches approx_bound_sketches(const Model& m, uint32_t rel,
                                    const std::vector<uint32_t>& edges, uint32_t copy,
                                    const Predicate& predicate, NodeMode mode) {
  InferenceRequest req;
  req.edges = edges;
  req.copy = copy;
  req.mode = mode;
  req.predicate = &predicate;

  req.kind = SketchKind::countmin;
  InferResult cm = model_approx(m, rel, req);
  req.kind = SketchKind::degree;
  InferResult deg = model_approx(m, rel, req);

  BoundSketches out;
  out.countmin = std::move(cm.sketch);
  const SketchVector* root = m.root_degree(rel, edges, copy);
  if (root == nullptr) {
    if (m.relations[rel].spn)
      throw std::runtime_error("missing root degree sketch for the requested subset");
    out.degree = std::move(deg.sketch);  // empty relation: zero sketch stands
    return out;
  }
  out.degree = clamp_degree(deg.sketch, *root);
  return out;
}

}  // namespace sspn
