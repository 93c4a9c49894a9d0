#include "sspn/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sspn {

using nlohmann::json;

AttrType attr_type_from_string(const std::string& s) {
  if (s == "integer") return AttrType::integer;
  if (s == "float") return AttrType::floating;
  if (s == "categorical") return AttrType::categorical;
  if (s == "timestamp") return AttrType::timestamp;
  throw std::runtime_error("unknown attribute type: " + s);
}

const char* attr_type_name(AttrType t) {
  switch (t) {
    case AttrType::integer: return "integer";
    case AttrType::floating: return "float";
    case AttrType::categorical: return "categorical";
    case AttrType::timestamp: return "timestamp";
  }
  return "?";
}

int RelationSchema::attr_index(const std::string& attr) const {
  for (size_t i = 0; i < attributes.size(); ++i)
    if (attributes[i].name == attr) return static_cast<int>(i);
  return -1;
}

int Schema::relation_index(const std::string& name) const {
  for (size_t i = 0; i < relations.size(); ++i)
    if (relations[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<uint32_t> JoinSchema::incident_edges(uint32_t rel) const {
  std::vector<uint32_t> out;
  for (size_t i = 0; i < edges.size(); ++i)
    if (edges[i].rel_a == rel || edges[i].rel_b == rel) out.push_back(static_cast<uint32_t>(i));
  return out;
}

std::vector<uint32_t> JoinSchema::join_attrs(uint32_t rel) const {
  std::set<uint32_t> attrs;
  for (const auto& e : edges) {
    if (e.rel_a == rel) attrs.insert(e.attr_a);
    if (e.rel_b == rel) attrs.insert(e.attr_b);
  }
  return {attrs.begin(), attrs.end()};
}

std::vector<uint32_t> JoinSchema::edges_at(uint32_t rel, uint32_t attr) const {
  std::vector<uint32_t> out;
  for (size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if ((e.rel_a == rel && e.attr_a == attr) || (e.rel_b == rel && e.attr_b == attr))
      out.push_back(static_cast<uint32_t>(i));
  }
  return out;
}

int JoinSchema::edge_index(const std::string& id) const {
  for (size_t i = 0; i < edges.size(); ++i)
    if (edges[i].id == id) return static_cast<int>(i);
  return -1;
}

namespace {

// days-from-civil (Howard Hinnant's algorithm); avoids timezone surprises
int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

}  // namespace

int64_t parse_timestamp_micros(const std::string& text) {
  // integer epoch-microseconds or "YYYY-MM-DD[ HH:MM:SS[.ffffff]]"
  {
    int64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc() && ptr == text.data() + text.size()) return v;
  }
  int y, mo, d, h = 0, mi = 0, s = 0;
  unsigned long frac = 0;
  char fracbuf[8] = {0};
  int n = std::sscanf(text.c_str(), "%d-%d-%d %d:%d:%d.%6[0-9]", &y, &mo, &d, &h, &mi, &s, fracbuf);
  if (n != 3 && n != 6 && n != 7) throw std::runtime_error("bad timestamp: " + text);
  if (n == 7) {
    frac = std::strtoul(fracbuf, nullptr, 10);
    for (size_t i = std::strlen(fracbuf); i < 6; ++i) frac *= 10;
  }
  int64_t days = days_from_civil(y, mo, d);
  return ((days * 86400 + h * 3600 + mi * 60 + s) * 1000000) + static_cast<int64_t>(frac);
}

Value parse_value(AttrType type, const std::string& text, const std::string& context) {
  switch (type) {
    case AttrType::integer: {
      int64_t v = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || ptr != text.data() + text.size())
        throw std::runtime_error(context + ": bad integer '" + text + "'");
      return v;
    }
    case AttrType::floating: {
      try {
        size_t consumed = 0;
        double v = std::stod(text, &consumed);
        if (consumed != text.size() || std::isnan(v)) throw std::invalid_argument(text);
        return v;
      } catch (const std::exception&) {
        throw std::runtime_error(context + ": bad float '" + text + "'");
      }
    }
    case AttrType::categorical:
      return text;
    case AttrType::timestamp: {
      try {
        return parse_timestamp_micros(text);
      } catch (const std::exception&) {
        throw std::runtime_error(context + ": bad timestamp '" + text + "'");
      }
    }
  }
  throw std::runtime_error(context + ": unknown type");
}

size_t Dictionary::size() const {
  switch (type) {
    case AttrType::integer:
    case AttrType::timestamp: return ints.size();
    case AttrType::floating: return reals.size();
    case AttrType::categorical: return strings.size();
  }
  return 0;
}

namespace {

template <class T, class V>
std::optional<int64_t> exact_code(const std::vector<T>& values, const V& v) {
  auto it = std::lower_bound(values.begin(), values.end(), v);
  if (it == values.end() || *it != v) return std::nullopt;
  return static_cast<int64_t>(it - values.begin());
}

}  // namespace

std::optional<int64_t> Dictionary::code_of(const Value& v) const {
  switch (type) {
    case AttrType::integer:
    case AttrType::timestamp: return exact_code(ints, std::get<int64_t>(v));
    case AttrType::floating: return exact_code(reals, std::get<double>(v));
    case AttrType::categorical: return exact_code(strings, std::get<std::string>(v));
  }
  return std::nullopt;
}

int64_t Dictionary::first_ge(const Value& v) const {
  switch (type) {
    case AttrType::integer:
    case AttrType::timestamp:
      return std::lower_bound(ints.begin(), ints.end(), std::get<int64_t>(v)) - ints.begin();
    case AttrType::floating:
      return std::lower_bound(reals.begin(), reals.end(), std::get<double>(v)) - reals.begin();
    case AttrType::categorical:
      return std::lower_bound(strings.begin(), strings.end(), std::get<std::string>(v)) -
             strings.begin();
  }
  return 0;
}

int64_t Dictionary::first_gt(const Value& v) const {
  switch (type) {
    case AttrType::integer:
    case AttrType::timestamp:
      return std::upper_bound(ints.begin(), ints.end(), std::get<int64_t>(v)) - ints.begin();
    case AttrType::floating:
      return std::upper_bound(reals.begin(), reals.end(), std::get<double>(v)) - reals.begin();
    case AttrType::categorical:
      return std::upper_bound(strings.begin(), strings.end(), std::get<std::string>(v)) -
             strings.begin();
  }
  return 0;
}

Value Dictionary::value_at(int64_t code) const {
  switch (type) {
    case AttrType::integer:
    case AttrType::timestamp: return ints.at(code);
    case AttrType::floating: return reals.at(code);
    case AttrType::categorical: return strings.at(code);
  }
  throw std::out_of_range("bad dictionary code");
}

Schema parse_schema_json(const std::string& text) {
  json j = json::parse(text);
  Schema schema;
  for (const auto& r : j.at("relations")) {
    RelationSchema rel;
    rel.name = r.at("name").get<std::string>();
    for (const auto& a : r.at("attributes")) {
      AttrSchema attr;
      attr.name = a.at("name").get<std::string>();
      attr.type = attr_type_from_string(a.at("type").get<std::string>());
      attr.nullable = a.value("nullable", true);
      if (rel.attr_index(attr.name) >= 0)
        throw std::runtime_error("duplicate attribute " + rel.name + "." + attr.name);
      rel.attributes.push_back(std::move(attr));
    }
    if (schema.relation_index(rel.name) >= 0)
      throw std::runtime_error("duplicate relation " + rel.name);
    schema.relations.push_back(std::move(rel));
  }
  return schema;
}

namespace {

std::pair<uint32_t, uint32_t> resolve_column(const Schema& schema, const std::string& dotted) {
  auto dot = dotted.find('.');
  if (dot == std::string::npos) throw std::runtime_error("expected relation.attribute: " + dotted);
  int rel = schema.relation_index(dotted.substr(0, dot));
  if (rel < 0) throw std::runtime_error("unknown relation in " + dotted);
  int attr = schema.relations[rel].attr_index(dotted.substr(dot + 1));
  if (attr < 0) throw std::runtime_error("unknown attribute in " + dotted);
  return {static_cast<uint32_t>(rel), static_cast<uint32_t>(attr)};
}

}  // namespace

JoinSchema parse_join_schema_json(const std::string& text, const Schema& schema) {
  json j = json::parse(text);
  JoinSchema js;
  for (const auto& e : j.at("edges")) {
    JoinEdge edge;
    edge.id = e.at("id").get<std::string>();
    if (js.edge_index(edge.id) >= 0) throw std::runtime_error("duplicate edge id " + edge.id);
    std::tie(edge.rel_a, edge.attr_a) = resolve_column(schema, e.at("left").get<std::string>());
    std::tie(edge.rel_b, edge.attr_b) = resolve_column(schema, e.at("right").get<std::string>());
    AttrType ta = schema.relations[edge.rel_a].attributes[edge.attr_a].type;
    AttrType tb = schema.relations[edge.rel_b].attributes[edge.attr_b].type;
    if (ta != tb)
      throw std::runtime_error("edge " + edge.id + " joins incompatible types " +
                               attr_type_name(ta) + " and " + attr_type_name(tb));
    if (edge.rel_a == edge.rel_b && edge.attr_a != edge.attr_b)
      throw std::runtime_error("edge " + edge.id +
                               " joins two attributes of one relation; only same-attribute "
                               "self-joins are supported");
    js.edges.push_back(std::move(edge));
  }
  if (j.contains("templates")) {
    for (const auto& t : j.at("templates")) {
      std::vector<uint32_t> tmpl;
      for (const auto& id : t) {
        int idx = js.edge_index(id.get<std::string>());
        if (idx < 0) throw std::runtime_error("template references unknown edge");
        tmpl.push_back(static_cast<uint32_t>(idx));
      }
      std::sort(tmpl.begin(), tmpl.end());
      js.templates.push_back(std::move(tmpl));
    }
  }
  return js;
}

Schema load_schema_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_schema_json(buf.str());
}

JoinSchema load_join_schema_json(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_join_schema_json(buf.str(), schema);
}

namespace {

struct RawColumn {
  std::vector<std::optional<Value>> values;
};

template <class T>
Dictionary dict_from_sorted(AttrType type, std::vector<T> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  Dictionary d;
  d.type = type;
  if constexpr (std::is_same_v<T, int64_t>)
    d.ints = std::move(values);
  else if constexpr (std::is_same_v<T, double>)
    d.reals = std::move(values);
  else
    d.strings = std::move(values);
  return d;
}

Dictionary build_dictionary(AttrType type, const std::vector<const RawColumn*>& cols) {
  switch (type) {
    case AttrType::integer:
    case AttrType::timestamp: {
      std::vector<int64_t> vals;
      for (const auto* c : cols)
        for (const auto& v : c->values)
          if (v) vals.push_back(std::get<int64_t>(*v));
      return dict_from_sorted(type, std::move(vals));
    }
    case AttrType::floating: {
      std::vector<double> vals;
      for (const auto* c : cols)
        for (const auto& v : c->values)
          if (v) vals.push_back(std::get<double>(*v));
      return dict_from_sorted(type, std::move(vals));
    }
    case AttrType::categorical: {
      std::vector<std::string> vals;
      for (const auto* c : cols)
        for (const auto& v : c->values)
          if (v) vals.push_back(std::get<std::string>(*v));
      return dict_from_sorted(type, std::move(vals));
    }
  }
  return {};
}

}  // namespace

Database ingest_tables(const std::vector<CsvTable>& tables, const Schema& schema,
                       const JoinSchema& join_schema, IngestStats* stats) {
  if (tables.size() != schema.relations.size())
    throw std::runtime_error("one CSV table required per schema relation");

  // parse every cell into its typed value, column-major
  std::vector<std::vector<RawColumn>> raw(schema.relations.size());
  for (size_t r = 0; r < schema.relations.size(); ++r) {
    const auto& rel = schema.relations[r];
    const auto& table = tables[r];
    std::vector<int> field_of_attr(rel.attributes.size(), -1);
    for (size_t f = 0; f < table.header.size(); ++f) {
      int a = rel.attr_index(table.header[f]);
      if (a < 0)
        throw std::runtime_error(rel.name + ": unknown column '" + table.header[f] + "'");
      field_of_attr[a] = static_cast<int>(f);
    }
    for (size_t a = 0; a < rel.attributes.size(); ++a)
      if (field_of_attr[a] < 0)
        throw std::runtime_error(rel.name + ": missing column '" + rel.attributes[a].name + "'");

    raw[r].resize(rel.attributes.size());
    for (size_t a = 0; a < rel.attributes.size(); ++a) {
      auto& col = raw[r][a];
      col.values.reserve(table.rows.size());
      const int f = field_of_attr[a];
      for (size_t row = 0; row < table.rows.size(); ++row) {
        const auto& cell = table.rows[row][f];
        if (!cell) {
          col.values.emplace_back(std::nullopt);
          continue;
        }
        std::string context = rel.name + " row " + std::to_string(row + 2) + " column '" +
                              rel.attributes[a].name + "'";
        col.values.emplace_back(parse_value(rel.attributes[a].type, *cell, context));
      }
    }
  }

  // dictionary groups: columns connected by join edges share one dictionary
  std::vector<size_t> col_base(schema.relations.size() + 1, 0);
  for (size_t r = 0; r < schema.relations.size(); ++r)
    col_base[r + 1] = col_base[r] + schema.relations[r].attributes.size();
  const size_t ncols = col_base.back();
  std::vector<size_t> parent(ncols);
  for (size_t i = 0; i < ncols; ++i) parent[i] = i;
  auto find = [&](size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : join_schema.edges)
    parent[find(col_base[e.rel_a] + e.attr_a)] = find(col_base[e.rel_b] + e.attr_b);

  std::map<size_t, std::vector<std::pair<uint32_t, uint32_t>>> groups;
  for (size_t r = 0; r < schema.relations.size(); ++r)
    for (size_t a = 0; a < schema.relations[r].attributes.size(); ++a)
      groups[find(col_base[r] + a)].push_back(
          {static_cast<uint32_t>(r), static_cast<uint32_t>(a)});

  Database db;
  db.schema = schema;
  db.join_schema = join_schema;
  db.relations.resize(schema.relations.size());
  for (size_t r = 0; r < schema.relations.size(); ++r) {
    db.relations[r].name = schema.relations[r].name;
    db.relations[r].row_count = tables[r].rows.size();
    db.relations[r].columns.resize(schema.relations[r].attributes.size());
  }

  for (const auto& [root, members] : groups) {
    AttrType type = schema.relations[members[0].first].attributes[members[0].second].type;
    std::vector<const RawColumn*> cols;
    for (const auto& m : members) cols.push_back(&raw[m.first][m.second]);
    Dictionary dict = build_dictionary(type, cols);
    for (const auto& m : members) {
      Column& col = db.relations[m.first].columns[m.second];
      col.dict = dict;
      const auto& values = raw[m.first][m.second].values;
      col.codes.resize(values.size());
      for (size_t i = 0; i < values.size(); ++i) {
        if (!values[i]) {
          col.codes[i] = kNullCode;
          ++col.null_count;
        } else {
          col.codes[i] = *dict.code_of(*values[i]);
        }
      }
      if (stats) ++stats->encode_passes;
    }
  }
  return db;
}

Database ingest(const std::string& data_dir, const Schema& schema,
                const JoinSchema& join_schema, IngestStats* stats) {
  std::vector<CsvTable> tables;
  for (const auto& rel : schema.relations) {
    tables.push_back(read_csv(data_dir + "/" + rel.name + ".csv"));
    if (stats) ++stats->files_read;
  }
  return ingest_tables(tables, schema, join_schema, stats);
}

}  // namespace sspn
