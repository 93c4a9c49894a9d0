#include "sspn/query.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sspn {

using nlohmann::json;

bool Predicate::matches(uint32_t attr, int64_t code) const {
  auto it = by_attr.find(attr);
  if (it == by_attr.end()) return true;
  if (code == kNullCode) return false;  // null satisfies no condition
  for (const auto& c : it->second) {
    switch (c.op) {
      case Condition::Op::eq:
      case Condition::Op::set:
        if (std::binary_search(c.codes.begin(), c.codes.end(), code)) return true;
        break;
      case Condition::Op::range:
        if (code >= c.lo && code <= c.hi) return true;
        break;
    }
  }
  return false;
}

std::vector<Condition> canonicalize_conditions(std::vector<Condition> conditions) {
  std::vector<std::pair<int64_t, int64_t>> ranges;
  std::vector<int64_t> points;
  bool had_any = false;
  for (auto& c : conditions) {
    had_any = true;
    if (c.op == Condition::Op::range) {
      if (c.lo <= c.hi) ranges.push_back({c.lo, c.hi});
    } else {
      points.insert(points.end(), c.codes.begin(), c.codes.end());
    }
  }
  std::sort(ranges.begin(), ranges.end());
  std::vector<std::pair<int64_t, int64_t>> merged;
  for (const auto& r : ranges) {
    if (!merged.empty() && r.first <= merged.back().second + 1)
      merged.back().second = std::max(merged.back().second, r.second);
    else
      merged.push_back(r);
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  // drop points already covered by a range
  std::vector<int64_t> kept;
  for (int64_t p : points) {
    auto it = std::upper_bound(merged.begin(), merged.end(), std::make_pair(p, INT64_MAX));
    bool covered = it != merged.begin() && std::prev(it)->second >= p;
    if (!covered) kept.push_back(p);
  }
  std::vector<Condition> out;
  if (!kept.empty()) {
    Condition c;
    c.op = Condition::Op::set;
    c.codes = std::move(kept);
    out.push_back(std::move(c));
  }
  for (const auto& r : merged) {
    Condition c;
    c.op = Condition::Op::range;
    c.lo = r.first;
    c.hi = r.second;
    out.push_back(std::move(c));
  }
  if (out.empty() && had_any) {
    Condition c;
    c.op = Condition::Op::set;  // empty set: selects nothing
    out.push_back(std::move(c));
  }
  return out;
}

JoinGraph QuerySpec::join_graph() const {
  JoinGraph g;
  g.vertex_count = static_cast<uint32_t>(relations.size());
  for (const auto& j : joins) g.edges.push_back({j.left_vertex, j.right_vertex, j.edge});
  return g;
}

namespace {

const Dictionary& db_dict(const void* ctx, uint32_t rel, uint32_t attr) {
  return static_cast<const Database*>(ctx)->relations[rel].columns[attr].dict;
}

}  // namespace

DictProvider dict_provider(const Database& db) { return {&db, &db_dict}; }

namespace {

Value literal_value(AttrType type, const json& v, const std::string& context) {
  try {
    switch (type) {
      case AttrType::integer:
        if (v.is_number_integer()) return v.get<int64_t>();
        if (v.is_string()) return parse_value(type, v.get<std::string>(), context);
        break;
      case AttrType::floating:
        if (v.is_number()) return v.get<double>();
        if (v.is_string()) return parse_value(type, v.get<std::string>(), context);
        break;
      case AttrType::categorical:
        if (v.is_string()) return v.get<std::string>();
        break;
      case AttrType::timestamp:
        if (v.is_number_integer()) return v.get<int64_t>();
        if (v.is_string()) return parse_timestamp_micros(v.get<std::string>());
        break;
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(context + ": " + e.what());
  }
  throw std::runtime_error(context + ": malformed literal");
}

Condition make_range(int64_t lo, int64_t hi) {
  Condition c;
  c.op = Condition::Op::range;
  c.lo = lo;
  c.hi = hi;
  return c;
}

Condition empty_set() {
  Condition c;
  c.op = Condition::Op::set;
  return c;
}

}  // namespace

QuerySpec parse_query(const std::string& json_line, const Schema& schema,
                      const JoinSchema& join_schema, const DictProvider& dicts) {
  json j;
  try {
    j = json::parse(json_line);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("bad query json: ") + e.what());
  }
  QuerySpec q;
  q.id = j.at("id").is_string() ? j.at("id").get<std::string>()
                                : std::to_string(j.at("id").get<int64_t>());

  for (const auto& r : j.at("relations")) {
    QueryRelation qr;
    qr.alias = r.at("alias").get<std::string>();
    std::string name = r.at("name").get<std::string>();
    int rel = schema.relation_index(name);
    if (rel < 0) throw std::runtime_error(q.id + ": unknown relation " + name);
    qr.rel = static_cast<uint32_t>(rel);
    for (const auto& other : q.relations)
      if (other.alias == qr.alias) throw std::runtime_error(q.id + ": duplicate alias " + qr.alias);
    q.relations.push_back(std::move(qr));
  }
  auto vertex_of = [&](const std::string& alias) -> uint32_t {
    for (size_t i = 0; i < q.relations.size(); ++i)
      if (q.relations[i].alias == alias) return static_cast<uint32_t>(i);
    throw std::runtime_error(q.id + ": unknown alias " + alias);
  };

  for (const auto& join : j.value("joins", json::array())) {
    std::string text = join.get<std::string>();
    QueryJoin qj;
    auto eq = text.find('=');
    if (eq != std::string::npos) {
      // "alias.attr=alias.attr"
      auto parse_side = [&](const std::string& side) -> std::pair<uint32_t, uint32_t> {
        auto dot = side.find('.');
        if (dot == std::string::npos)
          throw std::runtime_error(q.id + ": bad join term " + side);
        uint32_t v = vertex_of(side.substr(0, dot));
        const auto& rel_schema = schema.relations[q.relations[v].rel];
        int attr = rel_schema.attr_index(side.substr(dot + 1));
        if (attr < 0) throw std::runtime_error(q.id + ": unknown attribute in " + side);
        return {v, static_cast<uint32_t>(attr)};
      };
      auto [lv, lattr] = parse_side(text.substr(0, eq));
      auto [rv, rattr] = parse_side(text.substr(eq + 1));
      int edge = -1;
      for (size_t e = 0; e < join_schema.edges.size(); ++e) {
        const auto& je = join_schema.edges[e];
        bool forward = je.rel_a == q.relations[lv].rel && je.attr_a == lattr &&
                       je.rel_b == q.relations[rv].rel && je.attr_b == rattr;
        bool backward = je.rel_a == q.relations[rv].rel && je.attr_a == rattr &&
                        je.rel_b == q.relations[lv].rel && je.attr_b == lattr;
        if (forward || backward) {
          edge = static_cast<int>(e);
          qj.left_vertex = forward ? lv : rv;
          qj.right_vertex = forward ? rv : lv;
          break;
        }
      }
      if (edge < 0) throw std::runtime_error(q.id + ": join " + text + " matches no declared edge");
      qj.edge = static_cast<uint32_t>(edge);
    } else {
      int edge = join_schema.edge_index(text);
      if (edge < 0) throw std::runtime_error(q.id + ": unknown edge id " + text);
      const auto& je = join_schema.edges[edge];
      auto unique_vertex = [&](uint32_t rel) -> uint32_t {
        int found = -1;
        for (size_t i = 0; i < q.relations.size(); ++i) {
          if (q.relations[i].rel == rel) {
            if (found >= 0)
              throw std::runtime_error(q.id + ": edge id " + text +
                                       " is ambiguous; use the alias.attr=alias.attr form");
            found = static_cast<int>(i);
          }
        }
        if (found < 0)
          throw std::runtime_error(q.id + ": edge " + text + " references a relation not in the query");
        return static_cast<uint32_t>(found);
      };
      qj.edge = static_cast<uint32_t>(edge);
      qj.left_vertex = unique_vertex(je.rel_a);
      qj.right_vertex = unique_vertex(je.rel_b);
      if (qj.left_vertex == qj.right_vertex && je.rel_a == je.rel_b)
        throw std::runtime_error(q.id + ": self-join edge id " + text +
                                 " is ambiguous; use the alias.attr=alias.attr form");
    }
    q.joins.push_back(qj);
  }

  std::map<std::pair<uint32_t, uint32_t>, std::vector<Condition>> raw_conditions;
  for (const auto& f : j.value("filters", json::array())) {
    std::string column = f.at("column").get<std::string>();
    auto dot = column.find('.');
    if (dot == std::string::npos)
      throw std::runtime_error(q.id + ": filter column must be alias.attr");
    uint32_t v = vertex_of(column.substr(0, dot));
    const auto& rel_schema = schema.relations[q.relations[v].rel];
    int attr_i = rel_schema.attr_index(column.substr(dot + 1));
    if (attr_i < 0) throw std::runtime_error(q.id + ": unknown attribute in " + column);
    uint32_t attr = static_cast<uint32_t>(attr_i);
    AttrType type = rel_schema.attributes[attr].type;
    const Dictionary& dict = dicts(q.relations[v].rel, attr);
    const int64_t m = static_cast<int64_t>(dict.size());
    std::string op = f.at("op").get<std::string>();
    std::string context = q.id + " filter on " + column;

    Condition c;
    if (op == "=") {
      auto code = dict.code_of(literal_value(type, f.at("value"), context));
      if (code) {
        c.op = Condition::Op::eq;
        c.codes = {*code};
      } else {
        c = empty_set();  // unseen literal: equality selects nothing
      }
    } else if (op == "in") {
      c.op = Condition::Op::set;
      for (const auto& v2 : f.at("values")) {
        auto code = dict.code_of(literal_value(type, v2, context));
        if (code) c.codes.push_back(*code);
      }
      std::sort(c.codes.begin(), c.codes.end());
      c.codes.erase(std::unique(c.codes.begin(), c.codes.end()), c.codes.end());
    } else if (op == "between") {
      int64_t lo = dict.first_ge(literal_value(type, f.at("lo"), context));
      int64_t hi = dict.first_gt(literal_value(type, f.at("hi"), context)) - 1;
      c = lo <= hi ? make_range(lo, hi) : empty_set();
    } else if (op == "<" || op == "<=" || op == ">" || op == ">=") {
      Value lit = literal_value(type, f.at("value"), context);
      int64_t lo = 0, hi = m - 1;
      if (op == "<") hi = dict.first_ge(lit) - 1;
      if (op == "<=") hi = dict.first_gt(lit) - 1;
      if (op == ">") lo = dict.first_gt(lit);
      if (op == ">=") lo = dict.first_ge(lit);
      c = lo <= hi ? make_range(lo, hi) : empty_set();
    } else {
      throw std::runtime_error(context + ": unsupported op '" + op + "'");
    }
    raw_conditions[{v, attr}].push_back(std::move(c));
  }
  for (auto& [key, conds] : raw_conditions)
    q.relations[key.first].predicate.by_attr[key.second] = canonicalize_conditions(std::move(conds));

  if (j.contains("truth")) q.truth = j.at("truth").get<double>();

  try {
    validate_join_graph(q.join_graph());
  } catch (const std::exception& e) {
    throw std::runtime_error(q.id + ": " + e.what());
  }
  return q;
}

std::vector<QuerySpec> parse_query_file(const std::string& path, const Schema& schema,
                                        const JoinSchema& join_schema, const DictProvider& dicts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<QuerySpec> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_query(line, schema, join_schema, dicts));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace sspn
