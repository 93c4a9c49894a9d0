#include "sspn/oracle.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "sspn/sketch.hpp"
#include "sspn/spn.hpp"

namespace sspn {

std::vector<uint32_t> filter_rows(const EncodedRelation& rel, const Predicate& predicate) {
  std::vector<uint32_t> out;
  for (uint32_t r = 0; r < rel.row_count; ++r) {
    bool ok = true;
    for (const auto& [attr, conds] : predicate.by_attr) {
      (void)conds;
      if (!predicate.matches(attr, rel.columns[attr].codes[r])) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(r);
  }
  return out;
}

namespace {

struct Budget {
  uint64_t remaining;
  bool exceeded = false;

  bool spend(uint64_t n) {
    if (exceeded || n > remaining) {
      exceeded = true;
      return false;
    }
    remaining -= n;
    return true;
  }
};

}  // namespace

OracleResult exact_cardinality(const Database& db, const QuerySpec& query, uint64_t budget) {
  validate_join_graph(query.join_graph());
  Budget b{budget};

  const size_t nv = query.relations.size();
  std::vector<std::vector<uint32_t>> filtered(nv);
  for (size_t v = 0; v < nv; ++v) {
    const auto& rel = db.relations[query.relations[v].rel];
    if (!b.spend(rel.row_count)) return {true, 0.0};
    filtered[v] = filter_rows(rel, query.relations[v].predicate);
  }

  if (nv == 1) return {false, static_cast<double>(filtered[0].size())};

  // vertex visit order: BFS over the bundle tree from vertex 0
  std::vector<std::vector<size_t>> joins_with(nv);
  for (size_t j = 0; j < query.joins.size(); ++j) {
    joins_with[query.joins[j].left_vertex].push_back(j);
    joins_with[query.joins[j].right_vertex].push_back(j);
  }
  std::vector<uint32_t> order;
  std::vector<bool> visited(nv, false);
  order.push_back(0);
  visited[0] = true;
  for (size_t head = 0; head < order.size(); ++head) {
    uint32_t v = order[head];
    for (size_t j : joins_with[v]) {
      uint32_t other = query.joins[j].left_vertex == v ? query.joins[j].right_vertex
                                                       : query.joins[j].left_vertex;
      if (!visited[other]) {
        visited[other] = true;
        order.push_back(other);
      }
    }
  }

  // "open" edges connect the processed prefix to unvisited vertices; the DP
  // state maps open-edge key tuples to tuple counts
  auto edge_attr_of = [&](const QueryJoin& join, uint32_t vertex) {
    const JoinEdge& e = db.join_schema.edges[join.edge];
    return join.left_vertex == vertex ? e.attr_a : e.attr_b;
  };

  std::set<size_t> in_prefix;
  auto open_joins = [&](const std::set<size_t>& prefix) {
    std::vector<size_t> open;
    for (size_t j = 0; j < query.joins.size(); ++j) {
      bool l = prefix.count(query.joins[j].left_vertex);
      bool r = prefix.count(query.joins[j].right_vertex);
      if (l != r) open.push_back(j);
    }
    return open;
  };

  FrequencyTable state;
  in_prefix.insert(order[0]);
  {
    auto open = open_joins(in_prefix);
    std::vector<std::span<const int64_t>> cols;
    const auto& rel0 = db.relations[query.relations[order[0]].rel];
    for (size_t j : open) cols.push_back(rel0.columns[edge_attr_of(query.joins[j], order[0])].codes);
    if (!b.spend(filtered[order[0]].size())) return {true, 0.0};
    state = build_frequency_table(cols, filtered[order[0]]);
  }

  for (size_t step = 1; step < order.size(); ++step) {
    uint32_t v = order[step];
    auto open_before = open_joins(in_prefix);
    in_prefix.insert(v);
    auto open_after = open_joins(in_prefix);

    // joins consumed at this step connect v to the prefix
    std::vector<size_t> consumed;
    for (size_t j : open_before)
      if (query.joins[j].left_vertex == v || query.joins[j].right_vertex == v) consumed.push_back(j);
    std::vector<size_t> kept;
    for (size_t j : open_before)
      if (std::find(consumed.begin(), consumed.end(), j) == consumed.end()) kept.push_back(j);

    // positions of kept / consumed joins inside the old state key
    std::vector<size_t> pos_of_join(query.joins.size(), SIZE_MAX);
    for (size_t i = 0; i < open_before.size(); ++i) pos_of_join[open_before[i]] = i;

    const auto& rel = db.relations[query.relations[v].rel];
    std::vector<size_t> new_open = open_after;

    // group v's filtered rows by their consumed-join key, carrying v's newly
    // opened columns
    std::vector<std::span<const int64_t>> v_consumed_cols, v_new_cols;
    for (size_t j : consumed) v_consumed_cols.push_back(rel.columns[edge_attr_of(query.joins[j], v)].codes);
    std::vector<size_t> v_new_joins;
    for (size_t j : new_open)
      if (query.joins[j].left_vertex == v || query.joins[j].right_vertex == v) v_new_joins.push_back(j);
    for (size_t j : v_new_joins) v_new_cols.push_back(rel.columns[edge_attr_of(query.joins[j], v)].codes);

    // match key -> (new-cols key -> count)
    std::unordered_map<std::vector<int64_t>, FrequencyTable, KeyHash> v_groups;
    std::vector<int64_t> mkey(consumed.size()), nkey(v_new_joins.size());
    if (!b.spend(filtered[v].size())) return {true, 0.0};
    for (uint32_t row : filtered[v]) {
      bool null_key = false;
      for (size_t i = 0; i < consumed.size(); ++i) {
        mkey[i] = v_consumed_cols[i][row];
        if (mkey[i] == kNullCode) null_key = true;
      }
      for (size_t i = 0; i < v_new_joins.size(); ++i) {
        nkey[i] = v_new_cols[i][row];
        if (nkey[i] == kNullCode) null_key = true;
      }
      if (null_key) continue;  // nulls never equi-join
      ++v_groups[mkey][nkey];
    }

    FrequencyTable next;
    std::vector<int64_t> out_key(new_open.size());
    for (const auto& [key, count] : state) {
      for (size_t i = 0; i < consumed.size(); ++i) mkey[i] = key[pos_of_join[consumed[i]]];
      auto git = v_groups.find(mkey);
      if (git == v_groups.end()) continue;
      if (!b.spend(git->second.size())) return {true, 0.0};
      for (const auto& [vkey, vcount] : git->second) {
        for (size_t i = 0; i < new_open.size(); ++i) {
          size_t j = new_open[i];
          if (pos_of_join[j] != SIZE_MAX)
            out_key[i] = key[pos_of_join[j]];
          else {
            auto it = std::find(v_new_joins.begin(), v_new_joins.end(), j);
            out_key[i] = vkey[static_cast<size_t>(it - v_new_joins.begin())];
          }
        }
        next[out_key] += count * vcount;
      }
    }
    state = std::move(next);
    if (!b.spend(state.size())) return {true, 0.0};
  }

  double total = 0.0;
  for (const auto& [key, count] : state) total += static_cast<double>(count);
  return {false, total};
}

}  // namespace sspn
