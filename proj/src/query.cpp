#include "joinsketch/query.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

namespace joinsketch {

namespace {

struct KeyHash {
  std::size_t operator()(const KeyTuple& k) const {
    std::uint64_t h = 0x2545f4914f6cdd1dULL;
    for (const auto v : k) h = detail::splitmix64(h ^ static_cast<std::uint64_t>(v));
    return static_cast<std::size_t>(h);
  }
};

KeyTuple key_at(const Table& t, Index row, const std::vector<Index>& cols) {
  KeyTuple k(cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) k[i] = key_value(t.values(row, cols[i]));
  return k;
}

}  // namespace

AcyclicityResult check_acyclic(const std::vector<std::vector<std::string>>& schemas) {
  const std::size_t m = schemas.size();
  AcyclicityResult res;
  res.parent.assign(m, -1);
  res.separator.assign(m, {});
  std::vector<std::vector<std::string>> cur = schemas;
  std::vector<bool> alive(m, true);

  const auto contains = [](const std::vector<std::string>& s, const std::string& c) {
    return std::find(s.begin(), s.end(), c) != s.end();
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < m; ++i) {
      if (!alive[i]) continue;
      for (std::size_t c = 0; c < cur[i].size();) {
        std::size_t holders = 0;
        for (std::size_t j = 0; j < m; ++j) holders += alive[j] && contains(cur[j], cur[i][c]);
        if (holders == 1) {
          res.trace.push_back({GyoStep::Rule::drop_column, static_cast<Index>(i), cur[i][c], -1});
          cur[i].erase(cur[i].begin() + static_cast<std::ptrdiff_t>(c));
          changed = true;
        } else {
          ++c;
        }
      }
    }
    for (std::size_t i = m; i-- > 0 && !changed;) {
      if (!alive[i]) continue;
      for (std::size_t j = 0; j < m; ++j) {
        if (j == i || !alive[j]) continue;
        if (!std::all_of(cur[i].begin(), cur[i].end(), [&](const std::string& c) { return contains(cur[j], c); }))
          continue;
        res.trace.push_back({GyoStep::Rule::drop_table, static_cast<Index>(i), {}, static_cast<Index>(j)});
        res.parent[i] = static_cast<Index>(j);
        res.separator[i] = cur[i];
        alive[i] = false;
        changed = true;
        break;
      }
    }
  }
  const auto left = std::count(alive.begin(), alive.end(), true);
  res.acyclic = left <= 1;
  for (std::size_t i = 0; i < m; ++i)
    if (alive[i]) res.root = static_cast<Index>(i);
  return res;
}

std::vector<Index> JoinQuery::owned(Index table) const {
  std::vector<Index> out;
  for (const auto& [src, dst] : partition.assigned[static_cast<std::size_t>(table)]) out.push_back(dst);
  return out;
}

RowVectorXd JoinQuery::padded_row(Index table, Index row) const {
  RowVectorXd out = RowVectorXd::Zero(dim());
  const Table& t = tables[static_cast<std::size_t>(table)];
  for (const auto& [src, dst] : partition.assigned[static_cast<std::size_t>(table)]) out(dst) = t.values(row, src);
  return out;
}

JoinQuery make_query(std::vector<Table> tables) {
  if (tables.empty()) throw ConfigError("a join query needs at least one table");
  JoinQuery q;
  q.tables = std::move(tables);
  std::vector<std::vector<std::string>> schemas;
  for (const auto& t : q.tables) {
    t.validate();
    schemas.push_back(t.columns);
  }
  q.gyo = check_acyclic(schemas);
  if (!q.gyo.acyclic) {
    std::vector<std::string> names;
    for (const auto& t : q.tables) names.push_back(t.name);
    throw AlgorithmError(fmt::format("join of {} is cyclic (GYO reduction does not empty it); only acyclic "
                                     "joins are supported",
                                     fmt::join(names, ", ")));
  }

  std::vector<const Table*> ptrs;
  for (const auto& t : q.tables) ptrs.push_back(&t);
  q.partition = make_partition(ptrs);

  const auto m = q.tables.size();
  q.parent = q.gyo.parent;
  q.root = q.gyo.root;
  q.children.assign(m, {});
  q.sep_child.assign(m, {});
  q.sep_parent.assign(m, {});
  for (std::size_t i = 0; i < m; ++i) {
    const Index p = q.parent[i];
    if (p < 0) continue;
    q.children[static_cast<std::size_t>(p)].push_back(static_cast<Index>(i));
    for (const auto& c : q.gyo.separator[i]) {
      q.sep_child[i].push_back(q.tables[i].column_index(c));
      q.sep_parent[i].push_back(q.tables[static_cast<std::size_t>(p)].column_index(c));
    }
    // Encoded (string) keys must agree on both sides of a separator.
    for (std::size_t s = 0; s < q.sep_child[i].size(); ++s) {
      const auto enc = [](const Table& t, Index c) {
        return !t.dictionary_encoded.empty() && t.dictionary_encoded[static_cast<std::size_t>(c)];
      };
      if (enc(q.tables[i], q.sep_child[i][s]) != enc(q.tables[static_cast<std::size_t>(p)], q.sep_parent[i][s]))
        throw DataError(fmt::format("join column '{}' is string-valued in one table and numeric in another",
                                    q.gyo.separator[i][s]));
    }
  }
  for (auto& c : q.children) std::sort(c.begin(), c.end());
  q.group.assign(m, {});
  q.group_count.assign(m, 0);
  q.link.assign(m, {});
  for (std::size_t t = 0; t < m; ++t) {
    if (q.parent[t] < 0) continue;
    std::unordered_map<KeyTuple, Index, KeyHash> ids;
    const Table& tab = q.tables[t];
    q.group[t].resize(static_cast<std::size_t>(tab.rows()));
    for (Index r = 0; r < tab.rows(); ++r) {
      const auto [it, fresh] = ids.try_emplace(key_at(tab, r, q.sep_child[t]), static_cast<Index>(ids.size()));
      q.group[t][static_cast<std::size_t>(r)] = it->second;
    }
    q.group_count[t] = static_cast<Index>(ids.size());
    const Table& par = q.tables[static_cast<std::size_t>(q.parent[t])];
    q.link[t].resize(static_cast<std::size_t>(par.rows()));
    for (Index p = 0; p < par.rows(); ++p) {
      const auto hit = ids.find(key_at(par, p, q.sep_parent[t]));
      q.link[t][static_cast<std::size_t>(p)] = hit == ids.end() ? -1 : hit->second;
    }
  }
  std::vector<Index> stack{q.root};
  while (!stack.empty()) {
    const Index t = stack.back();
    stack.pop_back();
    q.rho.push_back(t);
    const auto& ch = q.children[static_cast<std::size_t>(t)];
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return q;
}

JoinQuery query_from_join(const TwoTableJoin& join) {
  std::set<std::string> shared, keys(join.key_columns.begin(), join.key_columns.end());
  for (const auto& c : join.t1.columns)
    if (join.t2.has(c)) shared.insert(c);
  if (shared != keys)
    throw ConfigError(fmt::format("two-table join keys ({}) differ from the shared columns ({}); the general "
                                  "path joins on all shared columns",
                                  fmt::join(keys, ", "), fmt::join(shared, ", ")));
  return make_query({join.t1, join.t2});
}

void enumerate_join(const JoinQuery& q, const std::function<void(std::span<const Index>)>& fn) {
  const auto m = q.tables.size();
  std::vector<std::vector<std::vector<Index>>> members(m);
  for (std::size_t t = 0; t < m; ++t) {
    if (q.parent[t] < 0) continue;
    members[t].resize(static_cast<std::size_t>(q.group_count[t]));
    for (std::size_t r = 0; r < q.group[t].size(); ++r)
      members[t][static_cast<std::size_t>(q.group[t][r])].push_back(static_cast<Index>(r));
  }
  std::vector<Index> rows(m, 0);
  std::function<void(std::size_t)> rec = [&](std::size_t pos) {
    if (pos == m) {
      fn(rows);
      return;
    }
    const auto t = static_cast<std::size_t>(q.rho[pos]);
    if (q.parent[t] < 0) {
      for (Index r = 0; r < q.tables[t].rows(); ++r) {
        rows[t] = r;
        rec(pos + 1);
      }
      return;
    }
    const Index g = q.link[t][static_cast<std::size_t>(rows[static_cast<std::size_t>(q.parent[t])])];
    if (g < 0) return;
    for (const Index r : members[t][static_cast<std::size_t>(g)]) {
      rows[t] = r;
      rec(pos + 1);
    }
  };
  rec(0);
}

MatrixXd materialize_query(const JoinQuery& q, std::int64_t cap) {
  std::vector<RowVectorXd> acc;
  enumerate_join(q, [&](std::span<const Index> rows) {
    if (static_cast<std::int64_t>(acc.size()) >= cap)
      throw AlgorithmError(fmt::format("join exceeds the materialization cap of {} rows; use a sketched path", cap));
    RowVectorXd r = RowVectorXd::Zero(q.dim());
    for (std::size_t t = 0; t < rows.size(); ++t) r += q.padded_row(static_cast<Index>(t), rows[t]);
    acc.push_back(std::move(r));
  });
  MatrixXd out(static_cast<Index>(acc.size()), q.dim());
  for (std::size_t i = 0; i < acc.size(); ++i) out.row(static_cast<Index>(i)) = acc[i];
  return out;
}

}  // namespace joinsketch
