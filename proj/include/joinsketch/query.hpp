#pragma once

// Multi-table natural joins: acyclicity by GYO reduction, the join tree it
// induces, and an enumeration oracle for tests and the CLI baseline.

#include "joinsketch/join.hpp"
#include "joinsketch/table.hpp"
#include "joinsketch/types.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace joinsketch {

struct GyoStep {
  enum class Rule { drop_column, drop_table };
  Rule rule;
  Index table = 0;          // table the rule was applied to
  std::string column;       // drop_column: the removed column
  Index witness = -1;       // drop_table: the table containing its remaining columns
};

struct AcyclicityResult {
  bool acyclic = false;
  std::vector<GyoStep> trace;
  /// Join tree (valid only when acyclic): parent table, -1 at the root.
  std::vector<Index> parent;
  /// Columns a table shares with the rest of the query when it is removed.
  std::vector<std::vector<std::string>> separator;
  Index root = -1;
};

/// GYO reduction over the tables' column sets: repeatedly drop a column that
/// occurs in one table only, or a table whose columns all occur in another.
/// Tables are removed highest index first, each attached to the lowest-index
/// witness, so the trace is deterministic and table 0 ends up as the root.
AcyclicityResult check_acyclic(const std::vector<std::vector<std::string>>& schemas);

/// A natural join over shared column names with its join tree. Tables are
/// multiplied in order rho: pre-order of the join tree, children ascending.
struct JoinQuery {
  std::vector<Table> tables;
  ColumnPartition partition;
  std::vector<Index> parent;
  std::vector<std::vector<Index>> children;
  /// For each table, the positions of its separator columns in the table and
  /// in its parent.
  std::vector<std::vector<Index>> sep_child;
  std::vector<std::vector<Index>> sep_parent;
  std::vector<Index> rho;
  Index root = 0;
  /// Join-tree links for message passing. group[t][r] is the id of row r's
  /// separator key among table t's distinct keys, group_count[t] their number,
  /// and link[t][p] the group of t matching row p of t's parent (-1 if none).
  std::vector<std::vector<Index>> group;
  std::vector<Index> group_count;
  std::vector<std::vector<Index>> link;
  AcyclicityResult gyo;

  Index table_count() const { return static_cast<Index>(tables.size()); }
  Index dim() const { return partition.dim(); }
  /// Columns the table owns in the join (the set E_j), as join positions.
  std::vector<Index> owned(Index table) const;
  /// Row of table j restricted to E_j, laid out in join column space.
  RowVectorXd padded_row(Index table, Index row) const;
};

/// Builds the query; throws AlgorithmError for cyclic queries.
JoinQuery make_query(std::vector<Table> tables);

/// The query equivalent to a two-table join. Its key set must equal the
/// tables' shared columns.
JoinQuery query_from_join(const TwoTableJoin& join);

/// Calls fn(rows) for every join tuple; rows[j] is the row of table j.
/// Tuples are visited in rho-lexicographic order.
void enumerate_join(const JoinQuery& q, const std::function<void(std::span<const Index>)>& fn);

/// Dense N x d join (oracle). Throws AlgorithmError above `cap` rows.
MatrixXd materialize_query(const JoinQuery& q, std::int64_t cap = kDefaultMaterializeCap);

}  // namespace joinsketch
