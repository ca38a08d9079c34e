#include "joinsketch/query.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace joinsketch;

TEST_CASE("gyo: single table, path, star and triangle") {
  CHECK(check_acyclic({{"A", "B"}}).acyclic);
  CHECK(check_acyclic({{"A", "B"}}).root == 0);

  const auto path = check_acyclic({{"A", "B"}, {"B", "C"}, {"C", "D"}});
  CHECK(path.acyclic);
  CHECK(path.root == 0);
  CHECK(path.parent == std::vector<Index>{-1, 0, 1});
  CHECK(path.separator[1] == std::vector<std::string>{"B"});
  CHECK(path.separator[2] == std::vector<std::string>{"C"});

  const auto star = check_acyclic({{"K", "A"}, {"K", "B"}, {"K", "C"}});
  CHECK(star.acyclic);
  CHECK(star.parent == std::vector<Index>{-1, 0, 0});

  const auto tri = check_acyclic({{"A", "B"}, {"B", "C"}, {"C", "A"}});
  CHECK_FALSE(tri.acyclic);
  CHECK(tri.trace.empty());

  // A triangle with a covering table is acyclic.
  CHECK(check_acyclic({{"A", "B"}, {"B", "C"}, {"C", "A"}, {"A", "B", "C"}}).acyclic);
}

TEST_CASE("gyo: the trace is deterministic and ends with one table") {
  const std::vector<std::vector<std::string>> s = {{"A", "B"}, {"B", "C"}, {"C", "D"}};
  const auto a = check_acyclic(s), b = check_acyclic(s);
  REQUIRE(a.trace.size() == b.trace.size());
  int drops = 0;
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].rule == b.trace[i].rule);
    CHECK(a.trace[i].table == b.trace[i].table);
    CHECK(a.trace[i].column == b.trace[i].column);
    drops += a.trace[i].rule == GyoStep::Rule::drop_table;
  }
  CHECK(drops == 2);
  CHECK(a.trace.front().rule == GyoStep::Rule::drop_column);
  CHECK(a.trace.front().column == "A");
}

TEST_CASE("make_query rejects cyclic joins and builds rho") {
  const std::vector<Table> tri = {make_table("T1", {"A", "B"}, MatrixXd::Zero(1, 2)),
                                  make_table("T2", {"B", "C"}, MatrixXd::Zero(1, 2)),
                                  make_table("T3", {"C", "A"}, MatrixXd::Zero(1, 2))};
  CHECK_THROWS_AS(make_query(tri), AlgorithmError);

  std::vector<Table> star;
  for (int j = 0; j < 4; ++j) {
    star.push_back(make_table("T" + std::to_string(j), {"K", "x" + std::to_string(j)}, MatrixXd::Zero(2, 2)));
  }
  const auto q = make_query(star);
  CHECK(q.rho == std::vector<Index>{0, 1, 2, 3});
  CHECK(q.dim() == 5);
  CHECK(q.owned(0) == std::vector<Index>{0, 1});
  CHECK(q.owned(2) == std::vector<Index>{3});

  // Chain T0 - T1 - T2 plus T3 under T1: pre-order with ascending children.
  std::vector<Table> tree = {make_table("T0", {"A"}, MatrixXd::Zero(1, 1)),
                             make_table("T1", {"A", "B", "C"}, MatrixXd::Zero(1, 3)),
                             make_table("T2", {"B"}, MatrixXd::Zero(1, 1)),
                             make_table("T3", {"A", "D"}, MatrixXd::Zero(1, 2))};
  const auto t = make_query(tree);
  CHECK(t.rho.size() == 4);
  CHECK(t.rho.front() == t.root);
  for (std::size_t i = 1; i < t.rho.size(); ++i) {
    const Index p = t.parent[static_cast<std::size_t>(t.rho[i])];
    CHECK(std::find(t.rho.begin(), t.rho.begin() + static_cast<std::ptrdiff_t>(i), p) !=
          t.rho.begin() + static_cast<std::ptrdiff_t>(i));
  }
}

TEST_CASE("enumeration matches nested loops on random acyclic joins") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 60; ++trial) {
    const int m = 1 + trial % 4;
    const auto tables = oracle::random_acyclic_tables(gen, m, 8, 8, 3);
    const auto q = make_query(tables);
    CHECK(q.rho.size() == static_cast<std::size_t>(m));
    // Columns partition: every join column has exactly one owner.
    std::vector<int> owners(static_cast<std::size_t>(q.dim()), 0);
    for (Index j = 0; j < q.table_count(); ++j)
      for (const Index c : q.owned(j)) ++owners[static_cast<std::size_t>(c)];
    for (const int o : owners) CHECK(o == 1);

    const auto naive = oracle::naive_join(tables);
    REQUIRE(naive.columns == q.partition.columns);
    const MatrixXd j = materialize_query(q);
    REQUIRE(j.rows() == naive.rows.rows());
    if (j.rows() > 0) CHECK(oracle::sorted_rows(j) == oracle::sorted_rows(naive.rows));

    // Visiting order is rho-lexicographic.
    std::vector<std::vector<Index>> seen;
    enumerate_join(q, [&](std::span<const Index> rows) {
      std::vector<Index> key;
      for (const Index t : q.rho) key.push_back(rows[static_cast<std::size_t>(t)]);
      seen.push_back(key);
    });
    CHECK(std::is_sorted(seen.begin(), seen.end()));
  }
}

TEST_CASE("materialization cap and key-encoding mismatch") {
  const auto t1 = make_table("A", {"k", "x"}, MatrixXd::Zero(20, 2));
  const auto t2 = make_table("B", {"k", "y"}, MatrixXd::Zero(20, 2));
  const auto q = make_query({t1, t2});
  CHECK_THROWS_AS(materialize_query(q, 100), AlgorithmError);
  CHECK(materialize_query(q, 400).rows() == 400);

  auto s1 = t1;
  s1.dictionary_encoded = {true, false};
  CHECK_THROWS_AS(make_query({s1, t2}), DataError);
}

TEST_CASE("query_from_join requires the shared columns as keys") {
  const auto j = make_two_table_join(oracle::example_t1(), oracle::example_t2(), {"f2"});
  const auto q = query_from_join(j);
  CHECK(q.partition.columns == j.partition.columns);
  CHECK(materialize_query(q).rows() == 5);

  auto t2 = oracle::example_t2();
  t2.columns = {"f2", "f1"};
  const auto j2 = make_two_table_join(oracle::example_t1(), t2, {"f2"});
  CHECK_THROWS_AS(query_from_join(j2), ConfigError);
}
