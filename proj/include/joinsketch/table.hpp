#pragma once

#include "joinsketch/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace joinsketch {

/// A numeric relation: named columns over an n x d matrix of doubles.
/// Join keys are compared exactly and must hold integral values.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  MatrixXd values;
  /// Columns whose cells were strings mapped through a KeyDictionary.
  std::vector<bool> dictionary_encoded;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }

  std::optional<Index> find(const std::string& column) const;
  /// Index of `column`; throws DataError when absent.
  Index column_index(const std::string& column) const;
  bool has(const std::string& column) const { return find(column).has_value(); }

  /// Throws DataError on duplicate names or a shape mismatch.
  void validate() const;

  /// Copy holding only the given rows, in order.
  Table select_rows(std::span<const Index> rows) const;
};

Table make_table(std::string name, std::vector<std::string> columns, MatrixXd values);

/// Exact 64-bit key of a join cell. Throws DataError for non-integral values.
std::int64_t key_value(double cell);

/// String key <-> integer id map shared by all tables of one run, so equal
/// strings in different tables receive equal ids.
class KeyDictionary {
 public:
  std::int64_t encode(const std::string& value);
  std::optional<std::int64_t> find(const std::string& value) const;
  const std::string& decode(std::int64_t id) const;
  std::size_t size() const { return values_.size(); }

  /// Two-column CSV: id,value.
  void save(const std::string& path) const;
  static KeyDictionary load(const std::string& path);

 private:
  std::unordered_map<std::string, std::int64_t> ids_;
  std::vector<std::string> values_;
};

struct CsvOptions {
  char delimiter = ',';
  /// Min-max normalize every non-key column to [0, 1].
  bool normalize = false;
};

/// Reads a CSV with a header row. Key columns may contain strings, which are
/// dictionary encoded; every other cell must be numeric.
Table parse_csv(std::istream& in, const std::string& name, const std::vector<std::string>& key_columns,
                KeyDictionary& dictionary, const CsvOptions& options = {});
Table read_csv(const std::string& path, const std::string& name, const std::vector<std::string>& key_columns,
               KeyDictionary& dictionary, const CsvOptions& options = {});

/// Writes values with round-trip precision.
void write_csv(const Table& table, const std::string& path, char delimiter = ',');
void write_csv(const Table& table, std::ostream& out, char delimiter = ',');

/// v -> (v - min) / (max - min) per listed column; constant columns become 0.
void normalize_minmax(Table& table, const std::vector<Index>& columns);

}  // namespace joinsketch
