#include "joinsketch/table.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace joinsketch {

std::optional<Index> Table::find(const std::string& column) const {
  const auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) return std::nullopt;
  return static_cast<Index>(it - columns.begin());
}

Index Table::column_index(const std::string& column) const {
  if (auto i = find(column)) return *i;
  throw DataError(fmt::format("table '{}' has no column '{}'", name, column));
}

void Table::validate() const {
  std::set<std::string> seen;
  for (const auto& c : columns)
    if (!seen.insert(c).second) throw DataError(fmt::format("table '{}': duplicate column '{}'", name, c));
  if (static_cast<Index>(columns.size()) != values.cols())
    throw DataError(fmt::format("table '{}': {} column names for {} value columns", name, columns.size(),
                                values.cols()));
  if (!dictionary_encoded.empty() && dictionary_encoded.size() != columns.size())
    throw DataError(fmt::format("table '{}': encoding flags do not match columns", name));
}

Table Table::select_rows(std::span<const Index> rows) const {
  Table out{name, columns, MatrixXd(static_cast<Index>(rows.size()), cols()), dictionary_encoded};
  for (std::size_t r = 0; r < rows.size(); ++r) out.values.row(static_cast<Index>(r)) = values.row(rows[r]);
  return out;
}

Table make_table(std::string name, std::vector<std::string> columns, MatrixXd values) {
  Table t{std::move(name), std::move(columns), std::move(values), {}};
  t.dictionary_encoded.assign(t.columns.size(), false);
  t.validate();
  return t;
}

std::int64_t key_value(double cell) {
  if (!std::isfinite(cell) || cell != std::floor(cell) || std::abs(cell) > 9007199254740992.0)
    throw DataError(fmt::format("join key {} is not an exactly representable integer", cell));
  // +0.0 and -0.0 map to the same key.
  return static_cast<std::int64_t>(cell);
}

// ---------------------------------------------------------------------------

std::int64_t KeyDictionary::encode(const std::string& value) {
  auto [it, inserted] = ids_.try_emplace(value, static_cast<std::int64_t>(values_.size()));
  if (inserted) values_.push_back(value);
  return it->second;
}

std::optional<std::int64_t> KeyDictionary::find(const std::string& value) const {
  const auto it = ids_.find(value);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& KeyDictionary::decode(std::int64_t id) const {
  if (id < 0 || id >= static_cast<std::int64_t>(values_.size()))
    throw DataError(fmt::format("key id {} is not in the dictionary", id));
  return values_[static_cast<std::size_t>(id)];
}

void KeyDictionary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write key dictionary '{}'", path));
  out << "id,value\n";
  for (std::size_t i = 0; i < values_.size(); ++i) out << i << ',' << values_[i] << '\n';
}

KeyDictionary KeyDictionary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read key dictionary '{}'", path));
  KeyDictionary dict;
  std::string line;
  std::getline(in, line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(fmt::format("{}:{}: expected id,value", path, lineno));
    const auto id = std::stoll(line.substr(0, comma));
    if (id != static_cast<long long>(dict.values_.size()))
      throw DataError(fmt::format("{}:{}: ids must be dense and in order", path, lineno));
    dict.encode(line.substr(comma + 1));
  }
  return dict;
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

Table parse_csv(std::istream& in, const std::string& name, const std::vector<std::string>& key_columns,
                KeyDictionary& dictionary, const CsvOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("table '{}': missing header row", name));
  const auto header = split_fields(line, options.delimiter);
  const auto ncols = header.size();

  std::vector<bool> is_key(ncols, false);
  for (const auto& k : key_columns) {
    const auto it = std::find(header.begin(), header.end(), k);
    if (it == header.end()) throw DataError(fmt::format("table '{}': key column '{}' not in header", name, k));
    is_key[static_cast<std::size_t>(it - header.begin())] = true;
  }

  std::vector<std::vector<std::string>> cells;
  std::vector<std::size_t> linenos;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line, options.delimiter);
    if (fields.size() != ncols)
      throw DataError(fmt::format("table '{}': line {}: expected {} fields, got {}", name, lineno, ncols,
                                  fields.size()));
    cells.push_back(std::move(fields));
    linenos.push_back(lineno);
  }

  // A key column with any non-numeric cell is dictionary encoded as a whole.
  std::vector<bool> encoded(ncols, false);
  for (std::size_t c = 0; c < ncols; ++c) {
    if (!is_key[c]) continue;
    for (const auto& row : cells)
      if (!parse_number(row[c])) {
        encoded[c] = true;
        break;
      }
  }

  MatrixXd values(static_cast<Index>(cells.size()), static_cast<Index>(ncols));
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < ncols; ++c) {
      const auto& cell = cells[r][c];
      double v;
      if (encoded[c]) {
        v = static_cast<double>(dictionary.encode(cell));
      } else if (auto num = parse_number(cell)) {
        v = *num;
        if (is_key[c] && (v != std::floor(v) || !std::isfinite(v)))
          throw DataError(fmt::format("table '{}': line {}: floating-point key '{}' in column '{}'", name,
                                      linenos[r], cell, header[c]));
      } else {
        throw DataError(fmt::format("table '{}': line {}: non-numeric value '{}' in column '{}'", name,
                                    linenos[r], cell, header[c]));
      }
      values(static_cast<Index>(r), static_cast<Index>(c)) = v;
    }
  }

  Table t{name, header, std::move(values), encoded};
  t.validate();
  if (options.normalize) {
    std::vector<Index> cols;
    for (std::size_t c = 0; c < ncols; ++c)
      if (!is_key[c]) cols.push_back(static_cast<Index>(c));
    normalize_minmax(t, cols);
  }
  return t;
}

Table read_csv(const std::string& path, const std::string& name, const std::vector<std::string>& key_columns,
               KeyDictionary& dictionary, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path));
  return parse_csv(in, name, key_columns, dictionary, options);
}

void write_csv(const Table& table, std::ostream& out, char delimiter) {
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out << delimiter;
    out << table.columns[c];
  }
  out << '\n';
  for (Index r = 0; r < table.rows(); ++r) {
    for (Index c = 0; c < table.cols(); ++c) {
      if (c) out << delimiter;
      out << fmt::format("{}", table.values(r, c));
    }
    out << '\n';
  }
}

void write_csv(const Table& table, const std::string& path, char delimiter) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path));
  write_csv(table, out, delimiter);
}

void normalize_minmax(Table& table, const std::vector<Index>& columns) {
  for (const Index c : columns) {
    if (table.rows() == 0) continue;
    auto col = table.values.col(c);
    const double lo = col.minCoeff();
    const double hi = col.maxCoeff();
    if (hi == lo) {
      col.setZero();
    } else {
      col = (col.array() - lo) / (hi - lo);
    }
  }
}

}  // namespace joinsketch
