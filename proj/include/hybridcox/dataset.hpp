#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hybridcox/error.hpp"

namespace hybridcox {

enum class ColumnKind { time, event, continuous, categorical };

inline std::string_view to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::time: return "time";
    case ColumnKind::event: return "event";
    case ColumnKind::continuous: return "continuous";
    case ColumnKind::categorical: return "categorical";
  }
  return "?";
}

inline constexpr std::string_view kMissingToken = "NA";

/// One typed column. Categorical cells hold the level index as a double;
/// missing cells hold NaN and are flagged in `missing`.
struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::vector<double> values;
  std::vector<std::uint8_t> missing;
  std::vector<std::string> levels;
  std::size_t reference = 0;

  [[nodiscard]] std::size_t size() const { return values.size(); }
  [[nodiscard]] bool is_missing(std::size_t row) const { return missing[row] != 0; }
  [[nodiscard]] bool any_missing() const {
    return std::any_of(missing.begin(), missing.end(), [](std::uint8_t m) { return m != 0; });
  }
  [[nodiscard]] std::size_t missing_count() const {
    return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), std::uint8_t{1}));
  }
  [[nodiscard]] int code(std::size_t row) const { return static_cast<int>(values[row]); }
  [[nodiscard]] const std::string& label(std::size_t row) const { return levels.at(code(row)); }
  [[nodiscard]] std::optional<std::size_t> level_index(std::string_view lvl) const {
    auto it = std::find(levels.begin(), levels.end(), lvl);
    if (it == levels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - levels.begin());
  }

  static Column numeric(std::string name, ColumnKind kind, std::vector<double> values) {
    Column c;
    c.name = std::move(name);
    c.kind = kind;
    c.missing.assign(values.size(), 0);
    c.values = std::move(values);
    return c;
  }

  static Column categorical(std::string name, std::vector<std::string> levels,
                            std::vector<int> codes, std::size_t reference = 0) {
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::categorical;
    c.levels = std::move(levels);
    c.reference = reference;
    c.values.reserve(codes.size());
    c.missing.reserve(codes.size());
    for (int code : codes) {
      const bool miss = code < 0;
      c.values.push_back(miss ? std::nan("") : static_cast<double>(code));
      c.missing.push_back(miss ? 1 : 0);
    }
    return c;
  }
};

/// Immutable survival table: exactly one time column, one event column, and
/// any number of continuous/categorical covariates.
class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(std::vector<Column> columns) : columns_(std::move(columns)) { validate(); }

  [[nodiscard]] std::size_t n_rows() const { return columns_.empty() ? 0 : columns_.front().size(); }
  [[nodiscard]] const std::vector<Column>& columns() const { return columns_; }

  [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t j = 0; j < columns_.size(); ++j)
      if (columns_[j].name == name) return j;
    return std::nullopt;
  }

  [[nodiscard]] const Column& column(std::string_view name) const {
    auto j = find(name);
    if (!j) throw InputError("column not found: " + std::string(name));
    return columns_[*j];
  }

  [[nodiscard]] const Column& time_column() const { return columns_[time_index_]; }
  [[nodiscard]] const Column& event_column() const { return columns_[event_index_]; }
  [[nodiscard]] std::span<const double> times() const { return time_column().values; }
  [[nodiscard]] std::span<const double> events() const { return event_column().values; }

  /// Continuous and categorical columns, in file order.
  [[nodiscard]] std::vector<std::string> covariate_names() const {
    std::vector<std::string> out;
    for (const auto& c : columns_)
      if (c.kind == ColumnKind::continuous || c.kind == ColumnKind::categorical) out.push_back(c.name);
    return out;
  }

  /// Covariates carrying at least one missing cell.
  [[nodiscard]] std::vector<std::string> partially_observed() const {
    std::vector<std::string> out;
    for (const auto& c : columns_)
      if (c.any_missing()) out.push_back(c.name);
    return out;
  }

  /// R indicator of a column: 1 where observed.
  [[nodiscard]] std::vector<std::uint8_t> observed_indicator(std::string_view name) const {
    const Column& c = column(name);
    std::vector<std::uint8_t> r(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) r[i] = c.missing[i] ? 0 : 1;
    return r;
  }

  [[nodiscard]] Dataset subset(std::span<const std::size_t> rows) const {
    std::vector<Column> cols;
    cols.reserve(columns_.size());
    for (const auto& c : columns_) {
      Column s = c;
      s.values.resize(rows.size());
      s.missing.resize(rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k) {
        s.values[k] = c.values.at(rows[k]);
        s.missing[k] = c.missing.at(rows[k]);
      }
      cols.push_back(std::move(s));
    }
    return Dataset(std::move(cols));
  }

  /// Rows where `name` is observed.
  [[nodiscard]] std::vector<std::size_t> observed_rows(std::string_view name) const {
    const Column& c = column(name);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (!c.missing[i]) rows.push_back(i);
    return rows;
  }

  /// Copy with the same-named column replaced.
  [[nodiscard]] Dataset with_column(Column replacement) const {
    auto j = find(replacement.name);
    if (!j) throw InputError("column not found: " + replacement.name);
    std::vector<Column> cols = columns_;
    cols[*j] = std::move(replacement);
    return Dataset(std::move(cols));
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    if (a.columns_.size() != b.columns_.size()) return false;
    for (std::size_t j = 0; j < a.columns_.size(); ++j) {
      const Column& x = a.columns_[j];
      const Column& y = b.columns_[j];
      if (x.name != y.name || x.kind != y.kind || x.levels != y.levels || x.reference != y.reference ||
          x.missing != y.missing || x.size() != y.size())
        return false;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (!x.missing[i] && x.values[i] != y.values[i]) return false;
    }
    return true;
  }

 private:
  void validate() {
    std::size_t n_time = 0, n_event = 0;
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      const Column& c = columns_[j];
      if (c.values.size() != columns_.front().values.size() || c.missing.size() != c.values.size())
        throw InputError("column '" + c.name + "' has inconsistent length");
      for (std::size_t k = 0; k < j; ++k)
        if (columns_[k].name == c.name) throw InputError("duplicate column name: " + c.name);
      switch (c.kind) {
        case ColumnKind::time:
          ++n_time;
          time_index_ = j;
          for (std::size_t i = 0; i < c.size(); ++i) {
            if (c.missing[i]) throw InputError("NA in time column '" + c.name + "'");
            if (!std::isfinite(c.values[i]) || c.values[i] < 0.0)
              throw InputError("time values must be finite and >= 0 in '" + c.name + "'");
          }
          break;
        case ColumnKind::event:
          ++n_event;
          event_index_ = j;
          for (std::size_t i = 0; i < c.size(); ++i) {
            if (c.missing[i]) throw InputError("NA in event column '" + c.name + "'");
            if (c.values[i] != 0.0 && c.values[i] != 1.0)
              throw InputError("event outside {0,1} in '" + c.name + "'");
          }
          break;
        case ColumnKind::continuous:
          for (std::size_t i = 0; i < c.size(); ++i)
            if (!c.missing[i] && !std::isfinite(c.values[i]))
              throw InputError("non-finite value in '" + c.name + "'");
          break;
        case ColumnKind::categorical:
          if (c.levels.empty()) throw InputError("categorical column '" + c.name + "' has no levels");
          if (c.reference >= c.levels.size())
            throw InputError("reference level out of range in '" + c.name + "'");
          for (std::size_t i = 0; i < c.size(); ++i) {
            if (c.missing[i]) continue;
            const double v = c.values[i];
            if (!(v >= 0.0) || v != std::floor(v) || v >= static_cast<double>(c.levels.size()))
              throw InputError("categorical cell outside level list in '" + c.name + "'");
          }
          break;
      }
    }
    if (n_time != 1 || n_event != 1)
      throw InputError("dataset needs exactly one time and one event column");
  }

  std::vector<Column> columns_;
  std::size_t time_index_ = 0;
  std::size_t event_index_ = 0;
};

// ---------------------------------------------------------------------------
// Schema and CSV

struct ColumnSpec {
  std::string name;
  /// nullopt means the column is read but skipped.
  std::optional<ColumnKind> kind;
  std::optional<std::string> reference;
  std::vector<std::string> levels;
};

struct Schema {
  std::vector<ColumnSpec> columns;

  [[nodiscard]] const ColumnSpec* find(std::string_view name) const {
    for (const auto& c : columns)
      if (c.name == name) return &c;
    return nullptr;
  }

  void add(std::string name, std::optional<ColumnKind> kind) {
    columns.push_back(ColumnSpec{std::move(name), kind, std::nullopt, {}});
  }

  static std::optional<ColumnKind> parse_kind(const std::string& s) {
    if (s == "time") return ColumnKind::time;
    if (s == "event") return ColumnKind::event;
    if (s == "continuous") return ColumnKind::continuous;
    if (s == "categorical") return ColumnKind::categorical;
    if (s == "ignore") return std::nullopt;
    throw InputError("unknown column kind: " + s);
  }

  /// Accepts {"columns": {name: kind | {"kind":..., "reference":..., "levels":[...]}}}
  /// or the same mapping at top level.
  static Schema from_json(const nlohmann::json& j) {
    const nlohmann::json& cols = j.contains("columns") ? j.at("columns") : j;
    if (!cols.is_object()) throw InputError("schema: expected an object of column kinds");
    Schema s;
    for (auto it = cols.begin(); it != cols.end(); ++it) {
      ColumnSpec spec;
      spec.name = it.key();
      if (it->is_string()) {
        spec.kind = parse_kind(it->get<std::string>());
      } else if (it->is_object()) {
        spec.kind = parse_kind(it->at("kind").get<std::string>());
        if (it->contains("reference")) spec.reference = it->at("reference").get<std::string>();
        if (it->contains("levels")) spec.levels = it->at("levels").get<std::vector<std::string>>();
      } else {
        throw InputError("schema: bad entry for column " + spec.name);
      }
      s.columns.push_back(std::move(spec));
    }
    return s;
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json cols = nlohmann::json::object();
    for (const auto& c : columns) {
      const std::string kind = c.kind ? std::string(to_string(*c.kind)) : "ignore";
      if (c.reference || !c.levels.empty()) {
        nlohmann::json e = {{"kind", kind}};
        if (c.reference) e["reference"] = *c.reference;
        if (!c.levels.empty()) e["levels"] = c.levels;
        cols[c.name] = e;
      } else {
        cols[c.name] = kind;
      }
    }
    return {{"columns", cols}};
  }

  static Schema load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open schema file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw InputError("schema parse error in " + path + ": " + e.what());
    }
    return from_json(j);
  }

  /// Schema describing an existing dataset, levels and reference included.
  static Schema of(const Dataset& d) {
    Schema s;
    for (const auto& c : d.columns()) {
      ColumnSpec spec{c.name, c.kind, std::nullopt, {}};
      if (c.kind == ColumnKind::categorical) {
        spec.levels = c.levels;
        spec.reference = c.levels[c.reference];
      }
      s.columns.push_back(std::move(spec));
    }
    return s;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view token) {
  double v = 0.0;
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) return std::nullopt;
  return v;
}

/// Shortest representation that reads back to the same double.
inline std::string format_roundtrip(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Parses CSV text against a schema. The schema must name every header
/// column and every schema column must appear in the header.
inline Dataset parse_dataset(std::istream& in, const Schema& schema, const std::string& source = "<csv>") {
  std::string line;
  if (!std::getline(in, line)) throw InputError(source + ": missing header row");
  std::vector<std::string> header;
  for (auto& h : detail::split_csv_line(line)) header.emplace_back(detail::trim(h));
  if (!header.empty() && header.front().rfind("\xEF\xBB\xBF", 0) == 0) header.front().erase(0, 3);

  for (const auto& spec : schema.columns)
    if (std::find(header.begin(), header.end(), spec.name) == header.end())
      throw InputError(source + ": unknown column in schema: " + spec.name);
  std::vector<const ColumnSpec*> specs;
  for (const auto& h : header) {
    const ColumnSpec* s = schema.find(h);
    if (!s) throw InputError(source + ": column '" + h + "' is not declared in the schema");
    specs.push_back(s);
  }

  std::vector<std::vector<std::string>> raw(header.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw InputError(source + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) raw[j].emplace_back(detail::trim(cells[j]));
  }

  std::vector<Column> cols;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const ColumnSpec& spec = *specs[j];
    if (!spec.kind) continue;
    const auto& tokens = raw[j];
    Column c;
    c.name = spec.name;
    c.kind = *spec.kind;
    c.values.resize(tokens.size());
    c.missing.assign(tokens.size(), 0);
    auto where = [&](std::size_t i) { return source + ":" + std::to_string(i + 2) + " column '" + c.name + "'"; };

    if (c.kind == ColumnKind::categorical) {
      if (!spec.levels.empty()) {
        c.levels = spec.levels;
      } else {
        for (const auto& t : tokens)
          if (t != kMissingToken && std::find(c.levels.begin(), c.levels.end(), t) == c.levels.end())
            c.levels.push_back(t);
        std::sort(c.levels.begin(), c.levels.end());
      }
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].empty()) throw InputError(where(i) + ": empty cell (use NA for missing)");
        if (tokens[i] == kMissingToken) {
          c.missing[i] = 1;
          c.values[i] = std::nan("");
          continue;
        }
        auto idx = c.level_index(tokens[i]);
        if (!idx) throw InputError(where(i) + ": level '" + tokens[i] + "' not in declared levels");
        c.values[i] = static_cast<double>(*idx);
      }
      if (c.levels.empty()) throw InputError(source + ": column '" + c.name + "' has no observed levels");
      if (spec.reference) {
        auto idx = c.level_index(*spec.reference);
        if (!idx) throw InputError(source + ": reference level '" + *spec.reference + "' not found in '" + c.name + "'");
        c.reference = *idx;
      }
    } else {
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] == kMissingToken) {
          if (c.kind == ColumnKind::time || c.kind == ColumnKind::event)
            throw InputError(where(i) + ": NA in " + std::string(to_string(c.kind)) + " column");
          c.missing[i] = 1;
          c.values[i] = std::nan("");
          continue;
        }
        auto v = detail::parse_double(tokens[i]);
        if (!v) throw InputError(where(i) + ": non-numeric token '" + tokens[i] + "'");
        if (c.kind == ColumnKind::event && *v != 0.0 && *v != 1.0)
          throw InputError(where(i) + ": event outside {0,1}");
        c.values[i] = *v;
      }
    }
    cols.push_back(std::move(c));
  }
  return Dataset(std::move(cols));
}

inline Dataset load_dataset(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open data file: " + path);
  return parse_dataset(in, schema, path);
}

/// Infers a schema from the header and tokens: columns named time/event
/// (or t/status) get those kinds, non-numeric columns become categorical.
inline Schema infer_schema(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("missing header row");
  std::vector<std::string> header;
  for (auto& h : detail::split_csv_line(line)) header.emplace_back(detail::trim(h));
  std::vector<bool> numeric(header.size(), true);
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    for (std::size_t j = 0; j < std::min(cells.size(), header.size()); ++j) {
      auto t = detail::trim(cells[j]);
      if (t != kMissingToken && !detail::parse_double(t)) numeric[j] = false;
    }
  }
  Schema s;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string& h = header[j];
    if (h == "time" || h == "t") s.add(h, ColumnKind::time);
    else if (h == "event" || h == "status" || h == "d") s.add(h, ColumnKind::event);
    else if (h == "R") s.add(h, std::nullopt);
    else s.add(h, numeric[j] ? ColumnKind::continuous : ColumnKind::categorical);
  }
  return s;
}

/// Writes the dataset with `NA` for missing cells. Extra integer columns
/// (e.g. an R indicator) may be appended.
inline void write_csv(std::ostream& out, const Dataset& d,
                      const std::vector<std::pair<std::string, std::vector<int>>>& extra = {}) {
  const auto& cols = d.columns();
  for (std::size_t j = 0; j < cols.size(); ++j) out << (j ? "," : "") << cols[j].name;
  for (const auto& [name, _] : extra) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const Column& c = cols[j];
      if (j) out << ',';
      if (c.missing[i]) out << kMissingToken;
      else if (c.kind == ColumnKind::categorical) out << c.label(i);
      else out << detail::format_roundtrip(c.values[i]);
    }
    for (const auto& [_, v] : extra) out << ',' << v.at(i);
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const Dataset& d,
                      const std::vector<std::pair<std::string, std::vector<int>>>& extra = {}) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  write_csv(out, d, extra);
}

// ---------------------------------------------------------------------------
// Design matrices

struct EncodedTerm {
  std::string variable;
  Eigen::Index first_column = 0;
  Eigen::Index n_columns = 0;
  /// Level index for each dummy column (categorical only).
  std::vector<std::size_t> dummy_levels;
};

struct DesignMatrix {
  Eigen::MatrixXd x;
  std::vector<std::string> names;
  std::vector<EncodedTerm> terms;

  [[nodiscard]] Eigen::Index rows() const { return x.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return x.cols(); }
};

inline std::string dummy_name(const std::string& variable, const std::string& level) {
  return variable + "[" + level + "]";
}

/// Continuous covariates are copied; a K-level categorical becomes K-1
/// dummies against its reference level.
inline DesignMatrix encode(const Dataset& d, const std::vector<std::string>& covariates) {
  DesignMatrix dm;
  Eigen::Index p = 0;
  for (const auto& name : covariates) {
    const Column& c = d.column(name);
    if (c.kind == ColumnKind::categorical) p += static_cast<Eigen::Index>(c.levels.size()) - 1;
    else p += 1;
  }
  const auto n = static_cast<Eigen::Index>(d.n_rows());
  dm.x = Eigen::MatrixXd::Zero(n, p);
  Eigen::Index col = 0;
  for (const auto& name : covariates) {
    const Column& c = d.column(name);
    if (c.any_missing()) throw InputError("encode: missing cell in covariate '" + name + "'");
    EncodedTerm term{name, col, 0, {}};
    if (c.kind == ColumnKind::categorical) {
      for (std::size_t lvl = 0; lvl < c.levels.size(); ++lvl) {
        if (lvl == c.reference) continue;
        term.dummy_levels.push_back(lvl);
        dm.names.push_back(dummy_name(name, c.levels[lvl]));
        for (Eigen::Index i = 0; i < n; ++i)
          dm.x(i, col) = c.code(static_cast<std::size_t>(i)) == static_cast<int>(lvl) ? 1.0 : 0.0;
        ++col;
      }
    } else {
      dm.names.push_back(name);
      for (Eigen::Index i = 0; i < n; ++i) dm.x(i, col) = c.values[static_cast<std::size_t>(i)];
      ++col;
    }
    term.n_columns = col - term.first_column;
    dm.terms.push_back(std::move(term));
  }
  return dm;
}

}  // namespace hybridcox
