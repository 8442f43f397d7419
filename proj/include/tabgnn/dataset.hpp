#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "tabgnn/error.hpp"
#include "tabgnn/random.hpp"
#include "tabgnn/tensor.hpp"

namespace tabgnn {

using IndexList = std::vector<Index>;

// N x d real features with dense integer labels in [0, class_count).
struct DataTable {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  int class_count = 0;
  std::string name;

  Index rows() const { return features.rows(); }
  Index cols() const { return features.cols(); }

  std::vector<int> class_counts() const {
    std::vector<int> counts(static_cast<std::size_t>(class_count), 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    return counts;
  }
};

// Throws DataError unless every DataTable invariant holds.
inline void validate(const DataTable& t) {
  if (t.rows() < 1 || t.cols() < 1) throw DataError("table must have at least one row and one feature");
  if (static_cast<Index>(t.labels.size()) != t.rows()) {
    throw DataError("label count " + std::to_string(t.labels.size()) + " != row count " + std::to_string(t.rows()));
  }
  if (static_cast<Index>(t.feature_names.size()) != t.cols()) throw DataError("feature name count mismatch");
  if (t.class_count < 2) throw DataError("class_count < 2 (found " + std::to_string(t.class_count) + ")");
  if (!all_finite(t.features)) throw DataError("non-finite feature value");
  std::vector<int> counts(static_cast<std::size_t>(t.class_count), 0);
  for (int y : t.labels) {
    if (y < 0 || y >= t.class_count) throw DataError("label " + std::to_string(y) + " out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) throw DataError("class " + std::to_string(k) + " has zero samples");
  }
}

// Label column selector: by header name or zero-based column index.
using LabelColumn = std::variant<std::string, std::size_t>;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      return cells;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

inline std::optional<double> parse_real(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

// Parses a headered, comma-delimited table. Labels are re-encoded to
// 0..K-1 in order of first appearance.
inline DataTable parse_csv(std::istream& in, const LabelColumn& label_column, std::string name = {}) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty input: header row missing");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  // Owned copies: `line` is reused for the data rows.
  std::vector<std::string> header;
  for (const auto cell : detail::split_commas(line)) header.emplace_back(cell);

  std::size_t label_idx = 0;
  if (const auto* col_name = std::get_if<std::string>(&label_column)) {
    const auto it = std::find(header.begin(), header.end(), *col_name);
    if (it == header.end()) throw DataError("label column '" + *col_name + "' not found in header");
    label_idx = static_cast<std::size_t>(it - header.begin());
  } else {
    label_idx = std::get<std::size_t>(label_column);
    if (label_idx >= header.size()) {
      throw DataError("label column index " + std::to_string(label_idx) + " out of range");
    }
  }
  if (header.size() < 2) throw DataError("need at least one feature column besides the label");

  DataTable table;
  table.name = std::move(name);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != label_idx) table.feature_names.emplace_back(header[c]);
  }

  std::vector<double> values;
  std::unordered_map<std::string, int> codes;
  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_idx) {
        const std::string key(cells[c]);
        if (key.empty()) throw DataError("line " + std::to_string(line_no) + ": missing label");
        const auto [it, inserted] = codes.try_emplace(key, static_cast<int>(codes.size()));
        table.labels.push_back(it->second);
        continue;
      }
      const auto v = detail::parse_real(cells[c]);
      if (!v) {
        throw DataError("line " + std::to_string(line_no) + ", column '" + std::string(header[c]) +
                        "': cannot parse '" + std::string(cells[c]) + "' as a finite real");
      }
      values.push_back(*v);
    }
    ++row;
  }
  if (row == 0) throw DataError("no data rows");
  const auto d = static_cast<Index>(table.feature_names.size());
  table.features = Eigen::Map<Matrix>(values.data(), static_cast<Index>(row), d);
  table.class_count = static_cast<int>(codes.size());
  validate(table);
  return table;
}

inline DataTable load_csv(const std::string& path, const LabelColumn& label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string name = path;
  if (const auto slash = name.find_last_of('/'); slash != std::string::npos) name.erase(0, slash + 1);
  if (const auto dot = name.rfind('.'); dot != std::string::npos && dot > 0) name.erase(dot);
  return parse_csv(in, label_column, name);
}

inline void write_csv(std::ostream& out, const DataTable& t) {
  for (const auto& n : t.feature_names) out << n << ',';
  out << "label\n";
  out.precision(17);
  for (Index r = 0; r < t.rows(); ++r) {
    for (Index c = 0; c < t.cols(); ++c) out << t.features(r, c) << ',';
    out << t.labels[static_cast<std::size_t>(r)] << '\n';
  }
}

// Per-column min-max scaling to [0, 1]; constant columns become 0.
inline DataTable scale_features(const DataTable& table) {
  if (table.rows() < 2) throw DataError("scale_features needs at least 2 rows");
  DataTable out = table;
  for (Index c = 0; c < out.cols(); ++c) {
    auto col = out.features.col(c);
    const double lo = col.minCoeff();
    const double hi = col.maxCoeff();
    if (hi > lo) {
      col = (col.array() - lo) / (hi - lo);
    } else {
      col.setZero();
    }
  }
  return out;
}

// Rows of `table` selected by `rows`, in that order.
inline Matrix select_rows(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

inline std::vector<int> select_labels(const std::vector<int>& labels, std::span<const Index> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back(labels[static_cast<std::size_t>(r)]);
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation folds

struct FoldPlan {
  std::vector<int> assignments;  // fold id per row
  int folds = 10;
  std::uint64_t seed = 0;
  bool stratified = true;

  std::vector<int> fold_sizes() const {
    std::vector<int> sizes(static_cast<std::size_t>(folds), 0);
    for (int f : assignments) ++sizes[static_cast<std::size_t>(f)];
    return sizes;
  }

  // FNV-1a over (folds, seed, assignments); paired comparisons require equal hashes.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    };
    feed(static_cast<std::uint64_t>(folds));
    feed(seed);
    for (int a : assignments) feed(static_cast<std::uint64_t>(a));
    return h;
  }

  bool operator==(const FoldPlan&) const = default;
};

// Stratified k-fold assignment. Rows of each class are shuffled, the classes
// are laid end to end and fold ids are dealt round-robin over that sequence,
// so both fold sizes and per-class fold counts differ by at most one. If any
// class has fewer than k rows, falls back to a shuffled size-balanced deal.
inline FoldPlan stratified_kfold(const DataTable& table, int k, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(table.rows());
  if (k < 2) throw UsageError("fold count must be at least 2");
  if (static_cast<std::size_t>(k) > n) {
    throw UsageError("fold count " + std::to_string(k) + " exceeds row count " + std::to_string(n));
  }
  FoldPlan plan;
  plan.folds = k;
  plan.seed = seed;
  plan.assignments.assign(n, 0);
  Rng rng(derive_seed(seed, 0x466f6c64ULL));

  const auto counts = table.class_counts();
  plan.stratified = std::all_of(counts.begin(), counts.end(), [k](int c) { return c >= k; });
  std::vector<Index> order;
  order.reserve(n);
  if (plan.stratified) {
    for (int cls = 0; cls < table.class_count; ++cls) {
      std::vector<Index> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (table.labels[i] == cls) members.push_back(static_cast<Index>(i));
      }
      rng.shuffle(std::span<Index>(members));
      order.insert(order.end(), members.begin(), members.end());
    }
  } else {
    std::cerr << "warning: a class has fewer than " << k << " samples; using non-stratified folds\n";
    for (std::size_t i = 0; i < n; ++i) order.push_back(static_cast<Index>(i));
    rng.shuffle(std::span<Index>(order));
  }
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    plan.assignments[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(k));
  }
  return plan;
}

struct SplitIndices {
  IndexList train;
  IndexList validation;
  IndexList test;
};

// test = fold `test_fold`; validation = the next two folds cyclically; train = the rest.
inline SplitIndices split_for_test_fold(const FoldPlan& plan, int test_fold) {
  if (plan.folds < 4) throw UsageError("need at least 4 folds for a train/validation/test split");
  if (test_fold < 0 || test_fold >= plan.folds) {
    throw UsageError("test fold " + std::to_string(test_fold) + " outside [0, " + std::to_string(plan.folds) + ")");
  }
  const int v1 = (test_fold + 1) % plan.folds;
  const int v2 = (test_fold + 2) % plan.folds;
  SplitIndices split;
  for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
    const int f = plan.assignments[i];
    const auto idx = static_cast<Index>(i);
    if (f == test_fold) {
      split.test.push_back(idx);
    } else if (f == v1 || f == v2) {
      split.validation.push_back(idx);
    } else {
      split.train.push_back(idx);
    }
  }
  return split;
}

// CSV form: "# seed=<s> folds=<k>" comment line, "row_index,fold_id" header, one row per line.
inline void write_fold_plan(std::ostream& out, const FoldPlan& plan) {
  out << "# seed=" << plan.seed << " folds=" << plan.folds << '\n' << "row_index,fold_id\n";
  for (std::size_t i = 0; i < plan.assignments.size(); ++i) out << i << ',' << plan.assignments[i] << '\n';
}

inline FoldPlan read_fold_plan(std::istream& in) {
  FoldPlan plan;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# seed=", 0) != 0) throw DataError("fold plan: missing seed comment");
  {
    std::istringstream meta(line.substr(7));
    std::string folds_kv;
    meta >> plan.seed >> folds_kv;
    if (folds_kv.rfind("folds=", 0) != 0) throw DataError("fold plan: missing folds count");
    plan.folds = std::stoi(folds_kv.substr(6));
  }
  if (!std::getline(in, line) || detail::trim(line) != "row_index,fold_id") throw DataError("fold plan: bad header");
  std::map<std::size_t, int> rows;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    const auto r = cells.size() == 2 ? detail::parse_real(cells[0]) : std::nullopt;
    const auto f = cells.size() == 2 ? detail::parse_real(cells[1]) : std::nullopt;
    if (!r || !f || *f < 0 || *f >= plan.folds) throw DataError("fold plan: bad row '" + line + "'");
    rows[static_cast<std::size_t>(*r)] = static_cast<int>(*f);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto it = rows.find(i);
    if (it == rows.end()) throw DataError("fold plan: row indices are not contiguous");
    plan.assignments.push_back(it->second);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Synthetic Gaussian clusters

struct SyntheticSpec {
  int samples = 200;
  int features = 5;
  int classes = 4;
  double cluster_mean_separation = 6.0;
  double cluster_stddev = 1.0;
  std::uint64_t seed = 0;
};

// Equal-size isotropic Gaussian clusters. Base centres are drawn uniformly
// in a box with pairwise distance >= 1 (rejection sampling), then scaled by
// the separation, so separation 0 makes every cluster share one mean.
inline DataTable generate_synthetic(const SyntheticSpec& spec) {
  if (spec.samples <= 0 || spec.features <= 0 || spec.classes < 2) throw UsageError("invalid synthetic spec");
  if (spec.samples % spec.classes != 0) throw UsageError("samples must be divisible by classes");
  if (spec.cluster_mean_separation < 0.0 || spec.cluster_stddev < 0.0) {
    throw UsageError("separation and stddev must be non-negative");
  }
  Rng rng(derive_seed(spec.seed, 0x53796e7468ULL));
  const Index d = spec.features;
  Matrix centres(spec.classes, d);
  double box = 1.0;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 0 && attempt % 200 == 0) box *= 1.5;
    for (Index i = 0; i < centres.size(); ++i) centres.data()[i] = rng.uniform(0.0, box);
    bool separated = true;
    for (int a = 0; a < spec.classes && separated; ++a) {
      for (int b = a + 1; b < spec.classes; ++b) {
        if ((centres.row(a) - centres.row(b)).norm() < 1.0) {
          separated = false;
          break;
        }
      }
    }
    if (separated) break;
  }
  centres *= spec.cluster_mean_separation;

  DataTable t;
  t.name = "synthetic";
  t.class_count = spec.classes;
  t.features.resize(spec.samples, d);
  const int per_class = spec.samples / spec.classes;
  for (int i = 0; i < spec.samples; ++i) {
    const int cls = i / per_class;
    t.labels.push_back(cls);
    for (Index c = 0; c < d; ++c) t.features(i, c) = centres(cls, c) + spec.cluster_stddev * rng.normal();
  }
  for (Index c = 0; c < d; ++c) t.feature_names.push_back("f" + std::to_string(c));
  validate(t);
  return t;
}

}  // namespace tabgnn
