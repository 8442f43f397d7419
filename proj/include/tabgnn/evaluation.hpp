#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tabgnn/dataset.hpp"
#include "tabgnn/error.hpp"
#include "tabgnn/graph.hpp"
#include "tabgnn/models.hpp"
#include "tabgnn/parallel.hpp"
#include "tabgnn/random.hpp"
#include "tabgnn/training.hpp"

namespace tabgnn {

// ---------------------------------------------------------------------------
// Scores

// Support-weighted mean of per-class F1. Classes absent from y_true carry no
// weight; a present class that is never predicted correctly scores 0.
inline double weighted_f1(std::span<const int> y_true, std::span<const int> y_pred, int classes) {
  if (y_true.empty()) throw UsageError("weighted_f1: empty input");
  if (y_true.size() != y_pred.size()) throw UsageError("weighted_f1: length mismatch");
  std::vector<long> tp(static_cast<std::size_t>(classes), 0), predicted(tp), support(tp);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if (t < 0 || t >= classes || p < 0 || p >= classes) throw UsageError("weighted_f1: label out of range");
    ++support[static_cast<std::size_t>(t)];
    ++predicted[static_cast<std::size_t>(p)];
    if (t == p) ++tp[static_cast<std::size_t>(t)];
  }
  double total = 0.0;
  for (std::size_t k = 0; k < tp.size(); ++k) {
    if (support[k] == 0) continue;
    const double precision = predicted[k] > 0 ? static_cast<double>(tp[k]) / static_cast<double>(predicted[k]) : 0.0;
    const double recall = static_cast<double>(tp[k]) / static_cast<double>(support[k]);
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    total += f1 * static_cast<double>(support[k]);
  }
  return total / static_cast<double>(y_true.size());
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test (paired, two-sided)

struct WilcoxonResult {
  double statistic = 0.0;  // W = min(W+, W-)
  double w_plus = 0.0;
  double p_value = 1.0;
  int n_effective = 0;
  bool exact = true;
  bool degenerate = false;
};

inline constexpr int kWilcoxonExactLimit = 12;
inline constexpr int kWilcoxonMinPairs = 5;

namespace detail {

// Differences closer than this are treated as tied, and as zero below it.
inline constexpr double kTieTolerance = 1e-12;

// Average ranks (1-based) of |d| for the non-zero differences.
inline std::vector<double> signed_rank_magnitudes(const std::vector<double>& diffs) {
  const std::size_t n = diffs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && std::abs(diffs[order[j]]) - std::abs(diffs[order[i]]) <= kTieTolerance) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = avg;
    i = j;
  }
  return ranks;
}

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace detail

// Normal approximation of the two-sided p-value with tie-corrected variance
// and a 0.5 continuity correction.
inline double wilcoxon_normal_p(const std::vector<double>& ranks, double w_plus) {
  const double n = static_cast<double>(ranks.size());
  const double mean = n * (n + 1.0) / 4.0;
  double variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  std::vector<double> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    variance -= (t * t * t - t) / 48.0;
    i = j;
  }
  if (variance <= 0.0) return 1.0;
  const double z = std::max(0.0, std::abs(w_plus - mean) - 0.5) / std::sqrt(variance);
  return std::min(1.0, 2.0 * detail::normal_sf(z));
}

// Zero differences are discarded; tied magnitudes share average ranks. The
// p-value is P(min(W+, W-) <= observed) under random signs: exact by
// enumerating all 2^n sign vectors when n <= 12, normal approximation above.
// Fewer than 5 non-zero differences yields p = 1 with `degenerate` set.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("wilcoxon: length mismatch");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (std::abs(d) > detail::kTieTolerance) diffs.push_back(d);
  }
  WilcoxonResult r;
  r.n_effective = static_cast<int>(diffs.size());
  const std::vector<double> ranks = detail::signed_rank_magnitudes(diffs);
  double total = 0.0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    total += ranks[i];
    if (diffs[i] > 0) r.w_plus += ranks[i];
  }
  r.statistic = std::min(r.w_plus, total - r.w_plus);
  if (r.n_effective < kWilcoxonMinPairs) {
    r.degenerate = true;
    r.p_value = 1.0;
    return r;
  }
  if (r.n_effective <= kWilcoxonExactLimit) {
    const std::uint32_t masks = 1U << r.n_effective;
    std::uint64_t extreme = 0;
    for (std::uint32_t m = 0; m < masks; ++m) {
      double w = 0.0;
      for (int i = 0; i < r.n_effective; ++i) {
        if (m & (1U << i)) w += ranks[static_cast<std::size_t>(i)];
      }
      if (std::min(w, total - w) <= r.statistic + 1e-9) ++extreme;
    }
    r.p_value = static_cast<double>(extreme) / static_cast<double>(masks);
  } else {
    r.exact = false;
    r.p_value = wilcoxon_normal_p(ranks, r.w_plus);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Method descriptions

enum class Method { lr, mlp, gcn, gat, gate };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::lr: return "lr";
    case Method::mlp: return "mlp";
    case Method::gcn: return "gcn";
    case Method::gat: return "gat";
    case Method::gate: return "gate";
  }
  return "?";
}

// Case-insensitive, so table labels such as "GCN" parse too.
inline Method parse_method(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "lr") return Method::lr;
  if (s == "mlp") return Method::mlp;
  if (s == "gcn") return Method::gcn;
  if (s == "gat") return Method::gat;
  if (s == "gate") return Method::gate;
  throw UsageError("unknown method '" + name + "' (expected lr, mlp, gcn, gat or gate)");
}

inline bool is_graph_method(Method m) { return m == Method::gcn || m == Method::gat || m == Method::gate; }

struct MethodSpec {
  Method method = Method::lr;
  std::optional<SimilarityConfig> graph;
  GCNConfig gcn;
  GATConfig gat;
  GATEConfig gate;
  MLPConfig mlp;
  LRConfig lr;  // also the downstream classifier for GATE embeddings
  TrainConfig train;

  void validate() const {
    if (is_graph_method(method) && !graph) throw UsageError(to_string(method) + " requires a graph configuration");
    if (!is_graph_method(method) && graph) throw UsageError(to_string(method) + " does not take a graph configuration");
    if (graph) graph->validate();
    train.validate();
  }

  // Table-style name: "LR", "MLP", "GCN_C", "GAT_CB", ...
  std::string label() const {
    std::string name = to_string(method);
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
    if (graph) name += "_" + graph->suffix();
    return name;
  }
};

inline std::unique_ptr<Model> make_model(const MethodSpec& spec, int in_dim, int classes, std::uint64_t seed) {
  switch (spec.method) {
    case Method::lr: return std::make_unique<LogisticRegression>(in_dim, classes, spec.lr, seed);
    case Method::mlp: return std::make_unique<MLP>(in_dim, classes, spec.mlp, seed);
    case Method::gcn: return std::make_unique<GCN>(in_dim, classes, spec.gcn, seed);
    case Method::gat: return std::make_unique<GAT>(in_dim, classes, spec.gat, seed);
    case Method::gate: break;
  }
  throw UsageError("gate is not a direct classifier");
}

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldOutcome {
  int fold = 0;
  bool ok = false;
  double f1 = 0.0;
  double val_f1 = 0.0;
  int epochs_ran = 0;
  double wall_time_ms = 0.0;
  std::string error;
  // Leakage audit: table rows of the training graph and of the test fold.
  IndexList training_graph_rows;
  IndexList test_rows;
};

struct CVReport {
  MethodSpec spec;
  std::string dataset;
  std::uint64_t plan_hash = 0;
  std::vector<FoldOutcome> folds;
  std::vector<double> per_fold_f1;  // successful folds, in fold order
  std::vector<int> failures;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double mean_val_f1 = 0.0;

  bool all_failed() const { return per_fold_f1.empty(); }
};

inline void summarize(CVReport& r) {
  r.per_fold_f1.clear();
  r.failures.clear();
  double val_total = 0.0;
  for (const auto& f : r.folds) {
    if (f.ok) {
      r.per_fold_f1.push_back(f.f1);
      val_total += f.val_f1;
    } else {
      r.failures.push_back(f.fold);
    }
  }
  const double n = static_cast<double>(r.per_fold_f1.size());
  if (r.per_fold_f1.empty()) {
    r.mean = r.std = r.mean_val_f1 = 0.0;
    return;
  }
  r.mean = std::accumulate(r.per_fold_f1.begin(), r.per_fold_f1.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : r.per_fold_f1) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / n);
  r.mean_val_f1 = val_total / n;
}

namespace detail {

inline DataTable subset(const DataTable& table, std::span<const Index> rows) {
  DataTable out;
  out.features = select_rows(table.features, rows);
  out.labels = select_labels(table.labels, rows);
  out.feature_names = table.feature_names;
  out.class_count = table.class_count;
  out.name = table.name;
  return out;
}

inline IndexList iota_list(Index begin, Index end) {
  IndexList out;
  for (Index i = begin; i < end; ++i) out.push_back(i);
  return out;
}

// Trains on the nine non-test folds and returns test-row predictions plus
// the validation F1. Training sees only a copy of those nine folds; test rows
// enter only through the feature matrix used for inductive inference.
struct FoldPredictions {
  std::vector<int> test_predictions;
  double val_f1 = 0.0;
  int epochs_ran = 0;
  IndexList training_graph_rows;
};

inline FoldPredictions fit_and_predict(const MethodSpec& spec, const DataTable& table, const SplitIndices& split,
                                       std::uint64_t seed) {
  IndexList rows = split.train;
  rows.insert(rows.end(), split.validation.begin(), split.validation.end());
  const DataTable seen = subset(table, rows);
  const auto n_train = static_cast<Index>(split.train.size());
  const SplitIndices local{iota_list(0, n_train), iota_list(n_train, static_cast<Index>(rows.size())), {}};
  const std::vector<int> val_labels = select_labels(seen.labels, local.validation);
  TrainConfig train = spec.train;
  train.seed = seed;

  FoldPredictions out;
  auto to_table_rows = [&rows](const IndexList& local_rows) {
    IndexList global;
    for (Index r : local_rows) global.push_back(rows[static_cast<std::size_t>(r)]);
    return global;
  };

  if (spec.method == Method::gate) {
    GATE gate(static_cast<int>(table.cols()), spec.gate, seed);
    const IndexList all_seen = iota_list(0, static_cast<Index>(rows.size()));
    const TrainResult pre = train_unsupervised(gate, seen, all_seen, *spec.graph, train);
    out.training_graph_rows = to_table_rows(pre.graph_rows);

    DataTable embedded = seen;
    embedded.features = gate.embed(seen.features, build_graph(seen, *spec.graph));
    LogisticRegression classifier(gate.embedding_dim(), table.class_count, spec.lr, derive_seed(seed, 1));
    const TrainResult fit = train_supervised(classifier, embedded, local, train);
    out.val_f1 = weighted_f1(val_labels, fit.validation_predictions, table.class_count);
    out.epochs_ran = pre.epochs_ran() + fit.epochs_ran();

    const Matrix all_embeddings = gate.embed(table.features, build_graph(table.features, *spec.graph));
    out.test_predictions = predict_features(classifier, all_embeddings, split.test);
    return out;
  }

  auto model = make_model(spec, static_cast<int>(table.cols()), table.class_count, seed);
  const TrainResult fit = train_supervised(*model, seen, local, train, spec.graph);
  out.val_f1 = weighted_f1(val_labels, fit.validation_predictions, table.class_count);
  out.epochs_ran = fit.epochs_ran();
  if (model->uses_graph()) {
    out.training_graph_rows = to_table_rows(fit.graph_rows);
    out.test_predictions = predict_inductive(*model, table.features, fit, *spec.graph, split.test);
  } else {
    out.test_predictions = predict_features(*model, table.features, split.test);
  }
  return out;
}

}  // namespace detail

// One fold: split, train, predict the test rows, score. Training failures are
// captured in the outcome rather than thrown.
inline FoldOutcome run_fold(const MethodSpec& spec, const DataTable& table, const FoldPlan& plan, int fold) {
  const auto started = std::chrono::steady_clock::now();
  FoldOutcome outcome;
  outcome.fold = fold;
  const SplitIndices split = split_for_test_fold(plan, fold);
  outcome.test_rows = split.test;
  try {
    const auto fitted = detail::fit_and_predict(spec, table, split, derive_seed(spec.train.seed, 0x666f6c64ULL, fold));
    // Scoring sees predictions and the held-out labels only.
    outcome.f1 = weighted_f1(select_labels(table.labels, split.test), fitted.test_predictions, table.class_count);
    outcome.val_f1 = fitted.val_f1;
    outcome.epochs_ran = fitted.epochs_ran;
    outcome.training_graph_rows = fitted.training_graph_rows;
    outcome.ok = true;
  } catch (const TrainingFailure& e) {
    outcome.error = e.what();
  }
  outcome.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return outcome;
}

// Cross-validation that records failed folds instead of throwing.
inline CVReport run_cross_validation(const MethodSpec& spec, const DataTable& table, const FoldPlan& plan,
                                     int jobs = 1) {
  spec.validate();
  if (plan.assignments.size() != static_cast<std::size_t>(table.rows())) {
    throw UsageError("fold plan does not cover the table");
  }
  CVReport report;
  report.spec = spec;
  report.dataset = table.name;
  report.plan_hash = plan.hash();
  report.folds.resize(static_cast<std::size_t>(plan.folds));
  parallel_for(report.folds.size(), jobs,
               [&](std::size_t f) { report.folds[f] = run_fold(spec, table, plan, static_cast<int>(f)); });
  summarize(report);
  return report;
}

// As run_cross_validation, but throws when every fold failed.
inline CVReport cross_validate(const MethodSpec& spec, const DataTable& table, const FoldPlan& plan, int jobs = 1) {
  CVReport report = run_cross_validation(spec, table, plan, jobs);
  if (report.all_failed()) throw Error(spec.label() + ": all folds failed");
  return report;
}

// ---------------------------------------------------------------------------
// Grid search

inline std::vector<double> threshold_grid() {
  std::vector<double> out;
  for (int i = 0; i <= 10; ++i) out.push_back(static_cast<double>(i) / 10.0);
  return out;
}

// thresholds {0, 0.1, ..., 1} x modes {weighted, binary} x metrics.
inline std::vector<MethodSpec> graph_grid(const MethodSpec& base, std::span<const Metric> metrics,
                                          std::span<const EdgeMode> modes = {},
                                          std::span<const double> thresholds = {}) {
  static constexpr EdgeMode kAllModes[] = {EdgeMode::weighted, EdgeMode::binary};
  const std::vector<double> default_thresholds = threshold_grid();
  if (modes.empty()) modes = kAllModes;
  if (thresholds.empty()) thresholds = default_thresholds;
  std::vector<MethodSpec> cells;
  for (Metric metric : metrics) {
    for (EdgeMode mode : modes) {
      for (double t : thresholds) {
        MethodSpec cell = base;
        SimilarityConfig g = base.graph.value_or(SimilarityConfig{});
        g.metric = metric;
        g.mode = mode;
        g.threshold = t;
        cell.graph = g;
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

inline const std::vector<double>& lr_inverse_strengths() {
  static const std::vector<double> values{0.01, 0.05, 0.5, 0.8, 1.0, 5.0};
  return values;
}

// Penalties {L1, L2} x C values.
inline std::vector<MethodSpec> lr_grid(const MethodSpec& base, std::span<const double> inverse_strengths = {}) {
  if (inverse_strengths.empty()) inverse_strengths = lr_inverse_strengths();
  std::vector<MethodSpec> cells;
  for (Penalty p : {Penalty::l1, Penalty::l2}) {
    for (double c : inverse_strengths) {
      MethodSpec cell = base;
      cell.lr.penalty = p;
      cell.lr.inverse_strength = c;
      cells.push_back(cell);
    }
  }
  return cells;
}

struct GridResult {
  std::vector<CVReport> cells;
  std::size_t best = 0;

  const CVReport& best_report() const { return cells.at(best); }
};

// Runs every (cell, fold) pair and picks the cell with the highest mean
// validation-fold F1 (ties: first cell). Test folds play no part in selection.
inline GridResult grid_search(const std::vector<MethodSpec>& cells, const DataTable& table, const FoldPlan& plan,
                              int jobs = 1) {
  if (cells.empty()) throw UsageError("grid_search: no cells");
  for (const auto& c : cells) c.validate();
  GridResult result;
  result.cells.resize(cells.size());
  const auto folds = static_cast<std::size_t>(plan.folds);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    result.cells[c].spec = cells[c];
    result.cells[c].dataset = table.name;
    result.cells[c].plan_hash = plan.hash();
    result.cells[c].folds.resize(folds);
  }
  parallel_for(cells.size() * folds, jobs, [&](std::size_t task) {
    const std::size_t c = task / folds, f = task % folds;
    result.cells[c].folds[f] = run_fold(cells[c], table, plan, static_cast<int>(f));
  });
  double best_score = -1.0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    summarize(result.cells[c]);
    if (!result.cells[c].all_failed() && result.cells[c].mean_val_f1 > best_score) {
      best_score = result.cells[c].mean_val_f1;
      result.best = c;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Paired comparison

struct Comparison {
  std::string method;
  std::string baseline;
  WilcoxonResult test;
  double mean_difference = 0.0;  // method mean - baseline mean
  bool significant = false;      // p < 0.05
};

// Wilcoxon p-value of every report against every baseline report. All reports
// must come from the same fold plan; failed folds of either side drop the pair.
inline std::vector<Comparison> compare_methods(std::span<const CVReport> reports, std::span<const CVReport> baselines) {
  std::vector<Comparison> out;
  for (const auto& r : reports) {
    for (const auto& b : baselines) {
      if (r.plan_hash != b.plan_hash) {
        throw UsageError("compare_methods: " + r.spec.label() + " and " + b.spec.label() + " use different fold plans");
      }
      std::vector<double> xs, ys;
      for (std::size_t f = 0; f < std::min(r.folds.size(), b.folds.size()); ++f) {
        if (r.folds[f].ok && b.folds[f].ok) {
          xs.push_back(r.folds[f].f1);
          ys.push_back(b.folds[f].f1);
        }
      }
      Comparison c;
      c.method = r.spec.label();
      c.baseline = b.spec.label();
      c.test = wilcoxon_signed_rank(xs, ys);
      c.mean_difference = r.mean - b.mean;
      c.significant = c.test.p_value < 0.05;
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace tabgnn
