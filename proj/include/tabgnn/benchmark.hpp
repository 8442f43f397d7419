#pragma once

// Benchmark runs: config parsing, grid expansion, execution and the files a
// results directory holds.
//
// Config format (sections and "key = value" lines, '#' comments):
//
//   [run]
//   dataset = data/wine.csv      # or: synthetic = true (+ samples, features,
//   label = class                #     classes, separation, stddev)
//   seed = 0
//   folds = 10
//   scale = true
//   baseline = lr                # method compared against in the report
//   timing = false               # true fills wall_time_ms in folds.jsonl
//
//   [method gcn_c]
//   kind = gcn                   # lr | mlp | gcn | gat | gate
//   metric = cosine              # cosine | euclidean | both
//   mode = weighted              # weighted | binary | both
//   threshold = grid             # value, comma list, or grid (0, 0.1, ..., 1)
//
// Other method keys: penalty (l1 | l2 | both), C (value, list or grid),
// learning_rate, epochs, patience (capped at epochs unless given), batch_size, hidden (comma list), heads,
// encoder (comma list), structure_weight, rescale. Any list-valued key makes
// the method a grid; the cell with the best mean validation F1 is selected.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tabgnn/dataset.hpp"
#include "tabgnn/evaluation.hpp"

#ifndef TABGNN_VERSION
#define TABGNN_VERSION "0.0.0"
#endif

namespace tabgnn {

inline constexpr const char* kVersion = TABGNN_VERSION;

// ---------------------------------------------------------------------------
// Small helpers

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes to a sibling temp file, then renames over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  for (const auto cell : detail::split_commas(s)) {
    if (!cell.empty()) out.emplace_back(cell);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

// ---------------------------------------------------------------------------
// Config text

struct IniSection {
  std::string name;  // "run" or "method <id>"
  std::vector<std::pair<std::string, std::string>> entries;
  int line = 0;
};

inline std::vector<IniSection> parse_ini(std::istream& in) {
  std::vector<IniSection> sections;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line(detail::trim(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError("config line " + std::to_string(line_no) + ": unterminated section");
      sections.push_back({std::string(detail::trim(std::string_view(line).substr(1, line.size() - 2))), {}, line_no});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || sections.empty()) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected 'key = value' inside a section");
    }
    sections.back().entries.emplace_back(std::string(detail::trim(std::string_view(line).substr(0, eq))),
                                         std::string(detail::trim(std::string_view(line).substr(eq + 1))));
  }
  return sections;
}

// ---------------------------------------------------------------------------
// Run configuration

struct MethodEntry {
  std::string name;
  MethodSpec base;
  std::vector<Metric> metrics{Metric::cosine};
  std::vector<EdgeMode> modes{EdgeMode::binary};
  std::vector<double> thresholds{0.5};
  std::vector<Penalty> penalties{Penalty::l2};
  std::vector<double> inverse_strengths{1.0};

  bool uses_lr_settings() const { return base.method == Method::lr || base.method == Method::gate; }

  std::vector<MethodSpec> cells() const {
    std::vector<MethodSpec> graph_cells;
    if (is_graph_method(base.method)) {
      for (Metric m : metrics) {
        for (EdgeMode mode : modes) {
          for (double t : thresholds) {
            MethodSpec cell = base;
            SimilarityConfig g = base.graph.value_or(SimilarityConfig{});
            g.metric = m;
            g.mode = mode;
            g.threshold = t;
            cell.graph = g;
            graph_cells.push_back(cell);
          }
        }
      }
    } else {
      graph_cells.push_back(base);
    }
    if (!uses_lr_settings()) return graph_cells;
    std::vector<MethodSpec> out;
    for (const auto& g : graph_cells) {
      for (Penalty p : penalties) {
        for (double c : inverse_strengths) {
          MethodSpec cell = g;
          cell.lr.penalty = p;
          cell.lr.inverse_strength = c;
          out.push_back(cell);
        }
      }
    }
    return out;
  }
};

struct RunConfig {
  std::string dataset_path;
  std::string label = "class";
  std::optional<SyntheticSpec> synthetic;
  bool scale = true;
  int folds = 10;
  std::uint64_t seed = 0;
  std::string baseline;  // method name; empty means the first method
  // Wall-clock times are the only non-reproducible output; off by default so
  // a results directory regenerates byte for byte from its manifest.
  bool record_timing = false;
  std::vector<MethodEntry> methods;

  void validate() const {
    if (methods.empty()) throw UsageError("no methods configured");
    if (dataset_path.empty() && !synthetic) throw UsageError("no dataset configured");
    std::map<std::string, int> seen;
    for (const auto& m : methods) {
      if (++seen[m.name] > 1) throw UsageError("duplicate method name '" + m.name + "'");
      for (const auto& c : m.cells()) c.validate();
    }
    if (!baseline.empty() && !seen.count(baseline)) throw UsageError("baseline '" + baseline + "' is not a method");
  }

  const std::string& baseline_name() const { return baseline.empty() ? methods.front().name : baseline; }
};

namespace detail {

inline double parse_double_value(const std::string& key, const std::string& v) {
  const auto d = parse_real(v);
  if (!d) throw UsageError("'" + key + "': cannot parse '" + v + "' as a number");
  return *d;
}

inline int parse_int_value(const std::string& key, const std::string& v) {
  const double d = parse_double_value(key, v);
  if (d != std::floor(d) || std::abs(d) > 1e9) throw UsageError("'" + key + "': expected an integer, got '" + v + "'");
  return static_cast<int>(d);
}

inline bool parse_bool_value(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("'" + key + "': expected true or false, got '" + v + "'");
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& s : split_list(v)) out.push_back(parse_int_value(key, s));
  return out;
}

inline std::vector<double> parse_real_list(const std::string& key, const std::string& v,
                                           const std::vector<double>& grid) {
  if (v == "grid") return grid;
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(parse_double_value(key, s));
  if (out.empty()) throw UsageError("'" + key + "': empty list");
  return out;
}

inline std::string format_real_list(const std::vector<double>& v) {
  std::vector<std::string> parts;
  for (double d : v) parts.push_back(detail::format_real(d));
  return join(parts);
}

inline std::string format_int_list(const std::vector<int>& v) {
  std::vector<std::string> parts;
  for (int d : v) parts.push_back(std::to_string(d));
  return join(parts);
}

inline void apply_method_key(MethodEntry& m, const std::string& key, const std::string& value) {
  MethodSpec& s = m.base;
  if (key == "kind") {
    // handled by the caller
  } else if (key == "metric") {
    m.metrics = value == "both" ? std::vector<Metric>{Metric::cosine, Metric::euclidean}
                                : std::vector<Metric>{parse_metric(value)};
  } else if (key == "mode") {
    m.modes = value == "both" ? std::vector<EdgeMode>{EdgeMode::weighted, EdgeMode::binary}
                              : std::vector<EdgeMode>{parse_edge_mode(value)};
  } else if (key == "threshold") {
    m.thresholds = parse_real_list(key, value, threshold_grid());
  } else if (key == "rescale") {
    SimilarityConfig g = s.graph.value_or(SimilarityConfig{});
    g.rescale = parse_bool_value(key, value);
    s.graph = g;
  } else if (key == "penalty") {
    m.penalties = value == "both" ? std::vector<Penalty>{Penalty::l1, Penalty::l2}
                                  : std::vector<Penalty>{parse_penalty(value)};
  } else if (key == "C") {
    m.inverse_strengths = parse_real_list(key, value, lr_inverse_strengths());
  } else if (key == "learning_rate") {
    s.train.learning_rate = parse_double_value(key, value);
  } else if (key == "epochs") {
    s.train.max_epochs = parse_int_value(key, value);
  } else if (key == "patience") {
    s.train.patience = parse_int_value(key, value);
  } else if (key == "batch_size") {
    s.train.batch_size = parse_int_value(key, value);
  } else if (key == "hidden") {
    const auto dims = parse_int_list(key, value);
    s.gcn.hidden = dims;
    s.gat.hidden = dims;
    s.mlp.hidden = dims;
  } else if (key == "heads") {
    s.gat.heads = parse_int_value(key, value);
  } else if (key == "encoder") {
    s.gate.encoder = parse_int_list(key, value);
  } else if (key == "structure_weight") {
    s.gate.structure_weight = parse_double_value(key, value);
  } else {
    throw UsageError("unknown method key '" + key + "'");
  }
}

// Per-kind defaults for hidden layer widths, so the echo only prints what applies.
inline std::vector<int> hidden_of(const MethodSpec& s) {
  switch (s.method) {
    case Method::gcn: return s.gcn.hidden;
    case Method::gat: return s.gat.hidden;
    case Method::mlp: return s.mlp.hidden;
    default: return {};
  }
}

}  // namespace detail

inline RunConfig parse_run_config(std::istream& in) {
  RunConfig config;
  bool have_run = false;
  for (const auto& section : parse_ini(in)) {
    if (section.name == "run") {
      have_run = true;
      SyntheticSpec synth;
      bool use_synth = false;
      for (const auto& [key, value] : section.entries) {
        if (key == "dataset") {
          config.dataset_path = value;
        } else if (key == "label") {
          config.label = value;
        } else if (key == "seed") {
          config.seed = static_cast<std::uint64_t>(detail::parse_double_value(key, value));
        } else if (key == "folds") {
          config.folds = detail::parse_int_value(key, value);
        } else if (key == "scale") {
          config.scale = detail::parse_bool_value(key, value);
        } else if (key == "baseline") {
          config.baseline = value;
        } else if (key == "timing") {
          config.record_timing = detail::parse_bool_value(key, value);
        } else if (key == "synthetic") {
          use_synth = detail::parse_bool_value(key, value);
        } else if (key == "samples") {
          synth.samples = detail::parse_int_value(key, value);
        } else if (key == "features") {
          synth.features = detail::parse_int_value(key, value);
        } else if (key == "classes") {
          synth.classes = detail::parse_int_value(key, value);
        } else if (key == "separation") {
          synth.cluster_mean_separation = detail::parse_double_value(key, value);
        } else if (key == "stddev") {
          synth.cluster_stddev = detail::parse_double_value(key, value);
        } else {
          throw UsageError("config line " + std::to_string(section.line) + ": unknown run key '" + key + "'");
        }
      }
      if (use_synth) config.synthetic = synth;
    } else if (section.name.rfind("method ", 0) == 0) {
      MethodEntry m;
      m.name = std::string(detail::trim(std::string_view(section.name).substr(7)));
      if (m.name.empty() || m.name.find_first_of(", \t\"") != std::string::npos) {
        throw UsageError("config line " + std::to_string(section.line) + ": bad method name '" + m.name + "'");
      }
      const auto kind = std::find_if(section.entries.begin(), section.entries.end(),
                                     [](const auto& e) { return e.first == "kind"; });
      if (kind == section.entries.end()) throw UsageError("method '" + m.name + "' has no kind");
      m.base.method = parse_method(kind->second);
      if (is_graph_method(m.base.method)) m.base.graph = SimilarityConfig{};
      bool explicit_patience = false;
      for (const auto& [key, value] : section.entries) {
        detail::apply_method_key(m, key, value);
        explicit_patience |= key == "patience";
      }
      // An unstated patience never exceeds the epoch budget.
      if (!explicit_patience) m.base.train.patience = std::min(m.base.train.patience, m.base.train.max_epochs);
      config.methods.push_back(std::move(m));
    } else {
      throw UsageError("config line " + std::to_string(section.line) + ": unknown section '" + section.name + "'");
    }
  }
  if (!have_run) throw UsageError("config has no [run] section");
  config.validate();
  return config;
}

// Canonical text form; parsing it back yields an equivalent configuration.
inline std::string to_config_text(const RunConfig& c) {
  std::ostringstream out;
  out << "[run]\n";
  if (c.synthetic) {
    out << "synthetic = true\nsamples = " << c.synthetic->samples << "\nfeatures = " << c.synthetic->features
        << "\nclasses = " << c.synthetic->classes << "\nseparation = " << detail::format_real(c.synthetic->cluster_mean_separation)
        << "\nstddev = " << detail::format_real(c.synthetic->cluster_stddev) << '\n';
  } else {
    out << "dataset = " << c.dataset_path << "\nlabel = " << c.label << '\n';
  }
  out << "seed = " << c.seed << "\nfolds = " << c.folds << "\nscale = " << (c.scale ? "true" : "false")
      << "\nbaseline = " << c.baseline_name() << "\ntiming = " << (c.record_timing ? "true" : "false") << '\n';
  for (const auto& m : c.methods) {
    const MethodSpec& s = m.base;
    out << "\n[method " << m.name << "]\nkind = " << to_string(s.method) << '\n';
    if (is_graph_method(s.method)) {
      std::vector<std::string> metrics, modes;
      for (Metric x : m.metrics) metrics.push_back(to_string(x));
      for (EdgeMode x : m.modes) modes.push_back(to_string(x));
      out << "metric = " << (metrics.size() == 2 ? "both" : metrics.front()) << "\nmode = "
          << (modes.size() == 2 ? "both" : modes.front()) << "\nthreshold = " << detail::format_real_list(m.thresholds)
          << "\nrescale = " << (s.graph && !s.graph->rescale ? "false" : "true") << '\n';
    }
    if (m.uses_lr_settings()) {
      out << "penalty = " << (m.penalties.size() == 2 ? "both" : to_string(m.penalties.front()))
          << "\nC = " << detail::format_real_list(m.inverse_strengths) << '\n';
    }
    if (const auto hidden = detail::hidden_of(s); !hidden.empty()) out << "hidden = " << detail::format_int_list(hidden) << '\n';
    if (s.method == Method::gat) out << "heads = " << s.gat.heads << '\n';
    if (s.method == Method::gate) {
      out << "encoder = " << detail::format_int_list(s.gate.encoder)
          << "\nstructure_weight = " << detail::format_real(s.gate.structure_weight) << '\n';
    }
    out << "learning_rate = " << detail::format_real(s.train.learning_rate) << "\nepochs = " << s.train.max_epochs
        << "\npatience = " << s.train.patience << "\nbatch_size = " << s.train.batch_size << '\n';
  }
  return out.str();
}

// Command-line form of a run: each listed method kind becomes a section named
// after it, and the graph and LR keys apply wherever they are meaningful.
struct InlineRun {
  std::string dataset;  // empty with synthetic = true
  std::string label = "class";
  bool synthetic = false;
  std::vector<std::string> methods{"lr"};
  std::string metric = "cosine";
  std::string mode = "binary";
  std::string threshold = "0.5";
  std::string penalty = "l2";
  std::string inverse_strength = "1";
  int folds = 10;
  std::optional<int> epochs;
  std::uint64_t seed = 0;
  bool timing = false;
};

inline RunConfig config_from_inline(const InlineRun& r) {
  std::ostringstream text;
  text << "[run]\n";
  if (r.synthetic) {
    text << "synthetic = true\n";
  } else {
    text << "dataset = " << r.dataset << "\nlabel = " << r.label << '\n';
  }
  text << "seed = " << r.seed << "\nfolds = " << r.folds << "\ntiming = " << (r.timing ? "true" : "false") << '\n';
  for (const auto& name : r.methods) {
    const Method kind = parse_method(name);
    text << "[method " << to_string(kind) << "]\nkind = " << to_string(kind) << '\n';
    if (is_graph_method(kind)) {
      text << "metric = " << r.metric << "\nmode = " << r.mode << "\nthreshold = " << r.threshold << '\n';
    }
    if (kind == Method::lr || kind == Method::gate) {
      text << "penalty = " << r.penalty << "\nC = " << r.inverse_strength << '\n';
    }
    if (r.epochs) text << "epochs = " << *r.epochs << '\n';
  }
  std::istringstream in(text.str());
  return parse_run_config(in);
}

// ---------------------------------------------------------------------------
// Execution

struct LoadedData {
  DataTable table;
  std::string content_hash;  // FNV-1a 64 of the source bytes (file or generated CSV)
};

inline LoadedData load_dataset(const RunConfig& c) {
  LoadedData d;
  if (c.synthetic) {
    SyntheticSpec spec = *c.synthetic;
    spec.seed = c.seed;
    d.table = generate_synthetic(spec);
    std::ostringstream csv;
    write_csv(csv, d.table);
    d.content_hash = hex64(fnv1a64(csv.str()));
  } else {
    const std::string bytes = read_file(c.dataset_path);
    std::istringstream in(bytes);
    std::string name = std::filesystem::path(c.dataset_path).stem().string();
    d.table = parse_csv(in, c.label, name);
    d.content_hash = hex64(fnv1a64(bytes));
  }
  if (c.scale) d.table = scale_features(d.table);
  return d;
}

struct MethodResult {
  std::string name;
  GridResult grid;

  const CVReport& selected() const { return grid.best_report(); }
};

struct BenchmarkResult {
  RunConfig config;
  std::string dataset;
  std::string dataset_hash;
  Index rows = 0, cols = 0;
  int classes = 0;
  FoldPlan plan;
  std::vector<MethodResult> methods;
  std::vector<Comparison> comparisons;

  bool all_failed() const {
    return std::all_of(methods.begin(), methods.end(), [](const MethodResult& m) {
      return std::all_of(m.grid.cells.begin(), m.grid.cells.end(), [](const CVReport& r) { return r.all_failed(); });
    });
  }
};

inline BenchmarkResult run_benchmark(const RunConfig& config, int jobs) {
  config.validate();
  const LoadedData data = load_dataset(config);
  BenchmarkResult result;
  result.config = config;
  result.dataset = data.table.name;
  result.dataset_hash = data.content_hash;
  result.rows = data.table.rows();
  result.cols = data.table.cols();
  result.classes = data.table.class_count;
  result.plan = stratified_kfold(data.table, config.folds, config.seed);
  for (const auto& m : config.methods) {
    std::vector<MethodSpec> cells = m.cells();
    for (auto& cell : cells) cell.train.seed = config.seed;
    result.methods.push_back({m.name, grid_search(cells, data.table, result.plan, jobs)});
  }
  // Every unordered pair of methods, using each method's selected cell.
  for (std::size_t i = 0; i < result.methods.size(); ++i) {
    for (std::size_t j = i + 1; j < result.methods.size(); ++j) {
      const CVReport& a = result.methods[i].selected();
      const CVReport& b = result.methods[j].selected();
      Comparison c = compare_methods(std::span<const CVReport>(&a, 1), std::span<const CVReport>(&b, 1)).front();
      c.method = result.methods[i].name;
      c.baseline = result.methods[j].name;
      result.comparisons.push_back(c);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Results directory contents

namespace detail {

inline nlohmann::ordered_json cell_json(const MethodSpec& s) {
  nlohmann::ordered_json j;
  j["label"] = s.label();
  if (s.graph) {
    j["metric"] = to_string(s.graph->metric);
    j["threshold"] = s.graph->threshold;
    j["mode"] = to_string(s.graph->mode);
  } else {
    j["metric"] = nullptr;
    j["threshold"] = nullptr;
    j["mode"] = nullptr;
  }
  if (s.method == Method::lr || s.method == Method::gate) {
    j["penalty"] = to_string(s.lr.penalty);
    j["C"] = s.lr.inverse_strength;
  } else {
    j["penalty"] = nullptr;
    j["C"] = nullptr;
  }
  return j;
}

inline std::string cell_columns(const MethodSpec& s) {
  std::string out = s.label() + ',';
  if (s.graph) {
    out += to_string(s.graph->metric) + ',' + to_string(s.graph->mode) + ',' + detail::format_real(s.graph->threshold) + ',';
  } else {
    out += ",,,";
  }
  if (s.method == Method::lr || s.method == Method::gate) {
    out += to_string(s.lr.penalty) + ',' + detail::format_real(s.lr.inverse_strength);
  } else {
    out += ',';
  }
  return out;
}

inline constexpr const char* kCellHeader = "label,metric,mode,threshold,penalty,C";

}  // namespace detail

// One JSON object per (method, grid cell, fold). wall_time_ms is null unless
// the run records timing.
inline std::string folds_jsonl(const BenchmarkResult& r) {
  std::string out;
  for (const auto& m : r.methods) {
    for (std::size_t c = 0; c < m.grid.cells.size(); ++c) {
      const CVReport& rep = m.grid.cells[c];
      for (const auto& f : rep.folds) {
        nlohmann::ordered_json j;
        j["dataset"] = r.dataset;
        j["method"] = m.name;
        const nlohmann::ordered_json cell = detail::cell_json(rep.spec);
        for (const auto& [k, v] : cell.items()) j[k] = v;
        j["selected"] = c == m.grid.best;
        j["fold"] = f.fold;
        j["ok"] = f.ok;
        j["f1"] = f.ok ? nlohmann::ordered_json(f.f1) : nlohmann::ordered_json(nullptr);
        j["val_f1"] = f.ok ? nlohmann::ordered_json(f.val_f1) : nlohmann::ordered_json(nullptr);
        j["epochs_ran"] = f.epochs_ran;
        j["wall_time_ms"] = r.config.record_timing ? nlohmann::ordered_json(f.wall_time_ms) : nlohmann::ordered_json(nullptr);
        if (!f.ok) j["error"] = f.error;
        out += j.dump() + '\n';
      }
    }
  }
  return out;
}

inline std::string grid_csv(const BenchmarkResult& r) {
  std::string out = std::string("dataset,method,") + detail::kCellHeader + ",mean_f1,std_f1,mean_val_f1,failed_folds,selected\n";
  for (const auto& m : r.methods) {
    for (std::size_t c = 0; c < m.grid.cells.size(); ++c) {
      const CVReport& rep = m.grid.cells[c];
      out += r.dataset + ',' + m.name + ',' + detail::cell_columns(rep.spec) + ',' + format_fixed(rep.mean, 6) + ',' +
             format_fixed(rep.std, 6) + ',' + format_fixed(rep.mean_val_f1, 6) + ',' +
             std::to_string(rep.failures.size()) + ',' + (c == m.grid.best ? "1" : "0") + '\n';
    }
  }
  return out;
}

// Selected cell per method; fold_f1 lists every fold (empty when it failed).
inline std::string summary_csv(const BenchmarkResult& r) {
  std::string out =
      std::string("dataset,method,") + detail::kCellHeader + ",mean_f1,std_f1,mean_val_f1,folds_ok,fold_f1\n";
  for (const auto& m : r.methods) {
    const CVReport& rep = m.selected();
    std::vector<std::string> per_fold;
    for (const auto& f : rep.folds) per_fold.push_back(f.ok ? format_fixed(f.f1, 6) : "");
    out += r.dataset + ',' + m.name + ',' + detail::cell_columns(rep.spec) + ',' + format_fixed(rep.mean, 6) + ',' +
           format_fixed(rep.std, 6) + ',' + format_fixed(rep.mean_val_f1, 6) + ',' +
           std::to_string(rep.per_fold_f1.size()) + ',' + join(per_fold, ";") + '\n';
  }
  return out;
}

inline std::string significance_csv(const BenchmarkResult& r) {
  std::string out = "dataset,method,baseline,n,statistic,p_value,mean_difference,significant\n";
  for (const auto& c : r.comparisons) {
    out += r.dataset + ',' + c.method + ',' + c.baseline + ',' + std::to_string(c.test.n_effective) + ',' +
           format_fixed(c.test.statistic, 1) + ',' + format_fixed(c.test.p_value, 4) + ',' +
           format_fixed(c.mean_difference, 4) + ',' + (c.significant ? "1" : "0") + '\n';
  }
  return out;
}

inline nlohmann::ordered_json manifest_json(const BenchmarkResult& r) {
  nlohmann::ordered_json j;
  j["tool"] = "tabgnn";
  j["version"] = kVersion;
  j["seed"] = r.config.seed;
  j["dataset"] = {{"name", r.dataset},
                  {"source", r.config.synthetic ? std::string("synthetic") : r.config.dataset_path},
                  {"fnv1a64", r.dataset_hash},
                  {"rows", r.rows},
                  {"features", r.cols},
                  {"classes", r.classes}};
  j["fold_plan_hash"] = hex64(r.plan.hash());
  j["config"] = to_config_text(r.config);
  return j;
}

inline void write_results(const std::filesystem::path& dir, const BenchmarkResult& r) {
  std::filesystem::create_directories(dir);
  write_atomic(dir / "folds.jsonl", folds_jsonl(r));
  write_atomic(dir / "grid.csv", grid_csv(r));
  write_atomic(dir / "summary.csv", summary_csv(r));
  write_atomic(dir / "significance.csv", significance_csv(r));
  write_atomic(dir / "manifest.json", manifest_json(r).dump(2) + '\n');
}

inline RunConfig config_from_manifest(const std::filesystem::path& manifest) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest '" + manifest.string() + "': " + e.what());
  }
  if (!j.contains("config") || !j["config"].is_string()) throw DataError("manifest has no config text");
  std::istringstream in(j["config"].get<std::string>());
  return parse_run_config(in);
}

// ---------------------------------------------------------------------------
// Cross-run report

struct SummaryRow {
  std::string dataset;
  std::string method;
  std::string label;
  double mean = 0.0;
  double std = 0.0;
};

struct SignificanceRow {
  std::string dataset, method, baseline;
  double p_value = 1.0;
  bool significant = false;
};

struct RunRecord {
  std::string baseline;
  std::vector<SummaryRow> summary;
  std::vector<SignificanceRow> significance;
};

namespace detail {

inline std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path, std::size_t min_cols) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty");
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    for (const auto c : split_commas(line)) cells.emplace_back(c);
    if (cells.size() < min_cols) throw DataError("'" + path.string() + "': malformed row '" + line + "'");
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double cell_real(const std::filesystem::path& path, const std::string& s) {
  const auto v = parse_real(s);
  if (!v) throw DataError("'" + path.string() + "': bad number '" + s + "'");
  return *v;
}

}  // namespace detail

inline RunRecord read_run(const std::filesystem::path& dir) {
  RunRecord run;
  const auto summary_path = dir / "summary.csv";
  const auto sig_path = dir / "significance.csv";
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(summary_path)) throw DataError("'" + dir.string() + "' has no summary.csv");
  for (const auto& c : detail::read_csv_rows(summary_path, 13)) {
    run.summary.push_back({c[0], c[1], c[2], detail::cell_real(summary_path, c[8]), detail::cell_real(summary_path, c[9])});
  }
  if (std::filesystem::exists(sig_path)) {
    for (const auto& c : detail::read_csv_rows(sig_path, 8)) {
      run.significance.push_back({c[0], c[1], c[2], detail::cell_real(sig_path, c[5]), c[7] == "1"});
    }
  }
  if (std::filesystem::exists(manifest_path)) {
    run.baseline = config_from_manifest(manifest_path).baseline_name();
  }
  return run;
}

// Methods x datasets table of "mean(std)" cells. A trailing '*' marks a
// method whose fold scores differ significantly (p < 0.05) from the run's
// baseline method.
inline std::string report_csv(const std::vector<RunRecord>& runs) {
  std::vector<std::string> datasets, methods;
  std::map<std::pair<std::string, std::string>, std::string> cells;
  auto remember = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& run : runs) {
    for (const auto& row : run.summary) {
      remember(datasets, row.dataset);
      remember(methods, row.method);
      std::string cell = format_fixed(row.mean, 3) + "(" + format_fixed(row.std, 3) + ")";
      for (const auto& s : run.significance) {
        const bool pair = (s.method == row.method && s.baseline == run.baseline) ||
                          (s.baseline == row.method && s.method == run.baseline);
        if (s.dataset == row.dataset && pair && s.significant) cell += "*";
      }
      if (!cells.emplace(std::make_pair(row.method, row.dataset), cell).second) {
        throw DataError("method '" + row.method + "' appears twice for dataset '" + row.dataset + "'");
      }
    }
  }
  std::string out = "method";
  for (const auto& d : datasets) out += ',' + d;
  out += '\n';
  for (const auto& m : methods) {
    out += m;
    for (const auto& d : datasets) {
      const auto it = cells.find({m, d});
      out += ',' + (it == cells.end() ? std::string() : it->second);
    }
    out += '\n';
  }
  return out;
}

}  // namespace tabgnn
