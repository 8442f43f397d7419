// tabgnn: command-line front end for synthetic data, graph building,
// benchmark runs and cross-run reports.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tabgnn/tabgnn.hpp"

namespace {

using namespace tabgnn;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kAllFailed = 3;

std::filesystem::path output_root() {
  const char* env = std::getenv("TABGNN_OUT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("results");
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
  } else {
    write_atomic(out_path, content);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph neural networks on similarity graphs built from tabular data."};
  app.footer(
      "Environment:\n"
      "  TABGNN_OUT  root directory for benchmark results when --out is not given (default: ./results)\n"
      "\nExit codes: 0 success, 1 usage error, 2 data error, 3 every benchmark run failed.");
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  int jobs = default_jobs();
  std::string out;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed for data generation, folds and initialization")
                       ->capture_default_str();
  app.add_option("--jobs", jobs, "Worker threads (default: hardware threads)")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out", out,
                 "Output path: file for synth, build-graph and report; results directory for benchmark "
                 "(default: $TABGNN_OUT/<dataset>-seed<seed>)");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a Gaussian-cluster dataset as CSV (f0..fN,label)");
  SyntheticSpec synth_spec;
  synth->add_option("--samples", synth_spec.samples, "Rows")->capture_default_str();
  synth->add_option("--features", synth_spec.features, "Feature columns")->capture_default_str();
  synth->add_option("--classes", synth_spec.classes, "Clusters, one per class")->capture_default_str();
  synth->add_option("--separation", synth_spec.cluster_mean_separation, "Scale of the cluster centres")->capture_default_str();
  synth->add_option("--stddev", synth_spec.cluster_stddev, "Per-cluster standard deviation")->capture_default_str();

  // build-graph
  auto* graph_cmd = app.add_subcommand("build-graph", "Build a similarity graph; edge list to --out, stats JSON to stdout");
  std::string graph_input, graph_label = "class", graph_metric = "cosine", graph_mode = "binary";
  double graph_threshold = 0.5;
  bool graph_no_scale = false;
  graph_cmd->add_option("--input", graph_input, "Input CSV")->required();
  graph_cmd->add_option("--label", graph_label, "Label column name or 0-based index")->capture_default_str();
  graph_cmd->add_option("--metric", graph_metric, "cosine or euclidean")->capture_default_str();
  graph_cmd->add_option("--threshold", graph_threshold, "Edge threshold in [0, 1]")->capture_default_str();
  graph_cmd->add_option("--mode", graph_mode, "weighted or binary")->capture_default_str();
  graph_cmd->add_flag("--no-scale", graph_no_scale, "Use raw features instead of min-max scaled ones");

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Cross-validated benchmark of one or more methods on one dataset");
  std::string config_path, manifest_path, methods_list = "lr";
  InlineRun inline_run;
  std::optional<int> inline_epochs;
  bench->add_option("--config", config_path, "Run configuration file");
  bench->add_option("--manifest", manifest_path, "Re-run the configuration recorded in a manifest.json");
  bench->add_option("--data", inline_run.dataset, "Dataset CSV (inline run)");
  bench->add_option("--label", inline_run.label, "Label column (inline run)")->capture_default_str();
  bench->add_flag("--synthetic", inline_run.synthetic, "Use the default synthetic dataset (inline run)");
  bench->add_option("--methods", methods_list, "Comma list of lr, mlp, gcn, gat, gate")->capture_default_str();
  bench->add_option("--metric", inline_run.metric, "cosine, euclidean or both")->capture_default_str();
  bench->add_option("--mode", inline_run.mode, "weighted, binary or both")->capture_default_str();
  bench->add_option("--threshold", inline_run.threshold, "Value, comma list or 'grid'")->capture_default_str();
  bench->add_option("--penalty", inline_run.penalty, "l1, l2 or both")->capture_default_str();
  bench->add_option("--C", inline_run.inverse_strength, "Inverse regularization strength: value, list or 'grid'")
      ->capture_default_str();
  bench->add_option("--folds", inline_run.folds, "Cross-validation folds")->capture_default_str();
  bench->add_option("--epochs", inline_epochs, "Maximum training epochs");
  bench->add_flag("--timing", inline_run.timing, "Record per-fold wall time (makes folds.jsonl non-reproducible)");
  auto* config_opt = bench->get_option("--config");
  bench->get_option("--manifest")->excludes(config_opt);
  bench->get_option("--data")->excludes(config_opt)->excludes(bench->get_option("--manifest"));

  // report
  auto* report = app.add_subcommand("report", "Merge results directories into a methods x datasets CSV");
  std::vector<std::string> run_dirs;
  report->add_option("--runs", run_dirs, "Results directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) {
      synth_spec.seed = seed;
      std::ostringstream csv;
      write_csv(csv, generate_synthetic(synth_spec));
      emit(out, csv.str());
      return kOk;
    }

    if (*graph_cmd) {
      const SimilarityConfig config{parse_metric(graph_metric), graph_threshold, parse_edge_mode(graph_mode)};
      config.validate();
      DataTable table = load_csv(graph_input, graph_label);
      if (!graph_no_scale) table = scale_features(table);
      const AdjacencyMatrix a = build_graph(table.features, config);
      if (!out.empty()) {
        std::ostringstream edges;
        write_edge_list(edges, a, config);
        write_atomic(out, edges.str());
      }
      std::cout << to_json(graph_stats(a)).dump(2) << '\n';
      return kOk;
    }

    if (*bench) {
      RunConfig config;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw UsageError("cannot open config '" + config_path + "'");
        config = parse_run_config(in);
      } else if (!manifest_path.empty()) {
        config = config_from_manifest(manifest_path);
      } else {
        if (inline_run.dataset.empty() && !inline_run.synthetic) throw UsageError("give --config, --manifest, --data or --synthetic");
        inline_run.methods = split_list(methods_list);
        inline_run.epochs = inline_epochs;
        inline_run.seed = seed;
        config = config_from_inline(inline_run);
      }
      if (seed_opt->count() > 0) config.seed = seed;

      const BenchmarkResult result = run_benchmark(config, jobs);
      const std::filesystem::path dir =
          out.empty() ? output_root() / (result.dataset + "-seed" + std::to_string(config.seed)) : std::filesystem::path(out);
      write_results(dir, result);
      for (const auto& m : result.methods) {
        const CVReport& r = m.selected();
        std::cout << m.name << '\t' << r.spec.label() << '\t' << format_fixed(r.mean, 4) << " (" << format_fixed(r.std, 4)
                  << ")";
        if (!r.failures.empty()) std::cout << "\tfailed folds: " << r.failures.size();
        std::cout << '\n';
      }
      std::cout << "results: " << dir.string() << '\n';
      return result.all_failed() ? kAllFailed : kOk;
    }

    if (*report) {
      std::vector<RunRecord> runs;
      for (const auto& d : run_dirs) runs.push_back(read_run(d));
      emit(out, report_csv(runs));
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
