#pragma once

// Similarity graphs over table rows.
//
// Pipeline: pairwise similarity -> global off-diagonal min-max scaling to
// [0, 1] -> threshold (weighted keeps the similarity, binary writes 1) ->
// self-loops forced to 1. The scaling is global rather than per column so the
// matrix stays symmetric.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <iostream>
#include <optional>
#include <ostream>
#include <span>
#include <string>

#include <json.hpp>

#include "tabgnn/dataset.hpp"
#include "tabgnn/error.hpp"
#include "tabgnn/tensor.hpp"

namespace tabgnn {

enum class Metric { cosine, euclidean };
enum class EdgeMode { weighted, binary };
enum class Normalization { row_mean, symmetric };

inline std::string to_string(Metric m) { return m == Metric::cosine ? "cosine" : "euclidean"; }
inline std::string to_string(EdgeMode m) { return m == EdgeMode::weighted ? "weighted" : "binary"; }
inline std::string to_string(Normalization n) { return n == Normalization::row_mean ? "row_mean" : "symmetric"; }

inline Metric parse_metric(const std::string& s) {
  if (s == "cosine" || s == "C") return Metric::cosine;
  if (s == "euclidean" || s == "E") return Metric::euclidean;
  throw UsageError("unknown metric '" + s + "' (expected cosine or euclidean)");
}

inline EdgeMode parse_edge_mode(const std::string& s) {
  if (s == "weighted") return EdgeMode::weighted;
  if (s == "binary" || s == "B") return EdgeMode::binary;
  throw UsageError("unknown graph mode '" + s + "' (expected weighted or binary)");
}

struct SimilarityConfig {
  Metric metric = Metric::cosine;
  double threshold = 0.5;
  EdgeMode mode = EdgeMode::binary;
  // Cosine only: min-max rescale off-diagonal similarities to [0, 1]. When
  // false, raw cosine is clamped at 0 instead (restriction to a row subset then
  // commutes with construction). Euclidean similarity is always scaled.
  bool rescale = true;

  void validate() const {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
      throw UsageError("threshold " + std::to_string(threshold) + " outside [0, 1]");
    }
  }

  // Table-style suffix, e.g. "C", "CB", "E", "EB".
  std::string suffix() const {
    return std::string(metric == Metric::cosine ? "C" : "E") + (mode == EdgeMode::binary ? "B" : "");
  }

  bool operator==(const SimilarityConfig&) const = default;
};

// Symmetric N x N edge weights in [0, 1] with unit diagonal.
struct AdjacencyMatrix {
  Matrix weights;

  Index size() const { return weights.rows(); }
};

struct PropagationMatrix {
  Matrix weights;
  Normalization normalization = Normalization::row_mean;

  Index size() const { return weights.rows(); }
};

// Raw cosine similarity; rows with zero norm get similarity 0 to every other
// row. The diagonal is 1.
inline Matrix pairwise_cosine(const Matrix& features) {
  const Index n = features.rows();
  if (n < 2) throw DataError("pairwise similarity needs at least 2 rows");
  Eigen::VectorXd norms = features.rowwise().norm();
  Matrix unit = features;
  for (Index r = 0; r < n; ++r) {
    if (norms(r) > 0.0) {
      unit.row(r) /= norms(r);
    } else {
      unit.row(r).setZero();
    }
  }
  Matrix s;
  s.noalias() = unit * unit.transpose();
  s = s.cwiseMax(-1.0).cwiseMin(1.0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      // Exact symmetry regardless of summation order.
      const double v = 0.5 * (s(i, j) + s(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
    s(i, i) = 1.0;
  }
  return s;
}

inline Matrix pairwise_euclidean_distance(const Matrix& features) {
  const Index n = features.rows();
  Matrix dist = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double d = (features.row(i) - features.row(j)).norm();
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  return dist;
}

// Min-max scales the off-diagonal entries of a symmetric matrix to [0, 1]
// using one global (min, max) pair; the diagonal is left untouched. If every
// off-diagonal value is equal the result is all ones off the diagonal.
inline Matrix rescale_offdiagonal(const Matrix& m, bool* degenerate = nullptr) {
  const Index n = m.rows();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      lo = std::min(lo, m(i, j));
      hi = std::max(hi, m(i, j));
    }
  }
  Matrix out = m;
  const bool flat = !(hi > lo);
  if (degenerate != nullptr) *degenerate = flat;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      out(i, j) = flat ? 1.0 : (m(i, j) - lo) / (hi - lo);
    }
  }
  return out;
}

// 1 - (globally min-max scaled Euclidean distance); diagonal 1.
inline Matrix pairwise_euclidean_similarity(const Matrix& features) {
  if (features.rows() < 2) throw DataError("pairwise similarity needs at least 2 rows");
  bool degenerate = false;
  Matrix s = rescale_offdiagonal(pairwise_euclidean_distance(features), &degenerate);
  if (degenerate) {
    std::cerr << "warning: all pairwise distances are equal; treating every pair as fully similar\n";
    s.setOnes();
    return s;
  }
  s = (1.0 - s.array()).matrix();
  s.diagonal().setOnes();
  return s;
}

// Similarity in [0, 1] per the configured metric, ready for thresholding.
inline Matrix similarity_matrix(const Matrix& features, const SimilarityConfig& config) {
  if (config.metric == Metric::euclidean) return pairwise_euclidean_similarity(features);
  Matrix s = pairwise_cosine(features);
  if (!config.rescale) {
    s = s.cwiseMax(0.0);
    return s;
  }
  bool degenerate = false;
  s = rescale_offdiagonal(s, &degenerate);
  if (degenerate) std::cerr << "warning: all pairwise cosine similarities are equal; treating every pair as fully similar\n";
  return s;
}

// Keeps entries with S >= threshold (their value, or 1 in binary mode), zeroes
// the rest and forces self-loops to 1.
inline AdjacencyMatrix build_adjacency(const Matrix& similarity, const SimilarityConfig& config) {
  config.validate();
  if (similarity.rows() != similarity.cols()) throw ShapeError("similarity matrix must be square");
  const Index n = similarity.rows();
  AdjacencyMatrix a{Matrix::Zero(n, n)};
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const double s = similarity(i, j);
      if (i == j) {
        a.weights(i, j) = 1.0;
      } else if (s >= config.threshold) {
        a.weights(i, j) = config.mode == EdgeMode::binary ? 1.0 : s;
      }
    }
  }
  return a;
}

// Builds the graph over `indices` (all rows when absent), in that order.
inline AdjacencyMatrix build_graph(const Matrix& features, const SimilarityConfig& config,
                                   std::optional<std::span<const Index>> indices = std::nullopt) {
  config.validate();
  if (!indices) return build_adjacency(similarity_matrix(features, config), config);
  if (indices->size() < 2) throw DataError("graph construction needs at least 2 rows");
  for (Index r : *indices) {
    if (r < 0 || r >= features.rows()) throw DataError("row index " + std::to_string(r) + " out of range");
  }
  return build_adjacency(similarity_matrix(select_rows(features, *indices), config), config);
}

inline AdjacencyMatrix build_graph(const DataTable& table, const SimilarityConfig& config,
                                   std::optional<std::span<const Index>> indices = std::nullopt) {
  return build_graph(table.features, config, indices);
}

// Non-zero entries replaced by 1.
inline AdjacencyMatrix binarize(const AdjacencyMatrix& a) {
  return AdjacencyMatrix{(a.weights.array() != 0.0).cast<double>().matrix()};
}

inline PropagationMatrix normalize(const AdjacencyMatrix& a, Normalization kind) {
  const Eigen::VectorXd degree = a.weights.rowwise().sum();
  if ((degree.array() <= 0.0).any()) throw Error("normalize: adjacency has a row with non-positive sum");
  PropagationMatrix p{a.weights, kind};
  if (kind == Normalization::row_mean) {
    for (Index r = 0; r < p.weights.rows(); ++r) p.weights.row(r) /= degree(r);
  } else {
    const Eigen::VectorXd inv_sqrt = degree.array().rsqrt();
    p.weights = inv_sqrt.asDiagonal() * a.weights * inv_sqrt.asDiagonal();
  }
  return p;
}

struct GraphStats {
  Index nodes = 0;
  Index edges = 0;
  double density = 0.0;
  double min_degree = 0.0;
  double mean_degree = 0.0;
  double max_degree = 0.0;
  Index isolated = 0;
};

// Degrees count off-diagonal non-zero entries (self-loops excluded).
inline GraphStats graph_stats(const AdjacencyMatrix& a) {
  GraphStats s;
  const Index n = a.size();
  s.nodes = n;
  if (n == 0) return s;
  Index nonzero = 0;
  s.min_degree = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    Index deg = 0;
    for (Index j = 0; j < n; ++j) {
      if (i != j && a.weights(i, j) != 0.0) ++deg;
    }
    nonzero += deg;
    if (deg == 0) ++s.isolated;
    s.min_degree = std::min(s.min_degree, static_cast<double>(deg));
    s.max_degree = std::max(s.max_degree, static_cast<double>(deg));
  }
  s.edges = nonzero / 2;
  s.mean_degree = static_cast<double>(nonzero) / static_cast<double>(n);
  s.density = n > 1 ? static_cast<double>(nonzero) / static_cast<double>(n * (n - 1)) : 0.0;
  return s;
}

inline nlohmann::ordered_json to_json(const GraphStats& s) {
  return {{"nodes", s.nodes},           {"edges", s.edges},           {"density", s.density},
          {"min_degree", s.min_degree}, {"mean_degree", s.mean_degree}, {"max_degree", s.max_degree},
          {"isolated", s.isolated}};
}

namespace detail {

// Shortest of %.15g / %.17g that reads back to the same double.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Edge list: "# nodes=<N> metric=<m> threshold=<t> mode=<mode>", then
// "src,dst,weight" and one line per upper-triangle edge (self-loops omitted).
inline void write_edge_list(std::ostream& out, const AdjacencyMatrix& a, const SimilarityConfig& config) {
  out << "# nodes=" << a.size() << " metric=" << to_string(config.metric)
      << " threshold=" << detail::format_real(config.threshold) << " mode=" << to_string(config.mode) << '\n';
  out << "src,dst,weight\n";
  for (Index i = 0; i < a.size(); ++i) {
    for (Index j = i + 1; j < a.size(); ++j) {
      if (a.weights(i, j) != 0.0) out << i << ',' << j << ',' << detail::format_real(a.weights(i, j)) << '\n';
    }
  }
}

// Dense N x N CSV without header; intended for small graphs.
inline void write_dense(std::ostream& out, const AdjacencyMatrix& a) {
  for (Index i = 0; i < a.size(); ++i) {
    for (Index j = 0; j < a.size(); ++j) out << (j ? "," : "") << detail::format_real(a.weights(i, j));
    out << '\n';
  }
}

}  // namespace tabgnn
