#pragma once

// Reference computations used by the tests. They deliberately avoid the
// library's code paths: plain loops, brute-force enumeration and central
// differences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "tabgnn/tensor.hpp"

namespace oracle {

using tabgnn::Index;
using tabgnn::Matrix;

// Central-difference gradient of a scalar function of one matrix argument.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, Matrix x, double eps = 1e-6) {
  Matrix g(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + eps;
    const double plus = f(x);
    x.data()[i] = saved - eps;
    const double minus = f(x);
    x.data()[i] = saved;
    g.data()[i] = (plus - minus) / (2.0 * eps);
  }
  return g;
}

inline double max_relative_error(const Matrix& analytic, const Matrix& numeric) {
  double worst = 0.0;
  for (Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i], n = numeric.data()[i];
    worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}));
  }
  return worst;
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j)
      for (Index k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

// Weighted F1 from an explicit confusion matrix.
inline double weighted_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred, int classes) {
  std::vector<std::vector<int>> confusion(classes, std::vector<int>(classes, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) ++confusion[y_true[i]][y_pred[i]];
  double total = 0.0;
  for (int k = 0; k < classes; ++k) {
    int row = 0, col = 0;
    for (int j = 0; j < classes; ++j) {
      row += confusion[k][j];
      col += confusion[j][k];
    }
    if (row == 0) continue;
    const int tp = confusion[k][k];
    // F1 = 2TP / (2TP + FP + FN)
    const int denom = 2 * tp + (col - tp) + (row - tp);
    const double f1 = denom == 0 ? 0.0 : 2.0 * tp / denom;
    total += f1 * row;
  }
  return total / static_cast<double>(y_true.size());
}

// Two-sided Wilcoxon signed-rank p-value by enumerating every sign vector
// over the non-zero differences, ranking with average ranks for ties.
inline double wilcoxon_enumeration_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> mags;
  std::vector<int> signs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (std::abs(d) <= 1e-12) continue;
    mags.push_back(std::abs(d));
    signs.push_back(d > 0 ? 1 : -1);
  }
  const std::size_t n = mags.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    int less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mags[j] < mags[i] - 1e-12) ++less;
      else if (std::abs(mags[j] - mags[i]) <= 1e-12) ++equal;
    }
    ranks[i] = less + (equal + 1) / 2.0;
  }
  double total = 0.0, w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += ranks[i];
    if (signs[i] > 0) w_plus += ranks[i];
  }
  const double observed = std::min(w_plus, total - w_plus);
  std::uint64_t hits = 0;
  const std::uint64_t count = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if ((mask >> i) & 1U) w += ranks[i];
    if (std::min(w, total - w) <= observed + 1e-9) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(count);
}

}  // namespace oracle
