#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "bfp/error.hpp"

namespace bfp {

/// Lower-triangular accuracy grid: entry(i, t) is test accuracy on task i
/// after finishing training on task t, for i <= t (0-based).
struct AccuracyMatrix {
  // after[t][i], one row per completed task, row t holds t+1 entries.
  std::vector<std::vector<double>> after;

  std::size_t task_count() const { return after.size(); }

  double entry(std::size_t i, std::size_t t) const {
    if (t >= after.size() || i >= after[t].size())
      throw InvalidInput("AccuracyMatrix: entry outside lower triangle");
    return after[t][i];
  }

  bool complete() const {
    if (after.empty()) return false;
    for (std::size_t t = 0; t < after.size(); ++t)
      if (after[t].size() != t + 1) return false;
    return true;
  }
};

/// Final Average Accuracy: mean of the last column.
inline double faa(const AccuracyMatrix& a) {
  if (a.after.empty() || a.after.back().size() != a.task_count())
    throw InvalidInput("faa: final column incomplete");
  double s = 0.0;
  for (double v : a.after.back()) s += v;
  return s / static_cast<double>(a.task_count());
}

/// Final Forgetting: mean over tasks i < T of max_{j in 1..T-1}
/// (a_i^j - a_i^T).
inline double ff(const AccuracyMatrix& a) {
  const std::size_t big_t = a.task_count();
  if (big_t < 2) throw UndefinedMetric("ff: undefined for a single task");
  if (!a.complete()) throw InvalidInput("ff: matrix incomplete");
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < big_t; ++i) {
    double peak = -1.0;
    for (std::size_t j = i; j + 1 < big_t; ++j) peak = std::max(peak, a.after[j][i]);
    s += peak - a.after[big_t - 1][i];
  }
  return s / static_cast<double>(big_t - 1);
}

/// Average Learning Accuracy: mean of the diagonal.
inline double ala(const AccuracyMatrix& a) {
  if (a.after.empty()) throw InvalidInput("ala: empty matrix");
  double s = 0.0;
  for (std::size_t i = 0; i < a.task_count(); ++i) {
    if (a.after[i].size() != i + 1) throw InvalidInput("ala: diagonal incomplete");
    s += a.after[i][i];
  }
  return s / static_cast<double>(a.task_count());
}

/// Scalar metrics of one run in one evaluation mode. ff is absent for T=1.
struct MetricsReport {
  double faa = 0.0;
  std::optional<double> ff;
  double ala = 0.0;
};

inline MetricsReport metrics_report(const AccuracyMatrix& a) {
  MetricsReport r;
  r.faa = faa(a);
  r.ala = ala(a);
  if (a.task_count() >= 2) r.ff = ff(a);
  return r;
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Sample mean and (n-1)-normalized standard deviation.
inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd ms;
  if (xs.empty()) return ms;
  for (double x : xs) ms.mean += x;
  ms.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - ms.mean) * (x - ms.mean);
    ms.stddev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  }
  return ms;
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw InvalidInput("median: empty sample");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace bfp
