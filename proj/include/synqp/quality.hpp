// Copyright 2026 The synqp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Fidelity (per-column Hellinger distance over aligned histograms) and
// utility (machine-learning efficiency: logistic regression trained on
// synthetic vs. real data, scored by AUC on real held-out rows).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "synqp/error.hpp"
#include "synqp/parallel.hpp"
#include "synqp/table.hpp"

namespace synqp {

// Numeric histograms carry `bins + 1` strictly increasing edges (last bin
// right-closed); categorical histograms carry their category list instead.
struct Histogram {
  std::vector<double> edges;
  std::vector<std::string> categories;
  std::vector<double> p;

  bool categorical() const noexcept { return edges.empty(); }
};

inline bool aligned(const Histogram& a, const Histogram& b) {
  return a.p.size() == b.p.size() && a.edges == b.edges && a.categories == b.categories;
}

inline double hellinger(const Histogram& p, const Histogram& q) {
  if (!aligned(p, q)) throw Error(Errc::alignment_error, "histograms do not share bins");
  double h2 = 0.0;
  for (std::size_t i = 0; i < p.p.size(); ++i) {
    const double d = std::sqrt(p.p[i]) - std::sqrt(q.p[i]);
    h2 += d * d;
  }
  return std::min(1.0, std::sqrt(0.5 * h2));
}

inline std::string fidelity_grade(double hd) {
  if (hd < 0.1) return "excellent";
  if (hd < 0.2) return "acceptable";
  return "discrepant";
}

struct Binning {
  std::vector<double> edges;
  std::vector<std::string> categories;
};

// `bins` equal-width bins over [lo, hi]; a degenerate range widens to
// [lo, lo + 1].
inline Binning equal_width(double lo, double hi, std::size_t bins) {
  if (bins == 0) throw Error(Errc::config_error, "bins must be positive");
  if (!(hi > lo)) hi = lo + 1.0;
  Binning b;
  b.edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) b.edges[i] = lo + width * static_cast<double>(i);
  b.edges[bins] = hi;
  return b;
}

inline std::size_t bin_index(const std::vector<double>& edges, double x) {
  const std::size_t bins = edges.size() - 1;
  const double lo = edges.front();
  const double width = (edges.back() - lo) / static_cast<double>(bins);
  const double pos = std::floor((x - lo) / width);
  if (!(pos > 0)) return 0;
  return std::min(bins - 1, static_cast<std::size_t>(pos));
}

inline bool is_categorical_column(const Schema& schema, std::size_t c) {
  return !is_numeric_role(schema[c].role);
}

// Histogram of one column over a fixed binning. Numeric values outside the
// edges clamp into the end bins; categories must all appear in the binning.
inline Histogram histogram(const Table& table, std::size_t c, const Binning& binning) {
  if (table.rows() == 0) throw Error(Errc::empty_table, "histogram of an empty table",
                                     table.schema()[c].name);
  Histogram h;
  h.edges = binning.edges;
  h.categories = binning.categories;
  std::vector<std::size_t> counts;
  if (!binning.categories.empty()) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < binning.categories.size(); ++i) index[binning.categories[i]] = i;
    counts.assign(binning.categories.size(), 0);
    for (std::size_t r = 0; r < table.rows(); ++r) {
      auto it = index.find(table.text(r, c));
      if (it == index.end()) {
        throw Error(Errc::alignment_error, "category '" + table.text(r, c) + "' not in binning",
                    table.schema()[c].name);
      }
      ++counts[it->second];
    }
  } else {
    counts.assign(binning.edges.size() - 1, 0);
    for (std::size_t r = 0; r < table.rows(); ++r) ++counts[bin_index(binning.edges, table.numeric(r, c))];
  }
  h.p.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    h.p[i] = static_cast<double>(counts[i]) / static_cast<double>(table.rows());
  }
  return h;
}

inline std::vector<std::string> observed_categories(const Table& table, std::size_t c,
                                                    std::set<std::string> into = {}) {
  for (std::size_t r = 0; r < table.rows(); ++r) into.insert(table.text(r, c));
  return {into.begin(), into.end()};
}

inline Histogram column_histogram(const Table& table, std::string_view column, std::size_t bins,
                                  std::optional<std::pair<double, double>> range = std::nullopt) {
  const auto c = table.schema().index_of(column);
  if (is_categorical_column(table.schema(), c)) {
    Binning b;
    b.categories = observed_categories(table, c);
    return histogram(table, c, b);
  }
  if (!range) {
    if (table.rows() == 0) throw Error(Errc::empty_table, "histogram of an empty table", std::string(column));
    const auto v = table.numeric_column(c);
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    range = {*lo, *hi};
  }
  return histogram(table, c, equal_width(range->first, range->second, bins));
}

struct ColumnFidelity {
  std::string column;
  double hellinger;
  std::string grade;
  Histogram real;
  Histogram synth;
};

struct FidelityReport {
  std::vector<ColumnFidelity> per_column;
  double average = 0.0;
  std::string grade;
  std::size_t bins = 0;
};

inline void require_same_columns(const Table& a, const Table& b) {
  const auto& sa = a.schema();
  const auto& sb = b.schema();
  if (sa.size() != sb.size()) throw Error(Errc::schema_mismatch, "column counts differ");
  for (std::size_t c = 0; c < sa.size(); ++c) {
    if (sa[c].name != sb[c].name || sa[c].dtype != sb[c].dtype || sa[c].role != sb[c].role) {
      throw Error(Errc::schema_mismatch, "column differs between tables", sa[c].name);
    }
  }
}

// One distance per non-target column. Numeric bins are anchored to the real
// column's range; categorical histograms use the sorted union of categories.
inline FidelityReport compare_fidelity(const Table& real, const Table& synth, std::size_t bins) {
  require_same_columns(real, synth);
  if (real.rows() == 0 || synth.rows() == 0) {
    throw Error(Errc::empty_table, "fidelity needs nonempty tables");
  }
  const auto& schema = real.schema();
  std::vector<std::size_t> scored;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema[c].role != ColumnRole::target) scored.push_back(c);
  }
  FidelityReport report;
  report.bins = bins;
  report.per_column.resize(scored.size());
  parallel_for(scored.size(), [&](std::size_t i) {
    const auto c = scored[i];
    Binning b;
    if (is_categorical_column(schema, c)) {
      auto cats = observed_categories(real, c);
      b.categories = observed_categories(synth, c, {cats.begin(), cats.end()});
    } else {
      const auto v = real.numeric_column(c);
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      b = equal_width(*lo, *hi, bins);
    }
    auto hr = histogram(real, c, b);
    auto hs = histogram(synth, c, b);
    const double hd = hellinger(hr, hs);
    report.per_column[i] = {schema[c].name, hd, fidelity_grade(hd), std::move(hr), std::move(hs)};
  });
  for (const auto& col : report.per_column) report.average += col.hellinger;
  if (!report.per_column.empty()) report.average /= static_cast<double>(report.per_column.size());
  report.grade = fidelity_grade(report.average);
  return report;
}

// ---- Machine-learning efficiency ----------------------------------------

struct LogisticHyper {
  double learning_rate = 0.1;
  std::size_t iterations = 2000;
  double l2 = 1e-4;
};

// Numeric non-target columns plus one-hot indicators (no dropped reference)
// for categorical non-target columns, standardized with training stats.
// Columns are looked up by name, so any table carrying them can be encoded;
// categories unseen in training encode as all-zero indicators.
class FeatureEncoder {
 public:
  static FeatureEncoder fit(const Table& train) {
    FeatureEncoder enc;
    const auto& schema = train.schema();
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (schema[c].role == ColumnRole::target) continue;
      if (is_numeric_role(schema[c].role)) {
        enc.numeric_.push_back(schema[c].name);
      } else {
        enc.onehot_.emplace_back(schema[c].name, observed_categories(train, c));
      }
    }
    const Eigen::MatrixXd raw = enc.raw(train);
    const auto n = static_cast<double>(raw.rows());
    enc.mean_ = raw.colwise().mean();
    enc.stddev_.resize(raw.cols());
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
      const double ss = (raw.col(j).array() - enc.mean_(j)).square().sum();
      const double sd = raw.rows() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      enc.stddev_(j) = std::max(sd, 1e-12);
    }
    return enc;
  }

  Eigen::Index width() const { return mean_.size(); }

  Eigen::MatrixXd encode(const Table& table) const {
    Eigen::MatrixXd x = raw(table);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      x.col(j) = (x.col(j).array() - mean_(j)) / stddev_(j);
    }
    return x;
  }

  const Eigen::VectorXd& means() const noexcept { return mean_; }
  const Eigen::VectorXd& stddevs() const noexcept { return stddev_; }

 private:
  Eigen::MatrixXd raw(const Table& table) const {
    auto width = static_cast<Eigen::Index>(numeric_.size());
    for (const auto& [name, cats] : onehot_) width += static_cast<Eigen::Index>(cats.size());
    const auto rows = static_cast<Eigen::Index>(table.rows());
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(rows, width);
    Eigen::Index j = 0;
    for (const auto& name : numeric_) {
      const auto c = table.schema().index_of(name);
      for (Eigen::Index r = 0; r < rows; ++r) x(r, j) = table.numeric(static_cast<std::size_t>(r), c);
      ++j;
    }
    for (const auto& [name, cats] : onehot_) {
      const auto c = table.schema().index_of(name);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto text = table.text(static_cast<std::size_t>(r), c);
        auto it = std::lower_bound(cats.begin(), cats.end(), text);
        if (it != cats.end() && *it == text) x(r, j + (it - cats.begin())) = 1.0;
      }
      j += static_cast<Eigen::Index>(cats.size());
    }
    return x;
  }

  std::vector<std::string> numeric_;
  std::vector<std::pair<std::string, std::vector<std::string>>> onehot_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
};

// Mean L2-regularized log loss over theta = [weights..., intercept]; the
// intercept is not penalized. Writes the gradient when `grad` is non-null.
inline double logistic_loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& theta, double l2,
                            Eigen::VectorXd* grad = nullptr) {
  const Eigen::Index d = x.cols();
  const auto n = static_cast<double>(x.rows());
  const Eigen::VectorXd w = theta.head(d);
  const double b = theta(d);
  const Eigen::VectorXd z = (x * w).array() + b;
  double loss = 0.0;
  Eigen::VectorXd residual(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double zi = z(i);
    const double softplus = zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
    loss += softplus - y(i) * zi;
    const double p = zi >= 0 ? 1.0 / (1.0 + std::exp(-zi)) : std::exp(zi) / (1.0 + std::exp(zi));
    residual(i) = p - y(i);
  }
  loss = loss / n + 0.5 * l2 * w.squaredNorm();
  if (grad) {
    grad->resize(d + 1);
    grad->head(d) = x.transpose() * residual / n + l2 * w;
    (*grad)(d) = residual.sum() / n;
  }
  return loss;
}

struct LogisticModel {
  FeatureEncoder encoder;
  Eigen::VectorXd theta;
  std::string positive_label;
  LogisticHyper hyper;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  // Largest loss increase between consecutive iterations (0 when the loss
  // never went up).
  double max_loss_increase = 0.0;

  Eigen::VectorXd weights() const { return theta.head(theta.size() - 1); }
  double intercept() const { return theta(theta.size() - 1); }
};

// The positive class is the larger of the two target values (numeric order
// for numeric dtypes, byte order for strings).
inline std::string positive_label(const Table& table, std::size_t target) {
  std::set<std::string> texts;
  std::optional<double> best_num;
  std::string best;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    texts.insert(table.text(r, target));
    if (table.is_numeric(target)) {
      const double v = table.numeric(r, target);
      if (!best_num || v > *best_num) {
        best_num = v;
        best = table.text(r, target);
      }
    }
  }
  if (texts.size() < 2) return {};
  return table.is_numeric(target) ? best : *texts.rbegin();
}

inline Eigen::VectorXd binary_labels(const Table& table, std::size_t target,
                                     const std::string& positive) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(table.rows()));
  for (std::size_t r = 0; r < table.rows(); ++r) {
    y(static_cast<Eigen::Index>(r)) = table.text(r, target) == positive ? 1.0 : 0.0;
  }
  return y;
}

// Full-batch gradient descent from theta = 0.
inline LogisticModel train_logistic(const Table& train, const Schema& schema,
                                    const LogisticHyper& hyper = {}) {
  if (!(train.schema() == schema)) throw Error(Errc::schema_mismatch, "training table schema differs");
  const auto target = schema.target();
  if (!target) throw Error(Errc::missing_target, "schema has no target column");
  LogisticModel model;
  model.hyper = hyper;
  model.positive_label = positive_label(train, *target);
  if (model.positive_label.empty()) {
    throw Error(Errc::single_class_training, "training table has a single target class",
                schema[*target].name);
  }
  model.encoder = FeatureEncoder::fit(train);
  const Eigen::MatrixXd x = model.encoder.encode(train);
  const Eigen::VectorXd y = binary_labels(train, *target, model.positive_label);
  model.theta = Eigen::VectorXd::Zero(x.cols() + 1);
  Eigen::VectorXd grad;
  double previous = logistic_loss(x, y, model.theta, hyper.l2, &grad);
  model.initial_loss = previous;
  for (std::size_t it = 0; it < hyper.iterations; ++it) {
    model.theta -= hyper.learning_rate * grad;
    const double loss = logistic_loss(x, y, model.theta, hyper.l2, &grad);
    model.max_loss_increase = std::max(model.max_loss_increase, loss - previous);
    previous = loss;
  }
  model.final_loss = previous;
  return model;
}

// Linear scores (log-odds). AUC is rank-based, and log-odds avoid the ties
// a saturated sigmoid would introduce.
inline std::vector<double> predict_scores(const LogisticModel& model, const Table& table) {
  const Eigen::MatrixXd x = model.encoder.encode(table);
  const Eigen::VectorXd z = (x * model.weights()).array() + model.intercept();
  return {z.data(), z.data() + z.size()};
}

// Mann-Whitney estimate of P(score_pos > score_neg) + 0.5 P(tie).
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw Error(Errc::config_error, "scores and labels differ in length");
  std::vector<double> ranks(scores.size());
  {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
      // Twice the mid-rank, kept integral.
      const double twice = static_cast<double>(i + 1 + j + 1);
      for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = twice;
      i = j + 1;
    }
  }
  std::uint64_t positives = 0;
  double twice_rank_sum = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      ++positives;
      twice_rank_sum += ranks[i];
    }
  }
  const std::uint64_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(Errc::single_class_evaluation, "AUC needs both classes");
  }
  const double p = static_cast<double>(positives);
  const double twice_u = twice_rank_sum - p * (p + 1.0);
  return twice_u / (2.0 * p * static_cast<double>(negatives));
}

inline double evaluate_auc(const LogisticModel& model, const Table& test) {
  const auto target = *test.schema().target();
  const auto y = binary_labels(test, target, model.positive_label);
  std::vector<int> labels(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) labels[static_cast<std::size_t>(i)] = y(i) > 0.5;
  return auc(predict_scores(model, test), labels);
}

struct MleResult {
  double auc_synth = 0.0;
  double auc_real_baseline = 0.0;
};

inline MleResult mle(const Table& real_train, const Table& synth_train, const Table& real_test,
                     const Schema& schema, const LogisticHyper& hyper = {}) {
  if (!(real_test.schema() == schema)) throw Error(Errc::schema_mismatch, "test table schema differs");
  MleResult out;
  try {
    out.auc_synth = evaluate_auc(train_logistic(synth_train, schema, hyper), real_test);
  } catch (const Error& e) {
    e.rethrow_with_context("synthetic-trained model");
  }
  try {
    out.auc_real_baseline = evaluate_auc(train_logistic(real_train, schema, hyper), real_test);
  } catch (const Error& e) {
    e.rethrow_with_context("real-trained model");
  }
  return out;
}

}  // namespace synqp
