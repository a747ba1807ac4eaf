#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "fairac/tensor.hpp"

namespace fairac {

// Evaluation of one trained downstream classifier. acc/auc/dsp/deo live in
// [0,1]; consistency is stored x100 to match the reporting convention of the
// result tables.
struct EvalReport {
  double acc = 0.0;
  double auc = 0.0;
  double dsp = 0.0;
  double deo = 0.0;
  double dsp_plus_deo = 0.0;  // always dsp + deo exactly
  double consistency = 0.0;   // x100
};

inline double accuracy(const std::vector<std::int8_t>& preds,
                       const std::vector<std::int8_t>& labels) {
  if (preds.size() != labels.size() || preds.empty())
    throw std::invalid_argument("accuracy: size mismatch or empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

// Mann-Whitney AUC; tied scores contribute 0.5 per pair. Computed by rank
// summation, matched exactly by the pairwise-enumeration oracle in tests.
inline double auc_score(const std::vector<double>& scores,
                        const std::vector<std::int8_t>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("auc: size mismatch or empty input");
  std::size_t n_pos = 0, n_neg = 0;
  for (std::int8_t y : labels) (y == 1 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auc: one class absent");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks across ties; halves are exact in doubles.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// |P(y_hat = 1 | s = 0) - P(y_hat = 1 | s = 1)|. The definitions are signed;
// reported values are the nonnegative magnitudes, so the absolute value is
// taken here.
inline double statistical_parity(const std::vector<std::int8_t>& preds,
                                 const std::vector<std::int8_t>& sensitive) {
  if (preds.size() != sensitive.size() || preds.empty())
    throw std::invalid_argument("statistical_parity: size mismatch or empty input");
  std::size_t n0 = 0, n1 = 0, pos0 = 0, pos1 = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (sensitive[i] == 0) {
      ++n0;
      pos0 += preds[i] == 1 ? 1u : 0u;
    } else {
      ++n1;
      pos1 += preds[i] == 1 ? 1u : 0u;
    }
  }
  if (n0 == 0 || n1 == 0)
    throw std::invalid_argument("statistical_parity: a sensitive group is empty");
  return std::abs(static_cast<double>(pos0) / static_cast<double>(n0) -
                  static_cast<double>(pos1) / static_cast<double>(n1));
}

// |TPR(s=0) - TPR(s=1)| over nodes with label 1.
inline double equal_opportunity(const std::vector<std::int8_t>& preds,
                                const std::vector<std::int8_t>& sensitive,
                                const std::vector<std::int8_t>& labels) {
  if (preds.size() != sensitive.size() || preds.size() != labels.size() || preds.empty())
    throw std::invalid_argument("equal_opportunity: size mismatch or empty input");
  std::size_t n0 = 0, n1 = 0, tp0 = 0, tp1 = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] != 1) continue;
    if (sensitive[i] == 0) {
      ++n0;
      tp0 += preds[i] == 1 ? 1u : 0u;
    } else {
      ++n1;
      tp1 += preds[i] == 1 ? 1u : 0u;
    }
  }
  if (n0 == 0 || n1 == 0)
    throw std::invalid_argument("equal_opportunity: a sensitive group has no positive labels");
  return std::abs(static_cast<double>(tp0) / static_cast<double>(n0) -
                  static_cast<double>(tp1) / static_cast<double>(n1));
}

// Fairness similarity matrix for the consistency metric: cosine similarity on
// input feature rows, top-k per row, negatives clamped to 0, symmetrized by
// elementwise max, zero diagonal. Mutual selection can leave up to 2k
// nonzeros in a row.
struct SimilarityGraph {
  CsrMatrix s;
  std::size_t k = 0;
};

inline SimilarityGraph build_similarity(const Tensor& features, std::size_t k = 10) {
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (n == 0) throw std::invalid_argument("build_similarity: no rows");
  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const double* row = features.value().data() + i * d;
    for (std::size_t c = 0; c < d; ++c) s += row[c] * row[c];
    norms[i] = std::sqrt(s);
  }
  // Dense pairwise cosine per row, then keep the top-k. Zero rows have
  // similarity 0 to everything by convention.
  std::vector<std::vector<std::pair<std::size_t, double>>> selected(n);
  std::vector<double> sims(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ri = features.value().data() + i * d;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || norms[i] == 0.0 || norms[j] == 0.0) {
        sims[j] = 0.0;
        continue;
      }
      const double* rj = features.value().data() + j * d;
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += ri[c] * rj[c];
      sims[j] = std::max(0.0, dot / (norms[i] * norms[j]));
    }
    std::vector<std::size_t> idx;
    idx.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && sims[j] > 0.0) idx.push_back(j);
    const std::size_t keep = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (sims[a] != sims[b]) return sims[a] > sims[b];
                        return a < b;  // deterministic tie-break
                      });
    for (std::size_t t = 0; t < keep; ++t) selected[i].emplace_back(idx[t], sims[idx[t]]);
  }
  // Symmetrize by max: cosine is symmetric, so emitting both directions and
  // collapsing duplicate cells to a single entry realizes max(S, S^T).
  std::vector<std::tuple<std::size_t, std::size_t, double>> trip;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, v] : selected[i]) {
      trip.emplace_back(i, j, v);
      trip.emplace_back(j, i, v);
    }
  std::sort(trip.begin(), trip.end());
  std::vector<std::tuple<std::size_t, std::size_t, double>> dedup;
  for (std::size_t t = 0; t < trip.size(); ++t) {
    if (!dedup.empty() && std::get<0>(dedup.back()) == std::get<0>(trip[t]) &&
        std::get<1>(dedup.back()) == std::get<1>(trip[t]))
      continue;
    dedup.push_back(trip[t]);
  }
  SimilarityGraph sg;
  sg.k = k;
  sg.s = CsrMatrix::from_triplets(n, n, std::move(dedup));
  return sg;
}

enum class ConsistencyMode { paper, prediction_pair };

// consistency = 1 - sum_ij w_ij * S_ij / sum_ij S_ij over i != j, where w is
// |y_i - yhat_j| in paper mode and |yhat_i - yhat_j| in prediction_pair mode.
// Returned on the [0,1] scale; reports multiply by 100.
inline double consistency(const std::vector<std::int8_t>& preds,
                          const std::vector<std::int8_t>& labels, const SimilarityGraph& sg,
                          ConsistencyMode mode = ConsistencyMode::paper) {
  const std::size_t n = sg.s.rows;
  if (preds.size() != n || labels.size() != n)
    throw std::invalid_argument("consistency: size mismatch with similarity matrix");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t kk = sg.s.row_ptr[i]; kk < sg.s.row_ptr[i + 1]; ++kk) {
      const std::size_t j = sg.s.col_idx[kk];
      if (j == i) continue;
      const double w = sg.s.val[kk];
      const double ref = mode == ConsistencyMode::paper ? static_cast<double>(labels[i])
                                                        : static_cast<double>(preds[i]);
      num += std::abs(ref - static_cast<double>(preds[j])) * w;
      den += w;
    }
  }
  if (den == 0.0) throw std::invalid_argument("consistency: similarity matrix is all zero");
  return 1.0 - num / den;
}

inline EvalReport make_eval_report(const std::vector<std::int8_t>& preds,
                                   const std::vector<double>& scores,
                                   const std::vector<std::int8_t>& labels,
                                   const std::vector<std::int8_t>& sensitive,
                                   const SimilarityGraph& sg,
                                   ConsistencyMode mode = ConsistencyMode::paper) {
  EvalReport r;
  r.acc = accuracy(preds, labels);
  r.auc = auc_score(scores, labels);
  r.dsp = statistical_parity(preds, sensitive);
  r.deo = equal_opportunity(preds, sensitive, labels);
  r.dsp_plus_deo = r.dsp + r.deo;
  r.consistency = 100.0 * consistency(preds, labels, sg, mode);
  return r;
}

}  // namespace fairac
