// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "bsa/matrix.hpp"

namespace bsa {

enum class KvMode {
    unified_prob,  ///< threshold over the softmax row, used directly as a mass target
    two_stage,     ///< raw-score candidate filter, then a fixed mass target tau
    select_all,    ///< every KV block for every query block (dense KV side)
};

KvMode parse_kv_mode(std::string_view name);
std::string_view to_string(KvMode mode);

/// Pooled query-block x key-block scores, N_q x N.
struct BlockScores {
    MatrixD scores;
};

/// Per-query-block list of attended KV blocks.
struct Q2KMap {
    std::vector<std::uint32_t> q2k_num;
    std::vector<std::vector<std::uint32_t>> q2k_index;
    /// Threshold used per row (mass target in unified mode, raw score in two_stage).
    std::vector<double> thresholds;
    KvMode mode = KvMode::unified_prob;
    std::size_t k = 0;
    std::size_t n = 0;
    double tau = 0.9;

    std::size_t num_query_blocks() const noexcept { return q2k_num.size(); }
    /// Mean of q2k_num / n.
    double keep_fraction() const noexcept;
    bool operator==(const Q2KMap&) const = default;
};

/// S[i][j] = Qc[i] . Kc[j] / sqrt(d_k).
BlockScores pooled_scores(const MatrixD& q_pooled, const MatrixD& k_pooled, double d_k);

/// Inverse standard-normal CDF (Wichura AS 241, ~1e-16 relative accuracy).
/// Throws ConfigError outside (0, 1).
double normal_quantile(double u);

/// Numerically stable softmax in double.
std::vector<double> softmax(std::span<const double> scores);

/// mean(row) + std(row) * U(1 - k/n) with the quantile argument clamped to
/// [1/(2n), 1 - 1/(2n)]. Population std. When `probability_space`, the result
/// is clamped to (0, 1].
double dynamic_threshold(std::span<const double> row, std::size_t k, bool probability_space);

/// Shortest prefix of the descending-sorted row (ties to the lower id) whose
/// mass reaches p. Never empty; zero-probability entries are never needed.
/// Returned ids are ascending.
std::vector<std::uint32_t> select_min_index_set(std::span<const double> probs, double p);

/// Builds the q2k map row by row. `tau` is the stage-2 mass target of two_stage mode.
Q2KMap build_q2k(const BlockScores& scores, std::size_t k, KvMode mode, double tau = 0.9, unsigned threads = 0);

/// Every query block attends to all n KV blocks.
Q2KMap select_all_kv(std::size_t num_query_blocks, std::size_t n);

}  // namespace bsa
