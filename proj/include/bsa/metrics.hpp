// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "bsa/blocks.hpp"
#include "bsa/kvsparse.hpp"
#include "bsa/qsparse.hpp"

namespace bsa {

// Cost model constants. Matmuls count 2 FLOPs per multiply-add.
inline constexpr double kQueryScoreFlopsPerChannel = 2.0;  // center dot product
inline constexpr double kQueryScoreFlopsPerToken = 5.0;    // norms, divide, 1 - cos
inline constexpr double kSortFlopsPerCompare = 1.0;        // c in c*L*log2(L)
inline constexpr double kSoftmaxFlopsPerScore = 5.0;       // max, sub, exp, sum, div

/// 4 * L^2 * d: QK^T and PV at 2 FLOPs per multiply-add. Softmax excluded.
std::uint64_t flops_full(std::uint64_t L, std::uint64_t d);

/// Sum over query blocks of 4 * |Q_i| * (q2k_num[i] * B) * d.
std::uint64_t flops_sparse(const QuerySelection& qsel, const Q2KMap& q2k, const BlockSpec& spec, std::uint64_t d);

/// Number of (query, key) token pairs that the sparse executor computes.
std::uint64_t computed_pairs(const QuerySelection& qsel, const Q2KMap& q2k, const BlockSpec& spec);

/// 1 - computed pairs / L^2.
double pair_sparsity(const QuerySelection& qsel, const Q2KMap& q2k, const BlockSpec& spec);

struct OverheadFlops {
    double query = 0.0;  ///< L*(2d + 5) + L*log2(L)
    double kv = 0.0;     ///< N*2d + N*log2(N)
};

/// Selection overhead. N is the number of KV blocks.
OverheadFlops overhead_flops(std::uint64_t L, std::uint64_t N, std::uint64_t d);

/// 1 - (1 - s_q)(1 - s_kv). Both inputs must lie in [0, 1).
double combined_sparsity(double s_q, double s_kv);

struct FlopReport {
    std::uint64_t L = 0;
    std::uint64_t d = 0;
    std::uint64_t num_blocks = 0;
    std::uint64_t block_size = 0;
    double s_q = 0.0;   ///< 1 - retained / L
    double s_kv = 0.0;  ///< 1 - computed pairs / (retained * L)
    double pair_sparsity = 0.0;
    std::uint64_t flops_full = 0;
    std::uint64_t flops_sparse_attn = 0;
    double flops_overhead_query = 0.0;
    double flops_overhead_kv = 0.0;
    double flops_softmax_full = 0.0;    ///< reported, not part of the ratio
    double flops_softmax_sparse = 0.0;  ///< reported, not part of the ratio
    double flop_ratio = 1.0;            ///< full / (sparse + overheads)
    double overhead_fraction = 0.0;     ///< overheads / (sparse + overheads)
};

/// Query overhead counts only when r < 1; KV overhead only when the map is
/// not select_all.
FlopReport make_flop_report(const QuerySelection& qsel, const Q2KMap& q2k, const BlockSpec& spec, std::uint64_t d);

/// Header matching flop_report_csv_row.
std::string flop_report_csv_header();
std::string flop_report_csv_row(const FlopReport& report);

}  // namespace bsa
