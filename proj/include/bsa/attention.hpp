// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bsa/blocks.hpp"
#include "bsa/kvsparse.hpp"
#include "bsa/latents.hpp"
#include "bsa/qsparse.hpp"

namespace bsa {

struct AttentionOutput {
    /// L x d, binary32.
    Matrix O;
    /// Gathered KV token count per query block (empty for dense attention).
    std::vector<std::size_t> kv_tokens;
    /// Row max subtracted before exponentiation, per computed query row.
    std::vector<double> row_max;
};

/// softmax(row); alias of the shared stable softmax.
inline std::vector<double> softmax_row(std::span<const double> scores) {
    return softmax(scores);
}

/// Bidirectional dense attention: softmax(Q K^T / sqrt(d)) V, no mask.
AttentionOutput full_attention(const LatentBundle& bundle, unsigned threads = 0);

/// Block-gathered sparse attention. For each query block, its retained
/// queries attend to the tokens of the KV blocks listed in q2k (ascending
/// global order); pruned positions are filled from their donors.
AttentionOutput sparse_attention(const LatentBundle& bundle,
                                 const BlockSpec& spec,
                                 const QuerySelection& qsel,
                                 const Q2KMap& q2k,
                                 unsigned threads = 0);

/// Ascending global token indices of the KV blocks attended by query block i.
std::vector<std::size_t> gathered_kv_tokens(const BlockSpec& spec, const Q2KMap& q2k, std::size_t query_block);

}  // namespace bsa
