// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>

#include "bsa/blocks.hpp"
#include "bsa/kvsparse.hpp"
#include "bsa/latents.hpp"
#include "bsa/qsparse.hpp"

namespace bsa {

struct PipelineConfig {
    Extent3 block{4, 4, 4};
    std::optional<Extent3> window = Extent3{2, 2, 2};
    double r = 0.5;
    /// Explicit key-sample count; defaults to ceil(0.1 * N) when no target sparsity is set.
    std::optional<std::size_t> k;
    /// When set, (r, KV keep fraction) come from knobs_for_sparsity and k is calibrated.
    std::optional<double> target_sparsity;
    KvMode mode = KvMode::unified_prob;
    double tau = 0.9;
    SimilarityMode similarity = SimilarityMode::cosine;
    unsigned threads = 0;
};

struct SelectionPlan {
    BlockSpec spec;
    QuerySelection qsel;
    Q2KMap q2k;
    double r = 1.0;
    /// Requested KV keep fraction (1 when the KV side is dense).
    double kv_keep_target = 1.0;
};

BlockSpec make_block_spec(const LatentBundle& bundle, const PipelineConfig& config);

/// k used when neither k nor a target sparsity is configured.
std::size_t default_k(std::size_t num_blocks);

/// Pooled Q/K block scores for a bundle.
BlockScores bundle_block_scores(const LatentBundle& bundle, const BlockSpec& spec);

/// Chooses k in [1, N] whose measured keep fraction (mean q2k_num / N) is
/// closest to `kv_keep_target`; ties go to the smaller k. Exhaustive for
/// N <= 64; beyond that a 32-point grid is refined exhaustively around its
/// best point.
Q2KMap calibrate_q2k(const BlockScores& scores, double kv_keep_target, KvMode mode, double tau, unsigned threads = 0);

/// Query selection plus q2k map for a bundle under `config`.
SelectionPlan plan_selection(const LatentBundle& bundle, const PipelineConfig& config);

}  // namespace bsa
