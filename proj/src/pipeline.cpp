// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#include "bsa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bsa/schedule.hpp"

namespace bsa {

BlockSpec make_block_spec(const LatentBundle& bundle, const PipelineConfig& config) {
    return BlockSpec(Extent3{bundle.T, bundle.H, bundle.W}, config.block, config.window);
}

std::size_t default_k(std::size_t num_blocks) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(num_blocks))));
}

BlockScores bundle_block_scores(const LatentBundle& bundle, const BlockSpec& spec) {
    return pooled_scores(pool_blocks(bundle.Q, spec), pool_blocks(bundle.K, spec), static_cast<double>(bundle.d));
}

Q2KMap calibrate_q2k(const BlockScores& scores, double kv_keep_target, KvMode mode, double tau, unsigned threads) {
    if (!(kv_keep_target > 0.0 && kv_keep_target <= 1.0)) {
        throw ConfigError("KV keep fraction must lie in (0, 1]");
    }
    const std::size_t n = scores.scores.cols();
    if (mode == KvMode::select_all) {
        return select_all_kv(scores.scores.rows(), n);
    }

    std::optional<Q2KMap> best;
    double best_err = std::numeric_limits<double>::infinity();
    auto consider = [&](std::size_t k) {
        Q2KMap map = build_q2k(scores, k, mode, tau, threads);
        const double err = std::abs(map.keep_fraction() - kv_keep_target);
        if (err < best_err || (err == best_err && best && k < best->k)) {
            best_err = err;
            best = std::move(map);
        }
    };

    constexpr std::size_t kExhaustiveLimit = 64;
    if (n <= kExhaustiveLimit) {
        for (std::size_t k = 1; k <= n; ++k) {
            consider(k);
        }
        return *best;
    }
    const std::size_t stride = (n + 31) / 32;
    for (std::size_t k = 1; k <= n; k += stride) {
        consider(k);
    }
    consider(n);
    const std::size_t centre = best->k;
    const std::size_t lo = centre > stride ? centre - stride : 1;
    const std::size_t hi = std::min(n, centre + stride);
    for (std::size_t k = lo; k <= hi; ++k) {
        consider(k);
    }
    return *best;
}

SelectionPlan plan_selection(const LatentBundle& bundle, const PipelineConfig& config) {
    bundle.validate();
    BlockSpec spec = make_block_spec(bundle, config);
    const std::size_t N = spec.num_blocks();

    double r = config.r;
    double kv_keep = 1.0;
    if (config.target_sparsity) {
        const SparsityKnobs knobs = knobs_for_sparsity(*config.target_sparsity, config.r);
        r = knobs.r;
        kv_keep = knobs.kv_keep_fraction;
    }

    QuerySelection qsel = r >= 1.0 ? select_all_queries(spec)
                                   : select_queries(bundle.Q, spec, r, spec.window().has_value(), config.similarity,
                                                    config.threads);

    Q2KMap q2k;
    if (config.mode == KvMode::select_all || (config.target_sparsity && kv_keep >= 1.0)) {
        q2k = select_all_kv(N, N);
        kv_keep = 1.0;
    } else if (config.target_sparsity) {
        q2k = calibrate_q2k(bundle_block_scores(bundle, spec), kv_keep, config.mode, config.tau, config.threads);
    } else {
        const std::size_t k = config.k.value_or(default_k(N));
        q2k = build_q2k(bundle_block_scores(bundle, spec), k, config.mode, config.tau, config.threads);
        kv_keep = q2k.keep_fraction();
    }
    return SelectionPlan{std::move(spec), std::move(qsel), std::move(q2k), r, kv_keep};
}

}  // namespace bsa
