// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#include "bsa/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bsa/parallel.hpp"

namespace bsa {

namespace {

// One query row against a gathered key/value set. Scores, softmax and the
// weighted sum are all carried in double; the result is rounded once.
double attend_row(std::span<const float> query,
                  const Matrix& keys,
                  const Matrix& values,
                  std::span<const std::size_t> tokens,
                  double scale,
                  std::vector<double>& scores,
                  std::vector<double>& acc,
                  std::span<float> out) {
    scores.resize(tokens.size());
    for (std::size_t j = 0; j < tokens.size(); ++j) {
        auto key = keys.row(tokens[j]);
        double dot = 0.0;
        for (std::size_t c = 0; c < query.size(); ++c) {
            dot += static_cast<double>(query[c]) * static_cast<double>(key[c]);
        }
        scores[j] = dot * scale;
    }
    const double max = *std::ranges::max_element(scores);
    double sum = 0.0;
    for (double& s : scores) {
        s = std::exp(s - max);
        sum += s;
    }
    acc.assign(out.size(), 0.0);
    for (std::size_t j = 0; j < tokens.size(); ++j) {
        const double w = scores[j] / sum;
        auto value = values.row(tokens[j]);
        for (std::size_t c = 0; c < acc.size(); ++c) {
            acc[c] += w * static_cast<double>(value[c]);
        }
    }
    for (std::size_t c = 0; c < acc.size(); ++c) {
        out[c] = static_cast<float>(acc[c]);
    }
    return max;
}

void check_selection(const LatentBundle& bundle, const BlockSpec& spec, const QuerySelection& qsel, const Q2KMap& q2k) {
    const Extent3 grid{bundle.T, bundle.H, bundle.W};
    if (!(spec.grid() == grid)) {
        throw SelectionMismatch("block spec grid " + to_string(spec.grid()) + " does not match bundle " +
                                to_string(grid));
    }
    const std::size_t N = spec.num_blocks();
    if (qsel.num_tokens != spec.num_tokens() || qsel.to_sparse.size() != spec.num_tokens() ||
        qsel.per_block.size() != N) {
        throw SelectionMismatch("query selection was built for a different geometry");
    }
    if (q2k.num_query_blocks() != N || q2k.q2k_index.size() != N || q2k.n != N) {
        throw SelectionMismatch("q2k map has " + std::to_string(q2k.num_query_blocks()) + " rows over " +
                                std::to_string(q2k.n) + " blocks, geometry has " + std::to_string(N));
    }
    for (std::size_t i = 0; i < N; ++i) {
        if (q2k.q2k_index[i].empty() || q2k.q2k_index[i].size() != q2k.q2k_num[i]) {
            throw SelectionMismatch("q2k row " + std::to_string(i) + " is empty or inconsistent");
        }
        for (std::uint32_t j : q2k.q2k_index[i]) {
            if (j >= N) {
                throw SelectionMismatch("q2k row " + std::to_string(i) + " references block " + std::to_string(j));
            }
        }
        for (std::uint32_t token : qsel.per_block[i]) {
            if (token >= spec.num_tokens() || spec.block_of(token) != i ||
                qsel.to_sparse[token] == QuerySelection::kSentinel) {
                throw SelectionMismatch("retained query " + std::to_string(token) + " is not in block " +
                                        std::to_string(i));
            }
        }
    }
}

}  // namespace

AttentionOutput full_attention(const LatentBundle& bundle, unsigned threads) {
    bundle.validate();
    const std::size_t L = bundle.num_tokens();
    const double scale = 1.0 / std::sqrt(static_cast<double>(bundle.d));
    std::vector<std::size_t> all(L);
    for (std::size_t i = 0; i < L; ++i) {
        all[i] = i;
    }
    AttentionOutput out;
    out.O = Matrix(L, bundle.d);
    out.row_max.resize(L);
    parallel_for(L, threads, [&](std::size_t i) {
        thread_local std::vector<double> scores;
        thread_local std::vector<double> acc;
        out.row_max[i] = attend_row(bundle.Q.row(i), bundle.K, bundle.V, all, scale, scores, acc, out.O.row(i));
    });
    return out;
}

std::vector<std::size_t> gathered_kv_tokens(const BlockSpec& spec, const Q2KMap& q2k, std::size_t query_block) {
    std::vector<std::size_t> tokens;
    tokens.reserve(q2k.q2k_index.at(query_block).size() * spec.block_size());
    for (std::uint32_t kv_block : q2k.q2k_index[query_block]) {
        const auto block_tokens = block_token_indices(spec, kv_block);
        tokens.insert(tokens.end(), block_tokens.begin(), block_tokens.end());
    }
    std::ranges::sort(tokens);
    return tokens;
}

AttentionOutput sparse_attention(const LatentBundle& bundle,
                                 const BlockSpec& spec,
                                 const QuerySelection& qsel,
                                 const Q2KMap& q2k,
                                 unsigned threads) {
    bundle.validate();
    check_selection(bundle, spec, qsel, q2k);
    const std::size_t N = spec.num_blocks();
    const double scale = 1.0 / std::sqrt(static_cast<double>(bundle.d));

    Matrix sparse_out(qsel.num_retained(), bundle.d);
    AttentionOutput out;
    out.kv_tokens.resize(N);
    out.row_max.resize(qsel.num_retained());
    parallel_for(N, threads, [&](std::size_t i) {
        const std::vector<std::size_t> tokens = gathered_kv_tokens(spec, q2k, i);
        out.kv_tokens[i] = tokens.size();
        std::vector<double> scores;
        std::vector<double> acc;
        for (std::uint32_t query : qsel.per_block[i]) {
            const std::uint32_t row = qsel.to_sparse[query];
            out.row_max[row] =
                attend_row(bundle.Q.row(query), bundle.K, bundle.V, tokens, scale, scores, acc, sparse_out.row(row));
        }
    });
    out.O = restore_outputs(sparse_out, qsel);
    return out;
}

}  // namespace bsa
