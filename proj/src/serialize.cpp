// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#include "bsa/serialize.hpp"

namespace bsa {

nlohmann::json to_json(const Q2KMap& map) {
    return {
        {"q2k_num", map.q2k_num},
        {"q2k_index", map.q2k_index},
        {"mode", std::string(to_string(map.mode))},
        {"k", map.k},
        {"n", map.n},
        {"tau", map.tau},
        {"thresholds", map.thresholds},
        {"keep_fraction", map.keep_fraction()},
    };
}

nlohmann::json to_json(const QuerySelection& sel) {
    nlohmann::json donors = nlohmann::json::array();
    for (const DonorLink& link : sel.donors) {
        donors.push_back({link.pruned, link.donor});
    }
    return {
        {"r", sel.r},
        {"windowed", sel.windowed},
        {"similarity", std::string(to_string(sel.similarity))},
        {"num_tokens", sel.num_tokens},
        {"num_retained", sel.num_retained()},
        {"retained", sel.retained},
        {"donors", std::move(donors)},
        {"zero_norm_rows", sel.zero_norm_rows},
    };
}

nlohmann::json to_json(const FlopReport& r) {
    return {
        {"L", r.L},
        {"d", r.d},
        {"num_blocks", r.num_blocks},
        {"block_size", r.block_size},
        {"s_q", r.s_q},
        {"s_kv", r.s_kv},
        {"pair_sparsity", r.pair_sparsity},
        {"flops_full", r.flops_full},
        {"flops_sparse_attn", r.flops_sparse_attn},
        {"flops_overhead_query", r.flops_overhead_query},
        {"flops_overhead_kv", r.flops_overhead_kv},
        {"flops_softmax_full", r.flops_softmax_full},
        {"flops_softmax_sparse", r.flops_softmax_sparse},
        {"flop_ratio", r.flop_ratio},
        {"overhead_fraction", r.overhead_fraction},
        {"overhead_model",
         {
             {"query", "L*(2*d + 5) + 1*L*log2(L)"},
             {"kv", "N*(2*d) + 1*N*log2(N)"},
             {"flops_per_mac", 2},
             {"softmax_flops_per_score", kSoftmaxFlopsPerScore},
         }},
    };
}

}  // namespace bsa
