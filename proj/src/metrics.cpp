// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#include "bsa/metrics.hpp"

#include <cmath>
#include <sstream>

namespace bsa {

std::uint64_t flops_full(std::uint64_t L, std::uint64_t d) {
    return 4 * L * L * d;
}

std::uint64_t computed_pairs(const QuerySelection& qsel, const Q2KMap& q2k, const BlockSpec& spec) {
    if (qsel.per_block.size() != q2k.q2k_num.size()) {
        throw SelectionMismatch("query selection and q2k map disagree on the number of blocks");
    }
    std::uint64_t pairs = 0;
    for (std::size_t i = 0; i < qsel.per_block.size(); ++i) {
        pairs += static_cast<std::uint64_t>(qsel.per_block[i].size()) * q2k.q2k_num[i] * spec.block_size();
    }
    return pairs;
}

std::uint64_t flops_sparse(const QuerySelection& qsel, const Q2KMap& q2k, const BlockSpec& spec, std::uint64_t d) {
    return 4 * computed_pairs(qsel, q2k, spec) * d;
}

double pair_sparsity(const QuerySelection& qsel, const Q2KMap& q2k, const BlockSpec& spec) {
    const double L = static_cast<double>(spec.num_tokens());
    return 1.0 - static_cast<double>(computed_pairs(qsel, q2k, spec)) / (L * L);
}

OverheadFlops overhead_flops(std::uint64_t L, std::uint64_t N, std::uint64_t d) {
    const double l = static_cast<double>(L);
    const double n = static_cast<double>(N);
    const double dd = static_cast<double>(d);
    OverheadFlops out;
    out.query = l * (kQueryScoreFlopsPerChannel * dd + kQueryScoreFlopsPerToken) + kSortFlopsPerCompare * l * std::log2(l);
    out.kv = n * (2.0 * dd) + kSortFlopsPerCompare * n * std::log2(n);
    return out;
}

double combined_sparsity(double s_q, double s_kv) {
    if (!(s_q >= 0.0 && s_q < 1.0) || !(s_kv >= 0.0 && s_kv < 1.0)) {
        throw ConfigError("combined_sparsity: both sparsities must lie in [0, 1)");
    }
    return 1.0 - (1.0 - s_q) * (1.0 - s_kv);
}

FlopReport make_flop_report(const QuerySelection& qsel, const Q2KMap& q2k, const BlockSpec& spec, std::uint64_t d) {
    FlopReport rep;
    rep.L = spec.num_tokens();
    rep.d = d;
    rep.num_blocks = spec.num_blocks();
    rep.block_size = spec.block_size();

    const double L = static_cast<double>(rep.L);
    const double retained = static_cast<double>(qsel.num_retained());
    const double pairs = static_cast<double>(computed_pairs(qsel, q2k, spec));
    rep.s_q = 1.0 - retained / L;
    rep.s_kv = retained > 0.0 ? 1.0 - pairs / (retained * L) : 0.0;
    rep.pair_sparsity = 1.0 - pairs / (L * L);

    rep.flops_full = flops_full(rep.L, d);
    rep.flops_sparse_attn = flops_sparse(qsel, q2k, spec, d);
    rep.flops_softmax_full = kSoftmaxFlopsPerScore * L * L;
    rep.flops_softmax_sparse = kSoftmaxFlopsPerScore * pairs;

    const OverheadFlops over = overhead_flops(rep.L, rep.num_blocks, d);
    rep.flops_overhead_query = qsel.num_retained() < qsel.num_tokens ? over.query : 0.0;
    rep.flops_overhead_kv = q2k.mode != KvMode::select_all ? over.kv : 0.0;

    const double overhead = rep.flops_overhead_query + rep.flops_overhead_kv;
    const double total = static_cast<double>(rep.flops_sparse_attn) + overhead;
    rep.flop_ratio = total > 0.0 ? static_cast<double>(rep.flops_full) / total : 0.0;
    rep.overhead_fraction = total > 0.0 ? overhead / total : 0.0;
    return rep;
}

std::string flop_report_csv_header() {
    return "L,d,s_q,s_kv,pair_sparsity,flops_full,flops_sparse,overhead_fraction,flop_ratio";
}

std::string flop_report_csv_row(const FlopReport& r) {
    std::ostringstream out;
    out.precision(10);
    out << r.L << ',' << r.d << ',' << r.s_q << ',' << r.s_kv << ',' << r.pair_sparsity << ','
        << r.flops_full << ',' << r.flops_sparse_attn << ',' << r.overhead_fraction << ',' << r.flop_ratio;
    return out.str();
}

}  // namespace bsa
