// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#include "bsa/qsparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bsa/parallel.hpp"

namespace bsa {

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        acc += static_cast<double>(a[j]) * static_cast<double>(b[j]);
    }
    return acc;
}

double similarity(std::span<const float> a, double norm_a, std::span<const float> b, double norm_b, SimilarityMode mode) {
    const double ab = dot(a, b);
    if (mode == SimilarityMode::dot) {
        return ab;
    }
    if (norm_a == 0.0 || norm_b == 0.0) {
        return 0.0;
    }
    return ab / (norm_a * norm_b);
}

struct UnitResult {
    std::vector<std::uint32_t> kept;  // ascending global ids
    std::vector<DonorLink> donors;
    std::size_t zero_norm_rows = 0;
};

// One selection unit: a block, or one window of a block. `tokens` is ascending
// and `center` indexes into it.
UnitResult select_unit(const Matrix& q,
                       const std::vector<std::size_t>& tokens,
                       std::size_t center,
                       double r,
                       SimilarityMode mode) {
    const std::size_t n = tokens.size();
    std::vector<std::span<const float>> rows(n);
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        rows[i] = q.row(tokens[i]);
        norms[i] = std::sqrt(dot(rows[i], rows[i]));
    }

    UnitResult out;
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (mode == SimilarityMode::cosine && norms[i] == 0.0) {
            ++out.zero_norm_rows;
        }
        score[i] = 1.0 - similarity(rows[center], norms[center], rows[i], norms[i], mode);
    }
    if (mode == SimilarityMode::cosine) {
        score[center] = 0.0;
    }

    // Descending score; ties by ascending position (= ascending global index).
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

    const std::size_t keep = retained_count(r, n);
    std::vector<bool> kept(n, false);
    for (std::size_t i = 0; i < keep; ++i) {
        kept[order[i]] = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (kept[i]) {
            out.kept.push_back(static_cast<std::uint32_t>(tokens[i]));
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (kept[i]) {
            continue;
        }
        std::size_t best = n;
        double best_sim = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (!kept[j]) {
                continue;
            }
            const double s = similarity(rows[i], norms[i], rows[j], norms[j], mode);
            if (best == n || s > best_sim) {
                best = j;
                best_sim = s;
            }
        }
        out.donors.push_back({static_cast<std::uint32_t>(tokens[i]), static_cast<std::uint32_t>(tokens[best])});
    }
    return out;
}

}  // namespace

SimilarityMode parse_similarity(std::string_view name) {
    if (name == "cosine") {
        return SimilarityMode::cosine;
    }
    if (name == "dot") {
        return SimilarityMode::dot;
    }
    throw ConfigError("unknown similarity '" + std::string(name) + "' (expected cosine|dot)");
}

std::string_view to_string(SimilarityMode mode) {
    return mode == SimilarityMode::cosine ? "cosine" : "dot";
}

std::size_t center_offset(const Extent3& dims) noexcept {
    return (dims.t / 2) * dims.h * dims.w + (dims.h / 2) * dims.w + dims.w / 2;
}

DissimilarityScores dissimilarity_scores(std::span<const std::span<const float>> rows,
                                         std::span<const float> center,
                                         SimilarityMode mode) {
    DissimilarityScores out;
    out.scores.reserve(rows.size());
    const double center_norm = std::sqrt(dot(center, center));
    if (mode == SimilarityMode::cosine && center_norm == 0.0) {
        ++out.zero_norm_rows;
    }
    for (const auto& row : rows) {
        if (row.size() != center.size()) {
            throw InvalidShape("dissimilarity_scores: row width differs from center width");
        }
        const double norm = std::sqrt(dot(row, row));
        if (mode == SimilarityMode::cosine && norm == 0.0) {
            ++out.zero_norm_rows;
        }
        out.scores.push_back(1.0 - similarity(center, center_norm, row, norm, mode));
    }
    return out;
}

std::size_t retained_count(double r, std::size_t count) {
    const auto keep = static_cast<std::size_t>(std::ceil(r * static_cast<double>(count) - 1e-9));
    return std::clamp<std::size_t>(keep, 1, count);
}

QuerySelection select_queries(const Matrix& q,
                              const BlockSpec& spec,
                              double r,
                              bool use_window,
                              SimilarityMode mode,
                              unsigned threads) {
    if (!(r > 0.0 && r <= 1.0)) {
        throw ConfigError("retention ratio r must lie in (0, 1], got " + std::to_string(r));
    }
    if (q.rows() != spec.num_tokens()) {
        throw InvalidShape("select_queries: Q has " + std::to_string(q.rows()) + " rows, grid has " +
                           std::to_string(spec.num_tokens()) + " tokens");
    }
    if (use_window && !spec.window()) {
        throw ConfigError("windowed query selection requested but no window configured");
    }

    // Units as local-offset lists shared by all blocks.
    std::vector<std::vector<std::size_t>> units;
    std::size_t unit_center = 0;
    if (use_window) {
        units = window_token_offsets(spec);
        unit_center = center_offset(*spec.window());
    } else {
        units.emplace_back(spec.block_size());
        std::iota(units[0].begin(), units[0].end(), std::size_t{0});
        unit_center = center_offset(spec.cuboid());
    }

    const std::size_t N = spec.num_blocks();
    std::vector<std::vector<UnitResult>> results(N);
    parallel_for(N, threads, [&](std::size_t b) {
        const std::vector<std::size_t> block_tokens = block_token_indices(spec, b);
        results[b].reserve(units.size());
        std::vector<std::size_t> tokens;
        for (const auto& unit : units) {
            tokens.clear();
            for (std::size_t off : unit) {
                tokens.push_back(block_tokens[off]);
            }
            results[b].push_back(select_unit(q, tokens, unit_center, r, mode));
        }
    });

    QuerySelection sel;
    sel.r = r;
    sel.windowed = use_window;
    sel.similarity = mode;
    sel.num_tokens = spec.num_tokens();
    sel.per_block.resize(N);
    std::vector<std::uint32_t> donor_of(sel.num_tokens, QuerySelection::kSentinel);
    for (std::size_t b = 0; b < N; ++b) {
        auto& kept = sel.per_block[b];
        for (const UnitResult& unit : results[b]) {
            kept.insert(kept.end(), unit.kept.begin(), unit.kept.end());
            for (const DonorLink& link : unit.donors) {
                donor_of[link.pruned] = link.donor;
            }
            sel.zero_norm_rows += unit.zero_norm_rows;
        }
        std::sort(kept.begin(), kept.end());
        sel.retained.insert(sel.retained.end(), kept.begin(), kept.end());
    }
    std::sort(sel.retained.begin(), sel.retained.end());

    sel.to_sparse.assign(sel.num_tokens, QuerySelection::kSentinel);
    for (std::size_t i = 0; i < sel.retained.size(); ++i) {
        sel.to_sparse[sel.retained[i]] = static_cast<std::uint32_t>(i);
    }
    for (std::size_t i = 0; i < sel.num_tokens; ++i) {
        if (donor_of[i] != QuerySelection::kSentinel) {
            sel.donors.push_back({static_cast<std::uint32_t>(i), donor_of[i]});
        }
    }
    return sel;
}

QuerySelection select_all_queries(const BlockSpec& spec) {
    QuerySelection sel;
    sel.num_tokens = spec.num_tokens();
    sel.windowed = false;
    sel.retained.resize(sel.num_tokens);
    std::iota(sel.retained.begin(), sel.retained.end(), std::uint32_t{0});
    sel.to_sparse = sel.retained;
    sel.per_block.resize(spec.num_blocks());
    for (std::size_t b = 0; b < spec.num_blocks(); ++b) {
        for (std::size_t token : block_token_indices(spec, b)) {
            sel.per_block[b].push_back(static_cast<std::uint32_t>(token));
        }
    }
    return sel;
}

Matrix restore_outputs(const Matrix& sparse_out, const QuerySelection& sel) {
    if (sparse_out.rows() != sel.retained.size()) {
        throw InvalidShape("restore_outputs: " + std::to_string(sparse_out.rows()) + " rows for " +
                           std::to_string(sel.retained.size()) + " retained queries");
    }
    Matrix out(sel.num_tokens, sparse_out.cols());
    for (std::size_t i = 0; i < sel.retained.size(); ++i) {
        std::ranges::copy(sparse_out.row(i), out.row(sel.retained[i]).begin());
    }
    for (const DonorLink& link : sel.donors) {
        const std::uint32_t src = sel.to_sparse.at(link.donor);
        if (src == QuerySelection::kSentinel) {
            throw SelectionMismatch("donor " + std::to_string(link.donor) + " is not a retained token");
        }
        std::ranges::copy(sparse_out.row(src), out.row(link.pruned).begin());
    }
    return out;
}

}  // namespace bsa
