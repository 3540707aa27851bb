// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "bsa/blocks.hpp"
#include "bsa/matrix.hpp"

namespace bsa {

enum class SimilarityMode {
    cosine,  ///< score = 1 - cos(center, q)
    dot,     ///< score = 1 - center.q
};

SimilarityMode parse_similarity(std::string_view name);
std::string_view to_string(SimilarityMode mode);

/// Local offset of the floor-midpoint token of an (a, b, c) cuboid.
std::size_t center_offset(const Extent3& dims) noexcept;

struct DissimilarityScores {
    std::vector<double> scores;
    /// Rows with zero norm; their cosine is taken as 0 (score 1).
    std::size_t zero_norm_rows = 0;
};

/// Score of each row against the center row: 1 - cos (or 1 - dot in dot mode).
DissimilarityScores dissimilarity_scores(std::span<const std::span<const float>> rows,
                                         std::span<const float> center,
                                         SimilarityMode mode = SimilarityMode::cosine);

/// Number of tokens kept out of `count` at retention ratio r: ceil(r * count),
/// with a 1e-9 guard so products like 0.3 * 10 round to the intended integer.
std::size_t retained_count(double r, std::size_t count);

struct DonorLink {
    std::uint32_t pruned = 0;
    std::uint32_t donor = 0;
    bool operator==(const DonorLink&) const = default;
};

/// Result of query-side pruning.
struct QuerySelection {
    static constexpr std::uint32_t kSentinel = std::numeric_limits<std::uint32_t>::max();

    double r = 1.0;
    bool windowed = false;
    SimilarityMode similarity = SimilarityMode::cosine;
    std::size_t num_tokens = 0;
    /// Retained global indices, strictly ascending. O_s rows follow this order.
    std::vector<std::uint32_t> retained;
    /// Global index -> row in `retained`, or kSentinel if pruned. Length L.
    std::vector<std::uint32_t> to_sparse;
    /// One entry per pruned token, ordered by pruned index.
    std::vector<DonorLink> donors;
    /// Retained global indices of each block, ascending (indexed by block id).
    std::vector<std::vector<std::uint32_t>> per_block;
    std::size_t zero_norm_rows = 0;

    std::size_t num_retained() const noexcept { return retained.size(); }
    bool operator==(const QuerySelection&) const = default;
};

/// Ranks every block (or window, when `use_window`) by dissimilarity to its
/// center token and keeps the top ceil(r * count). Ties go to the lower
/// global index. Each pruned token is paired with the most similar retained
/// token of its unit.
QuerySelection select_queries(const Matrix& q,
                              const BlockSpec& spec,
                              double r,
                              bool use_window,
                              SimilarityMode mode = SimilarityMode::cosine,
                              unsigned threads = 0);

/// The identity selection (r = 1).
QuerySelection select_all_queries(const BlockSpec& spec);

/// Scatters O_s back to L rows; pruned rows copy their donor's row.
Matrix restore_outputs(const Matrix& sparse_out, const QuerySelection& sel);

}  // namespace bsa
