// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bsa/matrix.hpp"

namespace bsa {

/// Extents along (time, height, width).
struct Extent3 {
    std::size_t t = 1;
    std::size_t h = 1;
    std::size_t w = 1;

    std::size_t volume() const noexcept { return t * h * w; }
    bool operator==(const Extent3&) const = default;
};

/// Parses "TxHxW" (e.g. "4x4x4").
Extent3 parse_extent(const std::string& text);
std::string to_string(const Extent3& e);

/// Row-major flattening n = t*H*W + h*W + w. Throws IndexError when out of range.
std::size_t flatten_index(std::size_t t, std::size_t h, std::size_t w, const Extent3& grid);
Extent3 unflatten_index(std::size_t n, const Extent3& grid);

/// Cuboid partition of a token grid, optionally subdivided into windows.
///
/// Blocks are enumerated t-major, then h, then w. Inside a block, tokens are
/// addressed by a local offset in the same row-major order; ascending local
/// offsets are also ascending global indices.
class BlockSpec {
public:
    /// Validates exact divisibility. The error message names the failing axis.
    BlockSpec(Extent3 grid, Extent3 cuboid, std::optional<Extent3> window = std::nullopt);

    const Extent3& grid() const noexcept { return m_grid; }
    const Extent3& cuboid() const noexcept { return m_cuboid; }
    const Extent3& counts() const noexcept { return m_counts; }
    const std::optional<Extent3>& window() const noexcept { return m_window; }

    std::size_t num_tokens() const noexcept { return m_grid.volume(); }
    /// Tokens per block (B).
    std::size_t block_size() const noexcept { return m_cuboid.volume(); }
    /// Number of blocks (N).
    std::size_t num_blocks() const noexcept { return m_counts.volume(); }

    /// Global token index of `offset` inside block `block`.
    std::size_t token_of(std::size_t block, std::size_t offset) const;
    /// Block id that owns a global token index.
    std::size_t block_of(std::size_t token) const;

private:
    Extent3 m_grid;
    Extent3 m_cuboid;
    Extent3 m_counts;
    std::optional<Extent3> m_window;
};

/// The B global token indices of block b, ascending.
std::vector<std::size_t> block_token_indices(const BlockSpec& spec, std::size_t block);

/// Per-block mean of token rows, accumulated in double in ascending token order.
MatrixD pool_blocks(const Matrix& x, const BlockSpec& spec);

/// Local-offset lists for each window of a cuboid (same layout for every block).
/// Windows are enumerated row-major; offsets inside a window are ascending.
std::vector<std::vector<std::size_t>> window_token_offsets(const BlockSpec& spec);

}  // namespace bsa
