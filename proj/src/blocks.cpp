// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#include "bsa/blocks.hpp"

#include <charconv>
#include <sstream>

namespace bsa {

namespace {

void require_divisible(std::size_t extent, std::size_t part, const char* axis, const char* what) {
    if (part == 0) {
        throw ConfigError(std::string(what) + " size along axis " + axis + " must be >= 1");
    }
    if (extent % part != 0) {
        std::ostringstream msg;
        msg << what << " size " << part << " does not divide extent " << extent << " along axis " << axis;
        throw ConfigError(msg.str());
    }
}

}  // namespace

Extent3 parse_extent(const std::string& text) {
    std::size_t values[3] = {0, 0, 0};
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int i = 0; i < 3; ++i) {
        auto [next, ec] = std::from_chars(p, end, values[i]);
        if (ec != std::errc() || next == p) {
            throw ConfigError("cannot parse extent '" + text + "' (expected AxBxC)");
        }
        p = next;
        if (i < 2) {
            if (p == end || (*p != 'x' && *p != 'X')) {
                throw ConfigError("cannot parse extent '" + text + "' (expected AxBxC)");
            }
            ++p;
        }
    }
    if (p != end) {
        throw ConfigError("trailing characters in extent '" + text + "'");
    }
    return {values[0], values[1], values[2]};
}

std::string to_string(const Extent3& e) {
    return std::to_string(e.t) + "x" + std::to_string(e.h) + "x" + std::to_string(e.w);
}

std::size_t flatten_index(std::size_t t, std::size_t h, std::size_t w, const Extent3& grid) {
    if (t >= grid.t || h >= grid.h || w >= grid.w) {
        throw IndexError("coordinate (" + std::to_string(t) + "," + std::to_string(h) + "," + std::to_string(w) +
                         ") outside grid " + to_string(grid));
    }
    return t * grid.h * grid.w + h * grid.w + w;
}

Extent3 unflatten_index(std::size_t n, const Extent3& grid) {
    if (n >= grid.volume()) {
        throw IndexError("token index " + std::to_string(n) + " outside grid " + to_string(grid));
    }
    const std::size_t plane = grid.h * grid.w;
    return {n / plane, (n % plane) / grid.w, n % grid.w};
}

BlockSpec::BlockSpec(Extent3 grid, Extent3 cuboid, std::optional<Extent3> window)
    : m_grid(grid),
      m_cuboid(cuboid),
      m_window(window) {
    if (grid.t == 0 || grid.h == 0 || grid.w == 0) {
        throw InvalidShape("grid extents must all be >= 1");
    }
    require_divisible(grid.t, cuboid.t, "t", "block");
    require_divisible(grid.h, cuboid.h, "h", "block");
    require_divisible(grid.w, cuboid.w, "w", "block");
    if (window) {
        require_divisible(cuboid.t, window->t, "t", "window");
        require_divisible(cuboid.h, window->h, "h", "window");
        require_divisible(cuboid.w, window->w, "w", "window");
    }
    m_counts = {grid.t / cuboid.t, grid.h / cuboid.h, grid.w / cuboid.w};
}

std::size_t BlockSpec::token_of(std::size_t block, std::size_t offset) const {
    if (block >= num_blocks()) {
        throw IndexError("block id " + std::to_string(block) + " out of range");
    }
    if (offset >= block_size()) {
        throw IndexError("local offset " + std::to_string(offset) + " out of range");
    }
    const Extent3 b = unflatten_index(block, m_counts);
    const Extent3 l = unflatten_index(offset, m_cuboid);
    return flatten_index(b.t * m_cuboid.t + l.t, b.h * m_cuboid.h + l.h, b.w * m_cuboid.w + l.w, m_grid);
}

std::size_t BlockSpec::block_of(std::size_t token) const {
    const Extent3 c = unflatten_index(token, m_grid);
    return flatten_index(c.t / m_cuboid.t, c.h / m_cuboid.h, c.w / m_cuboid.w, m_counts);
}

std::vector<std::size_t> block_token_indices(const BlockSpec& spec, std::size_t block) {
    if (block >= spec.num_blocks()) {
        throw IndexError("block id " + std::to_string(block) + " out of range");
    }
    const Extent3 b = unflatten_index(block, spec.counts());
    const Extent3& c = spec.cuboid();
    const Extent3& g = spec.grid();
    std::vector<std::size_t> out;
    out.reserve(spec.block_size());
    for (std::size_t t = 0; t < c.t; ++t) {
        for (std::size_t h = 0; h < c.h; ++h) {
            const std::size_t row = flatten_index(b.t * c.t + t, b.h * c.h + h, b.w * c.w, g);
            for (std::size_t w = 0; w < c.w; ++w) {
                out.push_back(row + w);
            }
        }
    }
    return out;
}

MatrixD pool_blocks(const Matrix& x, const BlockSpec& spec) {
    if (x.rows() != spec.num_tokens()) {
        throw InvalidShape("pool_blocks: row count " + std::to_string(x.rows()) + " != L " +
                           std::to_string(spec.num_tokens()));
    }
    const std::size_t d = x.cols();
    MatrixD pooled(spec.num_blocks(), d, 0.0);
    const double inv = 1.0 / static_cast<double>(spec.block_size());
    for (std::size_t b = 0; b < spec.num_blocks(); ++b) {
        auto acc = pooled.row(b);
        for (std::size_t token : block_token_indices(spec, b)) {
            auto src = x.row(token);
            for (std::size_t j = 0; j < d; ++j) {
                acc[j] += src[j];
            }
        }
        for (double& v : acc) {
            v *= inv;
        }
    }
    return pooled;
}

std::vector<std::vector<std::size_t>> window_token_offsets(const BlockSpec& spec) {
    if (!spec.window()) {
        throw ConfigError("window_token_offsets: no window configured");
    }
    const Extent3& win = *spec.window();
    const Extent3& c = spec.cuboid();
    const Extent3 per{c.t / win.t, c.h / win.h, c.w / win.w};
    std::vector<std::vector<std::size_t>> windows;
    windows.reserve(per.volume());
    for (std::size_t wt = 0; wt < per.t; ++wt) {
        for (std::size_t wh = 0; wh < per.h; ++wh) {
            for (std::size_t ww = 0; ww < per.w; ++ww) {
                std::vector<std::size_t> offsets;
                offsets.reserve(win.volume());
                for (std::size_t t = 0; t < win.t; ++t) {
                    for (std::size_t h = 0; h < win.h; ++h) {
                        for (std::size_t w = 0; w < win.w; ++w) {
                            offsets.push_back(flatten_index(wt * win.t + t, wh * win.h + h, ww * win.w + w, c));
                        }
                    }
                }
                windows.push_back(std::move(offsets));
            }
        }
    }
    return windows;
}

}  // namespace bsa
