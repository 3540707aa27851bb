// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <utility>

#include "bsa/matrix.hpp"

namespace bsa {

/// Raw splitmix64 state. Identical seeds give identical streams everywhere.
struct RngState {
    std::uint64_t state = 0;
    bool operator==(const RngState&) const = default;
};

/// Advances the state by the golden-ratio increment and returns the mixed value.
std::pair<std::uint64_t, RngState> splitmix_next(RngState s) noexcept;

/// Stateful wrapper over splitmix_next.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : m_state{seed} {}

    std::uint64_t next() noexcept {
        auto [value, state] = splitmix_next(m_state);
        m_state = state;
        return value;
    }

    /// Top 24 bits of the next draw mapped onto [0, 1).
    float next_uniform() noexcept;

    RngState state() const noexcept { return m_state; }

private:
    RngState m_state;
};

enum class Distribution { uniform, gaussian };

Distribution parse_distribution(std::string_view name);
std::string_view to_string(Distribution dist);

/// Q, K and V for a (T, H, W) token grid with head dimension d.
/// Rows follow the flattened token order n = t*H*W + h*W + w.
struct LatentBundle {
    std::uint32_t T = 0;
    std::uint32_t H = 0;
    std::uint32_t W = 0;
    std::uint32_t d = 0;
    Matrix Q;
    Matrix K;
    Matrix V;

    std::size_t num_tokens() const noexcept {
        return static_cast<std::size_t>(T) * H * W;
    }

    /// Throws InvalidShape on inconsistent extents or non-finite values.
    void validate() const;

    bool operator==(const LatentBundle&) const = default;
};

/// Fills Q, then K, then V in row-major order from one splitmix64 stream.
/// Gaussian values come from Box-Muller over consecutive uniform pairs.
LatentBundle gen_bundle(std::uint64_t seed,
                        std::uint32_t T,
                        std::uint32_t H,
                        std::uint32_t W,
                        std::uint32_t d,
                        Distribution dist);

// .bsal layout: "BSAL", version byte 1, u32le T,H,W,d, then Q,K,V as f32le.
inline constexpr std::string_view kBundleMagic = "BSAL";
inline constexpr std::uint8_t kBundleVersion = 1;
inline constexpr std::size_t kBundleHeaderBytes = 4 + 1 + 4 * 4;

// .bsao layout: "BSAO", version byte 1, u32le L,d, then one f32le array.
inline constexpr std::string_view kOutputMagic = "BSAO";
inline constexpr std::uint8_t kOutputVersion = 1;
inline constexpr std::size_t kOutputHeaderBytes = 4 + 1 + 2 * 4;

/// Expected .bsal size in bytes; throws InvalidShape if it overflows.
std::uint64_t bundle_file_size(std::uint32_t T, std::uint32_t H, std::uint32_t W, std::uint32_t d);

void write_bundle(const std::filesystem::path& path, const LatentBundle& bundle);
LatentBundle read_bundle(const std::filesystem::path& path);

void write_output(const std::filesystem::path& path, const Matrix& output);
Matrix read_output(const std::filesystem::path& path);

/// Writes bytes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace bsa
