// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#include "bsa/latents.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <string>

namespace bsa {

std::pair<std::uint64_t, RngState> splitmix_next(RngState s) noexcept {
    std::uint64_t z = (s.state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return {z ^ (z >> 31), s};
}

float SplitMix64::next_uniform() noexcept {
    // 24 bits fit the binary32 mantissa, so the conversion is exact.
    return static_cast<float>(next() >> 40) * 0x1.0p-24f;
}

Distribution parse_distribution(std::string_view name) {
    if (name == "uniform") {
        return Distribution::uniform;
    }
    if (name == "gaussian") {
        return Distribution::gaussian;
    }
    throw ConfigError("unknown distribution '" + std::string(name) + "' (expected uniform|gaussian)");
}

std::string_view to_string(Distribution dist) {
    return dist == Distribution::uniform ? "uniform" : "gaussian";
}

void LatentBundle::validate() const {
    if (T == 0 || H == 0 || W == 0 || d == 0) {
        throw InvalidShape("bundle extents must all be >= 1");
    }
    const std::size_t L = num_tokens();
    for (const Matrix* m : {&Q, &K, &V}) {
        if (m->rows() != L || m->cols() != d) {
            throw InvalidShape("bundle matrices must be L x d with L = T*H*W");
        }
        for (float v : m->data()) {
            if (!std::isfinite(v)) {
                throw InvalidShape("bundle contains a non-finite value");
            }
        }
    }
}

std::uint64_t bundle_file_size(std::uint32_t T, std::uint32_t H, std::uint32_t W, std::uint32_t d) {
    if (T == 0 || H == 0 || W == 0 || d == 0) {
        throw InvalidShape("bundle extents must all be >= 1");
    }
    constexpr std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t elems = T;
    for (std::uint64_t f : {std::uint64_t{H}, std::uint64_t{W}, std::uint64_t{d}, std::uint64_t{3} * 4}) {
        if (elems > max / f) {
            throw InvalidShape("bundle shape overflows 64-bit byte count");
        }
        elems *= f;
    }
    if (elems > max - kBundleHeaderBytes) {
        throw InvalidShape("bundle shape overflows 64-bit byte count");
    }
    return elems + kBundleHeaderBytes;
}

LatentBundle gen_bundle(std::uint64_t seed,
                        std::uint32_t T,
                        std::uint32_t H,
                        std::uint32_t W,
                        std::uint32_t d,
                        Distribution dist) {
    const std::uint64_t bytes = bundle_file_size(T, H, W, d);
    if (bytes > std::numeric_limits<std::size_t>::max()) {
        throw InvalidShape("bundle does not fit addressable memory");
    }
    LatentBundle b;
    b.T = T;
    b.H = H;
    b.W = W;
    b.d = d;
    const std::size_t L = b.num_tokens();
    b.Q = Matrix(L, d);
    b.K = Matrix(L, d);
    b.V = Matrix(L, d);

    SplitMix64 rng(seed);
    if (dist == Distribution::uniform) {
        for (Matrix* m : {&b.Q, &b.K, &b.V}) {
            for (float& v : m->data()) {
                v = rng.next_uniform();
            }
        }
        return b;
    }

    // Box-Muller pairs run continuously across Q, K and V.
    bool have_spare = false;
    double spare = 0.0;
    for (Matrix* m : {&b.Q, &b.K, &b.V}) {
        for (float& v : m->data()) {
            if (have_spare) {
                v = static_cast<float>(spare);
                have_spare = false;
                continue;
            }
            const double u1 = rng.next_uniform();
            const double u2 = rng.next_uniform();
            const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
            const double theta = 2.0 * std::numbers::pi * u2;
            v = static_cast<float>(radius * std::cos(theta));
            spare = radius * std::sin(theta);
            have_spare = true;
        }
    }
    return b;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
}

void put_floats(std::string& out, std::span<const float> values) {
    for (float f : values) {
        put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    return v;
}

void get_floats(const std::string& in, std::size_t pos, std::span<float> out) {
    for (float& f : out) {
        f = std::bit_cast<float>(get_u32(in, pos));
        pos += 4;
    }
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_header(const std::string& bytes, std::string_view magic, std::uint8_t version, std::size_t header) {
    if (bytes.size() < header) {
        throw FormatError("file shorter than its header");
    }
    if (std::string_view(bytes).substr(0, 4) != magic) {
        throw FormatError("bad magic, expected '" + std::string(magic) + "'");
    }
    if (static_cast<std::uint8_t>(bytes[4]) != version) {
        throw FormatError("unsupported version " + std::to_string(static_cast<unsigned>(bytes[4])));
    }
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write '" + tmp.string() + "'");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw IoError("short write to '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename onto '" + path.string() + "'");
    }
}

void write_bundle(const std::filesystem::path& path, const LatentBundle& bundle) {
    bundle.validate();
    std::string out;
    out.reserve(bundle_file_size(bundle.T, bundle.H, bundle.W, bundle.d));
    out.append(kBundleMagic);
    out.push_back(static_cast<char>(kBundleVersion));
    for (std::uint32_t v : {bundle.T, bundle.H, bundle.W, bundle.d}) {
        put_u32(out, v);
    }
    put_floats(out, bundle.Q.data());
    put_floats(out, bundle.K.data());
    put_floats(out, bundle.V.data());
    write_file_atomic(path, out);
}

LatentBundle read_bundle(const std::filesystem::path& path) {
    const std::string bytes = slurp(path);
    check_header(bytes, kBundleMagic, kBundleVersion, kBundleHeaderBytes);
    LatentBundle b;
    b.T = get_u32(bytes, 5);
    b.H = get_u32(bytes, 9);
    b.W = get_u32(bytes, 13);
    b.d = get_u32(bytes, 17);
    const std::uint64_t expected = bundle_file_size(b.T, b.H, b.W, b.d);
    if (bytes.size() < expected) {
        throw FormatError("truncated payload: expected " + std::to_string(expected) + " bytes, got " +
                          std::to_string(bytes.size()));
    }
    if (bytes.size() > expected) {
        throw FormatError("trailing bytes after payload");
    }
    const std::size_t L = b.num_tokens();
    const std::size_t stride = L * b.d * 4;
    b.Q = Matrix(L, b.d);
    b.K = Matrix(L, b.d);
    b.V = Matrix(L, b.d);
    get_floats(bytes, kBundleHeaderBytes, b.Q.data());
    get_floats(bytes, kBundleHeaderBytes + stride, b.K.data());
    get_floats(bytes, kBundleHeaderBytes + 2 * stride, b.V.data());
    return b;
}

void write_output(const std::filesystem::path& path, const Matrix& output) {
    if (output.rows() > std::numeric_limits<std::uint32_t>::max() ||
        output.cols() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidShape("output too large for a 32-bit header");
    }
    std::string out;
    out.reserve(kOutputHeaderBytes + output.size() * 4);
    out.append(kOutputMagic);
    out.push_back(static_cast<char>(kOutputVersion));
    put_u32(out, static_cast<std::uint32_t>(output.rows()));
    put_u32(out, static_cast<std::uint32_t>(output.cols()));
    put_floats(out, output.data());
    write_file_atomic(path, out);
}

Matrix read_output(const std::filesystem::path& path) {
    const std::string bytes = slurp(path);
    check_header(bytes, kOutputMagic, kOutputVersion, kOutputHeaderBytes);
    const std::uint64_t rows = get_u32(bytes, 5);
    const std::uint64_t cols = get_u32(bytes, 9);
    const std::uint64_t expected = kOutputHeaderBytes + rows * cols * 4;
    if (bytes.size() != expected) {
        throw FormatError("payload size does not match declared L x d");
    }
    Matrix m(rows, cols);
    get_floats(bytes, kOutputHeaderBytes, m.data());
    return m;
}

}  // namespace bsa
