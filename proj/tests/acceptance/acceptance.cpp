// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "bsa/attention.hpp"
#include "bsa/cli.hpp"
#include "bsa/metrics.hpp"
#include "bsa/pipeline.hpp"
#include "bsa/schedule.hpp"

namespace fs = std::filesystem;
using namespace bsa;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::path(BSA_ACCEPT_TMPDIR) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int cli(const std::vector<std::string>& args, std::string* captured = nullptr) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (captured != nullptr) {
        *captured = out.str();
    }
    return code;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(double(a.data()[i]) - double(b.data()[i])));
    }
    return m;
}

Outcome degenerate_equivalence() {
    const auto start = std::chrono::steady_clock::now();
    struct Geometry {
        std::uint32_t T, H, W;
    };
    const Geometry geoms[] = {{4, 4, 4}, {8, 8, 8}, {8, 8, 16}};
    const std::uint32_t dims[] = {8, 64};
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 20; ++i) {
        const Geometry g = geoms[i % 3];
        const std::uint32_t d = dims[(i / 3) % 2];
        const Distribution dist = i % 2 == 0 ? Distribution::gaussian : Distribution::uniform;
        const LatentBundle b = gen_bundle(1000 + i, g.T, g.H, g.W, d, dist);
        const BlockSpec spec({g.T, g.H, g.W}, {4, 4, 4}, Extent3{2, 2, 2});
        const AttentionOutput sparse = sparse_attention(b, spec, select_all_queries(spec),
                                                        select_all_kv(spec.num_blocks(), spec.num_blocks()));
        worst = std::max(worst, max_abs_diff(sparse.O, full_attention(b).O));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst <= 1e-5 && secs < 60.0, "20 bundles, max_abs=" + fmt(worst) + ", " + fmt(secs) + " s"};
}

std::vector<std::uint32_t> exhaustive_min_set(const std::vector<double>& probs, double p) {
    const std::size_t n = probs.size();
    std::vector<std::uint32_t> best;
    double best_mass = -1.0;
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        std::vector<std::uint32_t> ids;
        for (std::uint32_t j = 0; j < n; ++j) {
            if (mask & (1u << j)) {
                ids.push_back(j);
            }
        }
        std::vector<std::uint32_t> by_mass = ids;
        std::stable_sort(by_mass.begin(), by_mass.end(), [&](auto a, auto b) { return probs[a] > probs[b]; });
        double mass = 0.0;
        for (auto j : by_mass) {
            mass += probs[j];
        }
        if (mass < p) {
            continue;
        }
        if (best.empty() || ids.size() < best.size() ||
            (ids.size() == best.size() && (mass > best_mass || (mass == best_mass && ids < best)))) {
            best = ids;
            best_mass = mass;
        }
    }
    return best;
}

Outcome minimal_index_set() {
    SplitMix64 rng(2024);
    int matches = 0;
    for (int row = 0; row < 200; ++row) {
        const std::size_t n = 1 + rng.next() % 12;
        std::vector<double> w(n);
        const bool quantized = row % 2 == 1;
        for (double& v : w) {
            v = quantized ? double(rng.next() % 4) : double(rng.next_uniform());
        }
        if (std::accumulate(w.begin(), w.end(), 0.0) == 0.0) {
            w[0] = 1.0;
        }
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        for (double& v : w) {
            v /= total;
        }
        const double p = std::max(1e-6, double(rng.next_uniform()));
        matches += select_min_index_set(w, p) == exhaustive_min_set(w, p) ? 1 : 0;
    }
    return {matches == 200, std::to_string(matches) + "/200 rows match exhaustive search"};
}

Outcome sparsity_composition() {
    const LatentBundle b = gen_bundle(7, 16, 28, 52, 64, Distribution::gaussian);
    const BlockSpec spec({16, 28, 52}, {4, 4, 4}, Extent3{2, 2, 2});
    const Q2KMap all = select_all_kv(spec.num_blocks(), spec.num_blocks());
    const QuerySelection half = select_queries(b.Q, spec, 0.5, true);
    const QuerySelection dense = select_all_queries(spec);
    const double s_half = pair_sparsity(half, all, spec);

    const Q2KMap tuned = calibrate_q2k(bundle_block_scores(b, spec), 0.14, KvMode::two_stage, 0.9);
    const double s_kv = pair_sparsity(dense, tuned, spec);
    const double s_both = pair_sparsity(half, tuned, spec);
    const bool ok = s_half == 0.5 && std::abs(s_kv - 0.86) <= 0.005 && std::abs(s_both - 0.93) <= 0.005;
    return {ok, "query-only=" + fmt(s_half) + ", kv keep=" + fmt(tuned.keep_fraction()) + " -> kv-only=" +
                    fmt(s_kv) + ", combined=" + fmt(s_both)};
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cells;
        std::istringstream cells_in(line);
        for (std::string cell; std::getline(cells_in, cell, ',');) {
            cells.push_back(cell);
        }
        rows.push_back(cells);
    }
    return rows;
}

double csv_value(const std::vector<std::vector<std::string>>& rows, std::size_t row, const std::string& column) {
    const auto& header = rows.at(0);
    const auto it = std::find(header.begin(), header.end(), column);
    return std::stod(rows.at(row).at(static_cast<std::size_t>(it - header.begin())));
}

std::string bench_23k(const std::string& sparsities) {
    static fs::path bundle;
    if (bundle.empty()) {
        bundle = scratch("bench") / "geom23k.bsal";
        cli({"gen", "--seed", "3", "--shape", "16x28x52x64", "--dist", "gaussian", "--out", bundle.string()});
    }
    std::string out;
    if (cli({"bench", "--bundle", bundle.string(), "--sparsities", sparsities}, &out) != cli::kExitOk) {
        return {};
    }
    return out;
}

Outcome flop_ratio_law() {
    const auto rows = parse_csv(bench_23k("0.93,0.95"));
    if (rows.size() != 3) {
        return {false, "bench did not produce two rows"};
    }
    bool ok = true;
    std::string detail;
    for (std::size_t i = 1; i <= 2; ++i) {
        const double s = csv_value(rows, i, "target_sparsity");
        const double ratio = csv_value(rows, i, "flop_ratio");
        const double ideal = 1.0 / (1.0 - s);
        ok = ok && std::abs(ratio - ideal) <= 0.05 * ideal;
        detail += (i > 1 ? ", " : "") + std::string("s=") + fmt(s) + " ratio=" + fmt(ratio) + " (ideal " + fmt(ideal) + ")";
    }
    return {ok, detail};
}

Outcome overhead_claim() {
    const auto rows = parse_csv(bench_23k("0.5,0.86,0.93,0.95"));
    if (rows.size() != 5) {
        return {false, "bench did not produce four rows"};
    }
    double worst = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        worst = std::max(worst, csv_value(rows, i, "overhead_fraction"));
    }
    return {worst < 1e-3, "L=23296, 4x4x4 blocks, 2x2x2 windows, worst overhead_fraction=" + fmt(worst)};
}

Outcome schedule_conformance() {
    std::size_t bad = 0;
    for (std::uint64_t step = 0; step <= 2000; ++step) {
        const std::uint64_t m = step / 30;
        const double expected = std::min(0.9, static_cast<double>(3 * m) / 100.0);
        bad += sparsity_at_step(step) == expected ? 0 : 1;
    }
    for (std::uint64_t step = 0; step < 30; ++step) {
        bad += sparsity_at_step(step) == 0.0 ? 0 : 1;
    }
    bad += sparsity_at_step(900) == 0.9 ? 0 : 1;
    bad += sparsity_at_step(1'000'000) == 0.9 ? 0 : 1;
    return {bad == 0, "steps 0..2000, mismatches=" + std::to_string(bad)};
}

Outcome query_cardinality() {
    const LatentBundle b = gen_bundle(11, 8, 8, 8, 16, Distribution::gaussian);
    const BlockSpec spec({8, 8, 8}, {4, 4, 4}, Extent3{2, 2, 2});
    Matrix scaled = b.Q;
    for (float& v : scaled.data()) {
        v *= 4.0f;
    }
    std::size_t bad_count = 0, bad_nest = 0, bad_scale = 0;
    for (bool windowed : {false, true}) {
        std::vector<std::uint32_t> prev;
        const std::size_t unit = windowed ? 8 : 64;
        const std::size_t units_per_block = 64 / unit;
        for (int tenth = 1; tenth <= 10; ++tenth) {
            const double r = tenth / 10.0;
            const QuerySelection sel = select_queries(b.Q, spec, r, windowed);
            const std::size_t expected = (tenth * unit + 9) / 10;
            for (std::size_t blk = 0; blk < spec.num_blocks(); ++blk) {
                bad_count += sel.per_block[blk].size() == expected * units_per_block ? 0 : 1;
            }
            const auto windows = windowed ? window_token_offsets(spec) : std::vector<std::vector<std::size_t>>{};
            for (std::size_t blk = 0; windowed && blk < spec.num_blocks(); ++blk) {
                const auto tokens = block_token_indices(spec, blk);
                for (const auto& win : windows) {
                    std::size_t kept = 0;
                    for (std::size_t off : win) {
                        kept += sel.to_sparse[tokens[off]] != QuerySelection::kSentinel ? 1 : 0;
                    }
                    bad_count += kept == expected ? 0 : 1;
                }
            }
            bad_nest += std::includes(sel.retained.begin(), sel.retained.end(), prev.begin(), prev.end()) ? 0 : 1;
            prev = sel.retained;
            bad_scale += select_queries(scaled, spec, r, windowed).retained == sel.retained ? 0 : 1;
        }
    }
    return {bad_count + bad_nest + bad_scale == 0, "count violations=" + std::to_string(bad_count) +
                                                       ", nesting violations=" + std::to_string(bad_nest) +
                                                       ", scaling violations=" + std::to_string(bad_scale)};
}

Outcome normalization_convexity() {
    SplitMix64 rng(77);
    double worst_sum = 0.0;
    std::size_t rows = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 1 + rng.next() % 64;
        const double spread = 0.1 + 50.0 * rng.next_uniform();
        std::vector<double> s(n);
        for (double& v : s) {
            v = spread * (2.0 * rng.next_uniform() - 1.0);
        }
        const auto p = softmax(s);
        worst_sum = std::max(worst_sum, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
        ++rows;
    }

    std::size_t outside = 0, checked = 0;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const LatentBundle b = gen_bundle(300 + seed, 4, 8, 8, 16, Distribution::gaussian);
        const BlockSpec spec({4, 8, 8}, {2, 4, 4}, Extent3{1, 2, 2});
        const QuerySelection qsel = select_queries(b.Q, spec, 0.5, true);
        const Q2KMap q2k = build_q2k(bundle_block_scores(b, spec), 2, KvMode::two_stage);
        const Matrix o = sparse_attention(b, spec, qsel, q2k).O;
        for (std::size_t blk = 0; blk < spec.num_blocks(); ++blk) {
            const auto tokens = gathered_kv_tokens(spec, q2k, blk);
            for (std::size_t c = 0; c < b.d; ++c) {
                float lo = b.V(tokens[0], c), hi = lo;
                for (std::size_t t : tokens) {
                    lo = std::min(lo, b.V(t, c));
                    hi = std::max(hi, b.V(t, c));
                }
                for (std::size_t local : block_token_indices(spec, blk)) {
                    outside += (o(local, c) < lo || o(local, c) > hi) ? 1 : 0;
                }
            }
            checked += spec.block_size();
        }
    }
    const bool ok = worst_sum <= 1e-6 && outside == 0 && rows >= 1000 && checked >= 1000;
    return {ok, std::to_string(rows) + " softmax rows, worst |sum-1|=" + fmt(worst_sum) + "; " +
                    std::to_string(checked) + " output rows, out-of-hull entries=" + std::to_string(outside)};
}

Outcome determinism() {
    const fs::path dir = scratch("determinism");
    const std::string shape = "8x8x16x16";
    std::vector<std::string> names = {"sparse.bsao", "full.bsao", "q2k.json", "qsel.json", "report.json"};
    std::vector<std::string> digests;
    std::size_t mismatches = 0;
    std::string reference_bundle;
    for (int trial = 0; trial < 3; ++trial) {
        const fs::path run_dir = dir / ("run" + std::to_string(trial));
        const fs::path bundle = run_dir / "in.bsal";
        fs::create_directories(run_dir);
        if (cli({"gen", "--seed", "99", "--shape", shape, "--dist", "gaussian", "--out", bundle.string()}) != 0) {
            return {false, "gen failed"};
        }
        const std::string threads = trial == 0 ? "1" : (trial == 1 ? "4" : "0");
        const fs::path input = dir / "run0" / "in.bsal";
        if (cli({"run", "--bundle", input.string(), "--out-dir", (run_dir / "out").string(), "--threads", threads}) !=
            0) {
            return {false, "run failed"};
        }
        const std::string bundle_bytes = slurp(bundle);
        if (trial == 0) {
            reference_bundle = bundle_bytes;
        } else {
            mismatches += bundle_bytes == reference_bundle ? 0 : 1;
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
            const std::string bytes = slurp(run_dir / "out" / names[i]);
            if (trial == 0) {
                digests.push_back(bytes);
            } else {
                mismatches += bytes == digests[i] ? 0 : 1;
            }
        }
    }
    return {mismatches == 0, "3 gen+run pipelines at 1, 4 and all threads, differing files=" + std::to_string(mismatches)};
}

double rmse(const Matrix& a, const Matrix& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double e = double(a.data()[i]) - double(b.data()[i]);
        acc += e * e;
    }
    return std::sqrt(acc / double(a.size()));
}

Outcome fidelity_trend() {
    const std::vector<double> targets{0.95, 0.9, 0.8, 0.5, 0.0};
    std::vector<double> mean(targets.size(), 0.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const LatentBundle b = gen_bundle(500 + seed, 8, 8, 8, 64, Distribution::gaussian);
        const Matrix dense = full_attention(b).O;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            PipelineConfig cfg;
            cfg.mode = KvMode::two_stage;
            cfg.target_sparsity = targets[i];
            const SelectionPlan plan = plan_selection(b, cfg);
            mean[i] += rmse(sparse_attention(b, plan.spec, plan.qsel, plan.q2k).O, dense) / 20.0;
        }
    }
    bool ok = mean.back() == 0.0;
    std::string detail = "mean RMSE";
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (i > 0) {
            ok = ok && mean[i] <= mean[i - 1];
        }
        detail += " s=" + fmt(targets[i]) + ":" + fmt(mean[i]);
    }
    return {ok, detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"degenerate equivalence", degenerate_equivalence},
        {"minimal index set oracle", minimal_index_set},
        {"sparsity composition", sparsity_composition},
        {"flop ratio law", flop_ratio_law},
        {"overhead fraction", overhead_claim},
        {"schedule conformance", schedule_conformance},
        {"query selection cardinality", query_cardinality},
        {"normalization and convexity", normalization_convexity},
        {"determinism", determinism},
        {"fidelity trend", fidelity_trend},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome result;
        try {
            result = criteria[i].second();
        } catch (const std::exception& e) {
            result = {false, std::string("exception: ") + e.what()};
        }
        failures += result.pass ? 0 : 1;
        std::cout << (result.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": "
                  << result.detail << std::endl;
    }
    std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
