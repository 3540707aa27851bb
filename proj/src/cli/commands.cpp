// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#include "bsa/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "bsa/attention.hpp"
#include "bsa/latents.hpp"
#include "bsa/metrics.hpp"
#include "bsa/pipeline.hpp"
#include "bsa/schedule.hpp"
#include "bsa/serialize.hpp"

#ifndef BSA_VERSION
#define BSA_VERSION "0.0.0"
#endif

namespace bsa::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view version() {
    return BSA_VERSION;
}

namespace {

struct GenOptions {
    std::uint64_t seed = 0;
    std::string shape;
    std::string dist = "uniform";
    std::string out;
};

struct SelectionOptions {
    std::string block = "4x4x4";
    std::string window = "2x2x2";
    double r = 0.5;
    std::size_t k = 0;
    double sparsity = 0.0;
    std::string mode = "unified_prob";
    double tau = 0.9;
    std::string similarity = "cosine";
    unsigned threads = 0;
};

struct RunOptions {
    std::string config;
    std::string bundle;
    std::string out_dir = ".";
    bool skip_full = false;
    SelectionOptions sel;
};

struct CompareOptions {
    std::string a;
    std::string b;
    double tol = 1e-5;
};

struct BenchOptions {
    std::string bundle;
    std::vector<double> sparsities{0.5, 0.86, 0.93, 0.95};
    std::string out;
    SelectionOptions sel;
};

struct SchedOptions {
    std::uint64_t steps = 1200;
    std::uint64_t stride = 30;
    std::uint64_t horizon = 9000;
    std::string out;
};

void add_selection_flags(CLI::App* cmd, SelectionOptions& o) {
    cmd->add_option("--block", o.block, "block cuboid CtxChxCw")->capture_default_str();
    cmd->add_option("--window", o.window, "query window WtxWhxWw, or 'none'")->capture_default_str();
    cmd->add_option("--r", o.r, "query retention ratio in (0,1]")->capture_default_str();
    cmd->add_option("--mode", o.mode, "KV selection: unified_prob|two_stage|select_all")->capture_default_str();
    cmd->add_option("--tau", o.tau, "stage-2 mass target for two_stage")->capture_default_str();
    cmd->add_option("--similarity", o.similarity, "query scoring: cosine|dot")->capture_default_str();
    cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)")->capture_default_str();
}

PipelineConfig to_pipeline(const SelectionOptions& o, bool has_k, bool has_sparsity) {
    PipelineConfig cfg;
    cfg.block = parse_extent(o.block);
    if (o.window == "none" || o.window.empty()) {
        cfg.window.reset();
    } else {
        cfg.window = parse_extent(o.window);
    }
    cfg.r = o.r;
    if (has_k) {
        cfg.k = o.k;
    }
    if (has_sparsity) {
        cfg.target_sparsity = o.sparsity;
    }
    cfg.mode = parse_kv_mode(o.mode);
    cfg.tau = o.tau;
    cfg.similarity = parse_similarity(o.similarity);
    cfg.threads = o.threads;
    return cfg;
}

json config_json(const PipelineConfig& cfg) {
    json j{
        {"block", to_string(cfg.block)},
        {"window", cfg.window ? to_string(*cfg.window) : std::string("none")},
        {"r", cfg.r},
        {"mode", std::string(to_string(cfg.mode))},
        {"tau", cfg.tau},
        {"similarity", std::string(to_string(cfg.similarity))},
    };
    j["k"] = cfg.k ? json(*cfg.k) : json(nullptr);
    j["sparsity"] = cfg.target_sparsity ? json(*cfg.target_sparsity) : json(nullptr);
    return j;
}

void write_json(const fs::path& path, const json& j) {
    write_file_atomic(path, j.dump(2) + "\n");
}

std::string shape_string(const LatentBundle& b) {
    std::ostringstream s;
    s << b.T << 'x' << b.H << 'x' << b.W << 'x' << b.d;
    return s.str();
}

int cmd_gen(const GenOptions& o, std::ostream& out) {
    std::uint32_t dims[4] = {0, 0, 0, 0};
    {
        std::istringstream in(o.shape);
        std::string part;
        int i = 0;
        while (std::getline(in, part, 'x')) {
            if (i >= 4) {
                throw ConfigError("shape must be TxHxWxd");
            }
            std::size_t used = 0;
            const unsigned long v = std::stoul(part, &used);
            if (used != part.size() || v > 0xFFFFFFFFul) {
                throw ConfigError("bad shape component '" + part + "'");
            }
            dims[i++] = static_cast<std::uint32_t>(v);
        }
        if (i != 4) {
            throw ConfigError("shape must be TxHxWxd");
        }
    }
    const LatentBundle b = gen_bundle(o.seed, dims[0], dims[1], dims[2], dims[3], parse_distribution(o.dist));
    write_bundle(o.out, b);
    out << "L=" << b.num_tokens() << " bytes=" << bundle_file_size(b.T, b.H, b.W, b.d) << " path=" << o.out << '\n';
    return kExitOk;
}

template <typename T>
void apply_json(CLI::App* cmd, const json& j, const char* key, const char* flag, T& target) {
    if (j.contains(key) && cmd->count(flag) == 0) {
        target = j.at(key).get<T>();
    }
}

int cmd_run(CLI::App* cmd, RunOptions o, std::ostream& out) {
    bool has_k = cmd->count("--k") > 0;
    bool has_sparsity = cmd->count("--sparsity") > 0;
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) {
            throw IoError("cannot open config '" + o.config + "'");
        }
        const json j = json::parse(in);
        apply_json(cmd, j, "bundle", "--bundle", o.bundle);
        apply_json(cmd, j, "out_dir", "--out-dir", o.out_dir);
        apply_json(cmd, j, "skip_full", "--skip-full", o.skip_full);
        apply_json(cmd, j, "block", "--block", o.sel.block);
        apply_json(cmd, j, "window", "--window", o.sel.window);
        apply_json(cmd, j, "r", "--r", o.sel.r);
        apply_json(cmd, j, "mode", "--mode", o.sel.mode);
        apply_json(cmd, j, "tau", "--tau", o.sel.tau);
        apply_json(cmd, j, "similarity", "--similarity", o.sel.similarity);
        apply_json(cmd, j, "threads", "--threads", o.sel.threads);
        // An explicit k or sparsity flag overrides either key from the file.
        if (!has_k && !has_sparsity) {
            if (j.contains("k") && !j["k"].is_null()) {
                o.sel.k = j["k"].get<std::size_t>();
                has_k = true;
            }
            if (j.contains("sparsity") && !j["sparsity"].is_null()) {
                o.sel.sparsity = j["sparsity"].get<double>();
                has_sparsity = true;
            }
        }
    }
    if (o.bundle.empty()) {
        throw ConfigError("run: --bundle is required");
    }
    if (has_k && has_sparsity) {
        throw ConfigError("run: --k and --sparsity are mutually exclusive");
    }

    const PipelineConfig cfg = to_pipeline(o.sel, has_k, has_sparsity);
    const LatentBundle bundle = read_bundle(o.bundle);
    const SelectionPlan plan = plan_selection(bundle, cfg);

    const fs::path dir(o.out_dir);
    fs::create_directories(dir);
    const AttentionOutput sparse = sparse_attention(bundle, plan.spec, plan.qsel, plan.q2k, cfg.threads);
    write_output(dir / "sparse.bsao", sparse.O);
    if (!o.skip_full) {
        const AttentionOutput full = full_attention(bundle, cfg.threads);
        write_output(dir / "full.bsao", full.O);
    }
    const FlopReport report = make_flop_report(plan.qsel, plan.q2k, plan.spec, bundle.d);
    write_json(dir / "q2k.json", to_json(plan.q2k));
    write_json(dir / "qsel.json", to_json(plan.qsel));

    json config = config_json(cfg);
    config["bundle"] = o.bundle;
    config["shape"] = shape_string(bundle);
    write_json(dir / "report.json",
               {{"version", std::string(version())}, {"config", config}, {"report", to_json(report)}});

    out << "L=" << report.L << " d=" << report.d << " blocks=" << report.num_blocks << " r=" << plan.r
        << " k=" << plan.q2k.k << " mode=" << to_string(plan.q2k.mode) << '\n';
    out << "pair_sparsity=" << report.pair_sparsity << " flop_ratio=" << report.flop_ratio
        << " overhead_fraction=" << report.overhead_fraction << '\n';
    out << "wrote " << (dir / "sparse.bsao").string() << (o.skip_full ? "" : " full.bsao") << " q2k.json qsel.json report.json\n";
    return kExitOk;
}

Matrix load_comparable(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    if (std::string_view(magic, 4) == kBundleMagic) {
        const LatentBundle b = read_bundle(path);
        std::vector<float> all;
        all.reserve(b.Q.size() * 3);
        for (const Matrix* m : {&b.Q, &b.K, &b.V}) {
            all.insert(all.end(), m->data().begin(), m->data().end());
        }
        return Matrix(3 * b.Q.rows(), b.d, std::move(all));
    }
    return read_output(path);
}

int cmd_compare(const CompareOptions& o, std::ostream& out) {
    const Matrix a = load_comparable(o.a);
    const Matrix b = load_comparable(o.b);
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw InvalidShape("compare: shapes differ (" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                           " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
    }
    double max_abs = 0.0;
    double sum_abs = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]));
        max_abs = std::max(max_abs, diff);
        sum_abs += diff;
        sum_sq += diff * diff;
    }
    const double n = a.empty() ? 1.0 : static_cast<double>(a.size());
    out.precision(9);
    out << "max_abs=" << max_abs << " mean_abs=" << sum_abs / n << " rmse=" << std::sqrt(sum_sq / n)
        << " tol=" << o.tol << '\n';
    return max_abs <= o.tol ? kExitOk : kExitTolerance;
}

int cmd_bench(BenchOptions o, std::ostream& out) {
    if (o.bundle.empty()) {
        throw ConfigError("bench: --bundle is required");
    }
    std::sort(o.sparsities.begin(), o.sparsities.end());
    o.sparsities.erase(std::unique(o.sparsities.begin(), o.sparsities.end()), o.sparsities.end());
    const LatentBundle bundle = read_bundle(o.bundle);

    std::ostringstream csv;
    csv.precision(10);
    csv << "target_sparsity," << flop_report_csv_header() << ",ideal_ratio,r,k,kv_keep\n";
    for (double s : o.sparsities) {
        PipelineConfig cfg = to_pipeline(o.sel, false, true);
        cfg.target_sparsity = s;
        const SelectionPlan plan = plan_selection(bundle, cfg);
        const FlopReport report = make_flop_report(plan.qsel, plan.q2k, plan.spec, bundle.d);
        csv << s << ',' << flop_report_csv_row(report) << ',' << 1.0 / (1.0 - s) << ',' << plan.r << ','
            << plan.q2k.k << ',' << plan.q2k.keep_fraction() << '\n';
    }
    if (o.out.empty()) {
        out << csv.str();
    } else {
        write_file_atomic(o.out, csv.str());
        out << "wrote " << o.out << '\n';
    }
    return kExitOk;
}

int cmd_sched(const SchedOptions& o, std::ostream& out) {
    AnnealSchedule schedule;
    schedule.anneal_horizon = o.horizon;
    const std::string csv = schedule_csv(o.steps, o.stride, schedule);
    if (o.out.empty()) {
        out << csv;
    } else {
        write_file_atomic(o.out, csv);
        out << "wrote " << o.out << '\n';
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bidirectional sparse attention: generation, execution and FLOP accounting", "bsa"};
    app.set_version_flag("--version", std::string(version()));
    app.require_subcommand(1);

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic .bsal bundle");
    gen_cmd->add_option("--seed", gen.seed, "splitmix64 seed")->capture_default_str();
    gen_cmd->add_option("--shape", gen.shape, "TxHxWxd")->required();
    gen_cmd->add_option("--dist", gen.dist, "uniform|gaussian")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "output .bsal path")->required();

    RunOptions run_opts;
    auto* run_cmd = app.add_subcommand("run", "run full and sparse attention on a bundle");
    run_cmd->add_option("--config", run_opts.config, "JSON config file (flags win on conflict)");
    run_cmd->add_option("--bundle", run_opts.bundle, "input .bsal path");
    run_cmd->add_option("--out-dir", run_opts.out_dir, "output directory")->capture_default_str();
    run_cmd->add_flag("--skip-full", run_opts.skip_full, "do not compute dense attention");
    run_cmd->add_option("--k", run_opts.sel.k, "key-sample count for the dynamic threshold");
    run_cmd->add_option("--sparsity", run_opts.sel.sparsity, "target combined sparsity in [0,1)");
    add_selection_flags(run_cmd, run_opts.sel);

    CompareOptions cmp;
    auto* cmp_cmd = app.add_subcommand("compare", "compare two .bsao (or .bsal) files");
    cmp_cmd->add_option("--a", cmp.a)->required();
    cmp_cmd->add_option("--b", cmp.b)->required();
    cmp_cmd->add_option("--tol", cmp.tol, "max-abs tolerance")->capture_default_str();

    BenchOptions bench;
    bench.sel.mode = "two_stage";
    auto* bench_cmd = app.add_subcommand("bench", "FLOP report per target sparsity");
    bench_cmd->add_option("--bundle", bench.bundle, "input .bsal path")->required();
    bench_cmd->add_option("--sparsities", bench.sparsities, "comma-separated targets")->delimiter(',');
    bench_cmd->add_option("--out", bench.out, "CSV path (default stdout)");
    add_selection_flags(bench_cmd, bench.sel);

    SchedOptions sched;
    auto* sched_cmd = app.add_subcommand("sched", "annealed sparsity schedule as CSV");
    sched_cmd->add_option("--steps", sched.steps, "last step")->capture_default_str();
    sched_cmd->add_option("--stride", sched.stride, "row spacing in steps")->capture_default_str();
    sched_cmd->add_option("--horizon", sched.horizon, "KV anneal horizon in steps")->capture_default_str();
    sched_cmd->add_option("--out", sched.out, "CSV path (default stdout)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << version() << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*gen_cmd) {
            return cmd_gen(gen, out);
        }
        if (*run_cmd) {
            return cmd_run(run_cmd, run_opts, out);
        }
        if (*cmp_cmd) {
            return cmd_compare(cmp, out);
        }
        if (*bench_cmd) {
            return cmd_bench(bench, out);
        }
        if (*sched_cmd) {
            return cmd_sched(sched, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace bsa::cli
