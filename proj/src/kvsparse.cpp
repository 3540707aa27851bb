// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#include "bsa/kvsparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "bsa/parallel.hpp"

namespace bsa {

KvMode parse_kv_mode(std::string_view name) {
    if (name == "unified_prob") {
        return KvMode::unified_prob;
    }
    if (name == "two_stage") {
        return KvMode::two_stage;
    }
    if (name == "select_all") {
        return KvMode::select_all;
    }
    throw ConfigError("unknown KV mode '" + std::string(name) + "' (expected unified_prob|two_stage|select_all)");
}

std::string_view to_string(KvMode mode) {
    switch (mode) {
    case KvMode::unified_prob:
        return "unified_prob";
    case KvMode::two_stage:
        return "two_stage";
    case KvMode::select_all:
        return "select_all";
    }
    return "unknown";
}

double Q2KMap::keep_fraction() const noexcept {
    if (q2k_num.empty() || n == 0) {
        return 0.0;
    }
    const double total = std::accumulate(q2k_num.begin(), q2k_num.end(), 0.0);
    return total / (static_cast<double>(q2k_num.size()) * static_cast<double>(n));
}

BlockScores pooled_scores(const MatrixD& q_pooled, const MatrixD& k_pooled, double d_k) {
    if (q_pooled.cols() == 0 || k_pooled.cols() == 0) {
        throw InvalidShape("pooled_scores: head dimension must be >= 1");
    }
    if (q_pooled.cols() != k_pooled.cols()) {
        throw InvalidShape("pooled_scores: query and key widths differ");
    }
    if (!(d_k > 0.0)) {
        throw InvalidShape("pooled_scores: d_k must be positive");
    }
    const double scale = 1.0 / std::sqrt(d_k);
    BlockScores out{MatrixD(q_pooled.rows(), k_pooled.rows())};
    for (std::size_t i = 0; i < q_pooled.rows(); ++i) {
        auto qi = q_pooled.row(i);
        for (std::size_t j = 0; j < k_pooled.rows(); ++j) {
            auto kj = k_pooled.row(j);
            double acc = 0.0;
            for (std::size_t c = 0; c < qi.size(); ++c) {
                acc += qi[c] * kj[c];
            }
            out.scores(i, j) = acc * scale;
        }
    }
    return out;
}

double normal_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) {
        throw ConfigError("normal_quantile: argument must lie in (0, 1), got " + std::to_string(u));
    }
    const double q = u - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r +
                    45921.953931549871457) *
                       r +
                   13731.693765509461125) *
                      r +
                  1971.5909503065514427) *
                     r +
                 133.14166789178437745) *
                    r +
                3.387132872796366608) /
               (((((((r * 5226.495278852545925 + 28729.085735721942674) * r + 39307.89580009271061) * r +
                    21213.794301586595867) *
                       r +
                   5394.1960214247511077) *
                      r +
                  687.1870074920579083) *
                     r +
                 42.313330701600911252) *
                    r +
                1.0);
    }
    double r = q < 0.0 ? u : 1.0 - u;
    r = std::sqrt(-std::log(r));
    double val = 0.0;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                   1.27045825245236838258) *
                      r +
                  3.64784832476320460504) *
                     r +
                 5.7694972214606914055) *
                    r +
                4.6303378461565452959) *
                   r +
               1.42343711074968357734) /
              (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                   0.14810397642748007459) *
                      r +
                  0.68976733498510000455) *
                     r +
                 1.6763848301838038494) *
                    r +
                2.05319162663775882187) *
                   r +
               1.0);
    } else {
        r -= 5.0;
        val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                   0.026532189526576123093) *
                      r +
                  0.29656057182850489123) *
                     r +
                 1.7848265399172913358) *
                    r +
                5.4637849111641143699) *
                   r +
               6.6579046435011037772) /
              (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                   7.868691311456132591e-4) *
                      r +
                  0.0148753612908506148525) *
                     r +
                 0.13692988092273580531) *
                    r +
                0.59983220655588793769) *
                   r +
               1.0);
    }
    return q < 0.0 ? -val : val;
}

std::vector<double> softmax(std::span<const double> scores) {
    if (scores.empty()) {
        throw InvalidShape("softmax of an empty row");
    }
    const double max = *std::ranges::max_element(scores);
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - max);
        sum += out[i];
    }
    for (double& v : out) {
        v /= sum;
    }
    return out;
}

double dynamic_threshold(std::span<const double> row, std::size_t k, bool probability_space) {
    const std::size_t n = row.size();
    if (n == 0 || k < 1 || k > n) {
        throw ConfigError("dynamic_threshold: need 1 <= k <= n, got k=" + std::to_string(k) +
                          " n=" + std::to_string(n));
    }
    double mean = 0.0;
    for (double v : row) {
        mean += v;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : row) {
        var += (v - mean) * (v - mean);
    }
    const double stddev = std::sqrt(var / static_cast<double>(n));

    const double nd = static_cast<double>(n);
    const double lo = 1.0 / (2.0 * nd);
    const double arg = std::clamp(1.0 - static_cast<double>(k) / nd, lo, 1.0 - lo);
    double p = mean + stddev * normal_quantile(arg);
    if (probability_space) {
        p = std::clamp(p, std::numeric_limits<double>::min(), 1.0);
    }
    return p;
}

std::vector<std::uint32_t> select_min_index_set(std::span<const double> probs, double p) {
    if (probs.empty()) {
        throw InvalidShape("select_min_index_set: empty row");
    }
    if (!(p > 0.0 && p <= 1.0)) {
        throw ConfigError("select_min_index_set: mass target must lie in (0, 1], got " + std::to_string(p));
    }
    double total = 0.0;
    for (double v : probs) {
        if (!(v >= 0.0)) {
            throw ConfigError("select_min_index_set: probabilities must be non-negative");
        }
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) {
        throw ConfigError("select_min_index_set: probabilities sum to " + std::to_string(total));
    }

    std::vector<std::uint32_t> order(probs.size());
    std::iota(order.begin(), order.end(), std::uint32_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return probs[a] > probs[b]; });

    std::vector<std::uint32_t> chosen;
    double mass = 0.0;
    for (std::uint32_t id : order) {
        if (!chosen.empty() && (mass >= p || probs[id] == 0.0)) {
            break;
        }
        chosen.push_back(id);
        mass += probs[id];
    }
    std::ranges::sort(chosen);
    return chosen;
}

namespace {

std::vector<std::uint32_t> select_two_stage(std::span<const double> row, std::size_t k, double tau, double& threshold) {
    const std::size_t n = row.size();
    threshold = dynamic_threshold(row, k, false);
    std::vector<std::uint32_t> candidates;
    for (std::size_t j = 0; j < n; ++j) {
        if (k == n || row[j] >= threshold) {
            candidates.push_back(static_cast<std::uint32_t>(j));
        }
    }
    if (candidates.empty()) {
        const auto best = std::ranges::max_element(row);
        candidates.push_back(static_cast<std::uint32_t>(best - row.begin()));
    }
    std::vector<double> cand_scores;
    cand_scores.reserve(candidates.size());
    for (std::uint32_t j : candidates) {
        cand_scores.push_back(row[j]);
    }
    const std::vector<double> probs = softmax(cand_scores);
    std::vector<std::uint32_t> local = select_min_index_set(probs, tau);
    std::vector<std::uint32_t> out;
    out.reserve(local.size());
    for (std::uint32_t i : local) {
        out.push_back(candidates[i]);
    }
    return out;
}

}  // namespace

Q2KMap build_q2k(const BlockScores& scores, std::size_t k, KvMode mode, double tau, unsigned threads) {
    const std::size_t rows = scores.scores.rows();
    const std::size_t n = scores.scores.cols();
    if (n == 0) {
        throw InvalidShape("build_q2k: no KV blocks");
    }
    if (mode == KvMode::select_all) {
        return select_all_kv(rows, n);
    }
    if (k < 1 || k > n) {
        throw ConfigError("build_q2k: need 1 <= k <= n, got k=" + std::to_string(k) + " n=" + std::to_string(n));
    }
    if (mode == KvMode::two_stage && !(tau > 0.0 && tau <= 1.0)) {
        throw ConfigError("build_q2k: tau must lie in (0, 1], got " + std::to_string(tau));
    }

    Q2KMap map;
    map.mode = mode;
    map.k = k;
    map.n = n;
    map.tau = tau;
    map.q2k_num.resize(rows);
    map.q2k_index.resize(rows);
    map.thresholds.resize(rows);
    parallel_for(rows, threads, [&](std::size_t i) {
        auto row = scores.scores.row(i);
        std::vector<std::uint32_t> chosen;
        if (mode == KvMode::unified_prob) {
            const std::vector<double> probs = softmax(row);
            map.thresholds[i] = dynamic_threshold(probs, k, true);
            chosen = select_min_index_set(probs, map.thresholds[i]);
        } else {
            chosen = select_two_stage(row, k, tau, map.thresholds[i]);
        }
        map.q2k_num[i] = static_cast<std::uint32_t>(chosen.size());
        map.q2k_index[i] = std::move(chosen);
    });
    return map;
}

Q2KMap select_all_kv(std::size_t num_query_blocks, std::size_t n) {
    Q2KMap map;
    map.mode = KvMode::select_all;
    map.k = n;
    map.n = n;
    map.tau = 1.0;
    std::vector<std::uint32_t> all(n);
    std::iota(all.begin(), all.end(), std::uint32_t{0});
    map.q2k_num.assign(num_query_blocks, static_cast<std::uint32_t>(n));
    map.q2k_index.assign(num_query_blocks, all);
    map.thresholds.assign(num_query_blocks, 1.0);
    return map;
}

}  // namespace bsa
