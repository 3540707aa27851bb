// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#include "bsa/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bsa/errors.hpp"

namespace bsa {

void AnnealSchedule::validate() const {
    if (step_interval == 0) {
        throw ConfigError("schedule step_interval must be >= 1");
    }
    if (!(increment > 0.0)) {
        throw ConfigError("schedule increment must be positive");
    }
    if (!(cap > 0.0 && cap <= 1.0)) {
        throw ConfigError("schedule cap must lie in (0, 1]");
    }
    if (!(kv_end_fraction <= kv_start_fraction)) {
        throw ConfigError("schedule kv_end_fraction must not exceed kv_start_fraction");
    }
    if (!(r_fixed > 0.0 && r_fixed <= 1.0)) {
        throw ConfigError("schedule r_fixed must lie in (0, 1]");
    }
    if (anneal_horizon == 0) {
        throw ConfigError("schedule anneal_horizon must be >= 1");
    }
}

double sparsity_at_step(std::uint64_t step, const AnnealSchedule& schedule) {
    schedule.validate();
    const auto stage = static_cast<double>(step / schedule.step_interval);
    const double raw = std::nearbyint(schedule.increment * stage * 1e12) / 1e12;
    return std::min(schedule.cap, raw);
}

double kv_fraction_at_step(std::uint64_t step, std::uint64_t total_anneal_steps, const AnnealSchedule& schedule) {
    if (total_anneal_steps == 0) {
        throw ConfigError("kv_fraction_at_step: total_anneal_steps must be >= 1");
    }
    const double progress =
        std::min(1.0, static_cast<double>(step) / static_cast<double>(total_anneal_steps));
    const double fraction =
        schedule.kv_start_fraction + (schedule.kv_end_fraction - schedule.kv_start_fraction) * progress;
    return std::max(schedule.kv_end_fraction, fraction);
}

SparsityKnobs knobs_for_sparsity(double s_target, double r_fixed) {
    if (!(s_target >= 0.0 && s_target < 1.0)) {
        throw ConfigError("target sparsity must lie in [0, 1)");
    }
    if (!(r_fixed > 0.0 && r_fixed <= 1.0)) {
        throw ConfigError("r_fixed must lie in (0, 1]");
    }
    const double keep = 1.0 - s_target;
    const double kv_keep = keep / r_fixed;
    if (kv_keep <= 1.0) {
        return {r_fixed, kv_keep};
    }
    return {keep, 1.0};
}

std::string schedule_csv(std::uint64_t steps, std::uint64_t stride, const AnnealSchedule& schedule) {
    schedule.validate();
    if (stride == 0) {
        throw ConfigError("schedule stride must be >= 1");
    }
    std::ostringstream out;
    out.precision(10);
    out << "step,sparsity,r,kv_fraction\n";
    for (std::uint64_t step = 0; step <= steps; step += stride) {
        const double s = sparsity_at_step(step, schedule);
        const SparsityKnobs knobs = knobs_for_sparsity(s, schedule.r_fixed);
        out << step << ',' << s << ',' << knobs.r << ',' << kv_fraction_at_step(step, schedule.anneal_horizon, schedule)
            << '\n';
    }
    return out.str();
}

}  // namespace bsa
