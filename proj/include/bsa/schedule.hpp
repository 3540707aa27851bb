// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace bsa {

/// Training-time ramp from dense attention to the target sparsity.
struct AnnealSchedule {
    std::uint64_t step_interval = 30;
    double increment = 0.03;
    double cap = 0.9;
    double kv_start_fraction = 1.0;
    double kv_end_fraction = 0.1;
    double r_fixed = 0.5;
    std::uint64_t anneal_horizon = 9000;

    /// Throws ConfigError when a field is outside its domain.
    void validate() const;
};

/// min(cap, increment * floor(step / step_interval)), rounded to 12 decimals.
double sparsity_at_step(std::uint64_t step, const AnnealSchedule& schedule = {});

/// Linear from kv_start_fraction to kv_end_fraction over `total_anneal_steps`,
/// held at the end value afterwards.
double kv_fraction_at_step(std::uint64_t step, std::uint64_t total_anneal_steps, const AnnealSchedule& schedule = {});

struct SparsityKnobs {
    double r = 1.0;
    double kv_keep_fraction = 1.0;
};

/// Splits a combined target so that r stays at r_fixed and the KV keep
/// fraction absorbs the rest; falls back to query-only pruning when the KV
/// side would need to keep more than everything.
SparsityKnobs knobs_for_sparsity(double s_target, double r_fixed);

/// CSV table (step,sparsity,r,kv_fraction) for steps 0, stride, 2*stride, ... <= steps.
std::string schedule_csv(std::uint64_t steps, std::uint64_t stride, const AnnealSchedule& schedule = {});

}  // namespace bsa
