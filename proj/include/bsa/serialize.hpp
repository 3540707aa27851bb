// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include "bsa/kvsparse.hpp"
#include "bsa/metrics.hpp"
#include "bsa/qsparse.hpp"

namespace bsa {

/// {"q2k_num": [...], "q2k_index": [[...], ...], "mode": "...", "k", "n", "tau", "thresholds"}
nlohmann::json to_json(const Q2KMap& map);

/// Retained ids and donor pairs, for debugging dumps.
nlohmann::json to_json(const QuerySelection& sel);

/// All FlopReport fields plus the cost-model constants behind the overheads.
nlohmann::json to_json(const FlopReport& report);

}  // namespace bsa
