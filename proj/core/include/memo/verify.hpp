// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

// Self-check suite: randomized properties of every module, each compared
// against a brute-force oracle or an exact identity.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace memo {

struct PropertyResult {
    std::string name;
    bool passed = false;
    double max_error = 0.0;
    double tolerance = 0.0;
    std::size_t cases_run = 0;
    double wall_time_s = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::vector<PropertyResult> results;

    bool all_passed() const noexcept;
    /// `with_timing` = false drops the wall-time fields so reports can be diffed.
    nlohmann::ordered_json to_json(bool with_timing = true) const;
};

struct VerifyOptions {
    /// Runs only properties whose name contains this substring.
    std::string filter;
    std::uint64_t seed = 2024;
    std::size_t cases = 200;
};

std::vector<std::string> property_names();
VerifyReport run_verify(const VerifyOptions& options);

}  // namespace memo
