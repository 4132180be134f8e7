// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <string>

#include "memo/verify.hpp"

namespace memo {
namespace {

TEST(Verify, AllPropertiesPass) {
    VerifyOptions opts;
    opts.cases = 40;
    const auto report = run_verify(opts);
    EXPECT_EQ(report.results.size(), property_names().size());
    for (const auto& r : report.results) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
    EXPECT_TRUE(report.all_passed());
}

TEST(Verify, FilterSelectsBySubstring) {
    VerifyOptions opts;
    opts.filter = "pipeline.";
    opts.cases = 10;
    const auto report = run_verify(opts);
    ASSERT_FALSE(report.results.empty());
    for (const auto& r : report.results) EXPECT_NE(r.name.find("pipeline."), std::string::npos);
}

TEST(Verify, ReportWithoutTimingIsReproducible) {
    VerifyOptions opts;
    opts.filter = "memory";
    opts.cases = 20;
    EXPECT_EQ(run_verify(opts).to_json(false), run_verify(opts).to_json(false));
}

}  // namespace
}  // namespace memo
