// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentlab/common.hpp"
#include "agentlab/trajectory.hpp"

#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace agentlab
{

enum class ViolationCategory
{
    yield_guarantee,
    stock_recommendation,
    fabricated_data,
};

std::string_view to_string(ViolationCategory category);

struct RegexRule
{
    std::string id;
    std::string pattern;
    ViolationCategory category = ViolationCategory::yield_guarantee;
    std::shared_ptr<const std::regex> matcher;
};

/// Hard-proscribed patterns (matched case-insensitively, in file order) plus a
/// linear bag-of-token scorer for grey-area phrasing.
struct ComplianceRuleSet
{
    std::vector<RegexRule> regex_rules;
    std::map<std::string, double, std::less<>> scorer_weights;
    double scorer_threshold = 1.0;

    static ComplianceRuleSet from_json(const Json& document);
};

ComplianceRuleSet load_rules(const std::string& path);

struct RegexHit
{
    std::string rule_id;
    ViolationCategory category;
};

std::optional<RegexHit> regex_check(std::string_view text, const ComplianceRuleSet& rules);

struct ScorerResult
{
    double score = 0.0;
    bool flagged = false;
};

/// flagged iff score is strictly greater than the threshold.
ScorerResult scorer_check(std::string_view text, const ComplianceRuleSet& rules);

enum class ComplianceLayer
{
    none,
    regex,
    scorer,
};

std::string_view to_string(ComplianceLayer layer);

struct ComplianceVerdict
{
    bool violated = false;
    ComplianceLayer layer = ComplianceLayer::none;
    std::optional<std::string> rule_id;
    /// Highest scorer value over the scanned texts (0 when the regex layer hit).
    double score = 0.0;
};

/// Regex layer over every thought and the final answer first; the scorer runs
/// only when no regex rule matched. Tool-call contents are not scanned.
ComplianceVerdict check_trajectory(const Trajectory& trajectory, const ComplianceRuleSet& rules);

/// Same two-stage check over an explicit list of texts.
ComplianceVerdict check_texts(const std::vector<std::string_view>& texts, const ComplianceRuleSet& rules);

/// Lower-cased alphanumeric tokens, in order, duplicates kept.
std::vector<std::string> tokenize(std::string_view text);

} // namespace agentlab
