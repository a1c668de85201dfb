// SPDX-License-Identifier: Apache-2.0
#include "agentlab/compliance.hpp"

#include <cctype>
#include <cmath>
#include <utility>

namespace agentlab
{

std::string_view to_string(ViolationCategory category)
{
    switch (category)
    {
        case ViolationCategory::yield_guarantee: return "yield_guarantee";
        case ViolationCategory::stock_recommendation: return "stock_recommendation";
        case ViolationCategory::fabricated_data: return "fabricated_data";
    }
    return "yield_guarantee";
}

std::string_view to_string(ComplianceLayer layer)
{
    switch (layer)
    {
        case ComplianceLayer::none: return "none";
        case ComplianceLayer::regex: return "regex";
        case ComplianceLayer::scorer: return "scorer";
    }
    return "none";
}

ComplianceRuleSet ComplianceRuleSet::from_json(const Json& document)
{
    auto rules = ComplianceRuleSet {};
    try
    {
        for (const auto& r: document.at("regex_rules"))
        {
            auto rule = RegexRule {};
            rule.id = r.at("id").get<std::string>();
            rule.pattern = r.at("pattern").get<std::string>();
            auto const category = r.at("category").get<std::string>();
            if (category == "yield_guarantee")
                rule.category = ViolationCategory::yield_guarantee;
            else if (category == "stock_recommendation")
                rule.category = ViolationCategory::stock_recommendation;
            else if (category == "fabricated_data")
                rule.category = ViolationCategory::fabricated_data;
            else
                throw Error("rules: rule '" + rule.id + "' has unknown category '" + category + "'");
            try
            {
                rule.matcher = std::make_shared<const std::regex>(rule.pattern, std::regex::ECMAScript | std::regex::icase);
            }
            catch (const std::regex_error&)
            {
                throw Error("rules: pattern of rule '" + rule.id + "' does not compile");
            }
            rules.regex_rules.push_back(std::move(rule));
        }
        for (const auto& [token, weight]: document.at("scorer").at("weights").items())
            rules.scorer_weights.emplace(token, weight.get<double>());
        rules.scorer_threshold = document.at("scorer").at("threshold").get<double>();
    }
    catch (const Json::exception& e)
    {
        throw Error(std::string("rules: ") + e.what());
    }
    if (!std::isfinite(rules.scorer_threshold))
        throw Error("rules: scorer threshold must be finite");
    return rules;
}

ComplianceRuleSet load_rules(const std::string& path)
{
    auto document = Json::parse(read_file(path), nullptr, false);
    if (document.is_discarded())
        throw Error("rules: " + path + " is not valid JSON");
    return ComplianceRuleSet::from_json(document);
}

std::vector<std::string> tokenize(std::string_view text)
{
    auto tokens = std::vector<std::string> {};
    auto current = std::string {};
    for (auto c: text)
    {
        auto const u = static_cast<unsigned char>(c);
        if (std::isalnum(u))
            current.push_back(static_cast<char>(std::tolower(u)));
        else if (!current.empty())
            tokens.push_back(std::exchange(current, {}));
    }
    if (!current.empty())
        tokens.push_back(std::move(current));
    return tokens;
}

std::optional<RegexHit> regex_check(std::string_view text, const ComplianceRuleSet& rules)
{
    if (text.empty())
        return std::nullopt;
    for (const auto& rule: rules.regex_rules)
        if (std::regex_search(text.begin(), text.end(), *rule.matcher))
            return RegexHit { rule.id, rule.category };
    return std::nullopt;
}

ScorerResult scorer_check(std::string_view text, const ComplianceRuleSet& rules)
{
    auto score = 0.0;
    for (const auto& token: tokenize(text))
        if (auto it = rules.scorer_weights.find(token); it != rules.scorer_weights.end())
            score += it->second;
    return { score, score > rules.scorer_threshold };
}

ComplianceVerdict check_texts(const std::vector<std::string_view>& texts, const ComplianceRuleSet& rules)
{
    for (auto text: texts)
        if (auto hit = regex_check(text, rules))
            return { true, ComplianceLayer::regex, hit->rule_id, 0.0 };

    auto verdict = ComplianceVerdict {};
    for (auto text: texts)
    {
        auto const result = scorer_check(text, rules);
        if (result.score > verdict.score)
            verdict.score = result.score;
        if (result.flagged)
        {
            verdict.violated = true;
            verdict.layer = ComplianceLayer::scorer;
        }
    }
    return verdict;
}

ComplianceVerdict check_trajectory(const Trajectory& trajectory, const ComplianceRuleSet& rules)
{
    return check_texts(response_texts(trajectory), rules);
}

} // namespace agentlab
