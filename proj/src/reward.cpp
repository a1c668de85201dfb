// SPDX-License-Identifier: Apache-2.0
#include "agentlab/reward.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace agentlab
{

std::string_view to_string(CompositionMode mode)
{
    switch (mode)
    {
        case CompositionMode::multiplicative: return "multiplicative";
        case CompositionMode::additive: return "additive";
        case CompositionMode::coarse_binary: return "coarse_binary";
    }
    return "multiplicative";
}

CompositionMode composition_mode_from_string(std::string_view name)
{
    for (auto m: { CompositionMode::multiplicative, CompositionMode::additive, CompositionMode::coarse_binary })
        if (to_string(m) == name)
            return m;
    throw Error("mode: unknown composition mode '" + std::string(name) + "'");
}

void RewardConfig::validate() const
{
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw Error("lambda: must be a positive finite number");
}

SubScores compute_subscores(const Trajectory& trajectory, const OracleAnnotation& oracle, const Registry& registry)
{
    auto sub = SubScores {};
    auto invoked = std::set<std::string> {};
    auto accuracy_sum = 0.0;
    auto required_calls = 0;

    for (const auto& step: trajectory.steps)
    {
        if (!step.action)
            continue;
        if (!registry.contains(step.action->tool_name))
        {
            sub.s_name = 0.0;
            continue;
        }
        for (const auto& call: atomic_calls(*step.action, registry))
        {
            invoked.insert(call.tool_name);
            if (oracle.required_tools.count(call.tool_name) == 0)
                continue;
            ++required_calls;
            auto truth = oracle.param_truth.find(call.tool_name);
            if (truth == oracle.param_truth.end() || truth->second.empty())
            {
                accuracy_sum += 1.0;
                continue;
            }
            auto matched = 0;
            for (const auto& [param, value]: truth->second)
                if (auto it = call.params.find(param); it != call.params.end() && it->second == value)
                    ++matched;
            accuracy_sum += static_cast<double>(matched) / static_cast<double>(truth->second.size());
        }
    }

    if (!oracle.required_tools.empty())
    {
        auto covered = std::count_if(oracle.required_tools.begin(), oracle.required_tools.end(),
                                     [&](const auto& name) { return invoked.count(name) > 0; });
        sub.s_comp = static_cast<double>(covered) / static_cast<double>(oracle.required_tools.size());
    }
    sub.s_acc = required_calls == 0 ? 1.0 : accuracy_sum / required_calls;
    return sub;
}

double compose_correctness(const SubScores& sub, CompositionMode mode)
{
    switch (mode)
    {
        case CompositionMode::multiplicative: return sub.s_name * sub.s_comp * sub.s_acc;
        case CompositionMode::additive: return (sub.s_name + sub.s_comp + sub.s_acc) / 3.0;
        case CompositionMode::coarse_binary:
            return sub.s_name == 1.0 && sub.s_comp == 1.0 && sub.s_acc == 1.0 ? 1.0 : 0.0;
    }
    return 0.0;
}

double reward_efficiency(const Trajectory& trajectory, const OracleAnnotation& oracle)
{
    auto const optimal = static_cast<double>(oracle.optimal_length);
    auto const actual = static_cast<double>(trajectory.tool_call_count());
    return std::clamp(1.0 - (actual - optimal) / optimal, 0.0, 1.0);
}

bool oracle_satisfied(const Trajectory& trajectory, const OracleAnnotation& oracle, const SubScores& sub)
{
    if (!trajectory.final_answer)
        return false;
    auto const refused = is_refusal(*trajectory.final_answer);
    if (refused != (oracle.answer_kind == AnswerKind::refusal))
        return false;
    return sub.s_name == 1.0 && sub.s_comp == 1.0 && sub.s_acc == 1.0;
}

RewardBreakdown assemble_reward(bool format_passed, const SubScores& sub, double efficiency, bool violated,
                                bool satisfied, const RewardConfig& cfg)
{
    auto b = RewardBreakdown {};
    b.mode = cfg.mode;
    b.violated = violated;
    b.r_fmt = format_passed ? 1.0 : 0.0;
    b.s_name = sub.s_name;
    b.s_comp = sub.s_comp;
    b.s_acc = sub.s_acc;
    b.r_cor = format_passed ? compose_correctness(sub, cfg.mode) : 0.0;

    if (cfg.mode == CompositionMode::coarse_binary)
    {
        b.total = format_passed && satisfied && !violated ? 1.0 : 0.0;
        return b;
    }
    b.r_eff = format_passed && cfg.eff_enabled ? efficiency : 0.0;
    b.r_cpl = violated && cfg.cpl_enabled ? -cfg.lambda : 0.0;
    b.total = b.r_fmt + b.r_cor + b.r_eff + b.r_cpl;
    return b;
}

RewardBreakdown total_reward(const Trajectory& trajectory, const OracleAnnotation& oracle, const Registry& registry,
                             const ComplianceRuleSet& rules, const RewardConfig& cfg)
{
    auto const format = check_format(trajectory, registry);
    auto const sub = compute_subscores(trajectory, oracle, registry);
    auto const verdict = check_trajectory(trajectory, rules);
    return assemble_reward(format.passed, sub, reward_efficiency(trajectory, oracle), verdict.violated,
                           oracle_satisfied(trajectory, oracle, sub), cfg);
}

std::string reward_table_header()
{
    return "task_id,r_fmt,s_name,s_comp,s_acc,r_cor,r_eff,r_cpl,total,mode";
}

std::string reward_table_row(std::string_view task_id, const RewardBreakdown& b)
{
    auto row = std::string(task_id);
    for (auto v: { b.r_fmt, b.s_name, b.s_comp, b.s_acc, b.r_cor, b.r_eff, b.r_cpl, b.total })
        row += "," + format_number(v);
    row += ",";
    row += to_string(b.mode);
    return row;
}

} // namespace agentlab
