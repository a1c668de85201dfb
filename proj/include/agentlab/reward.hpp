// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentlab/compliance.hpp"
#include "agentlab/task.hpp"
#include "agentlab/toolspec.hpp"
#include "agentlab/trajectory.hpp"

#include <string>
#include <string_view>

namespace agentlab
{

enum class CompositionMode
{
    multiplicative,
    additive,
    coarse_binary,
};

std::string_view to_string(CompositionMode mode);
CompositionMode composition_mode_from_string(std::string_view name);

struct RewardConfig
{
    double lambda = 10.0;
    CompositionMode mode = CompositionMode::multiplicative;
    bool eff_enabled = true;
    bool cpl_enabled = true;

    /// Throws Error naming the offending field.
    void validate() const;
};

struct SubScores
{
    double s_name = 1.0;
    double s_comp = 1.0;
    double s_acc = 1.0;
};

struct RewardBreakdown
{
    double r_fmt = 0.0;
    double s_name = 0.0;
    double s_comp = 0.0;
    double s_acc = 0.0;
    double r_cor = 0.0;
    double r_eff = 0.0;
    double r_cpl = 0.0;
    double total = 0.0;
    CompositionMode mode = CompositionMode::multiplicative;
    bool violated = false;
};

/// s_name: 0 iff some Action names an unregistered tool. s_comp: coverage of
/// the required set by the invoked atomic tools, composites expanded. s_acc:
/// mean over calls to required tools of the fraction of oracle parameters
/// matched exactly; 1 when no such call was made.
SubScores compute_subscores(const Trajectory& trajectory, const OracleAnnotation& oracle, const Registry& registry);

double compose_correctness(const SubScores& sub, CompositionMode mode);

/// max(0, 1 - (|tau| - |tau*|) / |tau*|), capped at 1.
double reward_efficiency(const Trajectory& trajectory, const OracleAnnotation& oracle);

/// Final answer present, kind as annotated, full coverage, exact parameters,
/// no hallucinated name.
bool oracle_satisfied(const Trajectory& trajectory, const OracleAnnotation& oracle, const SubScores& sub);

/// Combines precomputed parts. A failed format gate zeroes r_cor and r_eff;
/// r_cpl applies regardless.
RewardBreakdown assemble_reward(bool format_passed, const SubScores& sub, double efficiency, bool violated,
                                bool satisfied, const RewardConfig& cfg);

RewardBreakdown total_reward(const Trajectory& trajectory, const OracleAnnotation& oracle, const Registry& registry,
                             const ComplianceRuleSet& rules, const RewardConfig& cfg);

/// Header and row of the batch scoring table.
std::string reward_table_header();
std::string reward_table_row(std::string_view task_id, const RewardBreakdown& b);

} // namespace agentlab
