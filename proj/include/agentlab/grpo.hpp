// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentlab/compliance.hpp"
#include "agentlab/policy.hpp"
#include "agentlab/reward.hpp"
#include "agentlab/sandbox.hpp"
#include "agentlab/task.hpp"

#include <set>
#include <string>
#include <vector>

namespace agentlab
{

struct GroupMember
{
    Trajectory trajectory;
    RewardBreakdown reward;
};

struct GroupSample
{
    const Task* task = nullptr;
    std::vector<GroupMember> members;

    std::vector<double> rewards() const;
};

struct AdvantageSet
{
    double mu = 0.0;
    /// Population standard deviation of the rewards.
    double sigma = 0.0;
    std::vector<double> advantages;
    double epsilon_guard = 1e-6;
};

struct GrpoConfig
{
    std::size_t K = 8;
    double clip_epsilon = 0.2;
    double temperature = 0.8;
    int steps = 700;
    double lr = 0.05;
    std::uint64_t seed = 0;
    RewardConfig reward;
    int max_rounds = 6;
    double advantage_guard = 1e-6;
    /// Steps between reference snapshots; 0 keeps the initial policy.
    int ref_refresh_interval = 10;
    /// Gradient steps taken on each sampled group.
    int inner_epochs = 1;
    std::size_t workers = 1;

    void validate() const;
};

/// K rollouts with member seeds seed + i, scored by total_reward. Members are
/// stored in index order whatever the worker count.
GroupSample sample_group(const Policy& policy, const Task& task, const SandboxState& sandbox,
                         const ComplianceRuleSet& rules, const GrpoConfig& cfg, std::uint64_t seed);

AdvantageSet group_advantages(const std::vector<double>& rewards, double guard = 1e-6);

struct GrpoLoss
{
    double loss = 0.0;
    /// Gradient of the loss (descend along its negative).
    Gradient gradient;
    std::vector<double> ratios;
    /// Members dropped because |log pi - log pi_ref| exceeded 50.
    std::size_t skipped = 0;
};

/// -(1/K) sum_i min(r_i A_i, clip(r_i, 1-eps, 1+eps) A_i) with trajectory-level
/// ratios evaluated at `temperature`.
GrpoLoss grpo_loss(const Policy& policy, const ReferencePolicy& reference, const GroupSample& group,
                   const AdvantageSet& advantages, double clip_epsilon, double temperature);

struct GrpoLogRow
{
    int step = 0;
    std::string task_id;
    double mu = 0.0;
    double sigma = 0.0;
    double frac_cor_positive = 0.0;
    double cpl_trigger_rate = 0.0;
    double loss = 0.0;
    std::size_t skip_count = 0;
};

struct GrpoResult
{
    Policy policy;
    std::vector<GrpoLogRow> log;
};

/// Tasks are visited in shuffled epochs (hard-pool tasks twice). Per step:
/// sample a group, compute advantages and take a gradient step on the
/// clipped surrogate.
GrpoResult train_grpo(const Policy& initial, const TaskSet& tasks, const SandboxState& sandbox,
                      const ComplianceRuleSet& rules, const GrpoConfig& cfg,
                      const std::set<std::string>& hard_pool = {});

std::string grpo_log_csv(const std::vector<GrpoLogRow>& log);

} // namespace agentlab
