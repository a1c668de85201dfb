// SPDX-License-Identifier: Apache-2.0
#include "agentlab/grpo.hpp"

#include "agentlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace agentlab
{

std::vector<double> GroupSample::rewards() const
{
    auto out = std::vector<double> {};
    out.reserve(members.size());
    for (const auto& m: members)
        out.push_back(m.reward.total);
    return out;
}

void GrpoConfig::validate() const
{
    if (K < 2)
        throw Error("K: must be >= 2");
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0))
        throw Error("clip_epsilon: must lie in (0, 1)");
    if (!(temperature > 0.0))
        throw Error("temperature: must be positive");
    if (steps < 0)
        throw Error("steps: must be >= 0");
    if (!(lr >= 0.0) || !std::isfinite(lr))
        throw Error("lr: must be a finite non-negative number");
    if (max_rounds < 1)
        throw Error("max_rounds: must be >= 1");
    if (!(advantage_guard > 0.0))
        throw Error("advantage_guard: must be positive");
    if (ref_refresh_interval < 0)
        throw Error("ref_refresh_interval: must be >= 0");
    if (inner_epochs < 1)
        throw Error("inner_epochs: must be >= 1");
    reward.validate();
}

GroupSample sample_group(const Policy& policy, const Task& task, const SandboxState& sandbox,
                         const ComplianceRuleSet& rules, const GrpoConfig& cfg, std::uint64_t seed)
{
    auto group = GroupSample { &task, std::vector<GroupMember>(cfg.K) };
    parallel_for(cfg.K, cfg.workers, [&](std::size_t i) {
        auto episode = EpisodeConfig { cfg.max_rounds, cfg.temperature, seed + i, false };
        auto& member = group.members[i];
        member.trajectory = run_episode(policy, task, sandbox, episode);
        member.reward = total_reward(member.trajectory, task.oracle, *sandbox.registry, rules, cfg.reward);
    });
    return group;
}

AdvantageSet group_advantages(const std::vector<double>& rewards, double guard)
{
    auto set = AdvantageSet {};
    set.epsilon_guard = guard;
    if (rewards.empty())
        return set;
    auto const k = static_cast<double>(rewards.size());
    set.mu = std::accumulate(rewards.begin(), rewards.end(), 0.0) / k;
    auto var = 0.0;
    for (auto r: rewards)
        var += (r - set.mu) * (r - set.mu);
    set.sigma = std::sqrt(var / k);
    set.advantages.reserve(rewards.size());
    for (auto r: rewards)
        set.advantages.push_back((r - set.mu) / (set.sigma + guard));
    return set;
}

GrpoLoss grpo_loss(const Policy& policy, const ReferencePolicy& reference, const GroupSample& group,
                   const AdvantageSet& advantages, double clip_epsilon, double temperature)
{
    auto result = GrpoLoss {};
    auto const k = static_cast<double>(group.members.size());
    result.ratios.assign(group.members.size(), 1.0);
    for (std::size_t i = 0; i < group.members.size(); ++i)
    {
        auto const decisions = decode_decisions(group.members[i].trajectory, *group.task, policy.space());
        auto const diff = logprob_decisions(policy, decisions, temperature) -
                          logprob_decisions(reference.policy(), decisions, temperature);
        if (!(std::abs(diff) <= 50.0))
        {
            ++result.skipped;
            continue;
        }
        auto const r = std::exp(diff);
        auto const a = advantages.advantages[i];
        auto const clipped = std::clamp(r, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
        result.ratios[i] = r;
        result.loss -= std::min(r * a, clipped * a) / k;

        auto const binding = (a > 0.0 && r > 1.0 + clip_epsilon) || (a < 0.0 && r < 1.0 - clip_epsilon);
        if (binding || a == 0.0)
            continue;
        add_scaled(result.gradient, grad_logprob_decisions(policy, decisions, temperature), -a * r / k);
    }
    return result;
}

namespace
{

// Hard-pool tasks appear twice per epoch.
std::vector<std::size_t> epoch_order(const TaskSet& tasks, const std::set<std::string>& hard_pool, Rng& rng)
{
    auto order = std::vector<std::size_t> {};
    for (std::size_t i = 0; i < tasks.size(); ++i)
    {
        order.push_back(i);
        if (hard_pool.count(tasks[i].task_id) > 0)
            order.push_back(i);
    }
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

} // namespace

GrpoResult train_grpo(const Policy& initial, const TaskSet& tasks, const SandboxState& sandbox,
                      const ComplianceRuleSet& rules, const GrpoConfig& cfg, const std::set<std::string>& hard_pool)
{
    cfg.validate();
    if (tasks.empty())
        throw Error("train_grpo: empty task set");

    auto result = GrpoResult { initial, {} };
    auto& policy = result.policy;
    auto reference = ReferencePolicy(initial);

    auto rng = Rng(cfg.seed);
    auto order = std::vector<std::size_t> {};
    std::size_t cursor = 0;
    for (int step = 0; step < cfg.steps; ++step)
    {
        if (cfg.ref_refresh_interval > 0 && step > 0 && step % cfg.ref_refresh_interval == 0)
            reference = ReferencePolicy(policy);

        if (cursor == order.size())
        {
            order = epoch_order(tasks, hard_pool, rng);
            cursor = 0;
        }
        const auto& task = tasks[order[cursor++]];
        auto const group_seed = mix_seed(cfg.seed ^ (0x51ed2701ULL * static_cast<std::uint64_t>(step + 1)));
        auto const group = sample_group(policy, task, sandbox, rules, cfg, group_seed);
        auto const advantages = group_advantages(group.rewards(), cfg.advantage_guard);

        auto row = GrpoLogRow {};
        row.step = step;
        row.task_id = task.task_id;
        row.mu = advantages.mu;
        row.sigma = advantages.sigma;
        for (const auto& m: group.members)
        {
            row.frac_cor_positive += m.reward.r_cor > 0.0 ? 1.0 : 0.0;
            row.cpl_trigger_rate += m.reward.violated ? 1.0 : 0.0;
        }
        row.frac_cor_positive /= static_cast<double>(cfg.K);
        row.cpl_trigger_rate /= static_cast<double>(cfg.K);

        for (int epoch = 0; epoch < cfg.inner_epochs; ++epoch)
        {
            auto loss = grpo_loss(policy, reference, group, advantages, cfg.clip_epsilon, cfg.temperature);
            if (epoch == 0)
            {
                row.loss = loss.loss;
                row.skip_count = loss.skipped;
            }
            policy.apply(loss.gradient, -cfg.lr);
        }
        result.log.push_back(std::move(row));
    }
    return result;
}

std::string grpo_log_csv(const std::vector<GrpoLogRow>& log)
{
    auto out = std::string("step,task_id,mu,sigma,frac_cor_positive,cpl_trigger_rate,loss,skip_count\n");
    for (const auto& r: log)
    {
        out += std::to_string(r.step) + "," + r.task_id + "," + format_number(r.mu) + "," + format_number(r.sigma) + "," +
               format_number(r.frac_cor_positive) + "," + format_number(r.cpl_trigger_rate) + "," +
               format_number(r.loss) + "," + std::to_string(r.skip_count) + "\n";
    }
    return out;
}

} // namespace agentlab
