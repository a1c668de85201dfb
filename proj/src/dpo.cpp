// SPDX-License-Identifier: Apache-2.0
#include "agentlab/dpo.hpp"

#include "agentlab/parallel.hpp"
#include "agentlab/reward.hpp"

#include <cmath>
#include <numeric>
#include <set>

namespace agentlab
{

std::string_view to_string(PairKind kind)
{
    return kind == PairKind::compliance ? "compliance" : "helpfulness";
}

void PairConfig::validate() const
{
    if (n_min < 1 || n_max < n_min)
        throw Error("n_per_task: need 1 <= n_min <= n_max");
    if (!(temperature > 0.0))
        throw Error("pair temperature: must be positive");
    if (!(helpfulness_fraction >= 0.0 && helpfulness_fraction <= 1.0))
        throw Error("helpfulness_fraction: must lie in [0, 1]");
    if (max_pairs_per_task < 1)
        throw Error("max_pairs_per_task: must be >= 1");
}

void DpoConfig::validate() const
{
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw Error("beta: must be a positive finite number");
    if (!(lr >= 0.0) || !std::isfinite(lr))
        throw Error("dpo lr: must be a finite non-negative number");
    if (epochs < 0)
        throw Error("dpo epochs: must be >= 0");
    if (!(temperature > 0.0))
        throw Error("dpo temperature: must be positive");
}

namespace
{

struct Candidate
{
    Trajectory trajectory;
    bool clean = false;
    bool format_passed = false;
    bool refused = false;
    bool completing = false;
};

struct TaskPairs
{
    std::vector<PreferencePair> compliance;
    std::vector<PreferencePair> helpfulness;
};

TaskPairs pairs_for_task(const Policy& policy, const Task& task, const SandboxState& sandbox,
                         const ComplianceRuleSet& rules, const PairConfig& cfg)
{
    auto const task_seed = mix_seed(cfg.seed ^ fnv1a(task.task_id));
    auto rng = Rng(task_seed);
    auto const n = cfg.n_min + static_cast<int>(rng.below(static_cast<std::size_t>(cfg.n_max - cfg.n_min + 1)));

    auto seen = std::set<std::string> {};
    auto candidates = std::vector<Candidate> {};
    for (int j = 0; j < n; ++j)
    {
        auto episode = EpisodeConfig { cfg.max_rounds, cfg.temperature, task_seed + static_cast<std::uint64_t>(j), false };
        auto trajectory = run_episode(policy, task, sandbox, episode);
        if (!seen.insert(serialize_trajectory(trajectory)).second)
            continue;
        auto c = Candidate {};
        c.format_passed = check_format(trajectory, *sandbox.registry).passed;
        c.clean = !check_trajectory(trajectory, rules).violated;
        c.refused = trajectory.final_answer && is_refusal(*trajectory.final_answer);
        auto const sub = compute_subscores(trajectory, task.oracle, *sandbox.registry);
        c.completing = c.format_passed && c.clean && !c.refused && oracle_satisfied(trajectory, task.oracle, sub);
        c.trajectory = std::move(trajectory);
        candidates.push_back(std::move(c));
    }

    auto out = TaskPairs {};
    for (const auto& chosen: candidates)
    {
        if (!chosen.clean || !chosen.format_passed)
            continue;
        for (const auto& rejected: candidates)
            if (!rejected.clean && out.compliance.size() < cfg.max_pairs_per_task)
                out.compliance.push_back({ &task, chosen.trajectory, rejected.trajectory, PairKind::compliance });
    }
    if (task.oracle.answer_kind == AnswerKind::factual)
    {
        for (const auto& chosen: candidates)
        {
            if (!chosen.completing)
                continue;
            for (const auto& rejected: candidates)
                if (rejected.clean && rejected.refused && out.helpfulness.size() < cfg.max_pairs_per_task)
                    out.helpfulness.push_back({ &task, chosen.trajectory, rejected.trajectory, PairKind::helpfulness });
        }
    }
    return out;
}

std::vector<Decision> pair_decisions(const Trajectory& trajectory, const Task& task, const ActionSpace& space,
                                     bool answer_only)
{
    auto decisions = decode_decisions(trajectory, task, space);
    if (answer_only && !decisions.empty())
    {
        auto last = decisions.back();
        decisions.clear();
        if (space.at(last.action).type == ActionType::answer)
            decisions.push_back(std::move(last));
    }
    return decisions;
}

double log_ratio(const Policy& policy, const ReferencePolicy& reference, const std::vector<Decision>& d, double t)
{
    return logprob_decisions(policy, d, t) - logprob_decisions(reference.policy(), d, t);
}

} // namespace

PairSet generate_pairs(const Policy& policy, const TaskSet& tasks, const SandboxState& sandbox,
                       const ComplianceRuleSet& rules, const PairConfig& cfg)
{
    cfg.validate();
    auto sensitive = std::vector<const Task*> {};
    for (const auto& task: tasks)
        if (task.compliance_sensitive)
            sensitive.push_back(&task);

    auto per_task = std::vector<TaskPairs>(sensitive.size());
    parallel_for(sensitive.size(), cfg.workers,
                 [&](std::size_t i) { per_task[i] = pairs_for_task(policy, *sensitive[i], sandbox, rules, cfg); });

    auto set = PairSet {};
    for (auto& p: per_task)
    {
        if (p.compliance.empty() && p.helpfulness.empty())
            ++set.skipped_tasks;
        for (auto& pair: p.compliance)
            set.pairs.push_back(std::move(pair));
    }

    auto const compliance_count = static_cast<double>(set.pairs.size());
    auto const f = cfg.helpfulness_fraction;
    auto budget = f >= 1.0 ? static_cast<std::size_t>(-1)
                           : static_cast<std::size_t>(std::floor(f * compliance_count / (1.0 - f) + 1e-9));
    // Round-robin over tasks so the budget is spread rather than front-loaded.
    for (std::size_t round = 0; budget > 0; ++round)
    {
        auto any = false;
        for (auto& p: per_task)
        {
            if (round >= p.helpfulness.size() || budget == 0)
                continue;
            set.pairs.push_back(std::move(p.helpfulness[round]));
            --budget;
            any = true;
        }
        if (!any)
            break;
    }
    return set;
}

double dpo_loss_value(double beta, double delta)
{
    auto const x = beta * delta;
    return x > 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

DpoLoss dpo_loss(const Policy& policy, const ReferencePolicy& reference, const PreferencePair& pair, double beta,
                 double temperature, bool answer_only)
{
    const auto& space = policy.space();
    auto const chosen = pair_decisions(pair.chosen, *pair.task, space, answer_only);
    auto const rejected = pair_decisions(pair.rejected, *pair.task, space, answer_only);

    auto result = DpoLoss {};
    result.delta = log_ratio(policy, reference, chosen, temperature) - log_ratio(policy, reference, rejected, temperature);
    result.loss = dpo_loss_value(beta, result.delta);

    // dL/dDelta = -beta * sigmoid(-beta * Delta)
    auto const slope = -beta / (1.0 + std::exp(beta * result.delta));
    add_scaled(result.gradient, grad_logprob_decisions(policy, chosen, temperature), slope);
    add_scaled(result.gradient, grad_logprob_decisions(policy, rejected, temperature), -slope);
    return result;
}

namespace
{

DpoLogRow measure(int epoch, const Policy& policy, const ReferencePolicy& reference,
                  const std::vector<PreferencePair>& pairs, const DpoConfig& cfg)
{
    auto row = DpoLogRow { epoch, 0.0, 0.0 };
    if (pairs.empty())
        return row;
    for (const auto& pair: pairs)
    {
        auto const l = dpo_loss(policy, reference, pair, cfg.beta, cfg.temperature, cfg.answer_only);
        row.mean_loss += l.loss;
        row.mean_margin += cfg.beta * l.delta;
    }
    row.mean_loss /= static_cast<double>(pairs.size());
    row.mean_margin /= static_cast<double>(pairs.size());
    return row;
}

} // namespace

DpoResult train_dpo(const Policy& initial, const std::vector<PreferencePair>& pairs, const ReferencePolicy& reference,
                    const DpoConfig& cfg)
{
    cfg.validate();
    auto result = DpoResult { initial, {} };
    result.log.push_back(measure(0, result.policy, reference, pairs, cfg));

    auto order = std::vector<std::size_t>(pairs.size());
    auto rng = Rng(cfg.seed);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch)
    {
        std::iota(order.begin(), order.end(), std::size_t { 0 });
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
        for (auto index: order)
        {
            auto const l = dpo_loss(result.policy, reference, pairs[index], cfg.beta, cfg.temperature, cfg.answer_only);
            result.policy.apply(l.gradient, -cfg.lr);
        }
        result.log.push_back(measure(epoch, result.policy, reference, pairs, cfg));
    }
    return result;
}

double mean_delta(const Policy& policy, const ReferencePolicy& reference, const std::vector<PreferencePair>& pairs,
                  const DpoConfig& cfg)
{
    if (pairs.empty())
        return 0.0;
    auto total = 0.0;
    for (const auto& pair: pairs)
        total += dpo_loss(policy, reference, pair, cfg.beta, cfg.temperature, cfg.answer_only).delta;
    return total / static_cast<double>(pairs.size());
}

std::string dpo_log_csv(const std::vector<DpoLogRow>& log)
{
    auto out = std::string("epoch,mean_loss,mean_margin\n");
    for (const auto& r: log)
        out += std::to_string(r.epoch) + "," + format_number(r.mean_loss) + "," + format_number(r.mean_margin) + "\n";
    return out;
}

std::string serialize_pairs(const std::vector<PreferencePair>& pairs)
{
    auto out = std::string {};
    for (const auto& pair: pairs)
    {
        out += "{\"task_id\":" + Json(pair.task->task_id).dump() + ",\"chosen\":" + serialize_trajectory(pair.chosen) +
               ",\"rejected\":" + serialize_trajectory(pair.rejected) + ",\"pair_kind\":\"" +
               std::string(to_string(pair.kind)) + "\"}\n";
    }
    return out;
}

} // namespace agentlab
