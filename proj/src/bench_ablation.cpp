// SPDX-License-Identifier: Apache-2.0
#include "agentlab/bench.hpp"

#include <map>

namespace agentlab
{

std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage)
{
    return mix_seed(mix_seed(seed) + stage);
}

namespace
{

std::string sft_key(const PipelineConfig& cfg)
{
    if (!cfg.sft)
        return "none";
    const auto& s = cfg.sft_config;
    return std::to_string(s.demos_per_task) + "/" + std::to_string(s.epochs) + "/" + format_number(s.lr) + "/" +
           format_number(s.recovery_rate);
}

std::string grpo_key(const PipelineConfig& cfg)
{
    if (!cfg.grpo)
        return sft_key(cfg) + "|none";
    const auto& g = *cfg.grpo;
    return sft_key(cfg) + "|" + std::to_string(g.K) + "/" + format_number(g.clip_epsilon) + "/" +
           format_number(g.temperature) + "/" + std::to_string(g.steps) + "/" + format_number(g.lr) + "/" +
           format_number(g.reward.lambda) + "/" + std::string(to_string(g.reward.mode)) + "/" +
           std::to_string(g.reward.eff_enabled) + std::to_string(g.reward.cpl_enabled) + "/" +
           std::to_string(g.max_rounds) + "/" + format_number(g.advantage_guard) + "/" +
           std::to_string(g.ref_refresh_interval) + "/" + std::to_string(g.inner_epochs);
}

Policy run_sft(const Bundle& bundle, const TaskSet& train, const PipelineConfig& cfg)
{
    auto policy = Policy(bundle.space);
    if (!cfg.sft)
        return policy;
    auto const demos = build_sft_corpus(train, bundle.sandbox, *bundle.space, cfg.sft_config, stage_seed(cfg.seed, 1));
    return sft_fit(policy, demos, cfg.sft_config.epochs, cfg.sft_config.lr, stage_seed(cfg.seed, 2));
}

GrpoResult run_grpo(const Bundle& bundle, const TaskSet& train, const PipelineConfig& cfg, const Policy& start,
                    const std::set<std::string>& hard_pool)
{
    if (!cfg.grpo)
        return { start, {} };
    auto g = *cfg.grpo;
    g.seed = stage_seed(cfg.seed, 3);
    g.workers = cfg.workers;
    return train_grpo(start, train, bundle.sandbox, bundle.rules, g, hard_pool);
}

void run_dpo(const Bundle& bundle, const TaskSet& train, const PipelineConfig& cfg, PipelineResult& result)
{
    if (!cfg.dpo)
        return;
    auto pair_cfg = cfg.pairs;
    pair_cfg.seed = stage_seed(cfg.seed, 4);
    pair_cfg.workers = cfg.workers;
    auto pairs = generate_pairs(result.policy, train, bundle.sandbox, bundle.rules, pair_cfg);
    auto d = *cfg.dpo;
    d.seed = stage_seed(cfg.seed, 5);
    auto const reference = ReferencePolicy(result.policy);
    auto trained = train_dpo(result.policy, pairs.pairs, reference, d);
    result.policy = std::move(trained.policy);
    result.dpo_log = std::move(trained.log);
    result.pairs = std::move(pairs.pairs);
    result.pair_skips = pairs.skipped_tasks;
}

} // namespace

PipelineResult run_pipeline(const Bundle& bundle, const TaskSet& train, const PipelineConfig& cfg,
                            const std::set<std::string>& hard_pool)
{
    cfg.sft_config.validate();
    auto grpo = run_grpo(bundle, train, cfg, run_sft(bundle, train, cfg), hard_pool);
    auto result = PipelineResult { std::move(grpo.policy), std::move(grpo.log), {}, {}, 0 };
    run_dpo(bundle, train, cfg, result);
    return result;
}

std::vector<AblationConfig> standard_suite(const GrpoConfig& grpo, const DpoConfig& dpo, const SftConfig& sft,
                                         const PairConfig& pairs)
{
    auto base = PipelineConfig {};
    base.sft_config = sft;
    base.pairs = pairs;

    auto with_grpo = [&](auto edit) {
        auto c = base;
        auto g = grpo;
        edit(g.reward);
        c.grpo = g;
        return c;
    };

    auto none = base;
    none.sft = false;
    auto sft_only = base;
    auto full = with_grpo([](RewardConfig& r) { r.mode = CompositionMode::multiplicative; });
    full.dpo = dpo;

    return {
        { "base", none },
        { "sft", sft_only },
        { "grpo_multiplicative", with_grpo([](RewardConfig& r) { r.mode = CompositionMode::multiplicative; }) },
        { "grpo_no_eff",
          with_grpo([](RewardConfig& r) {
              r.mode = CompositionMode::multiplicative;
              r.eff_enabled = false;
          }) },
        { "grpo_no_cpl",
          with_grpo([](RewardConfig& r) {
              r.mode = CompositionMode::multiplicative;
              r.cpl_enabled = false;
          }) },
        { "grpo_additive", with_grpo([](RewardConfig& r) { r.mode = CompositionMode::additive; }) },
        { "grpo_coarse", with_grpo([](RewardConfig& r) { r.mode = CompositionMode::coarse_binary; }) },
        { "full_pipeline", full },
    };
}

std::vector<AblationRow> run_ablation(const std::vector<AblationConfig>& configs, const Bundle& bundle,
                                      std::uint64_t seed, std::size_t workers)
{
    auto const split = split_tasks(bundle.tasks);
    auto sft_cache = std::map<std::string, Policy> {};
    auto grpo_cache = std::map<std::string, GrpoResult> {};

    auto refusal_tasks = TaskSet {};
    for (const auto& t: split.held_out)
        if (t.oracle.answer_kind == AnswerKind::refusal)
            refusal_tasks.push_back(t);

    auto rows = std::vector<AblationRow> {};
    for (const auto& config: configs)
    {
        auto cfg = config.pipeline;
        cfg.seed = seed;
        cfg.workers = workers;
        cfg.sft_config.validate();

        auto sk = sft_key(cfg);
        if (sft_cache.count(sk) == 0)
            sft_cache.emplace(sk, run_sft(bundle, split.train, cfg));
        auto gk = grpo_key(cfg);
        if (grpo_cache.count(gk) == 0)
            grpo_cache.emplace(gk, run_grpo(bundle, split.train, cfg, sft_cache.at(sk), {}));
        const auto& grpo = grpo_cache.at(gk);

        auto result = PipelineResult { grpo.policy, grpo.log, {}, {}, 0 };
        run_dpo(bundle, split.train, cfg, result);

        auto const eval = evaluate_detailed(result.policy, split.held_out, bundle.sandbox, bundle.rules, workers);
        auto row = AblationRow {};
        row.label = config.label;
        row.metrics = eval.metrics;
        row.over_refusal = eval.over_refusal;
        row.vr_refusal_tasks = evaluate(result.policy, refusal_tasks, bundle.sandbox, bundle.rules, workers).vr;
        row.grpo_log = result.grpo_log;
        row.dpo_log = result.dpo_log;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows)
{
    auto out = std::string("label,tcr,tier,air,crr,vr,n,over_refusal,vr_refusal_tasks\n");
    for (const auto& r: rows)
        out += r.label + "," + metrics_csv_row(r.metrics) + "," + format_number(r.over_refusal) + "," +
               format_number(r.vr_refusal_tasks) + "\n";
    return out;
}

} // namespace agentlab
