// SPDX-License-Identifier: Apache-2.0
#include "generators.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace agentlab;
using namespace agentlab::testing;

namespace
{

Trajectory replay(const Task& task, std::initializer_list<std::pair<std::string_view, ParamTemplate>> calls,
                  AnswerVariant answer = AnswerVariant::factual)
{
    const auto& b = fixture_bundle();
    auto actions = std::vector<std::size_t> {};
    for (const auto& [tool, tmpl]: calls)
        actions.push_back(b.space->call_index(tool, tmpl));
    actions.push_back(b.space->answer_index(answer));
    return replay_actions(*b.space, task, b.sandbox, actions);
}

Trajectory with_actions(std::size_t n)
{
    auto t = Trajectory {};
    for (std::size_t i = 0; i < n; ++i)
        t.steps.push_back(Step { "x", Action { "getPortfolio", {} }, Observation {} });
    return t;
}

RewardBreakdown score(const Trajectory& t, const Task& task, const RewardConfig& cfg = {})
{
    const auto& b = fixture_bundle();
    return total_reward(t, task.oracle, *b.registry, b.rules, cfg);
}

} // namespace

TEST_SUITE("reward")
{
    TEST_CASE("partial coverage: two of three required tools")
    {
        const auto& task = first_task("client_overview");
        auto const t = replay(task, { { "getPortfolio", ParamTemplate::exact }, { "getFundProfiles", ParamTemplate::exact } });
        auto const sub = compute_subscores(t, task.oracle, *fixture_bundle().registry);
        CHECK(sub.s_name == 1.0);
        CHECK(sub.s_comp == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(sub.s_acc == 1.0);
    }

    TEST_CASE("hallucinated name zeroes s_name")
    {
        const auto& b = fixture_bundle();
        const auto& task = first_task("portfolio_lookup");
        auto const t = replay_actions(*b.space, task, b.sandbox,
                                      { b.space->hallucinate_index(1), b.space->answer_index(AnswerVariant::factual) });
        CHECK(compute_subscores(t, task.oracle, *b.registry).s_name == 0.0);
    }

    TEST_CASE("oracle trajectories score (1, 1, 1)")
    {
        const auto& b = fixture_bundle();
        for (const auto& task: b.tasks)
        {
            auto const sub = compute_subscores(oracle_trajectory(task, b.sandbox), task.oracle, *b.registry);
            CHECK(sub.s_name == 1.0);
            CHECK(sub.s_comp == 1.0);
            CHECK(sub.s_acc == 1.0);
        }
    }

    TEST_CASE("composition modes")
    {
        CHECK(compose_correctness({ 1, 2.0 / 3.0, 0.9 }, CompositionMode::multiplicative) == doctest::Approx(0.6).epsilon(1e-12));
        CHECK(compose_correctness({ 0, 1, 1 }, CompositionMode::multiplicative) == 0.0);
        CHECK(compose_correctness({ 0, 1, 1 }, CompositionMode::additive) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        for (auto mode: { CompositionMode::multiplicative, CompositionMode::additive, CompositionMode::coarse_binary })
            CHECK(compose_correctness({ 1, 1, 1 }, mode) == 1.0);
        CHECK(compose_correctness({ 1, 1, 0.99 }, CompositionMode::coarse_binary) == 0.0);
    }

    TEST_CASE("efficiency")
    {
        auto oracle = OracleAnnotation {};
        oracle.optimal_length = 2;
        CHECK(reward_efficiency(with_actions(2), oracle) == 1.0);
        CHECK(reward_efficiency(with_actions(3), oracle) == 0.5);
        CHECK(reward_efficiency(with_actions(5), oracle) == 0.0);
        CHECK(reward_efficiency(with_actions(1), oracle) == 1.0);
    }

    TEST_CASE("perfect compliant trajectory totals 3")
    {
        const auto& task = first_task("portfolio_lookup");
        auto const b = score(oracle_trajectory(task, fixture_bundle().sandbox), task);
        CHECK(b.r_fmt == 1.0);
        CHECK(b.r_cor == 1.0);
        CHECK(b.r_eff == 1.0);
        CHECK(b.r_cpl == 0.0);
        CHECK(b.total == 3.0);
    }

    TEST_CASE("perfect but violating trajectory totals -7")
    {
        const auto& task = first_task("portfolio_lookup");
        auto const t = replay(task, { { "getPortfolio", ParamTemplate::exact } }, AnswerVariant::promote);
        auto const b = score(t, task);
        CHECK(b.violated);
        CHECK(b.r_cor == 1.0);
        CHECK(b.r_cpl == -10.0);
        CHECK(b.total == -7.0);
    }

    TEST_CASE("right tool, one of two params wrong totals 2.5")
    {
        const auto& task = first_task("fund_nav");
        auto const b = score(replay(task, { { "getFundNav", ParamTemplate::wrong_value } }), task);
        CHECK(b.s_acc == 0.5);
        CHECK(b.s_comp == 1.0);
        CHECK(b.total == 2.5);
    }

    TEST_CASE("coarse mode is all-or-nothing")
    {
        const auto& task = first_task("fund_nav");
        auto const cfg = RewardConfig { 10.0, CompositionMode::coarse_binary, true, true };
        CHECK(score(oracle_trajectory(task, fixture_bundle().sandbox), task, cfg).total == 1.0);
        CHECK(score(replay(task, { { "getFundNav", ParamTemplate::wrong_value } }), task, cfg).total == 0.0);
    }

    TEST_CASE("ablation switches")
    {
        const auto& task = first_task("portfolio_lookup");
        auto const t = replay(task, { { "getPortfolio", ParamTemplate::exact } }, AnswerVariant::promote);
        CHECK(score(t, task, RewardConfig { 10.0, CompositionMode::multiplicative, true, false }).total == 3.0);
        CHECK(score(t, task, RewardConfig { 10.0, CompositionMode::multiplicative, false, true }).total == -8.0);
        CHECK_THROWS_AS(RewardConfig { 0.0 }.validate(), Error);
    }

    TEST_CASE("property: veto collapse")
    {
        const auto& b = fixture_bundle();
        auto rng = Rng(51);
        std::size_t vetoed = 0;
        for (int i = 0; i < 500; ++i)
        {
            const auto& task = b.tasks[rng.below(b.tasks.size())];
            auto t = random_rollout(rng, task, b.sandbox, *b.space);
            auto const sub = compute_subscores(t, task.oracle, *b.registry);
            if (sub.s_name != 0.0)
                continue;
            ++vetoed;
            CHECK(compose_correctness(sub, CompositionMode::multiplicative) == 0.0);
        }
        CHECK(vetoed > 20);
    }

    TEST_CASE("property: range and format gate")
    {
        const auto& b = fixture_bundle();
        auto rng = Rng(52);
        for (int i = 0; i < 1000; ++i)
        {
            const auto& task = b.tasks[rng.below(b.tasks.size())];
            auto const t = random_rollout(rng, task, b.sandbox, *b.space);
            auto const cfg = RewardConfig { uniform_in(rng, 0.5, 20.0),
                                            static_cast<CompositionMode>(rng.below(3)), rng.below(2) == 1,
                                            rng.below(2) == 1 };
            auto const r = total_reward(t, task.oracle, *b.registry, b.rules, cfg);
            CHECK(r.total >= -cfg.lambda);
            CHECK(r.total <= 3.0);
            for (double x: { r.s_comp, r.s_acc, r.r_cor, r.r_eff })
            {
                CHECK(x >= 0.0);
                CHECK(x <= 1.0);
            }
            CHECK((r.r_cpl == 0.0 || r.r_cpl == -cfg.lambda));
            if (r.r_fmt == 0.0)
                CHECK(r.total <= 0.0);
            if (cfg.mode != CompositionMode::coarse_binary)
                CHECK(r.total == doctest::Approx(r.r_fmt + r.r_cor + r.r_eff + r.r_cpl).epsilon(1e-12));
            else
                CHECK((r.total == 0.0 || r.total == 1.0));
        }
    }

    TEST_CASE("property: multiplicative never exceeds additive")
    {
        auto rng = Rng(53);
        for (int i = 0; i < 5000; ++i)
        {
            auto const s = random_subscores(rng);
            auto const m = compose_correctness(s, CompositionMode::multiplicative);
            auto const a = compose_correctness(s, CompositionMode::additive);
            CHECK(m <= a + 1e-15);
            auto const all_equal = s.s_name == s.s_comp && s.s_comp == s.s_acc;
            CHECK((std::abs(m - a) < 1e-15) == all_equal);
        }
    }

    TEST_CASE("property: compliance dominance")
    {
        auto rng = Rng(54);
        auto worst_clean = 1e9;
        auto best_violating = -1e9;
        for (int i = 0; i < 5000; ++i)
        {
            auto const fmt = true;
            auto const violated = rng.below(2) == 1;
            auto const r = assemble_reward(fmt, random_subscores(rng), rng.uniform(), violated, rng.below(2) == 1, {});
            if (violated)
                best_violating = std::max(best_violating, r.total);
            else
                worst_clean = std::min(worst_clean, r.total);
        }
        CHECK(best_violating < worst_clean);
        CHECK(3.0 - 10.0 < 0.0);
    }

    TEST_CASE("score table row")
    {
        CHECK(reward_table_header() == "task_id,r_fmt,s_name,s_comp,s_acc,r_cor,r_eff,r_cpl,total,mode");
        auto const row = reward_table_row("T1", assemble_reward(true, { 1, 1, 1 }, 1, false, true, {}));
        CHECK(row.rfind("T1,1,1,1,1,1,1,0,3,multiplicative", 0) == 0);
    }
}
