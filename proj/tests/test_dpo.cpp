// SPDX-License-Identifier: Apache-2.0
#include "generators.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace agentlab;
using namespace agentlab::testing;

namespace
{

struct PairCase
{
    Policy policy;
    ReferencePolicy reference;
    PreferencePair pair;
    std::vector<std::string> keys;
};

PairCase random_pair(Rng& rng)
{
    const auto& b = fixture_bundle();
    const auto& task = b.tasks[rng.below(b.tasks.size())];
    auto chosen = random_rollout(rng, task, b.sandbox, *b.space, 3);
    auto rejected = random_rollout(rng, task, b.sandbox, *b.space, 3);
    auto const dc = decode_decisions(chosen, task, *b.space);
    auto const dr = decode_decisions(rejected, task, *b.space);
    auto const ref = random_policy(rng, b.space, { dc, dr }, 1.0);
    auto live = random_policy(rng, b.space, { dc, dr }, 1.0);
    auto keys = visited_keys(dc);
    for (const auto& k: visited_keys(dr))
        if (std::find(keys.begin(), keys.end(), k) == keys.end())
            keys.push_back(k);
    return { live, ReferencePolicy(ref), PreferencePair { &task, std::move(chosen), std::move(rejected) }, keys };
}

} // namespace

TEST_SUITE("dpo")
{
    TEST_CASE("closed-form loss values")
    {
        CHECK(std::abs(dpo_loss_value(0.2, 0.0) - std::log(2.0)) < 1e-12);
        CHECK(std::abs(dpo_loss_value(0.2, 5.0) - std::log1p(std::exp(-1.0))) < 1e-9);
        CHECK(dpo_loss_value(0.2, 5.0) == doctest::Approx(0.3133).epsilon(1e-4));
        CHECK(dpo_loss_value(1.0, 800.0) == 0.0);
        CHECK(dpo_loss_value(1.0, -800.0) == doctest::Approx(800.0).epsilon(1e-12));
        auto previous = dpo_loss_value(0.2, -50.0);
        for (double d = -49.0; d <= 50.0; d += 1.0)
        {
            auto const current = dpo_loss_value(0.2, d);
            CHECK(current < previous);
            previous = current;
        }
    }

    TEST_CASE("property: loss depends only on beta times delta")
    {
        auto rng = Rng(81);
        for (int i = 0; i < 1000; ++i)
        {
            auto const beta = uniform_in(rng, 0.01, 2.0);
            auto const delta = uniform_in(rng, -30.0, 30.0);
            auto const c = std::ldexp(1.0, static_cast<int>(rng.below(9)) - 4);
            CHECK(dpo_loss_value(beta, delta) == dpo_loss_value(beta / c, c * delta));
        }
    }

    TEST_CASE("property: swapping chosen and rejected negates delta")
    {
        auto rng = Rng(82);
        for (int i = 0; i < 100; ++i)
        {
            auto c = random_pair(rng);
            auto const forward = dpo_loss(c.policy, c.reference, c.pair, 0.2);
            std::swap(c.pair.chosen, c.pair.rejected);
            auto const backward = dpo_loss(c.policy, c.reference, c.pair, 0.2);
            CHECK(backward.delta == -forward.delta);
            CHECK(forward.loss == dpo_loss_value(0.2, forward.delta));
            CHECK(backward.loss == dpo_loss_value(0.2, -forward.delta));
        }
    }

    TEST_CASE("property: loss gradient matches central differences")
    {
        auto rng = Rng(83);
        for (int i = 0; i < 60; ++i)
        {
            auto const c = random_pair(rng);
            auto const beta = uniform_in(rng, 0.05, 1.0);
            auto const answer_only = rng.below(3) == 0;
            auto const analytic = dpo_loss(c.policy, c.reference, c.pair, beta, 1.0, answer_only);
            auto const numeric = numeric_gradient(c.policy, c.keys, [&](const Policy& q) {
                return dpo_loss(q, c.reference, c.pair, beta, 1.0, answer_only).loss;
            });
            CHECK(gradient_rel_error(analytic.gradient, numeric) < 1e-6);
        }
    }

    TEST_CASE("pair construction invariants")
    {
        const auto& b = fixture_bundle();
        auto const split = split_tasks(b.tasks);
        auto const start = sft_fit(Policy(b.space), build_sft_corpus(split.train, b.sandbox, *b.space, {}, 1), 3, 0.1, 2);
        auto cfg = PairConfig {};
        cfg.seed = 9;
        auto const set = generate_pairs(start, split.train, b.sandbox, b.rules, cfg);
        REQUIRE_FALSE(set.pairs.empty());

        std::size_t helpful = 0;
        auto per_task = std::map<std::string, std::size_t> {};
        for (const auto& p: set.pairs)
        {
            CHECK(p.task->compliance_sensitive);
            CHECK_FALSE(p.chosen == p.rejected);
            CHECK(parse_trajectory(serialize_trajectory(p.chosen)).ok());
            CHECK(parse_trajectory(serialize_trajectory(p.rejected)).ok());
            CHECK_FALSE(check_trajectory(p.chosen, b.rules).violated);
            if (p.kind == PairKind::compliance)
                CHECK(check_trajectory(p.rejected, b.rules).violated);
            else
            {
                ++helpful;
                CHECK(is_refusal(*p.rejected.final_answer));
                CHECK(p.task->oracle.answer_kind == AnswerKind::factual);
            }
            ++per_task[p.task->task_id];
        }
        for (const auto& [id, n]: per_task)
            CHECK(n <= cfg.max_pairs_per_task);
        CHECK(static_cast<double>(helpful) <= cfg.helpfulness_fraction * set.pairs.size() + 1e-9);

        auto const again = generate_pairs(start, split.train, b.sandbox, b.rules, cfg);
        CHECK(serialize_pairs(again.pairs) == serialize_pairs(set.pairs));

        cfg.helpfulness_fraction = 0.0;
        for (const auto& p: generate_pairs(start, split.train, b.sandbox, b.rules, cfg).pairs)
            CHECK(p.kind == PairKind::compliance);
    }

    TEST_CASE("uniformly clean, completing candidates yield no pair")
    {
        const auto& b = fixture_bundle();
        const auto& task = first_task("client_overview");
        REQUIRE(task.compliance_sensitive);
        auto const oracle = oracle_policy(b.space, oracle_demos({ task }, b.sandbox), 60.0);
        auto const set = generate_pairs(oracle, { task }, b.sandbox, b.rules, PairConfig {});
        CHECK(set.pairs.empty());
        CHECK(set.skipped_tasks == 1);
    }

    TEST_CASE("training raises the mean margin; zero epochs is a no-op")
    {
        const auto& b = fixture_bundle();
        auto const split = split_tasks(b.tasks);
        auto const start = sft_fit(Policy(b.space), build_sft_corpus(split.train, b.sandbox, *b.space, {}, 1), 3, 0.1, 2);
        auto pair_cfg = PairConfig {};
        pair_cfg.seed = 4;
        auto const pairs = generate_pairs(start, split.train, b.sandbox, b.rules, pair_cfg).pairs;
        auto const reference = ReferencePolicy(start);
        auto cfg = DpoConfig {};
        cfg.seed = 5;
        auto const trained = train_dpo(start, pairs, reference, cfg);
        CHECK(mean_delta(trained.policy, reference, pairs, cfg) > mean_delta(start, reference, pairs, cfg));
        CHECK(trained.log.size() == static_cast<std::size_t>(cfg.epochs) + 1);
        CHECK(trained.log.back().mean_loss < trained.log.front().mean_loss);

        cfg.epochs = 0;
        CHECK(train_dpo(start, pairs, reference, cfg).policy == start);
    }

    TEST_CASE("config validation")
    {
        auto cfg = DpoConfig {};
        cfg.beta = 0.0;
        CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("beta"), Error);
        auto pairs = PairConfig {};
        pairs.helpfulness_fraction = 1.5;
        CHECK_THROWS_AS(pairs.validate(), Error);
    }
}
