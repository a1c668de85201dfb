// SPDX-License-Identifier: Apache-2.0
#include "generators.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace agentlab;
using namespace agentlab::testing;

namespace
{

/// Greedy policy that keeps calling getPortfolio at every state it reaches.
Policy never_answers(const Task& task, const SandboxState& sandbox, std::shared_ptr<const ActionSpace> space)
{
    auto p = Policy(space);
    auto const favored = space->call_index("getPortfolio", ParamTemplate::exact);
    for (int round = 0; round < 10; ++round)
    {
        auto const t = run_episode(p, task, sandbox, EpisodeConfig { 6, 1.0, 0, true });
        for (const auto& d: decode_decisions(t, task, *space))
            p.row(d.features[0])[favored] = 50.0;
    }
    return p;
}

} // namespace

TEST_SUITE("sandbox")
{
    TEST_CASE("unknown tool returns the valid tool list")
    {
        const auto& b = fixture_bundle();
        auto const obs = execute(Action { "getClientSummary", {} }, b.sandbox);
        CHECK(obs.is_error);
        CHECK(obs.error_kind == ErrorKind::unknown_tool);
        CHECK(obs.payload["valid_tools"].get<std::vector<std::string>>() == b.registry->sorted_names());
    }

    TEST_CASE("known call returns its fixture payload")
    {
        const auto& b = fixture_bundle();
        auto const params = ParamMap { { "client_id", "C001" } };
        auto const obs = execute(Action { "getPortfolio", params }, b.sandbox);
        REQUIRE(b.sandbox.fixtures.lookup("getPortfolio", params) != nullptr);
        CHECK_FALSE(obs.is_error);
        CHECK(obs.payload == *b.sandbox.fixtures.lookup("getPortfolio", params));
    }

    TEST_CASE("schema-valid call with no fixture row is not_found, not an error")
    {
        auto const obs = execute(Action { "getPortfolio", { { "client_id", "C999" } } }, fixture_bundle().sandbox);
        CHECK_FALSE(obs.is_error);
        CHECK(obs.payload["status"] == "not_found");
    }

    TEST_CASE("fault table hit yields backend_fault")
    {
        auto state = fixture_bundle().sandbox;
        auto const params = ParamMap { { "client_id", "C001" } };
        state.fault_table.insert({ "getPortfolio", canonical_params(params) });
        auto const obs = execute(Action { "getPortfolio", params }, state);
        CHECK(obs.is_error);
        CHECK(obs.error_kind == ErrorKind::backend_fault);
        auto const via_composite = execute(Action { "GetClientOverview", params }, state);
        CHECK(via_composite.error_kind == ErrorKind::backend_fault);
    }

    TEST_CASE("schema violation is in-band")
    {
        auto const obs = execute(Action { "getPortfolio", { { "client_id", 1 } } }, fixture_bundle().sandbox);
        CHECK(obs.is_error);
        CHECK(obs.error_kind == ErrorKind::schema_violation);
    }

    TEST_CASE("oracle-greedy rollout equals the optimal trajectory")
    {
        const auto& b = fixture_bundle();
        auto const demos = oracle_demos(b.tasks, b.sandbox);
        auto const oracle = oracle_policy(b.space, demos);
        for (const auto& task: b.tasks)
        {
            auto const rollout = run_episode(oracle, task, b.sandbox, EpisodeConfig { 6, 1.0, 0, true });
            CHECK(rollout == oracle_trajectory(task, b.sandbox));
        }
    }

    TEST_CASE("property: run_episode is a pure function of its inputs")
    {
        const auto& b = fixture_bundle();
        auto rng = Rng(31);
        auto const pol = random_policy(rng, b.space, {}, 1.0);
        for (int i = 0; i < 50; ++i)
        {
            const auto& task = b.tasks[rng.below(b.tasks.size())];
            auto const cfg = EpisodeConfig { 6, uniform_in(rng, 0.3, 2.0), rng.next_u64(), false };
            CHECK(run_episode(pol, task, b.sandbox, cfg) == run_episode(pol, task, b.sandbox, cfg));
        }
    }

    TEST_CASE("round cap without an answer gives six Actions")
    {
        const auto& b = fixture_bundle();
        const auto& task = first_task("portfolio_lookup");
        auto const t = run_episode(never_answers(task, b.sandbox, b.space), task, b.sandbox, EpisodeConfig { 6, 1.0, 0, true });
        CHECK(t.tool_call_count() == 6);
        CHECK_FALSE(t.final_answer.has_value());
    }

    TEST_CASE("recovery from a hallucinated name runs to completion")
    {
        const auto& b = fixture_bundle();
        const auto& task = first_task("portfolio_lookup");
        auto const t = replay_actions(*b.space, task, b.sandbox,
                                      { b.space->hallucinate_index(0),
                                        b.space->call_index("getPortfolio", ParamTemplate::exact),
                                        b.space->answer_index(AnswerVariant::factual) });
        REQUIRE(t.steps.size() >= 2);
        CHECK(t.steps[0].observation->error_kind == ErrorKind::unknown_tool);
        CHECK_FALSE(t.steps[1].observation->is_error);
        CHECK(t.final_answer == task.facts);
        auto const sub = compute_subscores(t, task.oracle, *b.registry);
        CHECK(sub.s_name == 0.0);
        CHECK(sub.s_comp == 1.0);
        CHECK(sub.s_acc == 1.0);
    }

    TEST_CASE("fixture coverage is complete")
    {
        CHECK_NOTHROW(check_fixture_coverage(fixture_bundle().sandbox));
    }
}
