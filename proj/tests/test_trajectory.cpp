// SPDX-License-Identifier: Apache-2.0
#include "generators.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace agentlab;
using namespace agentlab::testing;

namespace
{

Trajectory portfolio_trajectory()
{
    auto t = Trajectory {};
    t.task_id = "T0001";
    t.steps.push_back(Step { "Look up the holdings.", Action { "getPortfolio", { { "client_id", "C001" } } },
                             Observation { { { "client_id", "C001" } }, false, std::nullopt } });
    t.steps.push_back(Step { "Holdings are in.", std::nullopt, std::nullopt });
    t.final_answer = "Client C001 holds F013, F015 and F020.";
    return t;
}

} // namespace

TEST_SUITE("trajectory")
{
    TEST_CASE("canonical record round-trips")
    {
        auto const t = portfolio_trajectory();
        auto const parsed = parse_trajectory(serialize_trajectory(t));
        REQUIRE(parsed.ok());
        CHECK(*parsed.trajectory == t);
        CHECK(parsed.report.passed);
    }

    TEST_CASE("missing thought clears thought_present only")
    {
        auto t = portfolio_trajectory();
        t.steps[0].thought.clear();
        auto const parsed = parse_trajectory(serialize_trajectory(t));
        CHECK_FALSE(parsed.ok());
        CHECK(parsed.report.parseable);
        CHECK(parsed.report.fields_valid);
        CHECK_FALSE(parsed.report.thought_present);
    }

    TEST_CASE("truncated record is not parseable")
    {
        auto text = serialize_trajectory(portfolio_trajectory());
        text.pop_back();
        auto const parsed = parse_trajectory(text);
        CHECK_FALSE(parsed.ok());
        CHECK_FALSE(parsed.report.parseable);
        CHECK_FALSE(parsed.report.passed);
    }

    TEST_CASE("misspelled tool name fails the registry check")
    {
        auto t = portfolio_trajectory();
        t.steps[0].action->tool_name = "getPortfollio";
        auto const report = check_format(t, *fixture_bundle().registry);
        CHECK_FALSE(report.tool_names_spelled);
        CHECK_FALSE(report.passed);
        CHECK(report.detail.find("getPortfollio") != std::string::npos);
    }

    TEST_CASE("empty trajectory fails format")
    {
        auto t = Trajectory {};
        t.task_id = "T0001";
        CHECK_FALSE(check_format(t, *fixture_bundle().registry).passed);
    }

    TEST_CASE("parameter keys serialize sorted")
    {
        auto t = portfolio_trajectory();
        t.steps[0].action->params = { { "zeta", 1 }, { "alpha", 2 } };
        auto const text = serialize_trajectory(t);
        CHECK(text.find("\"alpha\"") < text.find("\"zeta\""));
    }

    TEST_CASE("tool_call_count counts Action steps")
    {
        CHECK(portfolio_trajectory().tool_call_count() == 1);
    }

    TEST_CASE("property: serialize then parse is the identity")
    {
        auto rng = Rng(11);
        for (int i = 0; i < 500; ++i)
        {
            auto const t = random_trajectory(rng);
            auto const text = serialize_trajectory(t);
            auto const parsed = parse_trajectory(text);
            REQUIRE_MESSAGE(parsed.ok(), text);
            CHECK(*parsed.trajectory == t);
            CHECK(serialize_trajectory(*parsed.trajectory) == text);
        }
    }

    TEST_CASE("property: damaging a passing trajectory flips passed")
    {
        const auto& registry = *fixture_bundle().registry;
        auto rng = Rng(12);
        for (const auto& task: fixture_bundle().tasks)
        {
            auto const good = oracle_trajectory(task, fixture_bundle().sandbox);
            REQUIRE(check_format(good, registry).passed);
            auto bad = good;
            auto const i = rng.below(bad.steps.size());
            switch (rng.below(3))
            {
                case 0: bad.steps[i].thought.clear(); break;
                case 1:
                {
                    auto calls = std::vector<std::size_t> {};
                    for (std::size_t s = 0; s < bad.steps.size(); ++s)
                        if (bad.steps[s].action)
                            calls.push_back(s);
                    bad.steps[calls[rng.below(calls.size())]].action->tool_name += "x";
                    break;
                }
                default: bad.steps.clear(); break;
            }
            CHECK_FALSE(check_format(bad, registry).passed);
        }
    }
}
