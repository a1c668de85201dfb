// SPDX-License-Identifier: Apache-2.0
// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria.

#include "generators.hpp"
#include "support.hpp"

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>

#include <unistd.h>

using namespace agentlab;
using namespace agentlab::testing;
namespace fs = std::filesystem;

#ifndef AGENTLAB_CLI_PATH
#define AGENTLAB_CLI_PATH "agentlab"
#endif

namespace
{

int failures = 0;

std::string printf_string(const char* fmt, ...)
{
    char buf[1024];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    return buf;
}

void report(int id, const char* name, bool pass, const std::string& detail)
{
    std::printf("%s %2d %-26s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    failures += pass ? 0 : 1;
}

Trajectory replay(const Task& task, const std::vector<std::size_t>& actions)
{
    const auto& b = fixture_bundle();
    return replay_actions(*b.space, task, b.sandbox, actions);
}

// ---- 1 ---------------------------------------------------------------------

void reward_math()
{
    const auto& b = fixture_bundle();
    const auto& s = *b.space;
    const auto& lookup = first_task("portfolio_lookup");
    const auto& nav = first_task("fund_nav");
    auto score = [&](const Trajectory& t, const Task& task) {
        return total_reward(t, task.oracle, *b.registry, b.rules, RewardConfig {}).total;
    };
    auto const perfect = score(oracle_trajectory(lookup, b.sandbox), lookup);
    auto const hallucinated = score(replay(lookup, { s.hallucinate_index(0), s.call_index("getPortfolio", ParamTemplate::exact),
                                                     s.answer_index(AnswerVariant::factual) }),
                                    lookup);
    auto const wrong_params = score(replay(nav, { s.call_index("getFundNav", ParamTemplate::wrong_value),
                                                  s.answer_index(AnswerVariant::factual) }),
                                    nav);
    auto const violating = score(replay(lookup, { s.call_index("getPortfolio", ParamTemplate::exact),
                                                  s.answer_index(AnswerVariant::promote) }),
                                 lookup);
    auto const pass = std::abs(perfect - 3.0) <= 1e-12 && std::abs(violating + 7.0) <= 1e-12;
    report(1, "reward-math", pass,
           printf_string("perfect=%.15g violating=%.15g (hallucinated=%.15g wrong-params=%.15g)", perfect, violating,
                         hallucinated, wrong_params));
}

// ---- 2 ---------------------------------------------------------------------

void veto_suite()
{
    const auto& b = fixture_bundle();
    auto rng = Rng(2002);
    auto additive_sum = 0.0;
    auto mult_nonzero = std::size_t { 0 };
    auto gated_nonzero = std::size_t { 0 };
    for (int i = 0; i < 1000; ++i)
    {
        const auto& task = b.tasks[rng.below(b.tasks.size())];
        auto actions = std::vector<std::size_t> {};
        auto const calls = 1 + rng.below(4);
        for (std::size_t c = 0; c < calls; ++c)
        {
            auto const& plan = task.oracle_plan[rng.below(task.oracle_plan.size())];
            auto const tmpl = rng.below(3) == 0 ? ParamTemplate::wrong_value : ParamTemplate::exact;
            actions.push_back(b.space->call_index(plan.tool_name, tmpl));
        }
        auto const where = rng.below(actions.size() + 1);
        actions.insert(actions.begin() + static_cast<std::ptrdiff_t>(where),
                       b.space->hallucinate_index(rng.below(hallucinated_names.size())));
        actions.push_back(b.space->answer_index(AnswerVariant::factual));
        auto const t = replay(task, actions);

        auto const sub = compute_subscores(t, task.oracle, *b.registry);
        mult_nonzero += compose_correctness(sub, CompositionMode::multiplicative) != 0.0;
        additive_sum += compose_correctness(sub, CompositionMode::additive);
        for (auto mode: { CompositionMode::multiplicative, CompositionMode::additive })
        {
            auto const cfg = RewardConfig { 10.0, mode, true, true };
            gated_nonzero += total_reward(t, task.oracle, *b.registry, b.rules, cfg).r_cor != 0.0;
        }
    }
    auto const additive_mean = additive_sum / 1000.0;
    report(2, "veto", mult_nonzero == 0 && additive_mean > 0.0,
           printf_string("multiplicative r_cor nonzero=%zu/1000, additive mean r_cor=%.4f "
                         "(format-gated breakdown r_cor nonzero=%zu)",
                         mult_nonzero, additive_mean, gated_nonzero));
}

// ---- 3 ---------------------------------------------------------------------

void compliance_dominance()
{
    auto rng = Rng(3003);
    auto max_violated = -1e300;
    auto min_clean = 1e300;
    auto const cfg = RewardConfig {};
    for (int i = 0; i < 10000; ++i)
    {
        auto const violated = rng.below(2) == 1;
        auto const r = assemble_reward(rng.below(8) != 0, random_subscores(rng), rng.uniform(), violated,
                                       rng.below(2) == 1, cfg);
        if (violated)
            max_violated = std::max(max_violated, r.total);
        else
            min_clean = std::min(min_clean, r.total);
    }
    auto const bound = 3.0 - cfg.lambda;
    report(3, "compliance-dominance", max_violated < min_clean && bound < 0.0,
           printf_string("max|violated=%.4f min|clean=%.4f bound 3-lambda=%.1f", max_violated, min_clean, bound));
}

// ---- 4 ---------------------------------------------------------------------

void advantages()
{
    auto const a = group_advantages({ 3.0, 1.5, 2.0, -7.0 });
    auto const expected = std::array { 0.780, 0.406, 0.531, -1.716 };
    auto worst = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        worst = std::max(worst, std::abs(a.advantages[i] - expected[i]));

    auto rng = Rng(4004);
    auto worst_sum_ratio = 0.0;
    auto worst_std_gap = 0.0;
    auto converges = true;
    for (int g = 0; g < 1000; ++g)
    {
        auto const k = std::size_t { 2 } + rng.below(15);
        auto const rewards = random_rewards(rng, k);
        auto previous_gap = 1e300;
        for (double guard: { 1e-2, 1e-4, 1e-6, 0.0 })
        {
            auto const set = group_advantages(rewards, guard);
            if (set.sigma == 0.0)
                break;
            auto const sum = std::accumulate(set.advantages.begin(), set.advantages.end(), 0.0);
            worst_sum_ratio = std::max(worst_sum_ratio, std::abs(sum) / (1e-9 * k));
            auto ss = 0.0;
            for (double x: set.advantages)
                ss += x * x;
            auto const gap = std::abs(std::sqrt(ss / k) - 1.0);
            converges = converges && gap <= previous_gap + 1e-15;
            previous_gap = gap;
            if (guard == 0.0)
                worst_std_gap = std::max(worst_std_gap, gap);
        }
    }
    report(4, "advantages", worst < 1e-3 && worst_sum_ratio < 1.0 && converges && worst_std_gap < 1e-9,
           printf_string("archetype max err=%.2e, max |sum|/(1e-9 K)=%.3f, |std-1| at guard 0=%.2e, monotone=%s", worst,
                         worst_sum_ratio, worst_std_gap, converges ? "yes" : "no"));
}

// ---- 5 ---------------------------------------------------------------------

void gradient_oracles()
{
    const auto& b = fixture_bundle();
    auto rng = Rng(5005);
    auto worst_lp = 0.0, worst_grpo = 0.0, worst_dpo = 0.0;

    auto rollout = [&](const Task& task) {
        auto t = random_rollout(rng, task, b.sandbox, *b.space, 3);
        auto d = decode_decisions(t, task, *b.space);
        return std::pair { std::move(t), std::move(d) };
    };
    auto union_keys = [](const std::vector<std::vector<Decision>>& visits) {
        auto keys = std::vector<std::string> {};
        for (const auto& v: visits)
            for (const auto& k: visited_keys(v))
                if (std::find(keys.begin(), keys.end(), k) == keys.end())
                    keys.push_back(k);
        return keys;
    };

    for (int i = 0; i < 100; ++i)
    {
        const auto& task = b.tasks[rng.below(b.tasks.size())];
        auto const [t, d] = rollout(task);
        auto const p = random_policy(rng, b.space, { d }, 2.0);
        auto const temperature = uniform_in(rng, 0.5, 1.5);
        auto const numeric = numeric_gradient(p, visited_keys(d), [&](const Policy& q) {
            return logprob_trajectory(q, t, task, temperature);
        });
        worst_lp = std::max(worst_lp, gradient_rel_error(grad_logprob(p, t, task, temperature), numeric));
    }

    for (int i = 0, done = 0; done < 100 && i < 1000; ++i)
    {
        const auto& task = b.tasks[rng.below(b.tasks.size())];
        auto const k = std::size_t { 2 } + rng.below(6);
        auto group = GroupSample { &task, {} };
        auto visits = std::vector<std::vector<Decision>> {};
        for (std::size_t m = 0; m < k; ++m)
        {
            auto [t, d] = rollout(task);
            visits.push_back(std::move(d));
            group.members.push_back({ std::move(t), {} });
        }
        auto const ref = random_policy(rng, b.space, visits, 1.0);
        auto live = ref;
        for (const auto& [key, row]: ref.table())
            for (std::size_t a = 0; a < row.size(); ++a)
                live.row(key)[a] += uniform_in(rng, -0.1, 0.1);
        auto const reference = ReferencePolicy(ref);
        auto const adv = group_advantages(random_rewards(rng, k));
        auto const loss = grpo_loss(live, reference, group, adv, 0.2, 0.8);
        auto near_kink = false;
        for (double r: loss.ratios)
            near_kink = near_kink || std::abs(r - 0.8) < 1e-4 || std::abs(r - 1.2) < 1e-4;
        if (near_kink)
            continue;
        ++done;
        auto const numeric = numeric_gradient(live, union_keys(visits), [&](const Policy& q) {
            return grpo_loss(q, reference, group, adv, 0.2, 0.8).loss;
        });
        worst_grpo = std::max(worst_grpo, gradient_rel_error(loss.gradient, numeric));
    }

    for (int i = 0; i < 100; ++i)
    {
        const auto& task = b.tasks[rng.below(b.tasks.size())];
        auto [chosen, dc] = rollout(task);
        auto [rejected, dr] = rollout(task);
        auto const ref = ReferencePolicy(random_policy(rng, b.space, { dc, dr }, 1.0));
        auto const live = random_policy(rng, b.space, { dc, dr }, 1.0);
        auto const pair = PreferencePair { &task, chosen, rejected, PairKind::compliance };
        auto const beta = uniform_in(rng, 0.05, 1.0);
        auto const numeric = numeric_gradient(live, union_keys({ dc, dr }), [&](const Policy& q) {
            return dpo_loss(q, ref, pair, beta).loss;
        });
        worst_dpo = std::max(worst_dpo, gradient_rel_error(dpo_loss(live, ref, pair, beta).gradient, numeric));
    }

    report(5, "gradient-oracles", worst_lp < 1e-5 && worst_grpo < 1e-5 && worst_dpo < 1e-5,
           printf_string("max rel err logprob=%.2e grpo=%.2e dpo=%.2e (h=1e-5, 100 each)", worst_lp, worst_grpo,
                         worst_dpo));
}

// ---- 6 ---------------------------------------------------------------------

void dpo_points()
{
    auto const at_zero = dpo_loss_value(0.2, 0.0);
    auto const at_five = dpo_loss_value(0.2, 5.0);
    auto ok = std::abs(at_zero - std::log(2.0)) <= 1e-12 && std::abs(at_five - std::log1p(std::exp(-1.0))) <= 1e-9;

    auto rng = Rng(6006);
    auto swap_exact = true;
    auto scale_exact = true;
    const auto& b = fixture_bundle();
    for (int i = 0; i < 200; ++i)
    {
        const auto& task = b.tasks[rng.below(b.tasks.size())];
        auto const chosen = random_rollout(rng, task, b.sandbox, *b.space, 3);
        auto const rejected = random_rollout(rng, task, b.sandbox, *b.space, 3);
        auto const visits = std::vector { decode_decisions(chosen, task, *b.space), decode_decisions(rejected, task, *b.space) };
        auto const ref = ReferencePolicy(random_policy(rng, b.space, visits));
        auto const live = random_policy(rng, b.space, visits);
        auto const beta = uniform_in(rng, 0.05, 1.0);
        auto const forward = dpo_loss(live, ref, PreferencePair { &task, chosen, rejected }, beta);
        auto const backward = dpo_loss(live, ref, PreferencePair { &task, rejected, chosen }, beta);
        swap_exact = swap_exact && backward.delta == -forward.delta
                     && backward.loss == dpo_loss_value(beta, -forward.delta)
                     && forward.loss == dpo_loss_value(beta, forward.delta);
        auto const c = std::ldexp(1.0, static_cast<int>(rng.below(11)) - 5);
        scale_exact = scale_exact && dpo_loss_value(beta, forward.delta) == dpo_loss_value(beta / c, c * forward.delta);
    }
    report(6, "dpo-closed-form", ok && swap_exact && scale_exact,
           printf_string("loss(0)-ln2=%.1e loss(0.2,5)-ln(1+e^-1)=%.1e swap=%s scaling=%s", at_zero - std::log(2.0),
                         at_five - std::log1p(std::exp(-1.0)), swap_exact ? "exact" : "broken",
                         scale_exact ? "exact" : "broken"));
}

// ---- 7-10: seeded ablations ------------------------------------------------

struct SeedRun
{
    std::uint64_t seed;
    std::vector<AblationRow> rows;

    const AblationRow& at(std::string_view label) const
    {
        for (const auto& r: rows)
            if (r.label == label)
                return r;
        throw Error("missing row " + std::string(label));
    }
};

std::vector<SeedRun> run_seeds()
{
    auto suite = standard_suite({}, {}, {}, {});
    auto no_help = suite.back();
    no_help.label = "full_no_helpfulness";
    no_help.pipeline.pairs.helpfulness_fraction = 0.0;
    suite.push_back(no_help);

    auto runs = std::vector<SeedRun> {};
    for (std::uint64_t seed: { 1, 2, 3 })
        runs.push_back({ seed, run_ablation(suite, fixture_bundle(), seed, default_workers()) });
    return runs;
}

/// Mean over the first and last tenth of a log column.
std::pair<double, double> ends(const std::vector<GrpoLogRow>& log, double GrpoLogRow::*field)
{
    auto const m = std::max<std::size_t>(1, log.size() / 10);
    auto first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < m; ++i)
    {
        first += log[i].*field;
        last += log[log.size() - 1 - i].*field;
    }
    return { first / m, last / m };
}

void ablation_order(const std::vector<SeedRun>& runs)
{
    auto pass = true;
    auto detail = std::string {};
    for (const auto& r: runs)
    {
        auto const sft = r.at("sft").metrics.tier;
        auto const add = r.at("grpo_additive").metrics.tier;
        auto const mult = r.at("grpo_multiplicative").metrics.tier;
        auto const grpo_tcr = r.at("grpo_multiplicative").metrics.tcr;
        auto const full_tcr = r.at("full_pipeline").metrics.tcr;
        pass = pass && sft > add && add > mult && full_tcr >= grpo_tcr && add - mult > 0.0;
        detail += printf_string("seed %llu TIER sft=%.1f add=%.1f mult=%.1f TCR full=%.1f grpo=%.1f; ",
                                static_cast<unsigned long long>(r.seed), sft, add, mult, full_tcr, grpo_tcr);
    }
    report(7, "ablation-direction", pass, detail);
}

void reward_dynamics(const std::vector<SeedRun>& runs)
{
    auto pass = true;
    auto detail = std::string {};
    for (const auto& r: runs)
    {
        const auto& log = r.at("grpo_multiplicative").grpo_log;
        auto const [cor0, cor1] = ends(log, &GrpoLogRow::frac_cor_positive);
        auto const [cpl0, cpl1] = ends(log, &GrpoLogRow::cpl_trigger_rate);
        pass = pass && cor1 > cor0 && cpl1 < cpl0;
        detail += printf_string("seed %llu r_cor>0 %.3f->%.3f cpl %.3f->%.3f; ",
                                static_cast<unsigned long long>(r.seed), cor0, cor1, cpl0, cpl1);
    }
    report(8, "reward-dynamics", pass, detail);
}

void lambda_direction(const std::vector<SeedRun>& runs)
{
    auto pass = true;
    auto detail = std::string {};
    for (const auto& r: runs)
    {
        auto const with = r.at("grpo_multiplicative").vr_refusal_tasks;
        auto const without = r.at("grpo_no_cpl").vr_refusal_tasks;
        pass = pass && with <= without;
        detail += printf_string("seed %llu L4 VR lambda=10 %.1f, lambda=0 %.1f; ",
                                static_cast<unsigned long long>(r.seed), with, without);
    }
    report(9, "lambda-direction", pass, detail);
}

void over_refusal(const std::vector<SeedRun>& runs)
{
    auto pass = true;
    auto detail = std::string {};
    for (const auto& r: runs)
    {
        auto const with = r.at("full_pipeline").over_refusal;
        auto const without = r.at("full_no_helpfulness").over_refusal;
        pass = pass && without >= with;
        detail += printf_string("seed %llu over-refusal default=%.1f no-helpfulness=%.1f; ",
                                static_cast<unsigned long long>(r.seed), with, without);
    }
    report(10, "over-refusal", pass, detail);
}

// ---- 11 --------------------------------------------------------------------

int run_cli(const std::string& args)
{
    auto const cmd = std::string("\"") + AGENTLAB_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

/// Relative path -> contents for every file except the manifest.
std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    auto files = std::map<std::string, std::string> {};
    for (const auto& entry: fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
            files[fs::relative(entry.path(), dir).string()] = read_file(entry.path().string());
    return files;
}

void cli_determinism()
{
    auto const root = fs::temp_directory_path() / ("agentlab-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(root);
    auto const bundle = std::string(" --bundle \"") + AGENTLAB_FIXTURE_DIR + "\"";
    auto const commands = std::vector<std::pair<std::string, std::string>> {
        { "gen-tasks", "gen-tasks --n 120 --seed 5 --with-responses" },
        { "train", "train --seed 5" },
        { "ablate", "ablate --suite table2 --seed 5" },
        { "eval", "eval --policy oracle --split all" },
        { "flag", "flag --policy oracle --split all --seed 5" },
    };
    auto pass = true;
    auto compared = std::size_t { 0 };
    auto detail = std::string {};
    for (const auto& [name, args]: commands)
    {
        auto reference = std::map<std::string, std::string> {};
        auto index = 0;
        for (int workers: { 1, 1, 4 })
        {
            auto const out = root / (name + "-" + std::to_string(index++));
            auto const status = run_cli(args + bundle + " --workers " + std::to_string(workers) + " -o \"" + out.string() + "\"");
            if (status != 0)
            {
                pass = false;
                detail += name + " exited " + std::to_string(status) + "; ";
                break;
            }
            auto files = snapshot(out);
            if (index == 1)
            {
                reference = std::move(files);
                continue;
            }
            compared += files.size();
            if (files != reference)
            {
                pass = false;
                detail += name + " differs at workers=" + std::to_string(workers) + "; ";
            }
        }
        if (pass)
            detail += name + " " + std::to_string(reference.size()) + " files; ";
    }
    fs::remove_all(root);
    report(11, "cli-determinism", pass && compared > 0,
           detail + printf_string("(%zu comparisons, runs at workers 1,1,4)", compared));
}

} // namespace

int main()
{
    try
    {
        reward_math();
        veto_suite();
        compliance_dominance();
        advantages();
        gradient_oracles();
        dpo_points();
        auto const runs = run_seeds();
        ablation_order(runs);
        reward_dynamics(runs);
        lambda_direction(runs);
        over_refusal(runs);
        cli_determinism();
    }
    catch (const std::exception& e)
    {
        std::printf("FAIL acceptance aborted: %s\n", e.what());
        return 100;
    }
    return failures;
}
