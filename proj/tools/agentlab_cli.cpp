// SPDX-License-Identifier: Apache-2.0
#include "agentlab/bench.hpp"
#include "agentlab/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace agentlab;

namespace
{

constexpr const char* agentlab_version = "1.0.0";

struct RunConfig
{
    std::string bundle_path = "fixtures";
    std::uint64_t seed = 7;
    std::string output_dir = "out";
    std::size_t workers = default_workers();
    bool sft = true;
    bool grpo = true;
    bool dpo = true;
    SftConfig sft_config;
    GrpoConfig grpo_config;
    DpoConfig dpo_config;
    PairConfig pair_config;

    // Subcommand tunables.
    std::size_t n_tasks = 200;
    StrataWeights weights = default_strata_weights;
    std::string policy_path;
    std::string split = "held_out";
    std::string trajectories_path;
    std::string hard_pool_path;
    std::string suite = "table2";
    bool with_responses = false;
};

// ---- value parsing -----------------------------------------------------------

[[noreturn]] void bad_value(const std::string& key, const std::string& text, const char* expected)
{
    throw Error(key + ": expected " + expected + ", got '" + text + "'");
}

double to_double(const std::string& key, const std::string& text)
{
    try
    {
        std::size_t used = 0;
        auto const v = std::stod(text, &used);
        if (used == text.size())
            return v;
    }
    catch (const std::exception&)
    {
    }
    bad_value(key, text, "a number");
}

long long to_integer(const std::string& key, const std::string& text)
{
    try
    {
        std::size_t used = 0;
        auto const v = std::stoll(text, &used);
        if (used == text.size())
            return v;
    }
    catch (const std::exception&)
    {
    }
    bad_value(key, text, "an integer");
}

std::size_t to_count(const std::string& key, const std::string& text)
{
    auto const v = to_integer(key, text);
    if (v < 0)
        throw Error(key + ": must be >= 0");
    return static_cast<std::size_t>(v);
}

std::uint64_t to_seed(const std::string& key, const std::string& text)
{
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
        bad_value(key, text, "a non-negative integer");
    try
    {
        return std::stoull(text);
    }
    catch (const std::exception&)
    {
        bad_value(key, text, "a 64-bit seed");
    }
}

bool to_bool(const std::string& key, const std::string& text)
{
    if (text == "true" || text == "1" || text == "on")
        return true;
    if (text == "false" || text == "0" || text == "off")
        return false;
    bad_value(key, text, "true or false");
}

std::vector<std::string> split_list(const std::string& text)
{
    auto out = std::vector<std::string> {};
    auto in = std::istringstream(text);
    auto item = std::string {};
    while (std::getline(in, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

// ---- tunables ----------------------------------------------------------------

struct Tunable
{
    std::string key;
    std::string flag;
    std::string help;
    std::function<void(RunConfig&, const std::string&)> apply;
    /// Takes no value on the command line; present means "true".
    bool toggle = false;
};

const std::vector<Tunable>& shared_tunables()
{
    static const std::vector<Tunable> table {
        { "bundle", "--bundle", "fixture bundle directory (default: $AGENTLAB_BUNDLE or fixtures)",
          [](RunConfig& c, const std::string& v) { c.bundle_path = v; } },
        { "seed", "--seed", "pipeline seed", [](RunConfig& c, const std::string& v) { c.seed = to_seed("seed", v); } },
        { "output_dir", "--output-dir,-o", "directory receiving every output file",
          [](RunConfig& c, const std::string& v) { c.output_dir = v; } },
        { "workers", "--workers", "rollout worker threads (outputs do not depend on it)",
          [](RunConfig& c, const std::string& v) {
              c.workers = to_count("workers", v);
              if (c.workers == 0)
                  throw Error("workers: must be >= 1");
          } },
    };
    return table;
}

const std::vector<Tunable>& training_tunables()
{
    static const std::vector<Tunable> table {
        { "stages", "--stages", "comma-separated subset of sft,grpo,dpo",
          [](RunConfig& c, const std::string& v) {
              c.sft = c.grpo = c.dpo = false;
              for (const auto& s: split_list(v))
              {
                  if (s == "sft")
                      c.sft = true;
                  else if (s == "grpo")
                      c.grpo = true;
                  else if (s == "dpo")
                      c.dpo = true;
                  else
                      throw Error("stages: unknown stage '" + s + "'");
              }
          } },
        { "max_rounds", "--max-rounds", "decision budget per episode",
          [](RunConfig& c, const std::string& v) {
              auto const n = static_cast<int>(to_integer("max_rounds", v));
              c.grpo_config.max_rounds = n;
              c.pair_config.max_rounds = n;
          } },
        { "sft.demos_per_task", "--sft-demos", "demonstrations per training task",
          [](RunConfig& c, const std::string& v) {
              c.sft_config.demos_per_task = static_cast<int>(to_integer("sft.demos_per_task", v));
          } },
        { "sft.epochs", "--sft-epochs", "passes over the demonstration corpus",
          [](RunConfig& c, const std::string& v) { c.sft_config.epochs = static_cast<int>(to_integer("sft.epochs", v)); } },
        { "sft.lr", "--sft-lr", "supervised learning rate",
          [](RunConfig& c, const std::string& v) { c.sft_config.lr = to_double("sft.lr", v); } },
        { "sft.recovery_rate", "--recovery-rate", "share of demos recovering from an unknown tool name",
          [](RunConfig& c, const std::string& v) { c.sft_config.recovery_rate = to_double("sft.recovery_rate", v); } },
        { "grpo.K", "--k", "group size", [](RunConfig& c, const std::string& v) { c.grpo_config.K = to_count("grpo.K", v); } },
        { "grpo.clip_epsilon", "--clip-epsilon", "surrogate clip range",
          [](RunConfig& c, const std::string& v) { c.grpo_config.clip_epsilon = to_double("grpo.clip_epsilon", v); } },
        { "grpo.temperature", "--temperature", "group sampling temperature",
          [](RunConfig& c, const std::string& v) { c.grpo_config.temperature = to_double("grpo.temperature", v); } },
        { "grpo.steps", "--grpo-steps", "GRPO steps (one group each)",
          [](RunConfig& c, const std::string& v) { c.grpo_config.steps = static_cast<int>(to_integer("grpo.steps", v)); } },
        { "grpo.lr", "--grpo-lr", "GRPO learning rate",
          [](RunConfig& c, const std::string& v) { c.grpo_config.lr = to_double("grpo.lr", v); } },
        { "grpo.ref_refresh_interval", "--ref-refresh", "steps between reference snapshots; 0 freezes it",
          [](RunConfig& c, const std::string& v) {
              c.grpo_config.ref_refresh_interval = static_cast<int>(to_integer("grpo.ref_refresh_interval", v));
          } },
        { "grpo.inner_epochs", "--inner-epochs", "gradient steps per group",
          [](RunConfig& c, const std::string& v) {
              c.grpo_config.inner_epochs = static_cast<int>(to_integer("grpo.inner_epochs", v));
          } },
        { "grpo.advantage_guard", "--advantage-guard", "advantage denominator guard",
          [](RunConfig& c, const std::string& v) { c.grpo_config.advantage_guard = to_double("grpo.advantage_guard", v); } },
        { "reward.lambda", "--lambda", "compliance penalty; 0 disables it",
          [](RunConfig& c, const std::string& v) {
              auto const l = to_double("reward.lambda", v);
              if (l == 0.0)
                  c.grpo_config.reward.cpl_enabled = false;
              else
                  c.grpo_config.reward.lambda = l;
          } },
        { "reward.mode", "--mode", "multiplicative, additive or coarse_binary",
          [](RunConfig& c, const std::string& v) { c.grpo_config.reward.mode = composition_mode_from_string(v); } },
        { "reward.eff", "--eff", "efficiency term on/off",
          [](RunConfig& c, const std::string& v) { c.grpo_config.reward.eff_enabled = to_bool("reward.eff", v); } },
        { "reward.cpl", "--cpl", "compliance term on/off",
          [](RunConfig& c, const std::string& v) { c.grpo_config.reward.cpl_enabled = to_bool("reward.cpl", v); } },
        { "dpo.beta", "--beta", "DPO temperature on the log-ratio margin",
          [](RunConfig& c, const std::string& v) { c.dpo_config.beta = to_double("dpo.beta", v); } },
        { "dpo.lr", "--dpo-lr", "DPO learning rate",
          [](RunConfig& c, const std::string& v) { c.dpo_config.lr = to_double("dpo.lr", v); } },
        { "dpo.epochs", "--dpo-epochs", "passes over the preference pairs",
          [](RunConfig& c, const std::string& v) { c.dpo_config.epochs = static_cast<int>(to_integer("dpo.epochs", v)); } },
        { "dpo.temperature", "--dpo-temperature", "policy temperature inside the DPO likelihoods",
          [](RunConfig& c, const std::string& v) { c.dpo_config.temperature = to_double("dpo.temperature", v); } },
        { "dpo.answer_only", "--answer-only", "score only the closing answer decision",
          [](RunConfig& c, const std::string& v) { c.dpo_config.answer_only = to_bool("dpo.answer_only", v); } },
        { "pairs.n_min", "--pairs-min", "fewest candidates sampled per task",
          [](RunConfig& c, const std::string& v) { c.pair_config.n_min = static_cast<int>(to_integer("pairs.n_min", v)); } },
        { "pairs.n_max", "--pairs-max", "most candidates sampled per task",
          [](RunConfig& c, const std::string& v) { c.pair_config.n_max = static_cast<int>(to_integer("pairs.n_max", v)); } },
        { "pairs.temperature", "--pair-temperature", "candidate sampling temperature",
          [](RunConfig& c, const std::string& v) { c.pair_config.temperature = to_double("pairs.temperature", v); } },
        { "pairs.helpfulness_fraction", "--helpfulness-fraction", "cap on the helpfulness share of all pairs",
          [](RunConfig& c, const std::string& v) {
              c.pair_config.helpfulness_fraction = to_double("pairs.helpfulness_fraction", v);
          } },
        { "pairs.max_per_task", "--max-pairs-per-task", "pairs kept per task and kind",
          [](RunConfig& c, const std::string& v) { c.pair_config.max_pairs_per_task = to_count("pairs.max_per_task", v); } },
    };
    return table;
}

Json config_json(const RunConfig& c)
{
    const auto& g = c.grpo_config;
    const auto& d = c.dpo_config;
    const auto& p = c.pair_config;
    const auto& s = c.sft_config;
    return Json {
        { "bundle", c.bundle_path },
        { "seed", c.seed },
        { "stages", { { "sft", c.sft }, { "grpo", c.grpo }, { "dpo", c.dpo } } },
        { "sft", { { "demos_per_task", s.demos_per_task }, { "epochs", s.epochs }, { "lr", s.lr },
                   { "recovery_rate", s.recovery_rate } } },
        { "grpo", { { "K", g.K }, { "clip_epsilon", g.clip_epsilon }, { "temperature", g.temperature },
                    { "steps", g.steps }, { "lr", g.lr }, { "ref_refresh_interval", g.ref_refresh_interval },
                    { "inner_epochs", g.inner_epochs }, { "advantage_guard", g.advantage_guard },
                    { "max_rounds", g.max_rounds } } },
        { "reward", { { "lambda", g.reward.lambda }, { "mode", std::string(to_string(g.reward.mode)) },
                      { "eff", g.reward.eff_enabled }, { "cpl", g.reward.cpl_enabled } } },
        { "dpo", { { "beta", d.beta }, { "lr", d.lr }, { "epochs", d.epochs }, { "temperature", d.temperature },
                   { "answer_only", d.answer_only } } },
        { "pairs", { { "n_min", p.n_min }, { "n_max", p.n_max }, { "temperature", p.temperature },
                     { "helpfulness_fraction", p.helpfulness_fraction }, { "max_per_task", p.max_pairs_per_task } } },
        { "tasks", { { "n", c.n_tasks },
                     { "weights", { c.weights[0], c.weights[1], c.weights[2], c.weights[3] } } } },
        { "policy", c.policy_path },
        { "split", c.split },
        { "trajectories", c.trajectories_path },
        { "hard_pool", c.hard_pool_path },
        { "suite", c.suite },
        { "with_responses", c.with_responses },
    };
}

template <typename Config>
void validate_section(const char* section, const Config& config)
{
    try
    {
        config.validate();
    }
    catch (const Error& e)
    {
        throw Error(std::string(section) + " config: " + e.what());
    }
}

void validate(const RunConfig& c)
{
    validate_section("sft", c.sft_config);
    validate_section("grpo", c.grpo_config);
    validate_section("dpo", c.dpo_config);
    validate_section("pairs", c.pair_config);
    if (c.split != "held_out" && c.split != "train" && c.split != "all")
        throw Error("split: must be held_out, train or all");
    if (c.suite != "table2")
        throw Error("suite: unknown suite '" + c.suite + "'");
}

// Nested objects flatten to dotted keys; scalars become flag-style text.
void flatten(const Json& node, const std::string& prefix, std::map<std::string, std::string>& out)
{
    for (const auto& [key, value]: node.items())
    {
        auto const name = prefix.empty() ? key : prefix + "." + key;
        if (value.is_object())
            flatten(value, name, out);
        else if (value.is_string())
            out[name] = value.get<std::string>();
        else if (value.is_boolean())
            out[name] = value.get<bool>() ? "true" : "false";
        else if (value.is_number_integer() || value.is_number_unsigned())
            out[name] = value.dump();
        else if (value.is_number())
            out[name] = format_number(value.get<double>());
        else if (value.is_array())
        {
            auto text = std::string {};
            for (const auto& item: value)
                text += (text.empty() ? "" : ",") + (item.is_string() ? item.get<std::string>() : item.dump());
            out[name] = text;
        }
        else
            throw Error("config: " + name + " has an unsupported value");
    }
}

// ---- outputs -----------------------------------------------------------------

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string json_version()
{
    return std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
           std::to_string(NLOHMANN_JSON_VERSION_PATCH);
}

std::string utc_timestamp()
{
    auto const now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm {};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Output
{
public:
    Output(const RunConfig& config, std::string subcommand): config_(config), subcommand_(std::move(subcommand))
    {
        fs::create_directories(config_.output_dir);
    }

    void write(const std::string& relative, std::string_view contents)
    {
        auto const path = fs::path(config_.output_dir) / relative;
        if (path.has_parent_path())
            fs::create_directories(path.parent_path());
        write_file(path.string(), contents);
        files_.push_back(relative);
    }

    void manifest() const
    {
        auto const config = config_json(config_);
        auto const canonical = config.dump();
        auto m = OrderedJson {};
        m["subcommand"] = subcommand_;
        m["seed"] = config_.seed;
        m["config_hash"] = hex64(fnv1a(canonical));
        m["config"] = OrderedJson::parse(canonical);
        m["workers"] = config_.workers;
        m["files"] = files_;
        m["versions"] = { { "agentlab", agentlab_version }, { "nlohmann_json", json_version() }, { "cli11", CLI11_VERSION } };
        m["metrics"] = { { "tier_denominator", "tool invocations" }, { "crr_denominator", "refusal-annotated tasks" } };
        m["created_at"] = utc_timestamp();
        write_file((fs::path(config_.output_dir) / "manifest.json").string(), m.dump(2) + "\n");
    }

private:
    const RunConfig& config_;
    std::string subcommand_;
    std::vector<std::string> files_;
};

TaskSet select_split(const TaskSet& tasks, const std::string& which)
{
    if (which == "all")
        return tasks;
    auto split = split_tasks(tasks);
    return which == "train" ? split.train : split.held_out;
}

Policy load_policy_arg(const RunConfig& c, const Bundle& bundle)
{
    if (c.policy_path.empty())
        throw Error("policy: a checkpoint path (or 'oracle') is required");
    if (c.policy_path == "oracle")
        return oracle_policy(bundle.space, oracle_demos(bundle.tasks, bundle.sandbox));
    if (!fs::exists(c.policy_path))
        throw Error("policy: " + c.policy_path + " does not exist");
    return parse_policy(read_file(c.policy_path), bundle.space);
}

std::string metrics_table(const Evaluation& e)
{
    return metrics_csv_header() + ",over_refusal\n" + metrics_csv_row(e.metrics) + "," +
           format_number(e.over_refusal) + "\n";
}

PipelineConfig pipeline_of(const RunConfig& c)
{
    auto p = PipelineConfig {};
    p.sft = c.sft;
    p.sft_config = c.sft_config;
    if (c.grpo)
        p.grpo = c.grpo_config;
    if (c.dpo)
        p.dpo = c.dpo_config;
    p.pairs = c.pair_config;
    p.seed = c.seed;
    p.workers = c.workers;
    return p;
}

// ---- subcommands -------------------------------------------------------------

void run_gen_tasks(const RunConfig& c)
{
    auto const registry = std::make_shared<const Registry>(load_registry((fs::path(c.bundle_path) / "registry.json").string()));
    auto const tasks = generate_tasks(c.n_tasks, c.weights, c.seed, *registry);
    auto out = Output(c, "gen-tasks");
    out.write("tasks.jsonl", serialize_taskset(tasks));
    if (c.with_responses)
    {
        auto const bundle = make_bundle(registry, load_rules((fs::path(c.bundle_path) / "rules.json").string()), tasks);
        save_fixtures(bundle.sandbox.fixtures, (fs::path(c.output_dir) / "responses").string());
        out.write("registry.json", read_file((fs::path(c.bundle_path) / "registry.json").string()));
        out.write("rules.json", read_file((fs::path(c.bundle_path) / "rules.json").string()));
    }
    auto const counts = strata_counts(c.n_tasks, c.weights);
    auto summary = std::string("level,count\n");
    for (std::size_t i = 0; i < counts.size(); ++i)
        summary += "L" + std::to_string(i + 1) + "," + std::to_string(counts[i]) + "\n";
    out.write("strata.csv", summary);
    out.manifest();
    std::cout << "wrote " << tasks.size() << " tasks (" << counts[0] << "/" << counts[1] << "/" << counts[2] << "/"
              << counts[3] << ")\n";
}

void run_train(const RunConfig& c)
{
    auto const bundle = load_bundle(c.bundle_path);
    auto const split = split_tasks(bundle.tasks);
    auto hard_pool = std::set<std::string> {};
    if (!c.hard_pool_path.empty())
        hard_pool = parse_hard_pool(read_file(c.hard_pool_path));
    auto const result = run_pipeline(bundle, split.train, pipeline_of(c), hard_pool);
    auto const eval = evaluate_detailed(result.policy, split.held_out, bundle.sandbox, bundle.rules, c.workers);

    auto out = Output(c, "train");
    out.write("policy.txt", serialize_policy(result.policy));
    if (c.grpo)
        out.write("grpo_log.csv", grpo_log_csv(result.grpo_log));
    if (c.dpo)
    {
        out.write("dpo_log.csv", dpo_log_csv(result.dpo_log));
        out.write("pairs.jsonl", serialize_pairs(result.pairs));
    }
    out.write("metrics.csv", metrics_table(eval));
    out.manifest();
    std::cout << metrics_table(eval);
}

void run_eval(const RunConfig& c)
{
    auto const bundle = load_bundle(c.bundle_path);
    auto const policy = load_policy_arg(c, bundle);
    auto const tasks = select_split(bundle.tasks, c.split);
    auto const eval = evaluate_detailed(policy, tasks, bundle.sandbox, bundle.rules, c.workers);
    auto trajectories = std::string {};
    for (const auto& o: eval.outcomes)
        trajectories += serialize_trajectory(o.trajectory) + "\n";

    auto out = Output(c, "eval");
    out.write("metrics.csv", metrics_table(eval));
    out.write("trajectories.jsonl", trajectories);
    out.manifest();
    std::cout << metrics_table(eval);
}

void run_ablate(const RunConfig& c)
{
    auto const bundle = load_bundle(c.bundle_path);
    auto const suite = standard_suite(c.grpo_config, c.dpo_config, c.sft_config, c.pair_config);
    auto const rows = run_ablation(suite, bundle, c.seed, c.workers);

    auto out = Output(c, "ablate");
    out.write("ablation.csv", ablation_csv(rows));
    for (const auto& r: rows)
    {
        if (!r.grpo_log.empty())
            out.write("logs/grpo_" + r.label + ".csv", grpo_log_csv(r.grpo_log));
        if (!r.dpo_log.empty())
            out.write("logs/dpo_" + r.label + ".csv", dpo_log_csv(r.dpo_log));
    }
    out.manifest();
    std::cout << ablation_csv(rows);
}

void run_score(const RunConfig& c)
{
    if (c.trajectories_path.empty())
        throw Error("trajectories: a JSONL path is required");
    auto const bundle = load_bundle(c.bundle_path);
    const auto& reward = c.grpo_config.reward;
    auto in = std::istringstream(read_file(c.trajectories_path));
    auto table = reward_table_header() + "\n";
    auto line = std::string {};
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        auto const where = c.trajectories_path + ":" + std::to_string(line_no);
        auto const parsed = parse_trajectory(line);
        auto task_id = std::string {};
        if (parsed.ok())
            task_id = parsed.trajectory->task_id;
        else if (auto raw = Json::parse(line, nullptr, false); raw.is_object() && raw.contains("task_id") &&
                                                               raw["task_id"].is_string())
            task_id = raw["task_id"].get<std::string>();
        else
            throw Error(where + ": record has no readable task_id");

        const auto* task = find_task(bundle.tasks, task_id);
        if (task == nullptr)
            throw Error(where + ": task '" + task_id + "' is not in the bundle");
        auto const breakdown = parsed.ok()
                                   ? total_reward(*parsed.trajectory, task->oracle, *bundle.registry, bundle.rules, reward)
                                   : assemble_reward(false, SubScores { 0.0, 0.0, 0.0 }, 0.0, false, false, reward);
        table += reward_table_row(task_id, breakdown) + "\n";
    }
    auto out = Output(c, "score");
    out.write("rewards.csv", table);
    out.manifest();
    std::cout << table;
}

void run_flag(const RunConfig& c)
{
    auto const bundle = load_bundle(c.bundle_path);
    auto const policy = load_policy_arg(c, bundle);
    auto const tasks = select_split(bundle.tasks, c.split);
    auto const logs = simulate_sessions(policy, tasks, bundle.sandbox, bundle.rules, c.seed);
    auto const flags = flag_hard_examples(logs, bundle.rules);

    auto sessions = std::string {};
    for (const auto& log: logs)
    {
        auto meta = Json::object();
        meta["task_id"] = log.trajectory.task_id;
        meta["requery_gap_seconds"] =
            log.metadata.requery_gap_seconds ? Json(format_number(*log.metadata.requery_gap_seconds)) : Json(nullptr);
        sessions += meta.dump() + "\n";
    }
    auto out = Output(c, "flag");
    out.write("sessions.jsonl", sessions);
    out.write("flags.csv", flags_csv(flags));
    out.write("hard_pool.txt", serialize_hard_pool(hard_pool_from_flags(flags)));
    out.manifest();
    std::cout << flags.size() << " of " << logs.size() << " sessions flagged\n";
}

// ---- command line ------------------------------------------------------------

struct Command
{
    CLI::App* app = nullptr;
    std::function<void(const RunConfig&)> run;
    std::map<std::string, std::string> flag_values;
    std::optional<std::string> config_path;
    std::vector<Tunable> tunables;
};

void add_tunables(Command& cmd, const std::vector<Tunable>& table)
{
    for (const auto& t: table)
    {
        cmd.tunables.push_back(t);
        if (t.toggle)
            cmd.app->add_flag_function(
                t.flag, [&cmd, key = t.key](std::int64_t) { cmd.flag_values[key] = "true"; }, t.help);
        else
            cmd.app->add_option_function<std::string>(
                t.flag, [&cmd, key = t.key](const std::string& v) { cmd.flag_values[key] = v; }, t.help);
    }
}

RunConfig resolve(const Command& cmd)
{
    auto config = RunConfig {};
    if (const char* env = std::getenv("AGENTLAB_BUNDLE"); env != nullptr && *env != '\0')
        config.bundle_path = env;

    auto by_key = std::map<std::string, const Tunable*> {};
    for (const auto& t: cmd.tunables)
        by_key[t.key] = &t;

    auto values = std::map<std::string, std::string> {};
    if (cmd.config_path)
    {
        auto const doc = Json::parse(read_file(*cmd.config_path), nullptr, false);
        if (!doc.is_object())
            throw Error("config: " + *cmd.config_path + " is not a JSON object");
        flatten(doc, "", values);
    }
    for (const auto& [key, value]: cmd.flag_values)
        values[key] = value;

    for (const auto& [key, value]: values)
    {
        auto it = by_key.find(key);
        if (it == by_key.end())
            throw Error("config: unknown key '" + key + "'");
        it->second->apply(config, value);
    }
    validate(config);
    return config;
}

} // namespace

int main(int argc, char** argv)
{
    auto app = CLI::App("agentlab: tool-use agent training and evaluation harness", "agentlab");
    app.set_version_flag("--version", agentlab_version);
    app.require_subcommand(1);

    auto commands = std::vector<std::unique_ptr<Command>> {};
    auto add = [&](const char* name, const char* help, std::function<void(const RunConfig&)> run,
                   std::initializer_list<const std::vector<Tunable>*> tables) -> Command& {
        auto cmd = std::make_unique<Command>();
        cmd->app = app.add_subcommand(name, help);
        cmd->run = std::move(run);
        cmd->app->add_option("--config", cmd->config_path, "JSON config file; flags override it");
        for (const auto* table: tables)
            add_tunables(*cmd, *table);
        commands.push_back(std::move(cmd));
        return *commands.back();
    };

    auto tunable = [](std::string key, std::string flag, std::string help,
                      std::function<void(RunConfig&, const std::string&)> apply) {
        return std::vector<Tunable> { { std::move(key), std::move(flag), std::move(help), std::move(apply) } };
    };
    auto const shared = &shared_tunables();
    auto const training = &training_tunables();

    auto const n_tasks = tunable("tasks.n", "--n", "number of tasks",
                                 [](RunConfig& c, const std::string& v) { c.n_tasks = to_count("tasks.n", v); });
    auto const weights = tunable("tasks.weights", "--weights", "four comma-separated stratum weights",
                                 [](RunConfig& c, const std::string& v) {
                                     auto const items = split_list(v);
                                     if (items.size() != 4)
                                         throw Error("tasks.weights: expected four values");
                                     for (std::size_t i = 0; i < 4; ++i)
                                         c.weights[i] = to_double("tasks.weights", items[i]);
                                 });
    auto with_responses =
        tunable("with_responses", "--with-responses", "also write responses/, registry and rules (a full bundle)",
                [](RunConfig& c, const std::string& v) { c.with_responses = to_bool("with_responses", v); });
    with_responses.front().toggle = true;
    auto const policy = tunable("policy", "--policy", "policy checkpoint, or 'oracle'",
                                [](RunConfig& c, const std::string& v) { c.policy_path = v; });
    auto const split = tunable("split", "--split", "held_out, train or all",
                               [](RunConfig& c, const std::string& v) { c.split = v; });
    auto const trajectories = tunable("trajectories", "--trajectories", "trajectory JSONL to score",
                                      [](RunConfig& c, const std::string& v) { c.trajectories_path = v; });
    auto const hard_pool = tunable("hard_pool", "--hard-pool", "hard-example pool file (one task id per line)",
                                   [](RunConfig& c, const std::string& v) { c.hard_pool_path = v; });
    auto const suite = tunable("suite", "--suite", "ablation suite (table2)",
                               [](RunConfig& c, const std::string& v) { c.suite = v; });

    add("gen-tasks", "generate a stratified task set", run_gen_tasks, { shared, &n_tasks, &weights, &with_responses });
    add("train", "run SFT, GRPO and DPO and evaluate on the held-out split", run_train, { shared, training, &hard_pool });
    add("eval", "evaluate a policy checkpoint", run_eval, { shared, &policy, &split });
    add("ablate", "run an ablation suite", run_ablate, { shared, training, &suite });
    add("score", "score trajectories with the composite reward", run_score, { shared, training, &trajectories });
    add("flag", "simulate sessions and flag hard examples", run_flag, { shared, &policy, &split });

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForVersion& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    for (const auto& cmd: commands)
    {
        if (!cmd->app->parsed())
            continue;
        try
        {
            cmd->run(resolve(*cmd));
            return 0;
        }
        catch (const std::exception& e)
        {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 2;
}
