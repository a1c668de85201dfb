// SPDX-License-Identifier: Apache-2.0
#include "agentlab/sandbox.hpp"

#include <filesystem>

namespace agentlab
{

std::string canonical_params(const ParamMap& params)
{
    auto j = Json::object();
    for (const auto& [k, v]: params)
        j[k] = v;
    return j.dump();
}

const Json* FixtureTables::lookup(const std::string& tool, const ParamMap& params) const
{
    auto table = tables.find(tool);
    if (table == tables.end())
        return nullptr;
    auto it = table->second.find(canonical_params(params));
    return it == table->second.end() ? nullptr : &it->second;
}

void FixtureTables::insert(const std::string& tool, const ParamMap& params, Json payload)
{
    tables[tool][canonical_params(params)] = std::move(payload);
}

void check_fixture_coverage(const SandboxState& state)
{
    for (const auto& tool: state.registry->tools())
        if (tool.kind == ToolKind::atomic && state.fixtures.tables.count(tool.name) == 0)
            throw Error("fixtures: no response table for atomic tool '" + tool.name + "'");
}

namespace
{

Observation error_observation(ErrorKind kind, Json payload)
{
    return { std::move(payload), true, kind };
}

Json not_found()
{
    return { { "status", "not_found" }, { "results", Json::array() } };
}

bool is_faulted(const SandboxState& state, const Action& action)
{
    return state.fault_table.count({ action.tool_name, canonical_params(action.params) }) > 0;
}

Json atomic_payload(const ToolSpec& tool, const Action& action, const SandboxState& state)
{
    const auto* payload = state.fixtures.lookup(tool.name, action.params);
    if (payload == nullptr)
        return not_found();
    if (state.validate_returns)
        for (const auto& field: tool.returns)
            if (!payload->contains(field))
                throw Error("fixtures: payload of '" + tool.name + "' lacks return field '" + field + "'");
    return *payload;
}

void emit_step(Trajectory& trajectory, const ActionSpec& spec, const Task& task, const SandboxState& state)
{
    auto step = materialize(spec, task, *state.registry);
    if (spec.type == ActionType::answer)
    {
        trajectory.steps.push_back(std::move(step));
        trajectory.final_answer = answer_text(task, spec.answer);
        return;
    }
    if (spec.type != ActionType::malformed)
        step.observation = execute(*step.action, state);
    trajectory.steps.push_back(std::move(step));
}

bool is_terminal(const ActionSpec& spec)
{
    return spec.type == ActionType::answer || spec.type == ActionType::malformed;
}

} // namespace

Observation execute(const Action& action, const SandboxState& state)
{
    const auto& registry = *state.registry;
    const auto* tool = registry.find(action.tool_name);
    if (tool == nullptr)
        return error_observation(ErrorKind::unknown_tool,
                                 { { "error", "unknown_tool" }, { "valid_tools", registry.sorted_names() } });

    auto const validation = validate_action(action, registry);
    if (!validation.ok)
    {
        auto mismatches = Json::array();
        for (const auto& m: validation.type_mismatches)
            mismatches.push_back({ { "param", m.param }, { "expected", m.expected }, { "got", m.got } });
        return error_observation(
            ErrorKind::schema_violation,
            { { "error", "schema_violation" }, { "missing", validation.missing_required }, { "mismatches", mismatches } });
    }

    if (is_faulted(state, action))
        return error_observation(ErrorKind::backend_fault, { { "error", "backend_fault" } });

    if (tool->kind == ToolKind::atomic)
        return { atomic_payload(*tool, action, state), false, std::nullopt };

    auto results = Json::array();
    auto partial = false;
    for (const auto& sub: expand_composite(tool->name, action.params, registry))
    {
        if (is_faulted(state, sub))
            return error_observation(ErrorKind::backend_fault, { { "error", "backend_fault" }, { "tool", sub.tool_name } });
        auto payload = atomic_payload(registry.at(sub.tool_name), sub, state);
        partial = partial || (payload.contains("status") && payload["status"] == "not_found");
        results.push_back({ { "tool", sub.tool_name }, { "payload", std::move(payload) } });
    }
    auto payload = Json { { "results", std::move(results) } };
    if (partial)
        payload["status"] = "partial";
    return { std::move(payload), false, std::nullopt };
}

void EpisodeConfig::validate() const
{
    if (max_rounds < 1)
        throw Error("max_rounds must be >= 1");
    if (!(temperature > 0.0))
        throw Error("temperature must be positive");
}

Trajectory run_episode(const Policy& policy, const Task& task, const SandboxState& state, const EpisodeConfig& cfg)
{
    cfg.validate();
    const auto& space = policy.space();
    auto trajectory = Trajectory { task.task_id, {}, std::nullopt };
    auto rng = Rng(cfg.seed);
    auto actions = std::size_t { 0 };
    for (int round = 0; round < cfg.max_rounds; ++round)
    {
        auto const features =
            state_features(task, actions, trajectory.steps.empty() ? nullptr : &trajectory.steps.back());
        auto choice = std::size_t { 0 };
        if (cfg.greedy)
        {
            choice = policy.greedy_action(features);
        }
        else
        {
            auto const pi = policy.probabilities(features, cfg.temperature);
            auto u = rng.uniform();
            choice = pi.size() - 1;
            for (std::size_t i = 0; i < pi.size(); ++i)
            {
                if (u < pi[i])
                {
                    choice = i;
                    break;
                }
                u -= pi[i];
            }
        }
        const auto& spec = space.at(choice);
        emit_step(trajectory, spec, task, state);
        if (is_terminal(spec))
            break;
        ++actions;
    }
    return trajectory;
}

Trajectory replay_actions(const ActionSpace& space, const Task& task, const SandboxState& state,
                          const std::vector<std::size_t>& actions)
{
    auto trajectory = Trajectory { task.task_id, {}, std::nullopt };
    for (auto index: actions)
    {
        const auto& spec = space.at(index);
        emit_step(trajectory, spec, task, state);
        if (is_terminal(spec))
            break;
    }
    return trajectory;
}

Trajectory oracle_trajectory(const Task& task, const SandboxState& state)
{
    auto trajectory = Trajectory { task.task_id, {}, std::nullopt };
    for (const auto& action: task.oracle_plan)
    {
        auto step = Step { "I need data from " + action.tool_name + " to answer this.", action, execute(action, state) };
        trajectory.steps.push_back(std::move(step));
    }
    auto const refuse = task.oracle.answer_kind == AnswerKind::refusal;
    trajectory.steps.push_back(
        { refuse ? "This request asks for something I am not allowed to state." : "I have enough information to reply.",
          std::nullopt, std::nullopt });
    trajectory.final_answer = answer_text(task, refuse ? AnswerVariant::refuse : AnswerVariant::factual);
    return trajectory;
}

void save_fixtures(const FixtureTables& fixtures, const std::string& dir)
{
    std::filesystem::create_directories(dir);
    for (const auto& [tool, table]: fixtures.tables)
    {
        auto rows = Json::array();
        for (const auto& [key, payload]: table)
            rows.push_back({ { "params", Json::parse(key) }, { "payload", payload } });
        write_file((std::filesystem::path(dir) / (tool + ".json")).string(), Json { { "tool", tool }, { "rows", rows } }.dump(1) + "\n");
    }
}

FixtureTables load_fixtures(const std::string& dir, const Registry& registry)
{
    auto fixtures = FixtureTables {};
    for (const auto& tool: registry.tools())
    {
        if (tool.kind != ToolKind::atomic)
            continue;
        auto const path = (std::filesystem::path(dir) / (tool.name + ".json")).string();
        if (!std::filesystem::exists(path))
            throw Error("fixtures: missing response table " + path);
        auto j = Json::parse(read_file(path), nullptr, false);
        if (j.is_discarded() || !j.contains("rows"))
            throw Error("fixtures: " + path + " is not a response table");
        auto& table = fixtures.tables[tool.name];
        for (const auto& row: j["rows"])
        {
            auto params = ParamMap {};
            for (const auto& [k, v]: row.at("params").items())
                params.emplace(k, v);
            table.emplace(canonical_params(params), row.at("payload"));
        }
    }
    return fixtures;
}

} // namespace agentlab
