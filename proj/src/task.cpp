// SPDX-License-Identifier: Apache-2.0
#include "agentlab/task.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace agentlab
{

std::string_view to_string(Archetype archetype)
{
    switch (archetype)
    {
        case Archetype::single_tool: return "single_tool";
        case Archetype::sequential: return "sequential";
        case Archetype::conditional: return "conditional";
        case Archetype::compliance_reject: return "compliance_reject";
    }
    return "single_tool";
}

std::string_view to_string(Level level)
{
    switch (level)
    {
        case Level::L1: return "L1";
        case Level::L2: return "L2";
        case Level::L3: return "L3";
        case Level::L4: return "L4";
    }
    return "L1";
}

Archetype archetype_from_string(std::string_view name)
{
    for (auto a: { Archetype::single_tool, Archetype::sequential, Archetype::conditional, Archetype::compliance_reject })
        if (to_string(a) == name)
            return a;
    throw Error("unknown archetype '" + std::string(name) + "'");
}

Level level_from_string(std::string_view name)
{
    for (auto l: { Level::L1, Level::L2, Level::L3, Level::L4 })
        if (to_string(l) == name)
            return l;
    throw Error("unknown level '" + std::string(name) + "'");
}

Level level_of(Archetype archetype)
{
    switch (archetype)
    {
        case Archetype::single_tool: return Level::L1;
        case Archetype::sequential: return Level::L2;
        case Archetype::conditional: return Level::L3;
        case Archetype::compliance_reject: return Level::L4;
    }
    return Level::L1;
}

std::string_view to_string(ParamTemplate tmpl)
{
    switch (tmpl)
    {
        case ParamTemplate::exact: return "exact";
        case ParamTemplate::wrong_value: return "wrong_value";
        case ParamTemplate::bad_format: return "bad_format";
    }
    return "exact";
}

std::string_view to_string(AnswerVariant variant)
{
    switch (variant)
    {
        case AnswerVariant::factual: return "factual";
        case AnswerVariant::refuse: return "refuse";
        case AnswerVariant::speculate: return "speculate";
        case AnswerVariant::promote: return "promote";
    }
    return "factual";
}

namespace
{

Json action_to_json(const Action& action)
{
    auto params = Json::object();
    for (const auto& [k, v]: action.params)
        params[k] = v;
    return Json { { "tool_name", action.tool_name }, { "params", params } };
}

Action action_from_json(const Json& j)
{
    auto action = Action { j.at("tool_name").get<std::string>(), {} };
    for (const auto& [k, v]: j.at("params").items())
        action.params.emplace(k, v);
    return action;
}

Json params_to_json(const ParamMap& params)
{
    auto j = Json::object();
    for (const auto& [k, v]: params)
        j[k] = v;
    return j;
}

ParamMap params_from_json(const Json& j)
{
    auto params = ParamMap {};
    for (const auto& [k, v]: j.items())
        params.emplace(k, v);
    return params;
}

std::string lowercase(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Schema-valid substitute that no fixture table holds.
Json wrong_value_for(const ParamSpec& spec, const Json& value)
{
    if (spec.type == ParamType::enumeration)
    {
        auto const& values = spec.enum_values;
        auto it = std::find(values.begin(), values.end(), value.get<std::string>());
        auto const index = it == values.end() ? 0 : static_cast<std::size_t>(it - values.begin());
        return values[(index + 1) % values.size()];
    }
    if (spec.type == ParamType::date)
    {
        auto s = value.get<std::string>();
        auto const year = std::stoi(s.substr(0, 4));
        return std::to_string(year - 1) + s.substr(4);
    }
    if (spec.type == ParamType::integer)
        return value.get<std::int64_t>() + 60;
    if (spec.type == ParamType::string)
    {
        auto s = value.get<std::string>();
        if (spec.pattern && s.size() >= 2)
        {
            s[1] = '9';
            return s;
        }
        return s == "sports" ? std::string("weather") : std::string("sports");
    }
    return value;
}

// Value that fails the parameter's schema check.
Json bad_format_for(const ParamSpec& spec, const Json& value)
{
    switch (spec.type)
    {
        case ParamType::date: {
            auto s = value.get<std::string>();
            return s.substr(8, 2) + "/" + s.substr(5, 2) + "/" + s.substr(0, 4);
        }
        case ParamType::enumeration: {
            auto s = value.get<std::string>();
            if (auto lower = lowercase(s); lower != s)
                return lower;
            return s + "s";
        }
        case ParamType::integer:
        case ParamType::number: return value.dump();
        case ParamType::boolean: return value.dump();
        case ParamType::string: {
            if (spec.pattern)
            {
                auto s = lowercase(value.get<std::string>());
                return s.substr(0, 1) + "-" + s.substr(1);
            }
            return 0;
        }
    }
    return value;
}

constexpr auto refusal =
    "I can't help with that request because it asks for a promise or a personal pick that compliance rules do "
    "not allow. Please refer the client to the approved product disclosures.";

constexpr auto speculate_suffix =
    " The client may be losing confidence in the market, so keep monitoring their emotional state.";

constexpr auto promote_suffix = " I suggest buying more of the top holding; it is a sure winner.";

} // namespace

std::string_view refusal_text()
{
    return refusal;
}

bool is_refusal(std::string_view text)
{
    return text == refusal;
}

std::string answer_text(const Task& task, AnswerVariant variant)
{
    switch (variant)
    {
        case AnswerVariant::factual: return task.facts;
        case AnswerVariant::refuse: return refusal;
        case AnswerVariant::speculate: return task.facts + speculate_suffix;
        case AnswerVariant::promote: return task.facts + promote_suffix;
    }
    return task.facts;
}

std::optional<AnswerVariant> classify_answer(const Task& task, std::string_view text)
{
    for (auto v: { AnswerVariant::factual, AnswerVariant::refuse, AnswerVariant::speculate, AnswerVariant::promote })
        if (answer_text(task, v) == text)
            return v;
    return std::nullopt;
}

ParamMap candidate_params(const Task& task, const ToolSpec& tool, ParamTemplate tmpl)
{
    auto params = ParamMap {};
    auto const truth = task.oracle.param_truth.find(tool.name);
    for (const auto& spec: tool.parameters)
    {
        if (truth != task.oracle.param_truth.end())
            if (auto it = truth->second.find(spec.name); it != truth->second.end())
            {
                params.emplace(spec.name, it->second);
                continue;
            }
        if (!spec.required)
            continue;
        if (auto it = task.context.find(spec.name); it != task.context.end())
            params.emplace(spec.name, it->second);
        else if (spec.type == ParamType::enumeration)
            params.emplace(spec.name, spec.enum_values.front());
        else if (spec.type == ParamType::integer)
            params.emplace(spec.name, 30);
        else if (spec.type == ParamType::date)
            params.emplace(spec.name, "2026-01-05");
        else
            params.emplace(spec.name, "markets");
    }
    if (tmpl == ParamTemplate::exact || tool.parameters.empty())
        return params;

    if (tmpl == ParamTemplate::wrong_value)
    {
        const ParamSpec* target = nullptr;
        for (const auto& spec: tool.parameters)
            if (spec.required)
                target = &spec;
        if (target == nullptr)
            target = &tool.parameters.front();
        if (auto it = params.find(target->name); it != params.end())
            it->second = wrong_value_for(*target, it->second);
        return params;
    }

    const auto& first = tool.parameters.front();
    if (auto it = params.find(first.name); it != params.end())
        it->second = bad_format_for(first, it->second);
    return params;
}

Json task_to_json(const Task& task)
{
    auto j = Json::object();
    j["task_id"] = task.task_id;
    j["intent"] = task.intent;
    j["archetype"] = to_string(task.archetype);
    j["level"] = to_string(task.level);
    j["query"] = task.query;
    j["compliance_sensitive"] = task.compliance_sensitive;
    j["context"] = params_to_json(task.context);

    auto truth = Json::object();
    for (const auto& [tool, params]: task.oracle.param_truth)
        truth[tool] = params_to_json(params);
    j["oracle"] = {
        { "required_tools", task.oracle.required_tools },
        { "optimal_length", task.oracle.optimal_length },
        { "param_truth", truth },
        { "answer_kind", task.oracle.answer_kind == AnswerKind::refusal ? "refusal" : "factual" },
    };

    auto plan = Json::array();
    for (const auto& a: task.oracle_plan)
        plan.push_back(action_to_json(a));
    j["oracle_plan"] = plan;
    j["facts"] = task.facts;

    if (task.condition)
    {
        auto branches = Json::object();
        for (const auto& [signal, action]: task.condition->branches)
            branches[signal] = action_to_json(action);
        j["condition"] = {
            { "source_tool", task.condition->source_tool },
            { "branches", branches },
            { "observed_signal", task.condition->observed_signal },
        };
    }
    else
    {
        j["condition"] = nullptr;
    }
    return j;
}

Task task_from_json(const Json& j)
{
    auto task = Task {};
    try
    {
        task.task_id = j.at("task_id").get<std::string>();
        task.intent = j.at("intent").get<std::string>();
        task.archetype = archetype_from_string(j.at("archetype").get<std::string>());
        task.level = level_from_string(j.at("level").get<std::string>());
        if (task.level != level_of(task.archetype))
            throw Error("task " + task.task_id + ": level does not match archetype");
        task.query = j.at("query").get<std::string>();
        task.compliance_sensitive = j.at("compliance_sensitive").get<bool>();
        task.context = params_from_json(j.at("context"));

        const auto& oracle = j.at("oracle");
        task.oracle.required_tools = oracle.at("required_tools").get<std::set<std::string>>();
        task.oracle.optimal_length = oracle.at("optimal_length").get<std::size_t>();
        if (task.oracle.optimal_length < 1)
            throw Error("task " + task.task_id + ": optimal_length must be >= 1");
        for (const auto& [tool, params]: oracle.at("param_truth").items())
            task.oracle.param_truth.emplace(tool, params_from_json(params));
        auto const kind = oracle.at("answer_kind").get<std::string>();
        if (kind == "refusal")
            task.oracle.answer_kind = AnswerKind::refusal;
        else if (kind == "factual")
            task.oracle.answer_kind = AnswerKind::factual;
        else
            throw Error("task " + task.task_id + ": unknown answer_kind '" + kind + "'");

        for (const auto& a: j.at("oracle_plan"))
            task.oracle_plan.push_back(action_from_json(a));
        task.facts = j.at("facts").get<std::string>();

        if (const auto& c = j.at("condition"); !c.is_null())
        {
            auto rule = ConditionalRule {};
            rule.source_tool = c.at("source_tool").get<std::string>();
            for (const auto& [signal, action]: c.at("branches").items())
                rule.branches.emplace(signal, action_from_json(action));
            rule.observed_signal = c.at("observed_signal").get<std::string>();
            task.condition = std::move(rule);
        }
    }
    catch (const Json::exception& e)
    {
        throw Error(std::string("task record: ") + e.what());
    }
    return task;
}

std::string serialize_taskset(const TaskSet& tasks)
{
    auto out = std::string {};
    for (const auto& task: tasks)
    {
        out += task_to_json(task).dump();
        out += '\n';
    }
    return out;
}

TaskSet parse_taskset(std::string_view text)
{
    auto tasks = TaskSet {};
    auto in = std::istringstream(std::string(text));
    auto line = std::string {};
    auto number = 0;
    while (std::getline(in, line))
    {
        ++number;
        if (line.empty())
            continue;
        auto j = Json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw Error("taskset line " + std::to_string(number) + ": not valid JSON");
        tasks.push_back(task_from_json(j));
    }
    return tasks;
}

TaskSet load_taskset(const std::string& path)
{
    return parse_taskset(read_file(path));
}

const Task* find_task(const TaskSet& tasks, std::string_view task_id)
{
    for (const auto& task: tasks)
        if (task.task_id == task_id)
            return &task;
    return nullptr;
}

} // namespace agentlab
