// SPDX-License-Identifier: Apache-2.0
#include "agentlab/trajectory.hpp"

#include "agentlab/toolspec.hpp"

#include <algorithm>
#include <initializer_list>

namespace agentlab
{

std::string_view to_string(ErrorKind kind)
{
    switch (kind)
    {
        case ErrorKind::unknown_tool: return "unknown_tool";
        case ErrorKind::schema_violation: return "schema_violation";
        case ErrorKind::backend_fault: return "backend_fault";
    }
    return "unknown_tool";
}

std::optional<ErrorKind> error_kind_from_string(std::string_view name)
{
    if (name == "unknown_tool")
        return ErrorKind::unknown_tool;
    if (name == "schema_violation")
        return ErrorKind::schema_violation;
    if (name == "backend_fault")
        return ErrorKind::backend_fault;
    return std::nullopt;
}

std::size_t Trajectory::tool_call_count() const
{
    return static_cast<std::size_t>(
        std::count_if(steps.begin(), steps.end(), [](const Step& s) { return s.action.has_value(); }));
}

std::vector<std::string_view> response_texts(const Trajectory& trajectory)
{
    auto texts = std::vector<std::string_view> {};
    for (const auto& step: trajectory.steps)
        texts.emplace_back(step.thought);
    if (trajectory.final_answer)
        texts.emplace_back(*trajectory.final_answer);
    return texts;
}

namespace
{

bool only_keys(const Json& object, std::initializer_list<std::string_view> allowed)
{
    for (const auto& [key, _]: object.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            return false;
    return true;
}

bool is_scalar(const Json& v)
{
    return v.is_string() || v.is_number() || v.is_boolean();
}

bool is_param_value(const Json& v)
{
    if (is_scalar(v))
        return true;
    return v.is_array() && std::all_of(v.begin(), v.end(), is_scalar);
}

// Shape rules shared by parsing and check_format. Returns an empty string
// when the step sequence is well formed.
std::string shape_problem(const Trajectory& t)
{
    if (t.steps.empty())
        return {};
    for (std::size_t i = 0; i < t.steps.size(); ++i)
    {
        const auto& step = t.steps[i];
        auto const last = i + 1 == t.steps.size();
        if (step.observation && !step.action)
            return "step " + std::to_string(i) + ": observation without action";
        if (step.observation && step.observation->is_error != step.observation->error_kind.has_value())
            return "step " + std::to_string(i) + ": error_kind must be present iff is_error";
        if (!last && !(step.action && step.observation))
            return "step " + std::to_string(i) + ": only the final step may omit action or observation";
        if (last && !step.action && !t.final_answer)
            return "final thought-only step requires a final_answer";
    }
    if (t.final_answer && t.steps.back().action)
        return "final_answer must follow a thought-only step";
    return {};
}

std::string thought_problem(const Trajectory& t)
{
    if (t.steps.empty())
        return "trajectory has no steps";
    for (std::size_t i = 0; i < t.steps.size(); ++i)
        if (t.steps[i].thought.empty())
            return "step " + std::to_string(i) + ": missing thought";
    return {};
}

FormatReport fail(bool FormatReport::*flag, std::string detail)
{
    auto report = FormatReport {};
    report.*flag = false;
    report.passed = false;
    report.detail = std::move(detail);
    return report;
}

std::optional<std::string> read_step(const Json& j, std::size_t index, Step& out)
{
    auto const where = "step " + std::to_string(index);
    if (!j.is_object() || !only_keys(j, { "thought", "action", "observation" }))
        return where + ": unexpected field";
    if (j.contains("thought"))
    {
        if (!j["thought"].is_string())
            return where + ": thought must be text";
        out.thought = j["thought"].get<std::string>();
    }
    if (j.contains("action") && !j["action"].is_null())
    {
        const auto& a = j["action"];
        if (!a.is_object() || !only_keys(a, { "tool_name", "params" }) || !a.contains("tool_name")
            || !a["tool_name"].is_string())
            return where + ": bad action";
        auto action = Action { a["tool_name"].get<std::string>(), {} };
        if (a.contains("params"))
        {
            if (!a["params"].is_object())
                return where + ": params must be an object";
            for (const auto& [key, value]: a["params"].items())
            {
                if (!is_param_value(value))
                    return where + ": param " + key + " is not scalar or flat list";
                action.params.emplace(key, value);
            }
        }
        out.action = std::move(action);
    }
    if (j.contains("observation") && !j["observation"].is_null())
    {
        const auto& o = j["observation"];
        if (!o.is_object() || !only_keys(o, { "payload", "is_error", "error_kind" }) || !o.contains("payload")
            || !o.contains("is_error") || !o["is_error"].is_boolean())
            return where + ": bad observation";
        auto obs = Observation { o["payload"], o["is_error"].get<bool>(), std::nullopt };
        if (o.contains("error_kind") && !o["error_kind"].is_null())
        {
            if (!o["error_kind"].is_string())
                return where + ": error_kind must be text";
            obs.error_kind = error_kind_from_string(o["error_kind"].get<std::string>());
            if (!obs.error_kind)
                return where + ": unknown error_kind";
        }
        out.observation = std::move(obs);
    }
    return std::nullopt;
}

} // namespace

ParseOutcome parse_trajectory(std::string_view raw)
{
    auto j = Json::parse(raw, nullptr, false);
    if (j.is_discarded())
        return { std::nullopt, fail(&FormatReport::parseable, "not valid JSON") };

    if (!j.is_object() || !only_keys(j, { "task_id", "steps", "final_answer" }))
        return { std::nullopt, fail(&FormatReport::fields_valid, "unexpected top-level field") };
    if (!j.contains("task_id") || !j["task_id"].is_string() || !j.contains("steps") || !j["steps"].is_array())
        return { std::nullopt, fail(&FormatReport::fields_valid, "task_id and steps are required") };

    auto t = Trajectory {};
    t.task_id = j["task_id"].get<std::string>();
    if (j.contains("final_answer") && !j["final_answer"].is_null())
    {
        if (!j["final_answer"].is_string())
            return { std::nullopt, fail(&FormatReport::fields_valid, "final_answer must be text") };
        t.final_answer = j["final_answer"].get<std::string>();
    }
    for (std::size_t i = 0; i < j["steps"].size(); ++i)
    {
        auto step = Step {};
        if (auto problem = read_step(j["steps"][i], i, step))
            return { std::nullopt, fail(&FormatReport::fields_valid, *problem) };
        t.steps.push_back(std::move(step));
    }
    if (auto problem = shape_problem(t); !problem.empty())
        return { std::nullopt, fail(&FormatReport::fields_valid, problem) };
    if (auto problem = thought_problem(t); !problem.empty())
        return { std::nullopt, fail(&FormatReport::thought_present, problem) };

    return { std::move(t), FormatReport {} };
}

FormatReport check_format(const Trajectory& trajectory, const Registry& registry)
{
    auto report = FormatReport {};
    auto note = [&](std::string detail) {
        if (report.detail.empty())
            report.detail = std::move(detail);
    };
    if (auto problem = shape_problem(trajectory); !problem.empty())
    {
        report.fields_valid = false;
        note(problem);
    }
    if (auto problem = thought_problem(trajectory); !problem.empty())
    {
        report.thought_present = false;
        note(problem);
    }
    for (const auto& step: trajectory.steps)
    {
        if (step.action && !registry.contains(step.action->tool_name))
        {
            report.tool_names_spelled = false;
            note("unregistered tool name: " + step.action->tool_name);
            break;
        }
    }
    report.passed = report.parseable && report.fields_valid && report.thought_present && report.tool_names_spelled;
    return report;
}

std::string serialize_trajectory(const Trajectory& t)
{
    auto out = std::string {};
    out += "{\"task_id\":";
    out += Json(t.task_id).dump();
    out += ",\"steps\":[";
    for (std::size_t i = 0; i < t.steps.size(); ++i)
    {
        const auto& step = t.steps[i];
        if (i > 0)
            out += ',';
        out += "{\"thought\":";
        out += Json(step.thought).dump();
        if (step.action)
        {
            out += ",\"action\":{\"tool_name\":";
            out += Json(step.action->tool_name).dump();
            out += ",\"params\":";
            out += Json(step.action->params).dump();
            out += '}';
        }
        if (step.observation)
        {
            out += ",\"observation\":{\"payload\":";
            out += step.observation->payload.dump();
            out += ",\"is_error\":";
            out += step.observation->is_error ? "true" : "false";
            out += ",\"error_kind\":";
            out += step.observation->error_kind ? Json(std::string(to_string(*step.observation->error_kind))).dump()
                                                : std::string("null");
            out += '}';
        }
        out += '}';
    }
    out += "],\"final_answer\":";
    out += t.final_answer ? Json(*t.final_answer).dump() : std::string("null");
    out += '}';
    return out;
}

} // namespace agentlab
