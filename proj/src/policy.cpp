// SPDX-License-Identifier: Apache-2.0
#include "agentlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace agentlab
{

ActionSpace::ActionSpace(std::shared_ptr<const Registry> registry): _registry(std::move(registry))
{
    for (const auto& tool: _registry->tools())
    {
        _tool_base.emplace(tool.name, _actions.size());
        for (auto tmpl: { ParamTemplate::exact, ParamTemplate::wrong_value, ParamTemplate::bad_format })
        {
            auto spec = ActionSpec {};
            spec.type = ActionType::call;
            spec.tool = tool.name;
            spec.tmpl = tmpl;
            spec.name = "call:" + tool.name + ":" + std::string(to_string(tmpl));
            _actions.push_back(std::move(spec));
        }
    }
    for (auto name: hallucinated_names)
    {
        auto spec = ActionSpec {};
        spec.type = ActionType::hallucinate;
        spec.tool = std::string(name);
        spec.name = "hallucinate:" + spec.tool;
        _actions.push_back(std::move(spec));
    }
    for (auto v: { AnswerVariant::factual, AnswerVariant::refuse, AnswerVariant::speculate, AnswerVariant::promote })
    {
        auto spec = ActionSpec {};
        spec.type = ActionType::answer;
        spec.answer = v;
        spec.name = "answer:" + std::string(to_string(v));
        _actions.push_back(std::move(spec));
    }
    auto malformed = ActionSpec {};
    malformed.type = ActionType::malformed;
    malformed.name = "malformed";
    _actions.push_back(std::move(malformed));
}

std::size_t ActionSpace::call_index(std::string_view tool, ParamTemplate tmpl) const
{
    auto it = _tool_base.find(tool);
    if (it == _tool_base.end())
        throw Error("action space has no tool '" + std::string(tool) + "'");
    return it->second + static_cast<std::size_t>(tmpl);
}

std::size_t ActionSpace::hallucinate_index(std::size_t which) const
{
    return _registry->size() * param_template_count + which;
}

std::size_t ActionSpace::answer_index(AnswerVariant variant) const
{
    return _registry->size() * param_template_count + hallucinated_names.size() + static_cast<std::size_t>(variant);
}

std::vector<std::string> ActionSpace::names() const
{
    auto out = std::vector<std::string> {};
    for (const auto& a: _actions)
        out.push_back(a.name);
    return out;
}

std::string observation_status(const Observation& observation)
{
    if (observation.is_error)
        return std::string(to_string(observation.error_kind.value_or(ErrorKind::backend_fault)));
    const auto& payload = observation.payload;
    if (payload.is_object() && payload.contains("status"))
    {
        auto const& status = payload["status"];
        if (status == "not_found" || status == "partial")
            return "empty";
    }
    return "ok";
}

Features state_features(const Task& task, std::size_t step_index, const Step* previous)
{
    auto last = std::string("start");
    auto status = std::string("start");
    if (previous != nullptr && previous->action)
    {
        status = previous->observation ? observation_status(*previous->observation) : "none";
        last = previous->action->tool_name + ":" + status;
        if (previous->observation && previous->observation->payload.is_object())
            if (auto it = previous->observation->payload.find("signal"); it != previous->observation->payload.end())
                last += ":" + it->get<std::string>();
    }
    return {
        "f|" + task.intent + "|" + std::to_string(step_index) + "|" + last,
        "c|" + std::string(task.compliance_sensitive ? "1" : "0") + "|" + status,
    };
}

Step materialize(const ActionSpec& action, const Task& task, const Registry& registry)
{
    auto step = Step {};
    switch (action.type)
    {
        case ActionType::call:
            step.thought = "I need data from " + action.tool + " to answer this.";
            step.action = Action { action.tool, candidate_params(task, registry.at(action.tool), action.tmpl) };
            break;
        case ActionType::hallucinate: {
            step.thought = "I need data from " + action.tool + " to answer this.";
            auto params = ParamMap {};
            if (auto it = task.context.find("client_id"); it != task.context.end())
                params.emplace("client_id", it->second);
            step.action = Action { action.tool, std::move(params) };
            break;
        }
        case ActionType::answer:
            step.thought = action.answer == AnswerVariant::refuse
                               ? "This request asks for something I am not allowed to state."
                               : "I have enough information to reply.";
            break;
        case ActionType::malformed: step.action = Action { std::string(malformed_tool_name), {} }; break;
    }
    return step;
}

std::vector<Decision> decode_decisions(const Trajectory& trajectory, const Task& task, const ActionSpace& space)
{
    auto decisions = std::vector<Decision> {};
    const Step* previous = nullptr;
    auto action_count = std::size_t { 0 };
    for (std::size_t i = 0; i < trajectory.steps.size(); ++i)
    {
        const auto& step = trajectory.steps[i];
        auto decision = Decision { state_features(task, action_count, previous), 0 };
        if (step.action)
        {
            const auto& a = *step.action;
            if (a.tool_name == malformed_tool_name)
            {
                decision.action = space.malformed_index();
            }
            else if (auto h = std::find(hallucinated_names.begin(), hallucinated_names.end(), a.tool_name);
                     h != hallucinated_names.end())
            {
                decision.action = space.hallucinate_index(static_cast<std::size_t>(h - hallucinated_names.begin()));
            }
            else if (const auto* tool = space.registry().find(a.tool_name))
            {
                auto found = false;
                for (auto tmpl: { ParamTemplate::exact, ParamTemplate::wrong_value, ParamTemplate::bad_format })
                    if (candidate_params(task, *tool, tmpl) == a.params)
                    {
                        decision.action = space.call_index(tool->name, tmpl);
                        found = true;
                        break;
                    }
                if (!found)
                    throw Error("step " + std::to_string(i) + " of " + trajectory.task_id + ": parameters of '" +
                                a.tool_name + "' match no template");
            }
            else
            {
                throw Error("step " + std::to_string(i) + " of " + trajectory.task_id + ": tool '" + a.tool_name +
                            "' is outside the action space");
            }
            ++action_count;
        }
        else
        {
            if (i + 1 != trajectory.steps.size() || !trajectory.final_answer)
                throw Error("step " + std::to_string(i) + " of " + trajectory.task_id + ": thought-only step is not final");
            auto variant = classify_answer(task, *trajectory.final_answer);
            if (!variant)
                throw Error(trajectory.task_id + ": final answer is outside the action space");
            decision.action = space.answer_index(*variant);
        }
        decisions.push_back(std::move(decision));
        previous = &step;
    }
    return decisions;
}

void add_scaled(Gradient& into, const Gradient& g, double scale)
{
    for (const auto& [key, values]: g)
    {
        auto& row = into[key];
        if (row.empty())
            row.assign(values.size(), 0.0);
        for (std::size_t i = 0; i < values.size(); ++i)
            row[i] += scale * values[i];
    }
}

double dot(const Gradient& a, const Gradient& b)
{
    auto total = 0.0;
    for (const auto& [key, values]: a)
        if (auto it = b.find(key); it != b.end())
            for (std::size_t i = 0; i < values.size(); ++i)
                total += values[i] * it->second[i];
    return total;
}

Policy::Policy(std::shared_ptr<const ActionSpace> space): _space(std::move(space)) {}

std::vector<double> Policy::logits(const Features& features) const
{
    auto z = std::vector<double>(_space->size(), 0.0);
    for (const auto& key: features)
        if (auto it = _table.find(key); it != _table.end())
            for (std::size_t i = 0; i < z.size(); ++i)
                z[i] += it->second[i];
    return z;
}

std::vector<double> Policy::probabilities(const Features& features, double temperature) const
{
    auto z = logits(features);
    auto const top = *std::max_element(z.begin(), z.end());
    auto total = 0.0;
    for (auto& v: z)
    {
        v = std::exp((v - top) / temperature);
        total += v;
    }
    for (auto& v: z)
        v /= total;
    return z;
}

std::size_t Policy::greedy_action(const Features& features) const
{
    auto z = logits(features);
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

std::vector<double>& Policy::row(const std::string& key)
{
    auto& r = _table[key];
    if (r.empty())
        r.assign(_space->size(), 0.0);
    return r;
}

void Policy::apply(const Gradient& g, double scale)
{
    for (const auto& [key, values]: g)
    {
        auto& r = row(key);
        for (std::size_t i = 0; i < r.size(); ++i)
            r[i] += scale * values[i];
    }
}

namespace
{

double log_softmax_at(const std::vector<double>& z, std::size_t index, double temperature)
{
    auto const top = *std::max_element(z.begin(), z.end());
    auto total = 0.0;
    for (auto v: z)
        total += std::exp((v - top) / temperature);
    return (z[index] - top) / temperature - std::log(total);
}

} // namespace

double logprob_decisions(const Policy& policy, const std::vector<Decision>& decisions, double temperature)
{
    auto total = 0.0;
    for (const auto& d: decisions)
        total += log_softmax_at(policy.logits(d.features), d.action, temperature);
    return total;
}

Gradient grad_logprob_decisions(const Policy& policy, const std::vector<Decision>& decisions, double temperature)
{
    auto g = Gradient {};
    auto const n = policy.space().size();
    for (const auto& d: decisions)
    {
        auto pi = policy.probabilities(d.features, temperature);
        for (const auto& key: d.features)
        {
            auto& row = g[key];
            if (row.empty())
                row.assign(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                row[i] += ((i == d.action ? 1.0 : 0.0) - pi[i]) / temperature;
        }
    }
    return g;
}

double logprob_trajectory(const Policy& policy, const Trajectory& trajectory, const Task& task, double temperature)
{
    return logprob_decisions(policy, decode_decisions(trajectory, task, policy.space()), temperature);
}

Gradient grad_logprob(const Policy& policy, const Trajectory& trajectory, const Task& task, double temperature)
{
    return grad_logprob_decisions(policy, decode_decisions(trajectory, task, policy.space()), temperature);
}

Policy sft_fit(const Policy& initial, const std::vector<Demo>& demos, int epochs, double lr, std::uint64_t seed)
{
    auto policy = initial;
    auto decoded = std::vector<std::vector<Decision>> {};
    decoded.reserve(demos.size());
    for (const auto& demo: demos)
        decoded.push_back(decode_decisions(demo.trajectory, *demo.task, policy.space()));

    auto order = std::vector<std::size_t>(demos.size());
    auto rng = Rng(seed);
    for (int epoch = 0; epoch < epochs; ++epoch)
    {
        std::iota(order.begin(), order.end(), std::size_t { 0 });
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
        for (auto index: order)
            policy.apply(grad_logprob_decisions(policy, decoded[index], 1.0), lr);
    }
    return policy;
}

Policy oracle_policy(std::shared_ptr<const ActionSpace> space, const std::vector<Demo>& oracle_demos, double margin)
{
    auto policy = Policy(space);
    for (const auto& demo: oracle_demos)
        for (const auto& d: decode_decisions(demo.trajectory, *demo.task, *space))
        {
            auto& row = policy.row(d.features[0]);
            if (row[d.action] < margin)
                row[d.action] = margin;
        }
    return policy;
}

std::string serialize_policy(const Policy& policy)
{
    auto rows = Json::object();
    for (const auto& [key, values]: policy.table())
        rows[key] = values;
    auto j = Json {
        { "format", "agentlab-policy" },
        { "version", 1 },
        { "actions", policy.space().names() },
        { "rows", rows },
    };
    return j.dump() + "\n";
}

Policy parse_policy(std::string_view text, std::shared_ptr<const ActionSpace> space)
{
    auto j = Json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw Error("policy checkpoint: not valid JSON");
    if (j.value("format", std::string {}) != "agentlab-policy" || j.value("version", 0) != 1)
        throw Error("policy checkpoint: unsupported format or version");
    if (j.at("actions").get<std::vector<std::string>>() != space->names())
        throw Error("policy checkpoint: action list does not match the registry");
    auto policy = Policy(space);
    for (const auto& [key, values]: j.at("rows").items())
    {
        auto v = values.get<std::vector<double>>();
        if (v.size() != space->size())
            throw Error("policy checkpoint: row '" + key + "' has the wrong length");
        policy.row(key) = std::move(v);
    }
    return policy;
}

} // namespace agentlab
