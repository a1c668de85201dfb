// SPDX-License-Identifier: Apache-2.0
#include "agentlab/toolspec.hpp"

#include <algorithm>
#include <set>

namespace agentlab
{

std::string_view to_string(ParamType type)
{
    switch (type)
    {
        case ParamType::string: return "string";
        case ParamType::integer: return "integer";
        case ParamType::number: return "number";
        case ParamType::boolean: return "boolean";
        case ParamType::enumeration: return "enum";
        case ParamType::date: return "date";
    }
    return "string";
}

namespace
{

ParamType param_type_from(const std::string& name, const std::string& where)
{
    if (name == "string")
        return ParamType::string;
    if (name == "integer")
        return ParamType::integer;
    if (name == "number")
        return ParamType::number;
    if (name == "boolean")
        return ParamType::boolean;
    if (name == "enum")
        return ParamType::enumeration;
    if (name == "date")
        return ParamType::date;
    throw Error(where + ": unknown parameter type '" + name + "'");
}

std::string json_type_name(const Json& v)
{
    if (v.is_string())
        return "string";
    if (v.is_number_integer())
        return "integer";
    if (v.is_number())
        return "number";
    if (v.is_boolean())
        return "boolean";
    if (v.is_array())
        return "list";
    if (v.is_null())
        return "null";
    return "object";
}

constexpr auto date_pattern = "^[0-9]{4}-(0[1-9]|1[0-2])-(0[1-9]|[12][0-9]|3[01])$";

ParamSpec read_param(const Json& j, const std::string& where)
{
    auto p = ParamSpec {};
    p.name = j.at("name").get<std::string>();
    auto const here = where + "." + p.name;
    p.type = param_type_from(j.at("type").get<std::string>(), here);
    p.required = j.value("required", false);
    p.description = j.value("description", std::string {});
    if (j.contains("pattern"))
        p.pattern = j["pattern"].get<std::string>();
    if (j.contains("enum"))
        p.enum_values = j["enum"].get<std::vector<std::string>>();
    if (p.type == ParamType::enumeration && p.enum_values.empty())
        throw Error(here + ": enum parameter needs values");
    auto regex_text = p.pattern ? *p.pattern : std::string {};
    if (p.type == ParamType::date && regex_text.empty())
        regex_text = date_pattern;
    if (!regex_text.empty())
    {
        try
        {
            p.matcher = std::make_shared<const std::regex>(regex_text, std::regex::ECMAScript);
        }
        catch (const std::regex_error&)
        {
            throw Error(here + ": pattern does not compile");
        }
    }
    return p;
}

// Checks one value against its declared parameter. Empty when it conforms.
std::optional<TypeMismatch> check_value(const ParamSpec& spec, const Json& value)
{
    auto mismatch = [&](std::string got) {
        return TypeMismatch { spec.name, std::string(to_string(spec.type)), std::move(got) };
    };
    switch (spec.type)
    {
        case ParamType::integer:
            if (!value.is_number_integer())
                return mismatch(json_type_name(value));
            return std::nullopt;
        case ParamType::number:
            if (!value.is_number())
                return mismatch(json_type_name(value));
            return std::nullopt;
        case ParamType::boolean:
            if (!value.is_boolean())
                return mismatch(json_type_name(value));
            return std::nullopt;
        case ParamType::enumeration: {
            if (!value.is_string())
                return mismatch(json_type_name(value));
            auto s = value.get<std::string>();
            if (std::find(spec.enum_values.begin(), spec.enum_values.end(), s) == spec.enum_values.end())
                return mismatch("string(not in enum)");
            return std::nullopt;
        }
        case ParamType::string:
        case ParamType::date: {
            if (!value.is_string())
                return mismatch(json_type_name(value));
            if (spec.matcher && !std::regex_match(value.get<std::string>(), *spec.matcher))
                return mismatch("string(pattern mismatch)");
            return std::nullopt;
        }
    }
    return std::nullopt;
}

} // namespace

const ParamSpec* ToolSpec::param(std::string_view param_name) const
{
    for (const auto& p: parameters)
        if (p.name == param_name)
            return &p;
    return nullptr;
}

Registry Registry::from_json(const Json& document)
{
    auto registry = Registry {};
    if (!document.is_object() || !document.contains("tools") || !document["tools"].is_array())
        throw Error("registry: expected an object with a 'tools' array");

    for (const auto& entry: document["tools"])
    {
        auto tool = ToolSpec {};
        tool.name = entry.at("name").get<std::string>();
        auto const where = "registry tool '" + tool.name + "'";
        if (registry._index.count(tool.name) > 0)
            throw Error("registry: duplicate tool name '" + tool.name + "'");
        tool.description = entry.value("description", std::string {});
        auto const kind = entry.value("kind", std::string("atomic"));
        if (kind == "atomic")
            tool.kind = ToolKind::atomic;
        else if (kind == "composite")
            tool.kind = ToolKind::composite;
        else
            throw Error(where + ": unknown kind '" + kind + "'");

        auto seen = std::set<std::string> {};
        for (const auto& p: entry.value("parameters", Json::array()))
        {
            auto spec = read_param(p, where);
            if (!seen.insert(spec.name).second)
                throw Error(where + ": duplicate parameter '" + spec.name + "'");
            tool.parameters.push_back(std::move(spec));
        }
        if (entry.contains("returns"))
            tool.returns = entry["returns"].value("fields", std::vector<std::string> {});

        for (const auto& e: entry.value("expansion", Json::array()))
        {
            auto expansion = ExpansionEntry {};
            expansion.tool = e.at("tool").get<std::string>();
            auto const routes = e.value("params", Json::object());
            for (const auto& [param, route]: routes.items())
            {
                auto r = ParamRoute {};
                if (route.contains("from"))
                    r.from = route["from"].get<std::string>();
                else if (route.contains("const"))
                    r.constant = route["const"];
                else
                    throw Error(where + ": route for '" + param + "' needs 'from' or 'const'");
                expansion.routes.emplace(param, std::move(r));
            }
            tool.expansion.push_back(std::move(expansion));
        }
        if (tool.kind == ToolKind::atomic && !tool.expansion.empty())
            throw Error(where + ": atomic tool cannot declare an expansion");
        if (tool.kind == ToolKind::composite && tool.expansion.empty())
            throw Error(where + ": composite tool has an empty expansion");

        registry._index.emplace(tool.name, registry._tools.size());
        registry._tools.push_back(std::move(tool));
    }

    // Expansion references are resolved once every tool is known.
    for (const auto& tool: registry._tools)
    {
        for (const auto& entry: tool.expansion)
        {
            auto const where = "registry tool '" + tool.name + "'";
            const auto* target = registry.find(entry.tool);
            if (target == nullptr)
                throw Error(where + ": dangling expansion reference '" + entry.tool + "'");
            if (target->kind != ToolKind::atomic)
                throw Error(where + ": expansion entry '" + entry.tool + "' is not atomic");
            for (const auto& [param, route]: entry.routes)
            {
                if (target->param(param) == nullptr)
                    throw Error(where + ": '" + entry.tool + "' has no parameter '" + param + "'");
                if (route.from && tool.param(*route.from) == nullptr)
                    throw Error(where + ": route source '" + *route.from + "' is not a declared parameter");
            }
            for (const auto& p: target->parameters)
                if (p.required && entry.routes.count(p.name) == 0)
                    throw Error(where + ": required parameter '" + p.name + "' of '" + entry.tool + "' is unrouted");
        }
    }
    return registry;
}

bool Registry::contains(std::string_view name) const
{
    return _index.find(name) != _index.end();
}

const ToolSpec* Registry::find(std::string_view name) const
{
    auto it = _index.find(name);
    return it == _index.end() ? nullptr : &_tools[it->second];
}

const ToolSpec& Registry::at(std::string_view name) const
{
    const auto* tool = find(name);
    if (tool == nullptr)
        throw Error("unknown tool '" + std::string(name) + "'");
    return *tool;
}

std::size_t Registry::atomic_count() const
{
    return static_cast<std::size_t>(
        std::count_if(_tools.begin(), _tools.end(), [](const auto& t) { return t.kind == ToolKind::atomic; }));
}

std::size_t Registry::composite_count() const
{
    return _tools.size() - atomic_count();
}

std::vector<std::string> Registry::sorted_names() const
{
    auto names = std::vector<std::string> {};
    for (const auto& [name, _]: _index)
        names.push_back(name);
    return names;
}

Registry load_registry(const std::string& path)
{
    auto text = read_file(path);
    auto document = Json::parse(text, nullptr, false);
    if (document.is_discarded())
        throw Error("registry: " + path + " is not valid JSON");
    try
    {
        return Registry::from_json(document);
    }
    catch (const Json::exception& e)
    {
        throw Error("registry: " + path + ": " + e.what());
    }
}

ValidationResult validate_action(const Action& action, const Registry& registry)
{
    auto result = ValidationResult {};
    const auto* tool = registry.find(action.tool_name);
    result.name_known = tool != nullptr;
    if (tool == nullptr)
        return result;

    for (const auto& spec: tool->parameters)
    {
        auto it = action.params.find(spec.name);
        if (it == action.params.end())
        {
            if (spec.required)
                result.missing_required.push_back(spec.name);
            continue;
        }
        if (auto mismatch = check_value(spec, it->second))
            result.type_mismatches.push_back(std::move(*mismatch));
    }
    for (const auto& [name, value]: action.params)
        if (tool->param(name) == nullptr)
            result.type_mismatches.push_back({ name, "undeclared", json_type_name(value) });

    result.ok = result.missing_required.empty() && result.type_mismatches.empty();
    return result;
}

std::vector<Action> expand_composite(std::string_view name, const ParamMap& params, const Registry& registry)
{
    const auto& tool = registry.at(name);
    if (tool.kind != ToolKind::composite)
        throw Error("'" + tool.name + "' is not a composite tool");

    auto actions = std::vector<Action> {};
    actions.reserve(tool.expansion.size());
    for (const auto& entry: tool.expansion)
    {
        auto action = Action { entry.tool, {} };
        for (const auto& [param, route]: entry.routes)
        {
            if (route.constant)
                action.params.emplace(param, *route.constant);
            else if (auto it = params.find(*route.from); it != params.end())
                action.params.emplace(param, it->second);
        }
        actions.push_back(std::move(action));
    }
    return actions;
}

std::vector<Action> atomic_calls(const Action& action, const Registry& registry)
{
    const auto* tool = registry.find(action.tool_name);
    if (tool == nullptr)
        return {};
    if (tool->kind == ToolKind::atomic)
        return { action };
    return expand_composite(action.tool_name, action.params, registry);
}

} // namespace agentlab
