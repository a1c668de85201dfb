// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentlab/common.hpp"
#include "agentlab/trajectory.hpp"

#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace agentlab
{

enum class ParamType
{
    string,
    integer,
    number,
    boolean,
    enumeration,
    date,
};

std::string_view to_string(ParamType type);

struct ParamSpec
{
    std::string name;
    ParamType type = ParamType::string;
    bool required = false;
    std::optional<std::string> pattern;
    std::vector<std::string> enum_values;
    std::string description;

    /// Compiled form of `pattern` (and the fixed YYYY-MM-DD rule for dates).
    std::shared_ptr<const std::regex> matcher;
};

/// Where an atomic parameter of a composite expansion gets its value: either
/// copied from a named composite parameter or fixed to a constant.
struct ParamRoute
{
    std::optional<std::string> from;
    std::optional<Json> constant;
};

struct ExpansionEntry
{
    std::string tool;
    std::map<std::string, ParamRoute> routes;
};

enum class ToolKind
{
    atomic,
    composite,
};

struct ToolSpec
{
    std::string name;
    std::string description;
    std::vector<ParamSpec> parameters;
    /// Field names an ok payload carries.
    std::vector<std::string> returns;
    ToolKind kind = ToolKind::atomic;
    std::vector<ExpansionEntry> expansion;

    const ParamSpec* param(std::string_view param_name) const;
};

/// Immutable after construction. Iteration order is the file order.
class Registry
{
  public:
    static Registry from_json(const Json& document);

    bool contains(std::string_view name) const;
    const ToolSpec* find(std::string_view name) const;
    const ToolSpec& at(std::string_view name) const;

    const std::vector<ToolSpec>& tools() const { return _tools; }
    std::size_t size() const { return _tools.size(); }
    std::size_t atomic_count() const;
    std::size_t composite_count() const;
    /// Sorted tool names; the `valid_tools` list of unknown-tool errors.
    std::vector<std::string> sorted_names() const;

  private:
    std::vector<ToolSpec> _tools;
    std::map<std::string, std::size_t, std::less<>> _index;
};

/// Throws Error on duplicate names, dangling or non-atomic expansion entries,
/// empty expansions, and bad patterns.
Registry load_registry(const std::string& path);

struct TypeMismatch
{
    std::string param;
    std::string expected;
    std::string got;

    bool operator==(const TypeMismatch&) const = default;
};

struct ValidationResult
{
    bool name_known = false;
    std::vector<std::string> missing_required;
    std::vector<TypeMismatch> type_mismatches;
    bool ok = false;
};

/// Total: unknown names are reported, not raised. Undeclared parameters are
/// listed as mismatches with expected type "undeclared".
ValidationResult validate_action(const Action& action, const Registry& registry);

/// One atomic Action per expansion entry, parameters projected through the
/// entry's route table. Throws Error when `name` is not a composite tool.
std::vector<Action> expand_composite(std::string_view name, const ParamMap& params, const Registry& registry);

/// Atomic view of an invocation: composites expanded, atomic calls returned
/// as-is, unknown names yield nothing.
std::vector<Action> atomic_calls(const Action& action, const Registry& registry);

} // namespace agentlab
