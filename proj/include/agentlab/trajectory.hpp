// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentlab/common.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agentlab
{

class Registry;

enum class ErrorKind
{
    unknown_tool,
    schema_violation,
    backend_fault,
};

std::string_view to_string(ErrorKind kind);
std::optional<ErrorKind> error_kind_from_string(std::string_view name);

/// Parameter values are scalars or flat lists of scalars. Keys are kept
/// sorted, which is also the canonical serialization order.
using ParamMap = std::map<std::string, Json>;

struct Action
{
    std::string tool_name;
    ParamMap params;

    bool operator==(const Action&) const = default;
};

struct Observation
{
    Json payload;
    bool is_error = false;
    std::optional<ErrorKind> error_kind;

    bool operator==(const Observation&) const = default;
};

struct Step
{
    std::string thought;
    std::optional<Action> action;
    std::optional<Observation> observation;

    bool operator==(const Step&) const = default;
};

/// One ReAct rollout: Thought/Action/Observation steps, optionally closed by
/// a thought-only step and a final answer. Values are plain data; the shape
/// invariants are checked by parse_trajectory and check_format rather than
/// enforced on construction, so malformed rollouts remain representable.
struct Trajectory
{
    std::string task_id;
    std::vector<Step> steps;
    std::optional<std::string> final_answer;

    /// Number of Action steps. This is |tau| for the efficiency reward.
    std::size_t tool_call_count() const;

    bool operator==(const Trajectory&) const = default;
};

struct FormatReport
{
    bool parseable = true;
    bool fields_valid = true;
    bool thought_present = true;
    bool tool_names_spelled = true;
    bool passed = true;
    /// Human-readable location of the first failure; empty when passed.
    std::string detail;
};

struct ParseOutcome
{
    std::optional<Trajectory> trajectory;
    FormatReport report;

    bool ok() const { return trajectory.has_value(); }
};

/// Parses one canonical record. On failure the report has exactly the first
/// failed check cleared (parseable, then fields_valid, then thought_present).
ParseOutcome parse_trajectory(std::string_view raw);

/// Structural and registry checks; never executes anything.
FormatReport check_format(const Trajectory& trajectory, const Registry& registry);

/// Canonical single-line form: fixed field order, sorted parameter and
/// payload keys.
std::string serialize_trajectory(const Trajectory& trajectory);

/// Every prose field of the trajectory (thoughts, then the final answer).
std::vector<std::string_view> response_texts(const Trajectory& trajectory);

} // namespace agentlab
