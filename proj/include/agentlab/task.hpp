// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentlab/common.hpp"
#include "agentlab/toolspec.hpp"
#include "agentlab/trajectory.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace agentlab
{

enum class Archetype
{
    single_tool,
    sequential,
    conditional,
    compliance_reject,
};

enum class Level
{
    L1,
    L2,
    L3,
    L4,
};

std::string_view to_string(Archetype archetype);
std::string_view to_string(Level level);
Archetype archetype_from_string(std::string_view name);
Level level_from_string(std::string_view name);
Level level_of(Archetype archetype);

enum class AnswerKind
{
    factual,
    refusal,
};

/// Ground truth a trajectory is scored against.
struct OracleAnnotation
{
    /// Atomic tool names the task needs (T_req).
    std::set<std::string> required_tools;
    /// Action-step count of the annotated optimal trajectory (|tau*|).
    std::size_t optimal_length = 1;
    /// Expected parameters per required atomic tool.
    std::map<std::string, ParamMap> param_truth;
    AnswerKind answer_kind = AnswerKind::factual;

    bool operator==(const OracleAnnotation&) const = default;
};

/// A conditional task picks its second call from a payload signal of the
/// first call; the realized branch is the one the fixtures produce.
struct ConditionalRule
{
    std::string source_tool;
    std::map<std::string, Action> branches;
    std::string observed_signal;

    bool operator==(const ConditionalRule&) const = default;
};

struct Task
{
    std::string task_id;
    /// Query template the task was drawn from; policies key their state on it.
    std::string intent;
    Archetype archetype = Archetype::single_tool;
    Level level = Level::L1;
    std::string query;
    bool compliance_sensitive = false;
    /// Entity values the query refers to (client_id, fund_code, date, ...).
    ParamMap context;
    OracleAnnotation oracle;
    /// Tool calls of the optimal trajectory, in order.
    std::vector<Action> oracle_plan;
    /// Direct answer text. For refusal tasks this is the non-compliant reply
    /// that engages the request.
    std::string facts;
    std::optional<ConditionalRule> condition;

    bool operator==(const Task&) const = default;
};

using TaskSet = std::vector<Task>;

Json task_to_json(const Task& task);
Task task_from_json(const Json& j);
std::string serialize_taskset(const TaskSet& tasks);
TaskSet parse_taskset(std::string_view text);
TaskSet load_taskset(const std::string& path);
const Task* find_task(const TaskSet& tasks, std::string_view task_id);

/// Parameter-filling strategies the policy chooses among. Indices carry the
/// same meaning for every task.
enum class ParamTemplate
{
    exact,
    wrong_value,
    bad_format,
};

inline constexpr std::size_t param_template_count = 3;
std::string_view to_string(ParamTemplate tmpl);

/// Concrete parameters of `tool` for this task under a template. `exact`
/// fills from the oracle truth, then the task context. `wrong_value` replaces
/// the last required parameter with a schema-valid value the fixtures never
/// hold. `bad_format` breaks the first parameter's schema.
ParamMap candidate_params(const Task& task, const ToolSpec& tool, ParamTemplate tmpl);

/// Answer styles available to the policy.
enum class AnswerVariant
{
    factual,
    refuse,
    speculate,
    promote,
};

inline constexpr std::size_t answer_variant_count = 4;
std::string_view to_string(AnswerVariant variant);

/// Refusal text shared by every task.
std::string_view refusal_text();
std::string answer_text(const Task& task, AnswerVariant variant);
std::optional<AnswerVariant> classify_answer(const Task& task, std::string_view text);
bool is_refusal(std::string_view text);

} // namespace agentlab
