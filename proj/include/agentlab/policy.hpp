// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentlab/common.hpp"
#include "agentlab/task.hpp"
#include "agentlab/toolspec.hpp"
#include "agentlab/trajectory.hpp"

#include <array>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace agentlab
{

enum class ActionType
{
    call,
    hallucinate,
    answer,
    malformed,
};

struct ActionSpec
{
    ActionType type = ActionType::call;
    /// Registered tool for calls, invented name for hallucinations.
    std::string tool;
    ParamTemplate tmpl = ParamTemplate::exact;
    AnswerVariant answer = AnswerVariant::factual;
    /// Stable identifier written to checkpoints.
    std::string name;
};

/// Tool names outside the registry that the policy can emit.
inline constexpr std::array<std::string_view, 2> hallucinated_names { "getClientSummary", "fetchFundData" };

/// Tool name carried by the malformed-emission step.
inline constexpr std::string_view malformed_tool_name = "<malformed>";

/// Finite action list: every registered tool under every parameter template,
/// the hallucinated names, the answer variants, and one malformed emission.
class ActionSpace
{
  public:
    explicit ActionSpace(std::shared_ptr<const Registry> registry);

    std::size_t size() const { return _actions.size(); }
    const ActionSpec& at(std::size_t index) const { return _actions[index]; }
    const std::vector<ActionSpec>& actions() const { return _actions; }
    const Registry& registry() const { return *_registry; }
    std::shared_ptr<const Registry> registry_ptr() const { return _registry; }

    std::size_t call_index(std::string_view tool, ParamTemplate tmpl) const;
    std::size_t answer_index(AnswerVariant variant) const;
    std::size_t hallucinate_index(std::size_t which) const;
    std::size_t malformed_index() const { return _actions.size() - 1; }
    std::vector<std::string> names() const;

  private:
    std::shared_ptr<const Registry> _registry;
    std::vector<ActionSpec> _actions;
    std::map<std::string, std::size_t, std::less<>> _tool_base;
};

/// Status of an observation as the policy sees it: ok, empty, or the error kind.
std::string observation_status(const Observation& observation);

/// State features at a decision point: a fine key on (intent, step index,
/// last observation) and a coarse key on (compliance sensitivity, last
/// observation status). The coarse key is shared across intents.
using Features = std::array<std::string, 2>;
Features state_features(const Task& task, std::size_t step_index, const Step* previous);

/// Concrete step the action produces for this task.
Step materialize(const ActionSpec& action, const Task& task, const Registry& registry);

struct Decision
{
    Features features;
    std::size_t action = 0;
};

/// Recovers the decision sequence behind a trajectory. Throws Error when a
/// step is not reachable from the action space.
std::vector<Decision> decode_decisions(const Trajectory& trajectory, const Task& task, const ActionSpace& space);

/// Sparse gradient: feature key → per-action vector.
using Gradient = std::map<std::string, std::vector<double>>;

void add_scaled(Gradient& into, const Gradient& g, double scale);
double dot(const Gradient& a, const Gradient& b);

/// Linear softmax policy. Logits of a state are the sum of its feature rows;
/// rows never written are zero.
class Policy
{
  public:
    explicit Policy(std::shared_ptr<const ActionSpace> space);

    const ActionSpace& space() const { return *_space; }
    std::shared_ptr<const ActionSpace> space_ptr() const { return _space; }
    const std::map<std::string, std::vector<double>>& table() const { return _table; }

    std::vector<double> logits(const Features& features) const;
    /// softmax(logits / temperature); sums to 1 within 1e-9.
    std::vector<double> probabilities(const Features& features, double temperature) const;
    std::size_t greedy_action(const Features& features) const;

    /// Row for a feature key, created as zeros if absent.
    std::vector<double>& row(const std::string& key);
    /// theta += scale * g
    void apply(const Gradient& g, double scale);

    bool operator==(const Policy& other) const { return _table == other._table; }

  private:
    std::shared_ptr<const ActionSpace> _space;
    std::map<std::string, std::vector<double>> _table;
};

/// Frozen copy of a policy's parameters.
class ReferencePolicy
{
  public:
    explicit ReferencePolicy(Policy snapshot): _policy(std::move(snapshot)) {}

    const Policy& policy() const { return _policy; }

  private:
    Policy _policy;
};

double logprob_decisions(const Policy& policy, const std::vector<Decision>& decisions, double temperature);
Gradient grad_logprob_decisions(const Policy& policy, const std::vector<Decision>& decisions, double temperature);

/// Sum over steps of the log-probability of the taken action.
double logprob_trajectory(const Policy& policy, const Trajectory& trajectory, const Task& task, double temperature);
Gradient grad_logprob(const Policy& policy, const Trajectory& trajectory, const Task& task, double temperature);

struct Demo
{
    const Task* task = nullptr;
    Trajectory trajectory;
};

/// Gradient ascent on the summed demo log-likelihood at temperature 1, one
/// update per demo, demo order shuffled per epoch from `seed`.
Policy sft_fit(const Policy& initial, const std::vector<Demo>& demos, int epochs, double lr, std::uint64_t seed);

/// Policy whose greedy rollout reproduces the given oracle trajectories:
/// each decision's fine row gets `margin` on the taken action.
Policy oracle_policy(std::shared_ptr<const ActionSpace> space, const std::vector<Demo>& oracle_demos, double margin = 20.0);

std::string serialize_policy(const Policy& policy);
Policy parse_policy(std::string_view text, std::shared_ptr<const ActionSpace> space);

} // namespace agentlab
