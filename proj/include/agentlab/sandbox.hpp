// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentlab/common.hpp"
#include "agentlab/policy.hpp"
#include "agentlab/task.hpp"
#include "agentlab/toolspec.hpp"
#include "agentlab/trajectory.hpp"

#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace agentlab
{

/// Canonical text of a parameter map: compact JSON with sorted keys.
std::string canonical_params(const ParamMap& params);

/// Per-tool response tables keyed by canonical parameter text.
struct FixtureTables
{
    std::map<std::string, std::map<std::string, Json>> tables;

    const Json* lookup(const std::string& tool, const ParamMap& params) const;
    void insert(const std::string& tool, const ParamMap& params, Json payload);
};

struct SandboxState
{
    std::shared_ptr<const Registry> registry;
    FixtureTables fixtures;
    std::uint64_t seed = 0;
    /// (tool, canonical params) pairs that answer with backend_fault.
    std::set<std::pair<std::string, std::string>> fault_table;
    /// Check ok payloads against the tool's return fields; a gap throws Error.
    bool validate_returns = false;
};

/// Throws Error when some atomic tool has no response table.
void check_fixture_coverage(const SandboxState& state);

/// Never throws for any action; every failure is an error observation.
Observation execute(const Action& action, const SandboxState& state);

struct EpisodeConfig
{
    /// Upper bound on policy decisions, answers included.
    int max_rounds = 6;
    double temperature = 0.8;
    std::uint64_t seed = 0;
    /// Argmax decoding instead of sampling.
    bool greedy = false;

    void validate() const;
};

Trajectory run_episode(const Policy& policy, const Task& task, const SandboxState& state, const EpisodeConfig& cfg);

/// Executes a fixed action-index sequence the way run_episode would.
Trajectory replay_actions(const ActionSpace& space, const Task& task, const SandboxState& state,
                          const std::vector<std::size_t>& actions);

/// The task's oracle plan executed against the sandbox, closed by the
/// oracle answer.
Trajectory oracle_trajectory(const Task& task, const SandboxState& state);

/// One `<tool>.json` file per atomic tool under `dir`.
void save_fixtures(const FixtureTables& fixtures, const std::string& dir);
FixtureTables load_fixtures(const std::string& dir, const Registry& registry);

} // namespace agentlab
