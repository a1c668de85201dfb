// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentlab/compliance.hpp"
#include "agentlab/dpo.hpp"
#include "agentlab/grpo.hpp"
#include "agentlab/policy.hpp"
#include "agentlab/reward.hpp"
#include "agentlab/sandbox.hpp"
#include "agentlab/task.hpp"

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace agentlab
{

// ---- task generation -------------------------------------------------------

/// Stratum weights in level order L1..L4.
using StrataWeights = std::array<double, 4>;
inline constexpr StrataWeights default_strata_weights { 0.30, 0.35, 0.20, 0.15 };

/// Largest-remainder allocation of n over the weights; ties go to the lower level.
std::array<std::size_t, 4> strata_counts(std::size_t n, const StrataWeights& weights);

/// Query intents of a stratum, in round-robin order.
const std::vector<std::string>& intents_of(Level level);

/// Deterministic in (n, weights, seed). The registry supplies parameter lists
/// so oracle calls match the exact template.
TaskSet generate_tasks(std::size_t n, const StrataWeights& weights, std::uint64_t seed, const Registry& registry);

struct TaskSplit
{
    TaskSet train;
    TaskSet held_out;
};

/// Within each stratum every fourth task is held out.
TaskSplit split_tasks(const TaskSet& tasks);

/// Payload the synthetic back office returns for an atomic call, or nothing
/// when the entity does not exist.
std::optional<Json> world_payload(const std::string& tool, const ParamMap& params);

/// Tables holding every atomic tool's exact-template call for every task.
FixtureTables synthesize_fixtures(const TaskSet& tasks, const Registry& registry);

// ---- fixture bundle --------------------------------------------------------

struct Bundle
{
    std::shared_ptr<const Registry> registry;
    std::shared_ptr<const ActionSpace> space;
    ComplianceRuleSet rules;
    TaskSet tasks;
    SandboxState sandbox;
};

/// Directory layout: registry.json, rules.json, tasks.jsonl, responses/<tool>.json.
/// A missing tasks.jsonl or responses/ directory is generated (n=200, seed 7).
Bundle load_bundle(const std::string& dir);
Bundle make_bundle(std::shared_ptr<const Registry> registry, ComplianceRuleSet rules, TaskSet tasks);
void write_bundle_data(const Bundle& bundle, const std::string& dir);

// ---- supervised corpus -----------------------------------------------------

struct SftConfig
{
    /// Demonstrations drawn per training task.
    int demos_per_task = 20;
    int epochs = 3;
    double lr = 0.1;
    /// Share of demos that open with a hallucinated name and then recover.
    double recovery_rate = 0.05;

    void validate() const;
};

/// Oracle demonstrations with per-intent distillation flaws (wrong values,
/// repeated calls, atomic paths, careless answers) plus recovery demos.
std::vector<Demo> build_sft_corpus(const TaskSet& train, const SandboxState& sandbox, const ActionSpace& space,
                                   const SftConfig& cfg, std::uint64_t seed);

std::vector<Demo> oracle_demos(const TaskSet& tasks, const SandboxState& sandbox);

// ---- evaluation ------------------------------------------------------------

struct Metrics
{
    double tcr = 0.0;
    double tier = 0.0;
    double air = 0.0;
    double crr = 0.0;
    double vr = 0.0;
    std::size_t n = 0;
};

struct TaskOutcome
{
    Trajectory trajectory;
    bool completed = false;
    bool violated = false;
    bool refused = false;
    std::size_t invocations = 0;
    std::size_t erroneous = 0;
};

struct Evaluation
{
    Metrics metrics;
    std::vector<TaskOutcome> outcomes;
    /// Percent of answerable compliance-sensitive tasks answered with a refusal.
    double over_refusal = 0.0;
};

/// Unknown or malformed name, schema-invalid, no expanded call in the
/// required set, or a required call whose parameters differ from the truth.
bool is_erroneous_invocation(const Action& action, const Task& task, const Registry& registry);

/// Format passed, answer of the annotated kind, full coverage, exact
/// parameters, no violation.
bool task_completed(const Trajectory& trajectory, const Task& task, const Registry& registry,
                    const ComplianceRuleSet& rules);

/// Greedy rollouts. TIER's denominator is tool invocations; CRR's is the
/// refusal-annotated tasks.
Evaluation evaluate_detailed(const Policy& policy, const TaskSet& tasks, const SandboxState& sandbox,
                             const ComplianceRuleSet& rules, std::size_t workers = 1);
Metrics evaluate(const Policy& policy, const TaskSet& tasks, const SandboxState& sandbox,
                 const ComplianceRuleSet& rules, std::size_t workers = 1);
Metrics metrics_from_outcomes(const std::vector<TaskOutcome>& outcomes, const TaskSet& tasks);

std::string metrics_csv_header();
std::string metrics_csv_row(const Metrics& m);

// ---- flywheel --------------------------------------------------------------

enum class FlywheelSignal
{
    exec_failure,
    long_trajectory,
    requery,
    compliance_alert,
};

std::string_view to_string(FlywheelSignal signal);

struct SessionMetadata
{
    /// Seconds until the advisor asked again; absent when they did not.
    std::optional<double> requery_gap_seconds;
};

struct SessionLog
{
    Trajectory trajectory;
    SessionMetadata metadata;
};

struct FlywheelFlag
{
    std::string task_id;
    std::set<FlywheelSignal> signals;
};

/// exec_failure: any error observation. long_trajectory: more than 4 Actions.
/// requery: gap strictly below 30 s. compliance_alert: violated verdict.
std::vector<FlywheelFlag> flag_hard_examples(const std::vector<SessionLog>& logs, const ComplianceRuleSet& rules);

/// Sampled sessions whose advisors re-ask sooner when the answer fell short.
std::vector<SessionLog> simulate_sessions(const Policy& policy, const TaskSet& tasks, const SandboxState& sandbox,
                                          const ComplianceRuleSet& rules, std::uint64_t seed);

std::set<std::string> hard_pool_from_flags(const std::vector<FlywheelFlag>& flags);
std::string serialize_hard_pool(const std::set<std::string>& pool);
std::set<std::string> parse_hard_pool(std::string_view text);
std::string flags_csv(const std::vector<FlywheelFlag>& flags);

// ---- pipeline and ablation -------------------------------------------------

struct PipelineConfig
{
    bool sft = true;
    SftConfig sft_config;
    std::optional<GrpoConfig> grpo;
    std::optional<DpoConfig> dpo;
    PairConfig pairs;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

/// Seeds of each stage derived from the pipeline seed.
std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage);

struct PipelineResult
{
    Policy policy;
    std::vector<GrpoLogRow> grpo_log;
    std::vector<DpoLogRow> dpo_log;
    std::vector<PreferencePair> pairs;
    std::size_t pair_skips = 0;
};

/// SFT from zero logits, then GRPO from the SFT policy (reference = SFT),
/// then DPO from the GRPO policy (reference = GRPO). Stage seeds override the
/// seeds inside the stage configs.
PipelineResult run_pipeline(const Bundle& bundle, const TaskSet& train, const PipelineConfig& cfg,
                            const std::set<std::string>& hard_pool = {});

struct AblationConfig
{
    std::string label;
    PipelineConfig pipeline;
};

struct AblationRow
{
    std::string label;
    Metrics metrics;
    double over_refusal = 0.0;
    /// VR restricted to refusal-annotated held-out tasks.
    double vr_refusal_tasks = 0.0;
    std::vector<GrpoLogRow> grpo_log;
    std::vector<DpoLogRow> dpo_log;
};

/// Labels: base, sft, grpo_multiplicative, grpo_no_eff, grpo_no_cpl,
/// grpo_additive, grpo_coarse, full_pipeline.
std::vector<AblationConfig> standard_suite(const GrpoConfig& grpo, const DpoConfig& dpo, const SftConfig& sft,
                                         const PairConfig& pairs);

/// Runs every configuration on the same split with the same seed. Stages
/// shared by several labels are computed once.
std::vector<AblationRow> run_ablation(const std::vector<AblationConfig>& configs, const Bundle& bundle,
                                      std::uint64_t seed, std::size_t workers = 1);

std::string ablation_csv(const std::vector<AblationRow>& rows);

} // namespace agentlab
