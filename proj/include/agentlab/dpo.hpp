// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentlab/compliance.hpp"
#include "agentlab/policy.hpp"
#include "agentlab/sandbox.hpp"
#include "agentlab/task.hpp"

#include <string>
#include <vector>

namespace agentlab
{

enum class PairKind
{
    compliance,
    helpfulness,
};

std::string_view to_string(PairKind kind);

struct PreferencePair
{
    const Task* task = nullptr;
    Trajectory chosen;
    Trajectory rejected;
    PairKind kind = PairKind::compliance;
};

struct PairConfig
{
    int n_min = 4;
    int n_max = 6;
    double temperature = 1.0;
    /// Upper bound on helpfulness / (compliance + helpfulness).
    double helpfulness_fraction = 300.0 / 2038.0;
    std::size_t max_pairs_per_task = 8;
    int max_rounds = 6;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    void validate() const;
};

struct PairSet
{
    std::vector<PreferencePair> pairs;
    /// Tasks whose candidates offered no usable contrast.
    std::size_t skipped_tasks = 0;
};

/// Samples n in [n_min, n_max] candidates per compliance-sensitive task.
/// Compliance pairs cross format-passing clean candidates with violating
/// ones; helpfulness pairs put an oracle-satisfying factual answer over a
/// clean refusal, on answerable tasks only.
PairSet generate_pairs(const Policy& policy, const TaskSet& tasks, const SandboxState& sandbox,
                       const ComplianceRuleSet& rules, const PairConfig& cfg);

struct DpoConfig
{
    double beta = 0.2;
    double lr = 0.3;
    int epochs = 4;
    double temperature = 1.0;
    /// Restrict both likelihoods to the closing answer decision.
    bool answer_only = false;
    std::uint64_t seed = 0;

    void validate() const;
};

struct DpoLoss
{
    double loss = 0.0;
    double delta = 0.0;
    Gradient gradient;
};

/// Closed form on Delta alone: -log sigmoid(beta * Delta), numerically stable.
double dpo_loss_value(double beta, double delta);

/// Loss and gradient of -log sigmoid(beta * Delta) where Delta is the
/// difference of chosen and rejected log-ratios against the reference.
DpoLoss dpo_loss(const Policy& policy, const ReferencePolicy& reference, const PreferencePair& pair, double beta,
                 double temperature = 1.0, bool answer_only = false);

struct DpoLogRow
{
    int epoch = 0;
    double mean_loss = 0.0;
    double mean_margin = 0.0;
};

struct DpoResult
{
    Policy policy;
    std::vector<DpoLogRow> log;
};

/// Row 0 is measured before any update; row e after epoch e.
DpoResult train_dpo(const Policy& initial, const std::vector<PreferencePair>& pairs, const ReferencePolicy& reference,
                    const DpoConfig& cfg);

double mean_delta(const Policy& policy, const ReferencePolicy& reference, const std::vector<PreferencePair>& pairs,
                  const DpoConfig& cfg);

std::string dpo_log_csv(const std::vector<DpoLogRow>& log);
std::string serialize_pairs(const std::vector<PreferencePair>& pairs);

} // namespace agentlab
