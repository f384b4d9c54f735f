#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "cshield/composite.hpp"

namespace cshield {

struct StepResult {
    StateId state;
    ObsId obs;
    double reward;
    bool reach;
    bool avoid;
};

/// Samples the POMDP: successors by transition weight, observations
/// uniformly from obs(s'). Entering a reach or avoid state ends the
/// episode and adds R(s', first action) to the step reward.
class Simulator {
public:
    Simulator(const Pomdp& model, std::uint64_t seed);

    const Pomdp& model() const { return *model_; }
    void reseed(std::uint64_t seed) { rng_.seed(seed); }
    std::mt19937_64& rng() { return rng_; }

    /// Hidden state uniform over `init` (the model's init by default);
    /// returns the first observation.
    ObsId reset();
    ObsId reset(const StateSet& init);
    StepResult step(ActionId a);
    StateId state() const { return state_; }

    /// With probability p a step jumps to a state outside trans(s, a). Only
    /// for testing the estimator's consistency check.
    void inject_faults(double p) { fault_rate_ = p; }

private:
    ObsId observe();

    const Pomdp* model_;
    std::mt19937_64 rng_;
    StateId state_ = 0;
    double fault_rate_ = 0.0;
};

struct AgentParams {
    double alpha = 0.1;
    double gamma = 0.99;
};

/// Tabular Q over (belief support, action). Unseen pairs read as 0.
class Agent {
public:
    Agent(std::size_t actions, AgentParams params = {});

    const AgentParams& params() const { return params_; }
    std::size_t size() const { return q_.size(); }

    double q(const StateSet& support, ActionId a) const;
    /// Highest Q among allowed actions; ties go to the lowest index.
    ActionId greedy(const StateSet& support, ActionMask allowed) const;
    ActionId act(const StateSet& support, ActionMask allowed, double epsilon, std::mt19937_64& rng) const;

    /// One Q-learning backup. `next` null marks a terminal transition.
    void update(const StateSet& support, ActionId a, double reward, const StateSet* next, ActionMask next_allowed);

private:
    const std::vector<double>* row(const StateSet& support) const;

    std::size_t actions_;
    AgentParams params_;
    std::unordered_map<std::vector<StateId>, std::vector<double>, SupportKeyHash> q_;
};

enum class Outcome { reach, avoid, timeout, shield_fault };
std::string_view to_string(Outcome o);

struct StepRecord {
    ObsId obs;
    ActionMask allowed;
    ActionId action;
    double reward;
    bool violation;
};

struct EpisodeLog {
    std::vector<StepRecord> steps;
    Outcome outcome = Outcome::timeout;
    double total_reward = 0.0;
    int violations = 0;
    std::string fault;  // shield error text for shield_fault
};

struct EpisodeOptions {
    double epsilon = 0.0;
    bool learn = false;
    int max_steps = 100;
    const StateSet* init = nullptr;  // override of the model's initial states
};

/// Estimator -> allowed set -> epsilon-greedy action -> environment step ->
/// Q-update. Off-region and empty-intersection errors from the shield end
/// the episode as shield_fault; inconsistent observations propagate.
EpisodeLog run_episode(Simulator& sim, Agent& agent, ShieldSession& session, const EpisodeOptions& options);

/// Affine map of undiscounted returns onto [0, 1].
struct RewardBounds {
    double min = 0.0;
    double max = 1.0;
    double normalize(double r) const;
};

/// Worst and best 100-step returns over initial states, from dynamic
/// programming where both the agent and the environment minimize
/// (resp. maximize), under the simulator's terminal-reward convention.
RewardBounds reward_bounds(const Pomdp& model, int horizon = 100);

using SessionFactory = std::function<std::unique_ptr<ShieldSession>()>;

struct TrainConfig {
    int episodes = 5000;
    int eval_every = 100;
    int eval_episodes = 10;
    int final_episodes = 100;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double anneal_fraction = 0.6;
    int max_steps = 100;
    int smooth = 5;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    AgentParams agent;
};

double epsilon_at(const TrainConfig& config, int episode);

struct MetricRow {
    int episode;
    std::string phase;  // train, eval, final
    double normalized_reward;
    double success;
    int violations;
};

struct PhaseTally {
    int episodes = 0;
    int successes = 0;
    int violations = 0;
    int faults = 0;
    double success_rate() const { return episodes == 0 ? 0.0 : static_cast<double>(successes) / episodes; }
};

struct TrainResult {
    std::vector<MetricRow> rows;
    /// (training episode count, smoothed mean normalized eval reward)
    std::vector<std::pair<int, double>> curve;
    std::vector<std::pair<int, double>> raw_curve;
    PhaseTally during;    // training episodes
    PhaseTally periodic;  // greedy evaluations between training blocks
    PhaseTally after;     // final greedy evaluation
    RewardBounds bounds;
    std::size_t q_entries = 0;

    /// First training episode count whose smoothed reward reaches `level`;
    /// -1 if never.
    int episodes_to(double level) const;
    double final_reward() const { return curve.empty() ? 0.0 : curve.back().second; }
};

/// Training episodes start from `training_init` (one set drawn uniformly
/// per episode) or the model's initial states when empty. Evaluation always
/// starts from the model's initial states.
TrainResult train(const Pomdp& model, const SessionFactory& sessions, const TrainConfig& config,
                  const std::vector<StateSet>& training_init = {});

/// Training episodes start from the global initial states or from any
/// submodel's initial set, uniformly.
TrainResult parallel_subtask_train(const Decomposition& dec, const SessionFactory& sessions,
                                   const TrainConfig& config);

/// Trailing moving average.
std::vector<double> smooth(const std::vector<double>& values, int window);

struct AuditReport {
    std::size_t traces = 0;
    std::size_t steps = 0;
    std::size_t mismatches = 0;
    std::string first_mismatch;
    std::size_t blocked = 0;  // traces cut by off-region or empty-intersection
    std::string first_block;
};

/// Samples `traces` random traces and compares the global estimator with
/// the union of submodel estimators on core states after every step.
/// Actions are uniform over the enabled ones, or over the composite
/// shield's allowed set when `shield` is given.
AuditReport audit_estimators(const Decomposition& dec, std::size_t traces, int max_steps, std::uint64_t seed,
                             CompositeShield* shield = nullptr);

std::string metrics_csv(const TrainResult& result);
/// Per-phase episodes, violations, success rate and shield faults as JSON text.
std::string summary_json(const TrainResult& result, const std::string& instance, const std::string& shield);

}  // namespace cshield
