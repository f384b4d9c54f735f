#include "cshield/rl.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cshield/error.hpp"

namespace cshield {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream per (phase tag, episode) so results do not depend on
// evaluation order or thread count.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t episode) {
    return splitmix(splitmix(splitmix(seed) ^ tag) ^ episode);
}

constexpr std::uint64_t train_tag = 1;
constexpr std::uint64_t eval_tag = 2;
constexpr std::uint64_t final_tag = 3;
constexpr std::uint64_t init_tag = 4;

bool is_shield_fault(const Error& e) {
    return e.kind() == ErrorKind::off_region || e.kind() == ErrorKind::empty_intersection;
}

}  // namespace

Simulator::Simulator(const Pomdp& model, std::uint64_t seed) : model_(&model), rng_(seed) {}

ObsId Simulator::observe() {
    const auto obs = model_->observations(state_);
    std::uniform_int_distribution<std::size_t> pick(0, obs.size() - 1);
    return obs[pick(rng_)];
}

ObsId Simulator::reset() {
    return reset(model_->init());
}

ObsId Simulator::reset(const StateSet& init) {
    const auto states = init.to_vector();
    if (states.empty()) {
        throw Error(ErrorKind::precondition, "empty initial set");
    }
    std::uniform_int_distribution<std::size_t> pick(0, states.size() - 1);
    state_ = states[pick(rng_)];
    return observe();
}

StepResult Simulator::step(ActionId a) {
    const Pomdp& m = *model_;
    const StateId s = state_;
    const auto succ = m.transitions(s, a);
    if (succ.empty()) {
        throw Error(ErrorKind::precondition,
                    "action '" + m.action_names()[a] + "' is not enabled in state " + std::to_string(s));
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool fault = fault_rate_ > 0.0 && unit(rng_) < fault_rate_;
    StateId next = succ.back().target;
    if (fault) {
        std::vector<StateId> outside;
        for (StateId t = 0; t < m.num_states(); ++t) {
            if (std::none_of(succ.begin(), succ.end(), [&](const Transition& tr) { return tr.target == t; })) {
                outside.push_back(t);
            }
        }
        if (!outside.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, outside.size() - 1);
            next = outside[pick(rng_)];
        }
    } else {
        double total = 0.0;
        for (const auto& t : succ) {
            total += t.weight;
        }
        if (total <= 0.0) {
            std::uniform_int_distribution<std::size_t> pick(0, succ.size() - 1);
            next = succ[pick(rng_)].target;
        } else {
            double x = unit(rng_) * total;
            for (const auto& t : succ) {
                if (x < t.weight) {
                    next = t.target;
                    break;
                }
                x -= t.weight;
            }
        }
    }
    state_ = next;
    StepResult r{next, observe(), m.reward(s, a), m.reach().contains(next), m.avoid().contains(next)};
    if (r.reach || r.avoid) {
        r.reward += m.reward(next, 0);
    }
    return r;
}

Agent::Agent(std::size_t actions, AgentParams params) : actions_(actions), params_(params) {
    if (!(params.gamma >= 0.0 && params.gamma < 1.0)) {
        throw Error(ErrorKind::parameter, "discount must lie in [0, 1)");
    }
    if (!(params.alpha > 0.0 && params.alpha <= 1.0)) {
        throw Error(ErrorKind::parameter, "learning rate must lie in (0, 1]");
    }
}

const std::vector<double>* Agent::row(const StateSet& support) const {
    auto it = q_.find(support.to_vector());
    return it == q_.end() ? nullptr : &it->second;
}

double Agent::q(const StateSet& support, ActionId a) const {
    const auto* r = row(support);
    return r ? (*r)[a] : 0.0;
}

ActionId Agent::greedy(const StateSet& support, ActionMask allowed) const {
    if (allowed == 0) {
        throw Error(ErrorKind::precondition, "no allowed action");
    }
    const auto* r = row(support);
    ActionId best = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    for (ActionId a = 0; a < actions_; ++a) {
        if (!mask_has(allowed, a)) {
            continue;
        }
        const double v = r ? (*r)[a] : 0.0;
        if (v > best_q) {
            best = a;
            best_q = v;
        }
    }
    return best;
}

ActionId Agent::act(const StateSet& support, ActionMask allowed, double epsilon, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < epsilon) {
        std::vector<ActionId> choices;
        for (ActionId a = 0; a < actions_; ++a) {
            if (mask_has(allowed, a)) {
                choices.push_back(a);
            }
        }
        if (choices.empty()) {
            throw Error(ErrorKind::precondition, "no allowed action");
        }
        std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
        return choices[pick(rng)];
    }
    return greedy(support, allowed);
}

void Agent::update(const StateSet& support, ActionId a, double reward, const StateSet* next,
                   ActionMask next_allowed) {
    double target = reward;
    if (next != nullptr && next_allowed != 0) {
        const auto* r = row(*next);
        double best = -std::numeric_limits<double>::infinity();
        for (ActionId b = 0; b < actions_; ++b) {
            if (mask_has(next_allowed, b)) {
                best = std::max(best, r ? (*r)[b] : 0.0);
            }
        }
        target += params_.gamma * best;
    }
    auto& q = q_.try_emplace(support.to_vector(), actions_, 0.0).first->second;
    q[a] += params_.alpha * (target - q[a]);
}

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::reach:
            return "reach";
        case Outcome::avoid:
            return "avoid";
        case Outcome::timeout:
            return "timeout";
        case Outcome::shield_fault:
            return "shield-fault";
    }
    return "?";
}

EpisodeLog run_episode(Simulator& sim, Agent& agent, ShieldSession& session, const EpisodeOptions& options) {
    EpisodeLog log;
    const ObsId z0 = options.init ? sim.reset(*options.init) : sim.reset();
    ActionMask allowed = 0;
    try {
        allowed = options.init ? session.reset(*options.init, z0) : session.reset(z0);
    } catch (const Error& e) {
        if (!is_shield_fault(e)) {
            throw;
        }
        log.outcome = Outcome::shield_fault;
        log.fault = e.what();
        return log;
    }
    StateSet belief = session.belief();
    ObsId z = z0;
    for (int t = 0; t < options.max_steps; ++t) {
        const ActionId a = agent.act(belief, allowed, options.epsilon, sim.rng());
        const StepResult r = sim.step(a);
        log.steps.push_back({z, allowed, a, r.reward, r.avoid});
        log.total_reward += r.reward;
        z = r.obs;
        if (r.avoid || r.reach) {
            if (options.learn) {
                agent.update(belief, a, r.reward, nullptr, 0);
            }
            log.outcome = r.avoid ? Outcome::avoid : Outcome::reach;
            log.violations = r.avoid ? 1 : 0;
            return log;
        }
        ActionMask next_allowed = 0;
        try {
            next_allowed = session.step(a, r.obs);
        } catch (const Error& e) {
            if (!is_shield_fault(e)) {
                throw;
            }
            log.outcome = Outcome::shield_fault;
            log.fault = e.what();
            return log;
        }
        const StateSet& next = session.belief();
        if (options.learn) {
            agent.update(belief, a, r.reward, &next, next_allowed);
        }
        belief = next;
        allowed = next_allowed;
    }
    log.outcome = Outcome::timeout;
    return log;
}

double RewardBounds::normalize(double r) const {
    if (max <= min) {
        return 0.0;
    }
    return std::clamp((r - min) / (max - min), 0.0, 1.0);
}

RewardBounds reward_bounds(const Pomdp& model, int horizon) {
    const std::size_t n = model.num_states();
    const auto terminal = model.reach() | model.avoid();
    std::vector<double> lo(n, 0.0);
    std::vector<double> hi(n, 0.0);
    std::vector<double> lo2(n);
    std::vector<double> hi2(n);
    for (int step = 0; step < horizon; ++step) {
        for (StateId s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            double worst = std::numeric_limits<double>::infinity();
            for (ActionId a = 0; a < model.num_actions(); ++a) {
                const auto succ = model.transitions(s, a);
                if (succ.empty()) {
                    continue;
                }
                double up = -std::numeric_limits<double>::infinity();
                double down = std::numeric_limits<double>::infinity();
                for (const auto& t : succ) {
                    const bool end = terminal.contains(t.target);
                    up = std::max(up, end ? model.reward(t.target, 0) : hi[t.target]);
                    down = std::min(down, end ? model.reward(t.target, 0) : lo[t.target]);
                }
                best = std::max(best, model.reward(s, a) + up);
                worst = std::min(worst, model.reward(s, a) + down);
            }
            hi2[s] = best;
            lo2[s] = worst;
        }
        std::swap(hi, hi2);
        std::swap(lo, lo2);
    }
    RewardBounds b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (StateId s : model.init()) {
        b.min = std::min(b.min, lo[s]);
        b.max = std::max(b.max, hi[s]);
    }
    return b;
}

double epsilon_at(const TrainConfig& config, int episode) {
    const double span = config.anneal_fraction * config.episodes;
    if (span <= 0.0 || episode >= span) {
        return config.epsilon_end;
    }
    return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * (episode / span);
}

std::vector<double> smooth(const std::vector<double>& values, int window) {
    if (window < 1) {
        throw Error(ErrorKind::parameter, "smoothing window must be at least 1");
    }
    std::vector<double> out(values.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sum += values[i];
        if (i >= static_cast<std::size_t>(window)) {
            sum -= values[i - window];
        }
        out[i] = sum / static_cast<double>(std::min<std::size_t>(i + 1, window));
    }
    return out;
}

int TrainResult::episodes_to(double level) const {
    for (const auto& [episode, value] : curve) {
        if (value >= level) {
            return episode;
        }
    }
    return -1;
}

namespace {

struct BatchResult {
    double mean_normalized = 0.0;
    PhaseTally tally;
};

BatchResult evaluate(const Pomdp& model, Agent& agent, const SessionFactory& sessions, const TrainConfig& config,
                     const RewardBounds& bounds, std::uint64_t tag, int count) {
    std::vector<EpisodeLog> logs(count);
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(count);
    auto worker = [&] {
        for (int k = next++; k < count; k = next++) {
            try {
                Simulator sim(model, stream_seed(config.seed, tag, static_cast<std::uint64_t>(k)));
                auto session = sessions();
                logs[k] = run_episode(sim, agent, *session, {0.0, false, config.max_steps, nullptr});
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const unsigned jobs = std::max(1U, std::min<unsigned>(config.jobs, static_cast<unsigned>(count)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < jobs; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    BatchResult r;
    for (const auto& log : logs) {
        r.mean_normalized += bounds.normalize(log.total_reward);
        ++r.tally.episodes;
        r.tally.successes += log.outcome == Outcome::reach ? 1 : 0;
        r.tally.violations += log.violations;
        r.tally.faults += log.outcome == Outcome::shield_fault ? 1 : 0;
    }
    if (count > 0) {
        r.mean_normalized /= count;
    }
    return r;
}

void add(PhaseTally& into, const PhaseTally& from) {
    into.episodes += from.episodes;
    into.successes += from.successes;
    into.violations += from.violations;
    into.faults += from.faults;
}

}  // namespace

TrainResult train(const Pomdp& model, const SessionFactory& sessions, const TrainConfig& config,
                  const std::vector<StateSet>& training_init) {
    if (config.episodes < 1) {
        throw Error(ErrorKind::usage, "at least one training episode is required");
    }
    if (config.eval_every < 1 || config.eval_episodes < 0 || config.final_episodes < 0 || config.max_steps < 1) {
        throw Error(ErrorKind::parameter, "invalid evaluation schedule");
    }
    TrainResult result;
    result.bounds = reward_bounds(model, config.max_steps);
    Agent agent(model.num_actions(), config.agent);
    Simulator sim(model, config.seed);
    std::vector<std::size_t> eval_rows;

    for (int ep = 1; ep <= config.episodes; ++ep) {
        const StateSet* init = nullptr;
        if (!training_init.empty()) {
            std::mt19937_64 pick_rng(stream_seed(config.seed, init_tag, static_cast<std::uint64_t>(ep)));
            std::uniform_int_distribution<std::size_t> pick(0, training_init.size() - 1);
            init = &training_init[pick(pick_rng)];
        }
        sim.reseed(stream_seed(config.seed, train_tag, static_cast<std::uint64_t>(ep)));
        auto session = sessions();
        const auto log = run_episode(sim, agent, *session, {epsilon_at(config, ep - 1), true, config.max_steps, init});
        const bool success = log.outcome == Outcome::reach;
        ++result.during.episodes;
        result.during.successes += success ? 1 : 0;
        result.during.violations += log.violations;
        result.during.faults += log.outcome == Outcome::shield_fault ? 1 : 0;
        result.rows.push_back({ep, "train", result.bounds.normalize(log.total_reward), success ? 1.0 : 0.0,
                               log.violations});

        if (ep % config.eval_every == 0 && config.eval_episodes > 0) {
            const auto batch = evaluate(model, agent, sessions, config, result.bounds,
                                        eval_tag + (static_cast<std::uint64_t>(ep) << 8), config.eval_episodes);
            add(result.periodic, batch.tally);
            result.raw_curve.emplace_back(ep, batch.mean_normalized);
            eval_rows.push_back(result.rows.size());
            result.rows.push_back({ep, "eval", batch.mean_normalized, batch.tally.success_rate(),
                                   batch.tally.violations});
        }
    }

    std::vector<double> raw;
    for (const auto& p : result.raw_curve) {
        raw.push_back(p.second);
    }
    const auto smoothed = smooth(raw, config.smooth);
    for (std::size_t i = 0; i < smoothed.size(); ++i) {
        result.curve.emplace_back(result.raw_curve[i].first, smoothed[i]);
        result.rows[eval_rows[i]].normalized_reward = smoothed[i];
    }

    if (config.final_episodes > 0) {
        const auto batch =
            evaluate(model, agent, sessions, config, result.bounds, final_tag, config.final_episodes);
        result.after = batch.tally;
        result.rows.push_back({config.episodes, "final", batch.mean_normalized, batch.tally.success_rate(),
                               batch.tally.violations});
    }
    result.q_entries = agent.size();
    return result;
}

TrainResult parallel_subtask_train(const Decomposition& dec, const SessionFactory& sessions,
                                   const TrainConfig& config) {
    std::vector<StateSet> inits{dec.global->init()};
    for (const auto& sub : dec.submodels) {
        if (!sub.init.empty() && std::find(inits.begin(), inits.end(), sub.init) == inits.end()) {
            inits.push_back(sub.init);
        }
    }
    return train(*dec.global, sessions, config, inits);
}

AuditReport audit_estimators(const Decomposition& dec, std::size_t traces, int max_steps, std::uint64_t seed,
                             CompositeShield* shield) {
    const Pomdp& m = *dec.global;
    AuditReport report;
    auto compare = [&](const StateSet& global, const SubmodelEstimators& subs, std::size_t trace, int t) {
        ++report.steps;
        const auto joined = subs.core_union();
        if (joined != global) {
            if (report.mismatches++ == 0) {
                report.first_mismatch = "trace " + std::to_string(trace) + " step " + std::to_string(t) +
                                        ": global " + global.to_string() + " vs submodels " + joined.to_string();
            }
        }
    };
    for (std::size_t k = 0; k < traces; ++k) {
        Simulator sim(m, stream_seed(seed, 5, k));
        Estimator est(m);
        SubmodelEstimators subs(dec);
        const ObsId z0 = sim.reset();
        est.reset(z0);
        subs.reset(z0);
        compare(est.current(), subs, k, 0);
        ++report.traces;
        for (int t = 1; t <= max_steps; ++t) {
            std::vector<ActionId> choices;
            ActionMask avail = available_actions(m, est.current());
            if (shield != nullptr) {
                try {
                    avail = shield->allowed(subs.parts());
                } catch (const Error& e) {
                    if (!is_shield_fault(e)) {
                        throw;
                    }
                    if (report.blocked++ == 0) {
                        report.first_block = "trace " + std::to_string(k) + " step " + std::to_string(t) + ": " +
                                             e.what();
                    }
                    break;
                }
            }
            for (ActionId a = 0; a < m.num_actions(); ++a) {
                if (mask_has(avail, a)) {
                    choices.push_back(a);
                }
            }
            std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
            const ActionId a = choices[pick(sim.rng())];
            const auto r = sim.step(a);
            est.step(a, r.obs);
            subs.step(a, r.obs);
            compare(est.current(), subs, k, t);
            if (r.reach || r.avoid) {
                break;
            }
        }
    }
    return report;
}

std::string metrics_csv(const TrainResult& result) {
    std::string out = "episode,phase,normalized_reward,success,violations\n";
    char buf[128];
    for (const auto& r : result.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.4f,%d\n", r.episode, r.phase.c_str(), r.normalized_reward,
                      r.success, r.violations);
        out += buf;
    }
    return out;
}

std::string summary_json(const TrainResult& result, const std::string& instance, const std::string& shield) {
    auto tally = [](const PhaseTally& t) {
        return nlohmann::ordered_json{{"episodes", t.episodes},
                                      {"violations", t.violations},
                                      {"success_rate", t.success_rate()},
                                      {"shield_faults", t.faults}};
    };
    nlohmann::ordered_json j;
    j["instance"] = instance;
    j["shield"] = shield;
    j["during"] = tally(result.during);
    j["periodic_eval"] = tally(result.periodic);
    j["after"] = tally(result.after);
    j["final_normalized_reward"] = result.final_reward();
    j["episodes_to_0.9"] = result.episodes_to(0.9);
    j["reward_bounds"] = {{"min", result.bounds.min}, {"max", result.bounds.max}};
    j["q_entries"] = result.q_entries;
    return j.dump(2) + "\n";
}

}  // namespace cshield
