#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cshield/state_set.hpp"

namespace cshield {

/// Action sets are bitmasks; models are limited to 64 actions.
using ActionMask = std::uint64_t;
inline constexpr std::size_t max_actions = 64;

inline bool mask_has(ActionMask m, ActionId a) { return (m >> a) & 1U; }
inline ActionMask mask_of(ActionId a) { return ActionMask{1} << a; }

struct Transition {
    StateId target;
    double weight;  // 0 when unspecified
};

struct Specification {
    StateSet reach;
    StateSet avoid;

    std::uint64_t hash() const;
};

/// Coordinates attached by the grid generators. Fields are -1 when absent.
struct CellInfo {
    int x = -1;
    int y = -1;
    int energy = -1;
    int adv_x = -1;
    int adv_y = -1;

    bool has_cell() const { return x >= 0 && y >= 0; }
    bool has_adversary() const { return adv_x >= 0 && adv_y >= 0; }
    friend bool operator==(const CellInfo&, const CellInfo&) = default;
};

struct GridMeta {
    int n = 0;
    std::vector<CellInfo> cells;  // one per state
    friend bool operator==(const GridMeta&, const GridMeta&) = default;
};

class PomdpBuilder;

/// Partial POMDP: transition and observation supports, rewards, labels.
/// Immutable after construction.
class Pomdp {
public:
    const std::string& name() const { return name_; }
    std::size_t num_states() const { return num_states_; }
    std::size_t num_actions() const { return action_names_.size(); }
    std::size_t num_observations() const { return obs_names_.size(); }

    const std::vector<std::string>& action_names() const { return action_names_; }
    const std::vector<std::string>& observation_names() const { return obs_names_; }
    std::optional<ActionId> action_index(std::string_view name) const;
    std::optional<ObsId> observation_index(std::string_view name) const;

    const StateSet& init() const { return init_; }
    std::span<const ObsId> observations(StateId s) const { return obs_[s]; }
    /// States that can emit z, ascending.
    std::span<const StateId> compatible(ObsId z) const {
        return {compat_.data() + compat_start_[z], compat_start_[z + 1] - compat_start_[z]};
    }
    bool emits(StateId s, ObsId z) const;

    std::span<const Transition> transitions(StateId s, ActionId a) const { return trans_[s * num_actions() + a]; }
    ActionMask enabled(StateId s) const { return enabled_[s]; }
    ActionMask all_actions() const;

    double reward(StateId s, ActionId a) const { return rewards_[s * num_actions() + a]; }

    const StateSet& reach() const { return reach_; }
    const StateSet& avoid() const { return avoid_; }
    Specification spec() const { return {reach_, avoid_}; }

    const std::optional<GridMeta>& grid() const { return grid_; }

    /// post(S): all one-step successors over all enabled actions.
    StateSet successors(const StateSet& from) const;
    /// Successors under a single action.
    StateSet successors(const StateSet& from, ActionId a) const;

    friend bool operator==(const Pomdp&, const Pomdp&);

private:
    friend class PomdpBuilder;

    std::string name_;
    std::size_t num_states_ = 0;
    std::vector<std::string> action_names_;
    std::vector<std::string> obs_names_;
    StateSet init_;
    std::vector<std::vector<ObsId>> obs_;
    std::vector<std::size_t> compat_start_;
    std::vector<StateId> compat_;
    std::vector<std::vector<Transition>> trans_;
    std::vector<ActionMask> enabled_;
    std::vector<double> rewards_;
    StateSet reach_;
    StateSet avoid_;
    std::optional<GridMeta> grid_;
};

/// Mutable construction helper; build() validates.
class PomdpBuilder {
public:
    PomdpBuilder(std::string name, std::size_t states, std::vector<std::string> actions, std::vector<std::string> observations);

    std::size_t num_states() const { return states_; }
    std::size_t num_actions() const { return actions_.size(); }

    PomdpBuilder& add_init(StateId s);
    PomdpBuilder& add_observation(StateId s, ObsId z);
    /// Repeated (s,a,t) accumulates weight.
    PomdpBuilder& add_transition(StateId s, ActionId a, StateId t, double weight = 0.0);
    PomdpBuilder& set_reward(StateId s, ActionId a, double r);
    PomdpBuilder& set_reward_all(StateId s, double r);
    PomdpBuilder& add_reach(StateId s);
    PomdpBuilder& add_avoid(StateId s);
    PomdpBuilder& set_grid(int n);
    PomdpBuilder& set_cell(StateId s, CellInfo info);
    /// Self-loop on every action.
    PomdpBuilder& make_absorbing(StateId s);

    /// Submodels may legitimately have no initial state.
    PomdpBuilder& allow_empty_init(bool allow = true) {
        allow_empty_init_ = allow;
        return *this;
    }

    Pomdp build() const;

private:
    void check_state(StateId s) const;
    void check_action(ActionId a) const;

    std::string name_;
    std::size_t states_;
    std::vector<std::string> actions_;
    std::vector<std::string> observations_;
    std::vector<StateId> init_;
    std::vector<std::vector<ObsId>> obs_;
    std::vector<std::vector<Transition>> trans_;
    std::vector<double> rewards_;
    std::vector<StateId> reach_;
    std::vector<StateId> avoid_;
    std::optional<GridMeta> grid_;
    bool allow_empty_init_ = false;
};

}  // namespace cshield
