#include "cshield/pomdp.hpp"

#include <algorithm>

#include "cshield/error.hpp"

namespace cshield {

std::uint64_t Specification::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 1099511628211ULL;
        }
    };
    mix(reach.universe());
    for (StateId s : reach) {
        mix(s);
    }
    mix(~std::uint64_t{0});
    for (StateId s : avoid) {
        mix(s);
    }
    return h;
}

std::optional<ActionId> Pomdp::action_index(std::string_view name) const {
    for (std::size_t i = 0; i < action_names_.size(); ++i) {
        if (action_names_[i] == name) {
            return static_cast<ActionId>(i);
        }
    }
    return std::nullopt;
}

std::optional<ObsId> Pomdp::observation_index(std::string_view name) const {
    for (std::size_t i = 0; i < obs_names_.size(); ++i) {
        if (obs_names_[i] == name) {
            return static_cast<ObsId>(i);
        }
    }
    return std::nullopt;
}

bool Pomdp::emits(StateId s, ObsId z) const {
    const auto& v = obs_[s];
    return std::binary_search(v.begin(), v.end(), z);
}

ActionMask Pomdp::all_actions() const {
    const auto n = num_actions();
    return n == 64 ? ~ActionMask{0} : (ActionMask{1} << n) - 1;
}

StateSet Pomdp::successors(const StateSet& from) const {
    StateSet out(num_states_);
    for (StateId s : from) {
        for (ActionId a = 0; a < num_actions(); ++a) {
            for (const auto& t : transitions(s, a)) {
                out.insert(t.target);
            }
        }
    }
    return out;
}

StateSet Pomdp::successors(const StateSet& from, ActionId a) const {
    StateSet out(num_states_);
    for (StateId s : from) {
        for (const auto& t : transitions(s, a)) {
            out.insert(t.target);
        }
    }
    return out;
}

bool operator==(const Pomdp& a, const Pomdp& b) {
    if (a.name_ != b.name_ || a.num_states_ != b.num_states_ || a.action_names_ != b.action_names_ ||
        a.obs_names_ != b.obs_names_ || a.init_ != b.init_ || a.obs_ != b.obs_ || a.rewards_ != b.rewards_ ||
        a.reach_ != b.reach_ || a.avoid_ != b.avoid_ || a.grid_ != b.grid_ || a.trans_.size() != b.trans_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.trans_.size(); ++i) {
        const auto& x = a.trans_[i];
        const auto& y = b.trans_[i];
        if (x.size() != y.size()) {
            return false;
        }
        for (std::size_t k = 0; k < x.size(); ++k) {
            if (x[k].target != y[k].target || x[k].weight != y[k].weight) {
                return false;
            }
        }
    }
    return true;
}

PomdpBuilder::PomdpBuilder(std::string name, std::size_t states, std::vector<std::string> actions,
                           std::vector<std::string> observations)
    : name_(std::move(name)),
      states_(states),
      actions_(std::move(actions)),
      observations_(std::move(observations)),
      obs_(states),
      trans_(states * actions_.size()),
      rewards_(states * actions_.size(), 0.0) {
    if (actions_.empty() || actions_.size() > max_actions) {
        throw Error(ErrorKind::semantic, "number of actions must be in 1.." + std::to_string(max_actions));
    }
    if (observations_.empty()) {
        throw Error(ErrorKind::semantic, "at least one observation is required");
    }
}

void PomdpBuilder::check_state(StateId s) const {
    if (s >= states_) {
        throw Error(ErrorKind::semantic, "unknown state " + std::to_string(s));
    }
}

void PomdpBuilder::check_action(ActionId a) const {
    if (a >= actions_.size()) {
        throw Error(ErrorKind::semantic, "unknown action index " + std::to_string(a));
    }
}

PomdpBuilder& PomdpBuilder::add_init(StateId s) {
    check_state(s);
    init_.push_back(s);
    return *this;
}

PomdpBuilder& PomdpBuilder::add_observation(StateId s, ObsId z) {
    check_state(s);
    if (z >= observations_.size()) {
        throw Error(ErrorKind::semantic, "unknown observation index " + std::to_string(z));
    }
    auto& v = obs_[s];
    if (std::find(v.begin(), v.end(), z) == v.end()) {
        v.push_back(z);
    }
    return *this;
}

PomdpBuilder& PomdpBuilder::add_transition(StateId s, ActionId a, StateId t, double weight) {
    check_state(s);
    check_state(t);
    check_action(a);
    if (weight < 0.0) {
        throw Error(ErrorKind::semantic, "negative transition weight");
    }
    auto& v = trans_[s * actions_.size() + a];
    for (auto& tr : v) {
        if (tr.target == t) {
            tr.weight += weight;
            return *this;
        }
    }
    v.push_back({t, weight});
    return *this;
}

PomdpBuilder& PomdpBuilder::set_reward(StateId s, ActionId a, double r) {
    check_state(s);
    check_action(a);
    rewards_[s * actions_.size() + a] = r;
    return *this;
}

PomdpBuilder& PomdpBuilder::set_reward_all(StateId s, double r) {
    for (ActionId a = 0; a < actions_.size(); ++a) {
        set_reward(s, a, r);
    }
    return *this;
}

PomdpBuilder& PomdpBuilder::add_reach(StateId s) {
    check_state(s);
    reach_.push_back(s);
    return *this;
}

PomdpBuilder& PomdpBuilder::add_avoid(StateId s) {
    check_state(s);
    avoid_.push_back(s);
    return *this;
}

PomdpBuilder& PomdpBuilder::set_grid(int n) {
    if (!grid_) {
        grid_ = GridMeta{};
        grid_->cells.resize(states_);
    }
    grid_->n = n;
    return *this;
}

PomdpBuilder& PomdpBuilder::set_cell(StateId s, CellInfo info) {
    check_state(s);
    if (!grid_) {
        set_grid(0);
    }
    grid_->cells[s] = info;
    return *this;
}

PomdpBuilder& PomdpBuilder::make_absorbing(StateId s) {
    check_state(s);
    for (ActionId a = 0; a < actions_.size(); ++a) {
        trans_[s * actions_.size() + a].clear();
        add_transition(s, a, s, 1.0);
    }
    return *this;
}

Pomdp PomdpBuilder::build() const {
    Pomdp m;
    m.name_ = name_;
    m.num_states_ = states_;
    m.action_names_ = actions_;
    m.obs_names_ = observations_;
    m.init_ = StateSet(states_, std::span<const StateId>(init_));
    m.reach_ = StateSet(states_, std::span<const StateId>(reach_));
    m.avoid_ = StateSet(states_, std::span<const StateId>(avoid_));
    m.grid_ = grid_;

    if (states_ == 0) {
        throw Error(ErrorKind::semantic, "model has no states");
    }
    if (m.init_.empty() && !allow_empty_init_) {
        throw Error(ErrorKind::semantic, "empty initial support");
    }
    if (m.reach_.intersects(m.avoid_)) {
        const auto both = (m.reach_ & m.avoid_).to_vector();
        throw Error(ErrorKind::semantic, "state " + std::to_string(both.front()) + " labeled both reach and avoid");
    }

    m.obs_ = obs_;
    m.compat_start_.assign(observations_.size() + 1, 0);
    for (StateId s = 0; s < states_; ++s) {
        auto& v = m.obs_[s];
        if (v.empty()) {
            throw Error(ErrorKind::semantic, "state " + std::to_string(s) + " has no observation");
        }
        std::sort(v.begin(), v.end());
        for (ObsId z : v) {
            ++m.compat_start_[z + 1];
        }
    }
    for (std::size_t z = 0; z < observations_.size(); ++z) {
        m.compat_start_[z + 1] += m.compat_start_[z];
    }
    m.compat_.resize(m.compat_start_.back());
    auto fill = m.compat_start_;
    for (StateId s = 0; s < states_; ++s) {
        for (ObsId z : m.obs_[s]) {
            m.compat_[fill[z]++] = s;
        }
    }

    m.trans_ = trans_;
    m.enabled_.assign(states_, 0);
    for (StateId s = 0; s < states_; ++s) {
        for (ActionId a = 0; a < actions_.size(); ++a) {
            auto& v = m.trans_[s * actions_.size() + a];
            std::sort(v.begin(), v.end(), [](const Transition& x, const Transition& y) { return x.target < y.target; });
            if (!v.empty()) {
                m.enabled_[s] |= mask_of(a);
            }
        }
        if (m.enabled_[s] == 0) {
            throw Error(ErrorKind::semantic, "state " + std::to_string(s) + " has no enabled action");
        }
    }
    m.rewards_ = rewards_;
    return m;
}

}  // namespace cshield
