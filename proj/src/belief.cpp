#include "cshield/belief.hpp"

#include "cshield/error.hpp"

namespace cshield {

StateSet initial_support(const Pomdp& model, ObsId z0) {
    return initial_support(model, model.init(), z0);
}

StateSet initial_support(const Pomdp& model, const StateSet& init, ObsId z0) {
    if (z0 >= model.num_observations()) {
        throw Error(ErrorKind::inconsistent_observation, "unknown observation index " + std::to_string(z0));
    }
    StateSet b(model.num_states());
    for (StateId s : init) {
        if (model.emits(s, z0)) {
            b.insert(s);
        }
    }
    if (b.empty()) {
        throw Error(ErrorKind::inconsistent_observation,
                    "no initial state emits observation '" + model.observation_names()[z0] + "'");
    }
    return b;
}

StateSet update_support(const Pomdp& model, const StateSet& belief, ActionId a, ObsId z) {
    StateSet next(model.num_states());
    for (StateId s : belief) {
        for (const auto& t : model.transitions(s, a)) {
            if (model.emits(t.target, z)) {
                next.insert(t.target);
            }
        }
    }
    if (next.empty()) {
        throw Error(ErrorKind::inconsistent_observation,
                    "observation '" + model.observation_names()[z] + "' impossible after action '" +
                        model.action_names()[a] + "' from " + belief.to_string());
    }
    return next;
}

ActionMask available_actions(const Pomdp& model, const StateSet& belief) {
    ActionMask m = model.all_actions();
    for (StateId s : belief) {
        m &= model.enabled(s);
    }
    return m;
}

void Estimator::clamp() {
    if (domain_) {
        current_ &= *domain_;
    }
}

const StateSet& Estimator::reset(ObsId z0) {
    current_ = initial_support(*model_, z0);
    clamp();
    return current_;
}

const StateSet& Estimator::reset(const StateSet& init, ObsId z0) {
    current_ = initial_support(*model_, init, z0);
    clamp();
    return current_;
}

const StateSet& Estimator::step(ActionId a, ObsId z) {
    current_ = update_support(*model_, current_, a, z);
    clamp();
    return current_;
}

}  // namespace cshield
