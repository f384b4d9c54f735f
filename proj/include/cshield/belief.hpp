#pragma once

#include <optional>

#include "cshield/pomdp.hpp"

namespace cshield {

/// {s in init : z0 observable in s}; throws inconsistent_observation if empty.
StateSet initial_support(const Pomdp& model, ObsId z0);
/// Same with an explicit initial set in place of the model's.
StateSet initial_support(const Pomdp& model, const StateSet& init, ObsId z0);

/// {s' : exists s in B, s' in trans(s,a), z observable in s'}. States of B
/// where a is disabled are skipped. Throws inconsistent_observation if empty.
StateSet update_support(const Pomdp& model, const StateSet& belief, ActionId a, ObsId z);

/// B restricted to a submodel's states; may be empty.
inline StateSet submodel_support(const StateSet& belief, const StateSet& filter) { return belief & filter; }

/// Commonly enabled actions of a support.
ActionMask available_actions(const Pomdp& model, const StateSet& belief);

/// Deterministic fold over an observation/action history.
class Estimator {
public:
    explicit Estimator(const Pomdp& model, std::optional<StateSet> domain = std::nullopt)
        : model_(&model), domain_(std::move(domain)) {}

    const StateSet& reset(ObsId z0);
    const StateSet& reset(const StateSet& init, ObsId z0);
    const StateSet& step(ActionId a, ObsId z);
    const StateSet& current() const { return current_; }

private:
    void clamp();

    const Pomdp* model_;
    std::optional<StateSet> domain_;
    StateSet current_;
};

}  // namespace cshield
