#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "cshield/belief.hpp"
#include "cshield/decomposition.hpp"
#include "cshield/shield.hpp"

namespace cshield {

/// Graph options for a submodel: stop at avoid states and drop interface
/// states that cannot affect the verdict (every non-avoid one in avoid
/// mode, proxy targets in reach-avoid mode where other interface states
/// stop).
GraphOptions local_graph_options(const Submodel& sub, ShieldMode mode, std::size_t budget);

/// Local shield of one submodel plus an exact on-demand extension for
/// supports outside the synthesized table (filtered global supports need
/// not be reachable in the local forward graph).
class SubShieldRuntime {
public:
    /// Synthesizes from the submodel's local model and specification.
    SubShieldRuntime(const Submodel& sub, ShieldMode mode, std::size_t budget = default_node_budget);
    /// Uses a previously saved table; the graph is rebuilt only on a miss.
    SubShieldRuntime(const Submodel& sub, Shield table, ShieldMode mode, std::size_t budget = default_node_budget);

    const Submodel& submodel() const { return *sub_; }
    const Shield& shield() const { return table_; }

    /// Allowed actions for a local support (sorted local ids). Interface-only
    /// supports return every action; losing supports return 0.
    ActionMask query_local(std::span<const StateId> support);

    std::size_t support_nodes() const;
    std::size_t initial_nodes() const { return initial_nodes_; }
    /// Local initial supports that are winning / total.
    std::pair<std::size_t, std::size_t> initial_status() const { return init_status_; }
    std::size_t extensions() const;

private:
    void ensure_graph();

    const Submodel* sub_;
    ShieldMode mode_;
    std::size_t budget_;
    Shield table_;
    std::size_t initial_nodes_ = 0;
    std::pair<std::size_t, std::size_t> init_status_{0, 0};

    mutable std::mutex mu_;
    std::unique_ptr<SupportGraph> graph_;
    std::vector<ActionMask> region_;
    std::size_t extensions_ = 0;
};

struct LocalVerdict {
    std::size_t submodel;
    ActionMask allowed;  // 0 = losing
};

/// Act' = ∩ over submodels with B ∩ S_i ≠ ∅ of
/// ν_i(B ∩ Ŝ_i).
class CompositeShield {
public:
    /// Synthesizes every submodel shield, `jobs` at a time.
    CompositeShield(const Decomposition& dec, ShieldMode mode, std::size_t budget = default_node_budget,
                    unsigned jobs = 1);
    CompositeShield(const Decomposition& dec, std::vector<Shield> tables, ShieldMode mode,
                    std::size_t budget = default_node_budget);

    const Decomposition& decomposition() const { return *dec_; }
    ShieldMode mode() const { return mode_; }
    std::size_t size() const { return subs_.size(); }
    SubShieldRuntime& sub(std::size_t i) { return *subs_[i]; }
    const SubShieldRuntime& sub(std::size_t i) const { return *subs_[i]; }

    /// Per-active-submodel verdicts for global support B.
    std::vector<LocalVerdict> verdicts(const StateSet& belief);
    /// Per-submodel supports B_i (global ids) instead of a single global B.
    std::vector<LocalVerdict> verdicts(const std::vector<StateSet>& parts);

    /// Throws off_region if an active submodel's support is losing and
    /// empty_intersection if the intersection is empty.
    ActionMask allowed(const StateSet& belief);
    ActionMask allowed(const std::vector<StateSet>& parts);

private:
    ActionMask combine(const std::vector<LocalVerdict>& v, const std::string& where) const;

    const Decomposition* dec_;
    ShieldMode mode_;
    std::vector<std::unique_ptr<SubShieldRuntime>> subs_;
};

/// Per-submodel estimators σ_i. Each step pushes the core part of every B_j
/// through submodel j's own local model, maps back to global ids and
/// filters to Ŝ_i.
class SubmodelEstimators {
public:
    explicit SubmodelEstimators(const Decomposition& dec) : dec_(&dec) {}

    void reset(ObsId z0);
    void reset(const StateSet& init, ObsId z0);
    void step(ActionId a, ObsId z);

    /// B_i in global ids (subset of Ŝ_i, possibly empty).
    const std::vector<StateSet>& parts() const { return parts_; }
    /// ∪_i (B_i ∩ S_i)
    StateSet core_union() const;

private:
    const Decomposition* dec_;
    std::vector<StateSet> parts_;
};

/// Per-episode shield interface used by the agent loop.
class ShieldSession {
public:
    virtual ~ShieldSession() = default;
    virtual ActionMask reset(ObsId z0) = 0;
    /// Starts from `init` instead of the model's initial states.
    virtual ActionMask reset(const StateSet& init, ObsId z0) = 0;
    /// `a` must be in the last returned set (precondition error otherwise).
    virtual ActionMask step(ActionId a, ObsId z) = 0;
    virtual const StateSet& belief() const = 0;
};

class UnshieldedSession : public ShieldSession {
public:
    explicit UnshieldedSession(const Pomdp& model) : model_(&model), est_(model) {}
    ActionMask reset(ObsId z0) override;
    ActionMask reset(const StateSet& init, ObsId z0) override;
    ActionMask step(ActionId a, ObsId z) override;
    const StateSet& belief() const override { return est_.current(); }

private:
    const Pomdp* model_;
    Estimator est_;
};

class CentralSession : public ShieldSession {
public:
    CentralSession(const Pomdp& model, const Shield& shield) : shield_(&shield), est_(model) {}
    ActionMask reset(ObsId z0) override;
    ActionMask reset(const StateSet& init, ObsId z0) override;
    ActionMask step(ActionId a, ObsId z) override;
    const StateSet& belief() const override { return est_.current(); }

private:
    const Shield* shield_;
    Estimator est_;
    ActionMask last_ = 0;
};

class CompositeSession : public ShieldSession {
public:
    explicit CompositeSession(CompositeShield& shield)
        : shield_(&shield), est_(*shield.decomposition().global), subs_(shield.decomposition()) {}
    ActionMask reset(ObsId z0) override;
    ActionMask reset(const StateSet& init, ObsId z0) override;
    ActionMask step(ActionId a, ObsId z) override;
    const StateSet& belief() const override { return est_.current(); }
    const SubmodelEstimators& estimators() const { return subs_; }

private:
    CompositeShield* shield_;
    Estimator est_;
    SubmodelEstimators subs_;
    ActionMask last_ = 0;
};

}  // namespace cshield
