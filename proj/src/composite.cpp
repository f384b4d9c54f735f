#include "cshield/composite.hpp"

#include <atomic>
#include <exception>
#include <thread>

#include "cshield/error.hpp"

namespace cshield {

GraphOptions local_graph_options(const Submodel& sub, ShieldMode mode, std::size_t budget) {
    const Pomdp& m = sub.model;
    GraphOptions o{budget, m.avoid(), {}};
    if (mode == ShieldMode::avoid) {
        o.drop = sub.interface_local - m.avoid();
    } else {
        // an absorbing non-target state keeps its branch out of the target
        o.stop = m.avoid() | (sub.interface_local - m.reach());
        o.drop = (sub.interface_local & m.reach()) - m.avoid();
    }
    return o;
}

SubShieldRuntime::SubShieldRuntime(const Submodel& sub, ShieldMode mode, std::size_t budget)
    : sub_(&sub), mode_(mode), budget_(budget) {
    graph_ = std::make_unique<SupportGraph>(SupportGraph::build(sub.model, local_graph_options(sub, mode, budget)));
    region_ = solve_region(*graph_, sub.model.spec(), mode);
    table_ = Shield::from_region(*graph_, region_, sub.model.spec(), mode);
    table_.set_interface(sub.interface_local);
    initial_nodes_ = graph_->size();
    for (NodeId n : graph_->initials()) {
        ++init_status_.second;
        init_status_.first += region_[n] != 0 ? 1 : 0;
    }
}

SubShieldRuntime::SubShieldRuntime(const Submodel& sub, Shield table, ShieldMode mode, std::size_t budget)
    : sub_(&sub), mode_(mode), budget_(budget), table_(std::move(table)) {
    if (table_.num_states() != sub.model.num_states() || table_.action_names() != sub.model.action_names()) {
        throw Error(ErrorKind::semantic, "shield table does not match submodel '" + sub.name + "'");
    }
    if (table_.spec_hash() != sub.model.spec().hash()) {
        throw Error(ErrorKind::semantic, "shield table for '" + sub.name + "' was computed for another specification");
    }
    table_.set_interface(sub.interface_local);
}

void SubShieldRuntime::ensure_graph() {
    if (!graph_) {
        graph_ = std::make_unique<SupportGraph>(
            SupportGraph::build(sub_->model, local_graph_options(*sub_, mode_, budget_)));
        region_ = solve_region(*graph_, sub_->model.spec(), mode_);
        initial_nodes_ = graph_->size();
    }
}

ActionMask SubShieldRuntime::query_local(std::span<const StateId> support) {
    if (support.empty()) {
        throw Error(ErrorKind::precondition, "empty local support");
    }
    bool interface_only = true;
    for (StateId s : support) {
        interface_only = interface_only && sub_->interface_local.contains(s);
    }
    if (interface_only) {
        return sub_->model.all_actions();
    }
    if (auto hit = table_.lookup(support)) {
        return *hit;
    }
    std::lock_guard lock(mu_);
    try {
        ensure_graph();
        if (auto n = graph_->find(support)) {
            return region_[*n];
        }
        const auto n = graph_->add_seed(support);
        if (!n) {
            return sub_->model.all_actions();
        }
        extend_region(*graph_, sub_->model.spec(), mode_, region_);
        ++extensions_;
        return region_[*n];
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::budget_exceeded) {
            graph_.reset();
            region_.clear();
        }
        throw;
    }
}

std::size_t SubShieldRuntime::support_nodes() const {
    std::lock_guard lock(mu_);
    return graph_ ? graph_->size() : 0;
}

std::size_t SubShieldRuntime::extensions() const {
    std::lock_guard lock(mu_);
    return extensions_;
}

CompositeShield::CompositeShield(const Decomposition& dec, ShieldMode mode, std::size_t budget, unsigned jobs)
    : dec_(&dec), mode_(mode), subs_(dec.size()) {
    std::vector<std::exception_ptr> errors(dec.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < dec.size(); i = next++) {
            try {
                subs_[i] = std::make_unique<SubShieldRuntime>(dec.submodels[i], mode, budget);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned n = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(dec.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n; ++t) {
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
}

CompositeShield::CompositeShield(const Decomposition& dec, std::vector<Shield> tables, ShieldMode mode,
                                 std::size_t budget)
    : dec_(&dec), mode_(mode) {
    if (tables.size() != dec.size()) {
        throw Error(ErrorKind::semantic, "expected " + std::to_string(dec.size()) + " sub-shields, got " +
                                             std::to_string(tables.size()));
    }
    for (std::size_t i = 0; i < dec.size(); ++i) {
        subs_.push_back(std::make_unique<SubShieldRuntime>(dec.submodels[i], std::move(tables[i]), mode, budget));
    }
}

std::vector<LocalVerdict> CompositeShield::verdicts(const StateSet& belief) {
    std::vector<StateSet> parts;
    parts.reserve(dec_->size());
    for (const auto& sub : dec_->submodels) {
        parts.push_back(belief & sub.extended);
    }
    return verdicts(parts);
}

std::vector<LocalVerdict> CompositeShield::verdicts(const std::vector<StateSet>& parts) {
    std::vector<LocalVerdict> out;
    for (std::size_t i = 0; i < dec_->size(); ++i) {
        const auto& sub = dec_->submodels[i];
        if (!parts[i].intersects(sub.core)) {
            continue;
        }
        const auto local = sub.to_local_ids(parts[i]);
        out.push_back({i, subs_[i]->query_local(local)});
    }
    return out;
}

ActionMask CompositeShield::combine(const std::vector<LocalVerdict>& v, const std::string& where) const {
    const auto& names = dec_->global->action_names();
    ActionMask result = dec_->global->all_actions();
    for (const auto& lv : v) {
        if (lv.allowed == 0) {
            throw Error(ErrorKind::off_region, "support " + where + " is losing for submodel '" +
                                                   dec_->submodels[lv.submodel].name + "'");
        }
        result &= lv.allowed;
    }
    if (v.empty()) {
        throw Error(ErrorKind::precondition, "support " + where + " activates no submodel");
    }
    if (result == 0) {
        std::string detail;
        for (const auto& lv : v) {
            detail += " " + dec_->submodels[lv.submodel].name + "={" + format_actions(lv.allowed, names) + "}";
        }
        throw Error(ErrorKind::empty_intersection, "no common action at " + where + ":" + detail);
    }
    return result;
}

ActionMask CompositeShield::allowed(const StateSet& belief) {
    return combine(verdicts(belief), belief.to_string());
}

ActionMask CompositeShield::allowed(const std::vector<StateSet>& parts) {
    const auto v = verdicts(parts);
    StateSet all(dec_->global->num_states());
    for (const auto& p : parts) {
        all |= p;
    }
    return combine(v, all.to_string());
}

void SubmodelEstimators::reset(ObsId z0) {
    reset(dec_->global->init(), z0);
}

void SubmodelEstimators::reset(const StateSet& init, ObsId z0) {
    const auto b = initial_support(*dec_->global, init, z0);
    parts_.clear();
    for (const auto& sub : dec_->submodels) {
        parts_.push_back(b & sub.extended);
    }
}

void SubmodelEstimators::step(ActionId a, ObsId z) {
    const Pomdp& g = *dec_->global;
    StateSet next(g.num_states());
    for (std::size_t j = 0; j < dec_->size(); ++j) {
        const auto& sub = dec_->submodels[j];
        for (StateId s : parts_[j]) {
            if (!sub.core.contains(s)) {
                continue;
            }
            for (const auto& t : sub.model.transitions(sub.to_local[s], a)) {
                if (sub.model.emits(t.target, z)) {
                    next.insert(sub.to_global[t.target]);
                }
            }
        }
    }
    if (next.empty()) {
        throw Error(ErrorKind::inconsistent_observation,
                    "observation '" + g.observation_names()[z] + "' impossible for every submodel estimator");
    }
    for (std::size_t i = 0; i < dec_->size(); ++i) {
        parts_[i] = next & dec_->submodels[i].extended;
    }
}

StateSet SubmodelEstimators::core_union() const {
    StateSet out(dec_->global->num_states());
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        out |= parts_[i] & dec_->submodels[i].core;
    }
    return out;
}

ActionMask UnshieldedSession::reset(ObsId z0) {
    return available_actions(*model_, est_.reset(z0));
}

ActionMask UnshieldedSession::reset(const StateSet& init, ObsId z0) {
    return available_actions(*model_, est_.reset(init, z0));
}

ActionMask UnshieldedSession::step(ActionId a, ObsId z) {
    return available_actions(*model_, est_.step(a, z));
}

namespace {

void check_allowed(ActionMask last, ActionId a) {
    if (!mask_has(last, a)) {
        throw Error(ErrorKind::precondition, "action " + std::to_string(a) + " is not in the allowed set");
    }
}

}  // namespace

ActionMask CentralSession::reset(ObsId z0) {
    last_ = shield_->query(est_.reset(z0));
    return last_;
}

ActionMask CentralSession::reset(const StateSet& init, ObsId z0) {
    last_ = shield_->query(est_.reset(init, z0));
    return last_;
}

ActionMask CentralSession::step(ActionId a, ObsId z) {
    check_allowed(last_, a);
    last_ = shield_->query(est_.step(a, z));
    return last_;
}

ActionMask CompositeSession::reset(ObsId z0) {
    est_.reset(z0);
    subs_.reset(z0);
    last_ = shield_->allowed(subs_.parts());
    return last_;
}

ActionMask CompositeSession::reset(const StateSet& init, ObsId z0) {
    est_.reset(init, z0);
    subs_.reset(init, z0);
    last_ = shield_->allowed(subs_.parts());
    return last_;
}

ActionMask CompositeSession::step(ActionId a, ObsId z) {
    check_allowed(last_, a);
    est_.step(a, z);
    subs_.step(a, z);
    last_ = shield_->allowed(subs_.parts());
    return last_;
}

}  // namespace cshield
