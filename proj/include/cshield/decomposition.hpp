#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cshield/pomdp.hpp"
#include "cshield/shield.hpp"

namespace cshield {

inline constexpr StateId no_state = ~StateId{0};

struct CoverSet {
    std::string name;
    StateSet states;
};

/// Submodel over the extended set Ŝ = core ∪ post(core). Local state k is
/// the k-th smallest global id of Ŝ; interface states are absorbing with
/// zero reward.
struct Submodel {
    std::string name;
    StateSet core;      // global ids
    StateSet extended;  // global ids
    std::vector<StateId> to_global;
    std::vector<StateId> to_local;  // no_state outside Ŝ

    StateSet init;  // global ids, subset of core
    Specification local_spec;  // global ids
    bool winning = false;
    bool overapproximated = false;

    Pomdp model;  // local ids; labels follow local_spec
    StateSet core_local;
    StateSet interface_local;

    StateSet interface() const { return extended - core; }
    StateSet to_local_set(const StateSet& global) const;
    StateSet to_global_set(const StateSet& local) const;
    std::vector<StateId> to_local_ids(const StateSet& global) const;
};

struct Decomposition {
    const Pomdp* global = nullptr;
    std::vector<Submodel> submodels;
    /// edges[i] = sorted j with (post(S_i) \ S_i) ∩ S_j ≠ ∅
    std::vector<std::vector<std::size_t>> edges;

    std::size_t size() const { return submodels.size(); }
    bool has_edge(std::size_t i, std::size_t j) const;
    std::size_t max_extended_states() const;
};

/// Builds submodels; checks cover (P1) and initialization consistency (P2).
Decomposition decompose(const Pomdp& model, const std::vector<CoverSet>& cover);

/// Throws cover_violation / init_violation when P1 / P2 fail.
void check_admissible(const Decomposition& dec);

enum class CoverKind { single, dual };

/// Grid quadrants (ceil split) by agent cell, or agent x adversary
/// quadrant for `dual`. States without cell metadata join every quadrant
/// that holds one of their predecessors.
std::vector<CoverSet> quadrant_cover(const Pomdp& model, CoverKind kind);

/// AVOID_i = avoid ∩ Ŝ_i. REACH_i = reach ∩ S_i for winning submodels,
/// otherwise interface states in neighbours that lead to a winning
/// submodel. In reach_avoid mode an empty REACH_i is a stranded-submodel
/// error.
void assign_local_specs(Decomposition& dec, const Specification& spec, ShieldMode mode);

/// Seeds submodels without global initial states with core states entered
/// from predecessor cores.
void overapproximate_initials(Decomposition& dec);

/// decompose + assign_local_specs + overapproximate_initials.
Decomposition prepare_decomposition(const Pomdp& model, const std::vector<CoverSet>& cover, ShieldMode mode);

/// Cover file: one line per submodel,
///   sub <name>: <item> <item> ...
/// where an item is a state id, a range lo-hi, or for grid models
/// cell(x0..x1,y0..y1) optionally followed by *adv(x0..x1,y0..y1).
std::vector<CoverSet> parse_cover(std::string_view text, const Pomdp& model);
std::string serialize_cover(const std::vector<CoverSet>& cover);

/// Dual quadrants for grids with an adversary (the agent's quadrant alone
/// does not bound the robot), plain quadrants otherwise.
std::string auto_cover_name(const Pomdp& model);

/// "auto", "quadrant", "dual-quadrant", "single" or "file:<path>".
std::vector<CoverSet> resolve_cover(std::string_view choice, const Pomdp& model);

}  // namespace cshield
