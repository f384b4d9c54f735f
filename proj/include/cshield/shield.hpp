#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cshield/pomdp.hpp"
#include "cshield/support_graph.hpp"

namespace cshield {

enum class ShieldMode { avoid, reach_avoid };

std::string_view to_string(ShieldMode mode);
ShieldMode parse_shield_mode(std::string_view text);

/// Solves the winning region for graph nodes [allowed.size(), g.size()) and
/// appends their allowed masks (0 = losing). Nodes already in `allowed` are
/// taken as decided; their closure must lie within the prefix.
///
/// avoid: greatest fixpoint of supports free of avoid states that have an
/// action keeping every successor inside.
/// reach_avoid: additionally prune supports without a path to a support
/// contained in reach, over edges of safe actions, until stable.
void extend_region(const SupportGraph& g, const Specification& spec, ShieldMode mode, std::vector<ActionMask>& allowed);

std::vector<ActionMask> solve_region(const SupportGraph& g, const Specification& spec, ShieldMode mode);

struct SupportKeyHash {
    std::size_t operator()(const std::vector<StateId>& v) const;
};

/// Permissive policy over belief supports.
class Shield {
public:
    Shield() = default;
    Shield(std::string model_name, std::vector<std::string> actions, std::size_t num_states, std::uint64_t spec_hash,
           ShieldMode mode);

    /// Winning nodes of `g` with their allowed sets.
    static Shield from_region(const SupportGraph& g, std::span<const ActionMask> allowed, const Specification& spec,
                              ShieldMode mode);

    const std::string& model_name() const { return model_name_; }
    const std::vector<std::string>& action_names() const { return actions_; }
    std::size_t num_states() const { return num_states_; }
    std::uint64_t spec_hash() const { return spec_hash_; }
    ShieldMode mode() const { return mode_; }
    std::size_t size() const { return table_.size(); }

    /// Supports inside this set are unrestricted (submodel interface).
    const StateSet& interface() const { return interface_; }
    void set_interface(StateSet interface) { interface_ = std::move(interface); }
    /// States stripped from a support before lookup; a support left empty
    /// is unrestricted.
    const StateSet& dropped() const { return dropped_; }


    void insert(std::vector<StateId> support, ActionMask allowed);
    std::optional<ActionMask> lookup(std::span<const StateId> support) const;

    /// Mapped support -> its set; support inside the interface or made of
    /// dropped states -> all actions; otherwise off-region error.
    ActionMask query(const StateSet& support) const;

    /// Entries in canonical order.
    std::vector<std::pair<std::vector<StateId>, ActionMask>> entries() const;

    std::string serialize() const;
    static Shield parse(std::string_view text);

    friend bool operator==(const Shield& a, const Shield& b);

private:
    ActionMask all_actions() const;

    std::string model_name_;
    std::vector<std::string> actions_;
    std::size_t num_states_ = 0;
    std::uint64_t spec_hash_ = 0;
    ShieldMode mode_ = ShieldMode::avoid;
    StateSet interface_;
    StateSet dropped_;
    std::unordered_map<std::vector<StateId>, ActionMask, SupportKeyHash> table_;
};

struct SynthesisResult {
    Shield shield;
    std::size_t support_nodes = 0;
    std::size_t winning_nodes = 0;
};

/// Builds the support graph of `model`, solves it and checks every initial
/// support is winning (unrealizable otherwise).
SynthesisResult synthesize(const Pomdp& model, const Specification& spec, ShieldMode mode,
                           std::size_t budget = default_node_budget);
SynthesisResult synthesize(const Pomdp& model, const Specification& spec, ShieldMode mode, GraphOptions options);

Shield avoid_shield(const SupportGraph& g, const Specification& spec);
Shield reach_avoid_shield(const SupportGraph& g, const Specification& spec);

std::string format_actions(ActionMask mask, const std::vector<std::string>& names);

}  // namespace cshield
