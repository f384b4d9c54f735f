#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cshield/pomdp.hpp"

namespace cshield {

using NodeId = std::uint32_t;

inline constexpr std::size_t default_node_budget = 1'000'000;

struct GraphOptions {
    std::size_t budget = default_node_budget;
    /// Supports touching these states are interned but not expanded.
    StateSet stop;
    /// States removed from every support. A branch left empty is recorded
    /// as an exit of its (node, action) instead of an edge.
    StateSet drop;
};

/// Reachable belief-support MDP built by forward subset construction.
///
/// Nodes are stored as sorted member lists in one pool and explored in id
/// order; seeds added later never change edges of earlier nodes, so any id
/// prefix present before add_seed stays closed. Edges for (node, action)
/// list one successor per compatible observation, ordered by observation
/// index. A graph that threw budget_exceeded is incomplete; discard it.
class SupportGraph {
public:
    explicit SupportGraph(const Pomdp& model, GraphOptions options = {});

    /// Seeds every initial support {s in init : z in obs(s)} and explores.
    static SupportGraph build(const Pomdp& model, GraphOptions options = {});

    /// Interns `members` (sorted) minus dropped states and explores its
    /// closure; nullopt if nothing is left.
    std::optional<NodeId> add_seed(std::span<const StateId> members);
    std::optional<NodeId> add_seed(const StateSet& members);

    /// Lookup after removing dropped states.
    std::optional<NodeId> find(std::span<const StateId> members) const;
    std::optional<NodeId> find(const StateSet& members) const;

    std::vector<StateId> normalize(std::span<const StateId> members) const;

    const Pomdp& model() const { return *model_; }
    const GraphOptions& options() const { return options_; }
    std::size_t size() const { return offsets_.size() - 1; }
    std::size_t num_edges() const { return succ_.size(); }

    std::span<const StateId> members(NodeId n) const {
        return {pool_.data() + offsets_[n], static_cast<std::size_t>(offsets_[n + 1] - offsets_[n])};
    }
    StateSet members_set(NodeId n) const;

    ActionMask available(NodeId n) const { return avail_[n]; }
    /// Available actions of n with a branch emptied by the drop set.
    ActionMask exits(NodeId n) const { return exits_[n]; }
    std::span<const NodeId> successors(NodeId n, ActionId a) const {
        const auto i = static_cast<std::size_t>(n) * actions_ + a;
        return {succ_.data() + edge_start_[i], static_cast<std::size_t>(edge_start_[i + 1] - edge_start_[i])};
    }

    const std::vector<NodeId>& initials() const { return initials_; }

    bool intersects(NodeId n, const StateSet& set) const;
    bool subset_of(NodeId n, const StateSet& set) const;

private:
    std::pair<NodeId, bool> intern(std::span<const StateId> members);
    std::optional<NodeId> lookup(std::span<const StateId> members, std::uint64_t h) const;
    void explore();
    void grow_table();

    const Pomdp* model_;
    GraphOptions options_;
    std::size_t actions_;

    std::vector<StateId> pool_;
    std::vector<std::uint64_t> offsets_{0};
    std::vector<std::uint64_t> hashes_;
    std::vector<NodeId> table_;
    std::vector<ActionMask> avail_;
    std::vector<ActionMask> exits_;
    std::vector<std::uint64_t> edge_start_{0};
    std::vector<NodeId> succ_;
    std::vector<NodeId> initials_;

    // scratch
    std::vector<std::uint32_t> stamp_;
    std::uint32_t epoch_ = 0;
    std::vector<StateId> post_;
    std::vector<StateId> dropped_;
    std::vector<std::vector<StateId>> buckets_;
    std::vector<ObsId> touched_;
};

}  // namespace cshield
