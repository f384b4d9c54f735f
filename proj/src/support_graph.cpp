#include "cshield/support_graph.hpp"

#include <algorithm>

#include "cshield/error.hpp"

namespace cshield {

namespace {

constexpr NodeId empty_slot = ~NodeId{0};

std::uint64_t hash_members(std::span<const StateId> members) {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ members.size();
    for (StateId s : members) {
        h ^= s + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 0xff51afd7ed558ccdULL;
    }
    return h ^ (h >> 33);
}

}  // namespace

SupportGraph::SupportGraph(const Pomdp& model, GraphOptions options)
    : model_(&model),
      options_(std::move(options)),
      actions_(model.num_actions()),
      table_(1024, empty_slot),
      stamp_(model.num_states(), 0),
      buckets_(model.num_observations()) {
    if (options_.stop.universe() != model.num_states()) {
        options_.stop = StateSet(model.num_states());
    }
    if (options_.drop.universe() != model.num_states()) {
        options_.drop = StateSet(model.num_states());
    }
}

SupportGraph SupportGraph::build(const Pomdp& model, GraphOptions options) {
    SupportGraph g(model, std::move(options));
    std::vector<ObsId> zs;
    for (StateId s : model.init()) {
        zs.insert(zs.end(), model.observations(s).begin(), model.observations(s).end());
    }
    std::sort(zs.begin(), zs.end());
    zs.erase(std::unique(zs.begin(), zs.end()), zs.end());
    for (ObsId z : zs) {
        std::vector<StateId> v;
        for (StateId s : model.init()) {
            if (model.emits(s, z) && !g.options_.drop.contains(s)) {
                v.push_back(s);
            }
        }
        if (v.empty()) {
            continue;
        }
        const auto [id, fresh] = g.intern(v);
        if (std::find(g.initials_.begin(), g.initials_.end(), id) == g.initials_.end()) {
            g.initials_.push_back(id);
        }
    }
    g.explore();
    return g;
}

std::vector<StateId> SupportGraph::normalize(std::span<const StateId> members) const {
    std::vector<StateId> out;
    out.reserve(members.size());
    for (StateId s : members) {
        if (!options_.drop.contains(s)) {
            out.push_back(s);
        }
    }
    return out;
}

std::optional<NodeId> SupportGraph::add_seed(std::span<const StateId> members) {
    const auto v = normalize(members);
    if (v.empty()) {
        return std::nullopt;
    }
    const auto [id, fresh] = intern(v);
    if (fresh) {
        explore();
    }
    return id;
}

std::optional<NodeId> SupportGraph::add_seed(const StateSet& members) {
    const auto v = members.to_vector();
    return add_seed(std::span<const StateId>(v));
}

std::optional<NodeId> SupportGraph::lookup(std::span<const StateId> members, std::uint64_t h) const {
    const auto mask = table_.size() - 1;
    for (auto i = h & mask;; i = (i + 1) & mask) {
        const NodeId n = table_[i];
        if (n == empty_slot) {
            return std::nullopt;
        }
        if (hashes_[n] == h) {
            const auto m = this->members(n);
            if (std::equal(m.begin(), m.end(), members.begin(), members.end())) {
                return n;
            }
        }
    }
}

std::optional<NodeId> SupportGraph::find(std::span<const StateId> members) const {
    const auto v = normalize(members);
    if (v.empty()) {
        return std::nullopt;
    }
    return lookup(v, hash_members(v));
}

std::optional<NodeId> SupportGraph::find(const StateSet& members) const {
    const auto v = members.to_vector();
    return find(std::span<const StateId>(v));
}

StateSet SupportGraph::members_set(NodeId n) const {
    return StateSet(model_->num_states(), members(n));
}

bool SupportGraph::intersects(NodeId n, const StateSet& set) const {
    for (StateId s : members(n)) {
        if (set.contains(s)) {
            return true;
        }
    }
    return false;
}

bool SupportGraph::subset_of(NodeId n, const StateSet& set) const {
    for (StateId s : members(n)) {
        if (!set.contains(s)) {
            return false;
        }
    }
    return true;
}

void SupportGraph::grow_table() {
    std::vector<NodeId> table(table_.size() * 2, empty_slot);
    const auto mask = table.size() - 1;
    for (NodeId n = 0; n < size(); ++n) {
        auto i = hashes_[n] & mask;
        while (table[i] != empty_slot) {
            i = (i + 1) & mask;
        }
        table[i] = n;
    }
    table_ = std::move(table);
}

std::pair<NodeId, bool> SupportGraph::intern(std::span<const StateId> members) {
    const auto h = hash_members(members);
    if (auto n = lookup(members, h)) {
        return {*n, false};
    }
    if (size() >= options_.budget) {
        throw Error(ErrorKind::budget_exceeded, "support graph of '" + model_->name() + "' exceeds node budget " +
                                                    std::to_string(options_.budget));
    }
    const auto id = static_cast<NodeId>(size());
    pool_.insert(pool_.end(), members.begin(), members.end());
    offsets_.push_back(pool_.size());
    hashes_.push_back(h);
    const auto mask = table_.size() - 1;
    auto i = h & mask;
    while (table_[i] != empty_slot) {
        i = (i + 1) & mask;
    }
    table_[i] = id;
    if (size() * 2 > table_.size()) {
        grow_table();
    }
    return {id, true};
}

void SupportGraph::explore() {
    const Pomdp& m = *model_;
    // edge_start_ has one entry per explored (node, action) plus a sentinel
    while (edge_start_.size() - 1 < size() * actions_) {
        const auto node = static_cast<NodeId>((edge_start_.size() - 1) / actions_);
        ActionMask avail = m.all_actions();
        for (StateId s : members(node)) {
            avail &= m.enabled(s);
            if (options_.stop.contains(s)) {
                avail = 0;
                break;
            }
        }
        avail_.push_back(avail);
        ActionMask exits = 0;

        for (ActionId a = 0; a < actions_; ++a) {
            if (mask_has(avail, a)) {
                if (++epoch_ == 0) {
                    std::fill(stamp_.begin(), stamp_.end(), 0);
                    epoch_ = 1;
                }
                post_.clear();
                dropped_.clear();
                for (StateId s : members(node)) {
                    for (const auto& t : m.transitions(s, a)) {
                        if (stamp_[t.target] != epoch_) {
                            stamp_[t.target] = epoch_;
                            (options_.drop.contains(t.target) ? dropped_ : post_).push_back(t.target);
                        }
                    }
                }
                std::sort(post_.begin(), post_.end());
                touched_.clear();
                for (StateId t : post_) {
                    for (ObsId z : m.observations(t)) {
                        if (buckets_[z].empty()) {
                            touched_.push_back(z);
                        }
                        buckets_[z].push_back(t);
                    }
                }
                for (StateId t : dropped_) {
                    for (ObsId z : m.observations(t)) {
                        if (buckets_[z].empty()) {
                            exits |= mask_of(a);
                        }
                    }
                }
                std::sort(touched_.begin(), touched_.end());
                try {
                    for (ObsId z : touched_) {
                        const auto [id, fresh] = intern(buckets_[z]);
                        buckets_[z].clear();
                        if (std::find(succ_.begin() + static_cast<std::ptrdiff_t>(edge_start_.back()), succ_.end(),
                                      id) == succ_.end()) {
                            succ_.push_back(id);
                        }
                    }
                } catch (...) {
                    for (ObsId z : touched_) {
                        buckets_[z].clear();
                    }
                    throw;
                }
            }
            edge_start_.push_back(succ_.size());
        }
        exits_.push_back(exits);
    }
}

}  // namespace cshield
