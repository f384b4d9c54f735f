#include "cshield/shield.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <deque>
#include <sstream>

#include "cshield/error.hpp"

namespace cshield {

std::string_view to_string(ShieldMode mode) {
    return mode == ShieldMode::avoid ? "avoid" : "reach-avoid";
}

ShieldMode parse_shield_mode(std::string_view text) {
    if (text == "avoid") {
        return ShieldMode::avoid;
    }
    if (text == "reach-avoid" || text == "reach_avoid") {
        return ShieldMode::reach_avoid;
    }
    throw Error(ErrorKind::usage, "unknown shield mode '" + std::string(text) + "'");
}

namespace {

// Incremental safety pruning over the undecided suffix [first, size).
struct RegionSolver {
    const SupportGraph& g;
    std::vector<ActionMask>& allowed;
    std::size_t first;
    std::size_t actions;
    std::vector<char> in_w;
    std::vector<std::uint64_t> rev_start;
    std::vector<std::uint64_t> rev;  // (pred << 6) | action
    std::vector<NodeId> work;

    RegionSolver(const SupportGraph& graph, std::vector<ActionMask>& out)
        : g(graph), allowed(out), first(out.size()), actions(graph.model().num_actions()) {}

    bool winning(NodeId n) const { return n < first ? allowed[n] != 0 : in_w[n - first] != 0; }

    void build_reverse() {
        const std::size_t k = g.size() - first;
        rev_start.assign(k + 1, 0);
        for (std::size_t i = 0; i < k; ++i) {
            const auto n = static_cast<NodeId>(first + i);
            for (ActionId a = 0; a < actions; ++a) {
                for (NodeId m : g.successors(n, a)) {
                    if (m >= first) {
                        ++rev_start[m - first + 1];
                    }
                }
            }
        }
        for (std::size_t i = 0; i < k; ++i) {
            rev_start[i + 1] += rev_start[i];
        }
        rev.assign(rev_start.back(), 0);
        auto fill = rev_start;
        for (std::size_t i = 0; i < k; ++i) {
            const auto n = static_cast<NodeId>(first + i);
            for (ActionId a = 0; a < actions; ++a) {
                for (NodeId m : g.successors(n, a)) {
                    if (m >= first) {
                        rev[fill[m - first]++] = (static_cast<std::uint64_t>(n) << 6) | a;
                    }
                }
            }
        }
    }

    void remove(NodeId n) {
        in_w[n - first] = 0;
        allowed[n] = 0;
        work.push_back(n);
    }

    // Drops actions leading to removed nodes until no winning node is left
    // without an action.
    void propagate() {
        while (!work.empty()) {
            const NodeId m = work.back();
            work.pop_back();
            for (auto i = rev_start[m - first]; i < rev_start[m - first + 1]; ++i) {
                const auto p = static_cast<NodeId>(rev[i] >> 6);
                const auto a = static_cast<ActionId>(rev[i] & 63);
                if (!in_w[p - first] || !mask_has(allowed[p], a)) {
                    continue;
                }
                allowed[p] &= ~mask_of(a);
                if (allowed[p] == 0) {
                    remove(p);
                }
            }
        }
    }

    void solve_avoid(const StateSet& avoid) {
        const std::size_t k = g.size() - first;
        allowed.resize(g.size(), 0);
        in_w.assign(k, 0);
        for (std::size_t i = 0; i < k; ++i) {
            in_w[i] = g.intersects(static_cast<NodeId>(first + i), avoid) ? 0 : 1;
        }
        build_reverse();
        for (std::size_t i = 0; i < k; ++i) {
            const auto n = static_cast<NodeId>(first + i);
            if (!in_w[i]) {
                continue;
            }
            ActionMask ok = 0;
            const ActionMask avail = g.available(n);
            for (ActionId a = 0; a < actions; ++a) {
                if (!mask_has(avail, a)) {
                    continue;
                }
                const auto succ = g.successors(n, a);
                const bool good = std::all_of(succ.begin(), succ.end(), [&](NodeId m) {
                    return m < first ? allowed[m] != 0 : in_w[m - first] != 0;
                });
                if (good) {
                    ok |= mask_of(a);
                }
            }
            allowed[n] = ok;
        }
        for (std::size_t i = 0; i < k; ++i) {
            const auto n = static_cast<NodeId>(first + i);
            if (in_w[i] && allowed[n] == 0) {
                remove(n);
            }
        }
        propagate();
    }

    void solve_reach(const StateSet& reach) {
        const std::size_t k = g.size() - first;
        std::vector<char> good(k);
        std::deque<NodeId> queue;
        while (true) {
            std::fill(good.begin(), good.end(), 0);
            queue.clear();
            for (std::size_t i = 0; i < k; ++i) {
                const auto n = static_cast<NodeId>(first + i);
                if (in_w[i] && g.subset_of(n, reach)) {
                    good[i] = 1;
                    queue.push_back(n);
                }
            }
            // Decided winning nodes already reach the target.
            for (std::size_t i = 0; i < k; ++i) {
                const auto n = static_cast<NodeId>(first + i);
                if (!in_w[i] || good[i]) {
                    continue;
                }
                for (ActionId a = 0; a < actions && !good[i]; ++a) {
                    if (!mask_has(allowed[n], a)) {
                        continue;
                    }
                    // an emptied branch ended in dropped target states
                    if (mask_has(g.exits(n), a)) {
                        good[i] = 1;
                        queue.push_back(n);
                        break;
                    }
                    for (NodeId m : g.successors(n, a)) {
                        if (m < first && allowed[m] != 0) {
                            good[i] = 1;
                            queue.push_back(n);
                            break;
                        }
                    }
                }
            }
            while (!queue.empty()) {
                const NodeId m = queue.front();
                queue.pop_front();
                for (auto i = rev_start[m - first]; i < rev_start[m - first + 1]; ++i) {
                    const auto p = static_cast<NodeId>(rev[i] >> 6);
                    const auto a = static_cast<ActionId>(rev[i] & 63);
                    if (in_w[p - first] && !good[p - first] && mask_has(allowed[p], a)) {
                        good[p - first] = 1;
                        queue.push_back(p);
                    }
                }
            }
            bool changed = false;
            for (std::size_t i = 0; i < k; ++i) {
                if (in_w[i] && !good[i]) {
                    remove(static_cast<NodeId>(first + i));
                    changed = true;
                }
            }
            if (!changed) {
                break;
            }
            propagate();
        }
    }
};

}  // namespace

void extend_region(const SupportGraph& g, const Specification& spec, ShieldMode mode, std::vector<ActionMask>& allowed) {
    if (allowed.size() > g.size()) {
        throw Error(ErrorKind::precondition, "region larger than graph");
    }
    if (allowed.size() == g.size()) {
        return;
    }
    RegionSolver solver(g, allowed);
    solver.solve_avoid(spec.avoid);
    if (mode == ShieldMode::reach_avoid) {
        solver.solve_reach(spec.reach);
    }
}

std::vector<ActionMask> solve_region(const SupportGraph& g, const Specification& spec, ShieldMode mode) {
    std::vector<ActionMask> allowed;
    extend_region(g, spec, mode, allowed);
    return allowed;
}

std::size_t SupportKeyHash::operator()(const std::vector<StateId>& v) const {
    std::uint64_t h = 1469598103934665603ULL ^ v.size();
    for (StateId s : v) {
        h ^= s;
        h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h ^ (h >> 32));
}

Shield::Shield(std::string model_name, std::vector<std::string> actions, std::size_t num_states,
               std::uint64_t spec_hash, ShieldMode mode)
    : model_name_(std::move(model_name)),
      actions_(std::move(actions)),
      num_states_(num_states),
      spec_hash_(spec_hash),
      mode_(mode),
      interface_(num_states),
      dropped_(num_states) {}

Shield Shield::from_region(const SupportGraph& g, std::span<const ActionMask> allowed, const Specification& spec,
                           ShieldMode mode) {
    const auto& m = g.model();
    Shield s(m.name(), m.action_names(), m.num_states(), spec.hash(), mode);
    s.dropped_ = g.options().drop;
    for (NodeId n = 0; n < allowed.size(); ++n) {
        if (allowed[n] != 0) {
            const auto mem = g.members(n);
            s.insert(std::vector<StateId>(mem.begin(), mem.end()), allowed[n]);
        }
    }
    return s;
}

ActionMask Shield::all_actions() const {
    return actions_.size() == 64 ? ~ActionMask{0} : (ActionMask{1} << actions_.size()) - 1;
}

void Shield::insert(std::vector<StateId> support, ActionMask allowed) {
    if (allowed == 0) {
        throw Error(ErrorKind::precondition, "shield entries must allow at least one action");
    }
    table_[std::move(support)] = allowed;
}

std::optional<ActionMask> Shield::lookup(std::span<const StateId> support) const {
    std::vector<StateId> key;
    key.reserve(support.size());
    for (StateId s : support) {
        if (!dropped_.contains(s)) {
            key.push_back(s);
        }
    }
    if (key.empty()) {
        return all_actions();
    }
    if (auto it = table_.find(key); it != table_.end()) {
        return it->second;
    }
    return std::nullopt;
}

ActionMask Shield::query(const StateSet& support) const {
    if (support.empty()) {
        throw Error(ErrorKind::precondition, "empty belief support");
    }
    if (interface_.universe() == support.universe() && support.is_subset_of(interface_)) {
        return all_actions();
    }
    const auto key = support.to_vector();
    if (auto hit = lookup(key)) {
        return *hit;
    }
    throw Error(ErrorKind::off_region,
                "support " + support.to_string() + " is outside the winning region of '" + model_name_ + "'");
}

std::vector<std::pair<std::vector<StateId>, ActionMask>> Shield::entries() const {
    std::vector<std::pair<std::vector<StateId>, ActionMask>> out(table_.begin(), table_.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::string format_actions(ActionMask mask, const std::vector<std::string>& names) {
    std::string out;
    for (ActionId a = 0; a < names.size(); ++a) {
        if (mask_has(mask, a)) {
            if (!out.empty()) {
                out += ' ';
            }
            out += names[a];
        }
    }
    return out;
}

std::string Shield::serialize() const {
    std::ostringstream out;
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(spec_hash_));
    out << "shield " << model_name_ << '\n';
    out << "spec " << hash << '\n';
    out << "mode " << to_string(mode_) << '\n';
    out << "states " << num_states_ << '\n';
    out << "actions";
    for (const auto& a : actions_) {
        out << ' ' << a;
    }
    out << '\n';
    out << "interface";
    for (StateId s : interface_) {
        out << ' ' << s;
    }
    out << '\n';
    out << "drop";
    for (StateId s : dropped_) {
        out << ' ' << s;
    }
    out << '\n';
    for (const auto& [support, mask] : entries()) {
        out << "support";
        for (StateId s : support) {
            out << ' ' << s;
        }
        out << " : " << format_actions(mask, actions_) << '\n';
    }
    return out.str();
}

Shield Shield::parse(std::string_view text) {
    Shield s;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t number = 0;
    auto fail = [&](const std::string& msg) {
        throw Error(ErrorKind::syntax, "shield line " + std::to_string(number) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++number;
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) {
            continue;
        }
        if (key == "shield") {
            ls >> s.model_name_;
        } else if (key == "spec") {
            std::string hex;
            ls >> hex;
            auto [p, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), s.spec_hash_, 16);
            if (ec != std::errc{}) {
                fail("bad spec hash");
            }
        } else if (key == "mode") {
            std::string m;
            ls >> m;
            s.mode_ = parse_shield_mode(m);
        } else if (key == "states") {
            if (!(ls >> s.num_states_)) {
                fail("bad state count");
            }
            s.interface_ = StateSet(s.num_states_);
            s.dropped_ = StateSet(s.num_states_);
        } else if (key == "actions") {
            std::string a;
            while (ls >> a) {
                s.actions_.push_back(a);
            }
        } else if (key == "interface" || key == "drop") {
            auto& set = key == "interface" ? s.interface_ : s.dropped_;
            StateId id;
            while (ls >> id) {
                if (id >= s.num_states_) {
                    fail(key + " state out of range");
                }
                set.insert(id);
            }
        } else if (key == "support") {
            std::vector<StateId> support;
            std::string w;
            while (ls >> w && w != ":") {
                StateId id{};
                auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), id);
                if (ec != std::errc{} || id >= s.num_states_) {
                    fail("bad state '" + w + "'");
                }
                support.push_back(id);
            }
            if (w != ":") {
                fail("expected ':'");
            }
            ActionMask mask = 0;
            while (ls >> w) {
                auto it = std::find(s.actions_.begin(), s.actions_.end(), w);
                if (it == s.actions_.end()) {
                    fail("unknown action '" + w + "'");
                }
                mask |= mask_of(static_cast<ActionId>(it - s.actions_.begin()));
            }
            if (support.empty() || mask == 0) {
                fail("empty support or action set");
            }
            std::sort(support.begin(), support.end());
            s.table_[std::move(support)] = mask;
        } else {
            fail("unknown directive '" + key + "'");
        }
    }
    return s;
}

bool operator==(const Shield& a, const Shield& b) {
    return a.model_name_ == b.model_name_ && a.actions_ == b.actions_ && a.num_states_ == b.num_states_ &&
           a.spec_hash_ == b.spec_hash_ && a.mode_ == b.mode_ && a.interface_ == b.interface_ && a.dropped_ == b.dropped_ &&
           a.table_ == b.table_;
}

SynthesisResult synthesize(const Pomdp& model, const Specification& spec, ShieldMode mode, std::size_t budget) {
    return synthesize(model, spec, mode, GraphOptions{budget, spec.avoid, {}});
}

SynthesisResult synthesize(const Pomdp& model, const Specification& spec, ShieldMode mode, GraphOptions options) {
    for (StateId s : model.init()) {
        if (spec.avoid.contains(s)) {
            throw Error(ErrorKind::unrealizable, "initial state " + std::to_string(s) + " is an avoid state");
        }
    }
    const auto g = SupportGraph::build(model, std::move(options));
    const auto allowed = solve_region(g, spec, mode);
    for (NodeId n : g.initials()) {
        if (allowed[n] == 0) {
            throw Error(ErrorKind::unrealizable, "initial support " + g.members_set(n).to_string() + " of '" +
                                                     model.name() + "' is not winning");
        }
    }
    SynthesisResult r;
    r.shield = Shield::from_region(g, allowed, spec, mode);
    r.support_nodes = g.size();
    r.winning_nodes = r.shield.size();
    return r;
}

Shield avoid_shield(const SupportGraph& g, const Specification& spec) {
    return Shield::from_region(g, solve_region(g, spec, ShieldMode::avoid), spec, ShieldMode::avoid);
}

Shield reach_avoid_shield(const SupportGraph& g, const Specification& spec) {
    return Shield::from_region(g, solve_region(g, spec, ShieldMode::reach_avoid), spec, ShieldMode::reach_avoid);
}

}  // namespace cshield
