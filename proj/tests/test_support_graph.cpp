#include <doctest.h>

#include <random>

#include "cshield/domains.hpp"
#include "cshield/support_graph.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cshield;

namespace {

oracle::Support key(const SupportGraph& g, NodeId n) {
    const auto m = g.members(n);
    return {m.begin(), m.end()};
}

std::set<oracle::Support> successor_keys(const SupportGraph& g, NodeId n, ActionId a) {
    std::set<oracle::Support> out;
    for (NodeId t : g.successors(n, a)) {
        out.insert(key(g, t));
    }
    return out;
}

StateSet random_subset(std::mt19937& rng, std::size_t n, int one_in) {
    StateSet s(n);
    for (StateId i = 0; i < n; ++i) {
        if (rng() % static_cast<unsigned>(one_in) == 0) {
            s.insert(i);
        }
    }
    return s;
}

}  // namespace

TEST_CASE("support graph equals naive subset construction") {
    std::mt19937 rng(61);
    for (int i = 0; i < 300; ++i) {
        const auto m = oracle::random_pomdp(rng);
        const auto og = oracle::support_graph(m);
        const auto g = SupportGraph::build(m);
        REQUIRE(g.size() == og.avail.size());
        std::set<oracle::Support> initials;
        for (NodeId n : g.initials()) {
            initials.insert(key(g, n));
        }
        CHECK(initials == og.initials);
        for (NodeId n = 0; n < g.size(); ++n) {
            const auto b = key(g, n);
            REQUIRE(og.avail.count(b) == 1);
            CHECK(g.available(n) == og.avail.at(b));
            CHECK(g.exits(n) == 0);
            CHECK(g.find(g.members_set(n)) == n);
            for (ActionId a = 0; a < m.num_actions(); ++a) {
                CHECK(successor_keys(g, n, a) == og.succ.at(b)[a]);
                CHECK(g.successors(n, a).size() == og.succ.at(b)[a].size());
            }
        }
    }
}

TEST_CASE("stop set: touched supports are kept but not expanded") {
    std::mt19937 rng(67);
    for (int i = 0; i < 200; ++i) {
        const auto m = oracle::random_pomdp(rng);
        const auto stop = random_subset(rng, m.num_states(), 4);
        const auto og = oracle::support_graph(m);
        const auto g = SupportGraph::build(m, GraphOptions{default_node_budget, stop, {}});
        CHECK(g.size() <= og.avail.size());
        for (NodeId n = 0; n < g.size(); ++n) {
            const auto b = key(g, n);
            REQUIRE(og.avail.count(b) == 1);
            if (g.intersects(n, stop)) {
                CHECK(g.available(n) == 0);
                for (ActionId a = 0; a < m.num_actions(); ++a) {
                    CHECK(g.successors(n, a).empty());
                }
            } else {
                CHECK(g.available(n) == og.avail.at(b));
                for (ActionId a = 0; a < m.num_actions(); ++a) {
                    CHECK(successor_keys(g, n, a) == og.succ.at(b)[a]);
                }
            }
        }
    }
}

TEST_CASE("drop set: supports lose dropped states and empty branches become exits") {
    std::mt19937 rng(71);
    for (int i = 0; i < 200; ++i) {
        const auto m = oracle::random_pomdp(rng);
        const auto drop = random_subset(rng, m.num_states(), 3);
        const auto g = SupportGraph::build(m, GraphOptions{default_node_budget, {}, drop});
        for (NodeId n = 0; n < g.size(); ++n) {
            const auto b = key(g, n);
            CHECK_FALSE(g.intersects(n, drop));
            ActionMask exits = 0;
            for (ActionId a = 0; a < m.num_actions(); ++a) {
                if (!mask_has(g.available(n), a)) {
                    CHECK_FALSE(oracle::enabled_everywhere(m, b, a));
                    continue;
                }
                std::set<oracle::Support> expect;
                for (const auto& next : oracle::post(m, b, a)) {
                    oracle::Support kept;
                    for (StateId s : next) {
                        if (!drop.contains(s)) {
                            kept.push_back(s);
                        }
                    }
                    if (kept.empty()) {
                        exits |= mask_of(a);
                    } else {
                        expect.insert(kept);
                    }
                }
                CHECK(successor_keys(g, n, a) == expect);
            }
            CHECK(g.exits(n) == exits);
        }
    }
}

TEST_CASE("add_seed keeps earlier nodes closed") {
    std::mt19937 rng(73);
    for (int i = 0; i < 200; ++i) {
        const auto m = oracle::random_pomdp(rng);
        const auto drop = random_subset(rng, m.num_states(), 5);
        auto g = SupportGraph::build(m, GraphOptions{default_node_budget, {}, drop});
        const auto before = g.size();
        std::vector<std::vector<NodeId>> edges;
        for (NodeId n = 0; n < before; ++n) {
            for (ActionId a = 0; a < m.num_actions(); ++a) {
                const auto s = g.successors(n, a);
                edges.emplace_back(s.begin(), s.end());
            }
        }
        const auto seed = random_subset(rng, m.num_states(), 2);
        const auto id = g.add_seed(seed);
        CHECK(id.has_value() == !(seed - drop).empty());
        if (id) {
            CHECK(g.find(seed) == id);
            CHECK(g.members_set(*id) == seed - drop);
        }
        std::size_t k = 0;
        for (NodeId n = 0; n < before; ++n) {
            for (ActionId a = 0; a < m.num_actions(); ++a) {
                const auto s = g.successors(n, a);
                CHECK(std::vector<NodeId>(s.begin(), s.end()) == edges[k++]);
            }
        }
        for (NodeId n = 0; n < g.size(); ++n) {
            for (ActionId a = 0; a < m.num_actions(); ++a) {
                for (NodeId t : g.successors(n, a)) {
                    CHECK(t < g.size());
                }
            }
        }
    }
}

TEST_CASE("node budget") {
    const auto m = gen_obstacle(6);
    const auto full = SupportGraph::build(m);
    CHECK(full.size() == oracle::support_graph(m).avail.size());
    CHECK_NOTHROW(SupportGraph::build(m, GraphOptions{full.size(), {}, {}}));
    CHECK(kind_of([&] { SupportGraph::build(m, GraphOptions{full.size() - 1, {}, {}}); }) ==
          ErrorKind::budget_exceeded);
}
