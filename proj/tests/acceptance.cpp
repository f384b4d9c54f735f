// Acceptance run: one PASS/FAIL line per criterion, details indented above.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cshield/composite.hpp"
#include "cshield/decomposition.hpp"
#include "cshield/domains.hpp"
#include "cshield/error.hpp"
#include "cshield/rl.hpp"
#include "cshield/shield.hpp"
#include "oracles.hpp"

using namespace cshield;

namespace {

// calibrated so that centralized Obstacle(10) (3.49M nodes) completes
constexpr std::size_t budget = 4'000'000;
constexpr int seeds = 5;

struct Verdict {
    bool pass = true;
    std::string summary;
};

std::map<int, Verdict> verdicts;

void detail(const char* fmt, auto... args) {
    std::printf("  ");
    std::printf(fmt, args...);
    std::printf("\n");
    std::fflush(stdout);
}

void fail(int c) { verdicts[c].pass = false; }

double since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto k = v.size() / 2;
    return v.size() % 2 == 1 ? v[k] : (v[k - 1] + v[k]) / 2.0;
}

std::optional<ActionMask> composite_or_none(CompositeShield& comp, const StateSet& b) {
    try {
        return comp.allowed(b);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::off_region && e.kind() != ErrorKind::empty_intersection) {
            throw;
        }
        return std::nullopt;
    }
}

oracle::Support key(const SupportGraph& g, NodeId n) {
    const auto m = g.members(n);
    return {m.begin(), m.end()};
}

struct Table1 {
    const char* spec;
    std::size_t states;
};

const std::vector<Table1> table1{
    {"obstacle6", 37},     {"obstacle8", 65},       {"obstacle10", 101},     {"obstacle16", 257},
    {"obstacle20", 401},   {"refuel6_8", 270},      {"refuel8_10", 641},     {"refuel10_12", 1201},
    {"refuel16_18", 4609}, {"evade6_2", 4232},      {"evade8_2", 10368},     {"intercept7_1", 4705},
    {"intercept10_1", 9690},
};

// ---- criteria 1, 4, 5 (and the criterion-5 half of 7), per instance

int c7_audit_blocks = 0;

void per_instance() {
    int count_ok = 0;
    bool obstacle10_central = false;
    bool obstacle20_to = false;
    bool refuel16_to = false;
    bool all_composite = true;
    bool smaller = true;
    for (const auto& inst : table1) {
        const Pomdp m = generate(parse_grid_spec(inst.spec));
        const bool counted = m.num_states() == inst.states;
        count_ok += counted ? 1 : 0;
        if (!counted) {
            fail(1);
        }
        detail("[1] %s: %zu states, expected %zu %s", inst.spec, m.num_states(), inst.states,
               counted ? "ok" : "MISMATCH");

        std::optional<std::size_t> central_nodes;
        auto t0 = std::chrono::steady_clock::now();
        try {
            central_nodes = synthesize(m, m.spec(), ShieldMode::avoid, budget).support_nodes;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::budget_exceeded) {
                throw;
            }
        }
        const double central_secs = since(t0);

        t0 = std::chrono::steady_clock::now();
        const auto dec = prepare_decomposition(m, resolve_cover("auto", m), ShieldMode::avoid);
        std::unique_ptr<CompositeShield> comp;
        std::size_t sub_nodes = 0;
        try {
            comp = std::make_unique<CompositeShield>(dec, ShieldMode::avoid, budget);
            for (std::size_t i = 0; i < comp->size(); ++i) {
                sub_nodes = std::max(sub_nodes, comp->sub(i).support_nodes());
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::budget_exceeded) {
                throw;
            }
            all_composite = false;
        }
        const double comp_secs = since(t0);
        const std::string name = inst.spec;
        if (name == "obstacle10") {
            obstacle10_central = central_nodes.has_value();
        }
        if (name == "obstacle20") {
            obstacle20_to = !central_nodes;
        }
        if (name == "refuel16_18") {
            refuel16_to = !central_nodes;
        }
        if (central_nodes && comp && sub_nodes >= *central_nodes) {
            smaller = false;
        }
        detail("[4] %s: centralized %s (%.1fs), compositional %s, max submodel nodes %zu (%.1fs)", inst.spec,
               central_nodes ? (std::to_string(*central_nodes) + " nodes").c_str() : "TO", central_secs,
               comp ? "OK" : "TO", sub_nodes, comp_secs);

        const auto plain = audit_estimators(dec, 1000, 100, 7001);
        std::size_t mismatches = plain.mismatches;
        std::size_t steps = plain.steps;
        std::size_t blocked = 0;
        if (comp) {
            const auto shielded = audit_estimators(dec, 1000, 100, 7002, comp.get());
            mismatches += shielded.mismatches;
            steps += shielded.steps;
            blocked = shielded.blocked;
            c7_audit_blocks += static_cast<int>(blocked);
        }
        if (mismatches != 0) {
            fail(5);
            detail("[5] %s: %s", inst.spec, plain.first_mismatch.c_str());
        }
        detail("[5] %s: 2000 traces, %zu steps, %zu mismatches, %zu shielded traces blocked", inst.spec, steps,
               mismatches, blocked);
    }
    verdicts[1].summary = std::to_string(count_ok) + "/" + std::to_string(table1.size()) + " state counts match";
    const bool c4 = obstacle10_central && obstacle20_to && refuel16_to && all_composite && smaller;
    if (!c4) {
        fail(4);
    }
    verdicts[4].summary = std::string("obstacle10 centralized ") + (obstacle10_central ? "completes" : "TO") +
                          ", obstacle20 centralized " + (obstacle20_to ? "TO" : "completes") +
                          ", refuel16_18 centralized " + (refuel16_to ? "TO" : "completes") +
                          ", compositional " + (all_composite ? "all complete" : "some TO") +
                          ", max submodel < centralized " + (smaller ? "everywhere" : "NOT everywhere");
    verdicts[5].summary = "submodel estimators agree with the global estimator";
}

// ---- criteria 2, 3, 7, 9

int c7_episode_faults = 0;

void learning_safety() {
    int c2_violations = 0;
    int c3_clean_seeds = 0;
    double c9_worst = 1.0;
    for (const char* spec : {"obstacle8", "refuel6_8", "evade6_2", "intercept7_1"}) {
        const Pomdp m = generate(parse_grid_spec(spec));
        std::optional<Shield> central;
        try {
            central = synthesize(m, m.spec(), ShieldMode::avoid, budget).shield;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::budget_exceeded) {
                throw;
            }
        }
        const auto dec = prepare_decomposition(m, resolve_cover("auto", m), ShieldMode::avoid);
        CompositeShield comp(dec, ShieldMode::avoid, budget);
        std::vector<std::pair<std::string, SessionFactory>> kinds;
        if (central) {
            kinds.emplace_back("central", [&] { return std::make_unique<CentralSession>(m, *central); });
        }
        kinds.emplace_back("composite", [&] { return std::make_unique<CompositeSession>(comp); });
        kinds.emplace_back("none", [&] { return std::make_unique<UnshieldedSession>(m); });
        for (const auto& [kind, make] : kinds) {
            for (int s = 1; s <= seeds; ++s) {
                TrainConfig config;
                config.seed = static_cast<std::uint64_t>(s);
                const auto r = train(m, make, config);
                const int violations = r.during.violations + r.periodic.violations + r.after.violations;
                const int faults = r.during.faults + r.periodic.faults + r.after.faults;
                if (kind == "none") {
                    if (violations == 0) {
                        ++c3_clean_seeds;
                        fail(3);
                    }
                } else {
                    c2_violations += violations;
                    c7_episode_faults += faults;
                    if (violations != 0) {
                        fail(2);
                    }
                    if (std::string(spec) == "obstacle8") {
                        c9_worst = std::min(c9_worst, r.after.success_rate());
                        if (r.after.success_rate() < 0.9) {
                            fail(9);
                        }
                    }
                }
                detail("[2,3,7,9] %s %s seed %d: violations %d/%d/%d, shield faults %d, success after %.2f",
                       spec, kind.c_str(), s, r.during.violations, r.periodic.violations, r.after.violations,
                       faults, r.after.success_rate());
            }
        }
    }
    verdicts[2].summary = std::to_string(c2_violations) + " avoid entries in shielded training and evaluation";
    verdicts[3].summary = std::to_string(c3_clean_seeds) + " unshielded seeds without a violation";
    verdicts[9].summary = "worst per-seed greedy success on obstacle8 " + std::to_string(c9_worst);
}

// ---- criterion 6

void oracle_checks() {
    std::mt19937 rng(6006);
    int avoid_mismatch = 0;
    int contain_bad = 0;
    int contain_blocking = 0;
    int contain_bad_nonblocking = 0;
    for (int i = 0; i < 200; ++i) {
        const auto m = oracle::random_pomdp(rng, 10);
        const auto og = oracle::support_graph(m);
        const auto expect = oracle::avoid_allowed(og, m.avoid());
        const auto g = SupportGraph::build(m);
        const auto region = solve_region(g, m.spec(), ShieldMode::avoid);
        bool same = g.size() == expect.size();
        for (NodeId n = 0; same && n < g.size(); ++n) {
            same = region[n] == expect.at(key(g, n));
        }
        avoid_mismatch += same ? 0 : 1;

        const auto dec = prepare_decomposition(m, oracle::random_partition(rng, m, 2), ShieldMode::avoid);
        CompositeShield comp(dec, ShieldMode::avoid);
        const auto seen = oracle::reachable_under(og, [&](const oracle::Support& b) {
            return composite_or_none(comp, StateSet(m.num_states(), b));
        });
        bool blocks = false;
        bool contained = true;
        for (const auto& [b, mask] : seen) {
            if (!mask) {
                blocks = true;
                continue;
            }
            contained = contained && (*mask & ~expect.at(b)) == 0;
        }
        contain_blocking += blocks ? 1 : 0;
        contain_bad += contained ? 0 : 1;
        contain_bad_nonblocking += !contained && !blocks ? 1 : 0;
    }
    detail("[6a] avoid region vs brute force: %d/200 mismatching instances", avoid_mismatch);
    detail("[6b] composite vs centralized on composite-reachable supports: %d/200 instances not contained "
           "(%d of them never block); composite blocks in %d/200",
           contain_bad, contain_bad_nonblocking, contain_blocking);

    int compared = 0;
    int skipped = 0;
    int ra_mismatch = 0;
    std::mt19937 rng2(6007);
    while (compared < 200) {
        const auto m = oracle::random_pomdp(rng2, 10);
        const auto og = oracle::support_graph(m);
        const auto won = oracle::reach_avoid_winning(m, og, 200000);
        if (!won) {
            ++skipped;
            continue;
        }
        ++compared;
        const auto g = SupportGraph::build(m);
        const auto region = solve_region(g, m.spec(), ShieldMode::reach_avoid);
        bool same = true;
        for (NodeId n = 0; same && n < g.size(); ++n) {
            same = (region[n] != 0) == (won->count(key(g, n)) == 1);
        }
        ra_mismatch += same ? 0 : 1;
    }
    detail("[6c] reach-avoid region vs exhaustive policy search: %d/200 mismatching (%d drawn models skipped, "
           "policy space too large)",
           ra_mismatch, skipped);
    if (avoid_mismatch != 0 || contain_bad != 0 || ra_mismatch != 0) {
        fail(6);
    }
    verdicts[6].summary = "(a) " + std::to_string(avoid_mismatch) + " (b) " + std::to_string(contain_bad) +
                          " (c) " + std::to_string(ra_mismatch) + " failing instances of 200";
}

// ---- criterion 8

void learning_order() {
    const Pomdp m = gen_obstacle(16);
    const auto dec = prepare_decomposition(m, resolve_cover("auto", m), ShieldMode::avoid);
    CompositeShield comp(dec, ShieldMode::avoid, budget);
    const SessionFactory shielded = [&] { return std::make_unique<CompositeSession>(comp); };
    const SessionFactory none = [&] { return std::make_unique<UnshieldedSession>(m); };
    std::vector<double> to_global, to_parallel, fin_global, fin_parallel, fin_none;
    auto episodes = [](const TrainResult& r) {
        const int e = r.episodes_to(0.9);
        return e < 0 ? 1e9 : static_cast<double>(e);
    };
    for (int s = 1; s <= seeds; ++s) {
        TrainConfig config;
        config.seed = static_cast<std::uint64_t>(s);
        const auto g = train(m, shielded, config);
        const auto p = parallel_subtask_train(dec, shielded, config);
        const auto u = train(m, none, config);
        to_global.push_back(episodes(g));
        to_parallel.push_back(episodes(p));
        fin_global.push_back(g.final_reward());
        fin_parallel.push_back(p.final_reward());
        fin_none.push_back(u.final_reward());
        c7_episode_faults += g.during.faults + g.periodic.faults + g.after.faults;
        c7_episode_faults += p.during.faults + p.periodic.faults + p.after.faults;
        detail("[8] obstacle16 seed %d: episodes to 0.9 global %d parallel %d; final reward global %.3f "
               "parallel %.3f unshielded %.3f",
               s, g.episodes_to(0.9), p.episodes_to(0.9), g.final_reward(), p.final_reward(), u.final_reward());
    }
    const double mg = median(to_global);
    const double mp = median(to_parallel);
    const double fg = median(fin_global);
    const double fp = median(fin_parallel);
    const double fu = median(fin_none);
    const bool faster = mp < mg;
    const bool better = fg >= fu + 0.2 && fp >= fu + 0.2;
    if (!faster || !better) {
        fail(8);
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "median episodes to 0.9: parallel %.0f vs global %.0f; median final reward global %.3f "
                  "parallel %.3f unshielded %.3f",
                  mp, mg, fg, fp, fu);
    verdicts[8].summary = buf;
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    for (int c = 1; c <= 9; ++c) {
        verdicts[c];
    }
    try {
        per_instance();
        learning_safety();
        oracle_checks();
        learning_order();
    } catch (const Error& e) {
        std::printf("acceptance run aborted: %s: %s\n", std::string(to_string(e.kind())).c_str(), e.what());
        return 1;
    }
    if (c7_episode_faults + c7_audit_blocks != 0) {
        fail(7);
    }
    verdicts[7].summary = std::to_string(c7_episode_faults) + " shield-fault episodes, " +
                          std::to_string(c7_audit_blocks) + " blocked audit traces";

    const char* names[] = {"",
                           "state counts",
                           "zero-violation safety",
                           "unshielded baseline violates",
                           "feasibility pattern",
                           "estimator consistency",
                           "shield oracles",
                           "nonblocking",
                           "learning-performance ordering",
                           "shielded success after training"};
    std::printf("\n");
    bool all = true;
    for (int c = 1; c <= 9; ++c) {
        const auto& v = verdicts[c];
        all = all && v.pass;
        std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", c, names[c], v.summary.c_str());
    }
    std::printf("total %.0fs\n", since(t0));
    return all ? 0 : 1;
}
