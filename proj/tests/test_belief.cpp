#include <doctest.h>

#include <random>

#include "cshield/belief.hpp"
#include "cshield/domains.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cshield;

namespace {

StateSet to_set(const Pomdp& m, const std::set<StateId>& s) {
    return StateSet(m.num_states(), std::vector<StateId>(s.begin(), s.end()));
}

template <class T>
T pick(std::mt19937& rng, std::span<const T> items) {
    return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

}  // namespace

TEST_CASE("estimator matches path enumeration on sampled histories") {
    std::mt19937 rng(41);
    for (int i = 0; i < 300; ++i) {
        const auto m = oracle::random_pomdp(rng, 6);
        const auto init = m.init().to_vector();
        StateId s = pick<StateId>(rng, init);
        const ObsId z0 = pick(rng, m.observations(s));
        Estimator est(m);
        CHECK(est.reset(z0) == to_set(m, oracle::replay(m, z0, {})));
        std::vector<std::pair<ActionId, ObsId>> history;
        for (int t = 0; t < 6; ++t) {
            std::vector<ActionId> enabled;
            for (ActionId a = 0; a < m.num_actions(); ++a) {
                if (!m.transitions(s, a).empty()) {
                    enabled.push_back(a);
                }
            }
            const ActionId a = pick<ActionId>(rng, enabled);
            s = pick(rng, m.transitions(s, a)).target;
            const ObsId z = pick(rng, m.observations(s));
            history.emplace_back(a, z);
            const auto& b = est.step(a, z);
            CHECK(b.contains(s));
            CHECK(b == to_set(m, oracle::replay(m, z0, history)));
        }
    }
}

TEST_CASE("impossible observations are reported at the step they occur") {
    std::mt19937 rng(43);
    int thrown = 0;
    for (int i = 0; i < 300; ++i) {
        const auto m = oracle::random_pomdp(rng, 6);
        std::uniform_int_distribution<ObsId> ob(0, 2);
        std::uniform_int_distribution<ActionId> ac(0, 2);
        const ObsId z0 = ob(rng);
        std::vector<std::pair<ActionId, ObsId>> history;
        Estimator est(m);
        if (oracle::replay(m, z0, history).empty()) {
            CHECK(kind_of([&] { est.reset(z0); }) == ErrorKind::inconsistent_observation);
            ++thrown;
            continue;
        }
        est.reset(z0);
        for (int t = 0; t < 5; ++t) {
            history.emplace_back(ac(rng), ob(rng));
            const auto expect = oracle::replay(m, z0, history);
            if (expect.empty()) {
                CHECK(kind_of([&] { est.step(history.back().first, history.back().second); }) ==
                      ErrorKind::inconsistent_observation);
                ++thrown;
                break;
            }
            CHECK(est.step(history.back().first, history.back().second) == to_set(m, expect));
        }
    }
    CHECK(thrown > 50);
}

TEST_CASE("support update is monotone") {
    std::mt19937 rng(47);
    for (int i = 0; i < 300; ++i) {
        const auto m = oracle::random_pomdp(rng);
        StateSet small(m.num_states());
        StateSet large(m.num_states());
        for (StateId s = 0; s < m.num_states(); ++s) {
            const auto r = rng() % 3;
            if (r == 0) {
                small.insert(s);
            }
            if (r != 2) {
                large.insert(s);
            }
        }
        const ActionId a = static_cast<ActionId>(rng() % 3);
        const ObsId z = static_cast<ObsId>(rng() % 3);
        StateSet lo(m.num_states());
        StateSet hi(m.num_states());
        try {
            lo = update_support(m, small, a, z);
        } catch (const Error&) {
        }
        try {
            hi = update_support(m, large, a, z);
        } catch (const Error&) {
        }
        CHECK(lo.is_subset_of(hi));
        CHECK((available_actions(m, large) & ~available_actions(m, small)) == 0);
    }
}

TEST_CASE("obstacle initial support and observation errors") {
    const auto m = gen_obstacle(8);
    const auto white = *m.observation_index("white");
    auto b = initial_support(m, white);
    CHECK(b == m.init());
    // position stays hidden after a move
    b = update_support(m, b, 0, white);
    CHECK(b.size() > 1);
    CHECK(kind_of([&] { initial_support(m, *m.observation_index("green")); }) ==
          ErrorKind::inconsistent_observation);
    CHECK(kind_of([&] { initial_support(m, 99); }) == ErrorKind::inconsistent_observation);
}

TEST_CASE("estimator with a domain stays inside the filtered global support") {
    const auto m = gen_obstacle(8);
    StateSet left(m.num_states());
    for (StateId s = 0; s < 64; ++s) {
        if (s % 8 < 4) {
            left.insert(s);
        }
    }
    Estimator full(m);
    Estimator part(m, left);
    const auto white = *m.observation_index("white");
    CHECK(part.reset(white) == (full.reset(white) & left));
    for (ActionId a : {0U, 3U, 1U}) {
        // states outside the domain are forgotten, so only containment holds
        CHECK(part.step(a, white).is_subset_of(full.step(a, white) & left));
    }
}
