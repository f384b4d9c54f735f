#include <doctest.h>

#include <cmath>

#include "cshield/belief.hpp"
#include "cshield/domains.hpp"
#include "cshield/error.hpp"
#include "cshield/shield.hpp"
#include "test_util.hpp"

using namespace cshield;

namespace {

StateId find_cell(const Pomdp& m, int x, int y, int energy = -1) {
    for (StateId s = 0; s < m.num_states(); ++s) {
        const auto& c = m.grid()->cells[s];
        if (c.x == x && c.y == y && (energy < 0 || c.energy == energy)) {
            return s;
        }
    }
    FAIL("no such cell");
    return 0;
}

void check_distributions(const Pomdp& m) {
    for (StateId s = 0; s < m.num_states(); ++s) {
        CHECK(m.enabled(s) != 0);
        CHECK_FALSE(m.observations(s).empty());
        for (ActionId a = 0; a < m.num_actions(); ++a) {
            double total = 0.0;
            for (const auto& t : m.transitions(s, a)) {
                CHECK(t.target < m.num_states());
                total += t.weight;
            }
            if (!m.transitions(s, a).empty()) {
                CHECK(total == doctest::Approx(1.0));
            }
        }
    }
}

}  // namespace

TEST_CASE("obstacle state counts") {
    for (auto [n, states] : {std::pair{6, 37}, {8, 65}, {10, 101}, {16, 257}, {20, 401}}) {
        CHECK(gen_obstacle(n).num_states() == static_cast<std::size_t>(states));
    }
}

TEST_CASE("refuel state counts are cells times energy levels plus a sink") {
    for (auto [n, e] : {std::pair{6, 8}, {8, 10}, {10, 12}, {16, 18}}) {
        CHECK(gen_refuel(n, e).num_states() == static_cast<std::size_t>(n * n * e + 1));
    }
    CHECK(gen_refuel(8, 10).num_states() == 641);
    CHECK(gen_refuel(10, 12).num_states() == 1201);
    CHECK(gen_refuel(16, 18).num_states() == 4609);
}

TEST_CASE("evade and intercept state counts") {
    // agent cells x odd-lattice robot cells x scan flag, plus a sink
    CHECK(gen_evade(6, 2).num_states() == 36 * 9 * 2 + 1);
    CHECK(gen_evade(8, 2).num_states() == 64 * 16 * 2 + 1);
    // agent cells x robot cells, plus a sink
    CHECK(gen_intercept(7, 1).num_states() == 49 * 49 + 1);
    CHECK(gen_intercept(10, 1).num_states() == 100 * 100 + 1);
}

TEST_CASE("generated models are well formed") {
    for (const auto* name : {"obstacle6", "obstacle9", "refuel5_4", "evade5_2", "intercept5_1"}) {
        const auto m = generate(parse_grid_spec(name));
        CAPTURE(name);
        REQUIRE(m.grid());
        CHECK(m.grid()->cells.size() == m.num_states());
        check_distributions(m);
        CHECK_FALSE(m.init().empty());
        CHECK_FALSE(m.reach().empty());
        CHECK_FALSE(m.avoid().empty());
        CHECK_FALSE(m.init().intersects(m.avoid()));
        // every avoid state is absorbing
        for (StateId s : m.avoid()) {
            CHECK(m.successors(StateSet(m.num_states(), {s})) == StateSet(m.num_states(), {s}));
        }
    }
}

TEST_CASE("obstacle layout") {
    const int n = 8;
    const auto m = gen_obstacle(n);
    for (auto [x, y] : {std::pair{1, 1}, {1, 0}, {1, 3}, {n - 2, 0}, {n - 2, n - 2}}) {
        CHECK(m.avoid().contains(find_cell(m, x, y)));
    }
    CHECK(m.avoid().size() == 5);
    CHECK(m.reach().contains(find_cell(m, 0, 0)));
    CHECK(m.init() == StateSet(m.num_states(), {find_cell(m, n - 3, n - 2), find_cell(m, n - 3, n - 3),
                                                find_cell(m, n - 4, n - 2), find_cell(m, 1, 2)}));
    // one observation for every plain cell: position is hidden
    const auto white = m.observations(find_cell(m, 3, 3))[0];
    CHECK(m.observations(find_cell(m, 5, 6))[0] == white);
    // two-cell slip
    const auto& right = m.transitions(find_cell(m, 3, 4), 1);
    REQUIRE(right.size() == 2);
    CHECK(right[0].target == find_cell(m, 4, 4));
    CHECK(right[0].weight == doctest::Approx(0.9));
    CHECK(right[1].target == find_cell(m, 5, 4));
    // initial supports are safe
    CHECK_NOTHROW(synthesize(m, m.spec(), ShieldMode::avoid));
}

TEST_CASE("obstacle(6) moves the third start off the slip line") {
    const auto m = gen_obstacle(6);
    CHECK(m.init().contains(find_cell(m, 4, 3)));
    CHECK_FALSE(m.init().contains(find_cell(m, 3, 3)));
    CHECK_NOTHROW(synthesize(m, m.spec(), ShieldMode::reach_avoid));
}

TEST_CASE("refuel layout") {
    const int n = 6;
    const int e = 8;
    const auto m = gen_refuel(n, e);
    CHECK(m.init() == StateSet(m.num_states(), {find_cell(m, 0, 0, e - 1)}));
    // an empty tank away from a station is a violation
    CHECK(m.avoid().contains(find_cell(m, 2, 1, 0)));
    CHECK_FALSE(m.avoid().contains(find_cell(m, n - 1, 0, 0)));
    // anti-diagonal obstacles
    CHECK(m.avoid().contains(find_cell(m, 2, 3, 5)));
    // refuelling at a station fills the tank
    const auto& refuel = m.transitions(find_cell(m, 0, 5, 2), 4);
    REQUIRE(refuel.size() == 1);
    CHECK(refuel[0].target == find_cell(m, 0, 5, e - 1));
    // each move burns one unit
    for (const auto& t : m.transitions(find_cell(m, 2, 2, 4), 0)) {
        CHECK(m.grid()->cells[t.target].energy == 3);
    }
}

TEST_CASE("evade robot moves two cells on the odd lattice") {
    const auto m = gen_evade(6, 2);
    for (StateId s = 0; s < m.num_states(); ++s) {
        const auto& c = m.grid()->cells[s];
        if (!c.has_adversary() || m.avoid().contains(s) || m.reach().contains(s)) {
            continue;
        }
        CHECK(c.adv_x % 2 == 1);
        CHECK(c.adv_y % 2 == 1);
        for (const auto& t : m.transitions(s, 0)) {
            const auto& d = m.grid()->cells[t.target];
            if (d.has_adversary()) {
                CHECK(std::abs(d.adv_x - c.adv_x) + std::abs(d.adv_y - c.adv_y) == 2);
            }
        }
    }
}

TEST_CASE("intercept robot never moves left") {
    const auto m = gen_intercept(5, 1);
    for (StateId s = 0; s < m.num_states(); ++s) {
        const auto& c = m.grid()->cells[s];
        if (!c.has_adversary()) {
            continue;
        }
        for (ActionId a = 0; a < m.num_actions(); ++a) {
            for (const auto& t : m.transitions(s, a)) {
                const auto& d = m.grid()->cells[t.target];
                if (d.has_adversary() && !m.reach().contains(s) && !m.avoid().contains(s)) {
                    CHECK(d.adv_y == c.adv_y);
                    CHECK((d.adv_x == c.adv_x || d.adv_x == c.adv_x + 1));
                }
            }
        }
    }
    for (StateId s : m.init()) {
        CHECK(m.grid()->cells[s].adv_x == 0);
    }
}

TEST_CASE("grid spec parsing") {
    CHECK(parse_grid_spec("obstacle 8").name() == "obstacle8");
    CHECK(parse_grid_spec("refuel6_8").extra == 8);
    CHECK(parse_grid_spec("evade 6 2").family == Family::evade);
    CHECK(parse_grid_spec("intercept7_1").n == 7);
    CHECK(kind_of([] { parse_grid_spec("maze 5"); }) == ErrorKind::usage);
    CHECK(kind_of([] { gen_obstacle(4); }) == ErrorKind::parameter);
    CHECK(kind_of([] { gen_refuel(6, 1); }) == ErrorKind::parameter);
}
