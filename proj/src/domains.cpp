#include "cshield/domains.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdlib>
#include <map>
#include <utility>

#include "cshield/error.hpp"

namespace cshield {

std::string_view to_string(Family f) {
    switch (f) {
        case Family::obstacle: return "obstacle";
        case Family::refuel: return "refuel";
        case Family::evade: return "evade";
        case Family::intercept: return "intercept";
    }
    return "?";
}

Family parse_family(std::string_view text) {
    for (auto f : {Family::obstacle, Family::refuel, Family::evade, Family::intercept}) {
        if (text == to_string(f)) {
            return f;
        }
    }
    throw Error(ErrorKind::usage, "unknown domain family '" + std::string(text) + "'");
}

std::string GridSpec::name() const {
    std::string s = std::string(to_string(family)) + std::to_string(n);
    if (family != Family::obstacle) {
        s += "_" + std::to_string(extra);
    }
    return s;
}

GridSpec parse_grid_spec(std::string_view text) {
    std::string word;
    std::vector<int> nums;
    std::size_t i = 0;
    while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) {
        word += text[i++];
    }
    while (i < text.size()) {
        if (std::isdigit(static_cast<unsigned char>(text[i]))) {
            int v = 0;
            auto [p, ec] = std::from_chars(text.data() + i, text.data() + text.size(), v);
            nums.push_back(v);
            i = static_cast<std::size_t>(p - text.data());
        } else {
            ++i;
        }
    }
    GridSpec g;
    g.family = parse_family(word);
    const std::size_t want = g.family == Family::obstacle ? 1 : 2;
    if (nums.size() != want) {
        throw Error(ErrorKind::usage, "bad instance '" + std::string(text) + "'");
    }
    g.n = nums[0];
    g.extra = want == 2 ? nums[1] : 0;
    return g;
}

namespace {

enum Dir { left, right, up, down };
constexpr std::array<int, 4> dx{-1, 1, 0, 0};
constexpr std::array<int, 4> dy{0, 0, -1, 1};

int clamp(int v, int n) {
    return std::clamp(v, 0, n - 1);
}

// (cell, weight) outcomes of a slippery move.
std::vector<std::pair<std::pair<int, int>, double>> slip_move(int x, int y, int d, int n) {
    std::vector<std::pair<std::pair<int, int>, double>> out;
    auto add = [&](int nx, int ny, double w) {
        for (auto& o : out) {
            if (o.first == std::pair{nx, ny}) {
                o.second += w;
                return;
            }
        }
        out.push_back({{nx, ny}, w});
    };
    add(clamp(x + dx[d], n), clamp(y + dy[d], n), 0.9);
    add(clamp(x + 2 * dx[d], n), clamp(y + 2 * dy[d], n), 0.1);
    return out;
}

void require(bool ok, const std::string& msg) {
    if (!ok) {
        throw Error(ErrorKind::parameter, msg);
    }
}

}  // namespace

Pomdp gen_obstacle(int n) {
    require(n >= 6 && n <= 256, "obstacle: n must be in 6..256");
    const auto cells = static_cast<std::size_t>(n * n);
    const auto sink = static_cast<StateId>(cells);
    auto id = [n](int x, int y) { return static_cast<StateId>(y * n + x); };

    PomdpBuilder b("obstacle" + std::to_string(n), cells + 1, {"left", "right", "up", "down"},
                   {"white", "red", "green"});
    b.set_grid(n);

    const std::vector<std::pair<int, int>> traps{{1, 1}, {1, 0}, {1, 3}, {n - 2, 0}, {n - 2, n - 2}};
    // For n = 6 the cell (n-3,n-3) is two steps right of the trap (1,3),
    // which leaves no common safe action; use (n-2,n-3) instead.
    const std::pair<int, int> third = n >= 7 ? std::pair{n - 3, n - 3} : std::pair{n - 2, n - 3};
    const std::vector<std::pair<int, int>> starts{{n - 3, n - 2}, third, {n - 4, n - 2}, {1, 2}};
    const StateId exit = id(0, 0);

    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const StateId s = id(x, y);
            b.set_cell(s, {x, y});
            const bool trap = std::find(traps.begin(), traps.end(), std::pair{x, y}) != traps.end();
            if (trap) {
                b.add_observation(s, 1).add_avoid(s).make_absorbing(s).set_reward_all(s, -1000.0);
            } else if (s == exit) {
                b.add_observation(s, 2).add_reach(s).set_reward_all(s, 1000.0);
                for (ActionId a = 0; a < 4; ++a) {
                    b.add_transition(s, a, sink, 1.0);
                }
            } else {
                b.add_observation(s, 0).set_reward_all(s, -1.0);
                for (int d = 0; d < 4; ++d) {
                    for (const auto& [cell, w] : slip_move(x, y, d, n)) {
                        b.add_transition(s, static_cast<ActionId>(d), id(cell.first, cell.second), w);
                    }
                }
            }
        }
    }
    b.add_observation(sink, 2).add_reach(sink).make_absorbing(sink);
    for (const auto& [x, y] : starts) {
        b.add_init(id(x, y));
    }
    return b.build();
}

Pomdp gen_refuel(int n, int e) {
    require(n >= 4 && n <= 64, "refuel: n must be in 4..64");
    require(e >= 2 && e <= 64, "refuel: e must be in 2..64");
    const int full = e - 1;
    const auto cells = static_cast<std::size_t>(n * n);
    const auto sink = static_cast<StateId>(cells * static_cast<std::size_t>(e));
    auto id = [n, e](int x, int y, int en) { return static_cast<StateId>((y * n + x) * e + en); };

    const int blocks = (n + 1) / 2;
    std::vector<std::string> obs;
    for (int by = 0; by < blocks; ++by) {
        for (int bx = 0; bx < blocks; ++bx) {
            for (const char* level : {"low", "high"}) {
                obs.push_back("b" + std::to_string(bx) + "_" + std::to_string(by) + "_" + level);
            }
        }
    }
    const auto goal_obs = static_cast<ObsId>(obs.size());
    obs.push_back("goal");
    auto obs_of = [&](int x, int y, int en) {
        const int block = (y / 2) * blocks + (x / 2);
        return static_cast<ObsId>(block * 2 + (2 * en > full ? 1 : 0));
    };

    PomdpBuilder b("refuel" + std::to_string(n) + "_" + std::to_string(e), cells * static_cast<std::size_t>(e) + 1,
                   {"left", "right", "up", "down", "refuel"}, obs);
    b.set_grid(n);

    auto station = [n](int x, int y) {
        return (x == 0 && y == 0) || (x == n - 1 && y == 0) || (x == 0 && y == n - 1);
    };
    auto obstacle = [n](int x, int y) { return x + y == n - 1 && x >= 1 && x <= n - 2; };

    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            for (int en = 0; en < e; ++en) {
                const StateId s = id(x, y, en);
                b.set_cell(s, {x, y, en});
                if (x == n - 1 && y == n - 1) {
                    b.add_observation(s, goal_obs).add_reach(s).set_reward_all(s, 10.0);
                    for (ActionId a = 0; a < 5; ++a) {
                        b.add_transition(s, a, sink, 1.0);
                    }
                    continue;
                }
                b.add_observation(s, obs_of(x, y, en));
                if (obstacle(x, y) || (en == 0 && !station(x, y))) {
                    b.add_avoid(s).make_absorbing(s).set_reward_all(s, -10.0);
                    continue;
                }
                for (int d = 0; d < 4; ++d) {
                    if (en == 0) {
                        b.add_transition(s, static_cast<ActionId>(d), s, 1.0);
                        continue;
                    }
                    for (const auto& [cell, w] : slip_move(x, y, d, n)) {
                        b.add_transition(s, static_cast<ActionId>(d), id(cell.first, cell.second, en - 1), w);
                    }
                }
                b.add_transition(s, 4, station(x, y) ? id(x, y, full) : s, 1.0);
            }
        }
    }
    b.add_observation(sink, goal_obs).add_reach(sink).make_absorbing(sink);
    b.add_init(id(0, 0, full));
    return b.build();
}

namespace {

std::vector<std::pair<int, int>> odd_cells(int n) {
    std::vector<std::pair<int, int>> out;
    for (int y = 1; y < n; y += 2) {
        for (int x = 1; x < n; x += 2) {
            out.push_back({x, y});
        }
    }
    return out;
}

}  // namespace

Pomdp gen_evade(int n, int r) {
    require(n >= 4 && n <= 32, "evade: n must be in 4..32");
    require(r >= 1 && r < n, "evade: radius must be in 1..n-1");
    const auto lattice = odd_cells(n);
    const int p = static_cast<int>(lattice.size());
    std::vector<int> lattice_index(static_cast<std::size_t>(n * n), -1);
    for (int k = 0; k < p; ++k) {
        lattice_index[static_cast<std::size_t>(lattice[k].second * n + lattice[k].first)] = k;
    }
    const auto cells = static_cast<std::size_t>(n * n);
    const auto count = cells * static_cast<std::size_t>(p) * 2;
    const auto sink = static_cast<StateId>(count);
    auto id = [&](int ax, int ay, int k, int f) { return static_cast<StateId>(((ay * n + ax) * p + k) * 2 + f); };

    // observation: agent cell x (robot lattice index or none)
    std::vector<std::string> obs;
    for (int ay = 0; ay < n; ++ay) {
        for (int ax = 0; ax < n; ++ax) {
            const std::string a = "a" + std::to_string(ax) + "_" + std::to_string(ay);
            for (const auto& [rx, ry] : lattice) {
                obs.push_back(a + "_r" + std::to_string(rx) + "_" + std::to_string(ry));
            }
            obs.push_back(a + "_none");
        }
    }
    const auto done_obs = static_cast<ObsId>(obs.size());
    obs.push_back("done");
    auto obs_of = [&](int ax, int ay, int k, bool seen) {
        return static_cast<ObsId>((ay * n + ax) * (p + 1) + (seen ? k : p));
    };

    PomdpBuilder b("evade" + std::to_string(n) + "_" + std::to_string(r), count + 1,
                   {"left", "right", "up", "down", "scan"}, obs);
    b.set_grid(n);

    // robot moves: exactly two cells, uniform over legal directions
    std::vector<std::vector<int>> robot_next(static_cast<std::size_t>(p));
    for (int k = 0; k < p; ++k) {
        const auto [rx, ry] = lattice[static_cast<std::size_t>(k)];
        for (int d = 0; d < 4; ++d) {
            const int nx = rx + 2 * dx[d];
            const int ny = ry + 2 * dy[d];
            if (nx >= 0 && nx < n && ny >= 0 && ny < n) {
                robot_next[static_cast<std::size_t>(k)].push_back(lattice_index[static_cast<std::size_t>(ny * n + nx)]);
            }
        }
    }

    for (int ay = 0; ay < n; ++ay) {
        for (int ax = 0; ax < n; ++ax) {
            for (int k = 0; k < p; ++k) {
                const auto [rx, ry] = lattice[static_cast<std::size_t>(k)];
                for (int f = 0; f < 2; ++f) {
                    const StateId s = id(ax, ay, k, f);
                    b.set_cell(s, {ax, ay, -1, rx, ry});
                    const bool caught = ax == rx && ay == ry;
                    const bool door = ax == n - 1 && ay == n - 1;
                    if (caught) {
                        b.add_observation(s, obs_of(ax, ay, k, true)).add_avoid(s).make_absorbing(s);
                        b.set_reward_all(s, -10.0);
                        continue;
                    }
                    if (door) {
                        b.add_observation(s, done_obs).add_reach(s).set_reward_all(s, 10.0);
                        for (ActionId a = 0; a < 5; ++a) {
                            b.add_transition(s, a, sink, 1.0);
                        }
                        continue;
                    }
                    const bool near = std::abs(ax - rx) + std::abs(ay - ry) <= r;
                    b.add_observation(s, obs_of(ax, ay, k, near || f == 1));
                    const auto& next = robot_next[static_cast<std::size_t>(k)];
                    const double w = 1.0 / static_cast<double>(next.size());
                    for (int a = 0; a < 5; ++a) {
                        int nx = ax;
                        int ny = ay;
                        if (a < 4) {
                            nx = clamp(ax + dx[a], n);
                            ny = clamp(ay + dy[a], n);
                        }
                        for (int k2 : next) {
                            b.add_transition(s, static_cast<ActionId>(a), id(nx, ny, k2, a == 4 ? 1 : 0), w);
                        }
                    }
                }
            }
        }
    }
    b.add_observation(sink, done_obs).add_reach(sink).make_absorbing(sink);
    for (int k = 0; k < p; ++k) {
        const auto [rx, ry] = lattice[static_cast<std::size_t>(k)];
        if (rx + ry >= n) {
            b.add_init(id(0, 0, k, 0));
        }
    }
    return b.build();
}

Pomdp gen_intercept(int n, int r) {
    require(n >= 4 && n <= 32, "intercept: n must be in 4..32");
    require(r >= 1 && r < n, "intercept: radius must be in 1..n-1");
    const auto cells = static_cast<std::size_t>(n * n);
    const auto sink = static_cast<StateId>(cells * cells);
    auto cell = [n](int x, int y) { return y * n + x; };
    auto id = [&](int ax, int ay, int rx, int ry) {
        return static_cast<StateId>(cell(ax, ay) * static_cast<int>(cells) + cell(rx, ry));
    };
    const int corridor = (n - 1) / 2;

    std::vector<std::string> obs;
    for (int ay = 0; ay < n; ++ay) {
        for (int ax = 0; ax < n; ++ax) {
            const std::string a = "a" + std::to_string(ax) + "_" + std::to_string(ay);
            for (int ry = 0; ry < n; ++ry) {
                for (int rx = 0; rx < n; ++rx) {
                    obs.push_back(a + "_r" + std::to_string(rx) + "_" + std::to_string(ry));
                }
            }
            obs.push_back(a + "_none");
        }
    }
    const auto done_obs = static_cast<ObsId>(obs.size());
    obs.push_back("done");
    const auto per_agent = static_cast<int>(cells) + 1;

    PomdpBuilder b("intercept" + std::to_string(n) + "_" + std::to_string(r), cells * cells + 1,
                   {"left", "right", "up", "down", "stay"}, obs);
    b.set_grid(n);

    for (int ay = 0; ay < n; ++ay) {
        for (int ax = 0; ax < n; ++ax) {
            for (int ry = 0; ry < n; ++ry) {
                for (int rx = 0; rx < n; ++rx) {
                    const StateId s = id(ax, ay, rx, ry);
                    b.set_cell(s, {ax, ay, -1, rx, ry});
                    const bool visible = rx == corridor || std::abs(ax - rx) + std::abs(ay - ry) <= r;
                    const ObsId z = static_cast<ObsId>(cell(ax, ay) * per_agent + (visible ? cell(rx, ry) : static_cast<int>(cells)));
                    if (ax == rx && ay == ry) {
                        b.add_observation(s, done_obs).add_reach(s).set_reward_all(s, 1000.0);
                        for (ActionId a = 0; a < 5; ++a) {
                            b.add_transition(s, a, sink, 1.0);
                        }
                        continue;
                    }
                    b.add_observation(s, z);
                    if (rx == n - 1) {
                        b.add_avoid(s).make_absorbing(s).set_reward_all(s, -1000.0);
                        continue;
                    }
                    b.set_reward_all(s, -1.0);
                    for (int a = 0; a < 5; ++a) {
                        int nx = ax;
                        int ny = ay;
                        if (a < 4) {
                            nx = clamp(ax + dx[a], n);
                            ny = clamp(ay + dy[a], n);
                        }
                        b.add_transition(s, static_cast<ActionId>(a), id(nx, ny, rx, ry), 0.5);
                        b.add_transition(s, static_cast<ActionId>(a), id(nx, ny, rx + 1, ry), 0.5);
                    }
                }
            }
        }
    }
    b.add_observation(sink, done_obs).add_reach(sink).make_absorbing(sink);
    for (int ry = 0; ry < n; ++ry) {
        b.add_init(id(n - 1, corridor, 0, ry));
    }
    return b.build();
}

Pomdp generate(const GridSpec& spec) {
    switch (spec.family) {
        case Family::obstacle: return gen_obstacle(spec.n);
        case Family::refuel: return gen_refuel(spec.n, spec.extra);
        case Family::evade: return gen_evade(spec.n, spec.extra);
        case Family::intercept: return gen_intercept(spec.n, spec.extra);
    }
    throw Error(ErrorKind::usage, "unknown family");
}

}  // namespace cshield
