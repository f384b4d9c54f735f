#include "cshield/pomdp_io.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include "cshield/error.hpp"

namespace cshield {

namespace {

std::vector<std::string_view> split_words(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
            ++i;
        }
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') {
            ++j;
        }
        if (j > i) {
            out.push_back(line.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

[[noreturn]] void fail(ErrorKind kind, std::size_t line, const std::string& msg) {
    throw Error(kind, "line " + std::to_string(line) + ": " + msg);
}

template <typename T>
T parse_number(std::string_view word, std::size_t line) {
    T value{};
    auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), value);
    if (ec != std::errc{} || ptr != word.data() + word.size()) {
        fail(ErrorKind::syntax, line, "expected a number, got '" + std::string(word) + "'");
    }
    return value;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

struct Header {
    std::string name = "model";
    std::optional<std::size_t> states;
    std::vector<std::string> actions;
    std::vector<std::string> observations;
};

}  // namespace

Pomdp parse_pomdp(std::string_view text) {
    struct Line {
        std::size_t number;
        std::vector<std::string_view> words;
    };
    std::vector<Line> body;
    Header header;

    std::size_t number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++number;
        if (auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        auto words = split_words(line);
        if (words.empty()) {
            if (end == text.size()) {
                break;
            }
            continue;
        }
        const auto key = words[0];
        if (key == "pomdp") {
            if (words.size() != 2) {
                fail(ErrorKind::syntax, number, "expected 'pomdp <name>'");
            }
            header.name = std::string(words[1]);
        } else if (key == "states") {
            if (words.size() != 2) {
                fail(ErrorKind::syntax, number, "expected 'states <N>'");
            }
            header.states = parse_number<std::size_t>(words[1], number);
        } else if (key == "actions" || key == "observations") {
            if (words.size() < 2) {
                fail(ErrorKind::syntax, number, "expected at least one label");
            }
            auto& target = key == "actions" ? header.actions : header.observations;
            for (std::size_t i = 1; i < words.size(); ++i) {
                target.emplace_back(words[i]);
            }
        } else if (key == "init" || key == "obs" || key == "trans" || key == "reward" || key == "label" ||
                   key == "grid" || key == "cell") {
            body.push_back({number, std::move(words)});
        } else {
            fail(ErrorKind::syntax, number, "unknown directive '" + std::string(key) + "'");
        }
        if (end == text.size()) {
            break;
        }
    }

    if (!header.states) {
        throw Error(ErrorKind::syntax, "missing 'states' directive");
    }
    if (header.actions.empty()) {
        throw Error(ErrorKind::syntax, "missing 'actions' directive");
    }
    if (header.observations.empty()) {
        throw Error(ErrorKind::syntax, "missing 'observations' directive");
    }

    PomdpBuilder b(header.name, *header.states, header.actions, header.observations);

    auto state_of = [&](std::string_view w, std::size_t line) {
        const auto s = parse_number<StateId>(w, line);
        if (s >= *header.states) {
            fail(ErrorKind::semantic, line, "unknown state " + std::string(w));
        }
        return s;
    };
    auto action_of = [&](std::string_view w, std::size_t line) {
        for (std::size_t i = 0; i < header.actions.size(); ++i) {
            if (header.actions[i] == w) {
                return static_cast<ActionId>(i);
            }
        }
        fail(ErrorKind::semantic, line, "unknown action '" + std::string(w) + "'");
    };
    auto obs_of = [&](std::string_view w, std::size_t line) {
        for (std::size_t i = 0; i < header.observations.size(); ++i) {
            if (header.observations[i] == w) {
                return static_cast<ObsId>(i);
            }
        }
        fail(ErrorKind::semantic, line, "unknown observation '" + std::string(w) + "'");
    };

    for (const auto& [ln, w] : body) {
        const auto key = w[0];
        if (key == "init") {
            if (w.size() < 2) {
                fail(ErrorKind::syntax, ln, "expected 'init <s> ...'");
            }
            for (std::size_t i = 1; i < w.size(); ++i) {
                b.add_init(state_of(w[i], ln));
            }
        } else if (key == "obs") {
            if (w.size() < 3) {
                fail(ErrorKind::syntax, ln, "expected 'obs <s> <z> ...'");
            }
            const auto s = state_of(w[1], ln);
            for (std::size_t i = 2; i < w.size(); ++i) {
                b.add_observation(s, obs_of(w[i], ln));
            }
        } else if (key == "trans") {
            if (w.size() != 4 && w.size() != 5) {
                fail(ErrorKind::syntax, ln, "expected 'trans <s> <a> <s'> [weight]'");
            }
            const double weight = w.size() == 5 ? parse_number<double>(w[4], ln) : 0.0;
            if (weight < 0.0) {
                fail(ErrorKind::semantic, ln, "negative weight");
            }
            b.add_transition(state_of(w[1], ln), action_of(w[2], ln), state_of(w[3], ln), weight);
        } else if (key == "reward") {
            if (w.size() != 4) {
                fail(ErrorKind::syntax, ln, "expected 'reward <s> <a> <r>'");
            }
            const auto s = state_of(w[1], ln);
            const double r = parse_number<double>(w[3], ln);
            if (w[2] == "*") {
                b.set_reward_all(s, r);
            } else {
                b.set_reward(s, action_of(w[2], ln), r);
            }
        } else if (key == "label") {
            if (w.size() != 3) {
                fail(ErrorKind::syntax, ln, "expected 'label <s> reach|avoid'");
            }
            const auto s = state_of(w[1], ln);
            if (w[2] == "reach") {
                b.add_reach(s);
            } else if (w[2] == "avoid") {
                b.add_avoid(s);
            } else {
                fail(ErrorKind::syntax, ln, "label must be reach or avoid");
            }
        } else if (key == "grid") {
            if (w.size() != 2) {
                fail(ErrorKind::syntax, ln, "expected 'grid <n>'");
            }
            b.set_grid(parse_number<int>(w[1], ln));
        } else if (key == "cell") {
            if (w.size() < 4 || w.size() > 6) {
                fail(ErrorKind::syntax, ln, "expected 'cell <s> <x> <y> [energy | adv-x adv-y]'");
            }
            CellInfo info;
            info.x = parse_number<int>(w[2], ln);
            info.y = parse_number<int>(w[3], ln);
            if (w.size() == 5) {
                info.energy = parse_number<int>(w[4], ln);
            } else if (w.size() == 6) {
                info.adv_x = parse_number<int>(w[4], ln);
                info.adv_y = parse_number<int>(w[5], ln);
            }
            b.set_cell(state_of(w[1], ln), info);
        }
    }

    return b.build();
}

std::string serialize_pomdp(const Pomdp& m) {
    std::ostringstream out;
    out << "pomdp " << m.name() << '\n';
    out << "states " << m.num_states() << '\n';
    out << "actions";
    for (const auto& a : m.action_names()) {
        out << ' ' << a;
    }
    out << "\nobservations";
    for (const auto& z : m.observation_names()) {
        out << ' ' << z;
    }
    out << '\n';
    if (!m.init().empty()) {
        out << "init";
        for (StateId s : m.init()) {
            out << ' ' << s;
        }
        out << '\n';
    }
    for (StateId s : m.reach()) {
        out << "label " << s << " reach\n";
    }
    for (StateId s : m.avoid()) {
        out << "label " << s << " avoid\n";
    }
    for (StateId s = 0; s < m.num_states(); ++s) {
        out << "obs " << s;
        for (ObsId z : m.observations(s)) {
            out << ' ' << m.observation_names()[z];
        }
        out << '\n';
        for (ActionId a = 0; a < m.num_actions(); ++a) {
            for (const auto& t : m.transitions(s, a)) {
                out << "trans " << s << ' ' << m.action_names()[a] << ' ' << t.target;
                if (t.weight > 0.0) {
                    out << ' ' << format_double(t.weight);
                }
                out << '\n';
            }
        }
        bool uniform = true;
        for (ActionId a = 1; a < m.num_actions(); ++a) {
            uniform = uniform && m.reward(s, a) == m.reward(s, 0);
        }
        if (uniform) {
            if (m.reward(s, 0) != 0.0) {
                out << "reward " << s << " * " << format_double(m.reward(s, 0)) << '\n';
            }
        } else {
            for (ActionId a = 0; a < m.num_actions(); ++a) {
                if (m.reward(s, a) != 0.0) {
                    out << "reward " << s << ' ' << m.action_names()[a] << ' ' << format_double(m.reward(s, a))
                        << '\n';
                }
            }
        }
    }
    if (const auto& g = m.grid()) {
        out << "grid " << g->n << '\n';
        for (StateId s = 0; s < g->cells.size(); ++s) {
            const auto& c = g->cells[s];
            if (!c.has_cell()) {
                continue;
            }
            out << "cell " << s << ' ' << c.x << ' ' << c.y;
            if (c.energy >= 0) {
                out << ' ' << c.energy;
            } else if (c.has_adversary()) {
                out << ' ' << c.adv_x << ' ' << c.adv_y;
            }
            out << '\n';
        }
    }
    return out.str();
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out << content;
}

Pomdp load_pomdp(const std::filesystem::path& path) {
    return parse_pomdp(read_text_file(path));
}

void save_pomdp(const Pomdp& model, const std::filesystem::path& path) {
    write_text_file(path, serialize_pomdp(model));
}

}  // namespace cshield
