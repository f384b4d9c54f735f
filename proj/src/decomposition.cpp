#include "cshield/decomposition.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <sstream>

#include "cshield/error.hpp"
#include "cshield/pomdp_io.hpp"

namespace cshield {

StateSet Submodel::to_local_set(const StateSet& global) const {
    StateSet out(to_global.size());
    for (StateId s : global) {
        if (to_local[s] != no_state) {
            out.insert(to_local[s]);
        }
    }
    return out;
}

StateSet Submodel::to_global_set(const StateSet& local) const {
    StateSet out(to_local.size());
    for (StateId s : local) {
        out.insert(to_global[s]);
    }
    return out;
}

std::vector<StateId> Submodel::to_local_ids(const StateSet& global) const {
    std::vector<StateId> out;
    for (StateId s : global) {
        if (to_local[s] != no_state) {
            out.push_back(to_local[s]);
        }
    }
    return out;
}

bool Decomposition::has_edge(std::size_t i, std::size_t j) const {
    return std::binary_search(edges[i].begin(), edges[i].end(), j);
}

std::size_t Decomposition::max_extended_states() const {
    std::size_t m = 0;
    for (const auto& sub : submodels) {
        m = std::max(m, sub.extended.size());
    }
    return m;
}

namespace {

void build_local_model(const Pomdp& g, Submodel& sub) {
    const auto n = sub.to_global.size();
    PomdpBuilder b(g.name() + "." + sub.name, n, g.action_names(), g.observation_names());
    b.allow_empty_init();
    if (g.grid()) {
        b.set_grid(g.grid()->n);
    }
    sub.core_local = StateSet(n);
    sub.interface_local = StateSet(n);
    for (StateId l = 0; l < n; ++l) {
        const StateId s = sub.to_global[l];
        for (ObsId z : g.observations(s)) {
            b.add_observation(l, z);
        }
        if (g.grid()) {
            b.set_cell(l, g.grid()->cells[s]);
        }
        if (sub.core.contains(s)) {
            sub.core_local.insert(l);
            for (ActionId a = 0; a < g.num_actions(); ++a) {
                for (const auto& t : g.transitions(s, a)) {
                    b.add_transition(l, a, sub.to_local[t.target], t.weight);
                }
                b.set_reward(l, a, g.reward(s, a));
            }
        } else {
            sub.interface_local.insert(l);
            b.make_absorbing(l);
        }
    }
    for (StateId s : sub.init) {
        b.add_init(sub.to_local[s]);
    }
    for (StateId s : sub.local_spec.reach) {
        b.add_reach(sub.to_local[s]);
    }
    for (StateId s : sub.local_spec.avoid) {
        b.add_avoid(sub.to_local[s]);
    }
    sub.model = b.build();
}

std::string list_states(const StateSet& s, std::size_t limit = 12) {
    std::string out;
    std::size_t k = 0;
    for (StateId id : s) {
        if (k++ == limit) {
            out += " ...";
            break;
        }
        out += (out.empty() ? "" : " ") + std::to_string(id);
    }
    return out;
}

}  // namespace

void check_admissible(const Decomposition& dec) {
    const Pomdp& g = *dec.global;
    StateSet covered(g.num_states());
    for (const auto& sub : dec.submodels) {
        covered |= sub.core;
    }
    const auto missing = StateSet::full(g.num_states()) - covered;
    if (!missing.empty()) {
        throw Error(ErrorKind::cover_violation, "states not covered by any submodel: " + list_states(missing));
    }
    for (const auto& sub : dec.submodels) {
        const auto need = g.init() & sub.core;
        if (!need.is_subset_of(sub.init)) {
            throw Error(ErrorKind::init_violation, "submodel '" + sub.name + "' misses initial states " +
                                                       list_states(need - sub.init));
        }
    }
}

Decomposition decompose(const Pomdp& model, const std::vector<CoverSet>& cover) {
    if (cover.empty()) {
        throw Error(ErrorKind::cover_violation, "empty cover");
    }
    Decomposition dec;
    dec.global = &model;
    const auto n = model.num_states();
    for (const auto& c : cover) {
        if (c.states.universe() != n) {
            throw Error(ErrorKind::precondition, "cover set '" + c.name + "' has the wrong universe");
        }
        if (c.states.empty()) {
            throw Error(ErrorKind::cover_violation, "cover set '" + c.name + "' is empty");
        }
        Submodel sub;
        sub.name = c.name;
        sub.core = c.states;
        sub.extended = c.states | model.successors(c.states);
        sub.to_global = sub.extended.to_vector();
        sub.to_local.assign(n, no_state);
        for (StateId l = 0; l < sub.to_global.size(); ++l) {
            sub.to_local[sub.to_global[l]] = l;
        }
        sub.init = model.init() & sub.core;
        sub.local_spec = {StateSet(n), model.avoid() & sub.extended};
        dec.submodels.push_back(std::move(sub));
    }
    dec.edges.resize(dec.size());
    for (std::size_t i = 0; i < dec.size(); ++i) {
        const auto exits = dec.submodels[i].interface();
        for (std::size_t j = 0; j < dec.size(); ++j) {
            if (i != j && exits.intersects(dec.submodels[j].core)) {
                dec.edges[i].push_back(j);
            }
        }
    }
    check_admissible(dec);
    for (auto& sub : dec.submodels) {
        build_local_model(model, sub);
    }
    return dec;
}

void assign_local_specs(Decomposition& dec, const Specification& spec, ShieldMode mode) {
    const auto k = dec.size();
    for (auto& sub : dec.submodels) {
        sub.winning = spec.reach.intersects(sub.core);
    }
    // submodels with a path to a winning one (reverse BFS)
    std::vector<char> leads(k, 0);
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < k; ++i) {
        if (dec.submodels[i].winning) {
            leads[i] = 1;
            queue.push_back(i);
        }
    }
    while (!queue.empty()) {
        const auto j = queue.front();
        queue.pop_front();
        for (std::size_t i = 0; i < k; ++i) {
            if (!leads[i] && dec.has_edge(i, j)) {
                leads[i] = 1;
                queue.push_back(i);
            }
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        auto& sub = dec.submodels[i];
        sub.local_spec.avoid = spec.avoid & sub.extended;
        if (sub.winning) {
            sub.local_spec.reach = spec.reach & sub.core;
        } else {
            StateSet proxy(spec.reach.universe());
            const auto exits = sub.interface();
            for (std::size_t j : dec.edges[i]) {
                if (leads[j]) {
                    proxy |= exits & dec.submodels[j].core;
                }
            }
            sub.local_spec.reach = proxy - spec.avoid;
            if (sub.local_spec.reach.empty() && mode == ShieldMode::reach_avoid) {
                throw Error(ErrorKind::stranded_submodel,
                            "submodel '" + sub.name + "' has no path to a submodel containing a reach state");
            }
        }
        build_local_model(*dec.global, sub);
    }
}

void overapproximate_initials(Decomposition& dec) {
    const Pomdp& g = *dec.global;
    for (std::size_t i = 0; i < dec.size(); ++i) {
        auto& sub = dec.submodels[i];
        if (g.init().intersects(sub.core)) {
            continue;
        }
        StateSet seed(g.num_states());
        for (std::size_t j = 0; j < dec.size(); ++j) {
            if (dec.has_edge(j, i)) {
                seed |= g.successors(dec.submodels[j].core) & sub.core;
            }
        }
        seed -= g.avoid();
        if (!seed.empty()) {
            sub.init |= seed;
            sub.overapproximated = true;
            build_local_model(g, sub);
        }
    }
}

Decomposition prepare_decomposition(const Pomdp& model, const std::vector<CoverSet>& cover, ShieldMode mode) {
    auto dec = decompose(model, cover);
    assign_local_specs(dec, model.spec(), mode);
    overapproximate_initials(dec);
    return dec;
}

std::vector<CoverSet> quadrant_cover(const Pomdp& model, CoverKind kind) {
    const auto& grid = model.grid();
    if (!grid || grid->n <= 0) {
        throw Error(ErrorKind::metadata_missing, "model '" + model.name() + "' has no grid metadata");
    }
    const int h = (grid->n + 1) / 2;
    const char* names[4] = {"tl", "tr", "bl", "br"};
    auto quad = [h](int x, int y) { return (y < h ? 0 : 2) + (x < h ? 0 : 1); };

    const std::size_t parts = kind == CoverKind::single ? 4 : 16;
    std::vector<CoverSet> cover(parts);
    for (std::size_t q = 0; q < parts; ++q) {
        cover[q].name = kind == CoverKind::single ? names[q] : std::string(names[q / 4]) + "." + names[q % 4];
        cover[q].states = StateSet(model.num_states());
    }
    std::vector<StateId> loose;
    for (StateId s = 0; s < model.num_states(); ++s) {
        const auto& c = grid->cells[s];
        if (!c.has_cell()) {
            loose.push_back(s);
            continue;
        }
        std::size_t q = static_cast<std::size_t>(quad(c.x, c.y));
        if (kind == CoverKind::dual) {
            if (!c.has_adversary()) {
                throw Error(ErrorKind::metadata_missing,
                            "state " + std::to_string(s) + " has no adversary cell for a dual cover");
            }
            q = q * 4 + static_cast<std::size_t>(quad(c.adv_x, c.adv_y));
        }
        cover[q].states.insert(s);
    }
    for (StateId s : loose) {
        bool placed = false;
        for (auto& part : cover) {
            for (StateId p : part.states) {
                bool pred = false;
                for (ActionId a = 0; a < model.num_actions() && !pred; ++a) {
                    for (const auto& t : model.transitions(p, a)) {
                        pred = pred || t.target == s;
                    }
                }
                if (pred && p != s) {
                    part.states.insert(s);
                    placed = true;
                    break;
                }
            }
        }
        if (!placed) {
            throw Error(ErrorKind::metadata_missing, "state " + std::to_string(s) + " has no cell and no predecessor");
        }
    }
    std::erase_if(cover, [](const CoverSet& c) { return c.states.empty(); });
    return cover;
}

namespace {

bool parse_int(std::string_view w, int& out) {
    auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), out);
    return ec == std::errc{} && p == w.data() + w.size();
}

// "x0..x1" or "x"
bool parse_range(std::string_view w, int& lo, int& hi) {
    const auto dots = w.find("..");
    if (dots == std::string_view::npos) {
        if (!parse_int(w, lo)) {
            return false;
        }
        hi = lo;
        return true;
    }
    return parse_int(w.substr(0, dots), lo) && parse_int(w.substr(dots + 2), hi);
}

// "name(a..b,c..d)"
bool parse_box(std::string_view w, std::string_view head, int box[4]) {
    if (w.substr(0, head.size()) != head || w.size() < head.size() + 2 || w[head.size()] != '(' || w.back() != ')') {
        return false;
    }
    const auto inner = w.substr(head.size() + 1, w.size() - head.size() - 2);
    const auto comma = inner.find(',');
    if (comma == std::string_view::npos) {
        return false;
    }
    return parse_range(inner.substr(0, comma), box[0], box[1]) && parse_range(inner.substr(comma + 1), box[2], box[3]);
}

}  // namespace

std::vector<CoverSet> parse_cover(std::string_view text, const Pomdp& model) {
    std::vector<CoverSet> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t number = 0;
    auto fail = [&](const std::string& msg) {
        throw Error(ErrorKind::syntax, "cover line " + std::to_string(number) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++number;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.resize(hash);
        }
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) {
            continue;
        }
        if (key != "sub") {
            fail("expected 'sub <name>: ...'");
        }
        std::string name;
        ls >> name;
        if (name.empty()) {
            fail("missing name");
        }
        if (name.back() == ':') {
            name.pop_back();
        } else {
            std::string colon;
            ls >> colon;
            if (colon != ":") {
                fail("expected ':' after name");
            }
        }
        CoverSet set{name, StateSet(model.num_states())};
        std::string item;
        while (ls >> item) {
            int box[4];
            if (item.rfind("cell(", 0) == 0) {
                const auto star = item.find('*');
                const auto cell_part = std::string_view(item).substr(0, star);
                int adv[4] = {0, 0, 0, 0};
                bool has_adv = false;
                if (!parse_box(cell_part, "cell", box)) {
                    fail("bad cell range '" + item + "'");
                }
                if (star != std::string::npos) {
                    if (!parse_box(std::string_view(item).substr(star + 1), "adv", adv)) {
                        fail("bad adversary range '" + item + "'");
                    }
                    has_adv = true;
                }
                const auto& grid = model.grid();
                if (!grid) {
                    throw Error(ErrorKind::metadata_missing, "cell ranges need grid metadata");
                }
                for (StateId s = 0; s < model.num_states(); ++s) {
                    const auto& c = grid->cells[s];
                    if (!c.has_cell() || c.x < box[0] || c.x > box[1] || c.y < box[2] || c.y > box[3]) {
                        continue;
                    }
                    if (has_adv && (!c.has_adversary() || c.adv_x < adv[0] || c.adv_x > adv[1] ||
                                    c.adv_y < adv[2] || c.adv_y > adv[3])) {
                        continue;
                    }
                    set.states.insert(s);
                }
                continue;
            }
            int lo = 0;
            int hi = 0;
            const auto dash = item.find('-');
            const bool ok = dash == std::string::npos
                                ? parse_int(item, lo) && (hi = lo, true)
                                : parse_int(std::string_view(item).substr(0, dash), lo) &&
                                      parse_int(std::string_view(item).substr(dash + 1), hi);
            if (!ok || lo < 0 || hi < lo) {
                fail("bad item '" + item + "'");
            }
            if (static_cast<std::size_t>(hi) >= model.num_states()) {
                throw Error(ErrorKind::semantic,
                            "cover line " + std::to_string(number) + ": state " + std::to_string(hi) + " out of range");
            }
            for (int s = lo; s <= hi; ++s) {
                set.states.insert(static_cast<StateId>(s));
            }
        }
        out.push_back(std::move(set));
    }
    return out;
}

std::string serialize_cover(const std::vector<CoverSet>& cover) {
    std::ostringstream out;
    for (const auto& c : cover) {
        out << "sub " << c.name << ":";
        const auto ids = c.states.to_vector();
        for (std::size_t i = 0; i < ids.size();) {
            std::size_t j = i;
            while (j + 1 < ids.size() && ids[j + 1] == ids[j] + 1) {
                ++j;
            }
            out << ' ' << ids[i];
            if (j > i) {
                out << '-' << ids[j];
            }
            i = j + 1;
        }
        out << '\n';
    }
    return out.str();
}

std::string auto_cover_name(const Pomdp& model) {
    if (model.grid()) {
        for (const auto& c : model.grid()->cells) {
            if (c.has_adversary()) {
                return "dual-quadrant";
            }
        }
    }
    return "quadrant";
}

std::vector<CoverSet> resolve_cover(std::string_view choice, const Pomdp& model) {
    if (choice == "auto") {
        return resolve_cover(auto_cover_name(model), model);
    }
    if (choice == "quadrant") {
        return quadrant_cover(model, CoverKind::single);
    }
    if (choice == "dual-quadrant" || choice == "dual") {
        return quadrant_cover(model, CoverKind::dual);
    }
    if (choice == "single") {
        return {CoverSet{"all", StateSet::full(model.num_states())}};
    }
    if (choice.substr(0, 5) == "file:") {
        return parse_cover(read_text_file(std::string(choice.substr(5))), model);
    }
    throw Error(ErrorKind::usage, "unknown cover '" + std::string(choice) + "'");
}

}  // namespace cshield
