// cshield: generate benchmark POMDPs, synthesize centralized or
// compositional shields, audit decompositions, simulate and train.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cshield/composite.hpp"
#include "cshield/decomposition.hpp"
#include "cshield/domains.hpp"
#include "cshield/error.hpp"
#include "cshield/pomdp_io.hpp"
#include "cshield/rl.hpp"

namespace fs = std::filesystem;
using namespace cshield;
using json = nlohmann::ordered_json;

namespace {

constexpr std::size_t cli_default_budget = 4'000'000;

struct ModelSource {
    std::string spec;
    std::string file;
};

struct Common {
    ModelSource source;
    std::string mode = "avoid";
    std::string cover = "auto";
    std::size_t budget = cli_default_budget;
    unsigned jobs = 1;
    std::uint64_t seed = 1;
    std::string out_dir;
};

std::string default_out_dir() {
    if (const char* env = std::getenv("CSHIELD_OUT"); env != nullptr && *env != '\0') {
        return env;
    }
    return "cshield-out";
}

fs::path out_dir(const Common& c) {
    fs::path dir = c.out_dir.empty() ? default_out_dir() : c.out_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::io, "cannot create output directory '" + dir.string() + "': " + ec.message());
    }
    return dir;
}

Pomdp load_model(const ModelSource& src) {
    if (!src.file.empty()) {
        return load_pomdp(src.file);
    }
    if (src.spec.empty()) {
        throw Error(ErrorKind::usage, "a model is required (--model or --model-file)");
    }
    return generate(parse_grid_spec(src.spec));
}

// Dual quadrants for the two-agent families, plain quadrants otherwise.
std::string resolve_cover_choice(const std::string& choice, const Pomdp& model) {
    if (choice != "auto") {
        return choice;
    }
    return auto_cover_name(model);
}

void add_model_options(CLI::App* cmd, Common& c) {
    auto* m = cmd->add_option("--model", c.source.spec, "generator spec, e.g. obstacle8 or refuel6_8");
    auto* f = cmd->add_option("--model-file", c.source.file, "model in the text format");
    m->excludes(f);
    f->excludes(m);
}

void add_synth_options(CLI::App* cmd, Common& c) {
    cmd->add_option("--mode", c.mode, "avoid or reach-avoid")->capture_default_str();
    cmd->add_option("--cover", c.cover, "auto, quadrant, dual-quadrant, single, file:<path>; none = centralized")
        ->capture_default_str();
    cmd->add_option("--budget", c.budget, "support-graph node budget")->capture_default_str()->check(
        CLI::PositiveNumber);
    cmd->add_option("-j,--jobs", c.jobs, "parallel synthesis jobs")->capture_default_str()->check(
        CLI::PositiveNumber);
}

void add_common_options(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "random seed")->capture_default_str();
    cmd->add_option("--out-dir", c.out_dir, "output directory (default $CSHIELD_OUT or ./cshield-out)");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string safe_name(std::string s) {
    for (char& ch : s) {
        if (ch == '/' || ch == ' ') {
            ch = '_';
        }
    }
    return s;
}

// ---- gen

int cmd_gen(const std::string& family, int n, std::optional<int> extra, const std::string& out_file,
            const Common& c) {
    GridSpec spec;
    spec.family = parse_family(family);
    spec.n = n;
    spec.extra = extra.value_or(0);
    if (spec.family != Family::obstacle && !extra) {
        throw Error(ErrorKind::usage, std::string(to_string(spec.family)) + " needs a second size parameter");
    }
    const Pomdp m = generate(spec);
    const fs::path path = out_file.empty() ? out_dir(c) / (m.name() + ".pomdp") : fs::path(out_file);
    save_pomdp(m, path);
    std::cout << path.string() << ": " << m.num_states() << " states, " << m.num_actions() << " actions, "
              << m.num_observations() << " observations\n";
    return 0;
}

// ---- synth

int cmd_synth(const Common& c) {
    const Pomdp m = load_model(c.source);
    const ShieldMode mode = parse_shield_mode(c.mode);
    const fs::path dir = out_dir(c);
    const std::string base = safe_name(m.name());
    json report;
    report["model"] = m.name();
    report["states"] = m.num_states();
    report["mode"] = std::string(to_string(mode));
    const auto t0 = std::chrono::steady_clock::now();

    if (c.cover == "none" || c.cover == "central") {
        const auto r = synthesize(m, m.spec(), mode, c.budget);
        const fs::path file = dir / (base + ".shield");
        write_text_file(file, r.shield.serialize());
        report["method"] = "centralized";
        report["support_nodes"] = r.support_nodes;
        report["winning_nodes"] = r.winning_nodes;
        report["files"] = {file.string()};
        std::cout << "centralized " << m.name() << ": " << r.support_nodes << " support nodes, " << r.winning_nodes
                  << " winning\n";
    } else {
        const auto choice = resolve_cover_choice(c.cover, m);
        const auto cover = resolve_cover(choice, m);
        const auto dec = prepare_decomposition(m, cover, mode);
        CompositeShield cs(dec, mode, c.budget, c.jobs);
        const fs::path cover_file = dir / (base + ".cover");
        write_text_file(cover_file, serialize_cover(cover));
        report["method"] = "compositional";
        report["cover"] = choice;
        report["max_submodel_states"] = dec.max_extended_states();
        json subs = json::array();
        json files = json::array({cover_file.string()});
        std::size_t max_nodes = 0;
        for (std::size_t i = 0; i < cs.size(); ++i) {
            const auto& sub = dec.submodels[i];
            const fs::path file = dir / (base + "." + safe_name(sub.name) + ".shield");
            write_text_file(file, cs.sub(i).shield().serialize());
            files.push_back(file.string());
            const auto [win, total] = cs.sub(i).initial_status();
            max_nodes = std::max(max_nodes, cs.sub(i).support_nodes());
            subs.push_back({{"name", sub.name},
                            {"core_states", sub.core.size()},
                            {"extended_states", sub.extended.size()},
                            {"support_nodes", cs.sub(i).support_nodes()},
                            {"winning_nodes", cs.sub(i).shield().size()},
                            {"winning_initial_supports", win},
                            {"initial_supports", total},
                            {"overapproximated", sub.overapproximated},
                            {"winning_submodel", sub.winning}});
            std::cout << sub.name << ": " << sub.extended.size() << " states, " << cs.sub(i).support_nodes()
                      << " support nodes, " << cs.sub(i).shield().size() << " winning\n";
        }
        report["max_support_nodes"] = max_nodes;
        report["submodels"] = subs;
        report["files"] = files;
    }
    report["seconds"] = seconds_since(t0);
    const fs::path report_file = dir / (base + ".synth.json");
    write_text_file(report_file, report.dump(2) + "\n");
    std::cout << "report: " << report_file.string() << "\n";
    return 0;
}

// Composite shield from files written by synth, or synthesized now.
struct LoadedComposite {
    std::vector<CoverSet> cover;
    Decomposition dec;
    std::unique_ptr<CompositeShield> shield;
};

std::unique_ptr<LoadedComposite> make_composite(const Pomdp& m, const Common& c, ShieldMode mode,
                                                const std::string& load_dir) {
    auto out = std::make_unique<LoadedComposite>();
    const std::string base = safe_name(m.name());
    if (!load_dir.empty()) {
        const fs::path dir = load_dir;
        out->cover = parse_cover(read_text_file(dir / (base + ".cover")), m);
        out->dec = prepare_decomposition(m, out->cover, mode);
        std::vector<Shield> tables;
        for (const auto& sub : out->dec.submodels) {
            tables.push_back(Shield::parse(read_text_file(dir / (base + "." + safe_name(sub.name) + ".shield"))));
        }
        out->shield = std::make_unique<CompositeShield>(out->dec, std::move(tables), mode, c.budget);
    } else {
        out->cover = resolve_cover(resolve_cover_choice(c.cover, m), m);
        out->dec = prepare_decomposition(m, out->cover, mode);
        out->shield = std::make_unique<CompositeShield>(out->dec, mode, c.budget, c.jobs);
    }
    return out;
}

Shield make_central(const Pomdp& m, const Common& c, ShieldMode mode, const std::string& load_dir) {
    if (!load_dir.empty()) {
        auto s = Shield::parse(read_text_file(fs::path(load_dir) / (safe_name(m.name()) + ".shield")));
        if (s.spec_hash() != m.spec().hash() || s.num_states() != m.num_states()) {
            throw Error(ErrorKind::semantic, "shield file does not match model '" + m.name() + "'");
        }
        return s;
    }
    return synthesize(m, m.spec(), mode, c.budget).shield;
}

struct Shielding {
    std::shared_ptr<const Shield> central;
    std::shared_ptr<LoadedComposite> composite;
    SessionFactory factory;
};

Shielding make_shielding(const Pomdp& m, const Common& c, const std::string& kind, const std::string& load_dir) {
    const ShieldMode mode = parse_shield_mode(c.mode);
    Shielding s;
    if (kind == "none") {
        s.factory = [&m] { return std::make_unique<UnshieldedSession>(m); };
    } else if (kind == "central") {
        s.central = std::make_shared<const Shield>(make_central(m, c, mode, load_dir));
        s.factory = [&m, shield = s.central] { return std::make_unique<CentralSession>(m, *shield); };
    } else if (kind == "composite") {
        s.composite = make_composite(m, c, mode, load_dir);
        s.factory = [comp = s.composite] { return std::make_unique<CompositeSession>(*comp->shield); };
    } else {
        throw Error(ErrorKind::usage, "unknown shield kind '" + kind + "' (none, central, composite)");
    }
    return s;
}

// ---- check

int cmd_check(const Common& c, std::size_t traces, int steps) {
    const Pomdp m = load_model(c.source);
    const ShieldMode mode = parse_shield_mode(c.mode);
    const auto choice = resolve_cover_choice(c.cover, m);
    const auto dec = prepare_decomposition(m, resolve_cover(choice, m), mode);
    json report;
    report["model"] = m.name();
    report["cover"] = choice;
    report["admissible"] = true;
    json subs = json::array();
    for (std::size_t i = 0; i < dec.size(); ++i) {
        const auto& sub = dec.submodels[i];
        json edges = json::array();
        for (auto j : dec.edges[i]) {
            edges.push_back(dec.submodels[j].name);
        }
        subs.push_back({{"name", sub.name},
                        {"core_states", sub.core.size()},
                        {"extended_states", sub.extended.size()},
                        {"initial_states", sub.init.size()},
                        {"overapproximated", sub.overapproximated},
                        {"winning_submodel", sub.winning},
                        {"successors", edges}});
    }
    report["submodels"] = subs;
    const auto audit = audit_estimators(dec, traces, steps, c.seed);
    report["audit"] = {{"traces", audit.traces}, {"steps", audit.steps}, {"mismatches", audit.mismatches}};
    const fs::path file = out_dir(c) / (safe_name(m.name()) + ".check.json");
    write_text_file(file, report.dump(2) + "\n");
    std::cout << m.name() << ": admissible " << choice << " cover with " << dec.size() << " submodels; "
              << audit.steps << " estimator steps over " << audit.traces << " traces, " << audit.mismatches
              << " mismatches\nreport: " << file.string() << "\n";
    if (audit.mismatches != 0) {
        throw Error(ErrorKind::audit_failure, "estimator mismatch: " + audit.first_mismatch);
    }
    return 0;
}

// ---- simulate

int cmd_simulate(const Common& c, const std::string& kind, int episodes, int steps, const std::string& load_dir) {
    if (episodes < 1) {
        throw Error(ErrorKind::usage, "--episodes must be at least 1");
    }
    const Pomdp m = load_model(c.source);
    auto shielding = make_shielding(m, c, kind, load_dir);
    Agent random_agent(m.num_actions());
    std::string csv = "episode,outcome,steps,reward,violations\n";
    PhaseTally tally;
    for (int e = 1; e <= episodes; ++e) {
        Simulator sim(m, c.seed * 1'000'003ULL + static_cast<std::uint64_t>(e));
        auto session = shielding.factory();
        const auto log = run_episode(sim, random_agent, *session, {1.0, false, steps, nullptr});
        ++tally.episodes;
        tally.successes += log.outcome == Outcome::reach ? 1 : 0;
        tally.violations += log.violations;
        tally.faults += log.outcome == Outcome::shield_fault ? 1 : 0;
        std::ostringstream row;
        row << e << ',' << to_string(log.outcome) << ',' << log.steps.size() << ',' << log.total_reward << ','
            << log.violations << '\n';
        csv += row.str();
    }
    const fs::path file = out_dir(c) / (safe_name(m.name()) + "." + kind + ".sim.csv");
    write_text_file(file, csv);
    std::cout << m.name() << " (" << kind << "): " << tally.episodes << " episodes, " << tally.successes
              << " reached, " << tally.violations << " violations, " << tally.faults << " shield faults\n"
              << "episodes: " << file.string() << "\n";
    return 0;
}

// ---- train

int cmd_train(const Common& c, const std::string& kind, TrainConfig config, std::vector<std::uint64_t> seeds,
              bool parallel, const std::string& load_dir) {
    if (config.episodes < 1) {
        throw Error(ErrorKind::usage, "--episodes must be at least 1");
    }
    if (seeds.empty()) {
        throw Error(ErrorKind::usage, "the seed list is empty");
    }
    const Pomdp m = load_model(c.source);
    auto shielding = make_shielding(m, c, kind, load_dir);
    if (parallel && !shielding.composite) {
        throw Error(ErrorKind::usage, "--parallel-subtask needs --shield composite");
    }
    const fs::path dir = out_dir(c);
    const std::string tag = safe_name(m.name()) + "." + kind + (parallel ? ".parallel" : "");
    for (auto seed : seeds) {
        config.seed = seed;
        const auto result = parallel ? parallel_subtask_train(shielding.composite->dec, shielding.factory, config)
                                     : train(m, shielding.factory, config);
        const fs::path csv = dir / (tag + ".seed" + std::to_string(seed) + ".csv");
        const fs::path summary = dir / (tag + ".seed" + std::to_string(seed) + ".summary.json");
        write_text_file(csv, metrics_csv(result));
        write_text_file(summary, summary_json(result, m.name(), kind + (parallel ? "+parallel" : "")));
        std::printf("seed %llu: violations %d/%d, success %.2f/%.2f, shield faults %d, final reward %.3f\n",
                    static_cast<unsigned long long>(seed), result.during.violations, result.after.violations,
                    result.during.success_rate(), result.after.success_rate(),
                    result.during.faults + result.periodic.faults + result.after.faults, result.final_reward());
        std::cout << "  " << csv.string() << "\n  " << summary.string() << "\n";
    }
    return 0;
}

// ---- bench

int cmd_bench(const Common& c, const std::vector<std::string>& instances, const std::string& csv_file) {
    const ShieldMode mode = parse_shield_mode(c.mode);
    std::string csv = "instance,method,model_states,max_submodel_states,support_nodes,seconds,status\n";
    auto row = [&](const std::string& inst, const char* method, std::size_t states, std::size_t sub_states,
                   std::size_t nodes, double secs, const std::string& status) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%zu,%zu,%.3f,%s\n", inst.c_str(), method, states, sub_states,
                      nodes, secs, status.c_str());
        csv += buf;
        std::cout << buf;
    };
    for (const auto& inst : instances) {
        const Pomdp m = generate(parse_grid_spec(inst));
        {
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const auto r = synthesize(m, m.spec(), mode, c.budget);
                row(m.name(), "centralized", m.num_states(), m.num_states(), r.support_nodes, seconds_since(t0), "OK");
            } catch (const Error& e) {
                const std::string status =
                    e.kind() == ErrorKind::budget_exceeded ? "TO" : "ERR:" + std::string(to_string(e.kind()));
                row(m.name(), "centralized", m.num_states(), m.num_states(), 0, seconds_since(t0), status);
            }
        }
        {
            const auto t0 = std::chrono::steady_clock::now();
            std::size_t sub_states = 0;
            try {
                const auto dec = prepare_decomposition(m, resolve_cover(resolve_cover_choice(c.cover, m), m), mode);
                sub_states = dec.max_extended_states();
                CompositeShield cs(dec, mode, c.budget, c.jobs);
                std::size_t nodes = 0;
                for (std::size_t i = 0; i < cs.size(); ++i) {
                    nodes = std::max(nodes, cs.sub(i).support_nodes());
                }
                row(m.name(), "compositional", m.num_states(), sub_states, nodes, seconds_since(t0), "OK");
            } catch (const Error& e) {
                const std::string status =
                    e.kind() == ErrorKind::budget_exceeded ? "TO" : "ERR:" + std::string(to_string(e.kind()));
                row(m.name(), "compositional", m.num_states(), sub_states, 0, seconds_since(t0), status);
            }
        }
    }
    const fs::path file = csv_file.empty() ? out_dir(c) / "bench.csv" : fs::path(csv_file);
    write_text_file(file, csv);
    std::cout << "bench: " << file.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compositional shield synthesis for POMDPs"};
    app.require_subcommand(1);
    Common c;

    std::string family;
    int n = 0;
    std::optional<int> extra;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen", "generate a benchmark model");
    gen->add_option("family", family, "obstacle, refuel, evade or intercept")->required();
    gen->add_option("n", n, "grid size")->required();
    gen->add_option("extra", extra, "energy capacity (refuel) or radius (evade, intercept)");
    gen->add_option("--out", gen_out, "output file (default <out-dir>/<name>.pomdp)");
    gen->add_option("--out-dir", c.out_dir, "output directory (default $CSHIELD_OUT or ./cshield-out)");

    auto* synth = app.add_subcommand("synth", "synthesize a centralized (--cover none) or compositional shield");
    add_model_options(synth, c);
    add_synth_options(synth, c);
    add_common_options(synth, c);

    std::size_t traces = 1000;
    int steps = 100;
    auto* check = app.add_subcommand("check", "check cover admissibility and audit submodel estimators");
    add_model_options(check, c);
    add_synth_options(check, c);
    add_common_options(check, c);
    check->add_option("--traces", traces, "random traces for the estimator audit")->capture_default_str();
    check->add_option("--steps", steps, "steps per trace")->capture_default_str();

    std::string shield_kind = "composite";
    std::string load_dir;
    int sim_episodes = 100;
    auto* simulate = app.add_subcommand("simulate", "run a uniformly random agent under a shield");
    add_model_options(simulate, c);
    add_synth_options(simulate, c);
    add_common_options(simulate, c);
    simulate->add_option("--shield", shield_kind, "none, central or composite")->capture_default_str();
    simulate->add_option("--load", load_dir, "directory with shield files from synth");
    simulate->add_option("--episodes", sim_episodes, "episodes")->capture_default_str();
    simulate->add_option("--steps", steps, "step cap per episode")->capture_default_str();

    TrainConfig config;
    std::vector<std::uint64_t> seeds;
    bool parallel = false;
    auto* train_cmd = app.add_subcommand("train", "tabular Q-learning with a shield");
    add_model_options(train_cmd, c);
    add_synth_options(train_cmd, c);
    train_cmd->add_option("--out-dir", c.out_dir, "output directory (default $CSHIELD_OUT or ./cshield-out)");
    train_cmd->add_option("--shield", shield_kind, "none, central or composite")->capture_default_str();
    train_cmd->add_option("--load", load_dir, "directory with shield files from synth");
    train_cmd->add_option("--episodes", config.episodes, "training episodes")->capture_default_str();
    train_cmd->add_option("--seed,--seeds", seeds, "one or more seeds (default 1)")->delimiter(',');
    train_cmd->add_option("--smooth", config.smooth, "smoothing window of the evaluation curve")
        ->capture_default_str();
    train_cmd->add_option("--eval-every", config.eval_every, "training episodes between evaluations")
        ->capture_default_str();
    train_cmd->add_option("--eval-episodes", config.eval_episodes, "greedy episodes per evaluation")
        ->capture_default_str();
    train_cmd->add_option("--final-episodes", config.final_episodes, "greedy episodes after training")
        ->capture_default_str();
    train_cmd->add_option("--alpha", config.agent.alpha, "learning rate")->capture_default_str();
    train_cmd->add_option("--gamma", config.agent.gamma, "discount")->capture_default_str();
    train_cmd->add_option("--max-steps", config.max_steps, "step cap per episode")->capture_default_str();
    train_cmd->add_flag("--parallel-subtask", parallel, "also start training episodes in submodel initial sets");

    std::vector<std::string> instances;
    std::string bench_csv;
    auto* bench = app.add_subcommand("bench", "centralized vs compositional synthesis per instance");
    add_synth_options(bench, c);
    bench->add_option("--out-dir", c.out_dir, "output directory (default $CSHIELD_OUT or ./cshield-out)");
    bench->add_option("instances", instances, "generator specs, e.g. obstacle6 refuel16_18");
    bench->add_option("--csv", bench_csv, "output CSV (default <out-dir>/bench.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error[usage]: " << e.what() << "\n";
        return exit_code(ErrorKind::usage);
    }

    try {
        if (*gen) {
            return cmd_gen(family, n, extra, gen_out, c);
        }
        if (*synth) {
            return cmd_synth(c);
        }
        if (*check) {
            return cmd_check(c, traces, steps);
        }
        if (*simulate) {
            return cmd_simulate(c, shield_kind, sim_episodes, steps, load_dir);
        }
        if (*train_cmd) {
            if (seeds.empty() && train_cmd->count("--seed") == 0) {
                seeds.push_back(1);
            }
            return cmd_train(c, shield_kind, config, seeds, parallel, load_dir);
        }
        if (*bench) {
            return cmd_bench(c, instances, bench_csv);
        }
    } catch (const Error& e) {
        std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
