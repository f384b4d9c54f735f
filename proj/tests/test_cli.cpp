#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#ifndef CSHIELD_CLI_PATH
#error "CSHIELD_CLI_PATH must point at the cshield binary"
#endif

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

fs::path scratch_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("cshield-cli-test-" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

Run cli(const std::string& args) {
    const auto log = scratch_dir() / "last.log";
    const std::string cmd = std::string(CSHIELD_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("cli: usage errors exit 2") {
    const auto out = " --out-dir " + scratch_dir().string();
    CHECK(cli("").code == 2);
    CHECK(cli("frobnicate").code == 2);
    CHECK(cli("train --model obstacle6 --episodes 0" + out).code == 2);
    CHECK(cli("synth --model obstacle6 --mode both" + out).code == 2);
    CHECK(cli("gen refuel 6" + out).code == 2);
    CHECK(cli("help").code == 2);
}

TEST_CASE("cli: error categories map to exit codes") {
    const auto out = " --out-dir " + scratch_dir().string();
    CHECK(cli("synth --model obstacle6 --cover none --budget 10" + out).code == 7);
    CHECK(cli("synth --model-file " + (scratch_dir() / "missing.pomdp").string() + out).code == 3);
    CHECK(cli("gen obstacle 3" + out).code == 4);
    const auto bad = scratch_dir() / "bad.pomdp";
    std::ofstream(bad) << "pomdp bad\nstates two\n";
    const auto r = cli("synth --model-file " + bad.string() + out);
    CHECK(r.code == 4);
    CHECK(r.out.find("syntax") != std::string::npos);
}

TEST_CASE("cli: gen, synth, check and simulate") {
    const auto dir = scratch_dir() / "flow";
    const auto out = " --out-dir " + dir.string();
    REQUIRE(cli("gen obstacle 6" + out).code == 0);
    const auto model = dir / "obstacle6.pomdp";
    REQUIRE(fs::exists(model));

    REQUIRE(cli("synth --model-file " + model.string() + " --cover none" + out).code == 0);
    CHECK(fs::exists(dir / "obstacle6.shield"));
    const auto central = nlohmann::json::parse(slurp(dir / "obstacle6.synth.json"));
    CHECK(central["method"] == "centralized");
    CHECK(central["support_nodes"].get<int>() > 0);

    REQUIRE(cli("synth --model-file " + model.string() + " --cover quadrant" + out).code == 0);
    const auto comp = nlohmann::json::parse(slurp(dir / "obstacle6.synth.json"));
    CHECK(comp["method"] == "compositional");
    CHECK(comp["submodels"].size() == 4);
    CHECK(fs::exists(dir / "obstacle6.cover"));

    const auto check = cli("check --model-file " + model.string() + " --cover quadrant --traces 50" + out);
    CHECK(check.code == 0);

    const auto sim = cli("simulate --model obstacle6 --shield composite --episodes 20 --load " + dir.string() + out);
    CHECK(sim.code == 0);
    CHECK(sim.out.find(" 0 violations") != std::string::npos);
}

TEST_CASE("cli: train writes metrics and summaries per seed") {
    const auto dir = scratch_dir() / "train";
    const auto r = cli("train --model obstacle6 --shield central --episodes 100 --eval-every 50 --final-episodes 10 "
                       "--seeds 3,4 --out-dir " +
                       dir.string());
    REQUIRE(r.code == 0);
    for (int seed : {3, 4}) {
        const auto stem = dir / ("obstacle6.central.seed" + std::to_string(seed));
        const auto csv = slurp(stem.string() + ".csv");
        CHECK(csv.rfind("episode,phase,normalized_reward,success,violations\n", 0) == 0);
        const auto summary = nlohmann::json::parse(slurp(stem.string() + ".summary.json"));
        CHECK(summary["shield"] == "central");
        CHECK(summary["during"]["episodes"] == 100);
        CHECK(summary["during"]["violations"] == 0);
        CHECK(summary["after"]["episodes"] == 10);
    }
}

TEST_CASE("cli: bench") {
    const auto dir = scratch_dir() / "bench";
    const auto csv = dir / "b.csv";
    REQUIRE(cli("bench --out-dir " + dir.string() + " --csv " + csv.string()).code == 0);
    CHECK(slurp(csv) == "instance,method,model_states,max_submodel_states,support_nodes,seconds,status\n");
    REQUIRE(cli("bench obstacle6 --budget 50 --out-dir " + dir.string() + " --csv " + csv.string()).code == 0);
    const auto text = slurp(csv);
    CHECK(text.find("obstacle6,centralized,37,37,0,") != std::string::npos);
    CHECK(text.find(",TO\n") != std::string::npos);
    CHECK(text.find("obstacle6,compositional,37,") != std::string::npos);
}
