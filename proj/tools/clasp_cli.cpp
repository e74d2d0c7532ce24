#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "clasp/belief.hpp"
#include "clasp/metrics.hpp"
#include "clasp/scenario.hpp"

namespace {

using namespace clasp;

struct CommonOptions {
    std::string scenario;
    std::size_t particles = 0;
    int steps = -1;
    std::uint64_t seed = 0;
    std::string out = "out";
    std::string profile = "test";
    std::vector<std::string> overrides;
};

void addCommon(CLI::App *cmd, CommonOptions &o) {
    cmd->add_option("--scenario", o.scenario, "Scenario config file")->required();
    cmd->add_option("--particles", o.particles, "Particle count (default: profile)");
    cmd->add_option("--steps", o.steps, "Number of observations (default: all configured)");
    cmd->add_option("--seed", o.seed, "Random seed");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--profile", o.profile, "paper or test")->check(CLI::IsMember({"paper", "test"}));
    cmd->add_option("--override", o.overrides, "KEY=VALUE config override (repeatable)");
}

RunSpec toRunSpec(const CommonOptions &o) {
    RunSpec spec;
    spec.scenario_path = o.scenario;
    if (o.particles > 0) spec.particles = o.particles;
    if (o.steps >= 0) spec.steps = o.steps;
    spec.seed = o.seed;
    spec.out_dir = o.out;
    spec.profile = parseProfile(o.profile);
    spec.overrides = o.overrides;
    return spec;
}

std::vector<Method> parseMethodList(const std::string &text) {
    if (text == "all") return allMethods();
    std::vector<Method> out;
    std::stringstream ss(text);
    std::string name;
    while (std::getline(ss, name, ',')) {
        try {
            out.push_back(parseMethod(name));
        } catch (const BeliefError &e) {
            throw ConfigError(std::string("--methods: ") + e.what());
        }
    }
    if (out.empty()) throw ConfigError("--methods is empty");
    return out;
}

void printSummary(const std::vector<RunRecord> &records) {
    for (const auto &run : records) {
        for (const auto &step : run.steps) {
            std::printf("%s %s step %d: %zu valid, mean CD %s m, likelihood %s\n", run.scenario.c_str(),
                        run.method.c_str(), step.step, step.stats.n_valid, formatNumber(step.stats.mean).c_str(),
                        formatNumber(step.likelihood).c_str());
        }
    }
}

std::vector<std::string> names(const std::vector<Method> &methods) {
    std::vector<std::string> out;
    for (Method m : methods) out.push_back(methodName(m));
    return out;
}

int runMethods(const RunSpec &spec, const ScenarioConfig &config, const std::vector<Method> &methods) {
    const auto records = compareMethods(config, methods, spec.seed);
    writeRunOutputs(spec, config, records, names(methods));
    printSummary(records);
    return 0;
}

std::string slurp(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Shape belief estimation from depth views and contact"};
    app.require_subcommand(1);

    CommonOptions run_opts;
    std::string method = "clasp";
    auto *run = app.add_subcommand("run", "Run one method on a scenario");
    addCommon(run, run_opts);
    run->add_option("--method", method, "Method selector");

    CommonOptions cmp_opts;
    std::string methods = "all";
    auto *compare = app.add_subcommand("compare", "Run several methods on one scenario into one table");
    addCommon(compare, cmp_opts);
    compare->add_option("--methods", methods, "Comma-separated selectors or 'all'");

    DatasetParams ds;
    std::uint64_t ds_seed = 0;
    std::string ds_out = "dataset";
    int ds_dim = 64;
    auto *dataset = app.add_subcommand("dataset", "Generate random axis-aligned box shapes");
    dataset->add_option("--count", ds.count, "Number of shapes");
    dataset->add_option("--seed", ds_seed, "Random seed");
    dataset->add_option("--out", ds_out, "Output directory");
    dataset->add_option("--dim", ds_dim, "Grid side length")->check(CLI::PositiveNumber);

    std::string manifest, eval_out = "replay", check;
    auto *eval = app.add_subcommand("eval", "Re-execute a run from its manifest");
    eval->add_option("--manifest", manifest, "manifest.yaml of an earlier run")->required();
    eval->add_option("--out", eval_out, "Output directory");
    eval->add_option("--check", check, "stats.csv that the replay must reproduce byte for byte");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            RunSpec spec = toRunSpec(run_opts);
            try {
                spec.method = parseMethod(method);
            } catch (const BeliefError &e) {
                throw ConfigError(std::string("--method: ") + e.what());
            }
            return runMethods(spec, resolveScenario(spec), {spec.method});
        }
        if (*compare) {
            RunSpec spec = toRunSpec(cmp_opts);
            const auto list = parseMethodList(methods);
            spec.method = list.front();
            return runMethods(spec, resolveScenario(spec), list);
        }
        if (*dataset) {
            ds.dims = {ds_dim, ds_dim, ds_dim};
            const auto entries = generateDataset(ds, ds_seed, ds_out);
            std::printf("wrote %zu shapes to %s\n", entries.size(), ds_out.c_str());
            return 0;
        }
        if (*eval) {
            ManifestReplay replay = loadManifest(manifest);
            replay.spec.out_dir = eval_out;
            const int code = runMethods(replay.spec, replay.config, replay.methods);
            if (!check.empty() && slurp(check) != slurp(eval_out + "/stats.csv")) {
                std::fprintf(stderr, "error: replayed stats differ from %s\n", check.c_str());
                return 1;
            }
            return code;
        }
    } catch (const ConfigError &e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
