// Pipeline driver: each stage of the proposal-generation pipeline as a
// subcommand with file handoffs under the output directory.
//
//   pmr gen|encode|labels|train|propose|eval [--config FILE] [--out DIR]
//       [--seed N] [--jobs N]
//
// Exit codes: 0 success, 2 config error, 3 missing upstream input,
// 4 numeric failure.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"
#include "pmr/pipeline.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    long long jobs = -1;
};

pmr::RunConfig resolve_config(const CliOptions& opts) {
    pmr::RunConfig cfg;
    std::string path = opts.config_path;
    if (path.empty()) {
        if (const char* env = std::getenv("PMR_CONFIG")) path = env;
    }
    if (!path.empty()) cfg = pmr::read_config(path);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
    if (opts.jobs >= 1) cfg.jobs = static_cast<std::size_t>(opts.jobs);
    cfg.validate();
    return cfg;
}

int run_stage(const std::string& stage, const CliOptions& opts) {
    try {
        const pmr::RunConfig cfg = resolve_config(opts);
        pmr::Model model = pmr::make_model(cfg);
        if (stage == "gen") pmr::run_gen(cfg);
        else if (stage == "encode") pmr::run_encode(cfg, model);
        else if (stage == "labels") pmr::run_labels(cfg);
        else if (stage == "train") pmr::run_train(cfg, model);
        else if (stage == "propose") pmr::run_propose(cfg, model);
        else if (stage == "eval") pmr::run_eval(cfg);
        return 0;
    } catch (const pmr::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const pmr::MissingInputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const pmr::NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PMR temporal action proposal pipeline"};
    app.require_subcommand(1);

    CliOptions opts;
    app.add_option("--config", opts.config_path, "config file (flat dotted keys); PMR_CONFIG also works");
    app.add_option("--out", opts.out_dir, "output directory (overrides paths.out)");
    app.add_option("--seed", opts.seed, "seed override");
    app.add_option("--jobs", opts.jobs, "video-level parallelism");

    std::string chosen;
    for (const char* name : {"gen", "encode", "labels", "train", "propose", "eval"}) {
        auto* sub = app.add_subcommand(name);
        sub->fallthrough();  // global flags may follow the stage name
        sub->callback([&chosen, name]() { chosen = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    return run_stage(chosen, opts);
}
