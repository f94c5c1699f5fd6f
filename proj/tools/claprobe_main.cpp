// claprobe command-line front end: artifact detection, correction, GAN
// training with CLA dynamics, hyperparameter sweeps, update-geometry reports
// and group metrics, all driven by one JSON config file.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cla/pipeline.hpp"

namespace {

// Applies "dotted.path=value" overrides onto the config JSON. Values parse
// as JSON when possible and fall back to strings.
void apply_override(nlohmann::json& j, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
        throw claprobe::ConfigError("override '" + kv + "' is not key=value");
    const std::string path = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    nlohmann::json* cur = &j;
    std::size_t pos = 0;
    while (true) {
        const std::size_t dot = path.find('.', pos);
        const std::string key = path.substr(pos, dot - pos);
        if (key.empty()) throw claprobe::ConfigError("override '" + kv + "' has an empty key");
        if (dot == std::string::npos) {
            nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
            (*cur)[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
            return;
        }
        cur = &(*cur)[key];
        pos = dot + 1;
    }
}

struct CommonArgs {
    std::string config_path;
    std::string out;
    std::string model;
    std::string disc_model;
    long long seed = -1;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "JSON config file");
    cmd->add_option("-o,--out", args.out, "output directory")->required();
    cmd->add_option("-m,--model", args.model, "generator model container");
    cmd->add_option("--disc-model", args.disc_model, "discriminator model container");
    cmd->add_option("--seed", args.seed, "override run seed");
    cmd->add_option("--set", args.overrides, "config override key.path=value (repeatable)");
}

claprobe::RunConfig build_config(const CommonArgs& args) {
    nlohmann::json j = nlohmann::json::object();
    if (!args.config_path.empty())
        j = nlohmann::json::parse(claprobe::read_text_file(args.config_path));
    for (const std::string& kv : args.overrides) apply_override(j, kv);
    claprobe::RunConfig cfg = claprobe::RunConfig::from_json(j);
    if (!args.out.empty()) cfg.out = args.out;
    if (!args.model.empty()) cfg.model = args.model;
    if (!args.disc_model.empty()) cfg.disc_model = args.disc_model;
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"curvature-of-local-activation probing for piecewise-linear generators"};
    app.require_subcommand(1);

    CommonArgs detect_args, correct_args, train_args, sweep_args, geometry_args, eval_args;
    add_common(app.add_subcommand("detect", "score latent codes and select CLA groups"),
               detect_args);
    add_common(app.add_subcommand("correct", "dampen high-CLA units and regenerate"),
               correct_args);
    add_common(app.add_subcommand("train", "train a toy GAN and track CLA dynamics"),
               train_args);
    add_common(app.add_subcommand("sweep", "grid-search probe hyperparameters"), sweep_args);
    add_common(app.add_subcommand("geometry", "linearized update-case analysis"), geometry_args);
    add_common(app.add_subcommand("eval", "group metrics (realism, path length, P&R)"),
               eval_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("detect")) {
            const auto cfg = build_config(detect_args);
            const auto res = claprobe::run_detect(cfg);
            std::printf("detect: %zu codes scored, group size %zu, artifacts in %s\n",
                        res.scores.size(), res.group(claprobe::GroupKind::high_cla).members.size(),
                        cfg.out.c_str());
        } else if (app.got_subcommand("correct")) {
            const auto cfg = build_config(correct_args);
            const auto res = claprobe::run_correct(cfg);
            std::printf("correct: %zu codes corrected, mean |G(z)-G'(z)| = %g, artifacts in %s\n",
                        res.corrected_codes, res.mean_l2_change, cfg.out.c_str());
        } else if (app.got_subcommand("train")) {
            const auto cfg = build_config(train_args);
            const auto snaps = claprobe::run_train(cfg);
            std::printf("train: %zu snapshots written to %s\n", snaps.size(), cfg.out.c_str());
        } else if (app.got_subcommand("sweep")) {
            const auto cfg = build_config(sweep_args);
            const auto rows = claprobe::run_sweep(cfg);
            std::printf("sweep: %zu settings evaluated, artifacts in %s\n", rows.size(),
                        cfg.out.c_str());
        } else if (app.got_subcommand("geometry")) {
            const auto cfg = build_config(geometry_args);
            const auto sum = claprobe::run_geometry(cfg);
            std::printf("geometry: %zu samples, update identity max rel err %.3g, "
                        "artifacts in %s\n",
                        sum.samples, sum.update_identity_max_rel_err, cfg.out.c_str());
        } else if (app.got_subcommand("eval")) {
            const auto cfg = build_config(eval_args);
            claprobe::run_eval(cfg);
            std::printf("eval: metrics written to %s/metrics.json\n", eval_args.out.c_str());
        }
    } catch (const claprobe::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
