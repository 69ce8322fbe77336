// SPDX-License-Identifier: Apache-2.0
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dni/checkpoint.hpp"
#include "dni/harness.hpp"

namespace {

int cmd_run(const std::string& config_path, const CLI::Option* seed_opt, std::uint64_t seed,
            const std::string& out_dir, const std::string& resume_path) {
    dni::ExperimentConfig cfg = dni::load_config(config_path);
    if (*seed_opt) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    const dni::RunResult res = dni::run_experiment(cfg, resume_path);
    std::printf("run finished after %llu steps\n",
                static_cast<unsigned long long>(res.steps));
    std::printf("metrics    %s\n", res.metrics_path.c_str());
    std::printf("checkpoint %s\n", res.checkpoint_path.c_str());
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir) {
    dni::ExperimentConfig base = dni::load_config(config_path);
    if (!out_dir.empty()) base.out_dir = out_dir;
    const std::vector<dni::RunResult> runs = dni::run_sweep(base);
    for (const dni::RunResult& r : runs) std::printf("metrics    %s\n", r.metrics_path.c_str());
    std::printf("manifest   %s/sweep_manifest.json\n", base.out_dir.c_str());
    return 0;
}

int cmd_verify(const std::string& corrupt) {
    const std::vector<dni::VerifyCheck> checks = dni::run_verification(corrupt);
    std::size_t passed = 0;
    for (const dni::VerifyCheck& c : checks) {
        if (c.passed) ++passed;
        std::printf("[%s] %-32s value=%.3e  %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                    c.value, c.detail.c_str());
    }
    std::printf("%zu/%zu checks passed\n", passed, checks.size());
    return passed == checks.size() ? 0 : 1;
}

int cmd_inspect(const std::string& path) {
    const dni::CheckpointReader r = dni::CheckpointReader::load(path);
    std::printf("checkpoint version %u, %zu records\n", r.version(), r.entries().size());
    for (const auto& e : r.entries()) {
        std::string shown = r.describe(e);
        if (e.type == dni::RecordType::bytes && e.payload_size <= 64) {
            const std::string text = r.bytes(e.key);
            const bool printable =
                !text.empty() && std::all_of(text.begin(), text.end(), [](unsigned char ch) {
                    return std::isprint(ch) || ch == '\n';
                });
            if (printable) shown += " \"" + text + "\"";
        }
        std::printf("  %-40s %s\n", e.key.c_str(), shown.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dni: decoupled training engine"};
    app.require_subcommand(1);

    std::string config_path, out_dir, resume_path, corrupt, ckpt_path;
    std::uint64_t seed = 0;

    CLI::App* run = app.add_subcommand("run", "run one experiment from a config file");
    run->add_option("--config", config_path, "experiment config (json)")
        ->required()
        ->check(CLI::ExistingFile);
    CLI::Option* seed_opt = run->add_option("--seed", seed, "override the config seed");
    run->add_option("--out", out_dir, "override the output directory");
    run->add_option("--resume", resume_path, "continue from a checkpoint")
        ->check(CLI::ExistingFile);

    CLI::App* sweep = app.add_subcommand("sweep", "run the attached parameter grid");
    sweep->add_option("--config", config_path, "experiment config with a sweep section (json)")
        ->required()
        ->check(CLI::ExistingFile);
    sweep->add_option("--out", out_dir, "override the output directory");

    CLI::App* verify = app.add_subcommand("verify", "run the built-in invariant checks");
    verify->add_option("--corrupt", corrupt,
                       "test hook: perturb the named check so it must fail");

    CLI::App* inspect =
        app.add_subcommand("inspect-checkpoint", "list the records inside a checkpoint");
    inspect->add_option("path", ckpt_path, "checkpoint file")
        ->required()
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, seed_opt, seed, out_dir, resume_path);
        if (sweep->parsed()) return cmd_sweep(config_path, out_dir);
        if (verify->parsed()) return cmd_verify(corrupt);
        if (inspect->parsed()) return cmd_inspect(ckpt_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
