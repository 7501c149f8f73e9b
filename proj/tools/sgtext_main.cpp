#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sgtext/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"scene graph classification over synthetic relational worlds"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(sgtext::runner::kVersion));

    std::string config_path, corpus_path, vocab_path, spec_path, out_path;
    std::string pred_path, gt_path, task = "SGCls", setup = "constrained", ks = "50,100";
    std::string extractor = "rules";
    std::optional<std::string> mode_opt, out_opt;
    std::optional<uint64_t> seed_opt;

    auto* run = app.add_subcommand("run", "run one experiment from a config file");
    run->add_option("--config", config_path, "experiment config JSON")->required();
    run->add_option("--mode", mode_opt, "override mode: BASE, TXM, GT or FULL");
    run->add_option("--seed", seed_opt, "override master seed");
    run->add_option("--out", out_opt, "override output directory");

    auto* extract = app.add_subcommand("extract", "extract symbolic graphs from a text corpus");
    extract->add_option("--corpus", corpus_path, "corpus JSONL")->required();
    extract->add_option("--vocab", vocab_path, "class vocabulary JSON")->required();
    extract->add_option("--extractor", extractor, "extractor name (default rules)");

    auto* datagen = app.add_subcommand("datagen", "generate a synthetic dataset");
    datagen->add_option("--spec", spec_path, "world spec JSON")->required();
    datagen->add_option("--out", out_path, "output dataset JSONL")->required();

    auto* eval = app.add_subcommand("eval", "score stored predictions against ground truth");
    eval->add_option("--pred", pred_path, "predictions JSONL")->required();
    eval->add_option("--gt", gt_path, "ground-truth dataset JSONL")->required();
    eval->add_option("--task", task, "SGCls or PredCls");
    eval->add_option("--setup", setup, "constrained or unconstrained");
    eval->add_option("--k", ks, "comma-separated K values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (run->parsed())
        return sgtext::runner::cmd_run(config_path, mode_opt, seed_opt, out_opt);
    if (extract->parsed())
        return sgtext::runner::cmd_extract(corpus_path, vocab_path, extractor, std::cout);
    if (datagen->parsed())
        return sgtext::runner::cmd_datagen(spec_path, out_path, std::cout);
    if (eval->parsed())
        return sgtext::runner::cmd_eval(pred_path, gt_path, task, setup, ks, std::cout);
    return 2;
}
