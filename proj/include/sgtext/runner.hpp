#pragma once

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgtext/evalx.hpp"
#include "sgtext/grounding.hpp"
#include "sgtext/reasoner.hpp"
#include "sgtext/textdae.hpp"
#include "sgtext/worldgen.hpp"

namespace sgtext::runner {

inline const std::string kVersion = "0.1.0";

// BASE: parallel-only supervised training. TXM: plus fine-tuning on graphs
// extracted from the text split. GT: plus fine-tuning on the text split's
// ground-truth graphs. FULL: every non-test scene is parallel, no fine-tune.
enum class Mode { base, txm, gt, full };

std::string mode_name(Mode m);
Mode parse_mode(std::string name);  // case-insensitive; throws invalid_argument

struct ExperimentConfig {
    Mode mode = Mode::base;
    uint64_t seed = 0;
    std::string out_dir = "run-out";
    worldgen::WorldSpec world;
    worldgen::SplitSpec split;
    features::LambdaConfig lambda;  // lambda.d is tied to model.d
    reasoner::ReasonerConfig model;
    reasoner::TrainConfig train;
    grounding::GroundConfig ground;
    textdae::FinetuneConfig finetune;
    std::vector<int> eval_ks = {50, 100};
    std::string extractor = "rules";
};

// Strict parser: unknown keys throw. Section seeds not given explicitly are
// derived from the top-level seed, so one --seed reseeds the whole run.
// model.d must match world.feature_dim (object features feed the transformer
// directly).
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Keys: "<task>/<setup>/R@K", ".../mR@K", and "ObjCls/top1".
struct StageMetrics {
    std::vector<evalx::MetricsEntry> entries;
    std::map<std::string, Real> by_key;
};

struct RunResult {
    std::string out_dir;
    StageMetrics base_stage;   // after parallel-only training and grounding
    StageMetrics final_stage;  // after mode fine-tuning; == base_stage for BASE/FULL
    std::string metrics_json;  // bytes written to metrics.json
};

// world -> splits -> supervised training -> canonical embeddings -> mode
// fine-tune -> evaluation. Writes dataset, vocab, checkpoints, loss CSVs,
// metrics JSON, per-class CSVs, predictions, summary and manifest under
// cfg.out_dir. Deterministic: identical configs give byte-identical metrics.
RunResult run_experiment(const ExperimentConfig& cfg);

// Exit codes: 0 success, 2 invalid config or arguments, 1 runtime failure.
int cmd_run(const std::string& config_path, const std::optional<std::string>& mode,
            const std::optional<uint64_t>& seed, const std::optional<std::string>& out);

// One JSON line per corpus entry (serialized prediction, plus P/R/F1 when the
// line carries a reference), then a summary line with the means. Malformed
// references are recorded and skipped.
int cmd_extract(const std::string& corpus_path, const std::string& vocab_path,
                const std::string& extractor, std::ostream& out = std::cout);

// Writes the generated dataset to out_path and the vocab next to it
// (extension replaced by .vocab.json).
int cmd_datagen(const std::string& spec_path, const std::string& out_path,
                std::ostream& out = std::cout);

// Scores stored predictions against a dataset file. Predictions hold full
// unconstrained candidate lists; the constrained setup keeps each pair's
// top-scoring candidate. Emits R@K and mR@K rows as metrics JSON.
int cmd_eval(const std::string& pred_path, const std::string& gt_path, const std::string& task,
             const std::string& setup, const std::string& ks_csv, std::ostream& out = std::cout);

}  // namespace sgtext::runner
