#include "sgtext/runner.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sgtext/textgraph.hpp"

namespace sgtext::runner {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::base: return "BASE";
        case Mode::txm: return "TXM";
        case Mode::gt: return "GT";
        case Mode::full: return "FULL";
    }
    throw std::logic_error("unhandled mode");
}

Mode parse_mode(std::string name) {
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return char(std::toupper(c)); });
    if (name == "BASE") return Mode::base;
    if (name == "TXM") return Mode::txm;
    if (name == "GT") return Mode::gt;
    if (name == "FULL") return Mode::full;
    throw std::invalid_argument("unknown mode: " + name + " (expected BASE, TXM, GT or FULL)");
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys,
                    const std::string& section) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* k : keys)
            if (key == k) known = true;
        if (!known) throw std::invalid_argument("unknown " + section + " key: " + key);
    }
}

void parse_adam(const json& j, AdamConfig& adam) {
    if (j.contains("lr")) adam.lr = j.at("lr").get<Real>();
    if (j.contains("beta1")) adam.beta1 = j.at("beta1").get<Real>();
    if (j.contains("beta2")) adam.beta2 = j.at("beta2").get<Real>();
    if (j.contains("eps")) adam.eps = j.at("eps").get<Real>();
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << content;
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<int> parse_ks(const std::string& csv) {
    std::vector<int> ks;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const int k = std::stoi(item);
        if (k < 1) throw std::invalid_argument("K must be positive: " + item);
        ks.push_back(k);
    }
    if (ks.empty()) throw std::invalid_argument("no K values in: " + csv);
    return ks;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    reject_unknown(j,
                   {"mode", "seed", "out", "world", "split", "model", "lambda", "train", "ground",
                    "finetune", "eval", "extractor"},
                   "config");
    ExperimentConfig cfg;
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    if (j.contains("mode")) cfg.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
    if (j.contains("extractor")) cfg.extractor = j.at("extractor").get<std::string>();

    const json world_json = j.value("world", json::object());
    cfg.world = worldgen::world_spec_from_json(world_json);
    if (!world_json.contains("seed")) cfg.world.seed = Rng::mix(cfg.seed, 1);

    const json split_json = j.value("split", json::object());
    cfg.split = worldgen::split_spec_from_json(split_json);
    if (!split_json.contains("seed")) cfg.split.seed = Rng::mix(cfg.seed, 2);

    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown(m, {"layers", "heads", "d", "ff", "slope", "object_dropout"}, "model");
        if (m.contains("layers")) cfg.model.layers = m.at("layers").get<int>();
        if (m.contains("heads")) cfg.model.heads = m.at("heads").get<int>();
        if (m.contains("d")) cfg.model.d = m.at("d").get<int>();
        if (m.contains("ff")) cfg.model.ff = m.at("ff").get<int>();
        if (m.contains("slope")) cfg.model.slope = m.at("slope").get<Real>();
        if (m.contains("object_dropout"))
            cfg.model.object_dropout = m.at("object_dropout").get<Real>();
    }
    if (j.contains("lambda")) {
        const json& l = j.at("lambda");
        reject_unknown(l, {"hidden", "dropout", "slope"}, "lambda");
        if (l.contains("hidden")) cfg.lambda.hidden = l.at("hidden").get<int>();
        if (l.contains("dropout")) cfg.lambda.dropout = l.at("dropout").get<Real>();
        if (l.contains("slope")) cfg.lambda.slope = l.at("slope").get<Real>();
    }
    cfg.lambda.d = cfg.model.d;

    cfg.train.seed = Rng::mix(cfg.seed, 3);
    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown(t,
                       {"epochs", "batch_scenes", "background_ratio", "seed", "lr", "beta1",
                        "beta2", "eps"},
                       "train");
        if (t.contains("epochs")) cfg.train.epochs = t.at("epochs").get<int>();
        if (t.contains("batch_scenes")) cfg.train.batch_scenes = t.at("batch_scenes").get<int>();
        if (t.contains("background_ratio"))
            cfg.train.background_ratio = t.at("background_ratio").get<int>();
        if (t.contains("seed")) cfg.train.seed = t.at("seed").get<uint64_t>();
        parse_adam(t, cfg.train.adam);
    }

    cfg.ground.seed = Rng::mix(cfg.seed, 4);
    if (j.contains("ground")) {
        const json& g = j.at("ground");
        reject_unknown(g, {"epochs", "batch_rows", "seed", "lr", "beta1", "beta2", "eps"},
                       "ground");
        if (g.contains("epochs")) cfg.ground.epochs = g.at("epochs").get<int>();
        if (g.contains("batch_rows")) cfg.ground.batch_rows = g.at("batch_rows").get<int>();
        if (g.contains("seed")) cfg.ground.seed = g.at("seed").get<uint64_t>();
        parse_adam(g, cfg.ground.adam);
    }

    cfg.finetune.seed = Rng::mix(cfg.seed, 5);
    if (j.contains("finetune")) {
        const json& f = j.at("finetune");
        reject_unknown(f,
                       {"epochs", "batch_graphs", "mask_rate", "exact_count", "masked_loss_only",
                        "seed", "lr", "beta1", "beta2", "eps"},
                       "finetune");
        if (f.contains("epochs")) cfg.finetune.epochs = f.at("epochs").get<int>();
        if (f.contains("batch_graphs")) cfg.finetune.batch_graphs = f.at("batch_graphs").get<int>();
        if (f.contains("mask_rate")) cfg.finetune.mask.mask_rate = f.at("mask_rate").get<Real>();
        if (f.contains("exact_count")) cfg.finetune.mask.exact_count = f.at("exact_count").get<bool>();
        if (f.contains("masked_loss_only"))
            cfg.finetune.masked_loss_only = f.at("masked_loss_only").get<bool>();
        if (f.contains("seed")) cfg.finetune.seed = f.at("seed").get<uint64_t>();
        parse_adam(f, cfg.finetune.adam);
    }

    if (j.contains("eval")) {
        const json& e = j.at("eval");
        reject_unknown(e, {"ks"}, "eval");
        if (e.contains("ks")) cfg.eval_ks = e.at("ks").get<std::vector<int>>();
    }
    for (int k : cfg.eval_ks)
        if (k < 1) throw std::invalid_argument("eval K must be positive");
    if (cfg.eval_ks.empty()) throw std::invalid_argument("eval ks must not be empty");

    if (cfg.model.d != cfg.world.feature_dim)
        throw std::invalid_argument(
            "model.d must equal world.feature_dim (object features feed the transformer): " +
            std::to_string(cfg.model.d) + " vs " + std::to_string(cfg.world.feature_dim));
    if (cfg.model.heads < 1 || cfg.model.d % cfg.model.heads != 0)
        throw std::invalid_argument("model.d must be divisible by model.heads");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    json j;
    f >> j;
    return config_from_json(j);
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["mode"] = mode_name(cfg.mode);
    j["seed"] = cfg.seed;
    j["out"] = cfg.out_dir;
    j["extractor"] = cfg.extractor;
    j["world"] = worldgen::world_spec_to_json(cfg.world);
    j["split"] = {{"parallel_fraction", cfg.split.parallel_fraction},
                  {"test_fraction", cfg.split.test_fraction},
                  {"seed", cfg.split.seed}};
    j["model"] = {{"layers", cfg.model.layers}, {"heads", cfg.model.heads},
                  {"d", cfg.model.d},           {"ff", cfg.model.ff},
                  {"slope", cfg.model.slope},   {"object_dropout", cfg.model.object_dropout}};
    j["lambda"] = {{"hidden", cfg.lambda.hidden},
                   {"dropout", cfg.lambda.dropout},
                   {"slope", cfg.lambda.slope}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_scenes", cfg.train.batch_scenes},
                  {"background_ratio", cfg.train.background_ratio},
                  {"seed", cfg.train.seed},
                  {"lr", cfg.train.adam.lr},
                  {"beta1", cfg.train.adam.beta1},
                  {"beta2", cfg.train.adam.beta2},
                  {"eps", cfg.train.adam.eps}};
    j["ground"] = {{"epochs", cfg.ground.epochs},
                   {"batch_rows", cfg.ground.batch_rows},
                   {"seed", cfg.ground.seed},
                   {"lr", cfg.ground.adam.lr},
                   {"beta1", cfg.ground.adam.beta1},
                   {"beta2", cfg.ground.adam.beta2},
                   {"eps", cfg.ground.adam.eps}};
    j["finetune"] = {{"epochs", cfg.finetune.epochs},
                     {"batch_graphs", cfg.finetune.batch_graphs},
                     {"mask_rate", cfg.finetune.mask.mask_rate},
                     {"exact_count", cfg.finetune.mask.exact_count},
                     {"masked_loss_only", cfg.finetune.masked_loss_only},
                     {"seed", cfg.finetune.seed},
                     {"lr", cfg.finetune.adam.lr},
                     {"beta1", cfg.finetune.adam.beta1},
                     {"beta2", cfg.finetune.adam.beta2},
                     {"eps", cfg.finetune.adam.eps}};
    j["eval"] = {{"ks", cfg.eval_ks}};
    return j;
}

namespace {

struct StageEval {
    StageMetrics metrics;
    std::vector<Tensor> obj_probs;
    std::vector<evalx::RankedPrediction> sg_con, sg_unc, pc_con, pc_unc;
};

StageEval evaluate_stage(ParamStore& store, const std::vector<const core::SceneGraph*>& test,
                         const features::FeatureGenConfig& fg, const features::LambdaConfig& lc,
                         const reasoner::ReasonerConfig& rc, const std::vector<int>& ks,
                         const core::ClassVocab& vocab) {
    (void)vocab;
    StageEval ev;
    for (const auto* g : test) {
        const auto dist = reasoner::infer_scene(store, *g, fg, lc, rc);
        const auto topo = core::build_srg_topology(int(g->objects.size()));
        std::vector<int> gt_classes;
        for (const auto& obj : g->objects) gt_classes.push_back(obj.cls);
        ev.obj_probs.push_back(dist.obj_probs);
        ev.sg_con.push_back(evalx::rank_triples(dist.obj_probs, dist.slot_probs, topo,
                                                evalx::Task::SGCls,
                                                evalx::Setup::Constrained));
        ev.sg_unc.push_back(evalx::rank_triples(dist.obj_probs, dist.slot_probs, topo,
                                                evalx::Task::SGCls,
                                                evalx::Setup::Unconstrained));
        ev.pc_con.push_back(evalx::rank_triples(dist.obj_probs, dist.slot_probs, topo,
                                                evalx::Task::PredCls, evalx::Setup::Constrained,
                                                gt_classes));
        ev.pc_unc.push_back(evalx::rank_triples(dist.obj_probs, dist.slot_probs, topo,
                                                evalx::Task::PredCls, evalx::Setup::Unconstrained,
                                                gt_classes));
    }

    const auto add = [&](evalx::Task task, evalx::Setup setup,
                         const std::vector<evalx::RankedPrediction>& preds, int K, bool mean) {
        const auto r = mean ? evalx::dataset_mean_recall(preds, test, task, K)
                            : evalx::dataset_recall(preds, test, task, K);
        evalx::MetricsEntry entry;
        entry.task = evalx::task_name(task) + (mean ? "-mR" : "");
        entry.setup = evalx::setup_name(setup);
        entry.K = K;
        entry.value = r.value;
        entry.n_scenes = r.n_scenes;
        ev.metrics.entries.push_back(entry);
        const std::string key = evalx::task_name(task) + "/" + entry.setup + "/" +
                                (mean ? "mR@" : "R@") + std::to_string(K);
        ev.metrics.by_key[key] = r.value;
    };
    const auto task_block = [&](evalx::Task task, const std::vector<evalx::RankedPrediction>& con,
                                const std::vector<evalx::RankedPrediction>& unc) {
        for (int K : ks) add(task, evalx::Setup::Constrained, con, K, false);
        for (int K : ks) add(task, evalx::Setup::Unconstrained, unc, K, false);
        for (int K : ks) add(task, evalx::Setup::Constrained, con, K, true);
        for (int K : ks) add(task, evalx::Setup::Unconstrained, unc, K, true);
    };
    task_block(evalx::Task::SGCls, ev.sg_con, ev.sg_unc);
    task_block(evalx::Task::PredCls, ev.pc_con, ev.pc_unc);

    evalx::MetricsEntry obj;
    obj.task = "ObjCls";
    obj.setup = "-";
    obj.K = 1;
    obj.value = test.empty() ? Real(0) : evalx::objcls_top1(ev.obj_probs, test);
    obj.n_scenes = int(test.size());
    ev.metrics.entries.push_back(obj);
    ev.metrics.by_key["ObjCls/top1"] = obj.value;
    return ev;
}

std::string summary_table(Mode mode, const StageMetrics& base, const StageMetrics& fin) {
    std::ostringstream os;
    os << "mode: " << mode_name(mode) << "\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-34s %12s %12s %11s\n", "metric", "supervised", "final",
                  "delta");
    os << line;
    for (const auto& [key, value] : fin.by_key) {
        const auto it = base.by_key.find(key);
        const Real b = it == base.by_key.end() ? Real(0) : it->second;
        std::snprintf(line, sizeof line, "%-34s %12.6f %12.6f %+11.6f\n", key.c_str(), double(b),
                      double(value), double(value - b));
        os << line;
    }
    return os.str();
}

std::vector<std::pair<std::string, evalx::RankedPrediction>> with_ids(
    const std::vector<const core::SceneGraph*>& test,
    const std::vector<evalx::RankedPrediction>& preds) {
    std::vector<std::pair<std::string, evalx::RankedPrediction>> out;
    for (size_t i = 0; i < test.size(); ++i) out.emplace_back(test[i]->id, preds[i]);
    return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
    if (cfg.model.d != cfg.world.feature_dim)
        throw std::invalid_argument("model.d must equal world.feature_dim");
    if (cfg.lambda.d != cfg.model.d)
        throw std::invalid_argument("lambda.d must equal model.d");
    if (cfg.eval_ks.empty()) throw std::invalid_argument("eval ks must not be empty");
    {
        const auto problems = worldgen::validate_world_spec(cfg.world);
        if (!problems.empty()) throw std::invalid_argument("world spec: " + problems.front());
    }

    const std::string out = cfg.out_dir;
    fs::create_directories(out);

    const json cfg_json = config_to_json(cfg);
    write_text(out + "/config.json", cfg_json.dump(2) + "\n");
    json hash_src = cfg_json;
    hash_src.erase("out");
    const uint64_t config_hash = fnv1a64(hash_src.dump());

    const auto& vocab = cfg.world.vocab;
    const auto world = worldgen::generate_world(cfg.world);

    worldgen::SplitSpec split = cfg.split;
    if (cfg.mode == Mode::full) {
        // Everything that is not test becomes parallel; no text split remains.
        const int n = cfg.world.n_scenes;
        const int n_test = int(std::llround(double(split.test_fraction) * n));
        split.parallel_fraction = Real(double(n - n_test) / double(n));
    }
    const auto outcome = worldgen::make_splits(world, cfg.world, split);
    core::save_dataset_jsonl(outcome.dataset, out + "/dataset.jsonl");
    core::save_vocab_json(vocab, out + "/vocab.json");

    const auto fg = worldgen::feature_gen(cfg.world);
    ParamStore store;
    features::init_lambda(store, cfg.lambda, Rng::mix(cfg.seed, 0x6c616dull));
    reasoner::init_reasoner(store, cfg.model, Rng::mix(cfg.seed, 0x677472ull));
    reasoner::init_heads(store, cfg.model.d, vocab.n_objects(), vocab.n_predicates() + 1,
                         Rng::mix(cfg.seed, 0x686473ull));

    const auto parallel = outcome.dataset.split("parallel");
    const auto history = reasoner::train_supervised(store, parallel, fg, cfg.lambda, cfg.model,
                                                    cfg.train);
    reasoner::save_loss_csv(history, out + "/supervised_loss.csv");

    grounding::train_canonical(store, parallel, fg, cfg.lambda, vocab, cfg.ground);
    grounding::export_embeddings_csv(store, vocab, out + "/embeddings.csv");
    store.save(out + "/params_supervised");

    const auto test = outcome.dataset.split("test");
    const StageEval base_eval =
        evaluate_stage(store, test, fg, cfg.lambda, cfg.model, cfg.eval_ks, vocab);

    bool tuned = false;
    if (cfg.mode == Mode::txm || cfg.mode == Mode::gt) {
        std::vector<textgraph::SymbolicGraph> sentences;
        if (cfg.mode == Mode::txm) {
            const auto extractor = textgraph::make_extractor(cfg.extractor);
            for (const auto* g : outcome.dataset.split("text"))
                sentences.push_back(extractor->extract(g->text, vocab));
        } else {
            for (const auto& g : outcome.text_full)
                sentences.push_back(textgraph::class_level_facts(g, vocab));
        }
        const auto report =
            textdae::finetune_from_triples(store, sentences, vocab, cfg.model, cfg.finetune);
        textdae::save_finetune_csv(report, out + "/finetune_loss.csv");
        tuned = true;
    }
    store.save(out + "/params_final");

    const StageEval final_eval =
        tuned ? evaluate_stage(store, test, fg, cfg.lambda, cfg.model, cfg.eval_ks, vocab)
              : base_eval;

    evalx::save_class_report_csv(
        evalx::predicate_class_report(final_eval.pc_con, test, evalx::Task::PredCls,
                                      cfg.eval_ks.front(), vocab),
        out + "/per_class_predicates.csv");
    evalx::save_class_report_csv(evalx::object_class_report(final_eval.obj_probs, test, vocab),
                                 out + "/per_class_objects.csv");
    evalx::save_predictions_jsonl(with_ids(test, final_eval.sg_unc),
                                  out + "/predictions_sgcls.jsonl");
    evalx::save_predictions_jsonl(with_ids(test, final_eval.pc_unc),
                                  out + "/predictions_predcls.jsonl");

    const std::string metrics_bytes = evalx::metrics_json_string(final_eval.metrics.entries);
    write_text(out + "/metrics.json", metrics_bytes);
    if (tuned)
        evalx::save_metrics_json(base_eval.metrics.entries, out + "/metrics_supervised.json");

    ordered_json summary;
    summary["mode"] = mode_name(cfg.mode);
    ordered_json stage_base, stage_final, delta;
    for (const auto& [key, value] : base_eval.metrics.by_key) stage_base[key] = value;
    for (const auto& [key, value] : final_eval.metrics.by_key) {
        stage_final[key] = value;
        const auto it = base_eval.metrics.by_key.find(key);
        delta[key] = value - (it == base_eval.metrics.by_key.end() ? Real(0) : it->second);
    }
    summary["supervised"] = stage_base;
    summary["final"] = stage_final;
    summary["delta"] = delta;
    write_text(out + "/summary.json", summary.dump(2) + "\n");
    write_text(out + "/summary.txt",
               summary_table(cfg.mode, base_eval.metrics, final_eval.metrics));

    char hash_hex[24];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx", (unsigned long long)config_hash);
    ordered_json manifest;
    manifest["version"] = kVersion;
    manifest["mode"] = mode_name(cfg.mode);
    manifest["config_hash"] = hash_hex;
    manifest["seed"] = cfg.seed;
    manifest["world_seed"] = cfg.world.seed;
    manifest["split_seed"] = cfg.split.seed;
    manifest["train_seed"] = cfg.train.seed;
    manifest["ground_seed"] = cfg.ground.seed;
    manifest["finetune_seed"] = cfg.finetune.seed;
    manifest["n_scenes"] = cfg.world.n_scenes;
    manifest["vocab_objects"] = vocab.n_objects();
    manifest["vocab_predicates"] = vocab.n_predicates();
    manifest["eval_ks"] = cfg.eval_ks;
    write_text(out + "/manifest.json", manifest.dump(2) + "\n");

    RunResult result;
    result.out_dir = out;
    result.base_stage = base_eval.metrics;
    result.final_stage = final_eval.metrics;
    result.metrics_json = metrics_bytes;
    return result;
}

int cmd_run(const std::string& config_path, const std::optional<std::string>& mode,
            const std::optional<uint64_t>& seed, const std::optional<std::string>& out) {
    try {
        std::ifstream f(config_path);
        if (!f) throw std::runtime_error("cannot open config: " + config_path);
        json j;
        f >> j;
        if (mode) j["mode"] = *mode;
        if (seed) j["seed"] = *seed;
        if (out) j["out"] = *out;
        const ExperimentConfig cfg = config_from_json(j);
        try {
            const RunResult result = run_experiment(cfg);
            std::cout << "run complete: " << result.out_dir << "\n";
            return 0;
        } catch (const std::exception& e) {
            std::cerr << "run failed: " << e.what() << "\n";
            return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    }
}

int cmd_extract(const std::string& corpus_path, const std::string& vocab_path,
                const std::string& extractor, std::ostream& out) {
    try {
        const auto vocab = core::load_vocab_json(vocab_path);
        const auto lines = textgraph::load_corpus_jsonl(corpus_path);
        const auto ex = textgraph::make_extractor(extractor);
        int with_reference = 0, malformed = 0;
        double sum_p = 0, sum_r = 0, sum_f = 0;
        for (const auto& line : lines) {
            const auto predicted = ex->extract(line.text, vocab);
            ordered_json row;
            row["graph"] = textgraph::to_string(textgraph::serialize(predicted));
            if (line.graph) {
                try {
                    const auto reference = textgraph::parse(textgraph::from_string(*line.graph));
                    const auto prf = textgraph::extraction_prf(predicted, reference);
                    row["precision"] = prf.precision;
                    row["recall"] = prf.recall;
                    row["f1"] = prf.f1;
                    ++with_reference;
                    sum_p += prf.precision;
                    sum_r += prf.recall;
                    sum_f += prf.f1;
                } catch (const textgraph::ParseError& e) {
                    row["error"] = e.what();
                    ++malformed;
                }
            }
            out << row.dump() << "\n";
        }
        ordered_json summary;
        summary["lines"] = int(lines.size());
        summary["with_reference"] = with_reference;
        summary["malformed"] = malformed;
        if (with_reference > 0) {
            summary["precision"] = sum_p / with_reference;
            summary["recall"] = sum_r / with_reference;
            summary["f1"] = sum_f / with_reference;
        }
        out << summary.dump() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "extract failed: " << e.what() << "\n";
        return 1;
    }
}

int cmd_datagen(const std::string& spec_path, const std::string& out_path, std::ostream& out) {
    worldgen::WorldSpec spec;
    try {
        std::ifstream f(spec_path);
        if (!f) throw std::runtime_error("cannot open spec: " + spec_path);
        json j;
        f >> j;
        spec = worldgen::world_spec_from_json(j);
    } catch (const std::exception& e) {
        std::cerr << "invalid spec: " << e.what() << "\n";
        return 2;
    }
    try {
        const auto world = worldgen::generate_world(spec);
        core::save_dataset_jsonl(world, out_path);
        fs::path vocab_path(out_path);
        vocab_path.replace_extension(".vocab.json");
        core::save_vocab_json(spec.vocab, vocab_path.string());
        out << "wrote " << world.scenes.size() << " scenes to " << out_path << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "datagen failed: " << e.what() << "\n";
        return 1;
    }
}

namespace {

evalx::RankedPrediction constrain(const evalx::RankedPrediction& rp) {
    evalx::RankedPrediction out;
    std::set<std::pair<int, int>> seen;
    for (const auto& c : rp.candidates)
        if (seen.insert({c.head, c.tail}).second) out.candidates.push_back(c);
    return out;
}

}  // namespace

int cmd_eval(const std::string& pred_path, const std::string& gt_path, const std::string& task_s,
             const std::string& setup_s, const std::string& ks_csv, std::ostream& out) {
    evalx::Task task;
    evalx::Setup setup;
    std::vector<int> ks;
    try {
        task = evalx::parse_task(task_s);
        if (task == evalx::Task::ObjCls)
            throw std::invalid_argument("eval scores triple predictions; use SGCls or PredCls");
        setup = evalx::parse_setup(setup_s);
        ks = parse_ks(ks_csv);
    } catch (const std::exception& e) {
        std::cerr << "invalid arguments: " << e.what() << "\n";
        return 2;
    }
    try {
        const auto preds = evalx::load_predictions_jsonl(pred_path);
        const auto data = core::load_dataset_jsonl(gt_path);
        std::map<std::string, const core::SceneGraph*> by_id;
        for (const auto& g : data.scenes) by_id[g.id] = &g;

        std::vector<evalx::RankedPrediction> ranked;
        std::vector<const core::SceneGraph*> gts;
        for (const auto& [id, rp] : preds) {
            const auto it = by_id.find(id);
            if (it == by_id.end())
                throw std::runtime_error("prediction for unknown scene: " + id);
            ranked.push_back(setup == evalx::Setup::Constrained ? constrain(rp) : rp);
            gts.push_back(it->second);
        }

        std::vector<evalx::MetricsEntry> entries;
        for (int K : ks) {
            const auto r = evalx::dataset_recall(ranked, gts, task, K);
            entries.push_back({evalx::task_name(task), evalx::setup_name(setup), K, r.value,
                               r.n_scenes});
        }
        for (int K : ks) {
            const auto r = evalx::dataset_mean_recall(ranked, gts, task, K);
            entries.push_back({evalx::task_name(task) + "-mR", evalx::setup_name(setup), K,
                               r.value, r.n_scenes});
        }
        out << evalx::metrics_json_string(entries);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "eval failed: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace sgtext::runner
