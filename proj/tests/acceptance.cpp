// Release gate: one self-contained scenario per shipping criterion. Each
// prints a single [PASS]/[FAIL] line; the exit status is the failure count.
// Everything here checks against independent oracles (finite differences,
// brute-force enumeration, hand-computed scores), not against the library's
// own code paths.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgtext/evalx.hpp"
#include "sgtext/features.hpp"
#include "sgtext/grounding.hpp"
#include "sgtext/reasoner.hpp"
#include "sgtext/runner.hpp"
#include "sgtext/tensor.hpp"
#include "sgtext/textdae.hpp"
#include "sgtext/textgraph.hpp"
#include "sgtext/worldgen.hpp"

using namespace sgtext;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(bool ok, const std::string& line) {
    std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", line.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch_dir() {
    const fs::path p = fs::temp_directory_path() / "sgtext-acceptance";
    std::error_code ec;
    fs::remove_all(p, ec);
    fs::create_directories(p);
    return p;
}

// ---------------------------------------------------------------- criterion 1

core::BoundingBox random_box(Rng& rng) {
    core::BoundingBox b;
    b.x = rng.uniform(0.0, 0.7);
    b.y = rng.uniform(0.0, 0.7);
    b.w = rng.uniform(0.05, 0.3);
    b.h = rng.uniform(0.05, 0.3);
    return b;
}

core::SceneGraph endpoint_rule_scene(int n, int n_classes, uint64_t seed) {
    Rng rng(seed);
    core::SceneGraph g;
    g.id = "acc";
    g.split = "parallel";
    for (int i = 0; i < n; ++i) {
        core::SceneObject o;
        o.cls = static_cast<int>(rng.below(static_cast<uint64_t>(n_classes)));
        o.box = random_box(rng);
        g.objects.push_back(o);
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const int ci = g.objects[static_cast<size_t>(i)].cls;
            const int cj = g.objects[static_cast<size_t>(j)].cls;
            if (ci == 0 && cj == 1) g.triples.push_back({i, 0, j});
            if (ci == 1 && cj == 0) g.triples.push_back({i, 1, j});
        }
    return g;
}

void gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    const int d = 8, layers = 2, heads = 2, ff = 16, hidden = 8;
    const int n_obj_classes = 3, n_pred = 2;
    Real worst = 0;
    std::string worst_param;
    int total_checked = 0;

    for (uint64_t seed = 1; seed <= 20; ++seed) {
        ParamStore store;
        features::LambdaConfig lc;
        lc.d = d;
        lc.hidden = hidden;
        reasoner::ReasonerConfig rc;
        rc.d = d;
        rc.layers = layers;
        rc.heads = heads;
        rc.ff = ff;
        const auto fg = features::make_feature_gen(n_obj_classes, d, 0.05, Rng::mix(seed, 11));
        features::init_lambda(store, lc, Rng::mix(seed, 1));
        reasoner::init_reasoner(store, rc, Rng::mix(seed, 2));
        reasoner::init_heads(store, d, n_obj_classes, n_pred + 1, Rng::mix(seed, 3));

        const auto g = endpoint_rule_scene(3, n_obj_classes, Rng::mix(seed, 9));
        const auto topo = core::build_srg_topology(3);
        const auto labels = reasoner::slot_labels(g, topo, n_pred);
        std::vector<int> obj_targets;
        for (const auto& o : g.objects) obj_targets.push_back(o.cls);

        auto eval = [&](bool accumulate) {
            Tape tape;
            TapeParams params(tape, store);
            Rng rng(0);
            const int x_o = tape.constant(features::synth_object_features(g, fg));
            const int t = tape.constant(features::spatial_matrix(g.objects, topo));
            const int x_p = features::predicate_init(tape, params, t, lc, false, rng);
            const auto z = reasoner::forward(tape, params, topo, x_o, x_p, rc, false, rng);
            const auto c = reasoner::classify(tape, params, z);
            const int l_o = tape.cross_entropy(c.c_o, obj_targets);
            const int l_p = tape.cross_entropy(c.c_p, labels);
            const int loss = tape.add(l_o, l_p);
            if (accumulate) {
                tape.backward(loss);
                params.accumulate_grads();
            }
            return tape.scalar(loss);
        };

        const auto rep = grad_check(store, eval, 1e-5);
        total_checked += rep.checked;
        if (rep.max_rel_error > worst) {
            worst = rep.max_rel_error;
            worst_param = rep.worst_param;
        }
    }

    const double secs = seconds_since(t0);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "gradient check, full loss, 20 seeds: max rel err %.2e (worst %s, %d params, %.1fs)",
                  worst, worst_param.c_str(), total_checked, secs);
    report(worst < 1e-4 && secs < 30.0, buf);
}

// ---------------------------------------------------------------- criterion 2

void serialization_round_trip() {
    const std::vector<std::string> entities = {
        "man", "child", "dog", "ski slope", "snow covered hill",
        "tall tree", "red car"};
    const std::vector<std::string> predicates = {
        "on", "standing with", "next to", "wearing", "holding"};

    Rng rng(20240);
    int round_trips = 0;
    for (int i = 0; i < 1000; ++i) {
        textgraph::SymbolicGraph g;
        const int n_facts = static_cast<int>(rng.below(7));
        for (int f = 0; f < n_facts; ++f)
            g.facts.insert({entities[rng.below(entities.size())],
                            predicates[rng.below(predicates.size())],
                            entities[rng.below(entities.size())]});
        if (textgraph::parse(textgraph::serialize(g)) == g) ++round_trips;
    }

    // Malformed inputs must fail with the offending token position.
    struct Bad {
        std::vector<std::string> tokens;
        int position;
    };
    const std::vector<Bad> bad = {
        {{"cat", "SEP", "near", "SEP"}, 4},            // truncated before the tail
        {{"a", "SEP", "SEP", "c", "EOF"}, 2},          // separator where a field belongs
        {{"a", "SEP", "b", "EOF"}, 3},                 // terminator instead of a separator
        {{"", "SEP", "b", "SEP", "c", "EOF"}, 0},      // empty field
    };
    int rejected = 0;
    for (const auto& b : bad) {
        try {
            textgraph::parse(textgraph::FactSequence{b.tokens});
        } catch (const textgraph::ParseError& e) {
            if (e.position == b.position) ++rejected;
        }
    }

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "serialization round trip: %d/1000 graphs, %d/%zu malformed rejected at position",
                  round_trips, rejected, bad.size());
    report(round_trips == 1000 && rejected == static_cast<int>(bad.size()), buf);
}

// ---------------------------------------------------------------- criterion 3

void extraction_metric_fidelity() {
    using textgraph::SymbolicGraph;
    // "man standing with child on ski slope": reference facts plus the full
    // scene graph of the image the caption describes.
    SymbolicGraph truth;
    truth.facts = {{"child", "on", "ski slope"},
                   {"man", "on", "ski slope"},
                   {"man", "standing with", "child"}};
    SymbolicGraph pred_a;  // two correct facts
    pred_a.facts = {{"man", "standing with", "child"}, {"child", "on", "ski slope"}};
    SymbolicGraph pred_b;  // one correct, one with a mangled tail
    pred_b.facts = {{"man", "standing with", "child"}, {"child", "on", "slope"}};

    const auto a = textgraph::extraction_prf(pred_a, truth);
    const auto b = textgraph::extraction_prf(pred_b, truth);

    const bool ok = std::fabs(a.precision - 1.0) < 1e-9 &&
                    std::fabs(a.recall - 2.0 / 3.0) < 1e-9 &&
                    std::fabs(a.f1 - 0.8) < 1e-9 &&
                    std::fabs(b.precision - 0.5) < 1e-9 &&
                    std::fabs(b.recall - 1.0 / 3.0) < 1e-9 &&
                    std::fabs(b.f1 - 0.4) < 1e-9;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "extraction P/R/F1 vs set-intersection oracle: "
                  "(%.6f, %.6f, %.6f) and (%.6f, %.6f, %.6f)",
                  a.precision, a.recall, a.f1, b.precision, b.recall, b.f1);
    report(ok, buf);
}

// ---------------------------------------------------------------- criterion 4

void masking_statistics() {
    const int d = 8;
    std::vector<grounding::EmbeddedGraph> batch(200);
    for (auto& g : batch) {
        g.x_o = Tensor(10, d);
        g.x_p = Tensor(40, d);
        for (int r = 0; r < g.x_o.rows; ++r)
            for (int j = 0; j < d; ++j) g.x_o.at(r, j) = 1.0;
        for (int r = 0; r < g.x_p.rows; ++r)
            for (int j = 0; j < d; ++j) g.x_p.at(r, j) = 0.5;
    }

    textdae::MaskConfig mc;
    mc.mask_rate = Real(0.2);
    mc.seed = 77;
    const auto masked = textdae::mask_graph(batch, mc);
    const double fraction =
        static_cast<double>(masked.masked_elements) / masked.total_elements;

    textdae::MaskConfig zero;
    zero.mask_rate = 0;
    zero.seed = 77;
    const auto untouched = textdae::mask_graph(batch, zero);
    bool noop = untouched.masked_elements == 0;
    for (size_t i = 0; i < batch.size() && noop; ++i)
        noop = untouched.x_o[i].bitwise_equal(batch[i].x_o) &&
               untouched.x_p[i].bitwise_equal(batch[i].x_p);

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "masking statistics: fraction %.4f of %d elements at rate 0.2, rate-0 no-op %s",
                  fraction, masked.total_elements, noop ? "yes" : "no");
    report(masked.total_elements >= 10000 && fraction >= 0.19 && fraction <= 0.21 && noop, buf);
}

// ---------------------------------------------------------------- criterion 5

Real cosine_rows(const Tensor& a, int ra, const Tensor& b, int rb) {
    Real dot = 0, na = 0, nb = 0;
    for (int j = 0; j < a.cols; ++j) {
        dot += a.at(ra, j) * b.at(rb, j);
        na += a.at(ra, j) * a.at(ra, j);
        nb += b.at(rb, j) * b.at(rb, j);
    }
    return dot / std::sqrt(na * nb);
}

void cluster_center_property() {
    const auto t0 = std::chrono::steady_clock::now();
    const core::ClassVocab vocab({"alpha", "beta", "gamma"}, {"touches"});

    // Class means separated by five noise sigmas.
    auto fg = features::make_feature_gen(3, 16, 0.0, 7);
    Real min_sep = 1e30;
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b) {
            Real d2 = 0;
            for (int j = 0; j < fg.d; ++j) {
                const Real diff = fg.class_means.at(a, j) - fg.class_means.at(b, j);
                d2 += diff * diff;
            }
            min_sep = std::min(min_sep, std::sqrt(d2));
        }
    fg.noise_sigma = min_sep / Real(5);

    Rng rng(31);
    std::vector<core::SceneGraph> scenes;
    for (int i = 0; i < 60; ++i) {
        core::SceneGraph g;
        g.id = "c" + std::to_string(i);
        g.split = "parallel";
        for (int o = 0; o < 5; ++o) {
            core::SceneObject obj;
            obj.cls = static_cast<int>(rng.below(3));
            obj.box = random_box(rng);
            g.objects.push_back(obj);
        }
        g.triples.push_back({0, 0, 1});
        g.triples.push_back({2, 0, 3});
        scenes.push_back(std::move(g));
    }
    std::vector<const core::SceneGraph*> ptrs;
    for (const auto& s : scenes) ptrs.push_back(&s);

    ParamStore store;
    features::LambdaConfig lc;
    lc.d = fg.d;
    lc.hidden = 16;
    features::init_lambda(store, lc, 3);
    grounding::GroundConfig gc;
    gc.epochs = 120;
    gc.seed = 1;
    grounding::train_canonical(store, ptrs, fg, lc, vocab, gc);

    // Brute-force per-class means of the exact feature rows used in training.
    const auto rows = grounding::object_rows(ptrs, fg);
    Tensor means(3, fg.d);
    std::vector<int> counts(3, 0);
    for (int r = 0; r < rows.x.rows; ++r) {
        const int c = rows.y[static_cast<size_t>(r)];
        ++counts[static_cast<size_t>(c)];
        for (int j = 0; j < fg.d; ++j) means.at(c, j) += rows.x.at(r, j);
    }
    for (int c = 0; c < 3; ++c)
        for (int j = 0; j < fg.d; ++j) means.at(c, j) /= counts[static_cast<size_t>(c)];

    const Tensor& e = store.value("emb.eo");
    bool strict = true;
    Real tightest = 1e30;
    for (int c = 0; c < 3; ++c) {
        const Real own = cosine_rows(e, c, means, c);
        for (int other = 0; other < 3; ++other) {
            if (other == c) continue;
            tightest = std::min(tightest, own - cosine_rows(e, c, means, other));
            if (own <= cosine_rows(e, c, means, other)) strict = false;
        }
    }

    const double secs = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "canonical embeddings point at own cluster centers: min cosine margin %.4f (%.1fs)",
                  tightest, secs);
    report(strict && secs < 10.0, buf);
}

// ---------------------------------------------------------------- criterion 6

Tensor random_prob_rows(int rows, int cols, Rng& rng) {
    Tensor t(rows, cols);
    for (int i = 0; i < rows; ++i) {
        Real sum = 0;
        for (int j = 0; j < cols; ++j) {
            t.at(i, j) = rng.uniform(0.01, 1.0);
            sum += t.at(i, j);
        }
        for (int j = 0; j < cols; ++j) t.at(i, j) /= sum;
    }
    return t;
}

core::SceneGraph random_gt(int n, int n_obj_classes, int n_pred, Real triple_prob, Rng& rng) {
    core::SceneGraph g;
    g.id = "r" + std::to_string(rng.next_u64() % 100000);
    for (int i = 0; i < n; ++i) {
        core::BoundingBox b{0.1, 0.1, 0.2, 0.2};
        g.objects.push_back({static_cast<int>(rng.below(static_cast<uint64_t>(n_obj_classes))), b});
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && rng.uniform() < triple_prob)
                g.triples.push_back({i, static_cast<int>(rng.below(static_cast<uint64_t>(n_pred))), j});
    return g;
}

struct OracleCand {
    Real score;
    int slot, pred, h, t, h_cls, t_cls;
};

std::vector<OracleCand> oracle_rank(const Tensor& obj_probs, const Tensor& slot_probs,
                                    const core::SrgTopology& topo, evalx::Task task,
                                    evalx::Setup setup, const std::vector<int>& gt_classes) {
    std::vector<OracleCand> out;
    const int n_pred = slot_probs.cols - 1;
    for (int s = 0; s < static_cast<int>(topo.slot_pairs.size()); ++s) {
        const auto [h, t] = topo.slot_pairs[static_cast<size_t>(s)];
        for (int p = 0; p < n_pred; ++p) {
            OracleCand c;
            c.slot = s;
            c.pred = p;
            c.h = h;
            c.t = t;
            if (task == evalx::Task::PredCls) {
                c.h_cls = gt_classes[static_cast<size_t>(h)];
                c.t_cls = gt_classes[static_cast<size_t>(t)];
                c.score = slot_probs.at(s, p);
            } else {
                int hb = 0, tb = 0;
                for (int j = 1; j < obj_probs.cols; ++j) {
                    if (obj_probs.at(h, j) > obj_probs.at(h, hb)) hb = j;
                    if (obj_probs.at(t, j) > obj_probs.at(t, tb)) tb = j;
                }
                c.h_cls = hb;
                c.t_cls = tb;
                c.score = obj_probs.at(h, hb) * slot_probs.at(s, p) * obj_probs.at(t, tb);
            }
            out.push_back(c);
        }
    }
    if (setup == evalx::Setup::Constrained) {
        std::vector<OracleCand> kept;
        for (int s = 0; s < static_cast<int>(topo.slot_pairs.size()); ++s) {
            const OracleCand* best = nullptr;
            for (const auto& c : out)
                if (c.slot == s && (!best || slot_probs.at(s, c.pred) > slot_probs.at(s, best->pred)))
                    best = &c;
            if (best) kept.push_back(*best);
        }
        out = kept;
    }
    std::sort(out.begin(), out.end(), [](const OracleCand& a, const OracleCand& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.slot != b.slot) return a.slot < b.slot;
        return a.pred < b.pred;
    });
    return out;
}

std::vector<char> oracle_hits(const std::vector<OracleCand>& cands, const core::SceneGraph& gt,
                              evalx::Task task, int K) {
    std::vector<char> hits(gt.triples.size(), char(0));
    const size_t limit = std::min(static_cast<size_t>(K), cands.size());
    for (size_t g = 0; g < gt.triples.size(); ++g) {
        const auto& tr = gt.triples[g];
        for (size_t i = 0; i < limit; ++i) {
            const auto& c = cands[i];
            if (c.h != tr.head || c.t != tr.tail || c.pred != tr.pred) continue;
            if (task == evalx::Task::SGCls &&
                (c.h_cls != gt.objects[static_cast<size_t>(tr.head)].cls ||
                 c.t_cls != gt.objects[static_cast<size_t>(tr.tail)].cls))
                continue;
            hits[g] = 1;
            break;
        }
    }
    return hits;
}

void metric_oracle_equivalence() {
    Rng rng(101);
    int compared = 0, matched = 0;
    for (const auto task : {evalx::Task::SGCls, evalx::Task::PredCls}) {
        for (const auto setup : {evalx::Setup::Constrained, evalx::Setup::Unconstrained}) {
            std::vector<core::SceneGraph> scenes;
            std::vector<evalx::RankedPrediction> preds;
            std::vector<std::vector<OracleCand>> oracle_preds;
            std::vector<const core::SceneGraph*> ptrs;
            for (int i = 0; i < 50; ++i)
                scenes.push_back(random_gt(2 + static_cast<int>(rng.below(3)), 3, 3, 0.5, rng));
            for (const auto& s : scenes) {
                const int n = static_cast<int>(s.objects.size());
                const auto topo = core::build_srg_topology(n);
                const Tensor obj = random_prob_rows(n, 3, rng);
                const Tensor slot = random_prob_rows(topo.n_slots(), 4, rng);
                std::vector<int> cls;
                for (const auto& o : s.objects) cls.push_back(o.cls);
                ptrs.push_back(&s);
                preds.push_back(evalx::rank_triples(obj, slot, topo, task, setup, cls));
                oracle_preds.push_back(oracle_rank(obj, slot, topo, task, setup, cls));
            }

            for (int k : {1, 3, 5, 10}) {
                Real oracle_sum = 0;
                int oracle_n = 0;
                std::map<int, std::pair<Real, int>> oracle_class;
                for (size_t i = 0; i < scenes.size(); ++i) {
                    if (scenes[i].triples.empty()) continue;
                    const auto hits = oracle_hits(oracle_preds[i], scenes[i], task, k);
                    int m = 0;
                    for (char h : hits) m += h;
                    oracle_sum += static_cast<Real>(m) /
                                  static_cast<Real>(scenes[i].triples.size());
                    ++oracle_n;
                    std::map<int, std::pair<int, int>> sc;
                    for (size_t g = 0; g < scenes[i].triples.size(); ++g) {
                        auto& e = sc[scenes[i].triples[g].pred];
                        e.first += hits[g];
                        ++e.second;
                    }
                    for (const auto& [cls, e] : sc) {
                        auto& agg = oracle_class[cls];
                        agg.first += static_cast<Real>(e.first) / e.second;
                        ++agg.second;
                    }
                }
                Real mr_oracle = 0;
                for (const auto& [cls, agg] : oracle_class) mr_oracle += agg.first / agg.second;
                mr_oracle /= static_cast<Real>(oracle_class.size());

                const auto r = evalx::dataset_recall(preds, ptrs, task, k);
                const auto mr = evalx::dataset_mean_recall(preds, ptrs, task, k);
                compared += 2;
                if (r.value == oracle_sum / oracle_n && r.n_scenes == oracle_n) ++matched;
                if (mr.value == mr_oracle) ++matched;
            }
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "recall metrics vs brute-force enumeration: %d/%d exact matches", matched,
                  compared);
    report(matched == compared, buf);
}

// ---------------------------------------------------------------- criterion 7

nlohmann::json trend_config(const std::string& mode, uint64_t split_seed,
                            const std::string& out_dir) {
    const std::vector<std::string> objects = {"man",   "child", "dog",  "cat",  "cow",  "horse",
                                              "sheep", "goat",  "table", "chair", "tree", "house",
                                              "car",   "boat",  "lamp", "dress"};
    const std::vector<std::string> social = {"rides", "feeds", "chases", "pulls"};

    // Predicate depends only on the unordered class pair (facts point from the
    // lower class id to the higher), so a model that reads slot endpoints can
    // recover the full table, and text alone pins the pairs missing from the
    // tiny parallel split. One pattern exists only in text.
    nlohmann::json rules = nlohmann::json::array();
    for (size_t a = 0; a < objects.size(); ++a)
        for (size_t b = a + 1; b < objects.size(); ++b) {
            if (objects[a] == "cow" && objects[b] == "dress") {
                rules.push_back({{"head", "cow"}, {"pred", "wearing"}, {"tail", "dress"}, {"prob", 0.95}});
                continue;
            }
            rules.push_back({{"head", objects[a]},
                             {"pred", social[(a + 2 * b) % 4]},
                             {"tail", objects[b]},
                             {"prob", 0.9}});
        }

    nlohmann::json j;
    j["mode"] = mode;
    j["seed"] = 1;
    j["out"] = out_dir;
    j["world"] = {
        {"vocab",
         {{"objects", objects}, {"predicates", {"rides", "feeds", "chases", "pulls", "wearing"}}}},
        {"semantic_rules", rules},
        {"geometric_rules", nlohmann::json::array()},
        {"n_scenes", 1000},
        {"min_objects", 4},
        {"max_objects", 5},
        {"class_weights", {{"cow", 1.5}, {"dress", 1.5}}},
        {"feature_dim", 64},
        {"feature_noise_sigma", 0.05},
        {"description_drop", 0.05},
        {"holdout",
         {{"head", "cow"}, {"pred", "wearing"}, {"tail", "dress"}, {"min_text_instances", 50}}}};
    j["split"] = {{"parallel_fraction", 0.01}, {"test_fraction", 0.2}, {"seed", split_seed}};
    j["model"] = {{"layers", 2}, {"heads", 2}, {"d", 64}, {"ff", 128}};
    j["train"] = {{"epochs", 100}, {"batch_scenes", 5}, {"lr", 0.005}};
    j["ground"] = {{"epochs", 800}, {"lr", 0.02}};
    j["finetune"] = {{"epochs", 50}, {"batch_graphs", 8}, {"mask_rate", 0.33}, {"lr", 0.0007}};
    j["eval"] = {{"ks", {50}}};
    return j;
}

void trend_reproduction(const fs::path& scratch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string key = "PredCls/constrained/R@50";
    std::map<std::string, Real> mean;
    try {
        for (const std::string mode : {"BASE", "TXM", "GT"}) {
            Real sum = 0;
            for (uint64_t split_seed : {1, 2, 3, 4}) {
                const auto out =
                    scratch / ("trend-" + mode + "-" + std::to_string(split_seed));
                const auto cfg =
                    runner::config_from_json(trend_config(mode, split_seed, out.string()));
                const auto result = runner::run_experiment(cfg);
                sum += result.final_stage.by_key.at(key);
            }
            mean[mode] = sum / 4;
        }
    } catch (const std::exception& e) {
        report(false, std::string("text-knowledge trend: run failed: ") + e.what());
        return;
    }

    const double secs = seconds_since(t0);
    const double gain = (mean["TXM"] - mean["BASE"]) * 100;
    const double gt_vs_txm = (mean["GT"] - mean["TXM"]) * 100;
    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "text-knowledge trend over 4 splits: R@50 means BASE %.4f, TXM %.4f, GT %.4f "
                  "(TXM-BASE %+.2f pts, GT-TXM %+.2f pts, %.0fs)",
                  mean["BASE"], mean["TXM"], mean["GT"], gain, gt_vs_txm, secs);
    report(gain >= 5.0 && gt_vs_txm >= -2.0 && secs < 600.0, buf);
}

// ---------------------------------------------------------------- criterion 8

nlohmann::json separable_config(const std::string& mode, const std::string& out_dir) {
    nlohmann::json j;
    j["mode"] = mode;
    j["seed"] = 5;
    j["out"] = out_dir;
    j["world"] = {
        {"vocab",
         {{"objects", {"man", "child", "dog", "cat", "cow", "horse", "table", "chair"}},
          {"predicates", {"rides", "feeds", "chases", "pulls"}}}},
        {"semantic_rules",
         {{{"head", "man"}, {"pred", "rides"}, {"tail", "horse"}, {"prob", 0.9}},
          {{"head", "child"}, {"pred", "feeds"}, {"tail", "dog"}, {"prob", 0.9}},
          {{"head", "dog"}, {"pred", "chases"}, {"tail", "cat"}, {"prob", 0.9}},
          {{"head", "horse"}, {"pred", "pulls"}, {"tail", "table"}, {"prob", 0.9}},
          {{"head", "cat"}, {"pred", "chases"}, {"tail", "child"}, {"prob", 0.9}},
          {{"head", "cow"}, {"pred", "feeds"}, {"tail", "chair"}, {"prob", 0.9}}}},
        {"geometric_rules", nlohmann::json::array()},
        {"n_scenes", 300},
        {"min_objects", 3},
        {"max_objects", 5},
        {"feature_dim", 32},
        {"feature_noise_sigma", 0.08}};
    j["split"] = {{"parallel_fraction", 0.4}, {"test_fraction", 0.2}};
    j["model"] = {{"layers", 2}, {"heads", 2}, {"d", 32}, {"ff", 64}};
    j["train"] = {{"epochs", 60}, {"batch_scenes", 8}, {"lr", 0.003}};
    j["ground"] = {{"epochs", 100}};
    j["finetune"] = {{"epochs", 2}, {"batch_graphs", 8}};
    j["eval"] = {{"ks", {20}}};
    return j;
}

void object_classification_sanity(const fs::path& scratch) {
    try {
        const auto out = scratch / "objcls";
        const auto cfg = runner::config_from_json(separable_config("BASE", out.string()));
        const auto result = runner::run_experiment(cfg);
        const Real top1 = result.final_stage.by_key.at("ObjCls/top1");
        char buf[120];
        std::snprintf(buf, sizeof buf,
                      "object classification on held-out separable scenes: top-1 %.4f", top1);
        report(top1 >= 0.90, buf);
    } catch (const std::exception& e) {
        report(false, std::string("object classification: run failed: ") + e.what());
    }
}

// ---------------------------------------------------------------- criterion 9

void determinism(const fs::path& scratch) {
    try {
        const auto cfg_path = scratch / "det-config.json";
        auto j = separable_config("TXM", "ignored");
        j.erase("out");
        std::ofstream(cfg_path) << j.dump(2) << "\n";

        const auto out_a = scratch / "det-a";
        const auto out_b = scratch / "det-b";
        const int rc_a = runner::cmd_run(cfg_path.string(), std::nullopt, std::nullopt,
                                         out_a.string());
        const int rc_b = runner::cmd_run(cfg_path.string(), std::nullopt, std::nullopt,
                                         out_b.string());

        auto slurp = [](const fs::path& p) {
            std::ifstream in(p, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            return ss.str();
        };
        const std::string a = slurp(out_a / "metrics.json");
        const std::string b = slurp(out_b / "metrics.json");

        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "repeated runs, identical config and seeds: metrics byte-identical %s "
                      "(%zu bytes)",
                      a == b && !a.empty() ? "yes" : "no", a.size());
        report(rc_a == 0 && rc_b == 0 && !a.empty() && a == b, buf);
    } catch (const std::exception& e) {
        report(false, std::string("determinism: run failed: ") + e.what());
    }
}

}  // namespace

int main() {
    const auto scratch = scratch_dir();

    gradient_correctness();
    serialization_round_trip();
    extraction_metric_fidelity();
    masking_statistics();
    cluster_center_property();
    metric_oracle_equivalence();
    trend_reproduction(scratch);
    object_classification_sanity(scratch);
    determinism(scratch);

    std::printf("%d/9 criteria passed\n", 9 - g_failures);
    return g_failures;
}
