#include "sgtext/reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace sgtext::reasoner {

namespace {

std::string lname(int l, const char* part) {
    return "gt.l" + std::to_string(l) + "." + part;
}

std::string hname(int l, int h, const char* part) {
    return "gt.l" + std::to_string(l) + ".h" + std::to_string(h) + "." + part;
}

// Attention mask over the joint node block [objects 0..n) ++ [slots n..n+m).
// 0 where attention is allowed, -1e30 elsewhere; softmax turns the blocked
// entries into exact zeros. Self loops keep every row non-degenerate.
Tensor attention_mask(const core::SrgTopology& topo) {
    const int n = topo.n_objects;
    const int m = static_cast<int>(topo.slot_pairs.size());
    const int N = n + m;
    Tensor mask = Tensor::full(N, N, Real(-1e30));
    for (int i = 0; i < N; ++i) mask.at(i, i) = 0;
    for (int s = 0; s < m; ++s) {
        const auto [h, t] = topo.slot_pairs[static_cast<size_t>(s)];
        mask.at(h, n + s) = 0;
        mask.at(t, n + s) = 0;
        mask.at(n + s, h) = 0;
        mask.at(n + s, t) = 0;
    }
    return mask;
}

}  // namespace

void init_reasoner(ParamStore& store, const ReasonerConfig& cfg, uint64_t seed) {
    if (cfg.d <= 0 || cfg.heads <= 0 || cfg.d % cfg.heads != 0)
        throw std::invalid_argument("reasoner: d must be positive and divisible by heads");
    const int dk = cfg.d / cfg.heads;
    for (int l = 0; l < cfg.layers; ++l) {
        const uint64_t ls = Rng::mix(seed, 0x6774u, static_cast<uint64_t>(l));
        for (int h = 0; h < cfg.heads; ++h) {
            const uint64_t hs = Rng::mix(ls, static_cast<uint64_t>(h));
            store.create(hname(l, h, "wq"), glorot_init(cfg.d, dk, Rng::mix(hs, 1)));
            store.create(hname(l, h, "wk"), glorot_init(cfg.d, dk, Rng::mix(hs, 2)));
            store.create(hname(l, h, "wv"), glorot_init(cfg.d, dk, Rng::mix(hs, 3)));
            store.create(hname(l, h, "wo"), glorot_init(dk, cfg.d, Rng::mix(hs, 4)));
        }
        store.create(lname(l, "ln1.g"), Tensor::full(1, cfg.d, 1));
        store.create(lname(l, "ln1.b"), Tensor::full(1, cfg.d, 0));
        store.create(lname(l, "ln2.g"), Tensor::full(1, cfg.d, 1));
        store.create(lname(l, "ln2.b"), Tensor::full(1, cfg.d, 0));
        store.create(lname(l, "ff.w1"), glorot_init(cfg.d, cfg.ff, Rng::mix(ls, 5)));
        store.create(lname(l, "ff.b1"), Tensor::full(1, cfg.ff, 0));
        store.create(lname(l, "ff.w2"), glorot_init(cfg.ff, cfg.d, Rng::mix(ls, 6)));
        store.create(lname(l, "ff.b2"), Tensor::full(1, cfg.d, 0));
    }
}

void init_heads(ParamStore& store, int d, int n_obj_classes, int n_pred_with_bg, uint64_t seed) {
    store.create("head.wo", glorot_init(n_obj_classes, d, Rng::mix(seed, 0x686fu)));
    store.create("head.wp", glorot_init(n_pred_with_bg, d, Rng::mix(seed, 0x6870u)));
}

bool is_finetune_param(const std::string& name) {
    return name.rfind("gt.", 0) == 0 || name.rfind("head.", 0) == 0;
}

ForwardNodes forward(Tape& tape, TapeParams& params, const core::SrgTopology& topo, int x_o,
                     int x_p, const ReasonerConfig& cfg, bool train_mode, Rng& rng) {
    const int n = topo.n_objects;
    const int m = static_cast<int>(topo.slot_pairs.size());
    if (tape.value(x_o).rows != n || tape.value(x_p).rows != m)
        throw std::invalid_argument("reasoner: feature row counts do not match topology");
    if (tape.value(x_o).cols != cfg.d || tape.value(x_p).cols != cfg.d)
        throw std::invalid_argument("reasoner: feature width does not match d");

    if (train_mode && cfg.object_dropout > 0)
        x_o = features::apply_dropout(tape, x_o, cfg.object_dropout, rng);

    const int dk = cfg.d / cfg.heads;
    const Real inv_sqrt_dk = Real(1) / std::sqrt(static_cast<Real>(dk));
    const int mask = tape.constant(attention_mask(topo));

    int x = tape.concat_rows(x_o, x_p);
    for (int l = 0; l < cfg.layers; ++l) {
        const int y = tape.layer_norm_rows(x, params(lname(l, "ln1.g")), params(lname(l, "ln1.b")));
        int attn = -1;
        for (int h = 0; h < cfg.heads; ++h) {
            const int q = tape.matmul(y, params(hname(l, h, "wq")));
            const int k = tape.matmul(y, params(hname(l, h, "wk")));
            const int v = tape.matmul(y, params(hname(l, h, "wv")));
            const int scores = tape.add(tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_dk),
                                        mask);
            const int weights = tape.softmax_rows(scores);
            const int head_out = tape.matmul(tape.matmul(weights, v), params(hname(l, h, "wo")));
            attn = (attn < 0) ? head_out : tape.add(attn, head_out);
        }
        x = tape.add(x, attn);

        const int y2 =
            tape.layer_norm_rows(x, params(lname(l, "ln2.g")), params(lname(l, "ln2.b")));
        int ff = tape.add_row_bias(tape.matmul(y2, params(lname(l, "ff.w1"))),
                                   params(lname(l, "ff.b1")));
        ff = tape.leaky_relu(ff, cfg.slope);
        ff = tape.add_row_bias(tape.matmul(ff, params(lname(l, "ff.w2"))),
                               params(lname(l, "ff.b2")));
        x = tape.add(x, ff);
    }

    std::vector<int> obj_rows(static_cast<size_t>(n));
    std::vector<int> slot_rows(static_cast<size_t>(m));
    for (int i = 0; i < n; ++i) obj_rows[static_cast<size_t>(i)] = i;
    for (int s = 0; s < m; ++s) slot_rows[static_cast<size_t>(s)] = n + s;
    ForwardNodes out;
    out.z_o = tape.gather_rows(x, obj_rows);
    out.z_p = tape.gather_rows(x, slot_rows);
    return out;
}

ClassifyNodes classify(Tape& tape, TapeParams& params, const ForwardNodes& z) {
    ClassifyNodes out;
    out.c_o = tape.softmax_rows(tape.matmul(z.z_o, tape.transpose(params("head.wo"))));
    out.c_p = tape.softmax_rows(tape.matmul(z.z_p, tape.transpose(params("head.wp"))));
    return out;
}

std::vector<int> slot_labels(const core::SceneGraph& g, const core::SrgTopology& topo,
                             int background) {
    std::vector<int> labels(topo.slot_pairs.size(), background);
    for (const auto& tr : g.triples) labels[static_cast<size_t>(topo.slot(tr.head, tr.tail))] = tr.pred;
    return labels;
}

Tensor scene_features(const core::SceneGraph& g, const features::FeatureGenConfig& fg) {
    if (g.has_features()) return g.features;
    return features::synth_object_features(g, fg);
}

namespace {

// Labeled slots plus a capped, deterministically sampled share of background
// slots. Keeps l_p from being swamped by the quadratic background mass.
std::vector<int> training_slots(const std::vector<int>& labels, int background, int ratio,
                                Rng& rng) {
    std::vector<int> labeled, bg;
    for (int s = 0; s < static_cast<int>(labels.size()); ++s) {
        if (labels[static_cast<size_t>(s)] == background)
            bg.push_back(s);
        else
            labeled.push_back(s);
    }
    const size_t keep = std::min(bg.size(), labeled.size() * static_cast<size_t>(ratio));
    if (keep < bg.size()) {
        rng.shuffle(bg);
        bg.resize(keep);
    }
    labeled.insert(labeled.end(), bg.begin(), bg.end());
    std::sort(labeled.begin(), labeled.end());
    return labeled;
}

struct SceneLoss {
    Real l_o = 0;
    Real l_p = 0;
    bool has_p = false;
};

// One scene's loss graph on a fresh tape; backward when scale > 0.
SceneLoss scene_loss(ParamStore& store, const core::SceneGraph& g,
                     const features::FeatureGenConfig& fg, const features::LambdaConfig& lc,
                     const ReasonerConfig& rc, int background, int ratio, bool train_mode,
                     Real scale, Rng& rng) {
    const auto topo = core::build_srg_topology(static_cast<int>(g.objects.size()));
    Tape tape;
    TapeParams params(tape, store);

    const int x_o = tape.constant(scene_features(g, fg));
    const int t = tape.constant(features::spatial_matrix(g.objects, topo));
    const int x_p = features::predicate_init(tape, params, t, lc, train_mode, rng);

    const auto z = forward(tape, params, topo, x_o, x_p, rc, train_mode, rng);
    const auto c = classify(tape, params, z);

    std::vector<int> obj_targets;
    obj_targets.reserve(g.objects.size());
    for (const auto& o : g.objects) obj_targets.push_back(o.cls);
    const int l_o = tape.cross_entropy(c.c_o, obj_targets);

    const auto labels = slot_labels(g, topo, background);
    const auto rows = training_slots(labels, background, ratio, rng);

    SceneLoss out;
    int loss = tape.scale(l_o, scale > 0 ? scale : Real(1));
    if (!rows.empty()) {
        std::vector<int> slot_targets;
        slot_targets.reserve(rows.size());
        for (int s : rows) slot_targets.push_back(labels[static_cast<size_t>(s)]);
        const int picked = tape.gather_rows(c.c_p, rows);
        const int l_p = tape.cross_entropy(picked, slot_targets);
        out.l_p = tape.scalar(l_p);
        out.has_p = true;
        loss = tape.add(loss, tape.scale(l_p, scale > 0 ? scale : Real(1)));
    }
    out.l_o = tape.scalar(l_o);
    if (scale > 0) {
        tape.backward(loss);
        params.accumulate_grads();
    }
    return out;
}

}  // namespace

std::vector<EpochLoss> train_supervised(ParamStore& store,
                                        const std::vector<const core::SceneGraph*>& scenes,
                                        const features::FeatureGenConfig& fg,
                                        const features::LambdaConfig& lc,
                                        const ReasonerConfig& rc, const TrainConfig& tc) {
    if (scenes.empty()) throw std::invalid_argument("train_supervised: no scenes");
    std::vector<EpochLoss> history;
    history.reserve(static_cast<size_t>(tc.epochs));

    const int n_pred_with_bg = store.value("head.wp").rows;
    const int bg_class = n_pred_with_bg - 1;

    std::vector<size_t> order(scenes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        Rng epoch_rng(Rng::mix(tc.seed, 0x657063u, static_cast<uint64_t>(epoch)));
        epoch_rng.shuffle(order);

        Real sum_o = 0, sum_p = 0;
        size_t count_o = 0, count_p = 0;
        size_t done = 0;
        while (done < order.size()) {
            const size_t batch =
                std::min(static_cast<size_t>(tc.batch_scenes), order.size() - done);
            const Real scale = Real(1) / static_cast<Real>(batch);
            for (size_t b = 0; b < batch; ++b) {
                const size_t idx = order[done + b];
                Rng scene_rng(Rng::mix(tc.seed, static_cast<uint64_t>(epoch),
                                       fnv1a64(scenes[idx]->id)));
                const auto loss = scene_loss(store, *scenes[idx], fg, lc, rc, bg_class,
                                             tc.background_ratio, true, scale, scene_rng);
                sum_o += loss.l_o;
                ++count_o;
                if (loss.has_p) {
                    sum_p += loss.l_p;
                    ++count_p;
                }
            }
            store.adam_step(tc.adam);
            done += batch;
        }
        EpochLoss ep;
        ep.l_o = count_o ? sum_o / static_cast<Real>(count_o) : 0;
        ep.l_p = count_p ? sum_p / static_cast<Real>(count_p) : 0;
        history.push_back(ep);
    }
    return history;
}

SceneDistributions infer_scene(ParamStore& store, const core::SceneGraph& g,
                               const features::FeatureGenConfig& fg,
                               const features::LambdaConfig& lc, const ReasonerConfig& rc) {
    const auto topo = core::build_srg_topology(static_cast<int>(g.objects.size()));
    Tape tape;
    TapeParams params(tape, store);
    Rng rng(0);  // unused: eval mode draws nothing

    const int x_o = tape.constant(scene_features(g, fg));
    const int t = tape.constant(features::spatial_matrix(g.objects, topo));
    const int x_p = features::predicate_init(tape, params, t, lc, false, rng);
    const auto z = forward(tape, params, topo, x_o, x_p, rc, false, rng);
    const auto c = classify(tape, params, z);

    SceneDistributions out;
    out.obj_probs = tape.value(c.c_o);
    out.slot_probs = tape.value(c.c_p);
    return out;
}

void save_loss_csv(const std::vector<EpochLoss>& history, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "epoch,object_loss,predicate_loss\n";
    for (size_t i = 0; i < history.size(); ++i)
        f << i << "," << history[i].l_o << "," << history[i].l_p << "\n";
}

}  // namespace sgtext::reasoner
