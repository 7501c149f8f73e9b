#include "sgtext/features.hpp"

#include <cmath>
#include <stdexcept>

namespace sgtext::features {

Tensor spatial_vector(const core::BoundingBox& b_i, const core::BoundingBox& b_j) {
    if (!(b_i.w > 0) || !(b_i.h > 0) || !(b_j.w > 0) || !(b_j.h > 0)) {
        throw std::invalid_argument("spatial_vector needs positive box sizes");
    }
    Tensor t(1, 4);
    t.at(0, 0) = (b_i.x - b_j.x) / b_j.w;
    t.at(0, 1) = (b_i.y - b_j.y) / b_j.h;
    // log of the ratio, written as a difference so swapping the boxes negates
    // the size terms exactly.
    t.at(0, 2) = std::log(b_i.w) - std::log(b_j.w);
    t.at(0, 3) = std::log(b_i.h) - std::log(b_j.h);
    return t;
}

Tensor spatial_matrix(const std::vector<core::SceneObject>& objects,
                      const core::SrgTopology& topo) {
    Tensor out(topo.n_slots(), 4);
    for (int s = 0; s < topo.n_slots(); ++s) {
        auto [h, t] = topo.slot_pairs[size_t(s)];
        Tensor row = spatial_vector(objects[size_t(h)].box, objects[size_t(t)].box);
        for (int j = 0; j < 4; ++j) out.at(s, j) = row.at(0, j);
    }
    return out;
}

void init_lambda(ParamStore& store, const LambdaConfig& cfg, uint64_t seed) {
    store.create("lambda.w1", glorot_init(4, cfg.hidden, Rng::mix(seed, 1)));
    store.create("lambda.b1", Tensor(1, cfg.hidden));
    store.create("lambda.w2", glorot_init(cfg.hidden, cfg.d, Rng::mix(seed, 2)));
    store.create("lambda.b2", Tensor(1, cfg.d));
}

int predicate_init(Tape& tape, TapeParams& params, int t_rows, const LambdaConfig& cfg,
                   bool train_mode, Rng& rng) {
    int h = tape.matmul(t_rows, params("lambda.w1"));
    h = tape.add_row_bias(h, params("lambda.b1"));
    h = tape.leaky_relu(h, cfg.slope);
    if (train_mode) h = apply_dropout(tape, h, cfg.dropout, rng);
    int out = tape.matmul(h, params("lambda.w2"));
    return tape.add_row_bias(out, params("lambda.b2"));
}

FeatureGenConfig make_feature_gen(int n_classes, int d, Real noise_sigma, uint64_t seed) {
    if (d < 2) throw std::invalid_argument("feature dimension must be at least 2");
    if (n_classes < 1) throw std::invalid_argument("need at least one class");
    FeatureGenConfig cfg;
    cfg.d = d;
    cfg.noise_sigma = noise_sigma;
    cfg.seed = seed;
    cfg.class_means = Tensor(n_classes, d);
    for (int c = 0; c < n_classes; ++c) {
        Rng rng(Rng::mix(seed, 0x6d65616eull, uint64_t(c)));
        Real norm2 = 0;
        for (int j = 0; j < d; ++j) {
            Real x = Real(rng.uniform(-1.0, 1.0));
            cfg.class_means.at(c, j) = x;
            norm2 += x * x;
        }
        Real norm = std::sqrt(norm2);
        if (!(norm > 0)) throw std::runtime_error("degenerate class mean draw");
        for (int j = 0; j < d; ++j) cfg.class_means.at(c, j) /= norm;
    }
    for (int a = 0; a < n_classes; ++a) {
        for (int b = a + 1; b < n_classes; ++b) {
            Real diff = 0;
            for (int j = 0; j < d; ++j) {
                diff = std::max(diff, std::abs(cfg.class_means.at(a, j) - cfg.class_means.at(b, j)));
            }
            if (diff == 0) throw std::runtime_error("coinciding class means");
        }
    }
    return cfg;
}

Tensor synth_object_features(const core::SceneGraph& g, const FeatureGenConfig& cfg) {
    int n = int(g.objects.size());
    Tensor out(n, cfg.d);
    uint64_t scene_key = fnv1a64(g.id);
    for (int i = 0; i < n; ++i) {
        int c = g.objects[size_t(i)].cls;
        if (c < 0 || c >= cfg.class_means.rows) {
            throw std::out_of_range("object class outside feature generator vocabulary");
        }
        Rng rng(Rng::mix(cfg.seed, scene_key, uint64_t(i)));
        for (int j = 0; j < cfg.d; ++j) {
            out.at(i, j) = cfg.class_means.at(c, j) + Real(rng.normal(0.0, double(cfg.noise_sigma)));
        }
    }
    return out;
}

int apply_dropout(Tape& tape, int node, Real rate, Rng& rng) {
    if (rate == 0) return node;
    if (!(rate > 0 && rate < 1)) throw std::invalid_argument("dropout rate must be in [0,1)");
    const Tensor& x = tape.value(node);
    Real keep = Real(1) - rate;
    Tensor mask(x.rows, x.cols);
    for (Real& m : mask.v) m = rng.bernoulli(double(keep)) ? Real(1) / keep : Real(0);
    return tape.mul(node, tape.constant(std::move(mask)));
}

}  // namespace sgtext::features
