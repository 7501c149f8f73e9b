#pragma once

#include "sgtext/core.hpp"
#include "sgtext/tensor.hpp"

namespace sgtext::features {

// t = [t_x, t_y, t_w, t_h] as a 1x4 row:
// t_x = (x_i - x_j)/w_j, t_y = (y_i - y_j)/h_j, t_w = log(w_i/w_j), t_h = log(h_i/h_j).
Tensor spatial_vector(const core::BoundingBox& b_i, const core::BoundingBox& b_j);

// One spatial row per predicate slot, in topology order.
Tensor spatial_matrix(const std::vector<core::SceneObject>& objects,
                      const core::SrgTopology& topo);

// Two-layer MLP over t: 4 -> hidden (leaky relu, dropout in train mode) -> d.
struct LambdaConfig {
    int hidden = 32;
    int d = 32;
    Real slope = Real(0.2);
    Real dropout = Real(0.1);
};

// Creates lambda.w1, lambda.b1, lambda.w2, lambda.b2 in the store.
void init_lambda(ParamStore& store, const LambdaConfig& cfg, uint64_t seed);

// Slot embeddings X^p for all rows of t_rows; differentiable through lambda.*.
int predicate_init(Tape& tape, TapeParams& params, int t_rows, const LambdaConfig& cfg,
                   bool train_mode, Rng& rng);

// Class-conditional Gaussian generator standing in for a pooled CNN feature.
struct FeatureGenConfig {
    int d = 32;
    Tensor class_means;  // n_classes x d
    Real noise_sigma = Real(0.2);
    uint64_t seed = 0;
};

// Unit-norm class means, deterministic per seed, pairwise distinct.
FeatureGenConfig make_feature_gen(int n_classes, int d, Real noise_sigma, uint64_t seed);

// x_i = class_means[c_i] + N(0, sigma^2) per dimension, seeded per
// (generator seed, scene id, object index) so regeneration is bit-exact.
Tensor synth_object_features(const core::SceneGraph& g, const FeatureGenConfig& cfg);

// Inverted dropout: zeroes with probability rate, scales survivors by
// 1/(1-rate). rate = 0 returns the node unchanged.
int apply_dropout(Tape& tape, int node, Real rate, Rng& rng);

}  // namespace sgtext::features
