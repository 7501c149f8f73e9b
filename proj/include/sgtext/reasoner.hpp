#pragma once

#include "sgtext/core.hpp"
#include "sgtext/features.hpp"
#include "sgtext/tensor.hpp"

namespace sgtext::reasoner {

struct ReasonerConfig {
    int layers = 2;
    int heads = 2;
    int d = 32;   // must be divisible by heads
    int ff = 128;
    Real slope = Real(0.2);          // leaky relu in the feed-forward blocks
    Real object_dropout = Real(0.2); // on object embeddings entering layer 0, train mode only
};

// Graph transformer parameters, all under the "gt." prefix.
void init_reasoner(ParamStore& store, const ReasonerConfig& cfg, uint64_t seed);

// Linear heads "head.wo" (n_obj_classes x d) and "head.wp" (n_pred_with_bg x d).
void init_heads(ParamStore& store, int d, int n_obj_classes, int n_pred_with_bg, uint64_t seed);

// Fine-tuning touches the transformer and heads only.
bool is_finetune_param(const std::string& name);

struct ForwardNodes {
    int z_o = -1;  // n x d
    int z_p = -1;  // m x d
};

// Pre-norm transformer over the SRG: nodes attend to their SRG neighbors plus
// themselves (objects to incident slots, slots to their head and tail), with
// residual + layer norm + feed-forward per layer. Shapes are preserved.
ForwardNodes forward(Tape& tape, TapeParams& params, const core::SrgTopology& topo, int x_o,
                     int x_p, const ReasonerConfig& cfg, bool train_mode, Rng& rng);

struct ClassifyNodes {
    int c_o = -1;  // n x n_obj_classes, rows sum to 1
    int c_p = -1;  // m x n_pred_with_bg
};

ClassifyNodes classify(Tape& tape, TapeParams& params, const ForwardNodes& z);

// Slot label vector for the full topology: matching triples get their
// predicate class, every other ordered pair the background class.
std::vector<int> slot_labels(const core::SceneGraph& g, const core::SrgTopology& topo,
                             int background);

// Cached features when present, otherwise the synthetic generator.
Tensor scene_features(const core::SceneGraph& g, const features::FeatureGenConfig& fg);

struct TrainConfig {
    int epochs = 50;
    int batch_scenes = 8;
    AdamConfig adam;
    int background_ratio = 3;  // background slots kept per scene <= ratio x labeled
    uint64_t seed = 0;
};

struct EpochLoss {
    Real l_o = 0;
    Real l_p = 0;
};

// Minimizes l_o + l_p over mini-batches of scenes; updates lambda.*, gt.* and
// head.*. Deterministic in cfg.seed. Returns per-epoch mean losses.
std::vector<EpochLoss> train_supervised(ParamStore& store,
                                        const std::vector<const core::SceneGraph*>& scenes,
                                        const features::FeatureGenConfig& fg,
                                        const features::LambdaConfig& lc,
                                        const ReasonerConfig& rc, const TrainConfig& tc);

struct SceneDistributions {
    Tensor obj_probs;   // n x n_obj_classes
    Tensor slot_probs;  // m x n_pred_with_bg
};

// Dropout-free forward + classify for one scene over the full topology.
SceneDistributions infer_scene(ParamStore& store, const core::SceneGraph& g,
                               const features::FeatureGenConfig& fg,
                               const features::LambdaConfig& lc, const ReasonerConfig& rc);

void save_loss_csv(const std::vector<EpochLoss>& history, const std::string& path);

}  // namespace sgtext::reasoner
