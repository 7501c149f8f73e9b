#pragma once

#include "sgtext/core.hpp"
#include "sgtext/features.hpp"
#include "sgtext/tensor.hpp"
#include "sgtext/textgraph.hpp"

namespace sgtext::grounding {

// Per-row training data for a linear classifier: x is N x d, y holds the
// class label of each row.
struct LabeledRows {
    Tensor x{0, 0};
    std::vector<int> y;
};

// Object feature rows across scenes (cached features when present).
LabeledRows object_rows(const std::vector<const core::SceneGraph*>& scenes,
                        const features::FeatureGenConfig& fg);

// Slot embeddings MLP_lambda(t) of labeled slots only, with predicate labels.
// Uses the trained lambda.* parameters in eval mode.
LabeledRows predicate_rows(ParamStore& store, const std::vector<const core::SceneGraph*>& scenes,
                           const features::LambdaConfig& lc);

struct GroundConfig {
    int epochs = 150;
    int batch_rows = 256;
    AdamConfig adam{Real(0.01), Real(0.9), Real(0.999), Real(1e-8)};
    uint64_t seed = 0;
};

struct TrainReport {
    std::vector<Real> loss;           // per-epoch mean cross-entropy
    std::vector<int> missing_classes; // no training rows; their E rows keep init values
};

// Trains store[name] (n_classes x d) so that softmax(E x) classifies rows.
// Creates the parameter with glorot init when absent. Rows of classes with no
// training data are restored to their initial values afterwards.
TrainReport train_embedding(ParamStore& store, const std::string& name, int n_classes,
                            const LabeledRows& rows, const GroundConfig& cfg, uint64_t init_seed);

struct GroundReport {
    TrainReport objects;
    TrainReport predicates;
};

// Trains emb.eo over object features and emb.ep (no background row) over
// lambda(t) features of labeled slots.
GroundReport train_canonical(ParamStore& store, const std::vector<const core::SceneGraph*>& scenes,
                             const features::FeatureGenConfig& fg,
                             const features::LambdaConfig& lc, const core::ClassVocab& vocab,
                             const GroundConfig& cfg);

// Exact row copies (1 x d).
Tensor object_embedding(const ParamStore& store, int cls);
Tensor predicate_embedding(const ParamStore& store, int pred);

// One sentence-graph embedded as a sparse SRG fragment: a node per distinct
// entity symbol, a slot per fact. Facts with out-of-vocabulary symbols are
// skipped and counted.
struct EmbeddedGraph {
    std::vector<std::string> symbols;  // node index -> entity symbol
    std::vector<int> node_cls;
    std::vector<int> slot_pred;
    core::SrgTopology topo;
    Tensor x_o{0, 0};
    Tensor x_p{0, 0};
    int skipped = 0;
};

EmbeddedGraph embed_triples(const ParamStore& store, const textgraph::SymbolicGraph& g,
                            const core::ClassVocab& vocab);

// CSV round trip. Header row carries the embedding width; every value is
// printed with enough digits to reproduce the double exactly.
void export_embeddings_csv(const ParamStore& store, const core::ClassVocab& vocab,
                           const std::string& path);
void import_embeddings_csv(ParamStore& store, const core::ClassVocab& vocab,
                           const std::string& path);

}  // namespace sgtext::grounding
