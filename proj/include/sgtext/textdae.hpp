#pragma once

#include "sgtext/grounding.hpp"
#include "sgtext/reasoner.hpp"

namespace sgtext::textdae {

struct MaskConfig {
    Real mask_rate = Real(0.2);
    bool exact_count = false;  // zero round(rate * N) elements instead of Bernoulli per element
    uint64_t seed = 0;
};

// Masked copies of a batch of embedded fragments plus the record of which
// elements (object nodes and predicate slots) were zeroed.
struct MaskedBatch {
    std::vector<Tensor> x_o;
    std::vector<Tensor> x_p;
    std::vector<std::vector<char>> node_masked;
    std::vector<std::vector<char>> slot_masked;
    int total_elements = 0;
    int masked_elements = 0;
};

MaskedBatch mask_graph(const std::vector<grounding::EmbeddedGraph>& batch, const MaskConfig& cfg);

struct FinetuneConfig {
    int epochs = 30;
    int batch_graphs = 8;
    MaskConfig mask;
    AdamConfig adam;
    bool masked_loss_only = false;  // ablation; default reconstructs every element
    uint64_t seed = 0;
};

struct FinetuneEpoch {
    Real loss = 0;             // mean reconstruction cross-entropy per graph
    Real masked_accuracy = 0;  // top-1 on masked elements; 1 when nothing was masked
};

struct FinetuneReport {
    std::vector<FinetuneEpoch> history;
    int skipped_sentences = 0;  // no in-vocabulary facts
    int used_sentences = 0;
};

// Denoising autoencoder pass over sentence-graphs: embed symbols through the
// frozen canonical embeddings, zero a random subset of elements, and train the
// transformer plus heads (gt.*, head.*) to reconstruct every class label.
// lambda.* and emb.* are not touched.
FinetuneReport finetune_from_triples(ParamStore& store,
                                     const std::vector<textgraph::SymbolicGraph>& sentences,
                                     const core::ClassVocab& vocab,
                                     const reasoner::ReasonerConfig& rc,
                                     const FinetuneConfig& cfg);

void save_finetune_csv(const FinetuneReport& report, const std::string& path);

}  // namespace sgtext::textdae
