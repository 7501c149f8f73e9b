#include "sgtext/textdae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace sgtext::textdae {

namespace {

void zero_row(Tensor& t, int r) {
    for (int j = 0; j < t.cols; ++j) t.at(r, j) = 0;
}

}  // namespace

MaskedBatch mask_graph(const std::vector<grounding::EmbeddedGraph>& batch, const MaskConfig& cfg) {
    if (batch.empty()) throw std::invalid_argument("mask_graph: empty batch");
    if (cfg.mask_rate < 0 || cfg.mask_rate >= 1)
        throw std::invalid_argument("mask_graph: mask_rate outside [0,1)");

    MaskedBatch out;
    out.x_o.reserve(batch.size());
    out.x_p.reserve(batch.size());
    for (const auto& g : batch) {
        out.x_o.push_back(g.x_o);
        out.x_p.push_back(g.x_p);
        out.node_masked.emplace_back(static_cast<size_t>(g.x_o.rows), char(0));
        out.slot_masked.emplace_back(static_cast<size_t>(g.x_p.rows), char(0));
        out.total_elements += g.x_o.rows + g.x_p.rows;
    }
    if (cfg.mask_rate == 0) return out;

    Rng rng(cfg.seed);
    if (cfg.exact_count) {
        // Pool every element across the batch, zero a fixed-size random subset.
        struct Ref {
            size_t graph;
            int row;
            bool is_slot;
        };
        std::vector<Ref> pool;
        pool.reserve(static_cast<size_t>(out.total_elements));
        for (size_t gi = 0; gi < batch.size(); ++gi) {
            for (int r = 0; r < out.x_o[gi].rows; ++r) pool.push_back({gi, r, false});
            for (int r = 0; r < out.x_p[gi].rows; ++r) pool.push_back({gi, r, true});
        }
        rng.shuffle(pool);
        const auto k = static_cast<size_t>(
            std::llround(cfg.mask_rate * static_cast<Real>(out.total_elements)));
        for (size_t i = 0; i < k && i < pool.size(); ++i) {
            const auto& ref = pool[i];
            if (ref.is_slot) {
                zero_row(out.x_p[ref.graph], ref.row);
                out.slot_masked[ref.graph][static_cast<size_t>(ref.row)] = 1;
            } else {
                zero_row(out.x_o[ref.graph], ref.row);
                out.node_masked[ref.graph][static_cast<size_t>(ref.row)] = 1;
            }
            ++out.masked_elements;
        }
        return out;
    }

    for (size_t gi = 0; gi < batch.size(); ++gi) {
        for (int r = 0; r < out.x_o[gi].rows; ++r)
            if (rng.bernoulli(cfg.mask_rate)) {
                zero_row(out.x_o[gi], r);
                out.node_masked[gi][static_cast<size_t>(r)] = 1;
                ++out.masked_elements;
            }
        for (int r = 0; r < out.x_p[gi].rows; ++r)
            if (rng.bernoulli(cfg.mask_rate)) {
                zero_row(out.x_p[gi], r);
                out.slot_masked[gi][static_cast<size_t>(r)] = 1;
                ++out.masked_elements;
            }
    }
    return out;
}

namespace {

struct GraphStats {
    Real loss = 0;
    bool has_loss = false;
    int masked_hits = 0;
    int masked_total = 0;
};

std::vector<int> masked_rows(const std::vector<char>& mask) {
    std::vector<int> rows;
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) rows.push_back(static_cast<int>(i));
    return rows;
}

int argmax_row(const Tensor& t, int r) {
    int best = 0;
    for (int j = 1; j < t.cols; ++j)
        if (t.at(r, j) > t.at(r, best)) best = j;
    return best;
}

// Reconstruction loss for one masked fragment; backward when scale > 0.
GraphStats dae_graph_pass(ParamStore& store, const grounding::EmbeddedGraph& g,
                          const Tensor& masked_o, const Tensor& masked_p,
                          const std::vector<char>& node_mask, const std::vector<char>& slot_mask,
                          const reasoner::ReasonerConfig& rc, bool masked_loss_only, Real scale) {
    Tape tape;
    TapeParams params(tape, store);
    Rng rng(0);  // forward runs without dropout; masking is the corruption

    const int x_o = tape.constant(masked_o);
    const int x_p = tape.constant(masked_p);
    const auto z = reasoner::forward(tape, params, g.topo, x_o, x_p, rc, false, rng);
    const auto c = reasoner::classify(tape, params, z);

    GraphStats out;
    int loss = -1;
    // Empty rows means "use every row"; masked mode passes the masked subset.
    auto add_term = [&](int probs, const std::vector<int>& targets, const std::vector<int>& rows) {
        if (targets.empty()) return;
        const int picked = rows.empty() ? probs : tape.gather_rows(probs, rows);
        const int term = tape.cross_entropy(picked, targets);
        loss = (loss < 0) ? term : tape.add(loss, term);
    };

    if (masked_loss_only) {
        const auto o_rows = masked_rows(node_mask);
        const auto p_rows = masked_rows(slot_mask);
        std::vector<int> o_targets, p_targets;
        for (int r : o_rows) o_targets.push_back(g.node_cls[static_cast<size_t>(r)]);
        for (int r : p_rows) p_targets.push_back(g.slot_pred[static_cast<size_t>(r)]);
        if (!o_rows.empty()) add_term(c.c_o, o_targets, o_rows);
        if (!p_rows.empty()) add_term(c.c_p, p_targets, p_rows);
    } else {
        add_term(c.c_o, g.node_cls, {});
        if (!g.slot_pred.empty()) add_term(c.c_p, g.slot_pred, {});
    }

    if (loss >= 0) {
        out.loss = tape.scalar(loss);
        out.has_loss = true;
        if (scale > 0) {
            tape.backward(tape.scale(loss, scale));
            params.accumulate_grads();
        }
    }

    const Tensor& obj_probs = tape.value(c.c_o);
    const Tensor& slot_probs = tape.value(c.c_p);
    for (size_t r = 0; r < node_mask.size(); ++r)
        if (node_mask[r]) {
            ++out.masked_total;
            if (argmax_row(obj_probs, static_cast<int>(r)) == g.node_cls[r]) ++out.masked_hits;
        }
    for (size_t r = 0; r < slot_mask.size(); ++r)
        if (slot_mask[r]) {
            ++out.masked_total;
            if (argmax_row(slot_probs, static_cast<int>(r)) == g.slot_pred[r]) ++out.masked_hits;
        }
    return out;
}

}  // namespace

FinetuneReport finetune_from_triples(ParamStore& store,
                                     const std::vector<textgraph::SymbolicGraph>& sentences,
                                     const core::ClassVocab& vocab,
                                     const reasoner::ReasonerConfig& rc,
                                     const FinetuneConfig& cfg) {
    if (sentences.empty()) throw std::invalid_argument("finetune_from_triples: no sentences");

    FinetuneReport report;
    std::vector<grounding::EmbeddedGraph> graphs;
    for (const auto& s : sentences) {
        auto emb = grounding::embed_triples(store, s, vocab);
        if (emb.topo.n_objects == 0 || emb.topo.slot_pairs.empty()) {
            ++report.skipped_sentences;
            continue;
        }
        graphs.push_back(std::move(emb));
    }
    if (graphs.empty()) throw std::invalid_argument("finetune_from_triples: no usable sentences");
    report.used_sentences = static_cast<int>(graphs.size());

    store.reset_moments(reasoner::is_finetune_param);

    std::vector<size_t> order(graphs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng(Rng::mix(cfg.seed, 0x646165u, static_cast<uint64_t>(epoch)));
        epoch_rng.shuffle(order);

        Real loss_sum = 0;
        int loss_count = 0, hits = 0, masked_total = 0;

        size_t done = 0;
        while (done < order.size()) {
            const size_t batch = std::min(static_cast<size_t>(cfg.batch_graphs),
                                          order.size() - done);
            std::vector<grounding::EmbeddedGraph> slice;
            slice.reserve(batch);
            for (size_t b = 0; b < batch; ++b) slice.push_back(graphs[order[done + b]]);

            MaskConfig mc = cfg.mask;
            mc.seed = Rng::mix(cfg.seed, static_cast<uint64_t>(epoch), static_cast<uint64_t>(done));
            const auto masked = mask_graph(slice, mc);

            const Real scale = Real(1) / static_cast<Real>(batch);
            for (size_t b = 0; b < batch; ++b) {
                const auto stats = dae_graph_pass(store, slice[b], masked.x_o[b], masked.x_p[b],
                                                  masked.node_masked[b], masked.slot_masked[b], rc,
                                                  cfg.masked_loss_only, scale);
                if (stats.has_loss) {
                    loss_sum += stats.loss;
                    ++loss_count;
                }
                hits += stats.masked_hits;
                masked_total += stats.masked_total;
            }
            store.adam_step(cfg.adam, reasoner::is_finetune_param);
            done += batch;
        }

        FinetuneEpoch ep;
        ep.loss = loss_count ? loss_sum / static_cast<Real>(loss_count) : 0;
        ep.masked_accuracy =
            masked_total ? static_cast<Real>(hits) / static_cast<Real>(masked_total) : 1;
        report.history.push_back(ep);
    }
    return report;
}

void save_finetune_csv(const FinetuneReport& report, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "epoch,reconstruction_loss,masked_accuracy\n";
    for (size_t i = 0; i < report.history.size(); ++i)
        f << i << "," << report.history[i].loss << "," << report.history[i].masked_accuracy << "\n";
}

}  // namespace sgtext::textdae
