#include "sgtext/grounding.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sgtext::grounding {

LabeledRows object_rows(const std::vector<const core::SceneGraph*>& scenes,
                        const features::FeatureGenConfig& fg) {
    std::vector<Tensor> chunks;
    LabeledRows out;
    for (const auto* g : scenes) {
        const Tensor x = g->has_features() ? g->features : features::synth_object_features(*g, fg);
        chunks.push_back(x);
        for (const auto& o : g->objects) out.y.push_back(o.cls);
    }
    const int d = chunks.empty() ? fg.d : chunks.front().cols;
    out.x = Tensor(static_cast<int>(out.y.size()), d);
    int r = 0;
    for (const auto& c : chunks)
        for (int i = 0; i < c.rows; ++i, ++r)
            for (int j = 0; j < c.cols; ++j) out.x.at(r, j) = c.at(i, j);
    return out;
}

LabeledRows predicate_rows(ParamStore& store, const std::vector<const core::SceneGraph*>& scenes,
                           const features::LambdaConfig& lc) {
    LabeledRows out;
    std::vector<Tensor> chunks;
    Rng rng(0);  // eval mode draws nothing
    for (const auto* g : scenes) {
        if (g->triples.empty()) continue;
        const auto topo = core::build_srg_topology(static_cast<int>(g->objects.size()));
        Tape tape;
        TapeParams params(tape, store);
        const int t = tape.constant(features::spatial_matrix(g->objects, topo));
        const int x_p = features::predicate_init(tape, params, t, lc, false, rng);
        const Tensor& vals = tape.value(x_p);
        Tensor rows(static_cast<int>(g->triples.size()), vals.cols);
        int r = 0;
        for (const auto& tr : g->triples) {
            const int s = topo.slot(tr.head, tr.tail);
            for (int j = 0; j < vals.cols; ++j) rows.at(r, j) = vals.at(s, j);
            out.y.push_back(tr.pred);
            ++r;
        }
        chunks.push_back(std::move(rows));
    }
    const int d = chunks.empty() ? lc.d : chunks.front().cols;
    out.x = Tensor(static_cast<int>(out.y.size()), d);
    int r = 0;
    for (const auto& c : chunks)
        for (int i = 0; i < c.rows; ++i, ++r)
            for (int j = 0; j < c.cols; ++j) out.x.at(r, j) = c.at(i, j);
    return out;
}

TrainReport train_embedding(ParamStore& store, const std::string& name, int n_classes,
                            const LabeledRows& rows, const GroundConfig& cfg,
                            uint64_t init_seed) {
    if (rows.x.rows != static_cast<int>(rows.y.size()))
        throw std::invalid_argument("train_embedding: row/label count mismatch");
    if (!store.has(name)) store.create(name, glorot_init(n_classes, rows.x.cols, init_seed));
    const Tensor init = store.value(name);
    if (init.rows != n_classes) throw std::invalid_argument("train_embedding: class count mismatch");

    TrainReport report;
    std::vector<bool> present(static_cast<size_t>(n_classes), false);
    for (int c : rows.y) {
        if (c < 0 || c >= n_classes) throw std::invalid_argument("train_embedding: label out of range");
        present[static_cast<size_t>(c)] = true;
    }
    for (int c = 0; c < n_classes; ++c)
        if (!present[static_cast<size_t>(c)]) report.missing_classes.push_back(c);

    const int n = rows.x.rows;
    if (n == 0) {
        log_warn("train_embedding(" + name + "): no training rows");
        return report;
    }

    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    const auto only = [&](const std::string& p) { return p == name; };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(Rng::mix(cfg.seed, 0x656d62u, static_cast<uint64_t>(epoch)));
        rng.shuffle(order);
        Real loss_sum = 0;
        int batches = 0;
        for (int start = 0; start < n; start += cfg.batch_rows) {
            const int len = std::min(cfg.batch_rows, n - start);
            Tensor xb(len, rows.x.cols);
            std::vector<int> yb(static_cast<size_t>(len));
            for (int i = 0; i < len; ++i) {
                const int src = order[static_cast<size_t>(start + i)];
                yb[static_cast<size_t>(i)] = rows.y[static_cast<size_t>(src)];
                for (int j = 0; j < rows.x.cols; ++j) xb.at(i, j) = rows.x.at(src, j);
            }
            Tape tape;
            TapeParams params(tape, store);
            const int logits = tape.matmul(tape.constant(xb), tape.transpose(params(name)));
            const int loss = tape.cross_entropy(tape.softmax_rows(logits), yb);
            tape.backward(loss);
            params.accumulate_grads();
            store.adam_step(cfg.adam, only);
            loss_sum += tape.scalar(loss);
            ++batches;
        }
        report.loss.push_back(loss_sum / static_cast<Real>(batches));
    }

    // Softmax pushes every row's logit around; classes that never appeared
    // keep their initial rows by contract.
    if (!report.missing_classes.empty()) {
        auto& value = store.entry(name).value;
        for (int c : report.missing_classes)
            for (int j = 0; j < value.cols; ++j) value.at(c, j) = init.at(c, j);
        std::string msg = "train_embedding(" + name + "): no rows for classes";
        for (int c : report.missing_classes) msg += " " + std::to_string(c);
        log_warn(msg);
    }
    return report;
}

GroundReport train_canonical(ParamStore& store, const std::vector<const core::SceneGraph*>& scenes,
                             const features::FeatureGenConfig& fg,
                             const features::LambdaConfig& lc, const core::ClassVocab& vocab,
                             const GroundConfig& cfg) {
    GroundReport out;
    const auto obj = object_rows(scenes, fg);
    out.objects = train_embedding(store, "emb.eo", vocab.n_objects(), obj, cfg,
                                  Rng::mix(cfg.seed, 0x656fu));
    const auto pred = predicate_rows(store, scenes, lc);
    out.predicates = train_embedding(store, "emb.ep", vocab.n_predicates(), pred, cfg,
                                     Rng::mix(cfg.seed, 0x6570u));
    return out;
}

namespace {

Tensor row_copy(const ParamStore& store, const std::string& name, int r) {
    const Tensor& e = store.value(name);
    if (r < 0 || r >= e.rows) throw std::out_of_range(name + ": row " + std::to_string(r));
    Tensor out(1, e.cols);
    for (int j = 0; j < e.cols; ++j) out.at(0, j) = e.at(r, j);
    return out;
}

}  // namespace

Tensor object_embedding(const ParamStore& store, int cls) {
    return row_copy(store, "emb.eo", cls);
}

Tensor predicate_embedding(const ParamStore& store, int pred) {
    return row_copy(store, "emb.ep", pred);
}

EmbeddedGraph embed_triples(const ParamStore& store, const textgraph::SymbolicGraph& g,
                            const core::ClassVocab& vocab) {
    EmbeddedGraph out;
    const Tensor& eo = store.value("emb.eo");
    const Tensor& ep = store.value("emb.ep");
    std::map<std::string, int> node_of;
    struct SlotFact {
        int head, pred, tail;
    };
    std::vector<SlotFact> slots;

    for (const auto& fact : g.facts) {
        const int h = vocab.find_object(fact[0]);
        const int p = vocab.find_predicate(fact[1]);
        const int t = vocab.find_object(fact[2]);
        if (h < 0 || p < 0 || t < 0) {
            ++out.skipped;
            continue;
        }
        for (const auto& sym : {fact[0], fact[2]}) {
            if (!node_of.count(sym)) {
                node_of[sym] = static_cast<int>(out.symbols.size());
                out.symbols.push_back(sym);
                out.node_cls.push_back(vocab.object_id(sym));
            }
        }
        slots.push_back({node_of[fact[0]], p, node_of[fact[2]]});
    }

    const int n = static_cast<int>(out.symbols.size());
    const int m = static_cast<int>(slots.size());
    out.topo.n_objects = n;
    out.x_o = Tensor(n, eo.cols);
    out.x_p = Tensor(m, ep.cols);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < eo.cols; ++j)
            out.x_o.at(i, j) = eo.at(out.node_cls[static_cast<size_t>(i)], j);
    for (int s = 0; s < m; ++s) {
        out.topo.slot_pairs.emplace_back(slots[static_cast<size_t>(s)].head,
                                         slots[static_cast<size_t>(s)].tail);
        out.slot_pred.push_back(slots[static_cast<size_t>(s)].pred);
        for (int j = 0; j < ep.cols; ++j)
            out.x_p.at(s, j) = ep.at(slots[static_cast<size_t>(s)].pred, j);
    }
    return out;
}

namespace {

std::string format_real(Real v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(v));
    return buf;
}

void write_rows(std::ofstream& f, const Tensor& e, const std::vector<std::string>& names) {
    for (int i = 0; i < e.rows; ++i) {
        f << names[static_cast<size_t>(i)];
        for (int j = 0; j < e.cols; ++j) f << "," << format_real(e.at(i, j));
        f << "\n";
    }
}

}  // namespace

void export_embeddings_csv(const ParamStore& store, const core::ClassVocab& vocab,
                           const std::string& path) {
    const Tensor& eo = store.value("emb.eo");
    const Tensor& ep = store.value("emb.ep");
    if (eo.rows != vocab.n_objects() || ep.rows != vocab.n_predicates())
        throw std::invalid_argument("export_embeddings_csv: vocab/embedding size mismatch");
    if (eo.cols != ep.cols) throw std::invalid_argument("export_embeddings_csv: width mismatch");
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "name,d=" << eo.cols << "\n";
    write_rows(f, eo, vocab.object_names());
    write_rows(f, ep, vocab.predicate_names());
}

void import_embeddings_csv(ParamStore& store, const core::ClassVocab& vocab,
                           const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error(path + ": empty file");
    const auto eq = line.rfind("d=");
    if (line.rfind("name,", 0) != 0 || eq == std::string::npos)
        throw std::runtime_error(path + ": bad header");
    const int d = std::stoi(line.substr(eq + 2));

    Tensor eo(vocab.n_objects(), d);
    Tensor ep(vocab.n_predicates(), d);
    std::vector<bool> seen_o(static_cast<size_t>(eo.rows), false);
    std::vector<bool> seen_p(static_cast<size_t>(ep.rows), false);
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (static_cast<int>(cells.size()) != d + 1)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": wrong column count");
        const int oid = vocab.find_object(cells[0]);
        const int pid = vocab.find_predicate(cells[0]);
        Tensor* target = nullptr;
        int row = -1;
        if (oid >= 0 && !seen_o[static_cast<size_t>(oid)]) {
            target = &eo;
            row = oid;
            seen_o[static_cast<size_t>(oid)] = true;
        } else if (pid >= 0 && !seen_p[static_cast<size_t>(pid)]) {
            target = &ep;
            row = pid;
            seen_p[static_cast<size_t>(pid)] = true;
        } else {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown or repeated name " +
                                     cells[0]);
        }
        for (int j = 0; j < d; ++j)
            target->at(row, j) = static_cast<Real>(std::stod(cells[static_cast<size_t>(j + 1)]));
    }
    for (size_t i = 0; i < seen_o.size(); ++i)
        if (!seen_o[i]) throw std::runtime_error(path + ": missing object row " + vocab.object_name(int(i)));
    for (size_t i = 0; i < seen_p.size(); ++i)
        if (!seen_p[i]) throw std::runtime_error(path + ": missing predicate row " + vocab.predicate_name(int(i)));

    if (store.has("emb.eo"))
        store.entry("emb.eo").value = eo;
    else
        store.create("emb.eo", eo);
    if (store.has("emb.ep"))
        store.entry("emb.ep").value = ep;
    else
        store.create("emb.ep", ep);
}

}  // namespace sgtext::grounding
