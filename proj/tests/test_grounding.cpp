#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "sgtext/grounding.hpp"

using namespace sgtext;
using namespace sgtext::grounding;

namespace {

Real cosine(const Tensor& a, int ra, const Tensor& b, int rb) {
    Real dot = 0, na = 0, nb = 0;
    for (int j = 0; j < a.cols; ++j) {
        dot += a.at(ra, j) * b.at(rb, j);
        na += a.at(ra, j) * a.at(ra, j);
        nb += b.at(rb, j) * b.at(rb, j);
    }
    return dot / std::sqrt(na * nb);
}

// Labeled Gaussian rows around the generator's class means.
LabeledRows gaussian_rows(const features::FeatureGenConfig& fg, int per_class, uint64_t seed) {
    const int n_classes = fg.class_means.rows;
    LabeledRows out;
    out.x = Tensor(n_classes * per_class, fg.d);
    Rng rng(seed);
    int r = 0;
    for (int c = 0; c < n_classes; ++c)
        for (int i = 0; i < per_class; ++i, ++r) {
            out.y.push_back(c);
            for (int j = 0; j < fg.d; ++j)
                out.x.at(r, j) = fg.class_means.at(c, j) + fg.noise_sigma * rng.normal();
        }
    return out;
}

Real min_mean_separation(const Tensor& means) {
    Real best = 1e30;
    for (int a = 0; a < means.rows; ++a)
        for (int b = a + 1; b < means.rows; ++b) {
            Real d2 = 0;
            for (int j = 0; j < means.cols; ++j) {
                const Real diff = means.at(a, j) - means.at(b, j);
                d2 += diff * diff;
            }
            best = std::min(best, std::sqrt(d2));
        }
    return best;
}

int argmax_class(const Tensor& e, const Tensor& x, int row) {
    int best = 0;
    Real best_v = -1e30;
    for (int c = 0; c < e.rows; ++c) {
        Real dot = 0;
        for (int j = 0; j < e.cols; ++j) dot += e.at(c, j) * x.at(row, j);
        if (dot > best_v) {
            best_v = dot;
            best = c;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("symbol lookup returns the exact parameter row") {
    ParamStore store;
    store.create("emb.eo", glorot_init(4, 8, 3));
    store.create("emb.ep", glorot_init(2, 8, 4));
    const Tensor& eo = store.value("emb.eo");

    const Tensor row = object_embedding(store, 2);
    REQUIRE(row.rows == 1);
    REQUIRE(row.cols == 8);
    for (int j = 0; j < 8; ++j) CHECK(row.at(0, j) == eo.at(2, j));

    // Same thing as multiplying by a one-hot vector.
    Tensor onehot(1, 4);
    onehot.at(0, 2) = 1;
    const Tensor product = matmul(onehot, eo);
    CHECK(product.bitwise_equal(row));

    const Tensor again = object_embedding(store, 2);
    CHECK(again.bitwise_equal(row));

    CHECK_THROWS_AS(object_embedding(store, 4), std::out_of_range);
    CHECK_THROWS_AS(predicate_embedding(store, -1), std::out_of_range);
}

TEST_CASE("mean-initialized classifier is perfect on noise-free data") {
    auto fg = features::make_feature_gen(3, 16, 0.0, 99);
    ParamStore store;
    store.create("e", fg.class_means);
    const auto rows = gaussian_rows(fg, 10, 5);
    const Tensor& e = store.value("e");
    for (int r = 0; r < rows.x.rows; ++r)
        CHECK(argmax_class(e, rows.x, r) == rows.y[static_cast<size_t>(r)]);
}

TEST_CASE("trained rows point at their own cluster centers") {
    auto fg = features::make_feature_gen(3, 16, 0.0, 7);
    fg.noise_sigma = min_mean_separation(fg.class_means) / Real(5);

    const auto train = gaussian_rows(fg, 60, 11);
    ParamStore store;
    GroundConfig cfg;
    cfg.epochs = 120;
    cfg.seed = 1;
    const auto report = train_embedding(store, "e", 3, train, cfg, 21);
    CHECK(report.missing_classes.empty());
    CHECK(report.loss.back() < report.loss.front());

    // Brute-force class means of the training rows.
    Tensor means(3, fg.d);
    std::vector<int> counts(3, 0);
    for (int r = 0; r < train.x.rows; ++r) {
        const int c = train.y[static_cast<size_t>(r)];
        ++counts[static_cast<size_t>(c)];
        for (int j = 0; j < fg.d; ++j) means.at(c, j) += train.x.at(r, j);
    }
    for (int c = 0; c < 3; ++c)
        for (int j = 0; j < fg.d; ++j) means.at(c, j) /= counts[static_cast<size_t>(c)];

    const Tensor& e = store.value("e");
    for (int c = 0; c < 3; ++c)
        for (int other = 0; other < 3; ++other) {
            if (other == c) continue;
            CHECK(cosine(e, c, means, c) > cosine(e, c, means, other));
        }
}

TEST_CASE("classifier accuracy stays within 2 points of nearest-mean") {
    auto fg = features::make_feature_gen(4, 16, 0.0, 13);
    fg.noise_sigma = min_mean_separation(fg.class_means) / Real(4);

    const auto train = gaussian_rows(fg, 80, 17);
    const auto held = gaussian_rows(fg, 40, 18);

    ParamStore store;
    GroundConfig cfg;
    cfg.epochs = 120;
    cfg.seed = 2;
    train_embedding(store, "e", 4, train, cfg, 23);
    const Tensor& e = store.value("e");

    Tensor means(4, fg.d);
    std::vector<int> counts(4, 0);
    for (int r = 0; r < train.x.rows; ++r) {
        const int c = train.y[static_cast<size_t>(r)];
        ++counts[static_cast<size_t>(c)];
        for (int j = 0; j < fg.d; ++j) means.at(c, j) += train.x.at(r, j);
    }
    for (int c = 0; c < 4; ++c)
        for (int j = 0; j < fg.d; ++j) means.at(c, j) /= counts[static_cast<size_t>(c)];

    int model_hits = 0, mean_hits = 0;
    for (int r = 0; r < held.x.rows; ++r) {
        if (argmax_class(e, held.x, r) == held.y[static_cast<size_t>(r)]) ++model_hits;
        int best = 0;
        Real best_d = 1e30;
        for (int c = 0; c < 4; ++c) {
            Real d2 = 0;
            for (int j = 0; j < fg.d; ++j) {
                const Real diff = held.x.at(r, j) - means.at(c, j);
                d2 += diff * diff;
            }
            if (d2 < best_d) {
                best_d = d2;
                best = c;
            }
        }
        if (best == held.y[static_cast<size_t>(r)]) ++mean_hits;
    }
    const Real model_acc = Real(model_hits) / held.x.rows;
    const Real mean_acc = Real(mean_hits) / held.x.rows;
    CHECK(model_acc >= mean_acc - 0.02);
}

TEST_CASE("classes without training rows keep their initial embedding") {
    auto fg = features::make_feature_gen(2, 8, 0.1, 31);
    auto rows = gaussian_rows(fg, 30, 41);  // labels 0 and 1 only

    ParamStore store;
    store.create("e", glorot_init(3, 8, 51));
    const Tensor init = store.value("e");

    GroundConfig cfg;
    cfg.epochs = 30;
    const auto report = train_embedding(store, "e", 3, rows, cfg, 51);
    REQUIRE(report.missing_classes.size() == 1);
    CHECK(report.missing_classes[0] == 2);

    const Tensor& e = store.value("e");
    for (int j = 0; j < 8; ++j) CHECK(e.at(2, j) == init.at(2, j));
    // Trained rows did move.
    Real moved = 0;
    for (int j = 0; j < 8; ++j) moved += std::abs(e.at(0, j) - init.at(0, j));
    CHECK(moved > 1e-6);
}

TEST_CASE("identical seeds give identical embeddings") {
    auto fg = features::make_feature_gen(3, 8, 0.15, 61);
    const auto rows = gaussian_rows(fg, 20, 71);
    auto run = [&]() {
        ParamStore store;
        GroundConfig cfg;
        cfg.epochs = 25;
        cfg.seed = 9;
        train_embedding(store, "e", 3, rows, cfg, 81);
        return store.value("e");
    };
    CHECK(run().bitwise_equal(run()));
}

TEST_CASE("embed_triples merges shared entity symbols into one node") {
    core::ClassVocab vocab({"child", "man", "ski slope"}, {"on", "standing with"});
    ParamStore store;
    store.create("emb.eo", glorot_init(3, 8, 5));
    store.create("emb.ep", glorot_init(2, 8, 6));

    textgraph::SymbolicGraph g;
    g.facts.insert({"child", "on", "ski slope"});
    g.facts.insert({"man", "standing with", "child"});

    const auto emb = embed_triples(store, g, vocab);
    CHECK(emb.skipped == 0);
    REQUIRE(emb.symbols.size() == 3);  // child shared, not duplicated
    REQUIRE(emb.topo.slot_pairs.size() == 2);
    CHECK(emb.topo.n_objects == 3);

    // Facts iterate lexicographically: (child,on,ski slope) then (man,...).
    CHECK(emb.symbols[0] == "child");
    CHECK(emb.symbols[1] == "ski slope");
    CHECK(emb.symbols[2] == "man");
    CHECK(emb.topo.slot_pairs[0] == std::pair<int, int>{0, 1});
    CHECK(emb.topo.slot_pairs[1] == std::pair<int, int>{2, 0});
    CHECK(emb.slot_pred[0] == vocab.predicate_id("on"));
    CHECK(emb.slot_pred[1] == vocab.predicate_id("standing with"));

    const Tensor& eo = store.value("emb.eo");
    const Tensor& ep = store.value("emb.ep");
    for (int j = 0; j < 8; ++j) {
        CHECK(emb.x_o.at(0, j) == eo.at(vocab.object_id("child"), j));
        CHECK(emb.x_o.at(2, j) == eo.at(vocab.object_id("man"), j));
        CHECK(emb.x_p.at(0, j) == ep.at(vocab.predicate_id("on"), j));
    }
}

TEST_CASE("embed_triples skips unknown symbols and handles empty input") {
    core::ClassVocab vocab({"man", "dog"}, {"near"});
    ParamStore store;
    store.create("emb.eo", glorot_init(2, 4, 1));
    store.create("emb.ep", glorot_init(1, 4, 2));

    textgraph::SymbolicGraph g;
    g.facts.insert({"man", "near", "dog"});
    g.facts.insert({"man", "near", "unicorn"});
    g.facts.insert({"man", "rides", "dog"});

    const auto emb = embed_triples(store, g, vocab);
    CHECK(emb.skipped == 2);
    CHECK(emb.symbols.size() == 2);
    CHECK(emb.topo.slot_pairs.size() == 1);

    const auto none = embed_triples(store, textgraph::SymbolicGraph{}, vocab);
    CHECK(none.skipped == 0);
    CHECK(none.symbols.empty());
    CHECK(none.topo.slot_pairs.empty());
    CHECK(none.x_o.rows == 0);
}

TEST_CASE("embedding CSV round trip is bit-exact") {
    core::ClassVocab vocab({"man", "ski slope"}, {"on"});
    ParamStore store;
    store.create("emb.eo", glorot_init(2, 6, 91));
    store.create("emb.ep", glorot_init(1, 6, 92));
    const Tensor eo = store.value("emb.eo");
    const Tensor ep = store.value("emb.ep");

    const std::string path = (std::filesystem::temp_directory_path() / "sgtext_emb_test.csv").string();
    export_embeddings_csv(store, vocab, path);

    {
        std::ifstream f(path);
        std::string header;
        std::getline(f, header);
        CHECK(header == "name,d=6");
        std::string first;
        std::getline(f, first);
        CHECK(first.rfind("man,", 0) == 0);
    }

    for (auto& v : store.entry("emb.eo").value.v) v = 0;
    for (auto& v : store.entry("emb.ep").value.v) v = 0;
    import_embeddings_csv(store, vocab, path);
    CHECK(store.value("emb.eo").bitwise_equal(eo));
    CHECK(store.value("emb.ep").bitwise_equal(ep));
    std::filesystem::remove(path);
}

TEST_CASE("train_canonical builds both embedding tables from scenes") {
    core::ClassVocab vocab({"a", "b", "c"}, {"p", "q"});
    features::LambdaConfig lc;
    lc.hidden = 8;
    lc.d = 8;
    ParamStore store;
    features::init_lambda(store, lc, 3);
    auto fg = features::make_feature_gen(3, 8, 0.1, 17);

    std::vector<core::SceneGraph> scenes;
    Rng rng(5);
    for (int i = 0; i < 8; ++i) {
        core::SceneGraph g;
        g.id = "g" + std::to_string(i);
        for (int o = 0; o < 3; ++o) {
            core::BoundingBox b{rng.uniform(0.0, 0.6), rng.uniform(0.0, 0.6),
                                rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3)};
            g.objects.push_back({static_cast<int>(rng.below(3)), b});
        }
        g.triples.push_back({0, static_cast<int>(rng.below(2)), 1});
        g.triples.push_back({1, static_cast<int>(rng.below(2)), 2});
        scenes.push_back(g);
    }
    std::vector<const core::SceneGraph*> ptrs;
    for (const auto& s : scenes) ptrs.push_back(&s);

    GroundConfig cfg;
    cfg.epochs = 20;
    const auto report = train_canonical(store, ptrs, fg, lc, vocab, cfg);
    CHECK(store.value("emb.eo").rows == 3);
    CHECK(store.value("emb.eo").cols == 8);
    CHECK(store.value("emb.ep").rows == 2);  // no background row
    CHECK(store.value("emb.ep").cols == 8);
    CHECK_FALSE(report.objects.loss.empty());
    CHECK_FALSE(report.predicates.loss.empty());
}
