#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sgtext/textdae.hpp"

using namespace sgtext;
using namespace sgtext::textdae;

namespace {

// Hand-built fragment: a chain of m facts over m+1 nodes, all-ones embeddings.
grounding::EmbeddedGraph chain_fragment(int m, int d) {
    grounding::EmbeddedGraph g;
    const int n = m + 1;
    g.topo.n_objects = n;
    for (int s = 0; s < m; ++s) g.topo.slot_pairs.emplace_back(s, s + 1);
    g.x_o = Tensor::full(n, d, 1);
    g.x_p = Tensor::full(m, d, 1);
    g.node_cls.assign(static_cast<size_t>(n), 0);
    g.slot_pred.assign(static_cast<size_t>(m), 0);
    for (int i = 0; i < n; ++i) g.symbols.push_back("n" + std::to_string(i));
    return g;
}

struct DaeFixture {
    ParamStore store;
    core::ClassVocab vocab{{"a", "b", "c", "d"}, {"p", "q"}};
    reasoner::ReasonerConfig rc;
    features::LambdaConfig lc;
};

DaeFixture make_dae_fixture(uint64_t seed) {
    DaeFixture f;
    f.rc.d = 8;
    f.rc.layers = 1;
    f.rc.heads = 2;
    f.rc.ff = 16;
    f.lc.hidden = 8;
    f.lc.d = 8;
    features::init_lambda(f.store, f.lc, Rng::mix(seed, 1));
    reasoner::init_reasoner(f.store, f.rc, Rng::mix(seed, 2));
    reasoner::init_heads(f.store, 8, f.vocab.n_objects(), f.vocab.n_predicates() + 1,
                         Rng::mix(seed, 3));
    f.store.create("emb.eo", glorot_init(f.vocab.n_objects(), 8, Rng::mix(seed, 4)));
    f.store.create("emb.ep", glorot_init(f.vocab.n_predicates(), 8, Rng::mix(seed, 5)));
    return f;
}

std::vector<textgraph::SymbolicGraph> demo_sentences() {
    std::vector<textgraph::SymbolicGraph> out;
    const std::vector<std::vector<std::array<std::string, 3>>> raw = {
        {{"a", "p", "b"}},
        {{"b", "q", "c"}, {"c", "p", "d"}},
        {{"a", "q", "d"}},
        {{"d", "p", "a"}, {"a", "p", "c"}},
        {{"c", "q", "b"}},
        {{"b", "p", "d"}},
    };
    for (const auto& facts : raw) {
        textgraph::SymbolicGraph g;
        for (const auto& f : facts) g.facts.insert(f);
        out.push_back(g);
    }
    return out;
}

}  // namespace

TEST_CASE("masked fraction matches the rate over many elements") {
    std::vector<grounding::EmbeddedGraph> batch;
    for (int i = 0; i < 1250; ++i) batch.push_back(chain_fragment(4, 6));  // 9 elements each

    MaskConfig cfg;
    cfg.mask_rate = 0.2;
    cfg.seed = 77;
    const auto masked = mask_graph(batch, cfg);
    REQUIRE(masked.total_elements == 1250 * 9);
    const Real fraction =
        static_cast<Real>(masked.masked_elements) / static_cast<Real>(masked.total_elements);
    CHECK(fraction >= 0.19);
    CHECK(fraction <= 0.21);
}

TEST_CASE("masking zeroes exactly the recorded elements") {
    std::vector<grounding::EmbeddedGraph> batch = {chain_fragment(5, 4), chain_fragment(3, 4)};
    MaskConfig cfg;
    cfg.mask_rate = 0.4;
    cfg.seed = 3;
    const auto masked = mask_graph(batch, cfg);

    int recorded = 0;
    for (size_t gi = 0; gi < batch.size(); ++gi) {
        for (int r = 0; r < batch[gi].x_o.rows; ++r) {
            const bool is_masked = masked.node_masked[gi][static_cast<size_t>(r)] != 0;
            recorded += is_masked;
            for (int j = 0; j < 4; ++j) {
                if (is_masked)
                    CHECK(masked.x_o[gi].at(r, j) == 0.0);
                else
                    CHECK(masked.x_o[gi].at(r, j) == batch[gi].x_o.at(r, j));
            }
        }
        for (int r = 0; r < batch[gi].x_p.rows; ++r) {
            const bool is_masked = masked.slot_masked[gi][static_cast<size_t>(r)] != 0;
            recorded += is_masked;
            for (int j = 0; j < 4; ++j) {
                if (is_masked)
                    CHECK(masked.x_p[gi].at(r, j) == 0.0);
                else
                    CHECK(masked.x_p[gi].at(r, j) == batch[gi].x_p.at(r, j));
            }
        }
    }
    CHECK(recorded == masked.masked_elements);
}

TEST_CASE("zero rate is a bitwise no-op") {
    std::vector<grounding::EmbeddedGraph> batch = {chain_fragment(4, 5)};
    MaskConfig cfg;
    cfg.mask_rate = 0;
    cfg.seed = 9;
    const auto masked = mask_graph(batch, cfg);
    CHECK(masked.masked_elements == 0);
    CHECK(masked.x_o[0].bitwise_equal(batch[0].x_o));
    CHECK(masked.x_p[0].bitwise_equal(batch[0].x_p));
}

TEST_CASE("mask is deterministic in the seed") {
    std::vector<grounding::EmbeddedGraph> batch;
    for (int i = 0; i < 20; ++i) batch.push_back(chain_fragment(4, 4));
    MaskConfig cfg;
    cfg.mask_rate = 0.3;
    cfg.seed = 1234;
    const auto a = mask_graph(batch, cfg);
    const auto b = mask_graph(batch, cfg);
    CHECK(a.node_masked == b.node_masked);
    CHECK(a.slot_masked == b.slot_masked);

    cfg.seed = 1235;
    const auto c = mask_graph(batch, cfg);
    CHECK(a.node_masked != c.node_masked);
}

TEST_CASE("exact_count masks a fixed number of elements") {
    std::vector<grounding::EmbeddedGraph> batch;
    for (int i = 0; i < 7; ++i) batch.push_back(chain_fragment(3, 4));  // 7 * 7 = 49 elements
    MaskConfig cfg;
    cfg.mask_rate = 0.2;
    cfg.exact_count = true;
    for (uint64_t seed = 0; seed < 5; ++seed) {
        cfg.seed = seed;
        const auto masked = mask_graph(batch, cfg);
        CHECK(masked.masked_elements == 10);  // round(0.2 * 49)
    }
}

TEST_CASE("bad inputs are rejected") {
    CHECK_THROWS_AS(mask_graph({}, MaskConfig{}), std::invalid_argument);
    std::vector<grounding::EmbeddedGraph> batch = {chain_fragment(2, 4)};
    MaskConfig cfg;
    cfg.mask_rate = 1.0;
    CHECK_THROWS_AS(mask_graph(batch, cfg), std::invalid_argument);
}

TEST_CASE("fine-tuning updates the transformer but freezes embeddings and lambda") {
    auto f = make_dae_fixture(11);
    const Tensor eo = f.store.value("emb.eo");
    const Tensor ep = f.store.value("emb.ep");
    const Tensor lw1 = f.store.value("lambda.w1");
    const Tensor gt0 = f.store.value("gt.l0.h0.wq");
    const Tensor wo = f.store.value("head.wo");

    FinetuneConfig cfg;
    cfg.epochs = 5;
    cfg.batch_graphs = 3;
    cfg.adam.lr = 1e-3;
    cfg.seed = 21;
    const auto report = finetune_from_triples(f.store, demo_sentences(), f.vocab, f.rc, cfg);

    CHECK(report.used_sentences == 6);
    CHECK(report.skipped_sentences == 0);
    REQUIRE(report.history.size() == 5);
    for (const auto& ep_stats : report.history) {
        CHECK(std::isfinite(ep_stats.loss));
        CHECK(ep_stats.masked_accuracy >= 0);
        CHECK(ep_stats.masked_accuracy <= 1);
    }

    CHECK(f.store.value("emb.eo").bitwise_equal(eo));
    CHECK(f.store.value("emb.ep").bitwise_equal(ep));
    CHECK(f.store.value("lambda.w1").bitwise_equal(lw1));
    CHECK_FALSE(f.store.value("gt.l0.h0.wq").bitwise_equal(gt0));
    CHECK_FALSE(f.store.value("head.wo").bitwise_equal(wo));
}

TEST_CASE("zero mask rate with zero learning rate is a parameter no-op") {
    auto f = make_dae_fixture(31);
    ParamStore before = f.store;

    FinetuneConfig cfg;
    cfg.epochs = 3;
    cfg.mask.mask_rate = 0;
    cfg.adam.lr = 0;
    finetune_from_triples(f.store, demo_sentences(), f.vocab, f.rc, cfg);
    CHECK(f.store.bitwise_equal(before));
}

TEST_CASE("fine-tuning is deterministic in the seed") {
    auto run = [&]() {
        auto f = make_dae_fixture(41);
        FinetuneConfig cfg;
        cfg.epochs = 4;
        cfg.adam.lr = 1e-3;
        cfg.seed = 5;
        const auto report = finetune_from_triples(f.store, demo_sentences(), f.vocab, f.rc, cfg);
        return std::pair<FinetuneReport, ParamStore>(report, std::move(f.store));
    };
    const auto [r1, s1] = run();
    const auto [r2, s2] = run();
    REQUIRE(r1.history.size() == r2.history.size());
    for (size_t i = 0; i < r1.history.size(); ++i) {
        CHECK(r1.history[i].loss == r2.history[i].loss);
        CHECK(r1.history[i].masked_accuracy == r2.history[i].masked_accuracy);
    }
    CHECK(s1.bitwise_equal(s2));
}

TEST_CASE("unmasked reconstruction collapses faster than masked") {
    auto base = make_dae_fixture(51);

    FinetuneConfig plain;
    plain.epochs = 40;
    plain.batch_graphs = 6;
    plain.adam.lr = 2e-3;
    plain.seed = 7;
    plain.mask.mask_rate = 0;

    FinetuneConfig noisy = plain;
    noisy.mask.mask_rate = 0.2;

    ParamStore store_plain = base.store;
    ParamStore store_noisy = base.store;
    const auto r_plain =
        finetune_from_triples(store_plain, demo_sentences(), base.vocab, base.rc, plain);
    const auto r_noisy =
        finetune_from_triples(store_noisy, demo_sentences(), base.vocab, base.rc, noisy);

    CHECK(r_plain.history.back().loss < r_noisy.history.back().loss);
    CHECK(r_plain.history.back().loss < r_plain.history.front().loss);
}

TEST_CASE("masked-only loss mode trains and reports finite losses") {
    auto f = make_dae_fixture(61);
    FinetuneConfig cfg;
    cfg.epochs = 4;
    cfg.adam.lr = 1e-3;
    cfg.masked_loss_only = true;
    cfg.mask.mask_rate = 0.4;
    const auto report = finetune_from_triples(f.store, demo_sentences(), f.vocab, f.rc, cfg);
    for (const auto& ep_stats : report.history) CHECK(std::isfinite(ep_stats.loss));
}

TEST_CASE("unusable corpora are rejected with a skip account") {
    auto f = make_dae_fixture(71);
    CHECK_THROWS_AS(finetune_from_triples(f.store, {}, f.vocab, f.rc, FinetuneConfig{}),
                    std::invalid_argument);

    textgraph::SymbolicGraph unknown;
    unknown.facts.insert({"dragon", "guards", "castle"});
    CHECK_THROWS_AS(finetune_from_triples(f.store, {unknown}, f.vocab, f.rc, FinetuneConfig{}),
                    std::invalid_argument);
}
