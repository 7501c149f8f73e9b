#include "sgtext/worldgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace sgtext::worldgen {

namespace {

const std::array<const char*, 7> kKindNames = {"above",  "below", "left_of",    "right_of",
                                               "inside", "near",  "larger_than"};

// Never words of any builtin class name, and single words, so they cannot
// break a multi-word surface form during extraction.
const std::array<const char*, 4> kFillers = {"really", "quite", "very", "just"};

}  // namespace

std::string geom_kind_name(GeomKind k) { return kKindNames.at(size_t(k)); }

GeomKind parse_geom_kind(const std::string& name) {
    for (size_t i = 0; i < kKindNames.size(); ++i)
        if (name == kKindNames[i]) return GeomKind(i);
    throw std::invalid_argument("unknown geometry kind: " + name);
}

bool geom_holds(GeomKind kind, const core::BoundingBox& a, const core::BoundingBox& b,
                Real param) {
    const Real acx = a.x + a.w / 2, acy = a.y + a.h / 2;
    const Real bcx = b.x + b.w / 2, bcy = b.y + b.h / 2;
    const Real hx = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
    const Real vy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
    switch (kind) {
        case GeomKind::above:
            return acy < bcy && hx > 0;
        case GeomKind::below:
            return acy > bcy && hx > 0;
        case GeomKind::left_of:
            return acx < bcx && vy > 0;
        case GeomKind::right_of:
            return acx > bcx && vy > 0;
        case GeomKind::inside:
            return a.x >= b.x && a.y >= b.y && a.x + a.w <= b.x + b.w && a.y + a.h <= b.y + b.h;
        case GeomKind::near: {
            const Real r = param > 0 ? param : Real(0.2);
            const Real dx = acx - bcx, dy = acy - bcy;
            return dx * dx + dy * dy < r * r;
        }
        case GeomKind::larger_than: {
            const Real ratio = param > 0 ? param : Real(2);
            return a.w * a.h > ratio * b.w * b.h;
        }
    }
    throw std::logic_error("unhandled geometry kind");
}

WorldSpec builtin_world() {
    WorldSpec spec;
    spec.vocab = core::ClassVocab(
        {"man",   "child", "ski slope", "tree",  "house", "dog",  "cat",  "car",   "boat", "bird",
         "table", "chair", "lamp",      "fence", "horse", "cow",  "road", "hill",  "river",
         "dress"},
        {"above", "below", "left of", "right of", "inside", "near", "larger than", "on",
         "standing with", "wearing"});
    const auto o = [&](const char* n) { return spec.vocab.object_id(n); };
    const auto p = [&](const char* n) { return spec.vocab.predicate_id(n); };

    spec.semantic = {
        {o("man"), p("on"), o("ski slope"), Real(0.9)},
        {o("child"), p("on"), o("ski slope"), Real(0.8)},
        {o("house"), p("on"), o("hill"), Real(0.9)},
        {o("car"), p("on"), o("road"), Real(0.9)},
        {o("boat"), p("on"), o("river"), Real(0.9)},
        {o("cat"), p("on"), o("table"), Real(0.7)},
        {o("lamp"), p("on"), o("table"), Real(0.8)},
        {o("bird"), p("on"), o("tree"), Real(0.7)},
        {o("horse"), p("on"), o("hill"), Real(0.5)},
        {o("dog"), p("on"), o("road"), Real(0.4)},
        {o("man"), p("standing with"), o("child"), Real(0.8)},
        {o("child"), p("standing with"), o("dog"), Real(0.6)},
        {o("man"), p("standing with"), o("horse"), Real(0.5)},
        {o("child"), p("standing with"), o("cat"), Real(0.5)},
        {o("man"), p("wearing"), o("dress"), Real(0.5)},
        {o("child"), p("wearing"), o("dress"), Real(0.5)},
        {o("cow"), p("wearing"), o("dress"), Real(0.9)},
    };
    // inside precedes the overlap rules because a contained box satisfies
    // those too; near comes last as the weakest condition.
    spec.geometric = {
        {GeomKind::inside, p("inside")},
        {GeomKind::above, p("above")},
        {GeomKind::below, p("below")},
        {GeomKind::left_of, p("left of")},
        {GeomKind::right_of, p("right of")},
        {GeomKind::larger_than, p("larger than"), 0, Real(0.5)},
        {GeomKind::near, p("near"), 0, Real(0.7)},
    };
    return spec;
}

std::vector<std::string> validate_world_spec(const WorldSpec& spec) {
    std::vector<std::string> problems;
    const int n_obj = spec.vocab.n_objects();
    const int n_pred = spec.vocab.n_predicates();
    if (n_obj <= 0) problems.push_back("vocab has no object classes");
    if (n_pred <= 0) problems.push_back("vocab has no predicate classes");
    if (spec.n_scenes < 1) problems.push_back("n_scenes must be positive");
    if (spec.min_objects < 1 || spec.min_objects > spec.max_objects)
        problems.push_back("object count range invalid");
    if (!(spec.min_box > 0) || spec.min_box > spec.max_box || spec.max_box > 1)
        problems.push_back("box size range invalid");
    if (spec.semantic.empty() && spec.geometric.empty())
        problems.push_back("spec has zero rules");
    if (spec.description_drop < 0 || spec.description_drop > 1)
        problems.push_back("description_drop outside [0,1]");
    if (spec.filler_noise < 0 || spec.filler_noise > 1)
        problems.push_back("filler_noise outside [0,1]");
    if (spec.feature_dim <= 0) problems.push_back("feature_dim must be positive");
    if (spec.feature_noise_sigma < 0) problems.push_back("feature_noise_sigma negative");

    std::vector<bool> covered(size_t(std::max(n_pred, 0)), false);
    const auto pred_ok = [&](int pred) { return pred >= 0 && pred < n_pred; };
    const auto cls_ok = [&](int cls) { return cls >= 0 && cls < n_obj; };
    for (const auto& r : spec.semantic) {
        if (!pred_ok(r.pred) || !cls_ok(r.head_cls) || !cls_ok(r.tail_cls))
            problems.push_back("semantic rule references an unknown class");
        else
            covered[size_t(r.pred)] = true;
        if (r.prob < 0 || r.prob > 1) problems.push_back("semantic rule probability outside [0,1]");
    }
    for (const auto& r : spec.geometric) {
        if (!pred_ok(r.pred))
            problems.push_back("geometric rule references an unknown predicate");
        else
            covered[size_t(r.pred)] = true;
        if (r.prob < 0 || r.prob > 1)
            problems.push_back("geometric rule probability outside [0,1]");
        if (r.param < 0) problems.push_back("geometric rule parameter negative");
    }
    for (int c = 0; c < n_pred; ++c)
        if (!covered[size_t(c)])
            problems.push_back("predicate has no generating rule: " + spec.vocab.predicate_name(c));

    if (!spec.class_weights.empty()) {
        if (int(spec.class_weights.size()) != n_obj) {
            problems.push_back("class_weights size does not match the object vocab");
        } else {
            Real total = 0;
            for (Real w : spec.class_weights) {
                if (w < 0) problems.push_back("class weight negative");
                total += w;
            }
            if (!(total > 0)) problems.push_back("class weights sum to zero");
        }
    }
    if (spec.holdout) {
        const auto& h = *spec.holdout;
        if (!pred_ok(h.pred) || !cls_ok(h.head_cls) || !cls_ok(h.tail_cls))
            problems.push_back("holdout pattern references an unknown class");
        if (h.min_text_instances < 0) problems.push_back("holdout minimum negative");
    }
    return problems;
}

namespace {

void require_valid(const WorldSpec& spec) {
    auto problems = validate_world_spec(spec);
    if (!problems.empty()) throw std::invalid_argument("world spec: " + problems.front());
}

int sample_class(const WorldSpec& spec, Rng& rng) {
    if (spec.class_weights.empty()) return int(rng.below(uint64_t(spec.vocab.n_objects())));
    const Real total =
        std::accumulate(spec.class_weights.begin(), spec.class_weights.end(), Real(0));
    Real r = Real(rng.uniform()) * total;
    int last_positive = 0;
    for (int c = 0; c < int(spec.class_weights.size()); ++c) {
        if (spec.class_weights[size_t(c)] > 0) last_positive = c;
        r -= spec.class_weights[size_t(c)];
        if (r < 0) return c;
    }
    return last_positive;
}

// prob >= 1 always fires, prob <= 0 never fires; neither consumes a draw.
bool coin(Real prob, Rng& rng) {
    if (prob >= 1) return true;
    if (prob <= 0) return false;
    return rng.bernoulli(double(prob));
}

std::string sentence_for(const core::ClassVocab& vocab,
                         const std::vector<core::SceneObject>& objects, const core::Triple& t) {
    return "a " + vocab.object_name(objects[size_t(t.head)].cls) + " " +
           vocab.predicate_name(t.pred) + " a " + vocab.object_name(objects[size_t(t.tail)].cls);
}

std::string render_noisy(const WorldSpec& spec, const std::vector<core::SceneObject>& objects,
                         const std::vector<core::Triple>& triples, Rng& rng) {
    std::string out;
    for (const auto& t : triples) {
        if (coin(spec.description_drop, rng)) continue;
        std::string s = sentence_for(spec.vocab, objects, t);
        if (coin(spec.filler_noise, rng))
            s = std::string(kFillers[rng.below(kFillers.size())]) + " " + s;
        if (!out.empty()) out += " and ";
        out += s;
    }
    return out;
}

core::SceneGraph generate_scene_unchecked(const WorldSpec& spec,
                                          const features::FeatureGenConfig& fg, int index) {
    Rng structure(Rng::mix(spec.seed, 0x7363656eull, uint64_t(index)));

    core::SceneGraph g;
    char id[16];
    std::snprintf(id, sizeof(id), "s%05d", index);
    g.id = id;

    const int n = spec.min_objects +
                  int(structure.below(uint64_t(spec.max_objects - spec.min_objects + 1)));
    g.objects.resize(size_t(n));
    for (auto& obj : g.objects) {
        obj.cls = sample_class(spec, structure);
        obj.box.w = Real(structure.uniform(double(spec.min_box), double(spec.max_box)));
        obj.box.h = Real(structure.uniform(double(spec.min_box), double(spec.max_box)));
        obj.box.x = Real(structure.uniform(0.0, double(1 - obj.box.w)));
        obj.box.y = Real(structure.uniform(0.0, double(1 - obj.box.h)));
    }
    g.triples = label_pairs(spec, g.objects, structure);

    Rng text(Rng::mix(spec.seed, 0x74657874ull, uint64_t(index)));
    g.text = render_noisy(spec, g.objects, g.triples, text);
    g.features = features::synth_object_features(g, fg);
    return g;
}

}  // namespace

std::vector<core::Triple> label_pairs(const WorldSpec& spec,
                                      const std::vector<core::SceneObject>& objects, Rng& rng) {
    std::vector<core::Triple> triples;
    const int n = int(objects.size());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto& head = objects[size_t(i)];
            const auto& tail = objects[size_t(j)];
            int pred = -1;
            for (const auto& r : spec.semantic) {
                if (r.head_cls != head.cls || r.tail_cls != tail.cls) continue;
                if (coin(r.prob, rng)) {
                    pred = r.pred;
                    break;
                }
            }
            if (pred < 0) {
                for (const auto& r : spec.geometric) {
                    if (!geom_holds(r.kind, head.box, tail.box, r.param)) continue;
                    if (coin(r.prob, rng)) {
                        pred = r.pred;
                        break;
                    }
                }
            }
            if (pred >= 0) triples.push_back({i, pred, j});
        }
    }
    return triples;
}

std::string render_plain(const core::ClassVocab& vocab,
                         const std::vector<core::SceneObject>& objects,
                         const std::vector<core::Triple>& triples) {
    std::string out;
    for (const auto& t : triples) {
        if (!out.empty()) out += " and ";
        out += sentence_for(vocab, objects, t);
    }
    return out;
}

features::FeatureGenConfig feature_gen(const WorldSpec& spec) {
    return features::make_feature_gen(spec.vocab.n_objects(), spec.feature_dim,
                                      spec.feature_noise_sigma, Rng::mix(spec.seed, 0x66656174ull));
}

core::SceneGraph generate_scene(const WorldSpec& spec, int index) {
    require_valid(spec);
    return generate_scene_unchecked(spec, feature_gen(spec), index);
}

core::Dataset generate_world(const WorldSpec& spec) {
    require_valid(spec);
    const auto fg = feature_gen(spec);
    core::Dataset d;
    d.scenes.reserve(size_t(spec.n_scenes));
    for (int i = 0; i < spec.n_scenes; ++i)
        d.scenes.push_back(generate_scene_unchecked(spec, fg, i));
    return d;
}

int pattern_instances(const core::SceneGraph& g, const HoldoutPattern& p) {
    int count = 0;
    for (const auto& t : g.triples)
        if (t.pred == p.pred && g.objects[size_t(t.head)].cls == p.head_cls &&
            g.objects[size_t(t.tail)].cls == p.tail_cls)
            ++count;
    return count;
}

WorldSpec holdout_relation(WorldSpec spec, const HoldoutPattern& pattern) {
    const int n_obj = spec.vocab.n_objects();
    const int n_pred = spec.vocab.n_predicates();
    if (pattern.head_cls < 0 || pattern.head_cls >= n_obj || pattern.tail_cls < 0 ||
        pattern.tail_cls >= n_obj || pattern.pred < 0 || pattern.pred >= n_pred)
        throw std::invalid_argument("holdout pattern references an unknown class");

    bool generable = false;
    for (const auto& r : spec.semantic)
        if (r.head_cls == pattern.head_cls && r.pred == pattern.pred &&
            r.tail_cls == pattern.tail_cls && r.prob > 0)
            generable = true;
    // Geometric rules apply to every class pair.
    for (const auto& r : spec.geometric)
        if (r.pred == pattern.pred && r.prob > 0) generable = true;
    if (!generable)
        throw std::invalid_argument("holdout pattern is not generable by the spec: " +
                                    spec.vocab.object_name(pattern.head_cls) + " " +
                                    spec.vocab.predicate_name(pattern.pred) + " " +
                                    spec.vocab.object_name(pattern.tail_cls));
    spec.holdout = pattern;
    return spec;
}

SplitSpec split_spec_from_json(const nlohmann::json& j) {
    SplitSpec s;
    for (const auto& [key, value] : j.items()) {
        if (key == "parallel_fraction")
            s.parallel_fraction = value.get<Real>();
        else if (key == "test_fraction")
            s.test_fraction = value.get<Real>();
        else if (key == "seed")
            s.seed = value.get<uint64_t>();
        else
            throw std::invalid_argument("unknown split key: " + key);
    }
    if (!(s.parallel_fraction > 0) || s.parallel_fraction > 1)
        throw std::invalid_argument("parallel_fraction outside (0,1]");
    if (s.test_fraction < 0 || s.test_fraction > 1)
        throw std::invalid_argument("test_fraction outside [0,1]");
    if (s.parallel_fraction + s.test_fraction > 1)
        throw std::invalid_argument("split fractions sum above 1");
    return s;
}

SplitOutcome make_splits(const core::Dataset& all, const WorldSpec& world,
                         const SplitSpec& split) {
    const int n = int(all.scenes.size());
    if (n == 0) throw std::invalid_argument("make_splits: no scenes");
    if (!(split.parallel_fraction > 0) || split.parallel_fraction > 1 ||
        split.test_fraction < 0 || split.parallel_fraction + split.test_fraction > 1)
        throw std::invalid_argument("make_splits: bad fractions");

    const int n_test = int(std::llround(double(split.test_fraction) * n));
    const int n_parallel = int(std::llround(double(split.parallel_fraction) * n));
    if (n_parallel <= 0) throw std::runtime_error("make_splits: parallel split would be empty");
    if (n_test + n_parallel > n)
        throw std::runtime_error("make_splits: fractions leave no text scenes");

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffler(Rng::mix(split.seed, 0x73706cull));
    shuffler.shuffle(order);

    std::vector<std::string> label(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        const std::string& name =
            k < n_test ? "test" : (k < n_test + n_parallel ? "parallel" : "text");
        label[size_t(order[size_t(k)])] = name;
    }

    SplitOutcome out;
    out.dataset.scenes.reserve(size_t(n));
    int text_instances = 0;
    int test_instances = 0;
    for (int i = 0; i < n; ++i) {
        core::SceneGraph g = all.scenes[size_t(i)];
        g.split = label[size_t(i)];
        if (world.holdout) {
            const auto& h = *world.holdout;
            if (g.split == "parallel") {
                std::erase_if(g.triples, [&](const core::Triple& t) {
                    return t.pred == h.pred && g.objects[size_t(t.head)].cls == h.head_cls &&
                           g.objects[size_t(t.tail)].cls == h.tail_cls;
                });
                g.text = render_plain(world.vocab, g.objects, g.triples);
            } else if (g.split == "text") {
                text_instances += pattern_instances(g, h);
            } else {
                test_instances += pattern_instances(g, h);
            }
        }
        if (g.split == "text") {
            out.text_full.push_back(g);
            g.objects.clear();
            g.triples.clear();
            g.features = Tensor();
        }
        out.dataset.scenes.push_back(std::move(g));
    }

    if (world.holdout) {
        const auto& h = *world.holdout;
        if (text_instances < h.min_text_instances)
            throw std::runtime_error("holdout: text split has " + std::to_string(text_instances) +
                                     " pattern instances, need " +
                                     std::to_string(h.min_text_instances));
        if (test_instances < 1)
            throw std::runtime_error("holdout: test split contains no pattern instances");
    }
    return out;
}

WorldSpec world_spec_from_json(const nlohmann::json& j) {
    WorldSpec spec = builtin_world();
    if (j.contains("vocab")) {
        const auto& v = j.at("vocab");
        spec.vocab = core::ClassVocab(v.at("objects").get<std::vector<std::string>>(),
                                      v.at("predicates").get<std::vector<std::string>>());
        // A custom vocab invalidates the builtin rule tables.
        spec.semantic.clear();
        spec.geometric.clear();
    }
    std::optional<nlohmann::json> holdout_json;
    for (const auto& [key, value] : j.items()) {
        if (key == "vocab") {
        } else if (key == "n_scenes") {
            spec.n_scenes = value.get<int>();
        } else if (key == "min_objects") {
            spec.min_objects = value.get<int>();
        } else if (key == "max_objects") {
            spec.max_objects = value.get<int>();
        } else if (key == "min_box") {
            spec.min_box = value.get<Real>();
        } else if (key == "max_box") {
            spec.max_box = value.get<Real>();
        } else if (key == "description_drop") {
            spec.description_drop = value.get<Real>();
        } else if (key == "filler_noise") {
            spec.filler_noise = value.get<Real>();
        } else if (key == "feature_dim") {
            spec.feature_dim = value.get<int>();
        } else if (key == "feature_noise_sigma") {
            spec.feature_noise_sigma = value.get<Real>();
        } else if (key == "seed") {
            spec.seed = value.get<uint64_t>();
        } else if (key == "semantic_rules") {
            spec.semantic.clear();
            for (const auto& r : value) {
                SemanticRule rule;
                rule.head_cls = spec.vocab.object_id(r.at("head").get<std::string>());
                rule.pred = spec.vocab.predicate_id(r.at("pred").get<std::string>());
                rule.tail_cls = spec.vocab.object_id(r.at("tail").get<std::string>());
                rule.prob = r.value("prob", Real(1));
                spec.semantic.push_back(rule);
            }
        } else if (key == "geometric_rules") {
            spec.geometric.clear();
            for (const auto& r : value) {
                GeometricRule rule;
                const std::string pred = r.at("pred").get<std::string>();
                rule.pred = spec.vocab.predicate_id(pred);
                // kind defaults to the predicate name with spaces as underscores.
                std::string kind = r.value("kind", "");
                if (kind.empty()) {
                    kind = pred;
                    std::replace(kind.begin(), kind.end(), ' ', '_');
                }
                rule.kind = parse_geom_kind(kind);
                rule.param = r.value("param", Real(0));
                rule.prob = r.value("prob", Real(1));
                spec.geometric.push_back(rule);
            }
        } else if (key == "class_weights") {
            spec.class_weights.assign(size_t(spec.vocab.n_objects()), Real(1));
            for (const auto& [name, w] : value.items())
                spec.class_weights[size_t(spec.vocab.object_id(name))] = w.get<Real>();
        } else if (key == "holdout") {
            holdout_json = value;  // applied after the rule tables are final
        } else {
            throw std::invalid_argument("unknown world key: " + key);
        }
    }
    if (holdout_json) {
        HoldoutPattern p;
        p.head_cls = spec.vocab.object_id(holdout_json->at("head").get<std::string>());
        p.pred = spec.vocab.predicate_id(holdout_json->at("pred").get<std::string>());
        p.tail_cls = spec.vocab.object_id(holdout_json->at("tail").get<std::string>());
        p.min_text_instances = holdout_json->value("min_text_instances", 1);
        spec = holdout_relation(std::move(spec), p);
    }
    auto problems = validate_world_spec(spec);
    if (!problems.empty()) throw std::invalid_argument("world spec: " + problems.front());
    return spec;
}

nlohmann::json world_spec_to_json(const WorldSpec& spec) {
    nlohmann::json j;
    j["vocab"] = {{"objects", spec.vocab.object_names()},
                  {"predicates", spec.vocab.predicate_names()}};
    j["n_scenes"] = spec.n_scenes;
    j["min_objects"] = spec.min_objects;
    j["max_objects"] = spec.max_objects;
    j["min_box"] = spec.min_box;
    j["max_box"] = spec.max_box;
    j["description_drop"] = spec.description_drop;
    j["filler_noise"] = spec.filler_noise;
    j["feature_dim"] = spec.feature_dim;
    j["feature_noise_sigma"] = spec.feature_noise_sigma;
    j["seed"] = spec.seed;
    auto semantic = nlohmann::json::array();
    for (const auto& r : spec.semantic)
        semantic.push_back({{"head", spec.vocab.object_name(r.head_cls)},
                            {"pred", spec.vocab.predicate_name(r.pred)},
                            {"tail", spec.vocab.object_name(r.tail_cls)},
                            {"prob", r.prob}});
    j["semantic_rules"] = semantic;
    auto geometric = nlohmann::json::array();
    for (const auto& r : spec.geometric)
        geometric.push_back({{"pred", spec.vocab.predicate_name(r.pred)},
                             {"kind", geom_kind_name(r.kind)},
                             {"param", r.param},
                             {"prob", r.prob}});
    j["geometric_rules"] = geometric;
    if (!spec.class_weights.empty()) {
        nlohmann::json weights;
        for (int c = 0; c < int(spec.class_weights.size()); ++c)
            weights[spec.vocab.object_name(c)] = spec.class_weights[size_t(c)];
        j["class_weights"] = weights;
    }
    if (spec.holdout)
        j["holdout"] = {{"head", spec.vocab.object_name(spec.holdout->head_cls)},
                        {"pred", spec.vocab.predicate_name(spec.holdout->pred)},
                        {"tail", spec.vocab.object_name(spec.holdout->tail_cls)},
                        {"min_text_instances", spec.holdout->min_text_instances}};
    return j;
}

}  // namespace sgtext::worldgen
