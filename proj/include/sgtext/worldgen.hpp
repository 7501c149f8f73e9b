#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgtext/core.hpp"
#include "sgtext/features.hpp"

namespace sgtext::worldgen {

enum class GeomKind { above, below, left_of, right_of, inside, near, larger_than };

std::string geom_kind_name(GeomKind k);
GeomKind parse_geom_kind(const std::string& name);  // throws on unknown names

// Spatial test on a pair of unit-square boxes (y grows downward). param feeds
// the kinds that take one: near = max center distance (default 0.2),
// larger_than = area ratio (default 2). The overlap kinds require strictly
// positive overlap on the perpendicular axis.
bool geom_holds(GeomKind kind, const core::BoundingBox& head, const core::BoundingBox& tail,
                Real param = 0);

struct GeometricRule {
    GeomKind kind = GeomKind::above;
    int pred = 0;
    Real param = 0;       // 0 -> kind default
    Real prob = Real(1);  // labeling coin flip once the condition holds
};

struct SemanticRule {
    int head_cls = 0;
    int pred = 0;
    int tail_cls = 0;
    Real prob = Real(1);
};

// Class-level triple suppressed in the parallel split so the model can only
// learn it from text.
struct HoldoutPattern {
    int head_cls = 0;
    int pred = 0;
    int tail_cls = 0;
    int min_text_instances = 1;
};

struct WorldSpec {
    core::ClassVocab vocab;
    // Semantic rules are tried before geometry so class-determined relations
    // are not crowded out by the dense spatial rules; within each list the
    // first rule that fires wins, and a pair gets at most one triple.
    std::vector<SemanticRule> semantic;
    std::vector<GeometricRule> geometric;
    int n_scenes = 100;
    int min_objects = 3;
    int max_objects = 8;
    Real min_box = Real(0.05);
    Real max_box = Real(0.35);
    std::vector<Real> class_weights;  // empty -> uniform; else one weight per object class
    Real description_drop = 0;        // chance a triple's sentence is omitted from the text
    Real filler_noise = 0;            // chance a kept sentence gets a filler word
    int feature_dim = 32;
    Real feature_noise_sigma = Real(0.2);
    uint64_t seed = 0;
    std::optional<HoldoutPattern> holdout;
};

// Desk-scale default: 20 object classes, 10 predicates, spatial rules for the
// seven geometric predicates and a compatibility table for the rest.
WorldSpec builtin_world();

// Empty result means the spec is usable.
std::vector<std::string> validate_world_spec(const WorldSpec& spec);

// Labels every ordered pair: first matching semantic rule, else first holding
// geometric rule. prob endpoints (0 and 1) skip the coin flip, so prob-0 rules
// are exact no-ops on the draw stream.
std::vector<core::Triple> label_pairs(const WorldSpec& spec,
                                      const std::vector<core::SceneObject>& objects, Rng& rng);

// Noise-free template rendering: "a {head} {predicate} a {tail}" joined with
// " and ", triples in order.
std::string render_plain(const core::ClassVocab& vocab,
                         const std::vector<core::SceneObject>& objects,
                         const std::vector<core::Triple>& triples);

// Objects + boxes + triples + text + cached features, deterministic in
// (spec.seed, index). Text noise draws from a stream separate from the
// structure draws, so drop/filler settings never change the graph.
core::SceneGraph generate_scene(const WorldSpec& spec, int index);

// spec.n_scenes scenes with ids s00000..; validates the spec once.
core::Dataset generate_world(const WorldSpec& spec);

// Feature generator implied by the spec (shared by generation and inference).
features::FeatureGenConfig feature_gen(const WorldSpec& spec);

struct SplitSpec {
    Real parallel_fraction = Real(0.01);
    Real test_fraction = Real(0.2);
    uint64_t seed = 0;
};

SplitSpec split_spec_from_json(const nlohmann::json& j);

struct SplitOutcome {
    // Scenes in original order with split labels; text scenes keep only id,
    // split and text.
    core::Dataset dataset;
    // Pre-strip copies of the text scenes (graph fine-tuning ablations need
    // their ground-truth graphs; the emitted dataset does not).
    std::vector<core::SceneGraph> text_full;
};

// Shuffles, carves test then parallel by rounded fractions (each within one
// scene of the request), strips text scenes. With spec.holdout set, parallel
// graphs drop matching triples (text re-rendered plain) and the text / test
// sets must contain the required instances.
SplitOutcome make_splits(const core::Dataset& all, const WorldSpec& world, const SplitSpec& split);

// Records the held-out pattern after checking the spec can generate it.
WorldSpec holdout_relation(WorldSpec spec, const HoldoutPattern& pattern);

int pattern_instances(const core::SceneGraph& g, const HoldoutPattern& p);

// Strict parser: unknown keys and unknown class or kind names throw. A config
// that supplies "vocab" starts from an empty rule set instead of the builtin
// defaults.
WorldSpec world_spec_from_json(const nlohmann::json& j);

// Complete serialization; world_spec_from_json(world_spec_to_json(s)) == s.
nlohmann::json world_spec_to_json(const WorldSpec& spec);

}  // namespace sgtext::worldgen
