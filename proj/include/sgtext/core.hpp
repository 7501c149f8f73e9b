#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sgtext/tensor.hpp"

namespace sgtext::core {

// Unit-square normalized coordinates; y grows downward (image convention).
struct BoundingBox {
    Real x = 0;
    Real y = 0;
    Real w = 0;
    Real h = 0;
};

// head/tail are per-scene object ids, pred is a predicate class index.
struct Triple {
    int head = 0;
    int pred = 0;
    int tail = 0;
    auto operator<=>(const Triple&) const = default;
};

struct SceneObject {
    int cls = 0;
    BoundingBox box;
};

struct SceneGraph {
    std::string id;
    std::string split;  // "parallel" | "text" | "test" | ""
    std::vector<SceneObject> objects;
    std::vector<Triple> triples;
    std::string text;
    Tensor features;  // one row per object; 0x0 when not cached

    bool has_features() const { return features.rows > 0; }
};

// Two ordered name lists with bijective name<->index maps. The predicate list
// holds real predicates only; background() is the extra class index used for
// unannotated slots (it has no name and never appears in data files).
class ClassVocab {
public:
    ClassVocab() = default;
    ClassVocab(std::vector<std::string> object_names, std::vector<std::string> predicate_names);

    int n_objects() const { return int(object_names_.size()); }
    int n_predicates() const { return int(predicate_names_.size()); }
    int background() const { return n_predicates(); }

    const std::string& object_name(int id) const;
    const std::string& predicate_name(int id) const;
    int object_id(const std::string& name) const;     // throws if absent
    int predicate_id(const std::string& name) const;  // throws if absent
    int find_object(const std::string& name) const;     // -1 if absent
    int find_predicate(const std::string& name) const;  // -1 if absent

    const std::vector<std::string>& object_names() const { return object_names_; }
    const std::vector<std::string>& predicate_names() const { return predicate_names_; }

private:
    std::vector<std::string> object_names_;
    std::vector<std::string> predicate_names_;
    std::map<std::string, int> object_ids_;
    std::map<std::string, int> predicate_ids_;
};

// Bipartite object/predicate-slot adjacency. slot_pairs[s] = (head, tail).
// build_srg_topology produces the fully connected layout with the canonical
// slot order (head-major, tails skipping the head); fragment graphs built from
// triples fill slot_pairs directly and must not call slot().
struct SrgTopology {
    int n_objects = 0;
    std::vector<std::pair<int, int>> slot_pairs;

    int n_slots() const { return int(slot_pairs.size()); }
    // Canonical-layout lookup; requires the full n(n-1) topology.
    int slot(int head, int tail) const;
};

SrgTopology build_srg_topology(int n_objects);

// Collects every invariant violation; empty result means the graph is valid.
std::vector<std::string> validate_scene_graph(const SceneGraph& g, const ClassVocab& v);

struct Dataset {
    std::vector<SceneGraph> scenes;

    std::vector<const SceneGraph*> split(const std::string& name) const;
    bool ids_unique() const;
};

// JSON-lines, one scene per line, fields in fixed order:
// {"id","split","objects":[{"class","box":[x,y,w,h]}],"triples":[[h,p,t]],"text"}
// plus optional "features" (base64 of row-major little-endian doubles).
void save_dataset_jsonl(const Dataset& d, const std::string& path);
Dataset load_dataset_jsonl(const std::string& path);

void save_vocab_json(const ClassVocab& v, const std::string& path);
ClassVocab load_vocab_json(const std::string& path);

std::string base64_encode(const uint8_t* data, size_t len);
std::vector<uint8_t> base64_decode(const std::string& s);

std::string features_to_base64(const Tensor& t);
Tensor features_from_base64(const std::string& s, int rows);

}  // namespace sgtext::core
