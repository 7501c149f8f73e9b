#include "sgtext/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace sgtext::core {

static std::map<std::string, int> index_names(const std::vector<std::string>& names,
                                              const char* kind) {
    std::map<std::string, int> ids;
    for (size_t i = 0; i < names.size(); ++i) {
        if (names[i].empty()) throw std::invalid_argument(std::string(kind) + " name empty");
        auto [_, fresh] = ids.emplace(names[i], int(i));
        if (!fresh) throw std::invalid_argument(std::string(kind) + " name duplicated: " + names[i]);
    }
    if (ids.empty()) throw std::invalid_argument(std::string(kind) + " vocabulary empty");
    return ids;
}

ClassVocab::ClassVocab(std::vector<std::string> object_names,
                       std::vector<std::string> predicate_names)
    : object_names_(std::move(object_names)), predicate_names_(std::move(predicate_names)) {
    object_ids_ = index_names(object_names_, "object");
    predicate_ids_ = index_names(predicate_names_, "predicate");
}

const std::string& ClassVocab::object_name(int id) const {
    if (id < 0 || id >= n_objects()) throw std::out_of_range("object class out of range");
    return object_names_[size_t(id)];
}

const std::string& ClassVocab::predicate_name(int id) const {
    if (id < 0 || id >= n_predicates()) throw std::out_of_range("predicate class out of range");
    return predicate_names_[size_t(id)];
}

int ClassVocab::find_object(const std::string& name) const {
    auto it = object_ids_.find(name);
    return it == object_ids_.end() ? -1 : it->second;
}

int ClassVocab::find_predicate(const std::string& name) const {
    auto it = predicate_ids_.find(name);
    return it == predicate_ids_.end() ? -1 : it->second;
}

int ClassVocab::object_id(const std::string& name) const {
    int id = find_object(name);
    if (id < 0) throw std::out_of_range("unknown object class: " + name);
    return id;
}

int ClassVocab::predicate_id(const std::string& name) const {
    int id = find_predicate(name);
    if (id < 0) throw std::out_of_range("unknown predicate class: " + name);
    return id;
}

int SrgTopology::slot(int head, int tail) const {
    if (head == tail) throw std::invalid_argument("slot requires head != tail");
    if (n_slots() != n_objects * (n_objects - 1)) {
        throw std::logic_error("slot() needs the fully connected topology");
    }
    if (head < 0 || head >= n_objects || tail < 0 || tail >= n_objects) {
        throw std::out_of_range("slot endpoint out of range");
    }
    return head * (n_objects - 1) + (tail < head ? tail : tail - 1);
}

SrgTopology build_srg_topology(int n_objects) {
    if (n_objects < 2) throw std::invalid_argument("degenerate scene");
    SrgTopology t;
    t.n_objects = n_objects;
    t.slot_pairs.reserve(size_t(n_objects) * size_t(n_objects - 1));
    for (int i = 0; i < n_objects; ++i) {
        for (int j = 0; j < n_objects; ++j) {
            if (i != j) t.slot_pairs.emplace_back(i, j);
        }
    }
    return t;
}

std::vector<std::string> validate_scene_graph(const SceneGraph& g, const ClassVocab& v) {
    std::vector<std::string> out;
    int n = int(g.objects.size());
    for (int i = 0; i < n; ++i) {
        const auto& o = g.objects[size_t(i)];
        if (o.cls < 0 || o.cls >= v.n_objects()) {
            out.push_back("object " + std::to_string(i) + ": class out of range");
        }
        const auto& b = o.box;
        if (!(b.w > 0) || !(b.h > 0)) {
            out.push_back("object " + std::to_string(i) + ": non-positive box size");
        }
        if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.w) ||
            !std::isfinite(b.h)) {
            out.push_back("object " + std::to_string(i) + ": non-finite box");
        }
    }
    std::set<Triple> seen;
    for (size_t k = 0; k < g.triples.size(); ++k) {
        const Triple& t = g.triples[k];
        std::string at = "triple " + std::to_string(k) + ": ";
        if (t.head < 0 || t.head >= n || t.tail < 0 || t.tail >= n) {
            out.push_back(at + "dangling endpoint");
        }
        if (t.head == t.tail) out.push_back(at + "self loop");
        if (t.pred < 0 || t.pred >= v.n_predicates()) out.push_back(at + "predicate out of range");
        if (!seen.insert(t).second) out.push_back(at + "duplicate");
    }
    if (g.has_features() && g.features.rows != n) {
        out.push_back("feature rows do not match object count");
    }
    return out;
}

std::vector<const SceneGraph*> Dataset::split(const std::string& name) const {
    std::vector<const SceneGraph*> out;
    for (const auto& s : scenes) {
        if (s.split == name) out.push_back(&s);
    }
    return out;
}

bool Dataset::ids_unique() const {
    std::set<std::string> ids;
    for (const auto& s : scenes) {
        if (!ids.insert(s.id).second) return false;
    }
    return true;
}

// --------------------------------------------------------------------------
// base64 (RFC 4648, with padding)

static const char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const uint8_t* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 3 <= len; i += 3) {
        uint32_t v = uint32_t(data[i]) << 16 | uint32_t(data[i + 1]) << 8 | data[i + 2];
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += kB64[(v >> 6) & 63];
        out += kB64[v & 63];
    }
    size_t rem = len - i;
    if (rem == 1) {
        uint32_t v = uint32_t(data[i]) << 16;
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += "==";
    } else if (rem == 2) {
        uint32_t v = uint32_t(data[i]) << 16 | uint32_t(data[i + 1]) << 8;
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += kB64[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::vector<uint8_t> base64_decode(const std::string& s) {
    static int inv[256];
    static bool ready = false;
    if (!ready) {
        std::fill(std::begin(inv), std::end(inv), -1);
        for (int i = 0; i < 64; ++i) inv[uint8_t(kB64[i])] = i;
        ready = true;
    }
    if (s.size() % 4 != 0) throw std::invalid_argument("base64 length not a multiple of 4");
    std::vector<uint8_t> out;
    out.reserve(s.size() / 4 * 3);
    for (size_t i = 0; i < s.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            char c = s[i + k];
            if (c == '=') {
                if (i + 4 != s.size() || k < 2) throw std::invalid_argument("bad base64 padding");
                vals[k] = 0;
                ++pad;
            } else {
                vals[k] = inv[uint8_t(c)];
                if (vals[k] < 0) throw std::invalid_argument("bad base64 character");
                if (pad > 0) throw std::invalid_argument("bad base64 padding");
            }
        }
        uint32_t v = uint32_t(vals[0]) << 18 | uint32_t(vals[1]) << 12 | uint32_t(vals[2]) << 6 |
                     uint32_t(vals[3]);
        out.push_back(uint8_t(v >> 16));
        if (pad < 2) out.push_back(uint8_t(v >> 8));
        if (pad < 1) out.push_back(uint8_t(v));
    }
    return out;
}

std::string features_to_base64(const Tensor& t) {
    static_assert(sizeof(Real) == 8, "feature cache assumes 64-bit scalars");
    return base64_encode(reinterpret_cast<const uint8_t*>(t.v.data()), t.v.size() * sizeof(Real));
}

Tensor features_from_base64(const std::string& s, int rows) {
    std::vector<uint8_t> bytes = base64_decode(s);
    if (rows <= 0 || bytes.size() % (size_t(rows) * sizeof(Real)) != 0) {
        throw std::invalid_argument("feature blob size does not divide by rows");
    }
    int cols = int(bytes.size() / sizeof(Real) / size_t(rows));
    Tensor t(rows, cols);
    std::memcpy(t.v.data(), bytes.data(), bytes.size());
    return t;
}

// --------------------------------------------------------------------------
// dataset JSONL

void save_dataset_jsonl(const Dataset& d, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    for (const auto& s : d.scenes) {
        nlohmann::ordered_json j;
        j["id"] = s.id;
        j["split"] = s.split;
        nlohmann::ordered_json objs = nlohmann::ordered_json::array();
        for (const auto& o : s.objects) {
            nlohmann::ordered_json jo;
            jo["class"] = o.cls;
            jo["box"] = {o.box.x, o.box.y, o.box.w, o.box.h};
            objs.push_back(jo);
        }
        j["objects"] = objs;
        nlohmann::ordered_json trips = nlohmann::ordered_json::array();
        for (const auto& t : s.triples) trips.push_back({t.head, t.pred, t.tail});
        j["triples"] = trips;
        j["text"] = s.text;
        if (s.has_features()) j["features"] = features_to_base64(s.features);
        os << j.dump() << "\n";
    }
}

Dataset load_dataset_jsonl(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    Dataset d;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        SceneGraph s;
        s.id = j.at("id").get<std::string>();
        s.split = j.value("split", std::string());
        for (const auto& jo : j.at("objects")) {
            SceneObject o;
            o.cls = jo.at("class").get<int>();
            const auto& b = jo.at("box");
            o.box = {b.at(0).get<Real>(), b.at(1).get<Real>(), b.at(2).get<Real>(),
                     b.at(3).get<Real>()};
            s.objects.push_back(o);
        }
        for (const auto& jt : j.at("triples")) {
            s.triples.push_back({jt.at(0).get<int>(), jt.at(1).get<int>(), jt.at(2).get<int>()});
        }
        s.text = j.value("text", std::string());
        if (j.contains("features")) {
            s.features = features_from_base64(j["features"].get<std::string>(),
                                              int(s.objects.size()));
        }
        d.scenes.push_back(std::move(s));
    }
    return d;
}

void save_vocab_json(const ClassVocab& v, const std::string& path) {
    nlohmann::ordered_json j;
    j["objects"] = v.object_names();
    j["predicates"] = v.predicate_names();
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << j.dump(2) << "\n";
}

ClassVocab load_vocab_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    nlohmann::json j = nlohmann::json::parse(is);
    return ClassVocab(j.at("objects").get<std::vector<std::string>>(),
                      j.at("predicates").get<std::vector<std::string>>());
}

}  // namespace sgtext::core
