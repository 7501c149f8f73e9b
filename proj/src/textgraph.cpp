#include "sgtext/textgraph.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sgtext::textgraph {

FactSequence serialize(const SymbolicGraph& g) {
    FactSequence seq;
    for (const Fact& f : g.facts) {  // std::set iterates lexicographically
        for (const std::string& field : f) {
            if (field.empty()) throw std::invalid_argument("empty fact field");
        }
        seq.tokens.push_back(f[0]);
        seq.tokens.push_back("SEP");
        seq.tokens.push_back(f[1]);
        seq.tokens.push_back("SEP");
        seq.tokens.push_back(f[2]);
        seq.tokens.push_back("EOF");
    }
    return seq;
}

SymbolicGraph parse(const FactSequence& seq) {
    SymbolicGraph g;
    const auto& t = seq.tokens;
    size_t i = 0;
    while (i < t.size()) {
        // One fact: field SEP field SEP field EOF.
        std::array<std::string, 3> fields;
        for (int k = 0; k < 3; ++k) {
            if (i >= t.size()) throw ParseError(int(t.size()), "truncated fact");
            if (t[i] == "SEP" || t[i] == "EOF") {
                throw ParseError(int(i), "expected fact field, got separator");
            }
            if (t[i].empty()) throw ParseError(int(i), "empty fact field");
            fields[size_t(k)] = t[i];
            ++i;
            const char* want = (k < 2) ? "SEP" : "EOF";
            if (i >= t.size()) throw ParseError(int(t.size()), "truncated fact");
            if (t[i] != want) {
                throw ParseError(int(i), std::string("expected ") + want + ", got \"" + t[i] + "\"");
            }
            ++i;
        }
        g.facts.insert(fields);
    }
    return g;
}

std::string to_string(const FactSequence& seq) {
    std::string out;
    for (size_t i = 0; i < seq.tokens.size(); ++i) {
        if (i) out += ' ';
        out += seq.tokens[i];
    }
    return out;
}

FactSequence from_string(const std::string& s) {
    std::istringstream is(s);
    FactSequence seq;
    std::string word, field;
    bool in_field = false;
    auto flush = [&] {
        // Adjacent separators produce an explicit empty token so parse can
        // point at the offending position.
        seq.tokens.push_back(field);
        field.clear();
        in_field = false;
    };
    while (is >> word) {
        if (word == "SEP" || word == "EOF") {
            flush();
            seq.tokens.push_back(word);
        } else {
            if (in_field) field += ' ';
            field += word;
            in_field = true;
        }
    }
    if (in_field) flush();
    return seq;
}

// ---------------------------------------------------------------------------
// rule extractor

namespace {

std::string strip_word(const std::string& w) {
    size_t b = 0, e = w.size();
    while (b < e && !std::isalnum(uint8_t(w[b]))) ++b;
    while (e > b && !std::isalnum(uint8_t(w[e - 1]))) --e;
    std::string out = w.substr(b, e - b);
    for (char& c : out) c = char(std::tolower(uint8_t(c)));
    return out;
}

std::vector<std::string> words_of(const std::string& text) {
    std::istringstream is(text);
    std::vector<std::string> out;
    std::string w;
    while (is >> w) {
        std::string s = strip_word(w);
        if (!s.empty()) out.push_back(s);
    }
    return out;
}

int count_words(const std::string& name) {
    return int(std::count(name.begin(), name.end(), ' ')) + 1;
}

}  // namespace

SymbolicGraph extract_rules(const std::string& text, const core::ClassVocab& vocab) {
    std::string body = text;
    if (body.rfind(kTaskPrefix, 0) == 0) body = body.substr(kTaskPrefix.size());

    int max_span = 1;
    for (const auto& n : vocab.object_names()) max_span = std::max(max_span, count_words(n));
    for (const auto& n : vocab.predicate_names()) max_span = std::max(max_span, count_words(n));

    std::vector<std::string> words = words_of(body);

    // Symbol stream: true = object, false = predicate.
    std::vector<std::pair<bool, std::string>> symbols;
    size_t i = 0;
    while (i < words.size()) {
        int matched = 0;
        bool is_object = false;
        std::string surface;
        std::string candidate;
        for (int span = 1; span <= max_span && i + size_t(span) <= words.size(); ++span) {
            if (span == 1) {
                candidate = words[i];
            } else {
                candidate += ' ';
                candidate += words[i + size_t(span) - 1];
            }
            // Longest match wins; at equal length objects shadow predicates.
            if (vocab.find_object(candidate) >= 0) {
                matched = span;
                is_object = true;
                surface = candidate;
            } else if (vocab.find_predicate(candidate) >= 0) {
                matched = span;
                is_object = false;
                surface = candidate;
            }
        }
        if (matched == 0) {
            ++i;  // unknown word
        } else {
            symbols.emplace_back(is_object, surface);
            i += size_t(matched);
        }
    }

    // Chaining pass: object-predicate-object emits a fact; the tail stays
    // active as the head for a following predicate.
    SymbolicGraph g;
    std::optional<std::string> head;
    std::optional<std::string> pred;
    for (const auto& [is_object, surface] : symbols) {
        if (is_object) {
            if (head && pred) {
                g.facts.insert({*head, *pred, surface});
                head = surface;
                pred.reset();
            } else {
                head = surface;
                pred.reset();
            }
        } else {
            if (head) pred = surface;  // predicate before any object is dropped
        }
    }
    return g;
}

namespace {

class RuleExtractor final : public Extractor {
public:
    SymbolicGraph extract(const std::string& text, const core::ClassVocab& vocab) const override {
        return extract_rules(text, vocab);
    }
    std::string name() const override { return "rules"; }
};

}  // namespace

std::unique_ptr<Extractor> make_extractor(const std::string& name) {
    if (name == "rules") return std::make_unique<RuleExtractor>();
    throw std::invalid_argument("unknown extractor: " + name);
}

Prf extraction_prf(const SymbolicGraph& predicted, const SymbolicGraph& reference) {
    if (predicted.facts.empty() && reference.facts.empty()) return {1, 1, 1};
    size_t hits = 0;
    for (const Fact& f : predicted.facts) hits += reference.facts.count(f);
    Prf r;
    r.precision = predicted.facts.empty() ? 0.0 : double(hits) / double(predicted.facts.size());
    r.recall = reference.facts.empty() ? 0.0 : double(hits) / double(reference.facts.size());
    r.f1 = (r.precision + r.recall) > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall)
                                        : 0.0;
    return r;
}

SymbolicGraph class_level_facts(const core::SceneGraph& g, const core::ClassVocab& vocab) {
    SymbolicGraph out;
    for (const auto& t : g.triples) {
        out.facts.insert({vocab.object_name(g.objects[size_t(t.head)].cls),
                          vocab.predicate_name(t.pred),
                          vocab.object_name(g.objects[size_t(t.tail)].cls)});
    }
    return out;
}

void save_corpus_jsonl(const std::vector<CorpusLine>& lines, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    for (const auto& line : lines) {
        nlohmann::ordered_json j;
        std::string text = line.text;
        if (text.rfind(kTaskPrefix, 0) != 0) text = kTaskPrefix + text;
        j["text"] = text;
        if (line.graph) j["graph"] = *line.graph;
        os << j.dump() << "\n";
    }
}

std::vector<CorpusLine> load_corpus_jsonl(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::vector<CorpusLine> out;
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
        CorpusLine c;
        c.text = j.at("text").get<std::string>();
        if (j.contains("graph")) c.graph = j["graph"].get<std::string>();
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace sgtext::textgraph
