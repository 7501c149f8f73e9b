#pragma once

#include <array>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgtext/core.hpp"

namespace sgtext::textgraph {

// (head, predicate, tail) surface strings, lowercase.
using Fact = std::array<std::string, 3>;

struct SymbolicGraph {
    std::set<Fact> facts;

    bool operator==(const SymbolicGraph&) const = default;
};

// Token stream over {field strings, "SEP", "EOF"}. A field may contain spaces
// ("ski slope" is one token); from_string regroups words between separators.
struct FactSequence {
    std::vector<std::string> tokens;

    bool operator==(const FactSequence&) const = default;
};

struct ParseError : std::runtime_error {
    int position;  // token index the error refers to

    ParseError(int pos, const std::string& msg)
        : std::runtime_error("token " + std::to_string(pos) + ": " + msg), position(pos) {}
};

// Emits "h SEP p SEP t EOF" per fact, facts in lexicographic order.
FactSequence serialize(const SymbolicGraph& g);
// Inverse of serialize up to order and duplicates; throws ParseError on
// malformed input (wrong separator count, empty fields, trailing fragments).
SymbolicGraph parse(const FactSequence& seq);

std::string to_string(const FactSequence& seq);
FactSequence from_string(const std::string& s);

// Greedy longest-match tokenization against vocab surface forms (multi-word
// allowed, unknown words skipped), then a linear chaining pass: each
// object-predicate-object run emits a fact and the tail becomes the next head.
SymbolicGraph extract_rules(const std::string& text, const core::ClassVocab& vocab);

class Extractor {
public:
    virtual ~Extractor() = default;
    virtual SymbolicGraph extract(const std::string& text, const core::ClassVocab& vocab) const = 0;
    virtual std::string name() const = 0;
};

// Currently only "rules"; throws on unknown names.
std::unique_ptr<Extractor> make_extractor(const std::string& name);

struct Prf {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

// Exact-match fact sets. Both empty -> (1,1,1); empty predicted -> P=0.
Prf extraction_prf(const SymbolicGraph& predicted, const SymbolicGraph& reference);

// Class-level view of an instance graph: object ids replaced by class names.
SymbolicGraph class_level_facts(const core::SceneGraph& g, const core::ClassVocab& vocab);

// Seq2seq-style training prefix kept in corpus files for compatibility.
inline const std::string kTaskPrefix = "make graph: ";

struct CorpusLine {
    std::string text;                   // includes kTaskPrefix in files
    std::optional<std::string> graph;   // serialized FactSequence string
};

void save_corpus_jsonl(const std::vector<CorpusLine>& lines, const std::string& path);
std::vector<CorpusLine> load_corpus_jsonl(const std::string& path);

}  // namespace sgtext::textgraph
