#include "sgtext/evalx.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace sgtext::evalx {

std::string task_name(Task t) {
    switch (t) {
        case Task::SGCls: return "SGCls";
        case Task::PredCls: return "PredCls";
        case Task::ObjCls: return "ObjCls";
    }
    throw std::logic_error("task_name: bad enum");
}

std::string setup_name(Setup s) {
    return s == Setup::Constrained ? "constrained" : "unconstrained";
}

Task parse_task(const std::string& s) {
    if (s == "SGCls") return Task::SGCls;
    if (s == "PredCls") return Task::PredCls;
    if (s == "ObjCls") return Task::ObjCls;
    throw std::invalid_argument("unknown task: " + s);
}

Setup parse_setup(const std::string& s) {
    if (s == "constrained") return Setup::Constrained;
    if (s == "unconstrained") return Setup::Unconstrained;
    throw std::invalid_argument("unknown setup: " + s);
}

namespace {

int argmax_row(const Tensor& t, int r) {
    int best = 0;
    for (int j = 1; j < t.cols; ++j)
        if (t.at(r, j) > t.at(r, best)) best = j;
    return best;
}

}  // namespace

RankedPrediction rank_triples(const Tensor& obj_probs, const Tensor& slot_probs,
                              const core::SrgTopology& topo, Task task, Setup setup,
                              const std::vector<int>& gt_obj_classes) {
    if (task == Task::ObjCls) throw std::invalid_argument("rank_triples: ObjCls does not rank");
    if (obj_probs.rows != topo.n_objects ||
        slot_probs.rows != static_cast<int>(topo.slot_pairs.size()))
        throw std::invalid_argument("rank_triples: shape mismatch with topology");
    if (task == Task::PredCls &&
        static_cast<int>(gt_obj_classes.size()) != topo.n_objects)
        throw std::invalid_argument("rank_triples: PredCls needs ground-truth classes");
    const int n_pred = slot_probs.cols - 1;  // trailing background column is never emitted
    if (n_pred < 1) throw std::invalid_argument("rank_triples: no real predicate classes");

    RankedPrediction out;
    for (int s = 0; s < static_cast<int>(topo.slot_pairs.size()); ++s) {
        const auto [h, t] = topo.slot_pairs[static_cast<size_t>(s)];
        int h_cls, t_cls;
        Real h_p, t_p;
        if (task == Task::PredCls) {
            h_cls = gt_obj_classes[static_cast<size_t>(h)];
            t_cls = gt_obj_classes[static_cast<size_t>(t)];
            h_p = 1;
            t_p = 1;
        } else {
            h_cls = argmax_row(obj_probs, h);
            t_cls = argmax_row(obj_probs, t);
            h_p = obj_probs.at(h, h_cls);
            t_p = obj_probs.at(t, t_cls);
        }

        int first = 0, last = n_pred;
        if (setup == Setup::Constrained) {
            int best = 0;
            for (int p = 1; p < n_pred; ++p)
                if (slot_probs.at(s, p) > slot_probs.at(s, best)) best = p;
            first = best;
            last = best + 1;
        }
        for (int p = first; p < last; ++p) {
            Candidate c;
            c.head = h;
            c.tail = t;
            c.head_cls = h_cls;
            c.tail_cls = t_cls;
            c.pred = p;
            c.score = h_p * slot_probs.at(s, p) * t_p;
            out.candidates.push_back(c);
        }
    }
    // Stable sort keeps (pair, predicate) enumeration order among equal scores.
    std::stable_sort(out.candidates.begin(), out.candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    return out;
}

bool candidate_matches(const Candidate& c, const core::Triple& t, const core::SceneGraph& gt,
                       Task task) {
    if (c.head != t.head || c.tail != t.tail || c.pred != t.pred) return false;
    if (task == Task::PredCls) return true;
    return c.head_cls == gt.objects[static_cast<size_t>(t.head)].cls &&
           c.tail_cls == gt.objects[static_cast<size_t>(t.tail)].cls;
}

namespace {

// Hit flags for the scene's GT triples against the top K candidates.
std::vector<char> top_k_hits(const RankedPrediction& pred, const core::SceneGraph& gt, Task task,
                             int K) {
    const size_t limit = std::min(static_cast<size_t>(K), pred.candidates.size());
    std::vector<char> hits(gt.triples.size(), char(0));
    for (size_t g = 0; g < gt.triples.size(); ++g)
        for (size_t i = 0; i < limit; ++i)
            if (candidate_matches(pred.candidates[i], gt.triples[g], gt, task)) {
                hits[g] = 1;
                break;
            }
    return hits;
}

}  // namespace

Real scene_recall(const RankedPrediction& pred, const core::SceneGraph& gt, Task task, int K) {
    if (K < 1) throw std::invalid_argument("scene_recall: K must be >= 1");
    if (gt.triples.empty()) throw std::invalid_argument("scene_recall: empty ground truth");
    const auto hits = top_k_hits(pred, gt, task, K);
    int matched = 0;
    for (char h : hits) matched += h;
    return static_cast<Real>(matched) / static_cast<Real>(gt.triples.size());
}

RecallResult dataset_recall(const std::vector<RankedPrediction>& preds,
                            const std::vector<const core::SceneGraph*>& gts, Task task, int K) {
    if (preds.size() != gts.size())
        throw std::invalid_argument("dataset_recall: prediction/scene count mismatch");
    RecallResult out;
    Real sum = 0;
    for (size_t i = 0; i < gts.size(); ++i) {
        if (gts[i]->triples.empty()) {
            ++out.skipped_empty;
            continue;
        }
        sum += scene_recall(preds[i], *gts[i], task, K);
        ++out.n_scenes;
    }
    out.value = out.n_scenes ? sum / static_cast<Real>(out.n_scenes) : 0;
    return out;
}

RecallResult dataset_mean_recall(const std::vector<RankedPrediction>& preds,
                                 const std::vector<const core::SceneGraph*>& gts, Task task,
                                 int K) {
    if (preds.size() != gts.size())
        throw std::invalid_argument("dataset_mean_recall: prediction/scene count mismatch");
    // Per class: scene-averaged recall over the scenes whose GT contains it.
    std::map<int, std::pair<Real, int>> per_class;  // class -> (recall sum, scene count)
    RecallResult out;
    for (size_t i = 0; i < gts.size(); ++i) {
        const auto& gt = *gts[i];
        if (gt.triples.empty()) {
            ++out.skipped_empty;
            continue;
        }
        ++out.n_scenes;
        const auto hits = top_k_hits(preds[i], gt, task, K);
        std::map<int, std::pair<int, int>> scene_class;  // class -> (hits, total)
        for (size_t g = 0; g < gt.triples.size(); ++g) {
            auto& sc = scene_class[gt.triples[g].pred];
            sc.first += hits[g];
            ++sc.second;
        }
        for (const auto& [cls, counts] : scene_class) {
            auto& agg = per_class[cls];
            agg.first += static_cast<Real>(counts.first) / static_cast<Real>(counts.second);
            ++agg.second;
        }
    }
    if (!per_class.empty()) {
        Real sum = 0;
        for (const auto& [cls, agg] : per_class) sum += agg.first / static_cast<Real>(agg.second);
        out.value = sum / static_cast<Real>(per_class.size());
    }
    return out;
}

Real objcls_top1(const std::vector<Tensor>& obj_probs,
                 const std::vector<const core::SceneGraph*>& gts) {
    if (obj_probs.size() != gts.size())
        throw std::invalid_argument("objcls_top1: prediction/scene count mismatch");
    long long correct = 0, total = 0;
    for (size_t i = 0; i < gts.size(); ++i) {
        const auto& gt = *gts[i];
        if (obj_probs[i].rows != static_cast<int>(gt.objects.size()))
            throw std::invalid_argument("objcls_top1: row count mismatch in scene " + gt.id);
        for (int o = 0; o < obj_probs[i].rows; ++o) {
            if (argmax_row(obj_probs[i], o) == gt.objects[static_cast<size_t>(o)].cls) ++correct;
            ++total;
        }
    }
    return total ? static_cast<Real>(correct) / static_cast<Real>(total) : 0;
}

std::vector<ClassRow> predicate_class_report(const std::vector<RankedPrediction>& preds,
                                             const std::vector<const core::SceneGraph*>& gts,
                                             Task task, int K, const core::ClassVocab& vocab) {
    std::map<int, std::pair<Real, int>> per_class;
    std::map<int, int> support;
    for (size_t i = 0; i < gts.size(); ++i) {
        const auto& gt = *gts[i];
        if (gt.triples.empty()) continue;
        const auto hits = top_k_hits(preds[i], gt, task, K);
        std::map<int, std::pair<int, int>> scene_class;
        for (size_t g = 0; g < gt.triples.size(); ++g) {
            auto& sc = scene_class[gt.triples[g].pred];
            sc.first += hits[g];
            ++sc.second;
            ++support[gt.triples[g].pred];
        }
        for (const auto& [cls, counts] : scene_class) {
            auto& agg = per_class[cls];
            agg.first += static_cast<Real>(counts.first) / static_cast<Real>(counts.second);
            ++agg.second;
        }
    }
    std::vector<ClassRow> rows;
    for (const auto& [cls, agg] : per_class) {
        ClassRow row;
        row.name = vocab.predicate_name(cls);
        row.support = support[cls];
        row.recall = agg.first / static_cast<Real>(agg.second);
        rows.push_back(row);
    }
    return rows;
}

std::vector<ClassRow> object_class_report(const std::vector<Tensor>& obj_probs,
                                          const std::vector<const core::SceneGraph*>& gts,
                                          const core::ClassVocab& vocab) {
    std::map<int, std::pair<int, int>> per_class;  // class -> (correct, total)
    for (size_t i = 0; i < gts.size(); ++i) {
        const auto& gt = *gts[i];
        for (int o = 0; o < static_cast<int>(gt.objects.size()); ++o) {
            auto& agg = per_class[gt.objects[static_cast<size_t>(o)].cls];
            if (argmax_row(obj_probs[i], o) == gt.objects[static_cast<size_t>(o)].cls)
                ++agg.first;
            ++agg.second;
        }
    }
    std::vector<ClassRow> rows;
    for (const auto& [cls, agg] : per_class) {
        ClassRow row;
        row.name = vocab.object_name(cls);
        row.support = agg.second;
        row.recall = static_cast<Real>(agg.first) / static_cast<Real>(agg.second);
        rows.push_back(row);
    }
    return rows;
}

void save_class_report_csv(const std::vector<ClassRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "name,support,recall\n";
    for (const auto& row : rows) f << row.name << "," << row.support << "," << row.recall << "\n";
}

std::string metrics_json_string(const std::vector<MetricsEntry>& entries) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        nlohmann::ordered_json obj;
        obj["task"] = e.task;
        obj["setup"] = e.setup;
        obj["K"] = e.K;
        obj["value"] = e.value;
        obj["n_scenes"] = e.n_scenes;
        arr.push_back(obj);
    }
    return arr.dump(2) + "\n";
}

void save_metrics_json(const std::vector<MetricsEntry>& entries, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << metrics_json_string(entries);
}

void save_predictions_jsonl(const std::vector<std::pair<std::string, RankedPrediction>>& preds,
                            const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    for (const auto& [id, pred] : preds) {
        nlohmann::ordered_json obj;
        obj["id"] = id;
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& c : pred.candidates)
            arr.push_back({c.head, c.head_cls, c.pred, c.tail, c.tail_cls, c.score});
        obj["candidates"] = arr;
        f << obj.dump() << "\n";
    }
}

std::vector<std::pair<std::string, RankedPrediction>> load_predictions_jsonl(
    const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::vector<std::pair<std::string, RankedPrediction>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        RankedPrediction pred;
        for (const auto& arr : obj.at("candidates")) {
            if (!arr.is_array() || arr.size() != 6)
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": candidate must have 6 fields");
            Candidate c;
            c.head = arr[0].get<int>();
            c.head_cls = arr[1].get<int>();
            c.pred = arr[2].get<int>();
            c.tail = arr[3].get<int>();
            c.tail_cls = arr[4].get<int>();
            c.score = arr[5].get<Real>();
            pred.candidates.push_back(c);
        }
        out.emplace_back(obj.at("id").get<std::string>(), std::move(pred));
    }
    return out;
}

}  // namespace sgtext::evalx
