#pragma once

#include "sgtext/core.hpp"
#include "sgtext/tensor.hpp"

namespace sgtext::evalx {

enum class Task { SGCls, PredCls, ObjCls };
enum class Setup { Constrained, Unconstrained };

std::string task_name(Task t);
std::string setup_name(Setup s);
Task parse_task(const std::string& s);    // throws invalid_argument
Setup parse_setup(const std::string& s);  // throws invalid_argument

struct Candidate {
    int head = 0;
    int head_cls = 0;
    int pred = 0;
    int tail = 0;
    int tail_cls = 0;
    Real score = 0;
};

// Candidates sorted by descending score; equal scores keep (pair, predicate)
// enumeration order.
struct RankedPrediction {
    std::vector<Candidate> candidates;
};

// Scores are probability products p(head class) * p(predicate) * p(tail
// class). PredCls takes the classes from gt_obj_classes with factor 1; SGCls
// uses each object's argmax class and probability. The background predicate
// is never a candidate. Constrained keeps the top predicate per ordered pair,
// unconstrained keeps all real predicates.
RankedPrediction rank_triples(const Tensor& obj_probs, const Tensor& slot_probs,
                              const core::SrgTopology& topo, Task task, Setup setup,
                              const std::vector<int>& gt_obj_classes = {});

// SGCls matches (head id, head class, predicate, tail id, tail class);
// PredCls matches (head id, predicate, tail id).
bool candidate_matches(const Candidate& c, const core::Triple& t, const core::SceneGraph& gt,
                       Task task);

// |top-K hits| / |GT| for one scene. Throws on empty GT or K < 1.
Real scene_recall(const RankedPrediction& pred, const core::SceneGraph& gt, Task task, int K);

struct RecallResult {
    Real value = 0;
    int n_scenes = 0;     // scenes that entered the average
    int skipped_empty = 0;
};

// Mean per-scene recall; scenes with empty GT are skipped and counted.
RecallResult dataset_recall(const std::vector<RankedPrediction>& preds,
                            const std::vector<const core::SceneGraph*>& gts, Task task, int K);

// Per predicate class: mean over scenes containing that class of the scene's
// class-restricted recall; then the unweighted mean over present classes.
// Collapses to dataset_recall when only one predicate class occurs.
RecallResult dataset_mean_recall(const std::vector<RankedPrediction>& preds,
                                 const std::vector<const core::SceneGraph*>& gts, Task task,
                                 int K);

// Fraction of objects whose argmax class (lowest index wins ties) is correct.
Real objcls_top1(const std::vector<Tensor>& obj_probs,
                 const std::vector<const core::SceneGraph*>& gts);

struct ClassRow {
    std::string name;
    int support = 0;
    Real recall = 0;
};

// One row per predicate class present in GT: support and class-restricted
// recall at K, in class-index order.
std::vector<ClassRow> predicate_class_report(const std::vector<RankedPrediction>& preds,
                                             const std::vector<const core::SceneGraph*>& gts,
                                             Task task, int K, const core::ClassVocab& vocab);

// One row per object class present in GT: support and top-1 accuracy.
std::vector<ClassRow> object_class_report(const std::vector<Tensor>& obj_probs,
                                          const std::vector<const core::SceneGraph*>& gts,
                                          const core::ClassVocab& vocab);

void save_class_report_csv(const std::vector<ClassRow>& rows, const std::string& path);

struct MetricsEntry {
    std::string task;   // "SGCls", "PredCls", "ObjCls"; mean-recall entries append "-mR"
    std::string setup;  // "constrained", "unconstrained", or "-" for ObjCls
    int K = 0;
    Real value = 0;
    int n_scenes = 0;
};

std::string metrics_json_string(const std::vector<MetricsEntry>& entries);
void save_metrics_json(const std::vector<MetricsEntry>& entries, const std::string& path);

// Prediction interchange: one line per scene,
// {"id": ..., "candidates": [[head, head_cls, pred, tail, tail_cls, score], ...]}.
void save_predictions_jsonl(const std::vector<std::pair<std::string, RankedPrediction>>& preds,
                            const std::string& path);
std::vector<std::pair<std::string, RankedPrediction>> load_predictions_jsonl(
    const std::string& path);

}  // namespace sgtext::evalx
