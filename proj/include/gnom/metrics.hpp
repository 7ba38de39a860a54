#pragma once

#include <vector>

#include "gnom/corpus.hpp"

namespace gnom {

struct ClassMetrics {
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int64_t support = 0;  // gold occurrences
};

struct Metrics {
    double weighted_f1 = 0.0;
    std::vector<ClassMetrics> per_class;
    int64_t total_support = 0;
};

// One-vs-rest confusion counts per class; weighted F1 = sum support_c * F1_c /
// sum support_c. Zero-support classes carry zero weight.
Metrics compute_metrics(const std::vector<LabelSet>& preds, const std::vector<LabelSet>& golds,
                        int num_classes);

double weighted_f1(const std::vector<LabelSet>& preds, const std::vector<LabelSet>& golds, int num_classes);

// argmax for binary/multiclass (ties -> lowest index); sigmoid > 0.5 per class
// for multilabel (empty prediction allowed)
LabelSet predict_from_logits(const std::vector<double>& logits, TaskType task);

}  // namespace gnom
