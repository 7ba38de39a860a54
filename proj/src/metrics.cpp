#include "gnom/metrics.hpp"

#include "gnom/common.hpp"

namespace gnom {

Metrics compute_metrics(const std::vector<LabelSet>& preds, const std::vector<LabelSet>& golds,
                        int num_classes) {
    if (preds.size() != golds.size()) throw Error::data("metrics: prediction/gold length mismatch");
    if (preds.empty()) throw Error::data("metrics: empty inputs");

    Metrics m;
    m.per_class.resize(static_cast<size_t>(num_classes));
    for (size_t i = 0; i < preds.size(); ++i) {
        for (int c = 0; c < num_classes; ++c) {
            bool p = preds[i].has(c);
            bool g = golds[i].has(c);
            auto& cm = m.per_class[static_cast<size_t>(c)];
            if (p && g) cm.tp++;
            else if (p && !g) cm.fp++;
            else if (!p && g) cm.fn++;
        }
    }
    double weighted = 0.0;
    for (auto& cm : m.per_class) {
        cm.support = cm.tp + cm.fn;
        cm.precision = cm.tp + cm.fp > 0 ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp) : 0.0;
        cm.recall = cm.support > 0 ? static_cast<double>(cm.tp) / static_cast<double>(cm.support) : 0.0;
        cm.f1 = cm.precision + cm.recall > 0 ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall) : 0.0;
        m.total_support += cm.support;
        weighted += static_cast<double>(cm.support) * cm.f1;
    }
    m.weighted_f1 = m.total_support > 0 ? weighted / static_cast<double>(m.total_support) : 0.0;
    return m;
}

double weighted_f1(const std::vector<LabelSet>& preds, const std::vector<LabelSet>& golds, int num_classes) {
    return compute_metrics(preds, golds, num_classes).weighted_f1;
}

LabelSet predict_from_logits(const std::vector<double>& logits, TaskType task) {
    LabelSet out;
    out.task_type = task;
    if (task == TaskType::multilabel) {
        for (size_t c = 0; c < logits.size(); ++c)
            if (logits[c] > 0.0) out.values.push_back(static_cast<int>(c));  // sigmoid(z) > 0.5 <=> z > 0
    } else {
        size_t best = 0;
        for (size_t c = 1; c < logits.size(); ++c)
            if (logits[c] > logits[best]) best = c;
        out.values.push_back(static_cast<int>(best));
    }
    return out;
}

}  // namespace gnom
