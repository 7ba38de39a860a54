#pragma once

#include <iosfwd>
#include <optional>

#include "gnom/metrics.hpp"
#include "gnom/model.hpp"

namespace gnom {

struct TrainConfig {
    Mode mode = Mode::GNOM;
    double lr = 1e-5;
    int epochs = 30;
    int batch_size = 32;
    std::vector<uint64_t> seeds = {1, 2, 3};
    double tau = 0.5;
    int window = 5;
    std::vector<double> fractions = {0.5, 0.25, 0.10};

    void validate() const;
};

// softmax cross-entropy for binary/multiclass, mean per-class BCE for multilabel
engine::Tensor compute_loss(const engine::Tensor& logits, const LabelSet& labels, TaskType task);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_f1 = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = -1;  // 0-based; earliest epoch on ties
    double best_val_f1 = 0.0;
    std::vector<std::vector<double>> init_values;  // parameters before step 1
};

// Mini-batch Adam with per-epoch validation; parameters end at the
// best-validation epoch. Deterministic given seed.
TrainResult train(ModelContext& m, const TrainConfig& cfg, const Dataset& train_ds, const Dataset& val_ds,
                  const Vocabulary& vocab, uint64_t seed);

Metrics evaluate(ModelContext& m, const Vocabulary& vocab, const Dataset& ds);

struct ReportRow {
    Mode mode;
    double fraction = 1.0;
    uint64_t seed = 0;
    std::string split = "test";
    double weighted_f1 = 0.0;
    Metrics metrics;
    int best_epoch = -1;
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
    std::string config_hash;
    std::string graph_stats;

    double mean(Mode mode, double fraction = 1.0) const;
    void write_tsv(const std::string& path) const;
    void write_json(const std::string& path) const;
    void print_table(std::ostream& os) const;
};

// Everything a grid run needs. Graphs are chosen per mode: full graph for
// TR_GF/GNOM, cooccurrence-only for TR_GF_ME_IE, none for TR.
struct ExperimentSetup {
    const Vocabulary* vocab = nullptr;
    const Dataset* train = nullptr;
    const Dataset* val = nullptr;
    const Dataset* test = nullptr;
    const WordGraph* graph_full = nullptr;
    const WordGraph* graph_cooc = nullptr;
    const EmbeddingTable* tr_embed_source = nullptr;
    ModelConfig model;
    TrainConfig train_cfg;
    std::vector<Mode> modes = {Mode::TR, Mode::TR_GF, Mode::TR_GF_ME_IE, Mode::GNOM};
    std::string config_hash;
    int jobs = 1;
};

ExperimentReport run_ablation(const ExperimentSetup& setup);
ExperimentReport run_limited_supervision(const ExperimentSetup& setup, const std::vector<double>& fractions);

}  // namespace gnom
