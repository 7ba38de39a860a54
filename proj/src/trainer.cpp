#include "gnom/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "gnom/kernels.hpp"

namespace gnom {

using engine::Tensor;

void TrainConfig::validate() const {
    if (epochs < 1) throw Error::config("TrainConfig: epochs must be >= 1");
    if (seeds.empty()) throw Error::config("TrainConfig: seeds must be non-empty");
    if (batch_size < 1) throw Error::config("TrainConfig: batch_size must be >= 1");
    if (lr <= 0.0) throw Error::config("TrainConfig: lr must be positive");
    for (double f : fractions)
        if (f <= 0.0 || f > 1.0) throw Error::config("TrainConfig: fractions must be in (0,1]");
}

engine::Tensor compute_loss(const engine::Tensor& logits, const LabelSet& labels, TaskType task) {
    if (labels.values.empty()) throw Error::data("compute_loss: empty label set on labeled data");
    if (task == TaskType::multilabel) {
        std::vector<uint8_t> hot(logits.size(), 0);
        for (int v : labels.values) {
            if (v < 0 || static_cast<size_t>(v) >= hot.size())
                throw Error::data("compute_loss: label out of range");
            hot[static_cast<size_t>(v)] = 1;
        }
        return engine::bce_with_logits_mean(logits, std::move(hot));
    }
    return engine::softmax_cross_entropy(logits, labels.values.at(0));
}

namespace {

struct EncodedBatchItem {
    EncodedIds enc;
    LabelSet labels;
};

std::vector<EncodedBatchItem> encode_all(const Vocabulary& vocab, const Dataset& ds, int max_len) {
    std::vector<EncodedBatchItem> out;
    out.reserve(ds.examples.size());
    for (const auto& ex : ds.examples)
        out.push_back({encode_example(vocab, tokenize(ex.text), max_len), ex.labels});
    return out;
}

}  // namespace

TrainResult train(ModelContext& m, const TrainConfig& cfg, const Dataset& train_ds, const Dataset& val_ds,
                  const Vocabulary& vocab, uint64_t seed) {
    cfg.validate();
    if (train_ds.examples.empty()) throw Error::data("train: no training steps possible on an empty train split");
    if (train_ds.split == Split::unlabeled || val_ds.split == Split::unlabeled)
        throw Error::data("train: train/val splits must be labeled");

    auto items = encode_all(vocab, train_ds, m.cfg.tr.max_len);
    Rng rng(fnv1a64("train-" + std::to_string(seed)));
    engine::AdamConfig adam;
    adam.lr = cfg.lr;

    TrainResult result;
    result.init_values = m.params.snapshot_values();
    std::vector<std::vector<double>> best_snapshot;
    std::vector<size_t> order(items.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    const bool use_dropout = m.cfg.tr.dropout_rate > 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            Tensor H;
            if (mode_uses_graph(m.cfg.mode)) H = node_embeds(m);
            std::vector<Tensor> losses;
            losses.reserve(end - start);
            try {
                for (size_t i = start; i < end; ++i) {
                    const auto& item = items[order[i]];
                    Tensor logits = example_logits(m, item.enc, H, use_dropout ? &rng : nullptr);
                    losses.push_back(compute_loss(logits, item.labels, m.cfg.task));
                }
                Tensor loss = engine::reduce_mean(engine::concat_cols(losses));
                engine::backward(loss);
                loss_sum += loss.item();
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::divergence)
                    throw Error::divergence("training diverged at epoch " + std::to_string(epoch + 1) +
                                            ", batch " + std::to_string(batches + 1) + ": " + e.what());
                throw;
            }
            m.params.adam_step(adam);
            ++batches;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = batches > 0 ? loss_sum / batches : 0.0;
        stats.val_f1 = val_ds.examples.empty() ? 0.0 : evaluate(m, vocab, val_ds).weighted_f1;
        result.history.push_back(stats);
        if (result.best_epoch < 0 || stats.val_f1 > result.best_val_f1) {
            result.best_epoch = epoch;
            result.best_val_f1 = stats.val_f1;
            best_snapshot = m.params.snapshot_values();
        }
    }
    m.params.restore_values(best_snapshot);
    return result;
}

Metrics evaluate(ModelContext& m, const Vocabulary& vocab, const Dataset& ds) {
    if (ds.split == Split::unlabeled) throw Error::data("evaluate: dataset is unlabeled");
    if (ds.examples.empty()) throw Error::data("evaluate: empty dataset");
    auto items = encode_all(vocab, ds, m.cfg.tr.max_len);

    Tensor H;
    {
        engine::NoGradScope ng;
        if (mode_uses_graph(m.cfg.mode)) H = node_embeds(m);
    }
    std::vector<LabelSet> preds(items.size());
    std::vector<LabelSet> golds(items.size());
    const bool par = kernels::parallel_enabled() && items.size() > 8;
#pragma omp parallel for schedule(dynamic, 8) if (par)
    for (size_t i = 0; i < items.size(); ++i) {
        engine::NoGradScope ng;
        Tensor logits = example_logits(m, items[i].enc, H, nullptr);
        preds[i] = predict_from_logits(logits.values(), m.cfg.task);
        golds[i] = items[i].labels;
    }
    return compute_metrics(preds, golds, m.cfg.clf.num_classes);
}

double ExperimentReport::mean(Mode mode, double fraction) const {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : rows) {
        if (r.mode == mode && std::fabs(r.fraction - fraction) < 1e-12) {
            sum += r.weighted_f1;
            ++count;
        }
    }
    if (count == 0) throw Error::data("report: no rows for mode/fraction");
    return sum / count;
}

void ExperimentReport::write_tsv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw Error::data("cannot write report " + path);
    if (!config_hash.empty()) os << "# config=" << config_hash << "\n";
    if (!graph_stats.empty()) os << "# graph=" << graph_stats << "\n";
    os << "mode\tfraction\tseed\tsplit\tweighted_f1\n";
    for (const auto& r : rows)
        os << to_string(r.mode) << '\t' << format_double(r.fraction) << '\t' << r.seed << '\t' << r.split
           << '\t' << format_double(r.weighted_f1) << "\n";
    if (!os) throw Error::data("short write on " + path);
}

void ExperimentReport::write_json(const std::string& path) const {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["graph_stats"] = graph_stats;
    auto& jrows = j["rows"];
    jrows = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json row;
        row["mode"] = to_string(r.mode);
        row["fraction"] = r.fraction;
        row["seed"] = r.seed;
        row["split"] = r.split;
        row["weighted_f1"] = r.weighted_f1;
        row["best_epoch"] = r.best_epoch;
        auto& pc = row["per_class"];
        pc = nlohmann::json::array();
        for (const auto& c : r.metrics.per_class)
            pc.push_back({{"precision", c.precision},
                          {"recall", c.recall},
                          {"f1", c.f1},
                          {"support", c.support},
                          {"tp", c.tp},
                          {"fp", c.fp},
                          {"fn", c.fn}});
        jrows.push_back(std::move(row));
    }
    // means per (mode, fraction)
    auto& aggr = j["aggregates"];
    aggr = nlohmann::json::array();
    std::vector<std::pair<Mode, double>> seen;
    for (const auto& r : rows) {
        std::pair<Mode, double> key{r.mode, r.fraction};
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
        seen.push_back(key);
        aggr.push_back({{"mode", to_string(r.mode)}, {"fraction", r.fraction}, {"mean_weighted_f1", mean(r.mode, r.fraction)}});
    }
    std::ofstream os(path);
    if (!os) throw Error::data("cannot write report " + path);
    os << j.dump(2) << "\n";
}

void ExperimentReport::print_table(std::ostream& os) const {
    std::vector<Mode> modes;
    std::vector<double> fractions;
    for (const auto& r : rows) {
        if (std::find(modes.begin(), modes.end(), r.mode) == modes.end()) modes.push_back(r.mode);
        if (std::find(fractions.begin(), fractions.end(), r.fraction) == fractions.end())
            fractions.push_back(r.fraction);
    }
    os << std::left << std::setw(10) << "fraction";
    for (Mode m : modes) os << std::right << std::setw(14) << to_string(m);
    os << "\n";
    for (double f : fractions) {
        os << std::left << std::setw(10) << f;
        for (Mode m : modes) os << std::right << std::setw(14) << std::fixed << std::setprecision(4) << mean(m, f);
        os << "\n";
    }
    os.unsetf(std::ios::fixed);
}

namespace {

struct GridCell {
    Mode mode;
    double fraction;
    uint64_t seed;
};

ReportRow run_cell(const ExperimentSetup& s, const GridCell& cell) {
    const WordGraph* graph = nullptr;
    if (cell.mode == Mode::TR_GF_ME_IE) {
        if (!s.graph_cooc) throw Error::config("mode tr+gf-e+ie requires the cooccurrence-only graph");
        graph = s.graph_cooc;
    } else if (mode_uses_graph(cell.mode)) {
        if (!s.graph_full) throw Error::config("mode " + std::string(to_string(cell.mode)) + " requires a word graph");
        graph = s.graph_full;
    }

    Dataset train_split =
        cell.fraction < 1.0 ? stratified_subsample(*s.train, cell.fraction, cell.seed) : *s.train;

    ModelConfig mc = s.model;
    mc.mode = cell.mode;
    ModelContext ctx = build_model(mc, *s.vocab, graph, s.tr_embed_source, cell.seed);
    TrainResult tr = train(ctx, s.train_cfg, train_split, *s.val, *s.vocab, cell.seed);
    Metrics metrics = evaluate(ctx, *s.vocab, *s.test);

    ReportRow row;
    row.mode = cell.mode;
    row.fraction = cell.fraction;
    row.seed = cell.seed;
    row.split = "test";
    row.weighted_f1 = metrics.weighted_f1;
    row.metrics = std::move(metrics);
    row.best_epoch = tr.best_epoch;
    return row;
}

ExperimentReport run_grid(const ExperimentSetup& s, const std::vector<double>& fractions) {
    if (!s.vocab || !s.train || !s.val || !s.test) throw Error::config("experiment setup is missing datasets");
    std::vector<GridCell> cells;
    for (Mode mode : s.modes)
        for (double f : fractions)
            for (uint64_t seed : s.train_cfg.seeds) cells.push_back({mode, f, seed});

    ExperimentReport report;
    report.rows.resize(cells.size());
    report.config_hash = s.config_hash;
    if (s.graph_full)
        report.graph_stats = "nodes=" + std::to_string(s.graph_full->node_count()) +
                             " edges=" + std::to_string(s.graph_full->edges.size());

    int jobs = std::max(1, s.jobs);
    if (jobs == 1) {
        for (size_t i = 0; i < cells.size(); ++i) report.rows[i] = run_cell(s, cells[i]);
        return report;
    }

    // grid workers own their parameter stores; kernel-level threading is
    // disabled meanwhile to avoid oversubscription
    bool was_parallel = kernels::parallel_enabled();
    kernels::set_parallel(false);
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= cells.size()) return;
                try {
                    report.rows[i] = run_cell(s, cells[i]);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    kernels::set_parallel(was_parallel);
    if (first_error) std::rethrow_exception(first_error);
    return report;
}

}  // namespace

ExperimentReport run_ablation(const ExperimentSetup& setup) { return run_grid(setup, {1.0}); }

ExperimentReport run_limited_supervision(const ExperimentSetup& setup, const std::vector<double>& fractions) {
    for (double f : fractions)
        if (f <= 0.0 || f > 1.0) throw Error::config("fractions must be in (0,1]");
    return run_grid(setup, fractions);
}

}  // namespace gnom
