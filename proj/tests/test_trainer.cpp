#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gnom/trainer.hpp"
#include "test_helpers.hpp"

using namespace gnom;
using engine::Tensor;

namespace {

LabelSet labels_of(TaskType task, std::vector<int> values) {
    LabelSet ls;
    ls.task_type = task;
    ls.values = std::move(values);
    ls.normalize();
    return ls;
}

// independent weighted-F1 oracle: per class, rebuild prediction/gold index
// sets and compute F1 from their intersections
double oracle_weighted_f1(const std::vector<LabelSet>& preds, const std::vector<LabelSet>& golds,
                          int num_classes) {
    double num = 0.0;
    double denom = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        std::set<size_t> p, g;
        for (size_t i = 0; i < preds.size(); ++i) {
            for (int v : preds[i].values)
                if (v == c) p.insert(i);
            for (int v : golds[i].values)
                if (v == c) g.insert(i);
        }
        std::vector<size_t> inter;
        std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(inter));
        double tp = static_cast<double>(inter.size());
        double precision = p.empty() ? 0.0 : tp / static_cast<double>(p.size());
        double recall = g.empty() ? 0.0 : tp / static_cast<double>(g.size());
        double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
        num += static_cast<double>(g.size()) * f1;
        denom += static_cast<double>(g.size());
    }
    return denom > 0 ? num / denom : 0.0;
}

}  // namespace

TEST_CASE("compute_loss: uniform softmax gives ln 2") {
    Tensor logits = Tensor::row({0.0, 0.0});
    Tensor loss = compute_loss(logits, labels_of(TaskType::binary, {0}), TaskType::binary);
    CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("compute_loss: saturated correct multilabel prediction is near zero") {
    Tensor logits = Tensor::row({50.0, -50.0});
    Tensor loss = compute_loss(logits, labels_of(TaskType::multilabel, {0}), TaskType::multilabel);
    CHECK(loss.item() < 1e-12);
}

TEST_CASE("compute_loss: empty label set errors") {
    Tensor logits = Tensor::row({0.0, 0.0});
    LabelSet empty;
    empty.task_type = TaskType::binary;
    CHECK_THROWS_AS(compute_loss(logits, empty, TaskType::binary), Error);
}

TEST_CASE("compute_loss gradients match finite differences") {
    Rng rng(3);
    Tensor w = Tensor::zeros(3, 4, true);
    for (auto& v : w.values()) v = rng.uniform(-0.5, 0.5);
    Tensor x = Tensor::row({0.3, -0.2, 0.8, 0.1});

    SUBCASE("softmax cross-entropy") {
        auto f = [&]() {
            Tensor loss = compute_loss(engine::matmul_nt(x, w), labels_of(TaskType::multiclass, {2}),
                                       TaskType::multiclass);
            engine::backward(loss);
            return loss.item();
        };
        CHECK(engine::finite_difference_check(f, {w}) < 1e-6);
    }
    SUBCASE("multilabel BCE") {
        auto f = [&]() {
            Tensor loss = compute_loss(engine::matmul_nt(x, w), labels_of(TaskType::multilabel, {0, 2}),
                                       TaskType::multilabel);
            engine::backward(loss);
            return loss.item();
        };
        CHECK(engine::finite_difference_check(f, {w}) < 1e-6);
    }
}

TEST_CASE("weighted F1: perfect predictions score 1") {
    std::vector<LabelSet> golds, preds;
    for (int i = 0; i < 10; ++i) {
        golds.push_back(labels_of(TaskType::binary, {i % 2}));
        preds.push_back(labels_of(TaskType::binary, {i % 2}));
    }
    CHECK(weighted_f1(preds, golds, 2) == doctest::Approx(1.0));
}

TEST_CASE("weighted F1: the hand-worked binary confusion case") {
    std::vector<LabelSet> golds = {labels_of(TaskType::binary, {1}), labels_of(TaskType::binary, {1}),
                                   labels_of(TaskType::binary, {0}), labels_of(TaskType::binary, {0})};
    std::vector<LabelSet> preds = {labels_of(TaskType::binary, {1}), labels_of(TaskType::binary, {0}),
                                   labels_of(TaskType::binary, {0}), labels_of(TaskType::binary, {0})};
    // class 1: F1 = 2/3, class 0: F1 = 4/5, supports 2 and 2
    CHECK(std::fabs(weighted_f1(preds, golds, 2) - 0.7333333333333334) < 1e-9);
}

TEST_CASE("weighted F1: constant prediction closed form at p = 1/2") {
    // predict class 1 always with support share p: weighted F1 = p * 2p/(p+1)
    std::vector<LabelSet> golds, preds;
    for (int i = 0; i < 20; ++i) {
        golds.push_back(labels_of(TaskType::binary, {i < 10 ? 1 : 0}));
        preds.push_back(labels_of(TaskType::binary, {1}));
    }
    CHECK(weighted_f1(preds, golds, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("weighted F1 equals the independent oracle on 1000 random cases") {
    Rng rng(2025);
    for (int trial = 0; trial < 1000; ++trial) {
        TaskType task = trial % 3 == 0   ? TaskType::binary
                        : trial % 3 == 1 ? TaskType::multiclass
                                         : TaskType::multilabel;
        int num_classes = task == TaskType::binary ? 2 : 2 + static_cast<int>(rng.below(5));
        int n = 1 + static_cast<int>(rng.below(40));
        std::vector<LabelSet> golds, preds;
        for (int i = 0; i < n; ++i) {
            if (task == TaskType::multilabel) {
                std::vector<int> g, p;
                for (int c = 0; c < num_classes; ++c) {
                    if (rng.uniform() < 0.4) g.push_back(c);
                    if (rng.uniform() < 0.4) p.push_back(c);
                }
                if (g.empty()) g.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(num_classes))));
                golds.push_back(labels_of(task, g));
                preds.push_back(labels_of(task, p));  // empty predictions allowed
            } else {
                golds.push_back(labels_of(task, {static_cast<int>(rng.below(static_cast<uint64_t>(num_classes)))}));
                preds.push_back(labels_of(task, {static_cast<int>(rng.below(static_cast<uint64_t>(num_classes)))}));
            }
        }
        double fast = weighted_f1(preds, golds, num_classes);
        double slow = oracle_weighted_f1(preds, golds, num_classes);
        CHECK(std::fabs(fast - slow) < 1e-12);
    }
}

TEST_CASE("weighted F1 rejects mismatched lengths") {
    std::vector<LabelSet> a = {labels_of(TaskType::binary, {0})};
    std::vector<LabelSet> b;
    CHECK_THROWS_AS(weighted_f1(a, b, 2), Error);
}

TEST_CASE("prediction rules") {
    CHECK(predict_from_logits({0.2, 1.5, -0.3}, TaskType::multiclass).values == std::vector<int>{1});
    CHECK(predict_from_logits({1.2, -0.1, 0.4}, TaskType::multilabel).values == std::vector<int>{0, 2});
    CHECK(predict_from_logits({-1.0, -2.0}, TaskType::multilabel).values.empty());
    // argmax ties resolve to the lowest index
    CHECK(predict_from_logits({0.5, 0.5}, TaskType::binary).values == std::vector<int>{0});
}

TEST_CASE("train: empty train split errors") {
    auto w = testing::make_tiny_world();
    ModelContext m = build_model(w.model, w.vocab, &w.graph_full, nullptr, 1);
    Dataset empty = w.synth.dataset_a;
    empty.examples.clear();
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.lr = 1e-3;
    CHECK_THROWS_AS(train(m, cfg, empty, w.synth.dataset_a, w.vocab, 1), Error);
}

TEST_CASE("train: deterministic histories and parameters for a fixed seed") {
    auto w = testing::make_tiny_world();
    auto [train_ds, val_ds] = stratified_split(w.synth.dataset_a, 0.8, 5);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.lr = 2e-3;
    cfg.batch_size = 16;

    auto run = [&]() {
        ModelContext m = build_model(w.model, w.vocab, &w.graph_full, nullptr, 9);
        TrainResult r = train(m, cfg, train_ds, val_ds, w.vocab, 9);
        return std::make_pair(r, m.params.snapshot_values());
    };
    auto [r1, p1] = run();
    auto [r2, p2] = run();
    REQUIRE(r1.history.size() == r2.history.size());
    for (size_t i = 0; i < r1.history.size(); ++i) {
        CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
        CHECK(r1.history[i].val_f1 == r2.history[i].val_f1);
    }
    CHECK(p1 == p2);  // bit-identical parameters
}

TEST_CASE("train: best-checkpoint selection maximizes validation F1, earliest on ties") {
    auto w = testing::make_tiny_world();
    auto [train_ds, val_ds] = stratified_split(w.synth.dataset_a, 0.8, 5);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.lr = 2e-3;
    cfg.batch_size = 16;
    ModelContext m = build_model(w.model, w.vocab, &w.graph_full, nullptr, 13);
    TrainResult r = train(m, cfg, train_ds, val_ds, w.vocab, 13);
    REQUIRE(r.best_epoch >= 0);
    double best = r.history[static_cast<size_t>(r.best_epoch)].val_f1;
    for (const auto& e : r.history) {
        CHECK(best >= e.val_f1);
        if (e.val_f1 == best) CHECK(r.best_epoch <= e.epoch);
    }
}

TEST_CASE("train beats the majority baseline on the synthetic task") {
    auto w = testing::make_tiny_world(80, 50, 16, 21);
    auto [val_ds, train_ds] = stratified_split(w.synth.dataset_a, 0.2, 5);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.lr = 2e-3;
    cfg.batch_size = 16;
    ModelContext m = build_model(w.model, w.vocab, &w.graph_full, nullptr, 3);
    TrainResult r = train(m, cfg, train_ds, val_ds, w.vocab, 3);

    // majority baseline from the validation split
    std::map<int, int> counts;
    for (const auto& ex : val_ds.examples) counts[ex.labels.values[0]]++;
    int majority = counts[0] >= counts[1] ? 0 : 1;
    std::vector<LabelSet> preds(val_ds.size(), labels_of(TaskType::binary, {majority}));
    std::vector<LabelSet> golds;
    for (const auto& ex : val_ds.examples) golds.push_back(ex.labels);
    double baseline = weighted_f1(preds, golds, 2);
    CHECK(r.best_val_f1 > baseline);
}

TEST_CASE("evaluate: overfit memorization reaches F1 1.0; accounting identity holds") {
    auto w = testing::make_tiny_world(40, 6, 16, 77);
    Dataset ten = w.synth.dataset_a;
    ten.examples.resize(10);
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.lr = 3e-3;
    cfg.batch_size = 10;
    ModelContext m = build_model(w.model, w.vocab, &w.graph_full, nullptr, 2);
    train(m, cfg, ten, ten, w.vocab, 2);
    Metrics metrics = evaluate(m, w.vocab, ten);
    CHECK(metrics.weighted_f1 == doctest::Approx(1.0));

    int64_t gold_labels = 0;
    for (const auto& ex : ten.examples) gold_labels += static_cast<int64_t>(ex.labels.values.size());
    CHECK(metrics.total_support == gold_labels);

    Dataset empty = ten;
    empty.examples.clear();
    CHECK_THROWS_AS(evaluate(m, w.vocab, empty), Error);
}

TEST_CASE("experiment grids: structure, identity fraction, determinism, jobs") {
    auto w = testing::make_tiny_world(60, 20, 16, 31);
    auto [val_ds, train_ds] = stratified_split(w.synth.dataset_a, 0.25, 5);
    Dataset test_ds = w.synth.dataset_b;
    test_ds.split = Split::test;

    ExperimentSetup s;
    s.vocab = &w.vocab;
    s.train = &train_ds;
    s.val = &val_ds;
    s.test = &test_ds;
    s.graph_full = &w.graph_full;
    s.graph_cooc = &w.graph_cooc;
    s.model = w.model;
    s.train_cfg.epochs = 1;
    s.train_cfg.lr = 2e-3;
    s.train_cfg.batch_size = 16;
    s.train_cfg.seeds = {1, 2};
    s.modes = {Mode::TR, Mode::TR_GF, Mode::TR_GF_ME_IE, Mode::GNOM};
    s.config_hash = "f00f";

    ExperimentReport ablation = run_ablation(s);
    CHECK(ablation.rows.size() == 4 * 2);  // modes x seeds

    SUBCASE("fractions=[1.0] reproduces the ablation numbers") {
        ExperimentReport lim = run_limited_supervision(s, {1.0});
        REQUIRE(lim.rows.size() == ablation.rows.size());
        for (size_t i = 0; i < lim.rows.size(); ++i)
            CHECK(lim.rows[i].weighted_f1 == ablation.rows[i].weighted_f1);
    }

    SUBCASE("limited-supervision row count is modes x fractions x seeds") {
        ExperimentReport lim = run_limited_supervision(s, {1.0, 0.5});
        CHECK(lim.rows.size() == 4 * 2 * 2);
        // every row evaluated the full, untouched test set
        int64_t gold_labels = 0;
        for (const auto& ex : test_ds.examples) gold_labels += static_cast<int64_t>(ex.labels.values.size());
        for (const auto& row : lim.rows) CHECK(row.metrics.total_support == gold_labels);
    }

    SUBCASE("TR-only grid runs with no graphs supplied") {
        ExperimentSetup bare = s;
        bare.graph_full = nullptr;
        bare.graph_cooc = nullptr;
        bare.modes = {Mode::TR};
        ExperimentReport rep = run_ablation(bare);
        CHECK(rep.rows.size() == 2);
    }

    SUBCASE("tr+gf-e+ie without the cooccurrence graph is a config error") {
        ExperimentSetup broken = s;
        broken.graph_cooc = nullptr;
        broken.modes = {Mode::TR_GF_ME_IE};
        CHECK_THROWS_AS(run_ablation(broken), Error);
    }

    SUBCASE("parallel jobs produce the identical report") {
        ExperimentSetup par = s;
        par.jobs = 2;
        ExperimentReport rep = run_ablation(par);
        REQUIRE(rep.rows.size() == ablation.rows.size());
        for (size_t i = 0; i < rep.rows.size(); ++i) {
            CHECK(rep.rows[i].weighted_f1 == ablation.rows[i].weighted_f1);
            CHECK(rep.rows[i].seed == ablation.rows[i].seed);
        }
    }

    SUBCASE("report writers and table printer") {
        ablation.write_tsv("/tmp/gnom_report.tsv");
        ablation.write_json("/tmp/gnom_report.json");
        std::ostringstream table;
        ablation.print_table(table);
        CHECK(table.str().find("gnom") != std::string::npos);
        std::ifstream tsv("/tmp/gnom_report.tsv");
        std::string first;
        std::getline(tsv, first);
        CHECK(first == "# config=f00f");
        std::remove("/tmp/gnom_report.tsv");
        std::remove("/tmp/gnom_report.json");
    }
}

TEST_CASE("train rejects repeat counts and fractions outside bounds") {
    TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.epochs = 1;
    cfg.seeds = {};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.seeds = {1};
    cfg.fractions = {1.5};
    CHECK_THROWS_AS(cfg.validate(), Error);
}
