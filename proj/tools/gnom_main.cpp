// gnom: word-graph GCN prior + transformer encoder fused by cross attention,
// with ablation and limited-supervision experiment drivers.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "gnom/config.hpp"
#include "gnom/corpus.hpp"
#include "gnom/kernels.hpp"
#include "gnom/metrics.hpp"
#include "gnom/model.hpp"
#include "gnom/trainer.hpp"
#include "gnom/vocab.hpp"
#include "gnom/wordgraph.hpp"

namespace fs = std::filesystem;
using namespace gnom;

namespace {

// temp file + rename so partial output never lands under the final name
void atomic_write(const std::string& path, const std::function<void(const std::string&)>& writer) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::string tmp = path + ".tmp";
    writer(tmp);
    fs::rename(tmp, path);
}

struct Pipeline {
    RunConfig cfg;
    Dataset train, val, test;
    std::vector<Dataset> unlabeled;
    Vocabulary vocab;
    std::optional<EmbeddingTable> emb;
    std::optional<WordGraph> graph_full;  // embedding edges per config
    std::optional<WordGraph> graph_cooc;  // cooccurrence only
};

std::vector<const Dataset*> graph_corpora(const Pipeline& p) {
    // the word graph covers L (train+val) plus any unlabeled data U
    std::vector<const Dataset*> out{&p.train, &p.val};
    for (const auto& u : p.unlabeled) out.push_back(&u);
    return out;
}

Pipeline load_pipeline(const RunConfig& cfg, bool need_graphs, const std::string& vocab_path = "",
                       const std::string& graph_path = "") {
    Pipeline p;
    p.cfg = cfg;
    TaskType task = cfg.task_type();
    FileFormat fmt = cfg.file_format();
    if (cfg.data.train.empty()) throw Error::config("data.train is required");
    p.train = load_dataset(cfg.data.train, fmt, task, cfg.data.num_classes, Split::train);
    if (!cfg.data.val.empty()) p.val = load_dataset(cfg.data.val, fmt, task, cfg.data.num_classes, Split::val);
    if (!cfg.data.test.empty()) p.test = load_dataset(cfg.data.test, fmt, task, cfg.data.num_classes, Split::test);
    for (const auto& path : cfg.data.unlabeled)
        p.unlabeled.push_back(load_dataset(path, fmt, task, cfg.data.num_classes, Split::unlabeled));

    if (!vocab_path.empty()) {
        p.vocab = Vocabulary::load(vocab_path);
    } else {
        p.vocab = build_vocab(graph_corpora(p), cfg.vocab.min_freq, cfg.vocab.stop_df_ratio);
    }
    if (!cfg.graph.emb.empty()) p.emb = EmbeddingTable::load(cfg.graph.emb);

    if (!need_graphs) return p;

    GraphNodes nodes = GraphNodes::from(p.vocab);
    if (!graph_path.empty()) {
        WordGraph g = WordGraph::load(graph_path, p.vocab);
        if (p.emb) {
            WordGraph rebuilt = g;
            const EmbeddingTable* src = &*p.emb;
            EmbeddingTable init(src->dim());
            for (const auto& tok : g.node_tokens)
                if (src->has(tok)) init.set(tok, src->get(tok));
            rebuilt.node_init = std::move(init);
            g = std::move(rebuilt);
        }
        p.graph_full = std::move(g);
        return p;
    }

    auto example_ids = ids_of(p.vocab, graph_corpora(p));
    SparseMatrix cooc = cooccurrence_matrix(example_ids, nodes, cfg.graph.window);
    SparseMatrix emb_sim(nodes.count(), nodes.count());
    bool use_emb = cfg.graph.embedding_edges && p.emb.has_value();
    if (use_emb) emb_sim = embedding_similarity_matrix(*p.emb, nodes, cfg.graph.emb_floor);
    const EmbeddingTable* init_src = p.emb ? &*p.emb : nullptr;
    p.graph_cooc = build_graph(nodes, cooc, emb_sim, cfg.graph.tau, false, init_src);
    if (use_emb)
        p.graph_full = build_graph(nodes, cooc, emb_sim, cfg.graph.tau, true, init_src);
    else
        p.graph_full = p.graph_cooc;
    return p;
}

ExperimentSetup make_setup(Pipeline& p, const std::vector<Mode>& modes, int jobs) {
    if (p.val.examples.empty()) throw Error::config("experiments need data.val");
    if (p.test.examples.empty()) throw Error::config("experiments need data.test");
    ExperimentSetup s;
    s.vocab = &p.vocab;
    s.train = &p.train;
    s.val = &p.val;
    s.test = &p.test;
    s.graph_full = p.graph_full ? &*p.graph_full : nullptr;
    s.graph_cooc = p.graph_cooc ? &*p.graph_cooc : nullptr;
    s.tr_embed_source = p.cfg.model.tr_embed_from_emb && p.emb ? &*p.emb : nullptr;
    s.model = p.cfg.model_config();
    s.train_cfg = p.cfg.train_config();
    s.modes = modes;
    s.config_hash = p.cfg.hash();
    s.jobs = jobs;
    for (Mode m : modes)
        if (m == Mode::TR_GF_ME_IE && !(p.cfg.graph.embedding_edges && p.emb))
            throw Error::config("mode tr+gf-e+ie needs embedding-similarity edges (graph.embedding_edges plus graph.emb)");
    return s;
}

std::vector<Mode> parse_modes(const std::vector<std::string>& names) {
    std::vector<Mode> modes;
    for (const auto& n : names) modes.push_back(mode_from_string(n));
    return modes;
}

// ---- subcommand payloads ----

int cmd_synth_gen(const SynthConfig& sc, const std::string& out_dir) {
    SynthOutput out = generate_synthetic_bilingual(sc);
    fs::create_directories(out_dir);
    atomic_write((fs::path(out_dir) / "datasetA.jsonl").string(),
                 [&](const std::string& p) { save_dataset(out.dataset_a, p); });
    atomic_write((fs::path(out_dir) / "datasetB.jsonl").string(),
                 [&](const std::string& p) { save_dataset(out.dataset_b, p); });
    atomic_write((fs::path(out_dir) / "pairs.emb").string(),
                 [&](const std::string& p) { out.pairs.save(p); });
    atomic_write((fs::path(out_dir) / "designated_pairs.tsv").string(), [&](const std::string& p) {
        std::ofstream os(p);
        for (const auto& [a, b] : out.designated_pairs) os << a << '\t' << b << "\n";
    });
    nlohmann::json meta;
    meta["command"] = "synth-gen";
    meta["synth"] = {{"vocab_size", sc.vocab_size},
                     {"num_classes", sc.num_classes},
                     {"examples_per_class", sc.examples_per_class},
                     {"example_len_min", sc.example_len_min},
                     {"example_len_max", sc.example_len_max},
                     {"topic_words_per_class", sc.topic_words_per_class},
                     {"embedding_dim", sc.embedding_dim},
                     {"pair_noise_sigma", sc.pair_noise_sigma},
                     {"zipf_exponent", sc.zipf_exponent},
                     {"seed", sc.seed}};
    meta["config_hash"] = hex64(fnv1a64(meta["synth"].dump()));
    atomic_write((fs::path(out_dir) / "run_meta.json").string(), [&](const std::string& p) {
        std::ofstream os(p);
        os << meta.dump(2) << "\n";
    });
    std::cout << "wrote " << out_dir << ": " << out.dataset_a.size() << " A examples, " << out.dataset_b.size()
              << " B examples, " << out.pairs.size() << " embeddings\n";
    return 0;
}

int cmd_vocab_build(const RunConfig& cfg, const std::string& out_path) {
    Pipeline p = load_pipeline(cfg, /*need_graphs=*/false);
    atomic_write(out_path, [&](const std::string& tmp) { p.vocab.save(tmp, cfg.hash()); });
    int eligible = static_cast<int>(p.vocab.eligible_ids().size());
    std::cout << "wrote " << out_path << ": " << p.vocab.size() << " tokens, " << eligible
              << " graph-eligible\n";
    return 0;
}

int cmd_graph_build(const RunConfig& cfg, const std::string& out_path) {
    Pipeline p = load_pipeline(cfg, /*need_graphs=*/true);
    const WordGraph& g = cfg.graph.embedding_edges ? *p.graph_full : *p.graph_cooc;
    atomic_write(out_path, [&](const std::string& tmp) { g.save(tmp, cfg.hash()); });
    std::cout << "wrote " << out_path << ": " << g.node_count() << " nodes, " << g.edges.size() << " edges\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& out_dir, uint64_t seed) {
    Pipeline p = load_pipeline(cfg, mode_uses_graph(mode_from_string(cfg.train.mode)));
    ModelConfig mc = cfg.model_config();
    const WordGraph* graph = nullptr;
    if (mode_uses_graph(mc.mode)) {
        if (mc.mode == Mode::TR_GF_ME_IE) {
            if (!(cfg.graph.embedding_edges && p.emb))
                throw Error::config("mode tr+gf-e+ie needs embedding-similarity edges (graph.emb)");
            graph = &*p.graph_cooc;
        } else {
            graph = &*p.graph_full;
        }
    }
    const EmbeddingTable* tr_src = cfg.model.tr_embed_from_emb && p.emb ? &*p.emb : nullptr;
    ModelContext ctx = build_model(mc, p.vocab, graph, tr_src, seed);

    fs::create_directories(out_dir);
    // parameters before step 1, for before/after embedding comparisons
    {
        auto init_snapshot = ctx.params.snapshot_values();
        std::vector<std::vector<double>> current = ctx.params.snapshot_values();
        ctx.params.restore_values(init_snapshot);
        atomic_write((fs::path(out_dir) / "init.ckpt").string(),
                     [&](const std::string& tmp) { ctx.params.save(tmp, cfg.hash()); });
        ctx.params.restore_values(current);
    }

    TrainResult result = train(ctx, cfg.train_config(), p.train, p.val, p.vocab, seed);
    atomic_write((fs::path(out_dir) / "best.ckpt").string(),
                 [&](const std::string& tmp) { ctx.params.save(tmp, cfg.hash()); });
    atomic_write((fs::path(out_dir) / "history.tsv").string(), [&](const std::string& tmp) {
        std::ofstream os(tmp);
        os << "# config=" << cfg.hash() << "\n";
        os << "epoch\ttrain_loss\tval_weighted_f1\n";
        for (const auto& e : result.history)
            os << e.epoch + 1 << '\t' << format_double(e.train_loss) << '\t' << format_double(e.val_f1) << "\n";
    });
    write_run_meta(cfg, out_dir, "train");
    std::cout << "best epoch " << result.best_epoch + 1 << ", val weighted F1 " << result.best_val_f1 << "\n";

    if (!p.test.examples.empty()) {
        Metrics m = evaluate(ctx, p.vocab, p.test);
        std::cout << "test weighted F1 " << m.weighted_f1 << "\n";
    }
    return 0;
}

ModelContext load_model_for_eval(const RunConfig& cfg, Pipeline& p, const std::string& ckpt) {
    ModelConfig mc = cfg.model_config();
    const WordGraph* graph = nullptr;
    if (mode_uses_graph(mc.mode))
        graph = mc.mode == Mode::TR_GF_ME_IE ? &*p.graph_cooc : &*p.graph_full;
    ModelContext ctx = build_model(mc, p.vocab, graph, nullptr, /*seed=*/0);
    ctx.params.load(ckpt);
    return ctx;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt, const std::string& data_path,
             const std::string& out_dir) {
    Pipeline p = load_pipeline(cfg, mode_uses_graph(mode_from_string(cfg.train.mode)));
    ModelContext ctx = load_model_for_eval(cfg, p, ckpt);
    Dataset ds = data_path.empty()
                     ? p.test
                     : load_dataset(data_path, cfg.file_format(), cfg.task_type(), cfg.data.num_classes, Split::test);
    if (ds.examples.empty()) throw Error::data("eval: no test data (give --data or data.test)");
    Metrics m = evaluate(ctx, p.vocab, ds);
    nlohmann::json j;
    j["config_hash"] = cfg.hash();
    j["weighted_f1"] = m.weighted_f1;
    auto& pc = j["per_class"];
    pc = nlohmann::json::array();
    for (const auto& c : m.per_class)
        pc.push_back({{"precision", c.precision},
                      {"recall", c.recall},
                      {"f1", c.f1},
                      {"support", c.support},
                      {"tp", c.tp},
                      {"fp", c.fp},
                      {"fn", c.fn}});
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        atomic_write((fs::path(out_dir) / "metrics.json").string(), [&](const std::string& tmp) {
            std::ofstream os(tmp);
            os << j.dump(2) << "\n";
        });
        write_run_meta(cfg, out_dir, "eval");
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_experiment(const RunConfig& cfg, const std::string& out_dir, bool limited) {
    Pipeline p = load_pipeline(cfg, /*need_graphs=*/true);
    ExperimentSetup setup = make_setup(p, parse_modes(cfg.experiment.modes), cfg.experiment.jobs);
    ExperimentReport report =
        limited ? run_limited_supervision(setup, cfg.experiment.fractions) : run_ablation(setup);
    fs::create_directories(out_dir);
    atomic_write((fs::path(out_dir) / "report.tsv").string(),
                 [&](const std::string& tmp) { report.write_tsv(tmp); });
    atomic_write((fs::path(out_dir) / "report.json").string(),
                 [&](const std::string& tmp) { report.write_json(tmp); });
    write_run_meta(cfg, out_dir, limited ? "limited" : "ablate");
    report.print_table(std::cout);
    return 0;
}

int cmd_export_embeddings(const RunConfig& cfg, const std::string& ckpt, const std::string& out_path,
                          int top_k, const std::string& words_csv) {
    Pipeline p = load_pipeline(cfg, /*need_graphs=*/true);
    ModelContext ctx = load_model_for_eval(cfg, p, ckpt);
    if (!mode_uses_graph(ctx.cfg.mode)) throw Error::config("export-embeddings needs a graph mode checkpoint");
    engine::Tensor h;
    {
        engine::NoGradScope ng;
        h = node_embeds(ctx);
    }
    const WordGraph& g = ctx.cfg.mode == Mode::TR_GF_ME_IE ? *p.graph_cooc : *p.graph_full;
    EmbeddingTable table(ctx.cfg.gf.node_dim);
    for (int i = 0; i < g.node_count(); ++i) {
        std::vector<double> vec(h.values().begin() + static_cast<size_t>(i) * ctx.cfg.gf.node_dim,
                                h.values().begin() + static_cast<size_t>(i + 1) * ctx.cfg.gf.node_dim);
        table.set(g.node_tokens[static_cast<size_t>(i)], std::move(vec));
    }
    if (!out_path.empty()) atomic_write(out_path, [&](const std::string& tmp) { table.save(tmp); });

    if (!words_csv.empty()) {
        for (const auto& word : split(words_csv, ',')) {
            if (!table.has(word)) {
                std::cout << word << ": not in graph\n";
                continue;
            }
            const auto& wv = table.get(word);
            std::vector<std::pair<double, std::string>> scored;
            for (const auto& tok : table.tokens())
                if (tok != word) scored.emplace_back(cosine(wv, table.get(tok)), tok);
            std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first > b.first : a.second < b.second;
            });
            std::cout << word << ": ";
            for (int i = 0; i < top_k && i < static_cast<int>(scored.size()); ++i)
                std::cout << (i ? ", " : "") << scored[static_cast<size_t>(i)].second;
            std::cout << "\n";
        }
    }
    if (!out_path.empty()) std::cout << "wrote " << out_path << ": " << table.size() << " vectors\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GNoM: graph-enhanced multilingual text classification at desk scale"};
    app.name("gnom");
    app.require_subcommand(1);

    // synth-gen
    auto* synth = app.add_subcommand("synth-gen", "generate the synthetic bilingual corpus");
    SynthConfig sc;
    std::string synth_out = "synth";
    synth->add_option("--out", synth_out, "output directory")->capture_default_str();
    synth->add_option("--seed", sc.seed, "generator seed")->capture_default_str();
    synth->add_option("--vocab-size", sc.vocab_size, "per-language vocabulary size")->capture_default_str();
    synth->add_option("--num-classes", sc.num_classes, "number of classes")->capture_default_str();
    synth->add_option("--examples-per-class", sc.examples_per_class, "examples per class")->capture_default_str();
    synth->add_option("--len-min", sc.example_len_min, "min tokens per example")->capture_default_str();
    synth->add_option("--len-max", sc.example_len_max, "max tokens per example")->capture_default_str();
    synth->add_option("--topic-words", sc.topic_words_per_class, "topic words per class")->capture_default_str();
    synth->add_option("--dim", sc.embedding_dim, "embedding dimension")->capture_default_str();
    synth->add_option("--sigma", sc.pair_noise_sigma, "pair noise sigma")->capture_default_str();
    synth->add_option("--zipf", sc.zipf_exponent, "zipf exponent for filler words")->capture_default_str();

    // shared config plumbing
    std::string config_path, out_dir = "out", vocab_path, graph_path, ckpt_path, data_path, words_csv;
    std::string mode_override, emb_override;
    std::vector<double> fractions_override;
    std::vector<uint64_t> seeds_override;
    double lr_override = -1.0, tau_override = -1.0;
    int epochs_override = -1, jobs_override = -1, window_override = -1, top_k = 5;
    bool no_embedding_edges = false;
    uint64_t train_seed = 0;
    bool train_seed_given = false;

    auto add_config_opts = [&](CLI::App* cmd, bool with_train_overrides) {
        cmd->add_option("--config", config_path, "JSON config file (sections data/vocab/graph/model/train/experiment)")
            ->required();
        if (with_train_overrides) {
            cmd->add_option("--mode", mode_override, "override train.mode (tr, tr+gf, tr+gf-e+ie, gnom)");
            cmd->add_option("--lr", lr_override, "override train.lr");
            cmd->add_option("--epochs", epochs_override, "override train.epochs");
            cmd->add_option("--seeds", seeds_override, "override train.seeds");
        }
        cmd->add_option("--tau", tau_override, "override graph.tau");
        cmd->add_option("--window", window_override, "override graph.window");
        cmd->add_option("--emb", emb_override, "override graph.emb (embedding table path)");
        cmd->add_flag("--no-embedding-edges", no_embedding_edges, "build edges from cooccurrence only");
    };

    auto* vocab_cmd = app.add_subcommand("vocab", "vocabulary tools");
    auto* vocab_build = vocab_cmd->add_subcommand("build", "build the shared vocabulary from the config's corpora");
    add_config_opts(vocab_build, false);
    vocab_build->add_option("--out", out_dir, "output vocabulary file")->required();

    auto* graph_cmd = app.add_subcommand("graph", "word graph tools");
    auto* graph_build = graph_cmd->add_subcommand("build", "build the word graph from the config's corpora");
    add_config_opts(graph_build, false);
    graph_build->add_option("--out", out_dir, "output graph file")->required();

    auto* train_cmd = app.add_subcommand("train", "train one configuration");
    add_config_opts(train_cmd, true);
    train_cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
    train_cmd->add_option("--seed", train_seed, "training seed (default: first of train.seeds)")
        ->each([&](const std::string&) { train_seed_given = true; });

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_config_opts(eval_cmd, true);
    eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", data_path, "dataset to evaluate (default: data.test)");
    eval_cmd->add_option("--out", out_dir, "output directory for metrics.json");

    auto* ablate_cmd = app.add_subcommand("ablate", "run the ablation grid (modes x seeds)");
    add_config_opts(ablate_cmd, true);
    ablate_cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
    ablate_cmd->add_option("--jobs", jobs_override, "parallel grid workers");

    auto* limited_cmd = app.add_subcommand("limited", "run the limited-supervision grid (modes x fractions x seeds)");
    add_config_opts(limited_cmd, true);
    limited_cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
    limited_cmd->add_option("--jobs", jobs_override, "parallel grid workers");
    limited_cmd->add_option("--fractions", fractions_override, "override experiment.fractions");

    auto* export_cmd = app.add_subcommand("export-embeddings", "export trained GF node vectors (.emb)");
    add_config_opts(export_cmd, true);
    export_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    export_cmd->add_option("--out", out_dir, "output .emb file");
    export_cmd->add_option("--top-k", top_k, "neighbors to print per word")->capture_default_str();
    export_cmd->add_option("--words", words_csv, "comma-separated words to print neighbors for");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth_gen(sc, synth_out);

        RunConfig cfg = RunConfig::from_file(config_path);
        if (!mode_override.empty()) cfg.train.mode = mode_override;
        if (lr_override > 0) cfg.train.lr = lr_override;
        if (epochs_override > 0) cfg.train.epochs = epochs_override;
        if (!seeds_override.empty()) cfg.train.seeds = seeds_override;
        if (tau_override >= 0) cfg.graph.tau = tau_override;
        if (window_override > 0) cfg.graph.window = window_override;
        if (!emb_override.empty()) cfg.graph.emb = emb_override;
        if (no_embedding_edges) cfg.graph.embedding_edges = false;
        if (jobs_override > 0) cfg.experiment.jobs = jobs_override;
        if (!fractions_override.empty()) cfg.experiment.fractions = fractions_override;

        if (vocab_build->parsed()) return cmd_vocab_build(cfg, out_dir);
        if (graph_build->parsed()) return cmd_graph_build(cfg, out_dir);
        if (train_cmd->parsed())
            return cmd_train(cfg, out_dir, train_seed_given ? train_seed : cfg.train.seeds.at(0));
        if (eval_cmd->parsed()) return cmd_eval(cfg, ckpt_path, data_path, out_dir);
        if (ablate_cmd->parsed()) return run_experiment(cfg, out_dir, false);
        if (limited_cmd->parsed()) return run_experiment(cfg, out_dir, true);
        if (export_cmd->parsed()) return cmd_export_embeddings(cfg, ckpt_path, out_dir, top_k, words_csv);
        std::cerr << "error: config: no subcommand\n";
        return 2;
    } catch (const Error& e) {
        const char* kind = "internal";
        int code = 1;
        switch (e.kind()) {
            case ErrorKind::config: kind = "config"; code = 2; break;
            case ErrorKind::data: kind = "data"; code = 3; break;
            case ErrorKind::divergence: kind = "divergence"; code = 4; break;
            case ErrorKind::engine: kind = "engine"; code = 1; break;
        }
        std::cerr << "error: " << kind << ": " << e.what() << "\n";
        return code;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
}
