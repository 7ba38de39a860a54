#pragma once

#include <string>
#include <vector>

#include "gnom/model.hpp"
#include "gnom/trainer.hpp"

namespace gnom {

// JSON config with sections data/vocab/graph/model/train/experiment. Unknown
// keys are rejected; CLI flags override file values; the effective config is
// hashed into every artifact.
struct RunConfig {
    struct DataSection {
        std::string train;
        std::string val;
        std::string test;
        std::vector<std::string> unlabeled;
        std::string format = "jsonl";
        std::string task_type = "binary";
        int num_classes = 2;
        std::string name = "dataset";
    } data;

    struct VocabSection {
        int min_freq = 3;
        double stop_df_ratio = 0.4;
    } vocab;

    struct GraphSection {
        double tau = 0.5;
        int window = 5;
        bool embedding_edges = true;
        // entries of E at or below this cosine are not stored; keeps genuine
        // pairs above tau after row normalization
        double emb_floor = 0.5;
        std::string emb;
    } graph;

    struct ModelSection {
        int embed_dim = 64;
        int num_layers = 2;
        int num_heads = 4;
        int ff_dim = 128;
        int max_len = 32;
        double dropout = 0.1;
        int node_dim = 64;
        int hops = 2;
        int attn_dim = 64;
        int lstm_hidden = 64;
        bool tr_embed_from_emb = false;
    } model;

    struct TrainSection {
        std::string mode = "gnom";
        double lr = 1e-5;
        int epochs = 30;
        int batch_size = 32;
        std::vector<uint64_t> seeds = {1, 2, 3};
    } train;

    struct ExperimentSection {
        std::vector<double> fractions = {0.5, 0.25, 0.10};
        std::vector<std::string> modes = {"tr", "tr+gf", "tr+gf-e+ie", "gnom"};
        int jobs = 1;
    } experiment;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text, const std::string& origin = "<config>");

    std::string canonical_json() const;  // sorted keys, defaults included
    std::string hash() const;            // fnv1a64 hex of canonical_json

    FileFormat file_format() const;
    TaskType task_type() const;
    ModelConfig model_config() const;  // mode from train.mode
    TrainConfig train_config() const;
};

// writes canonical config + hash next to a command's artifacts
void write_run_meta(const RunConfig& cfg, const std::string& out_dir, const std::string& command);

}  // namespace gnom
