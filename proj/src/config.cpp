#include "gnom/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

namespace gnom {

using nlohmann::json;

namespace {

void reject_unknown(const json& section, const std::string& name, const std::set<std::string>& known) {
    for (const auto& [key, value] : section.items()) {
        (void)value;
        if (!known.count(key)) throw Error::config("unknown key '" + key + "' in section '" + name + "'");
    }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error::config(std::string("bad value for '") + key + "': " + e.what());
    }
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error::config("cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return from_json_text(text, path);
}

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error::config(origin + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw Error::config(origin + ": config root must be an object");
    reject_unknown(j, "<root>", {"data", "vocab", "graph", "model", "train", "experiment"});

    RunConfig cfg;
    if (j.contains("data")) {
        const auto& s = j.at("data");
        reject_unknown(s, "data", {"train", "val", "test", "unlabeled", "format", "task_type", "num_classes", "name"});
        get_if(s, "train", cfg.data.train);
        get_if(s, "val", cfg.data.val);
        get_if(s, "test", cfg.data.test);
        get_if(s, "unlabeled", cfg.data.unlabeled);
        get_if(s, "format", cfg.data.format);
        get_if(s, "task_type", cfg.data.task_type);
        get_if(s, "num_classes", cfg.data.num_classes);
        get_if(s, "name", cfg.data.name);
    }
    if (j.contains("vocab")) {
        const auto& s = j.at("vocab");
        reject_unknown(s, "vocab", {"min_freq", "stop_df_ratio"});
        get_if(s, "min_freq", cfg.vocab.min_freq);
        get_if(s, "stop_df_ratio", cfg.vocab.stop_df_ratio);
    }
    if (j.contains("graph")) {
        const auto& s = j.at("graph");
        reject_unknown(s, "graph", {"tau", "window", "embedding_edges", "emb_floor", "emb"});
        get_if(s, "tau", cfg.graph.tau);
        get_if(s, "window", cfg.graph.window);
        get_if(s, "embedding_edges", cfg.graph.embedding_edges);
        get_if(s, "emb_floor", cfg.graph.emb_floor);
        get_if(s, "emb", cfg.graph.emb);
    }
    if (j.contains("model")) {
        const auto& s = j.at("model");
        reject_unknown(s, "model",
                       {"embed_dim", "num_layers", "num_heads", "ff_dim", "max_len", "dropout", "node_dim",
                        "hops", "attn_dim", "lstm_hidden", "tr_embed_from_emb"});
        get_if(s, "embed_dim", cfg.model.embed_dim);
        get_if(s, "num_layers", cfg.model.num_layers);
        get_if(s, "num_heads", cfg.model.num_heads);
        get_if(s, "ff_dim", cfg.model.ff_dim);
        get_if(s, "max_len", cfg.model.max_len);
        get_if(s, "dropout", cfg.model.dropout);
        get_if(s, "node_dim", cfg.model.node_dim);
        get_if(s, "hops", cfg.model.hops);
        get_if(s, "attn_dim", cfg.model.attn_dim);
        get_if(s, "lstm_hidden", cfg.model.lstm_hidden);
        get_if(s, "tr_embed_from_emb", cfg.model.tr_embed_from_emb);
    }
    if (j.contains("train")) {
        const auto& s = j.at("train");
        reject_unknown(s, "train", {"mode", "lr", "epochs", "batch_size", "seeds"});
        get_if(s, "mode", cfg.train.mode);
        get_if(s, "lr", cfg.train.lr);
        get_if(s, "epochs", cfg.train.epochs);
        get_if(s, "batch_size", cfg.train.batch_size);
        get_if(s, "seeds", cfg.train.seeds);
    }
    if (j.contains("experiment")) {
        const auto& s = j.at("experiment");
        reject_unknown(s, "experiment", {"fractions", "modes", "jobs"});
        get_if(s, "fractions", cfg.experiment.fractions);
        get_if(s, "modes", cfg.experiment.modes);
        get_if(s, "jobs", cfg.experiment.jobs);
    }
    return cfg;
}

std::string RunConfig::canonical_json() const {
    // nlohmann::json sorts object keys, so dump() is canonical
    json j;
    j["data"] = {{"train", data.train},        {"val", data.val},
                 {"test", data.test},          {"unlabeled", data.unlabeled},
                 {"format", data.format},      {"task_type", data.task_type},
                 {"num_classes", data.num_classes}, {"name", data.name}};
    j["vocab"] = {{"min_freq", vocab.min_freq}, {"stop_df_ratio", vocab.stop_df_ratio}};
    j["graph"] = {{"tau", graph.tau},
                  {"window", graph.window},
                  {"embedding_edges", graph.embedding_edges},
                  {"emb_floor", graph.emb_floor},
                  {"emb", graph.emb}};
    j["model"] = {{"embed_dim", model.embed_dim},
                  {"num_layers", model.num_layers},
                  {"num_heads", model.num_heads},
                  {"ff_dim", model.ff_dim},
                  {"max_len", model.max_len},
                  {"dropout", model.dropout},
                  {"node_dim", model.node_dim},
                  {"hops", model.hops},
                  {"attn_dim", model.attn_dim},
                  {"lstm_hidden", model.lstm_hidden},
                  {"tr_embed_from_emb", model.tr_embed_from_emb}};
    j["train"] = {{"mode", train.mode},
                  {"lr", train.lr},
                  {"epochs", train.epochs},
                  {"batch_size", train.batch_size},
                  {"seeds", train.seeds}};
    j["experiment"] = {{"fractions", experiment.fractions}, {"modes", experiment.modes}, {"jobs", experiment.jobs}};
    return j.dump(2);
}

std::string RunConfig::hash() const { return hex64(fnv1a64(canonical_json())); }

FileFormat RunConfig::file_format() const {
    if (data.format == "jsonl") return FileFormat::jsonl;
    if (data.format == "tsv") return FileFormat::tsv;
    throw Error::config("unknown data format '" + data.format + "' (expected jsonl or tsv)");
}

TaskType RunConfig::task_type() const { return task_type_from_string(data.task_type); }

ModelConfig RunConfig::model_config() const {
    ModelConfig mc;
    mc.tr.embed_dim = model.embed_dim;
    mc.tr.num_layers = model.num_layers;
    mc.tr.num_heads = model.num_heads;
    mc.tr.ff_dim = model.ff_dim;
    mc.tr.max_len = model.max_len;
    mc.tr.dropout_rate = model.dropout;
    mc.gf.node_dim = model.node_dim;
    mc.gf.hops = model.hops;
    mc.attn_dim = model.attn_dim;
    mc.clf.hidden = model.lstm_hidden;
    mc.clf.num_classes = data.num_classes;
    mc.mode = mode_from_string(train.mode);
    mc.task = task_type_from_string(data.task_type);
    return mc;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig tc;
    tc.mode = mode_from_string(train.mode);
    tc.lr = train.lr;
    tc.epochs = train.epochs;
    tc.batch_size = train.batch_size;
    tc.seeds = train.seeds;
    tc.tau = graph.tau;
    tc.window = graph.window;
    tc.fractions = experiment.fractions;
    return tc;
}

void write_run_meta(const RunConfig& cfg, const std::string& out_dir, const std::string& command) {
    std::filesystem::create_directories(out_dir);
    json meta;
    meta["command"] = command;
    meta["config_hash"] = cfg.hash();
    meta["config"] = json::parse(cfg.canonical_json());
    std::ofstream os(std::filesystem::path(out_dir) / "run_meta.json");
    if (!os) throw Error::data("cannot write run_meta.json in " + out_dir);
    os << meta.dump(2) << "\n";
}

}  // namespace gnom
