#pragma once

#include <string>
#include <vector>

#include "gnom/embedding.hpp"

namespace gnom {

enum class TaskType { binary, multiclass, multilabel };
enum class Split { train, val, test, unlabeled };

const char* to_string(TaskType t);
const char* to_string(Split s);
TaskType task_type_from_string(const std::string& s);

// Class indices a single example carries. binary/multiclass: exactly one;
// multilabel: at least one. Values are kept sorted and deduplicated.
struct LabelSet {
    TaskType task_type = TaskType::binary;
    std::vector<int> values;

    void normalize();  // sort + dedup
    bool empty() const { return values.empty(); }
    bool has(int c) const;
};

struct Example {
    std::string id;
    std::string text;
    std::string lang;  // informational BCP-47-like tag
    LabelSet labels;
};

struct Dataset {
    std::string name;
    std::vector<Example> examples;
    int num_classes = 0;
    Split split = Split::train;
    TaskType task_type = TaskType::binary;

    size_t size() const { return examples.size(); }
    // enforces the type invariants (unique ids, label arity, ranges, non-empty text)
    void validate() const;
};

enum class FileFormat { jsonl, tsv };

Dataset load_dataset(const std::string& path, FileFormat format, TaskType task_type, int num_classes,
                     Split split = Split::train, const std::string& name = "");
void save_dataset(const Dataset& d, const std::string& path, FileFormat format = FileFormat::jsonl);

// FIRE16 (7 classes, multilabel) -> SMERP17 (4 classes). Files store 0-based
// indices; the paper's class c is index c-1. Paper classes {1,3}->1, {2,4}->2,
// {7}->3, {6}->4, class 5 dropped; examples left with no labels are removed.
Dataset map_labels_fire16_to_smerp17(const Dataset& d);

// Per-stratum floor(fraction*size), min 1 for non-empty strata. Strata are the
// single label for binary/multiclass and the full label-set signature for
// multilabel. Output keeps the original example order.
Dataset stratified_subsample(const Dataset& d, double fraction, uint64_t seed);

// Same stratified selection, returning (selected, complement). Used to carve
// validation/test splits out of a generated corpus.
std::pair<Dataset, Dataset> stratified_split(const Dataset& d, double fraction, uint64_t seed);

struct SynthConfig {
    int vocab_size = 1000;
    int num_classes = 2;
    int examples_per_class = 1000;
    int example_len_min = 5;
    int example_len_max = 15;
    int topic_words_per_class = 25;
    int embedding_dim = 64;
    double pair_noise_sigma = 0.3;
    double zipf_exponent = 1.1;
    uint64_t seed = 7;

    void validate() const;
};

struct SynthOutput {
    Dataset dataset_a;
    Dataset dataset_b;
    EmbeddingTable pairs;
    // topic-word translation pairs (a token, b token); the class-bearing words
    std::vector<std::pair<std::string, std::string>> designated_pairs;
};

// Language A plus its pseudo-translation B (bijective token renaming over the
// same draws) and a noisy paired embedding table standing in for a pretrained
// multilingual prior.
SynthOutput generate_synthetic_bilingual(const SynthConfig& cfg);

}  // namespace gnom
