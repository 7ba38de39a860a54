#include "gnom/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gnom/common.hpp"

namespace gnom {

using nlohmann::json;

const char* to_string(TaskType t) {
    switch (t) {
        case TaskType::binary: return "binary";
        case TaskType::multiclass: return "multiclass";
        case TaskType::multilabel: return "multilabel";
    }
    return "?";
}

const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        case Split::unlabeled: return "unlabeled";
    }
    return "?";
}

TaskType task_type_from_string(const std::string& s) {
    if (s == "binary") return TaskType::binary;
    if (s == "multiclass") return TaskType::multiclass;
    if (s == "multilabel") return TaskType::multilabel;
    throw Error::config("unknown task type '" + s + "'");
}

void LabelSet::normalize() {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
}

bool LabelSet::has(int c) const { return std::binary_search(values.begin(), values.end(), c); }

namespace {

std::string trimmed(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

void check_labels(const LabelSet& ls, TaskType task, int num_classes, const std::string& where) {
    if (task != TaskType::multilabel && ls.values.size() != 1)
        throw Error::data(where + ": " + to_string(task) + " requires one label");
    if (task == TaskType::multilabel && ls.values.empty())
        throw Error::data(where + ": multilabel requires at least one label");
    for (int v : ls.values) {
        if (v < 0) throw Error::data(where + ": negative label index");
        if (v >= num_classes)
            throw Error::data(where + ": label index " + std::to_string(v) + " >= num_classes " +
                              std::to_string(num_classes));
    }
}

}  // namespace

void Dataset::validate() const {
    if (split != Split::unlabeled && num_classes < 2)
        throw Error::data("dataset " + name + ": labeled splits need num_classes >= 2");
    std::set<std::string> seen;
    for (const auto& ex : examples) {
        if (trimmed(ex.text).empty()) throw Error::data("dataset " + name + ": example " + ex.id + " has empty text");
        if (!seen.insert(ex.id).second) throw Error::data("dataset " + name + ": duplicate id " + ex.id);
        if (split == Split::unlabeled) {
            if (!ex.labels.values.empty())
                throw Error::data("dataset " + name + ": unlabeled split carries labels on " + ex.id);
        } else {
            check_labels(ex.labels, task_type, num_classes, "example " + ex.id);
        }
    }
}

Dataset load_dataset(const std::string& path, FileFormat format, TaskType task_type, int num_classes,
                     Split split, const std::string& name) {
    std::ifstream is(path);
    if (!is) throw Error::data("cannot open dataset file " + path);
    Dataset d;
    d.name = name.empty() ? path : name;
    d.num_classes = num_classes;
    d.split = split;
    d.task_type = task_type;

    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string where = path + ":" + std::to_string(line_no);
        if (trimmed(line).empty()) continue;
        Example ex;
        ex.labels.task_type = task_type;
        if (format == FileFormat::jsonl) {
            json rec;
            try {
                rec = json::parse(line);
            } catch (const json::exception& e) {
                throw Error::data(where + ": malformed record: " + e.what());
            }
            if (!rec.is_object() || !rec.contains("id") || !rec.contains("text"))
                throw Error::data(where + ": malformed record: need id and text");
            try {
                ex.id = rec.at("id").get<std::string>();
                ex.text = rec.at("text").get<std::string>();
                if (rec.contains("lang")) ex.lang = rec.at("lang").get<std::string>();
                if (rec.contains("labels")) ex.labels.values = rec.at("labels").get<std::vector<int>>();
            } catch (const json::exception& e) {
                throw Error::data(where + ": malformed record: " + e.what());
            }
        } else {
            // id<TAB>lang<TAB>comma-separated-labels<TAB>text (text keeps any further tabs)
            size_t t1 = line.find('\t');
            size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
            size_t t3 = t2 == std::string::npos ? t2 : line.find('\t', t2 + 1);
            if (t3 == std::string::npos) throw Error::data(where + ": malformed record: expected 4 tab-separated fields");
            ex.id = line.substr(0, t1);
            ex.lang = line.substr(t1 + 1, t2 - t1 - 1);
            std::string labels_field = line.substr(t2 + 1, t3 - t2 - 1);
            ex.text = line.substr(t3 + 1);
            if (!trimmed(labels_field).empty()) {
                for (const auto& part : gnom::split(labels_field, ',')) {
                    try {
                        ex.labels.values.push_back(std::stoi(part));
                    } catch (const std::exception&) {
                        throw Error::data(where + ": malformed record: bad label '" + part + "'");
                    }
                }
            }
        }
        ex.labels.normalize();
        if (split != Split::unlabeled) check_labels(ex.labels, task_type, num_classes, where);
        if (trimmed(ex.text).empty()) throw Error::data(where + ": empty text");
        d.examples.push_back(std::move(ex));
    }
    d.validate();
    return d;
}

void save_dataset(const Dataset& d, const std::string& path, FileFormat format) {
    std::ofstream os(path);
    if (!os) throw Error::data("cannot write dataset file " + path);
    for (const auto& ex : d.examples) {
        if (format == FileFormat::jsonl) {
            json rec;
            rec["id"] = ex.id;
            rec["text"] = ex.text;
            if (!ex.lang.empty()) rec["lang"] = ex.lang;
            if (!ex.labels.values.empty() || d.split != Split::unlabeled) rec["labels"] = ex.labels.values;
            os << rec.dump() << "\n";
        } else {
            std::string labels;
            for (size_t i = 0; i < ex.labels.values.size(); ++i)
                labels += (i ? "," : "") + std::to_string(ex.labels.values[i]);
            os << ex.id << '\t' << ex.lang << '\t' << labels << '\t' << ex.text << "\n";
        }
    }
    if (!os) throw Error::data("short write on " + path);
}

Dataset map_labels_fire16_to_smerp17(const Dataset& d) {
    if (d.task_type != TaskType::multilabel) throw Error::data("FIRE16 mapping requires a multilabel dataset");
    // 0-based: paper class c is index c-1
    Dataset out;
    out.name = d.name + "-smerp17";
    out.num_classes = 4;
    out.split = d.split;
    out.task_type = TaskType::multilabel;
    for (const auto& ex : d.examples) {
        LabelSet mapped;
        mapped.task_type = TaskType::multilabel;
        for (int v : ex.labels.values) {
            switch (v) {
                case 0:
                case 2: mapped.values.push_back(0); break;  // resources available
                case 1:
                case 3: mapped.values.push_back(1); break;  // resources required
                case 6: mapped.values.push_back(2); break;  // infrastructure damage
                case 5: mapped.values.push_back(3); break;  // NGO / government activities
                case 4: break;                              // paper class 5, ignored
                default:
                    throw Error::data("FIRE16 mapping: label " + std::to_string(v) + " outside classes 1..7 on " +
                                      ex.id);
            }
        }
        mapped.normalize();
        if (mapped.values.empty()) continue;  // nothing valid left
        Example copy = ex;
        copy.labels = std::move(mapped);
        out.examples.push_back(std::move(copy));
    }
    out.validate();
    return out;
}

namespace {

std::string stratum_key(const Example& ex, TaskType task) {
    if (task != TaskType::multilabel) return std::to_string(ex.labels.values.at(0));
    std::string key;
    for (size_t i = 0; i < ex.labels.values.size(); ++i)
        key += (i ? "," : "") + std::to_string(ex.labels.values[i]);
    return key;
}

// indices selected per stratum: floor(fraction*size) with a floor of 1
std::vector<size_t> stratified_pick(const Dataset& d, double fraction, uint64_t seed) {
    if (fraction <= 0.0 || fraction > 1.0) throw Error::data("fraction must be in (0,1]");
    std::map<std::string, std::vector<size_t>> strata;
    for (size_t i = 0; i < d.examples.size(); ++i) strata[stratum_key(d.examples[i], d.task_type)].push_back(i);
    Rng rng(seed);
    std::vector<size_t> picked;
    for (auto& [key, members] : strata) {
        (void)key;
        size_t want = static_cast<size_t>(std::floor(fraction * static_cast<double>(members.size())));
        if (want == 0 && !members.empty()) want = 1;
        rng.shuffle(members);
        members.resize(want);
        picked.insert(picked.end(), members.begin(), members.end());
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

}  // namespace

Dataset stratified_subsample(const Dataset& d, double fraction, uint64_t seed) {
    auto picked = stratified_pick(d, fraction, seed);
    Dataset out;
    out.name = d.name;
    out.num_classes = d.num_classes;
    out.split = d.split;
    out.task_type = d.task_type;
    out.examples.reserve(picked.size());
    for (size_t i : picked) out.examples.push_back(d.examples[i]);
    return out;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& d, double fraction, uint64_t seed) {
    auto picked = stratified_pick(d, fraction, seed);
    std::vector<uint8_t> in(d.examples.size(), 0);
    for (size_t i : picked) in[i] = 1;
    Dataset sel = d, rest = d;
    sel.examples.clear();
    rest.examples.clear();
    for (size_t i = 0; i < d.examples.size(); ++i) (in[i] ? sel : rest).examples.push_back(d.examples[i]);
    return {sel, rest};
}

void SynthConfig::validate() const {
    if (vocab_size <= 0 || num_classes < 2 || examples_per_class <= 0 || embedding_dim <= 0)
        throw Error::config("SynthConfig: sizes must be positive (and num_classes >= 2)");
    if (topic_words_per_class <= 0) throw Error::config("SynthConfig: topic_words_per_class must be positive");
    if (static_cast<long>(topic_words_per_class) * num_classes > vocab_size)
        throw Error::config("SynthConfig: topic_words_per_class * num_classes exceeds vocab_size");
    if (example_len_min <= 0 || example_len_min > example_len_max)
        throw Error::config("SynthConfig: need 0 < len_min <= len_max");
    if (pair_noise_sigma < 0.0) throw Error::config("SynthConfig: pair_noise_sigma must be >= 0");
    if (zipf_exponent <= 0.0) throw Error::config("SynthConfig: zipf_exponent must be > 0");
}

SynthOutput generate_synthetic_bilingual(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const int v = cfg.vocab_size;
    const int topics = cfg.topic_words_per_class * cfg.num_classes;
    const double kTopicRate = 0.5;  // share of positions drawn from the class topic set

    std::vector<std::string> tok_a(v), tok_b(v);
    for (int i = 0; i < v; ++i) {
        tok_a[i] = "a" + std::to_string(i);
        tok_b[i] = "b" + std::to_string(i);
    }

    // zipf CDF over filler words (indices topics..v-1)
    std::vector<double> zipf_cdf;
    const int fillers = v - topics;
    if (fillers > 0) {
        zipf_cdf.resize(fillers);
        double acc = 0.0;
        for (int r = 0; r < fillers; ++r) {
            acc += 1.0 / std::pow(static_cast<double>(r + 1), cfg.zipf_exponent);
            zipf_cdf[r] = acc;
        }
        for (auto& c : zipf_cdf) c /= acc;
    }

    SynthOutput out;
    out.pairs = EmbeddingTable(cfg.embedding_dim);
    for (int i = 0; i < v; ++i) {
        std::vector<double> base(cfg.embedding_dim);
        for (auto& x : base) x = rng.normal();
        std::vector<double> ea = base, eb = base;
        for (auto& x : ea) x += cfg.pair_noise_sigma == 0.0 ? 0.0 : rng.normal(0.0, cfg.pair_noise_sigma);
        for (auto& x : eb) x += cfg.pair_noise_sigma == 0.0 ? 0.0 : rng.normal(0.0, cfg.pair_noise_sigma);
        out.pairs.set(tok_a[i], std::move(ea));
        out.pairs.set(tok_b[i], std::move(eb));
    }

    TaskType task = cfg.num_classes == 2 ? TaskType::binary : TaskType::multiclass;
    auto make_ds = [&](const std::string& name, const std::string& lang) {
        Dataset d;
        d.name = name;
        d.num_classes = cfg.num_classes;
        d.split = Split::train;
        d.task_type = task;
        (void)lang;
        return d;
    };
    out.dataset_a = make_ds("synth-a", "aa");
    out.dataset_b = make_ds("synth-b", "bb");

    for (int c = 0; c < cfg.num_classes; ++c) {
        for (int e = 0; e < cfg.examples_per_class; ++e) {
            int len = cfg.example_len_min +
                      static_cast<int>(rng.below(static_cast<uint64_t>(cfg.example_len_max - cfg.example_len_min + 1)));
            std::vector<int> ids(len);
            for (int p = 0; p < len; ++p) {
                bool topic = fillers == 0 || rng.uniform() < kTopicRate;
                if (topic) {
                    ids[p] = c * cfg.topic_words_per_class +
                             static_cast<int>(rng.below(static_cast<uint64_t>(cfg.topic_words_per_class)));
                } else {
                    double u = rng.uniform();
                    auto it = std::lower_bound(zipf_cdf.begin(), zipf_cdf.end(), u);
                    ids[p] = topics + static_cast<int>(it - zipf_cdf.begin());
                }
            }
            std::string text_a, text_b;
            for (int p = 0; p < len; ++p) {
                if (p) {
                    text_a += ' ';
                    text_b += ' ';
                }
                text_a += tok_a[ids[p]];
                text_b += tok_b[ids[p]];
            }
            LabelSet ls;
            ls.task_type = task;
            ls.values = {c};
            std::string suffix = std::to_string(c) + "-" + std::to_string(e);
            out.dataset_a.examples.push_back({"a-" + suffix, text_a, "aa", ls});
            out.dataset_b.examples.push_back({"b-" + suffix, text_b, "bb", ls});
        }
    }

    for (int c = 0; c < cfg.num_classes; ++c)
        for (int t = 0; t < cfg.topic_words_per_class; ++t) {
            int i = c * cfg.topic_words_per_class + t;
            out.designated_pairs.emplace_back(tok_a[i], tok_b[i]);
        }

    out.dataset_a.validate();
    out.dataset_b.validate();
    return out;
}

}  // namespace gnom
