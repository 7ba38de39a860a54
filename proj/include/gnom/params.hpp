#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gnom/tensor.hpp"

namespace gnom::engine {

struct AdamConfig {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Named trainable parameters plus per-parameter Adam state. Iteration order is
// registration order, which keeps updates and checkpoints deterministic.
class ParamStore {
public:
    Tensor create(const std::string& name, int rows, int cols);
    Tensor get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    const std::vector<std::string>& names() const { return order_; }
    std::vector<Tensor> tensors() const;

    // standard Adam with bias correction; zeroes all grads afterwards
    void adam_step(const AdamConfig& cfg);

    void zero_grads();
    int64_t step_count() const { return step_; }

    // full value snapshot (used for best-epoch checkpointing)
    std::vector<std::vector<double>> snapshot_values() const;
    void restore_values(const std::vector<std::vector<double>>& snap);

    void save(const std::string& path, const std::string& config_hash) const;
    // returns the config hash stored in the file (empty when absent)
    std::string load(const std::string& path);

private:
    struct Slot {
        Tensor t;
        std::vector<double> m;
        std::vector<double> v;
    };
    std::vector<Slot> slots_;
    std::vector<std::string> order_;
    std::unordered_map<std::string, size_t> index_;
    int64_t step_ = 0;
};

}  // namespace gnom::engine
