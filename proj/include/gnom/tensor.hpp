#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gnom/common.hpp"
#include "gnom/sparse.hpp"

namespace gnom::engine {

// While a NoGradScope is alive on this thread, ops do not record the
// computation graph. Used by evaluation and by finite differences.
class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;
};

bool grad_enabled();

struct TensorNode {
    std::vector<int> shape;  // 1 or 2 dims; row-major
    std::vector<double> value;
    std::vector<double> grad;  // allocated on demand, same size as value
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward;  // accumulates into parents' grads
    bool visited = false;                       // scratch for topo sort

    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }
    size_t size() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

// Cheap shared handle to a node in the tape.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(int rows, int cols, bool requires_grad = false);
    static Tensor from(std::vector<double> values, std::vector<int> shape, bool requires_grad = false);
    static Tensor scalar(double v);
    static Tensor row(std::vector<double> values);  // [1,n]

    bool defined() const { return static_cast<bool>(n_); }
    int rows() const { return n_->rows(); }
    int cols() const { return n_->cols(); }
    size_t size() const { return n_->size(); }
    const std::vector<int>& shape() const { return n_->shape; }
    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool b) {
        n_->requires_grad = b;
        if (b) n_->ensure_grad();
    }

    std::vector<double>& values() { return n_->value; }
    const std::vector<double>& values() const { return n_->value; }
    std::vector<double>& grads() { return n_->grad; }
    const std::vector<double>& grads() const { return n_->grad; }

    double item() const;
    double at(int r, int c) const { return n_->value[static_cast<size_t>(r) * cols() + c]; }

    TensorNode* node() const { return n_.get(); }
    std::shared_ptr<TensorNode> handle() const { return n_; }

    static Tensor wrap(std::shared_ptr<TensorNode> n) {
        Tensor t;
        t.n_ = std::move(n);
        return t;
    }

private:
    std::shared_ptr<TensorNode> n_;
};

// ---- forward ops (graph-recording when any input is tracked) ----

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]x[k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k]x[n,k]^T
Tensor add(const Tensor& a, const Tensor& b);        // same shape, or [m,n]+[1,n] row broadcast
Tensor mul(const Tensor& a, const Tensor& b);        // elementwise
Tensor scale(const Tensor& a, double c);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int r0, int count);
Tensor slice_cols(const Tensor& a, int c0, int count);
// gather rows by id; id < 0 yields a zero row (out-of-graph tokens)
Tensor rows(const Tensor& table, const std::vector<int>& ids);
// row i of a multiplied by s_i; s is [1,m] or [m,1]
Tensor scale_rows(const Tensor& a, const Tensor& s);
Tensor softmax_rows(const Tensor& a);
// softmax over columns j with keep[j] != 0; dropped positions are exactly 0;
// a row with no kept position comes out all-zero
Tensor masked_softmax_rows(const Tensor& a, const std::vector<uint8_t>& keep);
Tensor masked_fill(const Tensor& a, const std::vector<uint8_t>& mask, double value);  // mask!=0 -> value
Tensor sigmoid(const Tensor& a);
Tensor tanh_(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor reduce_sum(const Tensor& a);   // scalar [1,1]
Tensor reduce_mean(const Tensor& a);  // scalar [1,1]
// y = S x ; st must be the transpose of s (grad path). S carries no gradient.
Tensor spmm(std::shared_ptr<const Csr> s, std::shared_ptr<const Csr> st, const Tensor& x);
Tensor softmax_cross_entropy(const Tensor& logits, int target);              // scalar
Tensor bce_with_logits_mean(const Tensor& logits, std::vector<uint8_t> hot); // scalar
Tensor dropout(const Tensor& a, double rate, Rng& rng);

// ---- reverse pass ----

// Populates grads of every tracked node reachable from loss. loss must be scalar.
void backward(const Tensor& loss);

// Runs f() once with grad recording to get analytic gradients, then central
// finite differences per parameter coordinate. Returns the max over
// coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
double finite_difference_check(const std::function<double()>& f, const std::vector<Tensor>& params,
                               double epsilon = 1e-5);

}  // namespace gnom::engine
