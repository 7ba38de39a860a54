#include "gnom/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "gnom/kernels.hpp"

namespace gnom::engine {

namespace {

thread_local int g_no_grad_depth = 0;

std::string shape_str(const TensorNode& n) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < n.shape.size(); ++i) os << (i ? "," : "") << n.shape[i];
    os << "]";
    return os.str();
}

void check_finite(const TensorNode& n, const char* op) {
    for (double v : n.value) {
        if (!std::isfinite(v)) throw Error::divergence(std::string("non-finite value produced by op ") + op);
    }
}

std::shared_ptr<TensorNode> make_node(std::vector<int> shape, const char* op) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    size_t sz = 1;
    for (int d : n->shape) sz *= static_cast<size_t>(d);
    n->value.assign(sz, 0.0);
    n->op = op;
    return n;
}

// Attach graph bookkeeping to an op output. Skipped entirely under NoGradScope
// or when no parent is tracked.
Tensor finish(std::shared_ptr<TensorNode> out, const char* op, std::vector<Tensor> parents,
              std::function<void(TensorNode&)> bw) {
    check_finite(*out, op);
    bool track = g_no_grad_depth == 0;
    if (track) {
        bool any = false;
        for (const auto& p : parents)
            if (p.requires_grad()) any = true;
        track = any;
    }
    if (track) {
        out->requires_grad = true;
        out->parents.reserve(parents.size());
        for (auto& p : parents) out->parents.push_back(p.handle());
        out->backward = std::move(bw);
    }
    return Tensor::wrap(std::move(out));
}

[[noreturn]] void shape_error(const char* op, const TensorNode& a) {
    throw Error::engine(std::string("op ") + op + ": bad shape " + shape_str(a));
}

[[noreturn]] void shape_error(const char* op, const TensorNode& a, const TensorNode& b) {
    throw Error::engine(std::string("op ") + op + ": incompatible shapes " + shape_str(a) + " and " +
                        shape_str(b));
}

}  // namespace

NoGradScope::NoGradScope() { ++g_no_grad_depth; }
NoGradScope::~NoGradScope() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

Tensor Tensor::zeros(int r, int c, bool requires_grad) {
    auto n = make_node({r, c}, "leaf");
    n->requires_grad = requires_grad;
    if (requires_grad) n->ensure_grad();
    return wrap(std::move(n));
}

Tensor Tensor::from(std::vector<double> values, std::vector<int> shape, bool requires_grad) {
    size_t sz = 1;
    for (int d : shape) sz *= static_cast<size_t>(d);
    if (sz != values.size()) throw Error::engine("Tensor::from: shape does not match value count");
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    if (requires_grad) n->ensure_grad();
    check_finite(*n, "leaf");
    return wrap(std::move(n));
}

Tensor Tensor::scalar(double v) { return from({v}, {1, 1}); }
Tensor Tensor::row(std::vector<double> values) {
    int n = static_cast<int>(values.size());
    return from(std::move(values), {1, n});
}

double Tensor::item() const {
    if (n_->size() != 1) throw Error::engine("Tensor::item on non-scalar");
    return n_->value[0];
}

// ---------------------------------------------------------------- matmul ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    int m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
    if (k != k2) shape_error("matmul", *a.node(), *b.node());
    auto out = make_node({m, n}, "matmul");
    kernels::matmul(a.values().data(), b.values().data(), out->value.data(), m, k, n);
    return finish(std::move(out), "matmul", {a, b}, [m, k, n](TensorNode& o) {
        auto& pa = *o.parents[0];
        auto& pb = *o.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();  // gA += G * B^T
            kernels::matmul_nt(o.grad.data(), pb.value.data(), pa.grad.data(), m, n, k, true);
        }
        if (pb.requires_grad) {
            pb.ensure_grad();  // gB += A^T * G
            kernels::matmul_tn(pa.value.data(), o.grad.data(), pb.grad.data(), k, m, n, true);
        }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    int m = a.rows(), k = a.cols(), n = b.rows();
    if (k != b.cols()) shape_error("matmul_nt", *a.node(), *b.node());
    auto out = make_node({m, n}, "matmul_nt");
    kernels::matmul_nt(a.values().data(), b.values().data(), out->value.data(), m, k, n);
    return finish(std::move(out), "matmul_nt", {a, b}, [m, k, n](TensorNode& o) {
        auto& pa = *o.parents[0];
        auto& pb = *o.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();  // gA += G * B
            kernels::matmul(o.grad.data(), pb.value.data(), pa.grad.data(), m, n, k, true);
        }
        if (pb.requires_grad) {
            pb.ensure_grad();  // gB += G^T * A
            kernels::matmul_tn(o.grad.data(), pa.value.data(), pb.grad.data(), n, m, k, true);
        }
    });
}

// ------------------------------------------------------------ elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    int m = a.rows(), n = a.cols();
    bool broadcast = b.rows() == 1 && b.cols() == n && m != 1;
    if (!broadcast && (b.rows() != m || b.cols() != n)) shape_error("add", *a.node(), *b.node());
    auto out = make_node({m, n}, "add");
    const auto& av = a.values();
    const auto& bv = b.values();
    if (broadcast) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                out->value[static_cast<size_t>(i) * n + j] = av[static_cast<size_t>(i) * n + j] + bv[j];
    } else {
        for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = av[i] + bv[i];
    }
    return finish(std::move(out), "add", {a, b}, [m, n, broadcast](TensorNode& o) {
        auto& pa = *o.parents[0];
        auto& pb = *o.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pa.grad[i] += o.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            if (broadcast) {
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) pb.grad[j] += o.grad[static_cast<size_t>(i) * n + j];
            } else {
                for (size_t i = 0; i < o.grad.size(); ++i) pb.grad[i] += o.grad[i];
            }
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mul", *a.node(), *b.node());
    auto out = make_node({a.rows(), a.cols()}, "mul");
    const auto& av = a.values();
    const auto& bv = b.values();
    for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = av[i] * bv[i];
    return finish(std::move(out), "mul", {a, b}, [](TensorNode& o) {
        auto& pa = *o.parents[0];
        auto& pb = *o.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pa.grad[i] += o.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pb.grad[i] += o.grad[i] * pa.value[i];
        }
    });
}

Tensor scale(const Tensor& a, double c) {
    auto out = make_node({a.rows(), a.cols()}, "scale");
    const auto& av = a.values();
    for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = av[i] * c;
    return finish(std::move(out), "scale", {a}, [c](TensorNode& o) {
        auto& pa = *o.parents[0];
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) pa.grad[i] += o.grad[i] * c;
    });
}

// ------------------------------------------------------------ concat/slice ----

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw Error::engine("concat_cols: empty input");
    int m = parts[0].rows();
    int total = 0;
    for (const auto& p : parts) {
        if (p.rows() != m) shape_error("concat_cols", *parts[0].node(), *p.node());
        total += p.cols();
    }
    auto out = make_node({m, total}, "concat_cols");
    int off = 0;
    std::vector<int> offsets;
    for (const auto& p : parts) {
        offsets.push_back(off);
        int pc = p.cols();
        for (int i = 0; i < m; ++i)
            std::memcpy(out->value.data() + static_cast<size_t>(i) * total + off,
                        p.values().data() + static_cast<size_t>(i) * pc, sizeof(double) * static_cast<size_t>(pc));
        off += pc;
    }
    return finish(std::move(out), "concat_cols", parts, [m, total, offsets](TensorNode& o) {
        for (size_t pi = 0; pi < o.parents.size(); ++pi) {
            auto& p = *o.parents[pi];
            if (!p.requires_grad) continue;
            p.ensure_grad();
            int pc = p.cols();
            int off = offsets[pi];
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < pc; ++j)
                    p.grad[static_cast<size_t>(i) * pc + j] += o.grad[static_cast<size_t>(i) * total + off + j];
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw Error::engine("concat_rows: empty input");
    int n = parts[0].cols();
    int total = 0;
    for (const auto& p : parts) {
        if (p.cols() != n) shape_error("concat_rows", *parts[0].node(), *p.node());
        total += p.rows();
    }
    auto out = make_node({total, n}, "concat_rows");
    size_t off = 0;
    std::vector<size_t> offsets;
    for (const auto& p : parts) {
        offsets.push_back(off);
        std::memcpy(out->value.data() + off * n, p.values().data(), sizeof(double) * p.size());
        off += static_cast<size_t>(p.rows());
    }
    return finish(std::move(out), "concat_rows", parts, [n, offsets](TensorNode& o) {
        for (size_t pi = 0; pi < o.parents.size(); ++pi) {
            auto& p = *o.parents[pi];
            if (!p.requires_grad) continue;
            p.ensure_grad();
            size_t base = offsets[pi] * n;
            for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += o.grad[base + i];
        }
    });
}

Tensor slice_rows(const Tensor& a, int r0, int count) {
    if (r0 < 0 || count < 0 || r0 + count > a.rows()) shape_error("slice_rows", *a.node());
    int n = a.cols();
    auto out = make_node({count, n}, "slice_rows");
    std::memcpy(out->value.data(), a.values().data() + static_cast<size_t>(r0) * n,
                sizeof(double) * out->value.size());
    return finish(std::move(out), "slice_rows", {a}, [r0, n](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        size_t base = static_cast<size_t>(r0) * n;
        for (size_t i = 0; i < o.grad.size(); ++i) p.grad[base + i] += o.grad[i];
    });
}

Tensor slice_cols(const Tensor& a, int c0, int count) {
    if (c0 < 0 || count < 0 || c0 + count > a.cols()) shape_error("slice_cols", *a.node());
    int m = a.rows(), n = a.cols();
    auto out = make_node({m, count}, "slice_cols");
    for (int i = 0; i < m; ++i)
        std::memcpy(out->value.data() + static_cast<size_t>(i) * count,
                    a.values().data() + static_cast<size_t>(i) * n + c0, sizeof(double) * static_cast<size_t>(count));
    return finish(std::move(out), "slice_cols", {a}, [c0, m, n, count](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < count; ++j)
                p.grad[static_cast<size_t>(i) * n + c0 + j] += o.grad[static_cast<size_t>(i) * count + j];
    });
}

Tensor rows(const Tensor& table, const std::vector<int>& ids) {
    int v = table.rows(), d = table.cols();
    auto out = make_node({static_cast<int>(ids.size()), d}, "rows");
    for (size_t i = 0; i < ids.size(); ++i) {
        int id = ids[i];
        if (id >= v) throw Error::engine("op rows: id out of range");
        if (id < 0) continue;  // stays a zero row
        std::memcpy(out->value.data() + i * d, table.values().data() + static_cast<size_t>(id) * d,
                    sizeof(double) * static_cast<size_t>(d));
    }
    return finish(std::move(out), "rows", {table}, [ids, d](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0) continue;
            double* dst = p.grad.data() + static_cast<size_t>(ids[i]) * d;
            const double* src = o.grad.data() + i * d;
            for (int j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
}

Tensor scale_rows(const Tensor& a, const Tensor& s) {
    int m = a.rows(), n = a.cols();
    if (static_cast<int>(s.size()) != m) shape_error("scale_rows", *a.node(), *s.node());
    auto out = make_node({m, n}, "scale_rows");
    const auto& av = a.values();
    const auto& sv = s.values();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out->value[static_cast<size_t>(i) * n + j] = av[static_cast<size_t>(i) * n + j] * sv[static_cast<size_t>(i)];
    return finish(std::move(out), "scale_rows", {a, s}, [m, n](TensorNode& o) {
        auto& pa = *o.parents[0];
        auto& ps = *o.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    pa.grad[static_cast<size_t>(i) * n + j] +=
                        o.grad[static_cast<size_t>(i) * n + j] * ps.value[static_cast<size_t>(i)];
        }
        if (ps.requires_grad) {
            ps.ensure_grad();
            for (int i = 0; i < m; ++i) {
                double acc = 0.0;
                for (int j = 0; j < n; ++j)
                    acc += o.grad[static_cast<size_t>(i) * n + j] * pa.value[static_cast<size_t>(i) * n + j];
                ps.grad[static_cast<size_t>(i)] += acc;
            }
        }
    });
}

// ---------------------------------------------------------------- softmax ----

namespace {
void softmax_row_masked(const double* in, double* out, int n, const uint8_t* keep) {
    double mx = -1.0;
    bool any = false;
    for (int j = 0; j < n; ++j) {
        if (keep && !keep[j]) continue;
        if (!any || in[j] > mx) mx = in[j];
        any = true;
    }
    if (!any) {
        for (int j = 0; j < n; ++j) out[j] = 0.0;
        return;
    }
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        if (keep && !keep[j]) {
            out[j] = 0.0;
        } else {
            out[j] = std::exp(in[j] - mx);
            sum += out[j];
        }
    }
    for (int j = 0; j < n; ++j) out[j] /= sum;
}

void softmax_backward_rows(TensorNode& o, TensorNode& p) {
    int m = o.rows(), n = o.cols();
    for (int i = 0; i < m; ++i) {
        const double* y = o.value.data() + static_cast<size_t>(i) * n;
        const double* g = o.grad.data() + static_cast<size_t>(i) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += g[j] * y[j];
        double* pg = p.grad.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) pg[j] += y[j] * (g[j] - dot);
    }
}
}  // namespace

Tensor softmax_rows(const Tensor& a) {
    int m = a.rows(), n = a.cols();
    auto out = make_node({m, n}, "softmax_rows");
    for (int i = 0; i < m; ++i)
        softmax_row_masked(a.values().data() + static_cast<size_t>(i) * n,
                           out->value.data() + static_cast<size_t>(i) * n, n, nullptr);
    return finish(std::move(out), "softmax_rows", {a}, [](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        softmax_backward_rows(o, p);
    });
}

Tensor masked_softmax_rows(const Tensor& a, const std::vector<uint8_t>& keep) {
    int m = a.rows(), n = a.cols();
    if (static_cast<int>(keep.size()) != n) shape_error("masked_softmax_rows", *a.node());
    auto out = make_node({m, n}, "masked_softmax_rows");
    for (int i = 0; i < m; ++i)
        softmax_row_masked(a.values().data() + static_cast<size_t>(i) * n,
                           out->value.data() + static_cast<size_t>(i) * n, n, keep.data());
    // masked outputs are exactly 0, so y*(g-dot) already vanishes there
    return finish(std::move(out), "masked_softmax_rows", {a}, [](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        softmax_backward_rows(o, p);
    });
}

Tensor masked_fill(const Tensor& a, const std::vector<uint8_t>& mask, double value) {
    if (mask.size() != a.size()) shape_error("masked_fill", *a.node());
    auto out = make_node({a.rows(), a.cols()}, "masked_fill");
    const auto& av = a.values();
    for (size_t i = 0; i < av.size(); ++i) out->value[i] = mask[i] ? value : av[i];
    return finish(std::move(out), "masked_fill", {a}, [mask](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i)
            if (!mask[i]) p.grad[i] += o.grad[i];
    });
}

// ------------------------------------------------------------- pointwise ----

Tensor sigmoid(const Tensor& a) {
    auto out = make_node({a.rows(), a.cols()}, "sigmoid");
    const auto& av = a.values();
    for (size_t i = 0; i < av.size(); ++i) {
        double x = av[i];
        out->value[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    return finish(std::move(out), "sigmoid", {a}, [](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) {
            double y = o.value[i];
            p.grad[i] += o.grad[i] * y * (1.0 - y);
        }
    });
}

Tensor tanh_(const Tensor& a) {
    auto out = make_node({a.rows(), a.cols()}, "tanh");
    const auto& av = a.values();
    for (size_t i = 0; i < av.size(); ++i) out->value[i] = std::tanh(av[i]);
    return finish(std::move(out), "tanh", {a}, [](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) {
            double y = o.value[i];
            p.grad[i] += o.grad[i] * (1.0 - y * y);
        }
    });
}

Tensor gelu(const Tensor& a) {
    // exact erf form; smooth everywhere, which keeps finite-difference checks clean
    auto out = make_node({a.rows(), a.cols()}, "gelu");
    const auto& av = a.values();
    for (size_t i = 0; i < av.size(); ++i) {
        double x = av[i];
        out->value[i] = 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
    }
    return finish(std::move(out), "gelu", {a}, [](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        constexpr double inv_sqrt_2pi = 0.3989422804014327;
        for (size_t i = 0; i < o.grad.size(); ++i) {
            double x = p.value[i];
            double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
            double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
            p.grad[i] += o.grad[i] * (cdf + x * pdf);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    int m = x.rows(), n = x.cols();
    if (gain.size() != static_cast<size_t>(n) || bias.size() != static_cast<size_t>(n))
        shape_error("layer_norm", *x.node(), *gain.node());
    auto out = make_node({m, n}, "layer_norm");
    std::vector<double> mean(m), inv_std(m);
    const auto& xv = x.values();
    for (int i = 0; i < m; ++i) {
        const double* row = xv.data() + static_cast<size_t>(i) * n;
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += row[j];
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= n;
        mean[i] = mu;
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        double* orow = out->value.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) orow[j] = gain.values()[j] * (row[j] - mu) * inv_std[i] + bias.values()[j];
    }
    return finish(std::move(out), "layer_norm", {x, gain, bias},
                  [m, n, mean, inv_std](TensorNode& o) {
                      auto& px = *o.parents[0];
                      auto& pg = *o.parents[1];
                      auto& pb = *o.parents[2];
                      for (int i = 0; i < m; ++i) {
                          const double* xrow = px.value.data() + static_cast<size_t>(i) * n;
                          const double* grow = o.grad.data() + static_cast<size_t>(i) * n;
                          double is = inv_std[i];
                          if (pg.requires_grad || pb.requires_grad) {
                              pg.ensure_grad();
                              pb.ensure_grad();
                              for (int j = 0; j < n; ++j) {
                                  double xhat = (xrow[j] - mean[i]) * is;
                                  pg.grad[j] += grow[j] * xhat;
                                  pb.grad[j] += grow[j];
                              }
                          }
                          if (px.requires_grad) {
                              px.ensure_grad();
                              // d/dx of gamma*xhat+beta with xhat = (x-mu)/sqrt(var+eps)
                              double sum_gg = 0.0, sum_ggx = 0.0;
                              for (int j = 0; j < n; ++j) {
                                  double gg = grow[j] * pg.value[j];
                                  double xhat = (xrow[j] - mean[i]) * is;
                                  sum_gg += gg;
                                  sum_ggx += gg * xhat;
                              }
                              double* pxg = px.grad.data() + static_cast<size_t>(i) * n;
                              for (int j = 0; j < n; ++j) {
                                  double gg = grow[j] * pg.value[j];
                                  double xhat = (xrow[j] - mean[i]) * is;
                                  pxg[j] += is * (gg - (sum_gg + xhat * sum_ggx) / n);
                              }
                          }
                      }
                  });
}

// -------------------------------------------------------------- reductions ----

Tensor reduce_sum(const Tensor& a) {
    auto out = make_node({1, 1}, "reduce_sum");
    double s = 0.0;
    for (double v : a.values()) s += v;
    out->value[0] = s;
    return finish(std::move(out), "reduce_sum", {a}, [](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        double g = o.grad[0];
        for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
    });
}

Tensor reduce_mean(const Tensor& a) {
    auto out = make_node({1, 1}, "reduce_mean");
    double s = 0.0;
    for (double v : a.values()) s += v;
    size_t n = a.size();
    out->value[0] = s / static_cast<double>(n);
    return finish(std::move(out), "reduce_mean", {a}, [n](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        double g = o.grad[0] / static_cast<double>(n);
        for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
    });
}

// ------------------------------------------------------------------ sparse ----

Tensor spmm(std::shared_ptr<const Csr> s, std::shared_ptr<const Csr> st, const Tensor& x) {
    if (!s || !st) throw Error::engine("spmm: null matrix");
    if (s->cols != x.rows()) throw Error::engine("op spmm: adjacency cols != feature rows");
    int d = x.cols();
    auto out = make_node({s->rows, d}, "spmm");
    kernels::spmm(*s, x.values().data(), out->value.data(), d);
    return finish(std::move(out), "spmm", {x}, [st, d](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        kernels::spmm(*st, o.grad.data(), p.grad.data(), d, true);
    });
}

// ------------------------------------------------------------------ losses ----

Tensor softmax_cross_entropy(const Tensor& logits, int target) {
    size_t n = logits.size();
    if (target < 0 || static_cast<size_t>(target) >= n)
        throw Error::engine("softmax_cross_entropy: target out of range");
    const auto& z = logits.values();
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double lse = 0.0;
    for (double v : z) lse += std::exp(v - mx);
    lse = mx + std::log(lse);
    auto out = make_node({1, 1}, "softmax_cross_entropy");
    out->value[0] = lse - z[static_cast<size_t>(target)];
    return finish(std::move(out), "softmax_cross_entropy", {logits}, [target, mx](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        double g = o.grad[0];
        double denom = 0.0;
        for (double v : p.value) denom += std::exp(v - mx);
        for (size_t i = 0; i < p.value.size(); ++i) {
            double soft = std::exp(p.value[i] - mx) / denom;
            p.grad[i] += g * (soft - (static_cast<int>(i) == target ? 1.0 : 0.0));
        }
    });
}

Tensor bce_with_logits_mean(const Tensor& logits, std::vector<uint8_t> hot) {
    size_t n = logits.size();
    if (hot.size() != n) throw Error::engine("bce_with_logits_mean: size mismatch");
    const auto& z = logits.values();
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double x = z[i], t = hot[i] ? 1.0 : 0.0;
        // stable form of log(1+e^x) - t*x
        total += std::max(x, 0.0) - t * x + std::log1p(std::exp(-std::fabs(x)));
    }
    auto out = make_node({1, 1}, "bce_with_logits_mean");
    out->value[0] = total / static_cast<double>(n);
    return finish(std::move(out), "bce_with_logits_mean", {logits}, [hot, n](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        double g = o.grad[0] / static_cast<double>(n);
        for (size_t i = 0; i < n; ++i) {
            double x = p.value[i];
            double sig = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
            p.grad[i] += g * (sig - (hot[i] ? 1.0 : 0.0));
        }
    });
}

Tensor dropout(const Tensor& a, double rate, Rng& rng) {
    if (rate <= 0.0) return a;
    if (rate >= 1.0) throw Error::engine("dropout: rate must be < 1");
    double keep_scale = 1.0 / (1.0 - rate);
    std::vector<uint8_t> keep(a.size());
    for (size_t i = 0; i < keep.size(); ++i) keep[i] = rng.uniform() >= rate ? 1 : 0;
    auto out = make_node({a.rows(), a.cols()}, "dropout");
    const auto& av = a.values();
    for (size_t i = 0; i < av.size(); ++i) out->value[i] = keep[i] ? av[i] * keep_scale : 0.0;
    return finish(std::move(out), "dropout", {a}, [keep, keep_scale](TensorNode& o) {
        auto& p = *o.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i)
            if (keep[i]) p.grad[i] += o.grad[i] * keep_scale;
    });
}

// ---------------------------------------------------------------- backward ----

void backward(const Tensor& loss) {
    if (loss.size() != 1) throw Error::engine("backward: loss must be scalar");
    if (!loss.requires_grad()) return;  // nothing tracked

    // iterative post-order DFS; parents visited before the node lands in topo
    std::vector<TensorNode*> topo;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    std::vector<TensorNode*> touched;
    stack.push_back({loss.node(), 0});
    loss.node()->visited = true;
    touched.push_back(loss.node());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorNode* p = node->parents[idx++].get();
            if (!p->visited) {
                p->visited = true;
                touched.push_back(p);
                stack.push_back({p, 0});
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }
    for (TensorNode* n : touched) n->visited = false;

    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward && n->requires_grad && !n->grad.empty()) n->backward(*n);
    }
}

double finite_difference_check(const std::function<double()>& f, const std::vector<Tensor>& params,
                               double epsilon) {
    // f computes the loss, runs engine::backward on it when grads are enabled,
    // and returns the loss value. The probe passes below run under NoGradScope,
    // where backward() is a no-op.
    for (const auto& p : params) {
        Tensor t = p;
        t.grads().assign(t.size(), 0.0);
    }
    f();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.push_back(p.grads());

    double worst = 0.0;
    NoGradScope ng;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor param = params[pi];
        auto& vals = param.values();
        for (size_t i = 0; i < vals.size(); ++i) {
            double orig = vals[i];
            vals[i] = orig + epsilon;
            double up = f();
            vals[i] = orig - epsilon;
            double down = f();
            vals[i] = orig;
            double numeric = (up - down) / (2.0 * epsilon);
            double a = analytic[pi][i];
            double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
            worst = std::max(worst, std::fabs(a - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace gnom::engine
