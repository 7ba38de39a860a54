#include "gnom/params.hpp"

#include <cmath>
#include <fstream>

namespace gnom::engine {

Tensor ParamStore::create(const std::string& name, int rows, int cols) {
    if (index_.count(name)) throw Error::engine("ParamStore: duplicate parameter " + name);
    Tensor t = Tensor::zeros(rows, cols, /*requires_grad=*/true);
    index_[name] = slots_.size();
    order_.push_back(name);
    slots_.push_back({t, std::vector<double>(t.size(), 0.0), std::vector<double>(t.size(), 0.0)});
    return t;
}

Tensor ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error::engine("ParamStore: unknown parameter " + name);
    return slots_[it->second].t;
}

std::vector<Tensor> ParamStore::tensors() const {
    std::vector<Tensor> out;
    out.reserve(slots_.size());
    for (const auto& s : slots_) out.push_back(s.t);
    return out;
}

void ParamStore::adam_step(const AdamConfig& cfg) {
    ++step_;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    for (auto& s : slots_) {
        auto& val = s.t.values();
        auto& grad = s.t.grads();
        for (size_t i = 0; i < val.size(); ++i) {
            double g = grad[i];
            s.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * g;
            s.v[i] = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * g * g;
            double mhat = s.m[i] / bc1;
            double vhat = s.v[i] / bc2;
            val[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        grad.assign(val.size(), 0.0);
    }
}

void ParamStore::zero_grads() {
    for (auto& s : slots_) s.t.grads().assign(s.t.size(), 0.0);
}

std::vector<std::vector<double>> ParamStore::snapshot_values() const {
    std::vector<std::vector<double>> snap;
    snap.reserve(slots_.size());
    for (const auto& s : slots_) snap.push_back(s.t.values());
    return snap;
}

void ParamStore::restore_values(const std::vector<std::vector<double>>& snap) {
    if (snap.size() != slots_.size()) throw Error::engine("ParamStore: snapshot size mismatch");
    for (size_t i = 0; i < snap.size(); ++i) {
        if (snap[i].size() != slots_[i].t.size()) throw Error::engine("ParamStore: snapshot shape mismatch");
        Tensor t = slots_[i].t;
        t.values() = snap[i];
    }
}

void ParamStore::save(const std::string& path, const std::string& config_hash) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error::data("cannot write checkpoint " + path);
    os << "GNOM-CKPT v1";
    if (!config_hash.empty()) os << " config=" << config_hash;
    os << "\n";
    write_u32(os, static_cast<uint32_t>(slots_.size()));
    for (size_t i = 0; i < slots_.size(); ++i) {
        const auto& name = order_[i];
        const auto& t = slots_[i].t;
        write_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<uint32_t>(t.shape().size()));
        for (int d : t.shape()) write_u32(os, static_cast<uint32_t>(d));
        for (double v : t.values()) write_f64(os, v);
    }
    // optimizer state
    write_u64(os, static_cast<uint64_t>(step_));
    for (const auto& s : slots_) {
        for (double v : s.m) write_f64(os, v);
        for (double v : s.v) write_f64(os, v);
    }
    if (!os) throw Error::data("short write on checkpoint " + path);
}

std::string ParamStore::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error::data("cannot read checkpoint " + path);
    std::string header;
    std::getline(is, header);
    if (header.rfind("GNOM-CKPT v1", 0) != 0) throw Error::data("bad checkpoint header in " + path);
    std::string hash;
    auto pos = header.find("config=");
    if (pos != std::string::npos) hash = header.substr(pos + 7);

    slots_.clear();
    order_.clear();
    index_.clear();
    uint32_t count = read_u32(is);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        uint32_t ndim = read_u32(is);
        std::vector<int> shape(ndim);
        size_t sz = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            shape[d] = static_cast<int>(read_u32(is));
            sz *= static_cast<size_t>(shape[d]);
        }
        std::vector<double> vals(sz);
        for (auto& v : vals) v = read_f64(is);
        if (!is) throw Error::data("truncated checkpoint " + path);
        Tensor t = Tensor::from(std::move(vals), shape, /*requires_grad=*/true);
        index_[name] = slots_.size();
        order_.push_back(name);
        slots_.push_back({t, std::vector<double>(sz, 0.0), std::vector<double>(sz, 0.0)});
    }
    step_ = static_cast<int64_t>(read_u64(is));
    for (auto& s : slots_) {
        for (auto& v : s.m) v = read_f64(is);
        for (auto& v : s.v) v = read_f64(is);
    }
    if (!is) throw Error::data("truncated checkpoint " + path);
    return hash;
}

}  // namespace gnom::engine
