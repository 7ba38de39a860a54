#include "gnom/wordgraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gnom/common.hpp"
#include "gnom/kernels.hpp"

namespace gnom {

GraphNodes GraphNodes::from(const Vocabulary& v) {
    GraphNodes g;
    g.vocab_to_node.assign(static_cast<size_t>(v.size()), -1);
    for (int id : v.eligible_ids()) {
        g.vocab_to_node[static_cast<size_t>(id)] = static_cast<int>(g.node_to_vocab.size());
        g.node_to_vocab.push_back(id);
        g.tokens.push_back(v.token(id));
    }
    return g;
}

std::vector<std::vector<int>> ids_of(const Vocabulary& v, const std::vector<const Dataset*>& corpora) {
    std::vector<std::vector<int>> out;
    for (const auto* d : corpora) {
        if (!d) continue;
        for (const auto& ex : d->examples) {
            auto toks = tokenize(ex.text);
            std::vector<int> ids(toks.size());
            for (size_t i = 0; i < toks.size(); ++i) ids[i] = v.id(toks[i]);
            out.push_back(std::move(ids));
        }
    }
    return out;
}

SparseMatrix cooccurrence_matrix(const std::vector<std::vector<int>>& examples, const GraphNodes& nodes,
                                 int window) {
    if (window < 1) throw Error::config("cooccurrence window must be >= 1");
    const int n = nodes.count();

    // shard examples over threads; integer counts merge exactly regardless of
    // shard order, so the parallel result matches a serial pass bit for bit
    int shards = 1;
#ifdef _OPENMP
    if (kernels::parallel_enabled()) shards = std::max(1, omp_get_max_threads());
#endif
    std::vector<std::unordered_map<uint64_t, double>> local(static_cast<size_t>(shards));
#pragma omp parallel for schedule(static) num_threads(shards) if (shards > 1)
    for (size_t e = 0; e < examples.size(); ++e) {
        int shard = 0;
#ifdef _OPENMP
        shard = omp_get_thread_num();
#endif
        auto& acc = local[static_cast<size_t>(shard)];
        const auto& ex = examples[e];
        const int len = static_cast<int>(ex.size());
        for (int p = 0; p < len; ++p) {
            int vi = ex[p];
            int ni = vi >= 0 && vi < static_cast<int>(nodes.vocab_to_node.size()) ? nodes.vocab_to_node[vi] : -1;
            if (ni < 0) continue;
            for (int q = p + 1; q < len && q - p <= window; ++q) {
                int vj = ex[q];
                int nj = vj >= 0 && vj < static_cast<int>(nodes.vocab_to_node.size()) ? nodes.vocab_to_node[vj] : -1;
                if (nj < 0 || nj == ni) continue;
                int lo = std::min(ni, nj), hi = std::max(ni, nj);
                acc[(static_cast<uint64_t>(lo) << 32) | static_cast<uint64_t>(hi)] += 1.0;
            }
        }
    }

    SparseMatrix c(n, n);
    for (const auto& acc : local) {
        for (const auto& [key, count] : acc) {
            int lo = static_cast<int>(key >> 32);
            int hi = static_cast<int>(key & 0xffffffffu);
            c.accumulate(lo, hi, count);
            c.accumulate(hi, lo, count);
        }
    }
    c.finalize();
    return c;
}

SparseMatrix embedding_similarity_matrix(const EmbeddingTable& t, const GraphNodes& nodes, double floor) {
    const int n = nodes.count();
    const int dim = t.dim();
    std::vector<double> vecs(static_cast<size_t>(n) * std::max(dim, 1), 0.0);
    const std::vector<double>* unk = t.has("<unk>") ? &t.get("<unk>") : nullptr;
    for (int i = 0; i < n; ++i) {
        const std::vector<double>* src = t.has(nodes.tokens[static_cast<size_t>(i)])
                                             ? &t.get(nodes.tokens[static_cast<size_t>(i)])
                                             : unk;
        if (src) std::copy(src->begin(), src->end(), vecs.begin() + static_cast<size_t>(i) * dim);
    }
    std::vector<double> norm(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < dim; ++k) {
            double x = vecs[static_cast<size_t>(i) * dim + k];
            s += x * x;
        }
        norm[static_cast<size_t>(i)] = std::sqrt(s);
    }

    std::vector<std::vector<std::pair<int, double>>> upper(static_cast<size_t>(n));
    const bool par = kernels::parallel_enabled() && static_cast<long>(n) * n * dim > 1000000;
#pragma omp parallel for schedule(dynamic, 16) if (par)
    for (int i = 0; i < n; ++i) {
        if (norm[static_cast<size_t>(i)] == 0.0) continue;  // zero-norm: cosine defined as 0
        const double* vi = vecs.data() + static_cast<size_t>(i) * dim;
        auto& row = upper[static_cast<size_t>(i)];
        for (int j = i + 1; j < n; ++j) {
            if (norm[static_cast<size_t>(j)] == 0.0) continue;
            const double* vj = vecs.data() + static_cast<size_t>(j) * dim;
            double dot = 0.0;
            for (int k = 0; k < dim; ++k) dot += vi[k] * vj[k];
            double cos = dot / (norm[static_cast<size_t>(i)] * norm[static_cast<size_t>(j)]);
            if (cos > floor && cos > 0.0) row.emplace_back(j, cos);
        }
    }

    SparseMatrix e(n, n);
    for (int i = 0; i < n; ++i)
        for (const auto& [j, cos] : upper[static_cast<size_t>(i)]) {
            e.accumulate(i, j, cos);
            e.accumulate(j, i, cos);
        }
    e.finalize();
    return e;
}

SparseMatrix row_normalize(const SparseMatrix& m) { return m.row_normalized(); }

WordGraph build_graph(const GraphNodes& nodes, const SparseMatrix& cooc, const SparseMatrix& emb_sim,
                      double tau, bool use_embedding_edges, const EmbeddingTable* node_init_source) {
    const int n = nodes.count();
    if (cooc.rows() != n || cooc.cols() != n)
        throw Error::data("build_graph: co-occurrence matrix does not match node count");
    if (use_embedding_edges && (emb_sim.rows() != n || emb_sim.cols() != n))
        throw Error::data("build_graph: similarity matrix does not match node count");

    // row_normalize is idempotent, so normalizing here accepts raw or
    // pre-normalized inputs alike
    SparseMatrix s = cooc.row_normalized();
    if (use_embedding_edges) {
        SparseMatrix e_norm = emb_sim.row_normalized();
        for (const auto& en : e_norm.entries()) s.accumulate(en.row, en.col, en.weight);
        s.finalize();
    }

    WordGraph g;
    g.node_tokens = nodes.tokens;
    g.tau = tau;
    // edge iff max(S_ij, S_ji) > tau, strict
    for (const auto& en : s.entries()) {
        if (en.row >= en.col) continue;
        double w = std::max(en.weight, s.at(en.col, en.row));
        if (w > tau) g.edges.push_back({en.row, en.col, w});
    }

    if (node_init_source) {
        EmbeddingTable init(node_init_source->dim());
        const std::vector<double>* unk =
            node_init_source->has("<unk>") ? &node_init_source->get("<unk>") : nullptr;
        for (const auto& tok : g.node_tokens) {
            if (node_init_source->has(tok))
                init.set(tok, node_init_source->get(tok));
            else if (unk)
                init.set(tok, *unk);
        }
        g.node_init = std::move(init);
    }
    return g;
}

SparseMatrix normalized_adjacency(const WordGraph& g) {
    const int n = g.node_count();
    SparseMatrix a(n, n);
    for (int i = 0; i < n; ++i) a.accumulate(i, i, 1.0);  // self-loops
    for (const auto& e : g.edges) {
        a.accumulate(e.a, e.b, e.weight);
        a.accumulate(e.b, e.a, e.weight);
    }
    a.finalize();
    std::vector<double> deg(static_cast<size_t>(n), 0.0);
    for (const auto& en : a.entries()) deg[static_cast<size_t>(en.row)] += en.weight;
    SparseMatrix out(n, n);
    for (const auto& en : a.entries()) {
        double d = std::sqrt(deg[static_cast<size_t>(en.row)]) * std::sqrt(deg[static_cast<size_t>(en.col)]);
        out.push_sorted(en.row, en.col, en.weight / d);
    }
    return out;
}

void WordGraph::save(const std::string& path, const std::string& config_hash) const {
    std::ofstream os(path);
    if (!os) throw Error::data("cannot write graph file " + path);
    os << "GNOM-GRAPH v1 tau=" << format_double(tau);
    if (!config_hash.empty()) os << " config=" << config_hash;
    os << "\n";
    for (const auto& e : edges)
        os << node_tokens[static_cast<size_t>(e.a)] << '\t' << node_tokens[static_cast<size_t>(e.b)] << '\t'
           << format_double(e.weight) << "\n";
    if (!os) throw Error::data("short write on " + path);
}

WordGraph WordGraph::load(const std::string& path, const Vocabulary& v) {
    std::ifstream is(path);
    if (!is) throw Error::data("cannot open graph file " + path);
    std::string header;
    if (!std::getline(is, header) || header.rfind("GNOM-GRAPH v1 tau=", 0) != 0)
        throw Error::data("bad graph header in " + path);
    std::string tau_str = header.substr(18);
    if (auto sp = tau_str.find(' '); sp != std::string::npos) tau_str = tau_str.substr(0, sp);

    GraphNodes nodes = GraphNodes::from(v);
    std::unordered_map<std::string, int> node_of;
    for (int i = 0; i < nodes.count(); ++i) node_of[nodes.tokens[static_cast<size_t>(i)]] = i;

    WordGraph g;
    g.node_tokens = nodes.tokens;
    g.tau = std::stod(tau_str);
    std::string line;
    size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() != 3)
            throw Error::data(path + ":" + std::to_string(line_no) + ": expected src<TAB>dst<TAB>weight");
        auto ia = node_of.find(fields[0]);
        auto ib = node_of.find(fields[1]);
        if (ia == node_of.end() || ib == node_of.end())
            throw Error::data(path + ":" + std::to_string(line_no) + ": token not graph-eligible in vocabulary");
        int a = ia->second, b = ib->second;
        if (a > b) std::swap(a, b);
        g.edges.push_back({a, b, std::stod(fields[2])});
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const Edge& x, const Edge& y) {
        return x.a != y.a ? x.a < y.a : x.b < y.b;
    });
    return g;
}

}  // namespace gnom
