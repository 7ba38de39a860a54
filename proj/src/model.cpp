#include "gnom/model.hpp"

#include <cmath>

namespace gnom {

using engine::ParamStore;
using engine::Tensor;

const char* to_string(Mode m) {
    switch (m) {
        case Mode::TR: return "tr";
        case Mode::TR_GF: return "tr+gf";
        case Mode::TR_GF_ME_IE: return "tr+gf-e+ie";
        case Mode::GNOM: return "gnom";
    }
    return "?";
}

Mode mode_from_string(const std::string& s) {
    if (s == "tr") return Mode::TR;
    if (s == "tr+gf") return Mode::TR_GF;
    if (s == "tr+gf-e+ie") return Mode::TR_GF_ME_IE;
    if (s == "gnom") return Mode::GNOM;
    throw Error::config("unknown mode '" + s + "' (expected tr, tr+gf, tr+gf-e+ie or gnom)");
}

bool mode_uses_graph(Mode m) { return m != Mode::TR; }
bool mode_uses_attention(Mode m) { return m == Mode::TR_GF_ME_IE || m == Mode::GNOM; }

void TRConfig::validate() const {
    if (vocab_size <= 0) throw Error::config("TRConfig: vocab_size must be positive");
    if (embed_dim <= 0 || num_heads <= 0 || embed_dim % num_heads != 0)
        throw Error::config("TRConfig: embed_dim must be divisible by num_heads");
    if (max_len < 2) throw Error::config("TRConfig: max_len must be >= 2");
    if (num_layers < 1 || ff_dim <= 0) throw Error::config("TRConfig: bad layer sizes");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw Error::config("TRConfig: dropout_rate in [0,1)");
}

void GFConfig::validate() const {
    if (node_dim <= 0) throw Error::config("GFConfig: node_dim must be positive");
    if (hops < 1) throw Error::config("GFConfig: hops must be >= 1");
}

namespace model {

TrOut tr_encode(ParamStore& ps, const TRConfig& cfg, const std::vector<int>& ids,
                const std::vector<uint8_t>& pad_mask, Rng* dropout_rng, const std::vector<int>* pos_ids) {
    const int len = cfg.max_len;
    if (static_cast<int>(ids.size()) != len || static_cast<int>(pad_mask.size()) != len)
        throw Error::engine("tr_encode: ids/mask length must equal max_len");
    const int d = cfg.embed_dim;
    const int dh = d / cfg.num_heads;

    std::vector<int> positions;
    if (pos_ids) {
        positions = *pos_ids;
        if (static_cast<int>(positions.size()) != len) throw Error::engine("tr_encode: pos_ids length mismatch");
    } else {
        positions.resize(static_cast<size_t>(len));
        for (int i = 0; i < len; ++i) positions[static_cast<size_t>(i)] = i;
    }

    Tensor x = engine::add(engine::rows(ps.get("tr.embed"), ids), engine::rows(ps.get("tr.pos"), positions));
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    for (int l = 0; l < cfg.num_layers; ++l) {
        std::string p = "tr.l" + std::to_string(l) + ".";
        Tensor q = engine::add(engine::matmul_nt(x, ps.get(p + "attn.wq")), ps.get(p + "attn.bq"));
        Tensor k = engine::add(engine::matmul_nt(x, ps.get(p + "attn.wk")), ps.get(p + "attn.bk"));
        Tensor v = engine::add(engine::matmul_nt(x, ps.get(p + "attn.wv")), ps.get(p + "attn.bv"));
        std::vector<Tensor> heads;
        heads.reserve(static_cast<size_t>(cfg.num_heads));
        for (int h = 0; h < cfg.num_heads; ++h) {
            Tensor qh = engine::slice_cols(q, h * dh, dh);
            Tensor kh = engine::slice_cols(k, h * dh, dh);
            Tensor vh = engine::slice_cols(v, h * dh, dh);
            Tensor scores = engine::scale(engine::matmul_nt(qh, kh), inv_sqrt_dh);
            Tensor probs = engine::masked_softmax_rows(scores, pad_mask);  // pad keys never attended
            heads.push_back(engine::matmul(probs, vh));
        }
        Tensor attn = engine::add(engine::matmul_nt(engine::concat_cols(heads), ps.get(p + "attn.wo")),
                                  ps.get(p + "attn.bo"));
        if (dropout_rng) attn = engine::dropout(attn, cfg.dropout_rate, *dropout_rng);
        x = engine::layer_norm(engine::add(x, attn), ps.get(p + "ln1.g"), ps.get(p + "ln1.b"));

        Tensor ff = engine::gelu(engine::add(engine::matmul_nt(x, ps.get(p + "ff.w1")), ps.get(p + "ff.b1")));
        ff = engine::add(engine::matmul_nt(ff, ps.get(p + "ff.w2")), ps.get(p + "ff.b2"));
        if (dropout_rng) ff = engine::dropout(ff, cfg.dropout_rate, *dropout_rng);
        x = engine::layer_norm(engine::add(x, ff), ps.get(p + "ln2.g"), ps.get(p + "ln2.b"));
    }

    TrOut out;
    out.cls_vec = engine::slice_rows(x, 0, 1);
    out.word_vecs = engine::slice_rows(x, 1, len - 1);
    return out;
}

Tensor gcn_forward(ParamStore& ps, const GFConfig& cfg, std::shared_ptr<const Csr> adj,
                   const Tensor& node_feats) {
    if (!adj) throw Error::engine("gcn_forward: missing adjacency");
    if (adj->rows != node_feats.rows()) throw Error::engine("gcn_forward: adjacency/features mismatch");
    Tensor h = node_feats;
    for (int l = 0; l < cfg.hops; ++l) {
        std::string p = "gf.l" + std::to_string(l) + ".";
        // adjacency is symmetric: it serves as its own transpose in backward
        Tensor hw = engine::matmul_nt(h, ps.get(p + "w"));
        h = engine::tanh_(engine::add(engine::spmm(adj, adj, hw), ps.get(p + "b")));
    }
    return h;
}

NodeLookup lookup_node_vectors(const Tensor& node_embeds, const std::vector<int>& node_ids) {
    NodeLookup out;
    out.node_vecs = engine::rows(node_embeds, node_ids);
    out.in_graph_mask.resize(node_ids.size());
    for (size_t i = 0; i < node_ids.size(); ++i) out.in_graph_mask[i] = node_ids[i] >= 0 ? 1 : 0;
    return out;
}

Tensor cross_attention(const Tensor& wq, const Tensor& wk, const Tensor& cls_vec, const Tensor& node_vecs,
                       const std::vector<uint8_t>& in_graph_mask) {
    if (wq.rows() != wk.rows()) throw Error::engine("cross_attention: Wq/Wk projection dims differ");
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(wq.rows()));
    Tensor qp = engine::matmul_nt(cls_vec, wq);     // [1, d_a]
    Tensor kp = engine::matmul_nt(node_vecs, wk);   // [n, d_a]
    Tensor raw = engine::scale(engine::matmul_nt(qp, kp), inv_sqrt_d);  // [1, n]
    return engine::masked_softmax_rows(raw, in_graph_mask);
}

Tensor fuse(const Tensor& scores, const Tensor& node_vecs, const Tensor& word_vecs) {
    if (node_vecs.rows() != word_vecs.rows() || static_cast<int>(scores.size()) != node_vecs.rows())
        throw Error::engine("fuse: row counts differ");
    return engine::concat_cols({engine::scale_rows(node_vecs, scores), word_vecs});
}

namespace {

// one direction of one LSTM layer; returns per-position hidden states [m, H]
Tensor lstm_direction(ParamStore& ps, const std::string& prefix, const Tensor& x, int hidden, bool reverse) {
    const int m = x.rows();
    Tensor xw = engine::add(engine::matmul_nt(x, ps.get(prefix + "wx")), ps.get(prefix + "b"));
    Tensor wh = ps.get(prefix + "wh");
    Tensor h = Tensor::zeros(1, hidden);
    Tensor c = Tensor::zeros(1, hidden);
    std::vector<Tensor> hs(static_cast<size_t>(m));
    for (int step = 0; step < m; ++step) {
        int t = reverse ? m - 1 - step : step;
        Tensor z = engine::add(engine::slice_rows(xw, t, 1), engine::matmul_nt(h, wh));
        Tensor i = engine::sigmoid(engine::slice_cols(z, 0, hidden));
        Tensor f = engine::sigmoid(engine::slice_cols(z, hidden, hidden));
        Tensor g = engine::tanh_(engine::slice_cols(z, 2 * hidden, hidden));
        Tensor o = engine::sigmoid(engine::slice_cols(z, 3 * hidden, hidden));
        c = engine::add(engine::mul(f, c), engine::mul(i, g));
        h = engine::mul(o, engine::tanh_(c));
        hs[static_cast<size_t>(t)] = h;
    }
    return engine::concat_rows(hs);
}

}  // namespace

Tensor classify(ParamStore& ps, const ClassifierConfig& cfg, const Tensor& fused,
                const std::vector<uint8_t>& pad_mask) {
    if (static_cast<int>(pad_mask.size()) != fused.rows()) throw Error::engine("classify: mask/rows mismatch");
    std::vector<int> real;
    for (size_t i = 0; i < pad_mask.size(); ++i)
        if (pad_mask[i]) real.push_back(static_cast<int>(i));
    if (real.empty()) throw Error::data("classify: empty sequence");

    Tensor x = engine::rows(fused, real);  // padded rows never enter the recurrence
    const int m = static_cast<int>(real.size());
    Tensor last_fwd, last_bwd;
    for (int l = 0; l < 2; ++l) {
        std::string p = "clf.l" + std::to_string(l) + ".";
        Tensor fwd = lstm_direction(ps, p + "fwd.", x, cfg.hidden, false);
        Tensor bwd = lstm_direction(ps, p + "bwd.", x, cfg.hidden, true);
        last_fwd = engine::slice_rows(fwd, m - 1, 1);
        last_bwd = engine::slice_rows(bwd, 0, 1);
        x = engine::concat_cols({fwd, bwd});
    }
    Tensor final = engine::concat_cols({last_fwd, last_bwd});
    return engine::add(engine::matmul_nt(final, ps.get("clf.fc.w")), ps.get("clf.fc.b"));
}

}  // namespace model

namespace {

void init_normal(Tensor t, Rng& rng, double stddev) {
    for (auto& v : t.values()) v = rng.normal(0.0, stddev);
}

void init_xavier(Tensor t, Rng& rng, int fan_in, int fan_out) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : t.values()) v = rng.uniform(-bound, bound);
}

void init_const(Tensor t, double value) {
    for (auto& v : t.values()) v = value;
}

void init_lstm_dir(ParamStore& ps, Rng& rng, const std::string& prefix, int in_dim, int hidden) {
    Tensor wx = ps.create(prefix + "wx", 4 * hidden, in_dim);
    Tensor wh = ps.create(prefix + "wh", 4 * hidden, hidden);
    Tensor b = ps.create(prefix + "b", 1, 4 * hidden);
    init_xavier(wx, rng, in_dim, hidden);
    init_xavier(wh, rng, hidden, hidden);
    init_const(b, 0.0);
    // forget-gate bias 1 keeps early memory open
    for (int j = hidden; j < 2 * hidden; ++j) b.values()[static_cast<size_t>(j)] = 1.0;
}

}  // namespace

ModelContext build_model(const ModelConfig& cfg, const Vocabulary& vocab, const WordGraph* graph,
                         const EmbeddingTable* tr_embed_source, uint64_t seed) {
    ModelConfig c = cfg;
    c.tr.vocab_size = vocab.size();
    c.tr.validate();
    c.gf.validate();
    if (mode_uses_graph(c.mode) && !graph) throw Error::config("mode " + std::string(to_string(c.mode)) + " needs a word graph");

    ModelContext m;
    m.cfg = c;
    Rng rng(seed);
    ParamStore& ps = m.params;

    Tensor embed = ps.create("tr.embed", c.tr.vocab_size, c.tr.embed_dim);
    init_normal(embed, rng, 0.1);
    if (tr_embed_source && tr_embed_source->dim() == c.tr.embed_dim) {
        for (int id = 0; id < vocab.size(); ++id) {
            const std::string& tok = vocab.token(id);
            if (!tr_embed_source->has(tok)) continue;
            const auto& vec = tr_embed_source->get(tok);
            std::copy(vec.begin(), vec.end(),
                      embed.values().begin() + static_cast<size_t>(id) * c.tr.embed_dim);
        }
    }
    Tensor pos = ps.create("tr.pos", c.tr.max_len, c.tr.embed_dim);
    init_normal(pos, rng, 0.1);
    for (int l = 0; l < c.tr.num_layers; ++l) {
        std::string p = "tr.l" + std::to_string(l) + ".";
        int d = c.tr.embed_dim;
        for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"})
            init_xavier(ps.create(p + w, d, d), rng, d, d);
        for (const char* b : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"}) init_const(ps.create(p + b, 1, d), 0.0);
        init_const(ps.create(p + "ln1.g", 1, d), 1.0);
        init_const(ps.create(p + "ln1.b", 1, d), 0.0);
        init_xavier(ps.create(p + "ff.w1", c.tr.ff_dim, d), rng, d, c.tr.ff_dim);
        init_const(ps.create(p + "ff.b1", 1, c.tr.ff_dim), 0.0);
        init_xavier(ps.create(p + "ff.w2", d, c.tr.ff_dim), rng, c.tr.ff_dim, d);
        init_const(ps.create(p + "ff.b2", 1, d), 0.0);
        init_const(ps.create(p + "ln2.g", 1, d), 1.0);
        init_const(ps.create(p + "ln2.b", 1, d), 0.0);
    }

    if (mode_uses_graph(c.mode)) {
        m.node_count = graph->node_count();
        m.vocab_to_node.assign(static_cast<size_t>(vocab.size()), -1);
        GraphNodes nodes = GraphNodes::from(vocab);
        if (nodes.count() != graph->node_count())
            throw Error::config("graph node count does not match the vocabulary's eligible tokens");
        m.vocab_to_node = nodes.vocab_to_node;
        auto adj = std::make_shared<Csr>(Csr::from(normalized_adjacency(*graph)));
        m.adj = std::move(adj);

        Tensor feat = ps.create("gf.feat", m.node_count, c.gf.node_dim);
        init_normal(feat, rng, 1.0);
        if (graph->node_init.size() > 0 && graph->node_init.dim() == c.gf.node_dim) {
            for (int i = 0; i < m.node_count; ++i) {
                const std::string& tok = graph->node_tokens[static_cast<size_t>(i)];
                if (!graph->node_init.has(tok)) continue;
                const auto& vec = graph->node_init.get(tok);
                std::copy(vec.begin(), vec.end(), feat.values().begin() + static_cast<size_t>(i) * c.gf.node_dim);
            }
        }
        for (int l = 0; l < c.gf.hops; ++l) {
            std::string p = "gf.l" + std::to_string(l) + ".";
            init_xavier(ps.create(p + "w", c.gf.node_dim, c.gf.node_dim), rng, c.gf.node_dim, c.gf.node_dim);
            init_const(ps.create(p + "b", 1, c.gf.node_dim), 0.0);
        }
    }

    if (mode_uses_attention(c.mode)) {
        init_xavier(ps.create("ie.wq", c.attn_dim, c.tr.embed_dim), rng, c.tr.embed_dim, c.attn_dim);
        init_xavier(ps.create("ie.wk", c.attn_dim, c.gf.node_dim), rng, c.gf.node_dim, c.attn_dim);
    }

    int clf_in = c.tr.embed_dim + (mode_uses_graph(c.mode) ? c.gf.node_dim : 0);
    init_lstm_dir(ps, rng, "clf.l0.fwd.", clf_in, c.clf.hidden);
    init_lstm_dir(ps, rng, "clf.l0.bwd.", clf_in, c.clf.hidden);
    init_lstm_dir(ps, rng, "clf.l1.fwd.", 2 * c.clf.hidden, c.clf.hidden);
    init_lstm_dir(ps, rng, "clf.l1.bwd.", 2 * c.clf.hidden, c.clf.hidden);
    Tensor fcw = ps.create("clf.fc.w", c.clf.num_classes, 2 * c.clf.hidden);
    init_xavier(fcw, rng, 2 * c.clf.hidden, c.clf.num_classes);
    init_const(ps.create("clf.fc.b", 1, c.clf.num_classes), 0.0);
    return m;
}

engine::Tensor node_embeds(ModelContext& m) {
    if (!mode_uses_graph(m.cfg.mode)) return {};
    return model::gcn_forward(m.params, m.cfg.gf, m.adj, m.params.get("gf.feat"));
}

engine::Tensor example_logits(ModelContext& m, const EncodedIds& enc, const engine::Tensor& H,
                              Rng* dropout_rng) {
    auto tr = model::tr_encode(m.params, m.cfg.tr, enc.ids, enc.mask, dropout_rng);
    std::vector<uint8_t> word_mask(enc.mask.begin() + 1, enc.mask.end());

    if (m.cfg.mode == Mode::TR)
        return model::classify(m.params, m.cfg.clf, tr.word_vecs, word_mask);

    if (!H.defined()) throw Error::engine("example_logits: node embeddings required for graph modes");
    std::vector<int> node_ids(enc.ids.size() - 1);
    for (size_t i = 1; i < enc.ids.size(); ++i) {
        int vid = enc.ids[i];
        node_ids[i - 1] = enc.mask[i] ? m.vocab_to_node[static_cast<size_t>(vid)] : -1;
    }
    auto lookup = model::lookup_node_vectors(H, node_ids);

    engine::Tensor fused;
    if (m.cfg.mode == Mode::TR_GF) {
        // no reweighting: graph vectors concatenate directly
        fused = engine::concat_cols({lookup.node_vecs, tr.word_vecs});
    } else {
        engine::Tensor scores = model::cross_attention(m.params.get("ie.wq"), m.params.get("ie.wk"),
                                                       tr.cls_vec, lookup.node_vecs, lookup.in_graph_mask);
        fused = model::fuse(scores, lookup.node_vecs, tr.word_vecs);
    }
    return model::classify(m.params, m.cfg.clf, fused, word_mask);
}

}  // namespace gnom
