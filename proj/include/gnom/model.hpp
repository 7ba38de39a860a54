#pragma once

#include <memory>
#include <optional>

#include "gnom/params.hpp"
#include "gnom/tensor.hpp"
#include "gnom/vocab.hpp"
#include "gnom/wordgraph.hpp"

namespace gnom {

// Ablation arms. TR = encoder only; TR_GF = plain concatenation of graph and
// encoder vectors; TR_GF_ME_IE = full pipeline on the cooccurrence-only graph;
// GNOM = full pipeline.
enum class Mode { TR, TR_GF, TR_GF_ME_IE, GNOM };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);
bool mode_uses_graph(Mode m);
bool mode_uses_attention(Mode m);

struct TRConfig {
    int vocab_size = 0;
    int embed_dim = 64;  // d_t
    int num_layers = 2;
    int num_heads = 4;
    int ff_dim = 128;
    int max_len = 32;
    double dropout_rate = 0.1;

    void validate() const;
};

struct GFConfig {
    int node_dim = 64;  // d_g, equals the embedding table dim
    int hops = 2;       // k

    void validate() const;
};

struct ClassifierConfig {
    int hidden = 64;
    int num_classes = 2;
};

struct ModelConfig {
    TRConfig tr;
    GFConfig gf;
    int attn_dim = 64;  // d_a, shared projection dim of the cross attention
    ClassifierConfig clf;
    Mode mode = Mode::GNOM;
    TaskType task = TaskType::binary;
};

namespace model {

struct TrOut {
    engine::Tensor cls_vec;    // [1, d_t]
    engine::Tensor word_vecs;  // [max_len-1, d_t]
};

// Token+position embeddings through num_layers post-LN transformer blocks with
// pad-masked self attention. pos_ids defaults to 0..max_len-1.
TrOut tr_encode(engine::ParamStore& ps, const TRConfig& cfg, const std::vector<int>& ids,
                const std::vector<uint8_t>& pad_mask, Rng* dropout_rng = nullptr,
                const std::vector<int>* pos_ids = nullptr);

// H^(l+1) = tanh(adj * H^l * W_l + b_l), returns H^hops
engine::Tensor gcn_forward(engine::ParamStore& ps, const GFConfig& cfg, std::shared_ptr<const Csr> adj,
                           const engine::Tensor& node_feats);

struct NodeLookup {
    engine::Tensor node_vecs;            // [n, d_g], zero rows off-graph
    std::vector<uint8_t> in_graph_mask;  // n
};

// node_ids: per word position, node index or -1 (PAD/CLS/UNK/not eligible)
NodeLookup lookup_node_vectors(const engine::Tensor& node_embeds, const std::vector<int>& node_ids);

// scores over word positions: softmax of (Wq cls)·(Wk node_i)/sqrt(d_a)
// restricted to in-graph positions; exactly 0 elsewhere and all-zero when no
// position is in-graph
engine::Tensor cross_attention(const engine::Tensor& wq, const engine::Tensor& wk,
                               const engine::Tensor& cls_vec, const engine::Tensor& node_vecs,
                               const std::vector<uint8_t>& in_graph_mask);

// row_i = [score_i * node_i ; word_i]
engine::Tensor fuse(const engine::Tensor& scores, const engine::Tensor& node_vecs,
                    const engine::Tensor& word_vecs);

// 2-layer BiLSTM over unpadded positions + fully connected head -> [1, C]
engine::Tensor classify(engine::ParamStore& ps, const ClassifierConfig& cfg, const engine::Tensor& fused,
                        const std::vector<uint8_t>& pad_mask);

}  // namespace model

// Everything one trained configuration needs at forward time.
struct ModelContext {
    ModelConfig cfg;
    engine::ParamStore params;
    std::shared_ptr<const Csr> adj;  // normalized adjacency; null for TR
    std::vector<int> vocab_to_node;  // -1 outside the graph
    int node_count = 0;
};

// Builds and initializes all parameter groups for the mode. tr_embed_source,
// when given, seeds tr.embed rows from the table; gf.feat rows come from the
// graph's node_init (random fallback either way).
ModelContext build_model(const ModelConfig& cfg, const Vocabulary& vocab, const WordGraph* graph,
                         const EmbeddingTable* tr_embed_source, uint64_t seed);

// H^k for graph modes; undefined tensor for TR
engine::Tensor node_embeds(ModelContext& m);

// full per-example dataflow for the context's mode
engine::Tensor example_logits(ModelContext& m, const EncodedIds& enc, const engine::Tensor& node_embeds,
                              Rng* dropout_rng = nullptr);

}  // namespace gnom
