#pragma once

#include <string>
#include <vector>

#include "gnom/embedding.hpp"
#include "gnom/sparse.hpp"
#include "gnom/vocab.hpp"

namespace gnom {

// Node index space = graph-eligible vocabulary tokens in vocab id order.
struct GraphNodes {
    std::vector<int> node_to_vocab;
    std::vector<int> vocab_to_node;  // -1 for non-nodes
    std::vector<std::string> tokens;

    static GraphNodes from(const Vocabulary& v);
    int count() const { return static_cast<int>(node_to_vocab.size()); }
};

// Undirected word graph: edges from thresholded S = rownorm(C) + rownorm(E),
// edge weight max(S_ij, S_ji). No self-edges stored; self-loops appear during
// adjacency normalization.
struct WordGraph {
    struct Edge {
        int a;  // a < b, node indices
        int b;
        double weight;
    };

    std::vector<std::string> node_tokens;
    std::vector<Edge> edges;
    double tau = 0.5;
    EmbeddingTable node_init;  // restricted to node tokens; may be empty

    int node_count() const { return static_cast<int>(node_tokens.size()); }

    void save(const std::string& path, const std::string& config_hash = "") const;
    // node set comes from the vocabulary (edge lists cannot express isolated
    // nodes); tokens in the file must be graph-eligible in v
    static WordGraph load(const std::string& path, const Vocabulary& v);
};

// C_ij = co-occurrence count of node tokens i,j within `window` positions in
// the same example, symmetric, zero diagonal. examples carry vocab ids;
// non-node tokens occupy positions but never pair.
SparseMatrix cooccurrence_matrix(const std::vector<std::vector<int>>& examples, const GraphNodes& nodes,
                                 int window = 5);

// E_ij = max(0, cosine(vec_i, vec_j)), entries <= floor dropped, zero diagonal.
// Node tokens missing from the table use the <unk> vector when present, else a
// zero vector (cosine 0).
SparseMatrix embedding_similarity_matrix(const EmbeddingTable& t, const GraphNodes& nodes, double floor = 0.0);

SparseMatrix row_normalize(const SparseMatrix& m);

WordGraph build_graph(const GraphNodes& nodes, const SparseMatrix& cooc, const SparseMatrix& emb_sim,
                      double tau = 0.5, bool use_embedding_edges = true,
                      const EmbeddingTable* node_init_source = nullptr);

// D^(-1/2) (A + I) D^(-1/2), symmetric
SparseMatrix normalized_adjacency(const WordGraph& g);

// tokenize dataset texts into vocab id sequences
std::vector<std::vector<int>> ids_of(const Vocabulary& v, const std::vector<const Dataset*>& corpora);

}  // namespace gnom
