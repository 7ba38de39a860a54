#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>

#include "gnom/common.hpp"
#include "gnom/corpus.hpp"
#include "gnom/kernels.hpp"
#include "gnom/wordgraph.hpp"

using namespace gnom;

namespace {

Dataset dataset_from_texts(const std::vector<std::string>& texts) {
    Dataset d;
    d.num_classes = 2;
    d.task_type = TaskType::binary;
    for (size_t i = 0; i < texts.size(); ++i) {
        LabelSet ls;
        ls.task_type = TaskType::binary;
        ls.values = {0};
        d.examples.push_back({"t" + std::to_string(i), texts[i], "en", ls});
    }
    return d;
}

// Independent all-pairs counting oracle: scan every ordered position pair in
// every example and count pairs at distance <= window over node tokens.
SparseMatrix brute_force_cooc(const std::vector<std::vector<int>>& examples, const GraphNodes& nodes,
                              int window) {
    SparseMatrix c(nodes.count(), nodes.count());
    for (const auto& ex : examples) {
        int len = static_cast<int>(ex.size());
        for (int p = 0; p < len; ++p)
            for (int q = 0; q < len; ++q) {
                if (q <= p || q - p > window) continue;
                int ni = nodes.vocab_to_node[static_cast<size_t>(ex[static_cast<size_t>(p)])];
                int nj = nodes.vocab_to_node[static_cast<size_t>(ex[static_cast<size_t>(q)])];
                if (ni < 0 || nj < 0 || ni == nj) continue;
                c.accumulate(ni, nj, 1.0);
                c.accumulate(nj, ni, 1.0);
            }
    }
    c.finalize();
    return c;
}

bool same_entries(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.nnz() != b.nnz()) return false;
    for (size_t i = 0; i < a.entries().size(); ++i) {
        const auto& ea = a.entries()[i];
        const auto& eb = b.entries()[i];
        if (ea.row != eb.row || ea.col != eb.col || ea.weight != eb.weight) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("cooccurrence: adjacency-only window") {
    Dataset d = dataset_from_texts({"a b c"});
    Vocabulary v = build_vocab({&d}, 1, 1.0);
    GraphNodes nodes = GraphNodes::from(v);
    auto ids = ids_of(v, {&d});
    SparseMatrix c = cooccurrence_matrix(ids, nodes, 1);
    auto node = [&](const char* t) { return nodes.vocab_to_node[static_cast<size_t>(v.id(t))]; };
    CHECK(c.at(node("a"), node("b")) == 1.0);
    CHECK(c.at(node("b"), node("c")) == 1.0);
    CHECK(c.at(node("a"), node("c")) == 0.0);
}

TEST_CASE("cooccurrence: two-example window-2 case") {
    Dataset d = dataset_from_texts({"a b c", "b c d"});
    Vocabulary v = build_vocab({&d}, 1, 1.0);
    GraphNodes nodes = GraphNodes::from(v);
    auto ids = ids_of(v, {&d});
    SparseMatrix c = cooccurrence_matrix(ids, nodes, 2);
    auto node = [&](const char* t) { return nodes.vocab_to_node[static_cast<size_t>(v.id(t))]; };
    CHECK(c.at(node("a"), node("c")) == 1.0);
    CHECK(c.at(node("b"), node("c")) == 2.0);
    CHECK(c.at(node("b"), node("d")) == 1.0);
    CHECK(c.at(node("a"), node("b")) == 1.0);
    CHECK(c.at(node("c"), node("d")) == 1.0);
    for (const auto& e : c.entries()) CHECK(c.at(e.col, e.row) == e.weight);  // symmetric
    for (int i = 0; i < nodes.count(); ++i) CHECK(c.at(i, i) == 0.0);         // zero diagonal
}

TEST_CASE("cooccurrence matches the brute-force oracle on random corpora") {
    Rng rng(2024);
    const char* words[] = {"w0", "w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8", "w9"};
    for (int trial = 0; trial < 30; ++trial) {
        int n_examples = 1 + static_cast<int>(rng.below(50));
        std::vector<std::string> texts;
        for (int e = 0; e < n_examples; ++e) {
            int len = 1 + static_cast<int>(rng.below(12));
            std::string t;
            for (int p = 0; p < len; ++p) {
                if (p) t += ' ';
                t += words[rng.below(10)];
            }
            texts.push_back(t);
        }
        Dataset d = dataset_from_texts(texts);
        Vocabulary v = build_vocab({&d}, 1, 1.0);
        GraphNodes nodes = GraphNodes::from(v);
        auto ids = ids_of(v, {&d});
        for (int window : {1, 2, 5}) {
            SparseMatrix fast = cooccurrence_matrix(ids, nodes, window);
            SparseMatrix slow = brute_force_cooc(ids, nodes, window);
            CHECK(same_entries(fast, slow));
        }
    }
}

TEST_CASE("ineligible tokens occupy positions but never pair") {
    // "stop" below min_freq in a tiny corpus with min_freq=2
    Dataset d = dataset_from_texts({"a stop b", "a b"});
    Vocabulary v = build_vocab({&d}, 2, 1.0);
    CHECK_FALSE(v.graph_eligible(v.id("stop")));
    GraphNodes nodes = GraphNodes::from(v);
    auto ids = ids_of(v, {&d});
    SparseMatrix c1 = cooccurrence_matrix(ids, nodes, 1);
    auto node = [&](const char* t) { return nodes.vocab_to_node[static_cast<size_t>(v.id(t))]; };
    // window 1: "a stop b" pairs a-stop, stop-b -> nothing countable
    CHECK(c1.at(node("a"), node("b")) == 1.0);  // only from the second example
    SparseMatrix c2 = cooccurrence_matrix(ids, nodes, 2);
    CHECK(c2.at(node("a"), node("b")) == 2.0);  // distance-2 pair across "stop" now counts
}

TEST_CASE("row_normalize forced arithmetic") {
    SparseMatrix m(2, 2);
    m.accumulate(0, 0, 2.0);
    m.accumulate(0, 1, 2.0);
    m.accumulate(1, 1, 4.0);
    m.finalize();
    SparseMatrix n = row_normalize(m);
    CHECK(n.at(0, 0) == doctest::Approx(0.5));
    CHECK(n.at(0, 1) == doctest::Approx(0.5));
    CHECK(n.at(1, 0) == 0.0);
    CHECK(n.at(1, 1) == doctest::Approx(1.0));

    SUBCASE("zero rows stay zero; nonzero rows sum to 1") {
        Rng rng(8);
        SparseMatrix r(20, 20);
        for (int i = 0; i < 20; ++i) {
            if (i % 4 == 0) continue;  // leave every 4th row empty
            for (int j = 0; j < 20; ++j)
                if (rng.uniform() < 0.3) r.accumulate(i, j, rng.uniform(0.01, 3.0));
        }
        r.finalize();
        SparseMatrix rn = row_normalize(r);
        std::vector<double> sums(20, 0.0);
        for (const auto& e : rn.entries()) sums[static_cast<size_t>(e.row)] += e.weight;
        for (int i = 0; i < 20; ++i) {
            if (sums[static_cast<size_t>(i)] != 0.0) CHECK(std::fabs(sums[static_cast<size_t>(i)] - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("embedding similarity: clamped cosine with zero diagonal") {
    EmbeddingTable t(2);
    t.set("x", {1.0, 0.0});
    t.set("y", {1.0, 0.0});   // identical to x
    t.set("z", {0.0, 1.0});   // orthogonal
    t.set("m", {-1.0, 0.0});  // opposite of x
    Dataset d = dataset_from_texts({"x y z m"});
    Vocabulary v = build_vocab({&d}, 1, 1.0);
    GraphNodes nodes = GraphNodes::from(v);
    SparseMatrix e = embedding_similarity_matrix(t, nodes, 0.0);
    auto node = [&](const char* tok) { return nodes.vocab_to_node[static_cast<size_t>(v.id(tok))]; };
    CHECK(e.at(node("x"), node("y")) == doctest::Approx(1.0));
    CHECK(e.at(node("x"), node("z")) == 0.0);  // orthogonal -> absent
    CHECK(e.at(node("x"), node("m")) == 0.0);  // negative -> clamped out
    for (int i = 0; i < nodes.count(); ++i) CHECK(e.at(i, i) == 0.0);
    for (const auto& en : e.entries()) CHECK(e.at(en.col, en.row) == en.weight);
}

TEST_CASE("zero-norm vectors compare as zero") {
    EmbeddingTable t(2);
    t.set("x", {0.0, 0.0});
    t.set("y", {1.0, 1.0});
    Dataset d = dataset_from_texts({"x y"});
    Vocabulary v = build_vocab({&d}, 1, 1.0);
    GraphNodes nodes = GraphNodes::from(v);
    SparseMatrix e = embedding_similarity_matrix(t, nodes, 0.0);
    CHECK(e.nnz() == 0);
}

TEST_CASE("build_graph thresholding is strict") {
    Dataset d = dataset_from_texts({"p q"});
    Vocabulary v = build_vocab({&d}, 1, 1.0);
    GraphNodes nodes = GraphNodes::from(v);
    SparseMatrix zero(nodes.count(), nodes.count());

    auto graph_for = [&](double weight, double tau) {
        // craft E whose row already sums to 1 so row normalization keeps the
        // (p,q) entry at exactly `weight`
        int p = nodes.vocab_to_node[static_cast<size_t>(v.id("p"))];
        int q = nodes.vocab_to_node[static_cast<size_t>(v.id("q"))];
        SparseMatrix en(nodes.count(), nodes.count());
        en.accumulate(p, q, weight);
        en.accumulate(p, p, 1.0 - weight);
        en.finalize();
        return build_graph(nodes, zero, en, tau, true, nullptr);
    };

    WordGraph above = graph_for(0.55, 0.5);
    REQUIRE(above.edges.size() == 1);
    CHECK(above.edges[0].weight == doctest::Approx(0.55));

    WordGraph at = graph_for(0.5, 0.5);
    CHECK(at.edges.empty());  // strict inequality
}

TEST_CASE("zero E with embedding edges on or off gives identical graphs") {
    Dataset d = dataset_from_texts({"a b c a b", "c a b"});
    Vocabulary v = build_vocab({&d}, 1, 1.0);
    GraphNodes nodes = GraphNodes::from(v);
    auto ids = ids_of(v, {&d});
    SparseMatrix c = cooccurrence_matrix(ids, nodes, 2);
    SparseMatrix zero(nodes.count(), nodes.count());
    WordGraph with = build_graph(nodes, c, zero, 0.3, true, nullptr);
    WordGraph without = build_graph(nodes, c, zero, 0.3, false, nullptr);
    REQUIRE(with.edges.size() == without.edges.size());
    for (size_t i = 0; i < with.edges.size(); ++i) {
        CHECK(with.edges[i].a == without.edges[i].a);
        CHECK(with.edges[i].b == without.edges[i].b);
        CHECK(with.edges[i].weight == without.edges[i].weight);
    }
}

TEST_CASE("built edges coincide with dense recomputation") {
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        // random corpus over up to 60 tokens plus a random embedding table
        int vocab_n = 20 + static_cast<int>(rng.below(40));
        std::vector<std::string> words;
        for (int i = 0; i < vocab_n; ++i) words.push_back("w" + std::to_string(i));
        std::vector<std::string> texts;
        int n_examples = 5 + static_cast<int>(rng.below(20));
        for (int e = 0; e < n_examples; ++e) {
            int len = 2 + static_cast<int>(rng.below(10));
            std::string t;
            for (int p = 0; p < len; ++p) {
                if (p) t += ' ';
                t += words[rng.below(static_cast<uint64_t>(vocab_n))];
            }
            texts.push_back(t);
        }
        Dataset d = dataset_from_texts(texts);
        Vocabulary v = build_vocab({&d}, 1, 1.0);
        GraphNodes nodes = GraphNodes::from(v);
        auto ids = ids_of(v, {&d});
        SparseMatrix c = cooccurrence_matrix(ids, nodes, 3);
        EmbeddingTable table(8);
        for (const auto& w : words) {
            std::vector<double> vec(8);
            for (auto& x : vec) x = rng.normal();
            table.set(w, vec);
        }
        SparseMatrix e = embedding_similarity_matrix(table, nodes, 0.0);
        double tau = 0.25;
        WordGraph g = build_graph(nodes, c, e, tau, true, nullptr);

        // dense S = rownorm(C) + rownorm(E), edge iff max(S_ij, S_ji) > tau
        int n = nodes.count();
        SparseMatrix cn = row_normalize(c), en = row_normalize(e);
        std::map<std::pair<int, int>, double> expected;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double sij = cn.at(i, j) + en.at(i, j);
                double sji = cn.at(j, i) + en.at(j, i);
                double w = std::max(sij, sji);
                if (w > tau) expected[{i, j}] = w;
            }
        REQUIRE(g.edges.size() == expected.size());
        for (const auto& edge : g.edges) {
            auto it = expected.find({edge.a, edge.b});
            REQUIRE(it != expected.end());
            CHECK(edge.weight == doctest::Approx(it->second).epsilon(1e-12));
        }
    }
}

TEST_CASE("normalized adjacency") {
    SUBCASE("single isolated node is [[1]]") {
        WordGraph g;
        g.node_tokens = {"solo"};
        SparseMatrix a = normalized_adjacency(g);
        REQUIRE(a.nnz() == 1);
        CHECK(a.at(0, 0) == doctest::Approx(1.0));
    }

    SUBCASE("two nodes with unit edge give all entries 1/2") {
        WordGraph g;
        g.node_tokens = {"x", "y"};
        g.edges = {{0, 1, 1.0}};
        SparseMatrix a = normalized_adjacency(g);
        CHECK(a.at(0, 0) == doctest::Approx(0.5));
        CHECK(a.at(0, 1) == doctest::Approx(0.5));
        CHECK(a.at(1, 0) == doctest::Approx(0.5));
        CHECK(a.at(1, 1) == doctest::Approx(0.5));
    }

    SUBCASE("symmetric and spectral radius at most 1") {
        Rng rng(13);
        WordGraph g;
        int n = 30;
        for (int i = 0; i < n; ++i) g.node_tokens.push_back("n" + std::to_string(i));
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.uniform() < 0.15) g.edges.push_back({i, j, rng.uniform(0.1, 2.0)});
        SparseMatrix a = normalized_adjacency(g);
        for (const auto& e : a.entries()) CHECK(a.at(e.col, e.row) == doctest::Approx(e.weight).epsilon(1e-12));

        // power iteration
        Csr csr = Csr::from(a);
        std::vector<double> x(static_cast<size_t>(n), 1.0), y(static_cast<size_t>(n));
        double lambda = 0.0;
        for (int it = 0; it < 200; ++it) {
            kernels::ref::spmm(csr, x.data(), y.data(), 1);
            double norm = 0.0;
            for (double val : y) norm += val * val;
            norm = std::sqrt(norm);
            if (norm == 0.0) break;
            for (size_t i = 0; i < x.size(); ++i) x[i] = y[i] / norm;
            lambda = norm;
        }
        CHECK(lambda <= 1.0 + 1e-6);
    }
}

TEST_CASE("graph file round-trip against the vocabulary") {
    Dataset d = dataset_from_texts({"alpha beta gamma alpha beta", "beta gamma delta"});
    Vocabulary v = build_vocab({&d}, 1, 1.0);
    GraphNodes nodes = GraphNodes::from(v);
    auto ids = ids_of(v, {&d});
    SparseMatrix c = cooccurrence_matrix(ids, nodes, 2);
    SparseMatrix zero(nodes.count(), nodes.count());
    WordGraph g = build_graph(nodes, c, zero, 0.2, false, nullptr);
    REQUIRE(g.edges.size() > 0);

    std::string path = "/tmp/gnom_graph_rt.txt";
    g.save(path, "0123456789abcdef");
    WordGraph back = WordGraph::load(path, v);
    CHECK(back.tau == g.tau);
    REQUIRE(back.edges.size() == g.edges.size());
    CHECK(back.node_tokens == g.node_tokens);
    for (size_t i = 0; i < g.edges.size(); ++i) {
        CHECK(back.edges[i].a == g.edges[i].a);
        CHECK(back.edges[i].b == g.edges[i].b);
        CHECK(back.edges[i].weight == g.edges[i].weight);  // bit-exact via shortest round-trip format
    }
    std::remove(path.c_str());
}

TEST_CASE("bilingual corpus: embedding edges bridge languages, cooccurrence alone cannot") {
    SynthConfig cfg;
    cfg.vocab_size = 60;
    cfg.examples_per_class = 30;
    cfg.embedding_dim = 16;
    cfg.topic_words_per_class = 8;
    cfg.pair_noise_sigma = 0.1;
    cfg.seed = 3;
    SynthOutput synth = generate_synthetic_bilingual(cfg);

    Dataset unlabeled_b = synth.dataset_b;
    unlabeled_b.split = Split::unlabeled;
    for (auto& ex : unlabeled_b.examples) ex.labels.values.clear();

    Vocabulary v = build_vocab({&synth.dataset_a, &unlabeled_b}, 2, 0.9);
    GraphNodes nodes = GraphNodes::from(v);
    auto ids = ids_of(v, {&synth.dataset_a, &unlabeled_b});
    SparseMatrix c = cooccurrence_matrix(ids, nodes, 5);
    SparseMatrix e = embedding_similarity_matrix(synth.pairs, nodes, 0.5);

    WordGraph with_e = build_graph(nodes, c, e, 0.5, true, &synth.pairs);
    WordGraph without_e = build_graph(nodes, c, e, 0.5, false, &synth.pairs);

    auto count_cross = [&](const WordGraph& g) {
        int cross = 0;
        for (const auto& edge : g.edges) {
            char la = g.node_tokens[static_cast<size_t>(edge.a)][0];
            char lb = g.node_tokens[static_cast<size_t>(edge.b)][0];
            if (la != lb) ++cross;
        }
        return cross;
    };
    CHECK(count_cross(with_e) > 0);
    CHECK(count_cross(without_e) == 0);

    // at least one bridge connects a token to its own translation
    bool translation_edge = false;
    for (const auto& edge : with_e.edges) {
        const auto& ta = with_e.node_tokens[static_cast<size_t>(edge.a)];
        const auto& tb = with_e.node_tokens[static_cast<size_t>(edge.b)];
        if (ta.substr(1) == tb.substr(1) && ta[0] != tb[0]) translation_edge = true;
    }
    CHECK(translation_edge);
}
