#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "graphdoc/document.hpp"
#include "graphdoc/error.hpp"
#include "graphdoc/gradcheck.hpp"
#include "graphdoc/graph.hpp"
#include "graphdoc/model.hpp"
#include "graphdoc/rng.hpp"
#include "graphdoc/text.hpp"
#include "reference_model.hpp"

using namespace graphdoc;

namespace {

std::string repeat_sentence(std::size_t words, std::size_t count) {
    std::string out;
    for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t w = 0; w < words; ++w) {
            out += "w" + std::to_string(s) + "x" + std::to_string(w);
            out += (w + 1 == words) ? "." : " ";
        }
        if (s + 1 < count) out += " ";
    }
    return out;
}

std::string sentence_of(std::size_t words, const std::string& stem) {
    std::string out;
    for (std::size_t w = 0; w < words; ++w) {
        if (w) out += " ";
        out += stem + std::to_string(w);
    }
    return out + ".";
}

Document make_doc(std::vector<std::vector<std::string>> sections,
                  const std::string& id = "d0") {
    Document d;
    d.id = id;
    d.sections = std::move(sections);
    return d;
}

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.d_model = 4;
    cfg.heads = 2;
    cfg.layers = 2;
    cfg.d_tok = 3;
    cfg.vocab_buckets = 16;
    cfg.max_tokens = 8;
    return cfg;
}

} // namespace

TEST_CASE("fnv1a matches published vectors") {
    CHECK(fnv1a64("") == 14695981039346656037ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("tokenizer lowercases, splits on non-alphanumerics, truncates") {
    CHECK(tokenize_words("Hello, World--again!") ==
          std::vector<std::string>{"hello", "world", "again"});
    CHECK(tokenize_words("  a1  b2  ") == std::vector<std::string>{"a1", "b2"});
    CHECK(tokenize("", 64, 16).empty());
    CHECK(tokenize("...!!!", 64, 16).empty());

    auto ids = tokenize("Graph graph GRAPH", 64, 16);
    REQUIRE(ids.size() == 3);
    CHECK(ids[0] == ids[1]);
    CHECK(ids[1] == ids[2]);
    for (auto id : ids) CHECK(id < 64);

    CHECK(tokenize("one two three four five", 64, 3).size() == 3);
}

TEST_CASE("sentence splitting") {
    CHECK(split_sentences("One. Two! Three?") ==
          std::vector<std::string>{"One.", "Two!", "Three?"});
    CHECK(split_sentences("no terminator") ==
          std::vector<std::string>{"no terminator"});
    CHECK(split_sentences("What?! Yes.") ==
          std::vector<std::string>{"What?!", "Yes."});
    CHECK(split_sentences("").empty());
}

TEST_CASE("count_words") {
    CHECK(count_words("") == 0);
    CHECK(count_words("   ") == 0);
    CHECK(count_words("a b  c") == 3);
}

TEST_CASE("passage splitting: short text stays one passage") {
    auto p = split_into_passages("Just one short sentence here.", 100);
    REQUIRE(p.size() == 1);
    CHECK(count_words(p[0]) == 5);
}

TEST_CASE("passage splitting: thirty 10-word sentences pack into 3x100") {
    auto p = split_into_passages(repeat_sentence(10, 30), 100);
    REQUIRE(p.size() == 3);
    for (const auto& s : p) CHECK(count_words(s) == 100);
}

TEST_CASE("passage splitting: a 250-word sentence is hard-split") {
    auto p = split_into_passages(sentence_of(250, "tok"), 100);
    REQUIRE(p.size() == 3);
    CHECK(count_words(p[0]) == 100);
    CHECK(count_words(p[1]) == 100);
    CHECK(count_words(p[2]) == 50);
}

TEST_CASE("passage splitting: an oversize but not huge sentence stays whole") {
    // 150 <= 2*100, so no hard split; greedy packing isolates it.
    std::string text = sentence_of(60, "a") + " " + sentence_of(150, "b") + " " +
                       sentence_of(10, "c");
    auto p = split_into_passages(text, 100);
    REQUIRE(p.size() == 3);
    CHECK(count_words(p[0]) == 60);
    CHECK(count_words(p[1]) == 150);
    CHECK(count_words(p[2]) == 10);
}

TEST_CASE("passage splitting preserves the word sequence") {
    Rng rng(91);
    for (int trial = 0; trial < 50; ++trial) {
        std::string text;
        const std::size_t sentences = 1 + rng.uniform_int(40);
        for (std::size_t s = 0; s < sentences; ++s) {
            const std::size_t words = 1 + rng.uniform_int(60);
            if (s) text += " ";
            text += sentence_of(words, "s" + std::to_string(s) + "w");
        }
        auto passages = split_into_passages(text, 50);
        std::vector<std::string> got;
        for (const auto& p : passages)
            for (const auto& w : tokenize_words(p)) got.push_back(w);
        CHECK(got == tokenize_words(text));
    }
}

TEST_CASE("document indexing, subset and truncation") {
    Document d = make_doc({{"a", "b"}, {"c"}});
    CHECK(d.passage_count() == 3);
    CHECK(d.passage(0) == "a");
    CHECK(d.passage(2) == "c");
    CHECK(d.section_of(0) == 0);
    CHECK(d.section_of(1) == 0);
    CHECK(d.section_of(2) == 1);
    CHECK(d.passages() == std::vector<std::string>{"a", "b", "c"});

    std::vector<std::size_t> keep = {0, 2};
    Document s = d.subset(keep);
    CHECK(s.sections == std::vector<std::vector<std::string>>{{"a"}, {"c"}});

    std::vector<std::size_t> mid = {1};
    CHECK(d.subset(mid).sections ==
          std::vector<std::vector<std::string>>{{"b"}});

    CHECK(d.truncated(2).sections ==
          std::vector<std::vector<std::string>>{{"a", "b"}});
    CHECK(d.truncated(10).sections == d.sections);
}

TEST_CASE("fully connected graph is a clique with self-loops") {
    Document one = make_doc({{"p"}});
    DocumentGraph g1 = build_graph(one, GraphTopology::FullyConnected);
    CHECK(g1.node_count == 2);
    CHECK(g1.edge_count() == 1);
    CHECK(g1.self_loop_count() == 2);
    CHECK(g1.symmetric());
    CHECK(g1.connected());

    Document three = make_doc({{"p1", "p2"}, {"p3"}});
    DocumentGraph g3 = build_graph(three, GraphTopology::FullyConnected);
    CHECK(g3.node_count == 4);
    CHECK(g3.edge_count() == 6); // K4
    CHECK(g3.self_loop_count() == 4);
}

TEST_CASE("section graph: intra-section cliques plus doc/lead clique") {
    Document d = make_doc({{"p1", "p2"}, {"p3", "p4"}});
    DocumentGraph g = build_graph(d, GraphTopology::Section, true);
    CHECK(g.node_count == 5);
    // (1,2) and (3,4) within sections; clique over {0,1,3}.
    CHECK(g.edge_count() == 5);
    CHECK(g.adjacent(1, 2));
    CHECK(g.adjacent(3, 4));
    CHECK(g.adjacent(0, 1));
    CHECK(g.adjacent(0, 3));
    CHECK(g.adjacent(1, 3));
    CHECK_FALSE(g.adjacent(2, 3));
    CHECK_FALSE(g.adjacent(0, 2));
    CHECK_FALSE(g.adjacent(0, 4));
    CHECK(g.connected());

    DocumentGraph star = build_graph(d, GraphTopology::Section, false);
    CHECK(star.edge_count() == 4); // leads connect only through the doc node
    CHECK(star.adjacent(0, 1));
    CHECK(star.adjacent(0, 3));
    CHECK_FALSE(star.adjacent(1, 3));
    CHECK(star.connected());
}

TEST_CASE("graphs over random documents are symmetric, looped, connected") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::vector<std::string>> sections(1 + rng.uniform_int(4));
        for (auto& sec : sections) {
            sec.resize(1 + rng.uniform_int(5));
            for (auto& p : sec) p = "word";
        }
        Document d = make_doc(std::move(sections));
        for (auto topo : {GraphTopology::FullyConnected, GraphTopology::Section})
            for (bool clique : {false, true}) {
                DocumentGraph g = build_graph(d, topo, clique);
                CHECK(g.node_count == d.passage_count() + 1);
                CHECK(g.symmetric());
                CHECK(g.connected());
                CHECK(g.self_loop_count() == g.node_count);
            }
    }
}

TEST_CASE("graph over an empty document is rejected") {
    CHECK_THROWS_AS(build_graph(make_doc({}), GraphTopology::FullyConnected),
                    data_error);
}

TEST_CASE("passage encoder computes tanh(W meanpool + b)") {
    ModelConfig cfg;
    cfg.d_model = 2;
    cfg.heads = 1;
    cfg.layers = 1;
    cfg.d_tok = 2;
    cfg.vocab_buckets = 4;
    cfg.max_tokens = 8;
    GraphDocModel model(cfg, 1);
    auto& table = model.params().value("encoder.token_table");
    table.at(0, 0) = 1;
    table.at(0, 1) = 3;
    table.at(1, 0) = 3;
    table.at(1, 1) = 5;
    model.params().value("encoder.proj_w") = Tensor::mat({{1, 0}, {0, 1}});
    model.params().value("encoder.proj_b") = Tensor::vec({0.5, -0.5});

    Tape tape;
    Var out = model.encode_passage(tape, {0, 1});
    const Tensor& v = tape.value(out);
    REQUIRE(v.size() == 2);
    CHECK(v.at(0) == doctest::Approx(std::tanh(2.5)).epsilon(1e-12));
    CHECK(v.at(1) == doctest::Approx(std::tanh(3.5)).epsilon(1e-12));

    Var empty = model.encode_passage(tape, {});
    CHECK(tape.value(empty).at(0) == doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
    CHECK(tape.value(empty).at(1) == doctest::Approx(std::tanh(-0.5)).epsilon(1e-12));

    model.params().value("encoder.proj_w") = Tensor::zeros({2, 2});
    model.params().value("encoder.proj_b") = Tensor::zeros({2});
    Tape tape2;
    Var zero = model.encode_passage(tape2, {0, 1});
    CHECK(tape2.value(zero).at(0) == 0.0);
    CHECK(tape2.value(zero).at(1) == 0.0);
}

TEST_CASE("graph attention layer matches a hand-worked 3-node path") {
    // Path 0-1-2 with self-loops; identity projection, a = [1,0,0,1].
    ParamStore ps;
    ps.add("gat.0.h0.W", Tensor::mat({{1, 0}, {0, 1}}));
    ps.add("gat.0.h0.a", Tensor::vec({1, 0, 0, 1}));
    DocumentGraph g;
    g.node_count = 3;
    g.adj = {1, 1, 0, 1, 1, 1, 0, 1, 1};
    REQUIRE(g.symmetric());

    Tape tape;
    Var states = tape.leaf(Tensor::mat({{1, 0}, {0, 1}, {1, 1}}));
    std::vector<Var> attn;
    Var out = gat_layer(tape, ps, 0, 1, g, states, &attn);

    const double e = std::exp(1.0);
    const double a00 = 1.0 / (1.0 + e), a01 = e / (1.0 + e);
    const double a10 = 1.0 / (1.0 + 2 * e), a11 = e / (1.0 + 2 * e);
    REQUIRE(attn.size() == 1);
    const Tensor& A = tape.value(attn[0]);
    CHECK(A.at(0, 0) == doctest::Approx(a00).epsilon(1e-12));
    CHECK(A.at(0, 1) == doctest::Approx(a01).epsilon(1e-12));
    CHECK(A.at(0, 2) == 0.0);
    CHECK(A.at(1, 0) == doctest::Approx(a10).epsilon(1e-12));
    CHECK(A.at(1, 1) == doctest::Approx(a11).epsilon(1e-12));
    CHECK(A.at(1, 2) == doctest::Approx(a11).epsilon(1e-12));
    CHECK(A.at(2, 0) == 0.0);
    CHECK(A.at(2, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(A.at(2, 2) == doctest::Approx(0.5).epsilon(1e-12));

    // ELU is identity here (all aggregates positive); add the skip.
    const Tensor& Y = tape.value(out);
    CHECK(Y.at(0, 0) == doctest::Approx(a00 + 1).epsilon(1e-12));
    CHECK(Y.at(0, 1) == doctest::Approx(a01).epsilon(1e-12));
    CHECK(Y.at(1, 0) == doctest::Approx(a10 + a11).epsilon(1e-12));
    CHECK(Y.at(1, 1) == doctest::Approx(2 * a11 + 1).epsilon(1e-12));
    CHECK(Y.at(2, 0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(Y.at(2, 1) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("identical node states give identical outputs on any graph") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 2 + rng.uniform_int(5);
        DocumentGraph g;
        g.node_count = n;
        g.adj.assign(n * n, 0);
        for (std::size_t i = 0; i < n; ++i) g.adj[i * n + i] = 1;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            g.adj[i * n + i + 1] = 1;
            g.adj[(i + 1) * n + i] = 1;
        }
        ParamStore ps;
        ps.add_uniform("gat.0.h0.W", {4, 4}, 4, rng);
        ps.add_uniform("gat.0.h0.a", {8}, 8, rng);
        Tensor states = Tensor::zeros({n, 4});
        std::vector<double> base(4);
        for (auto& x : base) x = rng.uniform(-1, 1);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < 4; ++c) states.at(i, c) = base[c];

        Tape tape;
        Var out = gat_layer(tape, ps, 0, 1, g, tape.leaf(states));
        const Tensor& y = tape.value(out);
        for (std::size_t i = 1; i < n; ++i)
            for (std::size_t c = 0; c < 4; ++c)
                CHECK(y.at(i, c) == doctest::Approx(y.at(0, c)).epsilon(1e-12));
    }
}

TEST_CASE("document encoding matches the reference forward pass") {
    ModelConfig cfg = tiny_config();
    for (auto topo : {GraphTopology::FullyConnected, GraphTopology::Section}) {
        cfg.topology = topo;
        GraphDocModel model(cfg, 7);
        Document d = make_doc({{"graph attention networks", "encode documents"},
                               {"retrieval with dense vectors"}});
        Tensor emb = model.embed_document(d, EncodeMode::Infer);
        auto ref = refmodel::ref_encode_document(cfg, model.params(), d,
                                                 cfg.max_passages_infer);
        REQUIRE(emb.size() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(emb.at(i) == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("train mode truncates to its passage budget") {
    ModelConfig cfg = tiny_config();
    cfg.max_passages_train = 2;
    GraphDocModel model(cfg, 3);
    Document d = make_doc({{"one passage", "two passage", "three passage",
                            "four passage"}});
    Tensor train_emb = model.embed_document(d, EncodeMode::Train);
    Tensor infer_emb = model.embed_document(d, EncodeMode::Infer);
    auto ref2 = refmodel::ref_encode_document(cfg, model.params(), d, 2);
    double diff = 0, gap = 0;
    for (std::size_t i = 0; i < ref2.size(); ++i) {
        diff = std::max(diff, std::abs(train_emb.at(i) - ref2[i]));
        gap = std::max(gap, std::abs(train_emb.at(i) - infer_emb.at(i)));
    }
    CHECK(diff < 1e-12);
    CHECK(gap > 1e-6); // the extra passages must actually matter
}

TEST_CASE("document embedding is invariant to passage order when fully connected") {
    ModelConfig cfg = tiny_config();
    GraphDocModel model(cfg, 11);
    Document a = make_doc({{"alpha beta", "gamma delta", "epsilon zeta"}});
    Document b = make_doc({{"gamma delta", "epsilon zeta", "alpha beta"}});
    Tensor ea = model.embed_document(a, EncodeMode::Infer);
    Tensor eb = model.embed_document(b, EncodeMode::Infer);
    for (std::size_t i = 0; i < ea.size(); ++i)
        CHECK(ea.at(i) == doctest::Approx(eb.at(i)).epsilon(1e-10));
}

TEST_CASE("query encoding is the bare passage encoder") {
    ModelConfig cfg = tiny_config();
    GraphDocModel model(cfg, 19);
    const std::string text = "graph attention networks";

    Tensor q = model.embed_query(text);
    Tape tape;
    Var p = model.encode_passage(tape, model.tokenize_text(text));
    const Tensor& pv = tape.value(p);
    REQUIRE(q.size() == pv.size());
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(q.at(i) == pv.at(i));
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(std::abs(q.at(i)) < 1.0);

    // Zero-init bias: an empty query maps to the origin.
    Tensor zq = model.embed_query("");
    for (std::size_t i = 0; i < zq.size(); ++i) CHECK(zq.at(i) == 0.0);
}

TEST_CASE("exported attention rows are stochastic and respect the mask") {
    ModelConfig cfg = tiny_config();
    cfg.topology = GraphTopology::Section;
    GraphDocModel model(cfg, 23);
    Document d = make_doc({{"p one", "p two"}, {"p three", "p four"}});
    Tensor att = model.export_attention(d);
    REQUIRE(att.rows() == 5);
    REQUIRE(att.cols() == 5);
    DocumentGraph g = build_graph(d, cfg.topology, cfg.section_clique);
    for (std::size_t i = 0; i < 5; ++i) {
        double row_sum = 0;
        for (std::size_t j = 0; j < 5; ++j) {
            const double a = att.at(i, j);
            if (g.adjacent(i, j)) {
                CHECK(a > 0.0);
            } else {
                CHECK(a == 0.0);
            }
            row_sum += a;
        }
        CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("end-to-end gradients through the document encoder check out") {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.layers = 2;
    cfg.d_tok = 4;
    cfg.vocab_buckets = 32;
    cfg.max_tokens = 16;
    GraphDocModel model(cfg, 29);
    Document d = make_doc({{"graph attention model", "documents as graphs"}});
    Tensor probe = Tensor::zeros({8});
    Rng rng(31);
    for (std::size_t i = 0; i < 8; ++i) probe.at(i) = rng.uniform(-1, 1);

    auto loss_fn = [&](Tape& tape, const ParamStore& ps) {
        GraphDocModel m = model;
        m.params() = ps;
        Var emb = m.encode_document(tape, d, EncodeMode::Train);
        return tape.dot(emb, tape.leaf(probe));
    };
    ParamStore ps = model.params();
    CHECK(check_gradients(loss_fn, ps, 1e-5) < 1e-4);
}
