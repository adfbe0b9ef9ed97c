#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "graphdoc/bm25.hpp"
#include "graphdoc/dense.hpp"
#include "graphdoc/error.hpp"
#include "graphdoc/fusion.hpp"
#include "graphdoc/gradcheck.hpp"
#include "graphdoc/metrics.hpp"
#include "graphdoc/retrieval_train.hpp"
#include "graphdoc/rng.hpp"
#include "graphdoc/text.hpp"
#include "graphdoc/trec.hpp"

using namespace graphdoc;

namespace {

Document text_doc(const std::string& id, const std::string& text) {
    Document d;
    d.id = id;
    d.sections.push_back({text});
    return d;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string tmp_path(const std::string& name) {
    return std::string("/tmp/graphdoc_test_") + name;
}

// Straight-line scorer kept independent of the index structures.
double ref_bm25_score(const Corpus& corpus, const std::vector<std::string>& terms,
                      std::size_t doc_idx, double k1 = 0.9, double b = 0.4) {
    std::vector<std::vector<std::string>> tokens;
    for (const Document& d : corpus) {
        std::string full;
        for (const auto& sec : d.sections)
            for (const auto& p : sec) {
                if (!full.empty()) full += ' ';
                full += p;
            }
        tokens.push_back(tokenize_words(full));
    }
    double total_len = 0;
    for (const auto& t : tokens) total_len += static_cast<double>(t.size());
    const double avgdl = total_len / static_cast<double>(corpus.size());
    const double dl = static_cast<double>(tokens[doc_idx].size());
    const double norm = k1 * (1.0 - b + b * dl / avgdl);
    double score = 0.0;
    for (const auto& term : terms) {
        double df = 0;
        for (const auto& t : tokens)
            if (std::count(t.begin(), t.end(), term)) df += 1;
        const double tf = static_cast<double>(
            std::count(tokens[doc_idx].begin(), tokens[doc_idx].end(), term));
        if (tf == 0 || df == 0) continue;
        const double idf =
            std::log(1.0 + (static_cast<double>(corpus.size()) - df + 0.5) / (df + 0.5));
        score += idf * tf / (tf + norm);
    }
    return score;
}

Run one_query_run(const std::string& qid, std::vector<ScoredDoc> docs,
                  const std::string& tag = "t") {
    Run r;
    r.tag = tag;
    r.by_query[qid] = std::move(docs);
    return r;
}

} // namespace

TEST_CASE("bm25 index exposes exact counts") {
    Corpus corpus = {text_doc("d1", "a b a")};
    Bm25Index index = Bm25Index::build(corpus);
    CHECK(index.doc_count() == 1);
    CHECK(index.tf("a", "d1") == 2);
    CHECK(index.tf("b", "d1") == 1);
    CHECK(index.tf("c", "d1") == 0);
    CHECK(index.doc_length("d1") == 3);
    CHECK(index.avg_doc_length() == 3.0);
    CHECK(index.df("a") == 1);

    Corpus two = {text_doc("d1", "a"), text_doc("d2", "b")};
    CHECK(Bm25Index::build(two).doc_count() == 2);
}

TEST_CASE("bm25 build rejects bad corpora") {
    CHECK_THROWS_AS(Bm25Index::build({}), data_error);
    Corpus dup = {text_doc("d1", "a"), text_doc("d1", "b")};
    CHECK_THROWS_AS(Bm25Index::build(dup), data_error);
    Corpus index = {text_doc("d1", "a")};
    CHECK_THROWS_AS(Bm25Index::build(index).score({"a"}, "nope"), data_error);
    CHECK_THROWS_AS(Bm25Index::build(index).search("a", 0), usage_error);
}

TEST_CASE("bm25 score matches the hand-worked formula") {
    Corpus corpus = {text_doc("d1", "a b a")};
    Bm25Index index = Bm25Index::build(corpus);
    // idf = ln(4/3); tf = 2; dl = avgdl so the length norm is k1 = 0.9.
    const double expected = std::log(4.0 / 3.0) * 2.0 / 2.9;
    CHECK(index.score({"a"}, "d1") == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.1984).epsilon(1e-3));
    CHECK(index.score({"nope"}, "d1") == 0.0);
}

TEST_CASE("bm25 score grows with term frequency at fixed length") {
    Corpus corpus = {text_doc("d1", "a b b b"), text_doc("d2", "a a b b")};
    Bm25Index index = Bm25Index::build(corpus);
    CHECK(index.score({"a"}, "d2") > index.score({"a"}, "d1"));
}

TEST_CASE("bm25 search ranks a toy corpus as hand scoring says") {
    Corpus corpus = {text_doc("d1", "x x y"), text_doc("d2", "x y y"),
                     text_doc("d3", "z z z")};
    Bm25Index index = Bm25Index::build(corpus);
    Ranking top1 = index.search("y", 1);
    REQUIRE(top1.size() == 1);
    CHECK(top1[0].doc_id == "d2");
    Ranking all = index.search("y", 5);
    REQUIRE(all.size() == 2); // d3 has no match
    CHECK(all[0].doc_id == "d2");
    CHECK(all[1].doc_id == "d1");
    CHECK(index.search("missing words only", 5).empty());
}

TEST_CASE("bm25 search equals brute-force scoring, ties and all") {
    Rng rng(404);
    const char* words[] = {"w0", "w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8", "w9"};
    std::vector<std::string> templates;
    for (int t = 0; t < 10; ++t) {
        std::string text;
        const std::size_t len = 3 + rng.uniform_int(8);
        for (std::size_t i = 0; i < len; ++i) {
            if (i) text += ' ';
            text += words[rng.uniform_int(10)];
        }
        templates.push_back(text);
    }
    Corpus corpus;
    for (int i = 0; i < 300; ++i) {
        char id[8];
        std::snprintf(id, sizeof id, "d%03d", i);
        corpus.push_back(text_doc(id, templates[i % templates.size()]));
    }
    Bm25Index index = Bm25Index::build(corpus);

    for (int trial = 0; trial < 4; ++trial) {
        std::vector<std::string> terms;
        const std::size_t n_terms = 1 + rng.uniform_int(4);
        for (std::size_t i = 0; i < n_terms; ++i) terms.push_back(words[rng.uniform_int(10)]);
        if (trial == 3) terms.push_back("absent");

        Ranking expected;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            const double s = ref_bm25_score(corpus, terms, i);
            if (s > 0.0) expected.push_back({corpus[i].id, s});
        }
        std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.doc_id < b.doc_id;
        });
        for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{17},
                              std::size_t{300}}) {
            Ranking got = index.search_terms(terms, k);
            REQUIRE(got.size() == std::min(k, expected.size()));
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].doc_id == expected[i].doc_id);
                CHECK(got[i].score == expected[i].score);
            }
        }
    }
}

TEST_CASE("bm25 serialization is deterministic and lossless") {
    Corpus corpus = {text_doc("d1", "alpha beta alpha"), text_doc("d2", "beta gamma"),
                     text_doc("d3", "gamma gamma delta")};
    Bm25Index index = Bm25Index::build(corpus);
    const std::string p1 = tmp_path("bm25_a"), p2 = tmp_path("bm25_b");
    index.save(p1);
    index.save(p2);
    CHECK(read_file(p1) == read_file(p2));

    Bm25Index loaded = Bm25Index::load(p1);
    CHECK(loaded.doc_count() == 3);
    CHECK(loaded.avg_doc_length() == index.avg_doc_length());
    for (const auto& q : {"alpha", "beta", "gamma", "delta"})
        for (const auto& d : {"d1", "d2", "d3"})
            CHECK(loaded.score({q}, d) == index.score({q}, d));
    loaded.save(p2);
    CHECK(read_file(p1) == read_file(p2));

    std::ofstream(p2, std::ios::binary) << "not an index\n";
    CHECK_THROWS_AS(Bm25Index::load(p2), data_error);
}

TEST_CASE("dense search on orthonormal vectors") {
    DenseIndex index;
    index.ids = {"a", "b", "c"};
    index.embeddings = Tensor::mat({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    Ranking r = dense_search(index, Tensor::vec({0, 1, 0}), 2);
    REQUIRE(r.size() == 2);
    CHECK(r[0].doc_id == "b");
    CHECK(r[0].score == 1.0);

    Ranking zero = dense_search(index, Tensor::vec({0, 0, 0}), 3);
    REQUIRE(zero.size() == 3);
    CHECK(zero[0].doc_id == "a");
    CHECK(zero[1].doc_id == "b");
    CHECK(zero[2].doc_id == "c");
    for (const auto& sd : zero) CHECK(sd.score == 0.0);

    CHECK_THROWS_AS(dense_search(index, Tensor::vec({1, 0}), 1), dim_error);
    CHECK_THROWS_AS(dense_search(index, Tensor::vec({1, 0, 0}), 0), usage_error);
}

TEST_CASE("dense search equals the brute-force oracle") {
    Rng rng(7);
    DenseIndex index;
    index.embeddings = Tensor::zeros({10, 4});
    for (int i = 0; i < 10; ++i) index.ids.push_back("doc" + std::to_string(i));
    for (auto& v : index.embeddings.data) v = rng.uniform(-1, 1);
    Tensor q = Tensor::vec({0, 0, 0, 0});
    for (auto& v : q.data) v = rng.uniform(-1, 1);

    Ranking expected;
    for (std::size_t i = 0; i < 10; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 4; ++j) s += index.embeddings.at(i, j) * q.at(j);
        expected.push_back({index.ids[i], s});
    }
    std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    for (std::size_t k : {std::size_t{1}, std::size_t{4}, std::size_t{10}}) {
        Ranking got = dense_search(index, q, k);
        REQUIRE(got.size() == k);
        for (std::size_t i = 0; i < k; ++i) {
            CHECK(got[i].doc_id == expected[i].doc_id);
            CHECK(got[i].score == expected[i].score);
        }
    }
}

TEST_CASE("dense index round-trips through its tsv form") {
    Rng rng(12);
    DenseIndex index;
    index.ids = {"a", "b"};
    index.embeddings = Tensor::zeros({2, 3});
    for (auto& v : index.embeddings.data) v = rng.uniform(-2, 2);
    const std::string path = tmp_path("dense_idx");
    save_dense_index(index, path);
    DenseIndex loaded = load_dense_index(path);
    CHECK(loaded.ids == index.ids);
    REQUIRE(loaded.embeddings.shape == index.embeddings.shape);
    for (std::size_t i = 0; i < index.embeddings.size(); ++i)
        CHECK(loaded.embeddings.data[i] == index.embeddings.data[i]);
}

TEST_CASE("run files have the pinned 6-decimal line format") {
    Run run = one_query_run("q1", {{"docB", 1.25}, {"docA", 0.5}}, "sys");
    run.by_query["q2"] = {{"docC", -0.125}};
    const std::string path = tmp_path("run_fmt");
    save_run(run, path);
    CHECK(read_file(path) ==
          "q1 Q0 docB 1 1.250000 sys\n"
          "q1 Q0 docA 2 0.500000 sys\n"
          "q2 Q0 docC 1 -0.125000 sys\n");
    Run loaded = load_run(path);
    CHECK(loaded.tag == "sys");
    REQUIRE(loaded.by_query.at("q1").size() == 2);
    CHECK(loaded.by_query.at("q1")[0].doc_id == "docB");
    CHECK(loaded.by_query.at("q1")[0].score == 1.25);

    std::ofstream(path, std::ios::binary)
        << "q1 Q0 docB 1 1.0 sys\nq1 Q0 docA 3 0.5 sys\n";
    CHECK_THROWS_WITH_AS(load_run(path),
                         doctest::Contains(":2: rank 3 breaks the 1..k sequence"),
                         data_error);
}

TEST_CASE("qrels and query files round-trip") {
    Qrels qrels;
    qrels["q1"]["d1"] = 2;
    qrels["q1"]["d2"] = 0;
    qrels["q2"]["d3"] = 1;
    const std::string path = tmp_path("qrels");
    save_qrels(qrels, path);
    CHECK(read_file(path) == "q1 0 d1 2\nq1 0 d2 0\nq2 0 d3 1\n");
    CHECK(load_qrels(path) == qrels);
    std::ofstream(path, std::ios::binary) << "q1 0 d1 -3\n";
    CHECK_THROWS_AS(load_qrels(path), data_error);

    std::vector<Query> queries = {{"q1", "graph attention"}, {"q2", "text\twith tab"}};
    const std::string qpath = tmp_path("queries");
    save_queries(queries, qpath);
    auto loaded = load_queries(qpath);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].id == "q1");
    CHECK(loaded[0].text == "graph attention");
    CHECK(loaded[1].text == "text\twith tab");
}

TEST_CASE("fusion endpoints reproduce the input orderings") {
    Run dense = one_query_run("q", {{"a", 0.9}, {"b", 0.5}, {"c", 0.1}});
    Run bm25 = one_query_run("q", {{"c", 7.0}, {"a", 3.0}, {"b", 1.0}});
    Run w1 = fuse(dense, bm25, 1.0, 10);
    REQUIRE(w1.by_query.at("q").size() == 3);
    CHECK(w1.by_query.at("q")[0].doc_id == "a");
    CHECK(w1.by_query.at("q")[1].doc_id == "b");
    CHECK(w1.by_query.at("q")[2].doc_id == "c");
    Run w0 = fuse(dense, bm25, 0.0, 10);
    CHECK(w0.by_query.at("q")[0].doc_id == "c");
    CHECK(w0.by_query.at("q")[1].doc_id == "a");
    CHECK(w0.by_query.at("q")[2].doc_id == "b");
    CHECK_THROWS_AS(fuse(dense, bm25, 1.5, 10), usage_error);
    CHECK_THROWS_AS(fuse(dense, bm25, -0.1, 10), usage_error);
}

TEST_CASE("fusion keeps relative order of one system's candidates at its endpoint") {
    Run dense = one_query_run("q", {{"a", 0.9}, {"b", 0.5}});
    Run bm25 = one_query_run("q", {{"b", 2.0}, {"c", 1.0}});
    Run w1 = fuse(dense, bm25, 1.0, 10);
    std::vector<std::string> order;
    for (const auto& sd : w1.by_query.at("q")) order.push_back(sd.doc_id);
    auto pos = [&](const std::string& id) {
        return std::find(order.begin(), order.end(), id) - order.begin();
    };
    CHECK(pos("a") < pos("b")); // dense order preserved among dense candidates
}

TEST_CASE("half-and-half fusion ties break by doc id") {
    Run dense = one_query_run("q", {{"d1", 10.0}, {"d2", 0.0}});
    Run bm25 = one_query_run("q", {{"d2", 5.0}, {"d1", 0.0}});
    Run fused = fuse(dense, bm25, 0.5, 10);
    const Ranking& r = fused.by_query.at("q");
    REQUIRE(r.size() == 2);
    CHECK(r[0].doc_id == "d1");
    CHECK(r[1].doc_id == "d2");
    CHECK(r[0].score == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r[1].score == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("raw fusion skips the per-query normalization") {
    Run dense = one_query_run("q", {{"d1", 0.6}, {"d2", 0.4}});
    Run bm25 = one_query_run("q", {{"d2", 0.3}, {"d1", 0.0}});
    Run minmax = fuse(dense, bm25, 0.5, 10, FusionNorm::MinMax);
    CHECK(minmax.by_query.at("q")[0].doc_id == "d1"); // tie at 0.5, id break
    Run raw = fuse(dense, bm25, 0.5, 10, FusionNorm::Raw);
    CHECK(raw.by_query.at("q")[0].doc_id == "d2"); // 0.35 beats 0.3
}

TEST_CASE("fusion weight tuning picks the metric maximizer, smallest on ties") {
    Qrels qrels;
    qrels["q"]["rel"] = 1;
    auto p1 = [&](const Run& r) { return precision_at_k(r, qrels, 1); };

    // Dense puts the relevant doc on top with a near-tie runner-up; bm25
    // inverts it. Only w = 1 ranks `rel` first.
    Run dense = one_query_run("q", {{"rel", 1.0}, {"xx", 0.95}, {"mm", 0.0}});
    Run bm25 = one_query_run("q", {{"xx", 1.0}, {"mm", 0.5}, {"rel", 0.0}});
    CHECK(tune_fusion_weight(dense, bm25, p1, 10) == 1.0);

    // Identical runs: every weight scores the same, so the tie rule gives 0.
    CHECK(tune_fusion_weight(dense, dense, p1, 10) == 0.0);

    // Each system favors a different distractor; only the blend wins.
    Run d2 = one_query_run("q", {{"aa", 1.0}, {"rel", 0.6}, {"bb", 0.0}});
    Run b2 = one_query_run("q", {{"bb", 1.0}, {"rel", 0.6}, {"aa", 0.0}});
    const double w = tune_fusion_weight(d2, b2, p1, 10);
    CHECK(w == doctest::Approx(0.45).epsilon(1e-12));
}

TEST_CASE("metric hand values") {
    Qrels qrels;
    qrels["q"]["A"] = 3;
    qrels["q"]["B"] = 2;
    qrels["q"]["C"] = 0;

    Run perfect = one_query_run("q", {{"A", 3}, {"B", 2}, {"C", 1}});
    CHECK(precision_at_k(perfect, qrels, 2) == 1.0);
    CHECK(mrr_at_k(perfect, qrels, 10) == 1.0);
    CHECK(ndcg_at_k(perfect, qrels, 3) == doctest::Approx(1.0).epsilon(1e-12));

    Run third = one_query_run("q", {{"C", 3}, {"D", 2}, {"A", 1}});
    CHECK(mrr_at_k(third, qrels, 10) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(mrr_at_k(third, qrels, 2) == 0.0);

    Run swapped = one_query_run("q", {{"B", 3}, {"A", 2}, {"C", 1}});
    const double l3 = std::log2(3.0);
    const double expected = (2.0 + 3.0 / l3) / (3.0 + 2.0 / l3);
    CHECK(ndcg_at_k(swapped, qrels, 3) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.9134).epsilon(1e-4));

    const double exp_gain = (3.0 + 7.0 / l3) / (7.0 + 3.0 / l3);
    CHECK(ndcg_at_k(swapped, qrels, 3, NdcgGain::Exp) ==
          doctest::Approx(exp_gain).epsilon(1e-12));
}

TEST_CASE("queries without relevant docs count as zero") {
    Qrels qrels;
    qrels["q1"]["A"] = 1;
    Run run = one_query_run("q1", {{"A", 1.0}});
    run.by_query["q2"] = {{"B", 1.0}}; // nothing relevant anywhere for q2
    CHECK(precision_at_k(run, qrels, 1) == 0.5);
    CHECK(mrr_at_k(run, qrels, 1) == 0.5);
    CHECK(ndcg_at_k(run, qrels, 1) == 0.5);

    // A qrels-only query also drags the mean down.
    qrels["q3"]["C"] = 1;
    CHECK(precision_at_k(run, qrels, 1) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("metrics are rank-based and ignore sub-k tail changes") {
    Qrels qrels;
    qrels["q"]["A"] = 2;
    Run run = one_query_run("q", {{"A", 5.0}, {"B", 2.0}});
    Run scaled = one_query_run("q", {{"A", 35.0}, {"B", 14.0}});
    Run extended = one_query_run("q", {{"A", 5.0}, {"B", 2.0}, {"Z", 1.0}});
    for (std::size_t k : {std::size_t{1}, std::size_t{2}}) {
        CHECK(precision_at_k(run, qrels, k) == precision_at_k(scaled, qrels, k));
        CHECK(mrr_at_k(run, qrels, k) == mrr_at_k(scaled, qrels, k));
        CHECK(ndcg_at_k(run, qrels, k) == ndcg_at_k(scaled, qrels, k));
        CHECK(ndcg_at_k(run, qrels, k) == ndcg_at_k(extended, qrels, k));
    }
    CHECK_THROWS_AS(precision_at_k(run, qrels, 0), usage_error);
}

TEST_CASE("metrics agree with an independent oracle on random cases") {
    Rng rng(2024);
    const std::vector<std::string> docs = {"d0", "d1", "d2", "d3", "d4"};
    for (int trial = 0; trial < 20; ++trial) {
        Qrels qrels;
        Run run;
        for (int q = 0; q < 3; ++q) {
            const std::string qid = "q" + std::to_string(q);
            for (const auto& d : docs)
                if (rng.bernoulli(0.5)) qrels[qid][d] = static_cast<int>(rng.uniform_int(4));
            if (q == 2 && rng.bernoulli(0.5)) continue; // qrels-only query
            std::vector<std::string> shuffled = docs;
            rng.shuffle(shuffled);
            Ranking ranking;
            const std::size_t depth = 1 + rng.uniform_int(5);
            double score = 10.0;
            for (std::size_t i = 0; i < depth; ++i) {
                ranking.push_back({shuffled[i], score});
                score -= 0.5;
            }
            run.by_query[qid] = ranking;
        }
        const std::size_t k = 1 + rng.uniform_int(6);

        std::set<std::string> qids;
        for (const auto& [qid, r] : run.by_query) qids.insert(qid);
        for (const auto& [qid, g] : qrels) qids.insert(qid);
        double ref_p = 0, ref_mrr = 0, ref_ndcg = 0;
        for (const auto& qid : qids) {
            Ranking r;
            if (run.by_query.count(qid)) r = run.by_query.at(qid);
            std::map<std::string, int> grades;
            if (qrels.count(qid)) grades = qrels.at(qid);
            auto grade = [&](const std::string& d) {
                return grades.count(d) ? grades.at(d) : 0;
            };
            std::size_t hits = 0;
            double mrr = 0, dcg = 0, idcg = 0;
            for (std::size_t i = 0; i < r.size() && i < k; ++i) {
                if (grade(r[i].doc_id) > 0) {
                    ++hits;
                    if (mrr == 0) mrr = 1.0 / double(i + 1);
                }
                dcg += grade(r[i].doc_id) / std::log2(double(i + 2));
            }
            std::vector<int> gs;
            for (const auto& [d, g] : grades) gs.push_back(g);
            std::sort(gs.rbegin(), gs.rend());
            for (std::size_t i = 0; i < gs.size() && i < k; ++i)
                idcg += gs[i] / std::log2(double(i + 2));
            ref_p += double(hits) / double(k);
            ref_mrr += mrr;
            ref_ndcg += idcg > 0 ? dcg / idcg : 0.0;
        }
        const double nq = double(qids.size());
        CHECK(precision_at_k(run, qrels, k) ==
              doctest::Approx(ref_p / nq).epsilon(1e-12));
        CHECK(mrr_at_k(run, qrels, k) == doctest::Approx(ref_mrr / nq).epsilon(1e-12));
        CHECK(ndcg_at_k(run, qrels, k) ==
              doctest::Approx(ref_ndcg / nq).epsilon(1e-12));
        CHECK(precision_at_k(run, qrels, k) <= 1.0);
        CHECK(mrr_at_k(run, qrels, k) <= 1.0);
        CHECK(ndcg_at_k(run, qrels, k) <= 1.0);
    }
}

TEST_CASE("hard negative mining draws from the non-relevant pool") {
    Qrels qrels;
    qrels["q"]["rel1"] = 1;
    qrels["q"]["rel2"] = 2;
    std::vector<std::string> corpus_ids = {"rel1", "rel2", "neg1", "neg2"};
    Rng rng(5);

    Run run = one_query_run("q", {{"rel1", 3.0}, {"neg1", 2.0}, {"rel2", 1.0}});
    for (int i = 0; i < 10; ++i) {
        auto picks = mine_hard_negatives(run, qrels, corpus_ids, 100, rng);
        CHECK(picks.at("q") == "neg1");
    }

    // Pool size 1 sees only the relevant top candidate: corpus fallback.
    auto fallback = mine_hard_negatives(run, qrels, corpus_ids, 1, rng);
    CHECK((fallback.at("q") == "neg1" || fallback.at("q") == "neg2"));

    Run all_rel = one_query_run("q", {{"rel1", 3.0}, {"rel2", 2.0}});
    for (int i = 0; i < 10; ++i) {
        auto picks = mine_hard_negatives(all_rel, qrels, corpus_ids, 100, rng);
        CHECK((picks.at("q") == "neg1" || picks.at("q") == "neg2"));
    }

    CHECK_THROWS_AS(
        mine_hard_negatives(all_rel, qrels, {"rel1", "rel2"}, 100, rng), data_error);
}

TEST_CASE("hard negative draws are uniform over the pool") {
    Qrels qrels;
    qrels["q"]["rel"] = 1;
    Ranking ranking = {{"rel", 9.0}, {"n0", 5.0}, {"n1", 4.0},
                       {"n2", 3.0},  {"n3", 2.0}, {"n4", 1.0}};
    Run run = one_query_run("q", ranking);
    Rng rng(31);
    std::map<std::string, int> counts;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i)
        ++counts[mine_hard_negatives(run, qrels, {"rel"}, 100, rng).at("q")];
    CHECK(counts.size() == 5);
    for (const auto& [id, c] : counts)
        CHECK(std::abs(c / double(trials) - 0.2) < 0.02);
}

TEST_CASE("retrieval loss closed form and gradients") {
    Tape tape;
    Var q = tape.leaf(Tensor::mat({{1.0, 0.0}}));
    Var cands = tape.leaf(Tensor::mat({{1.0, 0.0}, {1.0, 0.0}}));
    CHECK(tape.scalar(retrieval_loss(tape, q, cands)) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Var short_cands = tape.leaf(Tensor::mat({{1.0, 0.0}}));
    Var q2 = tape.leaf(Tensor::mat({{1.0, 0.0}, {0.0, 1.0}}));
    CHECK_THROWS_AS(retrieval_loss(tape, q2, short_cands), dim_error);

    ParamStore ps;
    Rng rng(17);
    ps.add_uniform("q", {2, 3}, 3, rng);
    ps.add_uniform("c", {4, 3}, 3, rng);
    auto loss_fn = [](Tape& t, const ParamStore& p) {
        return retrieval_loss(t, t.param(p, "q"), t.param(p, "c"));
    };
    CHECK(check_gradients(loss_fn, ps, 1e-5) < 1e-4);
}

namespace {

struct RetrievalFixture {
    Corpus corpus;
    std::vector<TrainPair> pairs;
    Qrels qrels;
};

RetrievalFixture make_retrieval_fixture() {
    static const char* topics[2][4] = {
        {"solar panels energy grid", "wind turbines power supply",
         "hydro dams electricity flow", "battery storage charge cycle"},
        {"violin sonata concert hall", "piano chords melody rhythm",
         "opera chorus staging voice", "cello quartet strings bow"}};
    RetrievalFixture fx;
    for (int i = 0; i < 12; ++i) {
        Document d;
        d.id = "doc" + std::to_string(i);
        d.sections.push_back({});
        for (int p = 0; p < 2; ++p) {
            std::string text = topics[i % 2][(i / 2 + p) % 4];
            text += " marker" + std::to_string(i) + " marker" + std::to_string(i);
            d.sections[0].push_back(text);
        }
        fx.corpus.push_back(d);
        const std::string qid = "q" + std::to_string(i);
        fx.pairs.push_back({qid, "marker" + std::to_string(i) + " " +
                                     std::string(topics[i % 2][(i / 2) % 4]),
                            d.id});
        fx.qrels[qid][d.id] = 1;
    }
    return fx;
}

ModelConfig retrieval_model_config() {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.d_tok = 4;
    cfg.vocab_buckets = 256;
    cfg.max_tokens = 16;
    return cfg;
}

} // namespace

TEST_CASE("retrieval finetuning lowers the loss and starts near ln(2N)") {
    RetrievalFixture fx = make_retrieval_fixture();
    GraphDocModel model(retrieval_model_config(), 3);
    RetrievalFinetuneConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 6; // stage switch after 3: exercises model-based negatives
    cfg.base_lr = 0.02;
    cfg.seed = 19;
    std::ostringstream log;
    FinetuneResult res = finetune_retrieval(model, fx.corpus, fx.pairs, fx.qrels,
                                            cfg, &log);
    REQUIRE(res.steps_per_epoch == 3);
    REQUIRE(res.losses.size() == 18);
    CHECK(std::abs(res.losses[0] - std::log(8.0)) / std::log(8.0) < 0.15);
    const double first = (res.losses[0] + res.losses[1]) / 2;
    const double last = (res.losses[16] + res.losses[17]) / 2;
    CHECK(last < first);
    CHECK(!log.str().empty());
}

TEST_CASE("retrieval finetuning is deterministic for a fixed seed") {
    auto run = [](std::vector<double>* losses) {
        RetrievalFixture fx = make_retrieval_fixture();
        GraphDocModel model(retrieval_model_config(), 8);
        RetrievalFinetuneConfig cfg;
        cfg.batch_size = 4;
        cfg.epochs = 2;
        cfg.base_lr = 1e-3;
        cfg.seed = 5;
        auto res = finetune_retrieval(model, fx.corpus, fx.pairs, fx.qrels, cfg);
        *losses = res.losses;
        return model.params();
    };
    std::vector<double> l1, l2;
    ParamStore p1 = run(&l1), p2 = run(&l2);
    REQUIRE(l1.size() == l2.size());
    CHECK(std::memcmp(l1.data(), l2.data(), l1.size() * sizeof(double)) == 0);
    for (const auto& [path, t] : p1.values)
        CHECK(std::memcmp(t.data.data(), p2.value(path).data.data(),
                          t.size() * sizeof(double)) == 0);
}

TEST_CASE("retrieval finetuning validates its inputs") {
    RetrievalFixture fx = make_retrieval_fixture();
    GraphDocModel model(retrieval_model_config(), 1);
    RetrievalFinetuneConfig cfg;
    cfg.batch_size = 4;

    std::vector<TrainPair> bad = fx.pairs;
    bad[0].positive_doc_id = "ghost";
    CHECK_THROWS_AS(finetune_retrieval(model, fx.corpus, bad, fx.qrels, cfg),
                    data_error);

    cfg.batch_size = 1;
    CHECK_THROWS_AS(finetune_retrieval(model, fx.corpus, fx.pairs, fx.qrels, cfg),
                    usage_error);

    cfg.batch_size = 100;
    CHECK_THROWS_AS(finetune_retrieval(model, fx.corpus, fx.pairs, fx.qrels, cfg),
                    data_error);
}
