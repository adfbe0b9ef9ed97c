#pragma once

#include <cstdint>
#include <vector>

#include "graphdoc/document.hpp"
#include "graphdoc/trec.hpp"

namespace graphdoc {

/// Topic-model corpus generator: every document draws one topic and fills
/// its passages with words sampled from that topic's vocabulary mixed with
/// a shared background pool, so lexical and dense retrieval both have
/// signal but the separation is not trivial.
struct SyntheticConfig {
    std::size_t topics = 5;
    std::size_t topic_vocab = 50;  // words private to each topic
    std::size_t shared_vocab = 50; // background words common to all topics
    std::size_t train_docs = 100;
    std::size_t test_docs = 0;
    std::size_t min_passages = 2;
    std::size_t max_passages = 4;
    std::size_t words_per_passage = 60;
    std::size_t queries = 0;       // against the train corpus
    double topic_word_prob = 0.8;  // rest drawn from the background pool
    std::uint64_t seed = 0;
};

struct SyntheticData {
    Corpus train;
    Corpus test;
    std::vector<Query> queries;
    Qrels qrels; // grade 2 for the query's source doc, 1 for same-topic docs
};

/// Deterministic for a fixed config: regenerating yields identical bytes.
SyntheticData generate_synthetic(const SyntheticConfig& cfg);

} // namespace graphdoc
