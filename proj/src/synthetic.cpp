#include "graphdoc/synthetic.hpp"

#include <string>

#include "graphdoc/error.hpp"
#include "graphdoc/rng.hpp"

namespace graphdoc {

namespace {

void validate(const SyntheticConfig& cfg) {
    if (cfg.topics < 2) throw usage_error("synthetic: need at least 2 topics");
    if (cfg.train_docs < 2 * cfg.topics)
        throw usage_error("synthetic: need at least 2 documents per topic, got " +
                          std::to_string(cfg.train_docs) + " for " +
                          std::to_string(cfg.topics) + " topics");
    if (cfg.min_passages < 1 || cfg.max_passages < cfg.min_passages)
        throw usage_error("synthetic: passage range must satisfy 1 <= min <= max");
    if (cfg.words_per_passage < 1)
        throw usage_error("synthetic: words per passage must be positive");
    if (cfg.topic_vocab < 1 || cfg.shared_vocab < 1)
        throw usage_error("synthetic: vocabularies must be non-empty");
    if (cfg.topic_word_prob < 0.0 || cfg.topic_word_prob > 1.0)
        throw usage_error("synthetic: topic word probability must lie in [0, 1]");
}

std::string draw_word(const SyntheticConfig& cfg, std::size_t topic, Rng& rng) {
    if (rng.bernoulli(cfg.topic_word_prob))
        return "t" + std::to_string(topic) + "w" +
               std::to_string(rng.uniform_int(cfg.topic_vocab));
    return "bg" + std::to_string(rng.uniform_int(cfg.shared_vocab));
}

std::string draw_passage(const SyntheticConfig& cfg, std::size_t topic, Rng& rng) {
    std::string text = draw_word(cfg, topic, rng);
    for (std::size_t w = 1; w < cfg.words_per_passage; ++w) {
        text += ' ';
        text += draw_word(cfg, topic, rng);
    }
    return text;
}

} // namespace

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
    validate(cfg);
    Rng rng(cfg.seed);
    SyntheticData data;
    std::vector<std::size_t> train_topics;
    const std::size_t total = cfg.train_docs + cfg.test_docs;
    for (std::size_t i = 0; i < total; ++i) {
        const std::size_t topic = rng.uniform_int(cfg.topics);
        Document doc;
        doc.id = "doc" + std::to_string(i);
        doc.label = "topic" + std::to_string(topic);
        doc.sections.push_back({});
        const std::size_t n_pass =
            cfg.min_passages + rng.uniform_int(cfg.max_passages - cfg.min_passages + 1);
        for (std::size_t p = 0; p < n_pass; ++p)
            doc.sections[0].push_back(draw_passage(cfg, topic, rng));
        if (i < cfg.train_docs) {
            train_topics.push_back(topic);
            data.train.push_back(std::move(doc));
        } else {
            data.test.push_back(std::move(doc));
        }
    }
    for (std::size_t q = 0; q < cfg.queries; ++q) {
        const std::size_t source = rng.uniform_int(cfg.train_docs);
        const std::size_t topic = train_topics[source];
        Query query;
        query.id = "q" + std::to_string(q);
        query.text = draw_passage(cfg, topic, rng);
        auto& grades = data.qrels[query.id];
        for (std::size_t i = 0; i < cfg.train_docs; ++i)
            if (train_topics[i] == topic) grades[data.train[i].id] = 1;
        grades[data.train[source].id] = 2;
        data.queries.push_back(std::move(query));
    }
    return data;
}

} // namespace graphdoc
