#include "graphdoc/retrieval_train.hpp"

#include <algorithm>
#include <cstdio>

#include "graphdoc/bm25.hpp"
#include "graphdoc/dense.hpp"
#include "graphdoc/error.hpp"

namespace graphdoc {

namespace {

int grade_of(const Qrels& qrels, const std::string& qid, const std::string& doc_id) {
    auto qit = qrels.find(qid);
    if (qit == qrels.end()) return 0;
    auto dit = qit->second.find(doc_id);
    return dit == qit->second.end() ? 0 : dit->second;
}

} // namespace

std::map<std::string, std::string> mine_hard_negatives(
    const Run& run, const Qrels& qrels, const std::vector<std::string>& corpus_ids,
    std::size_t pool_size, Rng& rng) {
    std::map<std::string, std::string> picks;
    for (const auto& [qid, ranking] : run.by_query) {
        std::vector<const std::string*> pool;
        for (std::size_t i = 0; i < ranking.size() && i < pool_size; ++i)
            if (grade_of(qrels, qid, ranking[i].doc_id) <= 0)
                pool.push_back(&ranking[i].doc_id);
        if (!pool.empty()) {
            picks[qid] = *pool[rng.uniform_int(pool.size())];
            continue;
        }
        std::vector<const std::string*> fallback;
        for (const auto& doc_id : corpus_ids)
            if (grade_of(qrels, qid, doc_id) <= 0) fallback.push_back(&doc_id);
        if (fallback.empty())
            throw data_error("hard negatives: every document is relevant to query " + qid);
        picks[qid] = *fallback[rng.uniform_int(fallback.size())];
    }
    return picks;
}

Var retrieval_loss(Tape& tape, Var queries, Var candidates) {
    const std::size_t n = tape.value(queries).rows();
    if (tape.value(candidates).rows() < n)
        throw dim_error("retrieval_loss: fewer candidates than queries");
    std::vector<std::uint64_t> targets(n);
    for (std::size_t i = 0; i < n; ++i) targets[i] = i;
    Var scores = tape.matmul_nt(queries, candidates);
    return tape.mean_all(tape.softmax_xent_rows(scores, targets));
}

FinetuneResult finetune_retrieval(GraphDocModel& model, const Corpus& corpus,
                                  const std::vector<TrainPair>& pairs,
                                  const Qrels& qrels,
                                  const RetrievalFinetuneConfig& cfg,
                                  std::ostream* loss_log) {
    if (cfg.batch_size < 2)
        throw usage_error("finetune: batch size must be at least 2");
    if (cfg.epochs == 0) throw usage_error("finetune: epochs must be positive");
    if (pairs.size() < cfg.batch_size)
        throw data_error("finetune: " + std::to_string(pairs.size()) +
                         " training pairs for batch size " +
                         std::to_string(cfg.batch_size));

    std::map<std::string, const Document*> by_id;
    for (const Document& doc : corpus) by_id[doc.id] = &doc;
    for (const TrainPair& p : pairs)
        if (!by_id.count(p.positive_doc_id))
            throw data_error("finetune: positive document " + p.positive_doc_id +
                             " for query " + p.query_id + " is not in the corpus");

    std::vector<std::string> corpus_ids;
    corpus_ids.reserve(corpus.size());
    for (const Document& doc : corpus) corpus_ids.push_back(doc.id);

    const Bm25Index bm25 = Bm25Index::build(corpus);
    Run stage_run;
    stage_run.tag = "bm25-negatives";
    for (const TrainPair& p : pairs)
        if (!stage_run.by_query.count(p.query_id))
            stage_run.by_query[p.query_id] =
                bm25.search(p.query_text, cfg.negative_pool);

    const std::size_t steps_per_epoch = pairs.size() / cfg.batch_size;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;
    const std::size_t first_stage_epochs = (cfg.epochs + 1) / 2;

    AdamState adam;
    AdamConfig adam_cfg;
    adam_cfg.weight_decay = cfg.weight_decay;
    FinetuneResult res;
    res.steps_per_epoch = steps_per_epoch;

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch == first_stage_epochs) {
            // Second stage: candidates come from the half-way model itself.
            const DenseIndex index = build_dense_index(model, corpus);
            Run dense_run;
            dense_run.tag = "model-negatives";
            for (const TrainPair& p : pairs)
                if (!dense_run.by_query.count(p.query_id))
                    dense_run.by_query[p.query_id] = dense_search(
                        index, model.embed_query(p.query_text), cfg.negative_pool);
            stage_run = std::move(dense_run);
        }
        Rng rng(cfg.seed + epoch);
        std::vector<std::size_t> order(pairs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        const auto negatives =
            mine_hard_negatives(stage_run, qrels, corpus_ids, cfg.negative_pool, rng);

        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            Tape tape;
            std::vector<Var> query_rows, pos_rows, neg_rows;
            for (std::size_t k = 0; k < cfg.batch_size; ++k) {
                const TrainPair& p = pairs[order[s * cfg.batch_size + k]];
                query_rows.push_back(model.encode_query(tape, p.query_text));
                pos_rows.push_back(model.encode_document(
                    tape, *by_id.at(p.positive_doc_id), EncodeMode::Train));
                neg_rows.push_back(model.encode_document(
                    tape, *by_id.at(negatives.at(p.query_id)), EncodeMode::Train));
            }
            std::vector<Var> cand_rows = pos_rows;
            cand_rows.insert(cand_rows.end(), neg_rows.begin(), neg_rows.end());
            Var loss = retrieval_loss(tape, tape.vstack(query_rows),
                                      tape.vstack(cand_rows));
            tape.backward(loss);
            tape.export_grads(model.params());
            const double lr = learning_rate(step, total_steps, cfg.base_lr,
                                            cfg.warmup_rate, cfg.schedule);
            adam_step(model.params(), adam, lr, adam_cfg);

            const double loss_value = tape.scalar(loss);
            res.losses.push_back(loss_value);
            res.lrs.push_back(lr);
            if (loss_log) {
                char line[96];
                std::snprintf(line, sizeof line, "%llu\t%.10g\t%.10g\n",
                              static_cast<unsigned long long>(step), lr, loss_value);
                *loss_log << line;
            }
            ++step;
        }
    }
    return res;
}

} // namespace graphdoc
