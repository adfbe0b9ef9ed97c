#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "graphdoc/document.hpp"
#include "graphdoc/model.hpp"
#include "graphdoc/optim.hpp"
#include "graphdoc/rng.hpp"
#include "graphdoc/tape.hpp"
#include "graphdoc/trec.hpp"

namespace graphdoc {

/// A training instance: a query paired with one relevant document.
struct TrainPair {
    std::string query_id;
    std::string query_text;
    std::string positive_doc_id;
};

/// One negative per run query: uniform over the top pool_size candidates
/// whose relevance grade is 0 or absent. If every candidate is relevant
/// (or the query is missing from the run) the draw falls back to a uniform
/// non-relevant document from corpus_ids.
std::map<std::string, std::string> mine_hard_negatives(
    const Run& run, const Qrels& qrels, const std::vector<std::string>& corpus_ids,
    std::size_t pool_size, Rng& rng);

/// Mean over queries of -log softmax(q_i . d_i+) where each query row is
/// scored against every candidate row (N positives followed by the
/// negatives).
Var retrieval_loss(Tape& tape, Var queries, Var candidates);

struct RetrievalFinetuneConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 10;
    double base_lr = 5e-5;
    double warmup_rate = 0.1;
    double weight_decay = 0.0;
    LrSchedule schedule = LrSchedule::LinearDecay;
    std::size_t negative_pool = 100; // run depth for negative mining
    std::uint64_t seed = 0;
};

struct FinetuneResult {
    std::vector<double> losses;
    std::vector<double> lrs;
    std::size_t steps_per_epoch = 0;
};

/// Staged-negative retrieval finetuning. Negatives are redrawn from the
/// stage's run each epoch: the BM25 run for the first half of the epochs,
/// then a dense run built with the half-way model for the second half.
/// Per step the loss covers batch positives plus one mined negative per
/// query, with an Adam update on the warmup/decay schedule.
FinetuneResult finetune_retrieval(GraphDocModel& model, const Corpus& corpus,
                                  const std::vector<TrainPair>& pairs,
                                  const Qrels& qrels,
                                  const RetrievalFinetuneConfig& cfg,
                                  std::ostream* loss_log = nullptr);

} // namespace graphdoc
