#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "graphdoc/document.hpp"
#include "graphdoc/model.hpp"
#include "graphdoc/optim.hpp"
#include "graphdoc/rng.hpp"
#include "graphdoc/tape.hpp"

namespace graphdoc {

/// A document split into two disjoint, non-empty passage-index sets.
struct SubDocumentPair {
    std::string doc_id;
    std::vector<std::size_t> a;
    std::vector<std::size_t> b;
};

enum class SplitMode { Even, Ict };

/// Uniformly random subset of size floor(n/2) as side A, complement as B.
/// Empty when the document has fewer than two passages.
std::optional<SubDocumentPair> split_even(const Document& doc, Rng& rng);

/// Side A is a single passage: index 0 with probability first_passage_prob,
/// otherwise uniform over all passages. B is the rest.
std::optional<SubDocumentPair> split_ict(const Document& doc, Rng& rng,
                                         double first_passage_prob = 0.5);

/// Optional scoring transform for the contrastive losses: raw dot products
/// by default, or cosine similarity divided by temp.
struct ScoreConfig {
    bool cosine = false;
    double temp = 1.0;
};

/// Symmetric in-batch contrastive loss over aligned rows:
/// (1/2N) sum_i [ -log softmax_row_i(A B^T) - log softmax_row_i(B A^T) ].
Var nce_loss(Tape& tape, Var emb_a, Var emb_b, const ScoreConfig& score = {});

/// One direction only: each anchor row scored against all candidate rows.
Var nce_loss_one_sided(Tape& tape, Var anchors, Var candidates,
                       const ScoreConfig& score = {});

struct PretrainConfig {
    SplitMode split = SplitMode::Even;
    bool one_sided = false; // loss over the long sub-documents only
    std::size_t batch_size = 32;
    std::size_t epochs = 10;
    double base_lr = 5e-5;
    double warmup_rate = 0.1;
    double weight_decay = 0.0;
    LrSchedule schedule = LrSchedule::LinearDecay;
    std::size_t max_passages = 50;
    double first_passage_prob = 0.5;
    ScoreConfig score;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 0; // 0 = no periodic checkpoints
};

struct PretrainResult {
    std::vector<double> losses;
    std::vector<double> lrs;
    std::size_t steps_per_epoch = 0;
};

using CheckpointFn = std::function<void(std::size_t step, const GraphDocModel&)>;

/// Contrastive pretraining: per epoch, shuffle the eligible documents with
/// seed base_seed+epoch, form batches of batch_size (partial tail dropped),
/// split each document in two, encode both sides with the shared model and
/// take an Adam step on the batch loss. Writes one `step<TAB>lr<TAB>loss`
/// line per step to loss_log if given.
PretrainResult pretrain(const Corpus& corpus, GraphDocModel& model,
                        const PretrainConfig& cfg, std::ostream* loss_log = nullptr,
                        const CheckpointFn& on_checkpoint = nullptr);

} // namespace graphdoc
