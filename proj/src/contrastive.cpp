#include "graphdoc/contrastive.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "graphdoc/error.hpp"

namespace graphdoc {

std::optional<SubDocumentPair> split_even(const Document& doc, Rng& rng) {
    const std::size_t n = doc.passage_count();
    if (n < 2) return std::nullopt;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    SubDocumentPair pair;
    pair.doc_id = doc.id;
    pair.a.assign(order.begin(), order.begin() + n / 2);
    pair.b.assign(order.begin() + n / 2, order.end());
    std::sort(pair.a.begin(), pair.a.end());
    std::sort(pair.b.begin(), pair.b.end());
    return pair;
}

std::optional<SubDocumentPair> split_ict(const Document& doc, Rng& rng,
                                         double first_passage_prob) {
    const std::size_t n = doc.passage_count();
    if (n < 2) return std::nullopt;
    const std::size_t pick =
        rng.bernoulli(first_passage_prob) ? 0 : static_cast<std::size_t>(rng.uniform_int(n));
    SubDocumentPair pair;
    pair.doc_id = doc.id;
    pair.a = {pick};
    for (std::size_t i = 0; i < n; ++i)
        if (i != pick) pair.b.push_back(i);
    return pair;
}

namespace {

Var pair_scores(Tape& tape, Var a, Var b, const ScoreConfig& sc) {
    if (sc.temp <= 0.0) throw usage_error("contrastive: temperature must be positive");
    if (sc.cosine) {
        a = tape.normalize_rows(a);
        b = tape.normalize_rows(b);
    }
    Var s = tape.matmul_nt(a, b);
    if (sc.cosine && sc.temp != 1.0) s = tape.scale(s, 1.0 / sc.temp);
    return s;
}

std::vector<std::uint64_t> diag_targets(std::size_t n) {
    std::vector<std::uint64_t> t(n);
    std::iota(t.begin(), t.end(), 0);
    return t;
}

} // namespace

Var nce_loss(Tape& tape, Var emb_a, Var emb_b, const ScoreConfig& score) {
    const std::size_t n = tape.value(emb_a).rows();
    if (n != tape.value(emb_b).rows())
        throw dim_error("nce_loss: row counts differ");
    Var s = pair_scores(tape, emb_a, emb_b, score);
    const auto targets = diag_targets(n);
    Var fwd = tape.mean_all(tape.softmax_xent_rows(s, targets));
    Var bwd = tape.mean_all(tape.softmax_xent_rows(tape.transpose(s), targets));
    return tape.scale(tape.add(fwd, bwd), 0.5);
}

Var nce_loss_one_sided(Tape& tape, Var anchors, Var candidates,
                       const ScoreConfig& score) {
    const std::size_t n = tape.value(anchors).rows();
    if (n != tape.value(candidates).rows())
        throw dim_error("nce_loss_one_sided: row counts differ");
    Var s = pair_scores(tape, anchors, candidates, score);
    return tape.mean_all(tape.softmax_xent_rows(s, diag_targets(n)));
}

PretrainResult pretrain(const Corpus& corpus, GraphDocModel& model,
                        const PretrainConfig& cfg, std::ostream* loss_log,
                        const CheckpointFn& on_checkpoint) {
    if (cfg.batch_size < 2)
        throw usage_error("pretrain: batch size must be at least 2");
    if (cfg.epochs == 0) throw usage_error("pretrain: epochs must be positive");

    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (corpus[i].truncated(cfg.max_passages).passage_count() >= 2)
            eligible.push_back(i);
    if (eligible.size() < cfg.batch_size)
        throw data_error("pretrain: only " + std::to_string(eligible.size()) +
                         " splittable documents for batch size " +
                         std::to_string(cfg.batch_size));

    const std::size_t steps_per_epoch = eligible.size() / cfg.batch_size;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;
    AdamState adam;
    AdamConfig adam_cfg;
    adam_cfg.weight_decay = cfg.weight_decay;

    PretrainResult res;
    res.steps_per_epoch = steps_per_epoch;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(cfg.seed + epoch);
        std::vector<std::size_t> order = eligible;
        rng.shuffle(order);
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            Tape tape;
            std::vector<Var> rows_a, rows_b;
            rows_a.reserve(cfg.batch_size);
            rows_b.reserve(cfg.batch_size);
            for (std::size_t k = 0; k < cfg.batch_size; ++k) {
                const Document kept =
                    corpus[order[s * cfg.batch_size + k]].truncated(cfg.max_passages);
                const auto pair = cfg.split == SplitMode::Even
                                      ? split_even(kept, rng)
                                      : split_ict(kept, rng, cfg.first_passage_prob);
                rows_a.push_back(
                    model.encode_document(tape, kept.subset(pair->a), EncodeMode::Train));
                rows_b.push_back(
                    model.encode_document(tape, kept.subset(pair->b), EncodeMode::Train));
            }
            Var emb_a = tape.vstack(rows_a);
            Var emb_b = tape.vstack(rows_b);
            Var loss = cfg.one_sided
                           ? nce_loss_one_sided(tape, emb_a, emb_b, cfg.score)
                           : nce_loss(tape, emb_a, emb_b, cfg.score);
            tape.backward(loss);
            tape.export_grads(model.params());
            const double lr =
                learning_rate(step, total_steps, cfg.base_lr, cfg.warmup_rate, cfg.schedule);
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
            if (on_checkpoint && cfg.checkpoint_every != 0 &&
                step % cfg.checkpoint_every == 0)
                on_checkpoint(step, model);
        }
    }
    return res;
}

} // namespace graphdoc
