#include "graphdoc/classify.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "graphdoc/error.hpp"
#include "graphdoc/rng.hpp"
#include "graphdoc/tape.hpp"

namespace graphdoc {

ClassifierHead ClassifierHead::init(std::vector<std::string> labels,
                                    std::size_t d_model) {
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    if (labels.size() < 2)
        throw data_error("classifier: need at least 2 distinct labels, got " +
                         std::to_string(labels.size()));
    ClassifierHead head;
    head.labels = std::move(labels);
    // Zero weights: softmax regression is convex, the zero point is its
    // canonical start, and the initial logits are scale-free in the
    // embedding magnitude (a random head starts confidently wrong on
    // large-norm embeddings and has to unwind first).
    head.w = Tensor::zeros({head.labels.size(), d_model});
    head.b = Tensor::zeros({head.labels.size()});
    return head;
}

std::size_t ClassifierHead::label_index(const std::string& label) const {
    auto it = std::lower_bound(labels.begin(), labels.end(), label);
    if (it == labels.end() || *it != label)
        throw data_error("classifier: unknown label `" + label + "`");
    return static_cast<std::size_t>(it - labels.begin());
}

namespace {

std::string argmax_label(const ClassifierHead& head, const Tensor& emb) {
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t c = 0; c < head.num_classes(); ++c) {
        double s = head.b.at(c);
        for (std::size_t j = 0; j < emb.size(); ++j) s += head.w.at(c, j) * emb.at(j);
        if (c == 0 || s > best_score) {
            best_score = s;
            best = c;
        }
    }
    return head.labels[best];
}

} // namespace

std::string classify_doc(const GraphDocModel& model, const ClassifierHead& head,
                         const Document& doc) {
    return argmax_label(head, model.embed_document(doc, EncodeMode::Infer));
}

void save_classifier_head(const ClassifierHead& head, const std::string& path) {
    nlohmann::ordered_json j;
    j["labels"] = head.labels;
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < head.w.rows(); ++c) {
        std::vector<double> row(head.w.data.begin() + c * head.w.cols(),
                                head.w.data.begin() + (c + 1) * head.w.cols());
        rows.push_back(row);
    }
    j["w"] = std::move(rows);
    j["b"] = head.b.data;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    out << j.dump() << '\n';
}

ClassifierHead load_classifier_head(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
        ClassifierHead head;
        head.labels = j.at("labels").get<std::vector<std::string>>();
        const auto rows = j.at("w").get<std::vector<std::vector<double>>>();
        if (head.labels.size() < 2 || rows.size() != head.labels.size())
            throw data_error("classifier head " + path + ": label/weight mismatch");
        head.w = Tensor::zeros({rows.size(), rows[0].size()});
        for (std::size_t c = 0; c < rows.size(); ++c) {
            if (rows[c].size() != rows[0].size())
                throw data_error("classifier head " + path + ": ragged weights");
            for (std::size_t d = 0; d < rows[c].size(); ++d)
                head.w.at(c, d) = rows[c][d];
        }
        head.b = Tensor::zeros({head.labels.size()});
        const auto bias = j.at("b").get<std::vector<double>>();
        if (bias.size() != head.labels.size())
            throw data_error("classifier head " + path + ": bias size mismatch");
        for (std::size_t c = 0; c < bias.size(); ++c) head.b.at(c) = bias[c];
        if (!std::is_sorted(head.labels.begin(), head.labels.end()))
            throw data_error("classifier head " + path + ": labels not sorted");
        return head;
    } catch (const nlohmann::json::exception& e) {
        throw data_error("classifier head " + path + ": " + e.what());
    }
}

double accuracy(const std::vector<std::string>& predictions,
                const std::vector<std::string>& labels) {
    if (predictions.size() != labels.size())
        throw dim_error("accuracy: " + std::to_string(predictions.size()) +
                        " predictions vs " + std::to_string(labels.size()) + " labels");
    if (predictions.empty()) throw data_error("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

ClassificationResult finetune_classification(GraphDocModel& model,
                                             ClassifierHead& head,
                                             const Corpus& corpus,
                                             const ClassificationConfig& cfg,
                                             std::ostream* loss_log) {
    if (cfg.batch_size < 1) throw usage_error("finetune: batch size must be positive");
    if (cfg.epochs == 0) throw usage_error("finetune: epochs must be positive");
    if (cfg.val_fraction < 0.0 || cfg.val_fraction >= 1.0)
        throw usage_error("finetune: val fraction must lie in [0, 1)");
    std::vector<std::uint64_t> label_ids;
    label_ids.reserve(corpus.size());
    for (const Document& doc : corpus)
        label_ids.push_back(head.label_index(doc.label)); // throws on unknown

    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split_rng(derive_seed(cfg.seed, "val-split"));
    split_rng.shuffle(order);
    const std::size_t n_val =
        static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(corpus.size()));
    std::vector<std::size_t> val(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train(order.begin() + n_val, order.end());
    if (train.size() < cfg.batch_size)
        throw data_error("finetune: " + std::to_string(train.size()) +
                         " training documents for batch size " +
                         std::to_string(cfg.batch_size));

    ParamStore& ps = model.params();
    ps.add("classifier.w", head.w);
    ps.add("classifier.b", head.b);

    // In frozen mode only the head parameters see the optimizer (weight
    // decay must not touch the encoder either).
    ParamStore head_store;
    AdamState adam, head_adam;
    AdamConfig adam_cfg;
    adam_cfg.weight_decay = cfg.weight_decay;

    const std::size_t steps_per_epoch = train.size() / cfg.batch_size;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;
    ClassificationResult res;
    res.steps_per_epoch = steps_per_epoch;

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(cfg.seed + epoch);
        std::vector<std::size_t> epoch_order = train;
        rng.shuffle(epoch_order);
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            Tape tape;
            std::vector<Var> rows;
            std::vector<std::uint64_t> targets;
            for (std::size_t k = 0; k < cfg.batch_size; ++k) {
                const std::size_t idx = epoch_order[s * cfg.batch_size + k];
                rows.push_back(
                    model.encode_document(tape, corpus[idx], EncodeMode::Train));
                targets.push_back(label_ids[idx]);
            }
            Var logits = tape.affine(tape.vstack(rows), tape.param(ps, "classifier.w"),
                                     tape.param(ps, "classifier.b"));
            Var loss = tape.mean_all(tape.softmax_xent_rows(logits, targets));
            tape.backward(loss);
            tape.export_grads(ps);
            const double lr = learning_rate(step, total_steps, cfg.base_lr,
                                            cfg.warmup_rate, cfg.schedule);
            if (cfg.freeze_encoder) {
                for (const char* path : {"classifier.w", "classifier.b"}) {
                    head_store.values[path] = ps.value(path);
                    head_store.grads[path] = ps.grads.at(path);
                }
                adam_step(head_store, head_adam, lr, adam_cfg);
                for (const char* path : {"classifier.w", "classifier.b"})
                    ps.value(path) = head_store.value(path);
            } else {
                adam_step(ps, adam, lr, adam_cfg);
            }

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
        if (!val.empty()) {
            head.w = ps.value("classifier.w");
            head.b = ps.value("classifier.b");
            std::size_t hits = 0;
            for (std::size_t idx : val)
                if (classify_doc(model, head, corpus[idx]) == corpus[idx].label) ++hits;
            res.val_accuracy.push_back(static_cast<double>(hits) /
                                       static_cast<double>(val.size()));
        }
    }
    head.w = ps.value("classifier.w");
    head.b = ps.value("classifier.b");
    ps.values.erase("classifier.w");
    ps.values.erase("classifier.b");
    ps.grads.erase("classifier.w");
    ps.grads.erase("classifier.b");
    return res;
}

} // namespace graphdoc
