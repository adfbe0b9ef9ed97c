#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "graphdoc/document.hpp"
#include "graphdoc/model.hpp"
#include "graphdoc/optim.hpp"
#include "graphdoc/tensor.hpp"

namespace graphdoc {

/// Affine softmax head over the document embedding.
struct ClassifierHead {
    std::vector<std::string> labels; // sorted, stable
    Tensor w;                        // [C x d_model]
    Tensor b;                        // [C]

    /// Sorted, deduplicated labels with zero-initialized weights.
    static ClassifierHead init(std::vector<std::string> labels, std::size_t d_model);
    std::size_t label_index(const std::string& label) const; // unknown -> error
    std::size_t num_classes() const { return labels.size(); }
};

/// Argmax label for one document (forward only).
std::string classify_doc(const GraphDocModel& model, const ClassifierHead& head,
                         const Document& doc);

/// JSON persistence; doubles round-trip exactly.
void save_classifier_head(const ClassifierHead& head, const std::string& path);
ClassifierHead load_classifier_head(const std::string& path);

/// Fraction of matching entries; lengths must agree.
double accuracy(const std::vector<std::string>& predictions,
                const std::vector<std::string>& labels);

struct ClassificationConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 20;
    double base_lr = 1e-4;
    double warmup_rate = 0.1;
    double weight_decay = 0.01;
    LrSchedule schedule = LrSchedule::LinearDecay;
    double val_fraction = 0.1;
    bool freeze_encoder = false; // train the head only
    std::uint64_t seed = 0;
};

struct ClassificationResult {
    std::vector<double> losses;
    std::vector<double> lrs;
    std::vector<double> val_accuracy; // one entry per epoch when a split exists
    std::size_t steps_per_epoch = 0;
};

/// Cross-entropy finetuning of encoder plus head (or head only). A
/// val_fraction slice is held out for the per-epoch accuracy log; writes
/// `step<TAB>lr<TAB>loss` lines to loss_log if given.
ClassificationResult finetune_classification(GraphDocModel& model,
                                             ClassifierHead& head,
                                             const Corpus& corpus,
                                             const ClassificationConfig& cfg,
                                             std::ostream* loss_log = nullptr);

} // namespace graphdoc
