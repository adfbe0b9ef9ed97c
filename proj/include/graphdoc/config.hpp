#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "graphdoc/bm25.hpp"
#include "graphdoc/classify.hpp"
#include "graphdoc/cluster.hpp"
#include "graphdoc/contrastive.hpp"
#include "graphdoc/metrics.hpp"
#include "graphdoc/model.hpp"
#include "graphdoc/retrieval_train.hpp"

namespace graphdoc {

/// Sectioned key=value run configuration. The key set is fixed; files and
/// flag overrides may only touch known keys. `resolved()` emits a file
/// that parses back to the identical configuration.
class Config {
public:
    /// All keys present with their default values.
    static Config defaults();

    /// Defaults overlaid with the given file.
    static Config load(const std::string& path);

    void apply_file(const std::string& path);
    void set(const std::string& section, const std::string& key,
             const std::string& value);
    /// "section.key" form used by the flag overrides.
    void set_dotted(const std::string& dotted, const std::string& value);
    /// Writes the same seed into every section.
    void set_all_seeds(std::uint64_t seed);

    const std::string& get(const std::string& section, const std::string& key) const;
    std::size_t get_size(const std::string& section, const std::string& key) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key) const;
    bool get_bool(const std::string& section, const std::string& key) const;

    std::string resolved() const;

    ModelConfig model() const;
    std::uint64_t model_seed() const { return get_u64("model", "seed"); }
    PretrainConfig pretrain() const;
    SplitMode pretrain_mode() const;
    ClassificationConfig finetune() const;
    RetrievalFinetuneConfig retrieval() const;
    Bm25Params bm25() const;
    NdcgGain eval_gain() const;
    NmiNorm eval_nmi_norm() const;

    static const std::vector<std::string>& section_order();
    std::vector<std::string> keys(const std::string& section) const;

private:
    std::map<std::string, std::map<std::string, std::string>> values_;
};

} // namespace graphdoc
