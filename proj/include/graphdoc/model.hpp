#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graphdoc/document.hpp"
#include "graphdoc/graph.hpp"
#include "graphdoc/param_store.hpp"
#include "graphdoc/tape.hpp"

namespace graphdoc {

struct ModelConfig {
    std::size_t d_model = 512;
    std::size_t heads = 2;
    std::size_t layers = 2;
    std::size_t d_tok = 64;
    std::size_t vocab_buckets = 32768; // power of two
    std::size_t max_tokens = 128;
    std::size_t passage_target_words = 100;
    std::size_t max_passages_train = 50;
    std::size_t max_passages_infer = 100;
    GraphTopology topology = GraphTopology::FullyConnected;
    bool section_clique = true;

    std::size_t d_head() const { return d_model / heads; }
    void validate() const;
};

enum class EncodeMode { Train, Infer };

/// Per-head attention matrices recorded during a forward pass, one entry
/// per layer. Each Var holds an (n+1)x(n+1) row-stochastic matrix.
struct AttentionCapture {
    std::vector<std::vector<Var>> layer_heads;
};

/// The trainable document encoder: hashed-token passage encoder with
/// projection, mean-initialized document node, and a stack of graph
/// attention layers with head concatenation, ELU and skip connections.
class GraphDocModel {
public:
    GraphDocModel() = default;
    GraphDocModel(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    std::vector<std::uint64_t> tokenize_text(const std::string& text) const;

    /// tanh(W meanpool(token embeddings) + b) as a [1 x d_model] row.
    Var encode_passage(Tape& tape, const std::vector<std::uint64_t>& tokens) const;

    /// Full graph forward; returns the document-node embedding [d_model].
    Var encode_document(Tape& tape, const Document& doc, EncodeMode mode,
                        AttentionCapture* capture = nullptr) const;

    /// Single-node query: initial passage representation, no graph layers.
    Var encode_query(Tape& tape, const std::string& text) const;

    // Forward-only conveniences.
    Tensor embed_document(const Document& doc, EncodeMode mode) const;
    Tensor embed_query(const std::string& text) const;

    /// Mean over heads of the last layer's attention, (n+1)x(n+1).
    Tensor export_attention(const Document& doc) const;

    static std::string head_w_path(std::size_t layer, std::size_t head);
    static std::string head_a_path(std::size_t layer, std::size_t head);

    /// Attention nonlinearity slope (fixed).
    static constexpr double kAttnSlope = 0.2;

private:
    Var gat_states(Tape& tape, const Document& doc, const DocumentGraph& graph,
                   AttentionCapture* capture) const;

    ModelConfig cfg_;
    ParamStore params_;
};

/// One graph attention layer over explicit states; exposed for direct
/// testing against hand-computed values.
Var gat_layer(Tape& tape, const ParamStore& params, std::size_t layer,
              std::size_t heads, const DocumentGraph& graph, Var states,
              std::vector<Var>* head_attn = nullptr);

} // namespace graphdoc
