#include "graphdoc/model.hpp"

#include <array>

#include "graphdoc/rng.hpp"
#include "graphdoc/text.hpp"

namespace graphdoc {

void ModelConfig::validate() const {
    if (d_model == 0 || heads == 0 || layers == 0 || d_tok == 0)
        throw usage_error("ModelConfig: zero dimension");
    if (d_model % heads != 0)
        throw usage_error("ModelConfig: heads must divide d_model");
    if ((vocab_buckets & (vocab_buckets - 1)) != 0 || vocab_buckets == 0)
        throw usage_error("ModelConfig: vocab_buckets must be a power of two");
    if (max_passages_train == 0 || max_passages_infer == 0)
        throw usage_error("ModelConfig: max_passages must be positive");
}

std::string GraphDocModel::head_w_path(std::size_t layer, std::size_t head) {
    return "gat." + std::to_string(layer) + ".h" + std::to_string(head) + ".W";
}

std::string GraphDocModel::head_a_path(std::size_t layer, std::size_t head) {
    return "gat." + std::to_string(layer) + ".h" + std::to_string(head) + ".a";
}

GraphDocModel::GraphDocModel(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(derive_seed(seed, "init"));
    params_.add_uniform("encoder.token_table", {cfg_.vocab_buckets, cfg_.d_tok},
                        cfg_.d_tok, rng);
    params_.add_uniform("encoder.proj_w", {cfg_.d_model, cfg_.d_tok}, cfg_.d_tok, rng);
    params_.add_zeros("encoder.proj_b", {cfg_.d_model});
    for (std::size_t t = 0; t < cfg_.layers; ++t) {
        for (std::size_t h = 0; h < cfg_.heads; ++h) {
            params_.add_uniform(head_w_path(t, h), {cfg_.d_head(), cfg_.d_model},
                                cfg_.d_model, rng);
            params_.add_uniform(head_a_path(t, h), {2 * cfg_.d_head()},
                                2 * cfg_.d_head(), rng);
        }
    }
}

std::vector<std::uint64_t> GraphDocModel::tokenize_text(const std::string& text) const {
    return tokenize(text, cfg_.vocab_buckets, cfg_.max_tokens);
}

Var GraphDocModel::encode_passage(Tape& tape,
                                  const std::vector<std::uint64_t>& tokens) const {
    Var table = tape.param(params_, "encoder.token_table");
    Var pooled = tape.gather_mean(table, tokens); // [d_tok], zeros when empty
    Var w = tape.param(params_, "encoder.proj_w");
    Var b = tape.param(params_, "encoder.proj_b");
    return tape.tanh(tape.affine(pooled, w, b)); // [1 x d_model]
}

Var gat_layer(Tape& tape, const ParamStore& params, std::size_t layer,
              std::size_t heads, const DocumentGraph& graph, Var states,
              std::vector<Var>* head_attn) {
    Var merged{};
    for (std::size_t h = 0; h < heads; ++h) {
        Var w = tape.param(params, GraphDocModel::head_w_path(layer, h));
        Var a = tape.param(params, GraphDocModel::head_a_path(layer, h));
        const std::size_t d_head = tape.value(w).rows();
        Var proj = tape.matmul_nt(states, w); // [(n+1) x d_head]
        // e_ij = leaky_relu(a . [proj_i || proj_j]) decomposes into the two
        // halves of a applied to source and target rows.
        Var u = tape.matvec(proj, tape.vec_slice(a, 0, d_head));
        Var v = tape.matvec(proj, tape.vec_slice(a, d_head, d_head));
        Var logits = tape.leaky_relu(tape.outer_sum(u, v), GraphDocModel::kAttnSlope);
        Var attn = tape.masked_softmax(logits, graph.mask());
        if (head_attn) head_attn->push_back(attn);
        Var out = tape.matmul(attn, proj); // [(n+1) x d_head]
        merged = h == 0 ? out : tape.concat_cols(merged, out);
    }
    return tape.add(tape.elu(merged), states);
}

Var GraphDocModel::gat_states(Tape& tape, const Document& doc,
                              const DocumentGraph& graph,
                              AttentionCapture* capture) const {
    const std::size_t n = doc.passage_count();
    std::vector<Var> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        rows.push_back(encode_passage(tape, tokenize_text(doc.passage(i))));
    Var passage_mat = tape.vstack(rows); // [n x d_model]
    Var doc_init = tape.mean_rows(passage_mat);
    std::array<Var, 2> stacked = {doc_init, passage_mat};
    Var states = tape.vstack(stacked); // [(n+1) x d_model]
    for (std::size_t t = 0; t < cfg_.layers; ++t) {
        std::vector<Var>* sink = nullptr;
        if (capture) {
            capture->layer_heads.emplace_back();
            sink = &capture->layer_heads.back();
        }
        states = gat_layer(tape, params_, t, cfg_.heads, graph, states, sink);
    }
    return states;
}

Var GraphDocModel::encode_document(Tape& tape, const Document& doc, EncodeMode mode,
                                   AttentionCapture* capture) const {
    const std::size_t limit =
        mode == EncodeMode::Train ? cfg_.max_passages_train : cfg_.max_passages_infer;
    const Document kept = doc.truncated(limit);
    if (kept.passage_count() == 0)
        throw data_error("encode_document: document " + doc.id + " is empty");
    const DocumentGraph graph = build_graph(kept, cfg_.topology, cfg_.section_clique);
    Var states = gat_states(tape, kept, graph, capture);
    return tape.row(states, 0);
}

Var GraphDocModel::encode_query(Tape& tape, const std::string& text) const {
    Var v = encode_passage(tape, tokenize_text(text));
    return tape.row(v, 0); // [d_model]
}

Tensor GraphDocModel::embed_document(const Document& doc, EncodeMode mode) const {
    Tape tape;
    return tape.value(encode_document(tape, doc, mode));
}

Tensor GraphDocModel::embed_query(const std::string& text) const {
    Tape tape;
    return tape.value(encode_query(tape, text));
}

Tensor GraphDocModel::export_attention(const Document& doc) const {
    Tape tape;
    AttentionCapture capture;
    encode_document(tape, doc, EncodeMode::Infer, &capture);
    const std::vector<Var>& last = capture.layer_heads.back();
    Tensor mean = Tensor::zeros(tape.value(last[0]).shape);
    for (Var v : last)
        for (std::size_t i = 0; i < mean.size(); ++i)
            mean.data[i] += tape.value(v).data[i];
    const double inv = 1.0 / static_cast<double>(last.size());
    for (double& x : mean.data) x *= inv;
    return mean;
}

} // namespace graphdoc
