#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "graphdoc/param_store.hpp"
#include "graphdoc/tensor.hpp"

namespace graphdoc {

/// Handle to a node on a Tape.
struct Var {
    std::size_t id = 0;
};

enum class OpKind {
    Leaf,            // input or parameter
    Affine,          // (x[mxk], W[nxk], b[n]) -> [mxn]: x W^T + b
    Matmul,          // (A[mxk], B[kxn]) -> [mxn]
    MatmulNT,        // (A[mxk], B[nxk]) -> [mxn]: A B^T
    Tanh,            // elementwise
    Elu,             // elementwise, alpha = 1
    LeakyRelu,       // elementwise, slope in aux_scalar
    MaskedSoftmax,   // row-wise over mask (aux_mask), masked entries exactly 0
    GatherMean,      // (table[Vxd]; ids in aux_idx) -> [d]; empty ids -> zeros
    Vstack,          // variadic row stack; inputs are [d] vectors or [rxd] matrices
    MeanRows,        // [mxd] -> [1xd]
    OuterSum,        // (u[m], w[n]) -> [mxn]: u_i + w_j
    ConcatCols,      // (A[mxa], B[mxb]) -> [mx(a+b)]
    Add,             // same-shape elementwise sum
    Scale,           // aux_scalar * x
    Transpose,       // [mxn] -> [nxm]
    SoftmaxXentRows, // (S[mxn]; targets in aux_idx) -> [m] row losses, stabilized LSE
    SumAll,          // -> [1]
    MeanAll,         // -> [1]
    Dot,             // (u[n], v[n]) -> [1]
    Row,             // (X[mxd]; aux_idx[0]) -> [d]
    Matvec,          // (A[mxk], x[k]) -> [m]
    VecSlice,        // (x[n]; aux start,len) -> [len]
    NormalizeRows,   // [mxd] -> [mxd], rows scaled to unit L2 (floor 1e-12)
};

/// Tape of primitive applications: the reverse-mode trace. Recording an op
/// runs it forward immediately; backward() accumulates adjoints in reverse
/// node order, so a given trace always produces identical gradients.
/// replay_check() re-executes every non-leaf node and compares the outputs
/// bit for bit.
class Tape {
public:
    struct Node {
        OpKind op = OpKind::Leaf;
        std::vector<std::size_t> inputs;
        Tensor value;
        Tensor grad; // allocated by backward()
        std::vector<std::uint64_t> aux_idx;
        std::vector<std::uint8_t> aux_mask;
        double aux_scalar = 0.0;
        std::string param_path; // non-empty for parameter leaves
    };

    Var leaf(Tensor value);

    /// Parameter leaf, memoized by path: encoding several documents on one
    /// tape shares a single node per parameter (weight sharing).
    Var param(const ParamStore& store, const std::string& path);

    Var affine(Var x, Var w, Var b);
    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);
    Var tanh(Var x);
    Var elu(Var x);
    Var leaky_relu(Var x, double slope);
    Var masked_softmax(Var scores, const std::vector<std::uint8_t>& mask);
    Var gather_mean(Var table, const std::vector<std::uint64_t>& ids);
    Var vstack(std::span<const Var> rows);
    Var mean_rows(Var x);
    Var outer_sum(Var u, Var w);
    Var concat_cols(Var a, Var b);
    Var add(Var a, Var b);
    Var scale(Var x, double c);
    Var transpose(Var x);
    Var softmax_xent_rows(Var scores, const std::vector<std::uint64_t>& targets);
    Var sum_all(Var x);
    Var mean_all(Var x);
    Var dot(Var u, Var v);
    Var row(Var x, std::size_t i);
    Var matvec(Var a, Var x);
    Var vec_slice(Var x, std::size_t start, std::size_t len);
    Var normalize_rows(Var x);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    const Tensor& grad(Var v) const;
    double scalar(Var v) const;

    /// Reverse accumulation from a scalar loss. Gradients for every node at
    /// or below the loss are (re)computed; calling it again restarts from
    /// zero adjoints.
    void backward(Var loss);

    /// Writes gradients into store.grads for every parameter in the store;
    /// parameters absent from this tape get explicit zero gradients.
    void export_grads(ParamStore& store) const;

    /// Re-runs every recorded op from its recorded inputs and compares with
    /// the recorded output, bitwise.
    bool replay_check() const;

    std::size_t size() const { return nodes_.size(); }
    const Node& node(std::size_t id) const { return nodes_.at(id); }

private:
    Var push(Node n);
    static Tensor eval(const Node& n, const std::vector<const Tensor*>& in);
    void backprop_node(std::size_t id);

    std::vector<Node> nodes_;
    std::map<std::string, std::size_t> param_nodes_;
    bool grads_valid_ = false;
};

} // namespace graphdoc
