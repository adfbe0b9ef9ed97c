#include "graphdoc/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace graphdoc {

namespace {

const char* op_name(OpKind op) {
    switch (op) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Affine: return "affine";
    case OpKind::Matmul: return "matmul";
    case OpKind::MatmulNT: return "matmul_nt";
    case OpKind::Tanh: return "tanh";
    case OpKind::Elu: return "elu";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::MaskedSoftmax: return "masked_softmax";
    case OpKind::GatherMean: return "gather_mean";
    case OpKind::Vstack: return "vstack";
    case OpKind::MeanRows: return "mean_rows";
    case OpKind::OuterSum: return "outer_sum";
    case OpKind::ConcatCols: return "concat_cols";
    case OpKind::Add: return "add";
    case OpKind::Scale: return "scale";
    case OpKind::Transpose: return "transpose";
    case OpKind::SoftmaxXentRows: return "softmax_xent_rows";
    case OpKind::SumAll: return "sum_all";
    case OpKind::MeanAll: return "mean_all";
    case OpKind::Dot: return "dot";
    case OpKind::Row: return "row";
    case OpKind::Matvec: return "matvec";
    case OpKind::VecSlice: return "vec_slice";
    case OpKind::NormalizeRows: return "normalize_rows";
    }
    return "?";
}

void require(bool cond, OpKind op, const char* what) {
    if (!cond) throw dim_error(std::string(op_name(op)) + ": " + what);
}

} // namespace

Var Tape::push(Node n) {
    std::vector<const Tensor*> in;
    in.reserve(n.inputs.size());
    for (std::size_t id : n.inputs) in.push_back(&nodes_.at(id).value);
    if (n.op != OpKind::Leaf) n.value = eval(n, in);
    if (!n.value.finite())
        throw data_error(std::string(op_name(n.op)) + ": non-finite values in output");
    grads_valid_ = false;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
    Node n;
    n.op = OpKind::Leaf;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::param(const ParamStore& store, const std::string& path) {
    auto it = param_nodes_.find(path);
    if (it != param_nodes_.end()) return Var{it->second};
    Node n;
    n.op = OpKind::Leaf;
    n.value = store.value(path);
    n.param_path = path;
    Var v = push(std::move(n));
    param_nodes_.emplace(path, v.id);
    return v;
}

Var Tape::affine(Var x, Var w, Var b) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    require(wv.rank() == 2, OpKind::Affine, "weight must be rank 2");
    require(xv.cols() == wv.cols(), OpKind::Affine, "inner dimensions differ");
    require(bv.size() == wv.rows(), OpKind::Affine, "bias length != output width");
    Node n;
    n.op = OpKind::Affine;
    n.inputs = {x.id, w.id, b.id};
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
    require(value(a).cols() == value(b).rows(), OpKind::Matmul, "inner dimensions differ");
    Node n;
    n.op = OpKind::Matmul;
    n.inputs = {a.id, b.id};
    return push(std::move(n));
}

Var Tape::matmul_nt(Var a, Var b) {
    require(value(a).cols() == value(b).cols(), OpKind::MatmulNT, "inner dimensions differ");
    Node n;
    n.op = OpKind::MatmulNT;
    n.inputs = {a.id, b.id};
    return push(std::move(n));
}

Var Tape::tanh(Var x) {
    Node n;
    n.op = OpKind::Tanh;
    n.inputs = {x.id};
    return push(std::move(n));
}

Var Tape::elu(Var x) {
    Node n;
    n.op = OpKind::Elu;
    n.inputs = {x.id};
    return push(std::move(n));
}

Var Tape::leaky_relu(Var x, double slope) {
    Node n;
    n.op = OpKind::LeakyRelu;
    n.inputs = {x.id};
    n.aux_scalar = slope;
    return push(std::move(n));
}

Var Tape::masked_softmax(Var scores, const std::vector<std::uint8_t>& mask) {
    require(value(scores).size() == mask.size(), OpKind::MaskedSoftmax,
            "mask size != score size");
    Node n;
    n.op = OpKind::MaskedSoftmax;
    n.inputs = {scores.id};
    n.aux_mask = mask;
    return push(std::move(n));
}

Var Tape::gather_mean(Var table, const std::vector<std::uint64_t>& ids) {
    const Tensor& tv = value(table);
    require(tv.rank() == 2, OpKind::GatherMean, "table must be rank 2");
    for (std::uint64_t id : ids)
        require(id < tv.rows(), OpKind::GatherMean, "id out of range");
    Node n;
    n.op = OpKind::GatherMean;
    n.inputs = {table.id};
    n.aux_idx = ids;
    return push(std::move(n));
}

Var Tape::vstack(std::span<const Var> rows) {
    require(!rows.empty(), OpKind::Vstack, "no inputs");
    Node n;
    n.op = OpKind::Vstack;
    const std::size_t c = value(rows[0]).cols();
    for (Var v : rows) {
        require(value(v).cols() == c, OpKind::Vstack, "column counts differ");
        n.inputs.push_back(v.id);
    }
    return push(std::move(n));
}

Var Tape::mean_rows(Var x) {
    require(value(x).rank() == 2 && value(x).rows() >= 1, OpKind::MeanRows,
            "need a non-empty rank-2 input");
    Node n;
    n.op = OpKind::MeanRows;
    n.inputs = {x.id};
    return push(std::move(n));
}

Var Tape::outer_sum(Var u, Var w) {
    require(value(u).rank() == 1 && value(w).rank() == 1, OpKind::OuterSum,
            "inputs must be vectors");
    Node n;
    n.op = OpKind::OuterSum;
    n.inputs = {u.id, w.id};
    return push(std::move(n));
}

Var Tape::concat_cols(Var a, Var b) {
    require(value(a).rank() == 2 && value(b).rank() == 2, OpKind::ConcatCols,
            "inputs must be rank 2");
    require(value(a).rows() == value(b).rows(), OpKind::ConcatCols, "row counts differ");
    Node n;
    n.op = OpKind::ConcatCols;
    n.inputs = {a.id, b.id};
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    require_same_shape(value(a), value(b), "add");
    Node n;
    n.op = OpKind::Add;
    n.inputs = {a.id, b.id};
    return push(std::move(n));
}

Var Tape::scale(Var x, double c) {
    Node n;
    n.op = OpKind::Scale;
    n.inputs = {x.id};
    n.aux_scalar = c;
    return push(std::move(n));
}

Var Tape::transpose(Var x) {
    require(value(x).rank() == 2, OpKind::Transpose, "input must be rank 2");
    Node n;
    n.op = OpKind::Transpose;
    n.inputs = {x.id};
    return push(std::move(n));
}

Var Tape::softmax_xent_rows(Var scores, const std::vector<std::uint64_t>& targets) {
    const Tensor& sv = value(scores);
    require(targets.size() == sv.rows(), OpKind::SoftmaxXentRows,
            "one target per row required");
    for (std::uint64_t t : targets)
        require(t < sv.cols(), OpKind::SoftmaxXentRows, "target out of range");
    Node n;
    n.op = OpKind::SoftmaxXentRows;
    n.inputs = {scores.id};
    n.aux_idx = targets;
    return push(std::move(n));
}

Var Tape::sum_all(Var x) {
    Node n;
    n.op = OpKind::SumAll;
    n.inputs = {x.id};
    return push(std::move(n));
}

Var Tape::mean_all(Var x) {
    require(value(x).size() >= 1, OpKind::MeanAll, "empty input");
    Node n;
    n.op = OpKind::MeanAll;
    n.inputs = {x.id};
    return push(std::move(n));
}

Var Tape::dot(Var u, Var v) {
    require(value(u).size() == value(v).size(), OpKind::Dot, "lengths differ");
    Node n;
    n.op = OpKind::Dot;
    n.inputs = {u.id, v.id};
    return push(std::move(n));
}

Var Tape::row(Var x, std::size_t i) {
    require(value(x).rank() == 2 && i < value(x).rows(), OpKind::Row, "row out of range");
    Node n;
    n.op = OpKind::Row;
    n.inputs = {x.id};
    n.aux_idx = {i};
    return push(std::move(n));
}

Var Tape::matvec(Var a, Var x) {
    require(value(a).rank() == 2 && value(x).rank() == 1, OpKind::Matvec,
            "need matrix and vector");
    require(value(a).cols() == value(x).size(), OpKind::Matvec, "inner dimensions differ");
    Node n;
    n.op = OpKind::Matvec;
    n.inputs = {a.id, x.id};
    return push(std::move(n));
}

Var Tape::vec_slice(Var x, std::size_t start, std::size_t len) {
    require(value(x).rank() == 1 && start + len <= value(x).size(), OpKind::VecSlice,
            "slice out of range");
    Node n;
    n.op = OpKind::VecSlice;
    n.inputs = {x.id};
    n.aux_idx = {start, len};
    return push(std::move(n));
}

Var Tape::normalize_rows(Var x) {
    Node n;
    n.op = OpKind::NormalizeRows;
    n.inputs = {x.id};
    return push(std::move(n));
}

namespace {
constexpr double kNormFloor = 1e-12;

double row_norm(const Tensor& x, std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) s += x.at(i, j) * x.at(i, j);
    return std::max(std::sqrt(s), kNormFloor);
}
} // namespace

Tensor Tape::eval(const Node& n, const std::vector<const Tensor*>& in) {
    switch (n.op) {
    case OpKind::Leaf:
        return n.value;
    case OpKind::Affine: {
        const Tensor &x = *in[0], &w = *in[1], &b = *in[2];
        const std::size_t m = x.rows(), k = x.cols(), o = w.rows();
        Tensor out = Tensor::zeros({m, o});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < o; ++j) {
                double s = 0.0;
                for (std::size_t l = 0; l < k; ++l) s += x.at(i, l) * w.at(j, l);
                out.at(i, j) = s + b.at(j);
            }
        return out;
    }
    case OpKind::Matmul: {
        const Tensor &a = *in[0], &b = *in[1];
        const std::size_t m = a.rows(), k = a.cols(), o = b.cols();
        Tensor out = Tensor::zeros({m, o});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < o; ++j) {
                double s = 0.0;
                for (std::size_t l = 0; l < k; ++l) s += a.at(i, l) * b.at(l, j);
                out.at(i, j) = s;
            }
        return out;
    }
    case OpKind::MatmulNT: {
        const Tensor &a = *in[0], &b = *in[1];
        const std::size_t m = a.rows(), k = a.cols(), o = b.rows();
        Tensor out = Tensor::zeros({m, o});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < o; ++j) {
                double s = 0.0;
                for (std::size_t l = 0; l < k; ++l) s += a.at(i, l) * b.at(j, l);
                out.at(i, j) = s;
            }
        return out;
    }
    case OpKind::Tanh: {
        Tensor out = *in[0];
        for (double& v : out.data) v = std::tanh(v);
        return out;
    }
    case OpKind::Elu: {
        Tensor out = *in[0];
        for (double& v : out.data) v = v > 0.0 ? v : std::expm1(v);
        return out;
    }
    case OpKind::LeakyRelu: {
        Tensor out = *in[0];
        for (double& v : out.data) v = v > 0.0 ? v : n.aux_scalar * v;
        return out;
    }
    case OpKind::MaskedSoftmax: {
        const Tensor& s = *in[0];
        const std::size_t rows = s.rows(), cols = s.cols();
        Tensor out = Tensor::zeros(s.shape);
        for (std::size_t i = 0; i < rows; ++i) {
            double mx = -HUGE_VAL;
            for (std::size_t j = 0; j < cols; ++j)
                if (n.aux_mask[i * cols + j] && s.data[i * cols + j] > mx)
                    mx = s.data[i * cols + j];
            if (mx == -HUGE_VAL)
                throw data_error("masked_softmax: empty neighborhood (all-masked row)");
            double z = 0.0;
            for (std::size_t j = 0; j < cols; ++j)
                if (n.aux_mask[i * cols + j])
                    z += std::exp(s.data[i * cols + j] - mx);
            for (std::size_t j = 0; j < cols; ++j)
                if (n.aux_mask[i * cols + j])
                    out.data[i * cols + j] = std::exp(s.data[i * cols + j] - mx) / z;
        }
        return out;
    }
    case OpKind::GatherMean: {
        const Tensor& t = *in[0];
        Tensor out = Tensor::zeros({t.cols()});
        if (!n.aux_idx.empty()) {
            for (std::uint64_t id : n.aux_idx)
                for (std::size_t j = 0; j < t.cols(); ++j)
                    out.data[j] += t.at(static_cast<std::size_t>(id), j);
            const double inv = 1.0 / static_cast<double>(n.aux_idx.size());
            for (double& v : out.data) v *= inv;
        }
        return out;
    }
    case OpKind::Vstack: {
        std::size_t rows = 0;
        for (const Tensor* t : in) rows += t->rows();
        Tensor out = Tensor::zeros({rows, in[0]->cols()});
        std::size_t r = 0;
        for (const Tensor* t : in) {
            std::copy(t->data.begin(), t->data.end(), out.data.begin() + r * out.cols());
            r += t->rows();
        }
        return out;
    }
    case OpKind::MeanRows: {
        const Tensor& x = *in[0];
        Tensor out = Tensor::zeros({1, x.cols()});
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) out.at(0, j) += x.at(i, j);
        const double inv = 1.0 / static_cast<double>(x.rows());
        for (double& v : out.data) v *= inv;
        return out;
    }
    case OpKind::OuterSum: {
        const Tensor &u = *in[0], &w = *in[1];
        Tensor out = Tensor::zeros({u.size(), w.size()});
        for (std::size_t i = 0; i < u.size(); ++i)
            for (std::size_t j = 0; j < w.size(); ++j)
                out.at(i, j) = u.data[i] + w.data[j];
        return out;
    }
    case OpKind::ConcatCols: {
        const Tensor &a = *in[0], &b = *in[1];
        Tensor out = Tensor::zeros({a.rows(), a.cols() + b.cols()});
        for (std::size_t i = 0; i < a.rows(); ++i) {
            for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(i, j);
            for (std::size_t j = 0; j < b.cols(); ++j) out.at(i, a.cols() + j) = b.at(i, j);
        }
        return out;
    }
    case OpKind::Add: {
        Tensor out = *in[0];
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += in[1]->data[i];
        return out;
    }
    case OpKind::Scale: {
        Tensor out = *in[0];
        for (double& v : out.data) v *= n.aux_scalar;
        return out;
    }
    case OpKind::Transpose: {
        const Tensor& x = *in[0];
        Tensor out = Tensor::zeros({x.cols(), x.rows()});
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) out.at(j, i) = x.at(i, j);
        return out;
    }
    case OpKind::SoftmaxXentRows: {
        const Tensor& s = *in[0];
        const std::size_t rows = s.rows(), cols = s.cols();
        Tensor out = Tensor::zeros({rows});
        for (std::size_t i = 0; i < rows; ++i) {
            double mx = s.data[i * cols];
            for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, s.data[i * cols + j]);
            double z = 0.0;
            for (std::size_t j = 0; j < cols; ++j) z += std::exp(s.data[i * cols + j] - mx);
            const double lse = mx + std::log(z);
            out.data[i] = lse - s.data[i * cols + n.aux_idx[i]];
        }
        return out;
    }
    case OpKind::SumAll: {
        double s = 0.0;
        for (double v : in[0]->data) s += v;
        Tensor out = Tensor::zeros({1});
        out.data[0] = s;
        return out;
    }
    case OpKind::MeanAll: {
        double s = 0.0;
        for (double v : in[0]->data) s += v;
        Tensor out = Tensor::zeros({1});
        out.data[0] = s / static_cast<double>(in[0]->size());
        return out;
    }
    case OpKind::Dot: {
        double s = 0.0;
        for (std::size_t i = 0; i < in[0]->size(); ++i)
            s += in[0]->data[i] * in[1]->data[i];
        Tensor out = Tensor::zeros({1});
        out.data[0] = s;
        return out;
    }
    case OpKind::Row: {
        const Tensor& x = *in[0];
        const std::size_t i = static_cast<std::size_t>(n.aux_idx[0]);
        Tensor out = Tensor::zeros({x.cols()});
        for (std::size_t j = 0; j < x.cols(); ++j) out.data[j] = x.at(i, j);
        return out;
    }
    case OpKind::Matvec: {
        const Tensor &a = *in[0], &x = *in[1];
        Tensor out = Tensor::zeros({a.rows()});
        for (std::size_t i = 0; i < a.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < a.cols(); ++j) s += a.at(i, j) * x.data[j];
            out.data[i] = s;
        }
        return out;
    }
    case OpKind::VecSlice: {
        const Tensor& x = *in[0];
        const std::size_t start = static_cast<std::size_t>(n.aux_idx[0]);
        const std::size_t len = static_cast<std::size_t>(n.aux_idx[1]);
        Tensor out = Tensor::zeros({len});
        for (std::size_t j = 0; j < len; ++j) out.data[j] = x.data[start + j];
        return out;
    }
    case OpKind::NormalizeRows: {
        const Tensor& x = *in[0];
        Tensor out = x;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double inv = 1.0 / row_norm(x, i);
            for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) *= inv;
        }
        return out;
    }
    }
    throw data_error("tape: unknown op");
}

const Tensor& Tape::grad(Var v) const {
    if (!grads_valid_) throw usage_error("tape: backward() has not run");
    return nodes_.at(v.id).grad;
}

double Tape::scalar(Var v) const {
    const Tensor& t = value(v);
    if (t.size() != 1) throw usage_error("tape: value is not a scalar");
    return t.data[0];
}

void Tape::backward(Var loss) {
    if (value(loss).size() != 1)
        throw usage_error("backprop: loss must be a scalar");
    for (Node& n : nodes_) n.grad = Tensor::zeros(n.value.shape);
    nodes_[loss.id].grad.data[0] = 1.0;
    for (std::size_t id = loss.id + 1; id-- > 0;) backprop_node(id);
    grads_valid_ = true;
}

void Tape::backprop_node(std::size_t id) {
    Node& n = nodes_[id];
    const Tensor& g = n.grad;
    switch (n.op) {
    case OpKind::Leaf:
        return;
    case OpKind::Affine: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        const Tensor& w = nodes_[n.inputs[1]].value;
        Tensor& dx = nodes_[n.inputs[0]].grad;
        Tensor& dw = nodes_[n.inputs[1]].grad;
        Tensor& db = nodes_[n.inputs[2]].grad;
        const std::size_t m = x.rows(), k = x.cols(), o = w.rows();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < o; ++j) {
                const double gij = g.at(i, j);
                for (std::size_t l = 0; l < k; ++l) {
                    dx.data[i * k + l] += gij * w.at(j, l);
                    dw.data[j * k + l] += gij * x.at(i, l);
                }
                db.data[j] += gij;
            }
        return;
    }
    case OpKind::Matmul: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        Tensor& da = nodes_[n.inputs[0]].grad;
        Tensor& db = nodes_[n.inputs[1]].grad;
        const std::size_t m = a.rows(), k = a.cols(), o = b.cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < o; ++j) {
                const double gij = g.at(i, j);
                for (std::size_t l = 0; l < k; ++l) {
                    da.data[i * k + l] += gij * b.at(l, j);
                    db.data[l * o + j] += a.at(i, l) * gij;
                }
            }
        return;
    }
    case OpKind::MatmulNT: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        Tensor& da = nodes_[n.inputs[0]].grad;
        Tensor& db = nodes_[n.inputs[1]].grad;
        const std::size_t m = a.rows(), k = a.cols(), o = b.rows();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < o; ++j) {
                const double gij = g.at(i, j);
                for (std::size_t l = 0; l < k; ++l) {
                    da.data[i * k + l] += gij * b.at(j, l);
                    db.data[j * k + l] += gij * a.at(i, l);
                }
            }
        return;
    }
    case OpKind::Tanh: {
        Tensor& dx = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double y = n.value.data[i];
            dx.data[i] += g.data[i] * (1.0 - y * y);
        }
        return;
    }
    case OpKind::Elu: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        Tensor& dx = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < g.size(); ++i)
            dx.data[i] += x.data[i] > 0.0 ? g.data[i] : g.data[i] * (n.value.data[i] + 1.0);
        return;
    }
    case OpKind::LeakyRelu: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        Tensor& dx = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < g.size(); ++i)
            dx.data[i] += x.data[i] > 0.0 ? g.data[i] : g.data[i] * n.aux_scalar;
        return;
    }
    case OpKind::MaskedSoftmax: {
        Tensor& dx = nodes_[n.inputs[0]].grad;
        const std::size_t rows = n.value.rows(), cols = n.value.cols();
        for (std::size_t i = 0; i < rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols; ++j)
                if (n.aux_mask[i * cols + j])
                    s += g.data[i * cols + j] * n.value.data[i * cols + j];
            for (std::size_t j = 0; j < cols; ++j)
                if (n.aux_mask[i * cols + j])
                    dx.data[i * cols + j] +=
                        n.value.data[i * cols + j] * (g.data[i * cols + j] - s);
        }
        return;
    }
    case OpKind::GatherMean: {
        if (n.aux_idx.empty()) return;
        Tensor& dt = nodes_[n.inputs[0]].grad;
        const std::size_t d = n.value.size();
        const double inv = 1.0 / static_cast<double>(n.aux_idx.size());
        for (std::uint64_t id : n.aux_idx)
            for (std::size_t j = 0; j < d; ++j)
                dt.data[static_cast<std::size_t>(id) * d + j] += g.data[j] * inv;
        return;
    }
    case OpKind::Vstack: {
        std::size_t r = 0;
        const std::size_t cols = n.value.cols();
        for (std::size_t input : n.inputs) {
            Tensor& di = nodes_[input].grad;
            for (std::size_t i = 0; i < di.size(); ++i)
                di.data[i] += g.data[r * cols + i];
            r += nodes_[input].value.rows();
        }
        return;
    }
    case OpKind::MeanRows: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        Tensor& dx = nodes_[n.inputs[0]].grad;
        const double inv = 1.0 / static_cast<double>(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j)
                dx.data[i * x.cols() + j] += g.data[j] * inv;
        return;
    }
    case OpKind::OuterSum: {
        Tensor& du = nodes_[n.inputs[0]].grad;
        Tensor& dw = nodes_[n.inputs[1]].grad;
        const std::size_t m = n.value.rows(), o = n.value.cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < o; ++j) {
                du.data[i] += g.at(i, j);
                dw.data[j] += g.at(i, j);
            }
        return;
    }
    case OpKind::ConcatCols: {
        Tensor& da = nodes_[n.inputs[0]].grad;
        Tensor& db = nodes_[n.inputs[1]].grad;
        const std::size_t ca = da.cols(), cb = db.cols();
        for (std::size_t i = 0; i < n.value.rows(); ++i) {
            for (std::size_t j = 0; j < ca; ++j) da.data[i * ca + j] += g.at(i, j);
            for (std::size_t j = 0; j < cb; ++j) db.data[i * cb + j] += g.at(i, ca + j);
        }
        return;
    }
    case OpKind::Add: {
        for (std::size_t k2 = 0; k2 < 2; ++k2) {
            Tensor& d = nodes_[n.inputs[k2]].grad;
            for (std::size_t i = 0; i < g.size(); ++i) d.data[i] += g.data[i];
        }
        return;
    }
    case OpKind::Scale: {
        Tensor& dx = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < g.size(); ++i) dx.data[i] += g.data[i] * n.aux_scalar;
        return;
    }
    case OpKind::Transpose: {
        Tensor& dx = nodes_[n.inputs[0]].grad;
        const std::size_t r = n.value.rows(), c = n.value.cols();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) dx.data[j * r + i] += g.at(i, j);
        return;
    }
    case OpKind::SoftmaxXentRows: {
        const Tensor& s = nodes_[n.inputs[0]].value;
        Tensor& ds = nodes_[n.inputs[0]].grad;
        const std::size_t rows = s.rows(), cols = s.cols();
        for (std::size_t i = 0; i < rows; ++i) {
            double mx = s.data[i * cols];
            for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, s.data[i * cols + j]);
            double z = 0.0;
            for (std::size_t j = 0; j < cols; ++j) z += std::exp(s.data[i * cols + j] - mx);
            const double gi = g.data[i];
            for (std::size_t j = 0; j < cols; ++j) {
                double p = std::exp(s.data[i * cols + j] - mx) / z;
                if (j == n.aux_idx[i]) p -= 1.0;
                ds.data[i * cols + j] += gi * p;
            }
        }
        return;
    }
    case OpKind::SumAll: {
        Tensor& dx = nodes_[n.inputs[0]].grad;
        for (double& v : dx.data) v += g.data[0];
        return;
    }
    case OpKind::MeanAll: {
        Tensor& dx = nodes_[n.inputs[0]].grad;
        const double gv = g.data[0] / static_cast<double>(dx.size());
        for (double& v : dx.data) v += gv;
        return;
    }
    case OpKind::Dot: {
        const Tensor& u = nodes_[n.inputs[0]].value;
        const Tensor& v = nodes_[n.inputs[1]].value;
        Tensor& du = nodes_[n.inputs[0]].grad;
        Tensor& dv = nodes_[n.inputs[1]].grad;
        for (std::size_t i = 0; i < u.size(); ++i) {
            du.data[i] += g.data[0] * v.data[i];
            dv.data[i] += g.data[0] * u.data[i];
        }
        return;
    }
    case OpKind::Row: {
        Tensor& dx = nodes_[n.inputs[0]].grad;
        const std::size_t i = static_cast<std::size_t>(n.aux_idx[0]);
        const std::size_t c = n.value.size();
        for (std::size_t j = 0; j < c; ++j) dx.data[i * c + j] += g.data[j];
        return;
    }
    case OpKind::Matvec: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& x = nodes_[n.inputs[1]].value;
        Tensor& da = nodes_[n.inputs[0]].grad;
        Tensor& dx = nodes_[n.inputs[1]].grad;
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < a.cols(); ++j) {
                da.data[i * a.cols() + j] += g.data[i] * x.data[j];
                dx.data[j] += g.data[i] * a.at(i, j);
            }
        return;
    }
    case OpKind::VecSlice: {
        Tensor& dx = nodes_[n.inputs[0]].grad;
        const std::size_t start = static_cast<std::size_t>(n.aux_idx[0]);
        for (std::size_t j = 0; j < g.size(); ++j) dx.data[start + j] += g.data[j];
        return;
    }
    case OpKind::NormalizeRows: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        Tensor& dx = nodes_[n.inputs[0]].grad;
        const std::size_t cols = x.cols();
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double r = row_norm(x, i);
            double gy = 0.0;
            for (std::size_t j = 0; j < cols; ++j)
                gy += g.data[i * cols + j] * n.value.data[i * cols + j];
            for (std::size_t j = 0; j < cols; ++j)
                dx.data[i * cols + j] +=
                    (g.data[i * cols + j] - n.value.data[i * cols + j] * gy) / r;
        }
        return;
    }
    }
}

void Tape::export_grads(ParamStore& store) const {
    store.grads.clear();
    for (const auto& [path, t] : store.values) {
        auto it = param_nodes_.find(path);
        if (grads_valid_ && it != param_nodes_.end() &&
            nodes_[it->second].grad.size() == t.size()) {
            store.grads[path] = nodes_[it->second].grad;
        } else {
            // Parameters not used by this trace get explicit zero gradients
            // so optimizer moments stay aligned.
            store.grads[path] = Tensor::zeros(t.shape);
        }
    }
}

bool Tape::replay_check() const {
    for (const Node& n : nodes_) {
        if (n.op == OpKind::Leaf) continue;
        std::vector<const Tensor*> in;
        in.reserve(n.inputs.size());
        for (std::size_t id : n.inputs) in.push_back(&nodes_[id].value);
        Tensor again = eval(n, in);
        if (again.shape != n.value.shape) return false;
        if (std::memcmp(again.data.data(), n.value.data.data(),
                        again.size() * sizeof(double)) != 0)
            return false;
    }
    return true;
}

} // namespace graphdoc
