#include "embtune/graph.hpp"

#include <cmath>
#include <stdexcept>

#include "embtune/kernels.hpp"

namespace embtune {

int ParamStore::add(std::string name, Tensor t) {
    params.push_back({std::move(name), std::move(t)});
    return static_cast<int>(params.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

Tape::Tape(ParamStore* store) : store_(store) {
    if (store_) param_leaf_.assign(store_->count(), -1);
}

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Value Tape::param(int param_id) {
    if (!store_) throw std::logic_error("Tape::param: no ParamStore bound");
    auto idx = static_cast<std::size_t>(param_id);
    if (idx >= param_leaf_.size()) param_leaf_.resize(store_->count(), -1);
    if (param_leaf_[idx] < 0) {
        Node n;
        n.op = Op::Leaf;
        n.val = store_->value(param_id);
        n.param_id = param_id;
        param_leaf_[idx] = push(std::move(n));
    }
    return Value{param_leaf_[idx]};
}

Value Tape::constant(Tensor t) {
    Node n;
    n.op = Op::Const;
    n.val = std::move(t);
    return Value{push(std::move(n))};
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
}

}  // namespace

Value Tape::add(Value a, Value b) {
    const Tensor& ta = val_of(a.id);
    const Tensor& tb = val_of(b.id);
    require_same_shape(ta, tb, "add");
    Node n;
    n.op = Op::Add;
    n.a = a.id;
    n.b = b.id;
    n.val = Tensor(ta.rows(), ta.cols());
    kernels::active().add(ta.v.data(), tb.v.data(), n.val.v.data(), ta.size());
    return Value{push(std::move(n))};
}

Value Tape::sub(Value a, Value b) {
    const Tensor& ta = val_of(a.id);
    const Tensor& tb = val_of(b.id);
    require_same_shape(ta, tb, "sub");
    Node n;
    n.op = Op::Sub;
    n.a = a.id;
    n.b = b.id;
    n.val = Tensor(ta.rows(), ta.cols());
    kernels::active().sub(ta.v.data(), tb.v.data(), n.val.v.data(), ta.size());
    return Value{push(std::move(n))};
}

Value Tape::mul(Value a, Value b) {
    const Tensor& ta = val_of(a.id);
    const Tensor& tb = val_of(b.id);
    require_same_shape(ta, tb, "mul");
    Node n;
    n.op = Op::Mul;
    n.a = a.id;
    n.b = b.id;
    n.val = Tensor(ta.rows(), ta.cols());
    kernels::active().mul(ta.v.data(), tb.v.data(), n.val.v.data(), ta.size());
    return Value{push(std::move(n))};
}

Value Tape::scale(Value a, double c) {
    const Tensor& ta = val_of(a.id);
    Node n;
    n.op = Op::Scale;
    n.a = a.id;
    n.p0 = c;
    n.val = Tensor(ta.rows(), ta.cols());
    kernels::active().scale(ta.v.data(), c, n.val.v.data(), ta.size());
    return Value{push(std::move(n))};
}

Value Tape::add_row(Value x, Value bias) {
    const Tensor& tx = val_of(x.id);
    const Tensor& tb = val_of(bias.id);
    if (tb.rows() != 1 || tb.cols() != tx.cols()) {
        throw std::invalid_argument("add_row: bias must be [1,cols]");
    }
    Node n;
    n.op = Op::AddRow;
    n.a = x.id;
    n.b = bias.id;
    n.val = tx;
    for (std::size_t r = 0; r < tx.rows(); ++r) {
        kernels::active().add(n.val.row_ptr(r), tb.v.data(), n.val.row_ptr(r), tx.cols());
    }
    return Value{push(std::move(n))};
}

Value Tape::matmul(Value a, Value b) {
    Node n;
    n.op = Op::MatMul;
    n.a = a.id;
    n.b = b.id;
    n.val = embtune::matmul(val_of(a.id), val_of(b.id));
    return Value{push(std::move(n))};
}

Value Tape::transpose_of(Value a) {
    Node n;
    n.op = Op::Transpose;
    n.a = a.id;
    n.val = embtune::transpose(val_of(a.id));
    return Value{push(std::move(n))};
}

Value Tape::tanh_of(Value a) {
    Node n;
    n.op = Op::Tanh;
    n.a = a.id;
    n.val = val_of(a.id);
    for (double& x : n.val.v) x = std::tanh(x);
    return Value{push(std::move(n))};
}

Value Tape::sigmoid_of(Value a) {
    Node n;
    n.op = Op::Sigmoid;
    n.a = a.id;
    n.val = val_of(a.id);
    for (double& x : n.val.v) x = 1.0 / (1.0 + std::exp(-x));
    return Value{push(std::move(n))};
}

Value Tape::relu_of(Value a) {
    Node n;
    n.op = Op::Relu;
    n.a = a.id;
    n.val = val_of(a.id);
    for (double& x : n.val.v) x = x > 0.0 ? x : 0.0;
    return Value{push(std::move(n))};
}

Value Tape::exp_of(Value a) {
    Node n;
    n.op = Op::Exp;
    n.a = a.id;
    n.val = val_of(a.id);
    for (double& x : n.val.v) x = std::exp(x);
    return Value{push(std::move(n))};
}

Value Tape::log_of(Value a) {
    Node n;
    n.op = Op::Log;
    n.a = a.id;
    n.val = val_of(a.id);
    for (double& x : n.val.v) x = std::log(x);
    return Value{push(std::move(n))};
}

Value Tape::clamp_of(Value a, double lo, double hi) {
    Node n;
    n.op = Op::Clamp;
    n.a = a.id;
    n.p0 = lo;
    n.p1 = hi;
    n.val = val_of(a.id);
    for (double& x : n.val.v) x = x < lo ? lo : (x > hi ? hi : x);
    return Value{push(std::move(n))};
}

Value Tape::sum(Value a) {
    Node n;
    n.op = Op::Sum;
    n.a = a.id;
    n.val = Tensor::scalar(kernels::active().sum(val_of(a.id).v.data(), val_of(a.id).size()));
    return Value{push(std::move(n))};
}

Value Tape::mean(Value a) {
    const double numel = static_cast<double>(val_of(a.id).size());
    return scale(sum(a), 1.0 / numel);
}

Value Tape::sum_cols(Value a) {
    const Tensor& ta = val_of(a.id);
    Node n;
    n.op = Op::SumCols;
    n.a = a.id;
    n.val = Tensor(ta.rows(), 1);
    for (std::size_t r = 0; r < ta.rows(); ++r) {
        n.val.at(r, 0) = kernels::active().sum(ta.row_ptr(r), ta.cols());
    }
    return Value{push(std::move(n))};
}

Value Tape::slice_cols(Value a, std::size_t begin, std::size_t len) {
    const Tensor& ta = val_of(a.id);
    if (begin + len > ta.cols()) throw std::invalid_argument("slice_cols: out of range");
    Node n;
    n.op = Op::SliceCols;
    n.a = a.id;
    n.i0 = begin;
    n.i1 = len;
    n.val = Tensor(ta.rows(), len);
    for (std::size_t r = 0; r < ta.rows(); ++r) {
        for (std::size_t c = 0; c < len; ++c) n.val.at(r, c) = ta.at(r, begin + c);
    }
    return Value{push(std::move(n))};
}

Value Tape::slice_rows(Value a, std::size_t begin, std::size_t len) {
    const Tensor& ta = val_of(a.id);
    if (begin + len > ta.rows()) throw std::invalid_argument("slice_rows: out of range");
    Node n;
    n.op = Op::SliceRows;
    n.a = a.id;
    n.i0 = begin;
    n.i1 = len;
    n.val = Tensor(len, ta.cols());
    for (std::size_t r = 0; r < len; ++r) {
        for (std::size_t c = 0; c < ta.cols(); ++c) n.val.at(r, c) = ta.at(begin + r, c);
    }
    return Value{push(std::move(n))};
}

Value Tape::concat_cols(Value a, Value b) {
    const Tensor& ta = val_of(a.id);
    const Tensor& tb = val_of(b.id);
    if (ta.rows() != tb.rows()) throw std::invalid_argument("concat_cols: row mismatch");
    Node n;
    n.op = Op::ConcatCols;
    n.a = a.id;
    n.b = b.id;
    n.val = Tensor(ta.rows(), ta.cols() + tb.cols());
    for (std::size_t r = 0; r < ta.rows(); ++r) {
        for (std::size_t c = 0; c < ta.cols(); ++c) n.val.at(r, c) = ta.at(r, c);
        for (std::size_t c = 0; c < tb.cols(); ++c) n.val.at(r, ta.cols() + c) = tb.at(r, c);
    }
    n.i0 = ta.cols();
    return Value{push(std::move(n))};
}

Value Tape::row_scale(Value x, Value d) {
    const Tensor& tx = val_of(x.id);
    const Tensor& td = val_of(d.id);
    if (td.rows() != tx.rows() || td.cols() != 1) {
        throw std::invalid_argument("row_scale: d must be [rows,1]");
    }
    Node n;
    n.op = Op::RowScale;
    n.a = x.id;
    n.b = d.id;
    n.val = Tensor(tx.rows(), tx.cols());
    for (std::size_t r = 0; r < tx.rows(); ++r) {
        kernels::active().scale(tx.row_ptr(r), td.at(r, 0), n.val.row_ptr(r), tx.cols());
    }
    return Value{push(std::move(n))};
}

Value Tape::repeat_rows(Value x, std::size_t count) {
    const Tensor& tx = val_of(x.id);
    if (tx.rows() != 1) throw std::invalid_argument("repeat_rows: input must be [1,c]");
    Node n;
    n.op = Op::RepeatRows;
    n.a = x.id;
    n.val = Tensor(count, tx.cols());
    for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t c = 0; c < tx.cols(); ++c) n.val.at(r, c) = tx.at(0, c);
    }
    return Value{push(std::move(n))};
}

const Tensor& Tape::value(Value v) const { return val_of(v.id); }

double Tape::scalar_value(Value v) const {
    const Tensor& t = val_of(v.id);
    if (t.size() != 1) throw std::invalid_argument("scalar_value: node is not scalar");
    return t.v[0];
}

const Tensor& Tape::grad(Value v) const {
    if (!ran_backward_) throw std::logic_error("grad: backward() not run");
    return nodes_[static_cast<std::size_t>(v.id)].grad;
}

Tensor Tape::grad_of_param(int param_id) const {
    if (!store_) throw std::logic_error("grad_of_param: no ParamStore bound");
    const Tensor& pv = store_->value(param_id);
    auto idx = static_cast<std::size_t>(param_id);
    if (idx >= param_leaf_.size() || param_leaf_[idx] < 0 || !ran_backward_) {
        return Tensor::zeros(pv.rows(), pv.cols());
    }
    return nodes_[static_cast<std::size_t>(param_leaf_[idx])].grad;
}

void Tape::backward(Value loss) {
    const Tensor& lv = val_of(loss.id);
    if (lv.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    const auto& k = kernels::active();
    for (Node& n : nodes_) n.grad = Tensor::zeros(n.val.rows(), n.val.cols());
    nodes_[static_cast<std::size_t>(loss.id)].grad.v[0] = 1.0;

    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::Leaf:
            case Op::Const:
                break;
            case Op::Add: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                Tensor& gb = nodes_[static_cast<std::size_t>(n.b)].grad;
                k.add(ga.v.data(), g.v.data(), ga.v.data(), g.size());
                k.add(gb.v.data(), g.v.data(), gb.v.data(), g.size());
                break;
            }
            case Op::Sub: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                Tensor& gb = nodes_[static_cast<std::size_t>(n.b)].grad;
                k.add(ga.v.data(), g.v.data(), ga.v.data(), g.size());
                k.axpy(-1.0, g.v.data(), gb.v.data(), g.size());
                break;
            }
            case Op::Mul: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                Tensor& gb = nodes_[static_cast<std::size_t>(n.b)].grad;
                const Tensor& va = val_of(n.a);
                const Tensor& vb = val_of(n.b);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga.v[i] += g.v[i] * vb.v[i];
                    gb.v[i] += g.v[i] * va.v[i];
                }
                break;
            }
            case Op::Scale: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                k.axpy(n.p0, g.v.data(), ga.v.data(), g.size());
                break;
            }
            case Op::AddRow: {
                Tensor& gx = nodes_[static_cast<std::size_t>(n.a)].grad;
                Tensor& gb = nodes_[static_cast<std::size_t>(n.b)].grad;
                k.add(gx.v.data(), g.v.data(), gx.v.data(), g.size());
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    k.add(gb.v.data(), g.row_ptr(r), gb.v.data(), g.cols());
                }
                break;
            }
            case Op::MatMul: {
                // C = A B: dA += G B^T, dB += A^T G
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                Tensor& gb = nodes_[static_cast<std::size_t>(n.b)].grad;
                const Tensor& va = val_of(n.a);
                const Tensor& vb = val_of(n.b);
                for (std::size_t i = 0; i < va.rows(); ++i) {
                    for (std::size_t t = 0; t < va.cols(); ++t) {
                        ga.at(i, t) += k.dot(g.row_ptr(i), vb.row_ptr(t), vb.cols());
                    }
                }
                for (std::size_t i = 0; i < va.rows(); ++i) {
                    for (std::size_t t = 0; t < va.cols(); ++t) {
                        const double aval = va.at(i, t);
                        if (aval != 0.0) k.axpy(aval, g.row_ptr(i), gb.row_ptr(t), g.cols());
                    }
                }
                break;
            }
            case Op::Transpose: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    for (std::size_t c = 0; c < g.cols(); ++c) ga.at(c, r) += g.at(r, c);
                }
                break;
            }
            case Op::Tanh: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga.v[i] += g.v[i] * (1.0 - n.val.v[i] * n.val.v[i]);
                }
                break;
            }
            case Op::Sigmoid: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga.v[i] += g.v[i] * n.val.v[i] * (1.0 - n.val.v[i]);
                }
                break;
            }
            case Op::Relu: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                const Tensor& va = val_of(n.a);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (va.v[i] > 0.0) ga.v[i] += g.v[i];
                }
                break;
            }
            case Op::Exp: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * n.val.v[i];
                break;
            }
            case Op::Log: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                const Tensor& va = val_of(n.a);
                for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] / va.v[i];
                break;
            }
            case Op::Clamp: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                const Tensor& va = val_of(n.a);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (va.v[i] >= n.p0 && va.v[i] <= n.p1) ga.v[i] += g.v[i];
                }
                break;
            }
            case Op::Sum: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                const double gs = g.v[0];
                for (double& x : ga.v) x += gs;
                break;
            }
            case Op::SumCols: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                for (std::size_t r = 0; r < ga.rows(); ++r) {
                    const double gr = g.at(r, 0);
                    for (std::size_t c = 0; c < ga.cols(); ++c) ga.at(r, c) += gr;
                }
                break;
            }
            case Op::SliceCols: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    for (std::size_t c = 0; c < g.cols(); ++c) ga.at(r, n.i0 + c) += g.at(r, c);
                }
                break;
            }
            case Op::SliceRows: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    k.add(ga.row_ptr(n.i0 + r), g.row_ptr(r), ga.row_ptr(n.i0 + r), g.cols());
                }
                break;
            }
            case Op::ConcatCols: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                Tensor& gb = nodes_[static_cast<std::size_t>(n.b)].grad;
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    for (std::size_t c = 0; c < n.i0; ++c) ga.at(r, c) += g.at(r, c);
                    for (std::size_t c = n.i0; c < g.cols(); ++c) gb.at(r, c - n.i0) += g.at(r, c);
                }
                break;
            }
            case Op::RowScale: {
                Tensor& gx = nodes_[static_cast<std::size_t>(n.a)].grad;
                Tensor& gd = nodes_[static_cast<std::size_t>(n.b)].grad;
                const Tensor& vx = val_of(n.a);
                const Tensor& vd = val_of(n.b);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    k.axpy(vd.at(r, 0), g.row_ptr(r), gx.row_ptr(r), g.cols());
                    gd.at(r, 0) += k.dot(g.row_ptr(r), vx.row_ptr(r), g.cols());
                }
                break;
            }
            case Op::RepeatRows: {
                Tensor& ga = nodes_[static_cast<std::size_t>(n.a)].grad;
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    k.add(ga.v.data(), g.row_ptr(r), ga.v.data(), g.cols());
                }
                break;
            }
        }
    }
    ran_backward_ = true;
}

}  // namespace embtune
