#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "embtune/tensor.hpp"

namespace embtune {

// Named trainable tensors. Models hold their parameters here and bind
// them into a Tape when building a loss.
struct ParamStore {
    struct Param {
        std::string name;
        Tensor value;
    };
    std::vector<Param> params;

    int add(std::string name, Tensor t);
    Tensor& value(int id) { return params.at(static_cast<std::size_t>(id)).value; }
    const Tensor& value(int id) const { return params.at(static_cast<std::size_t>(id)).value; }
    const std::string& name(int id) const { return params.at(static_cast<std::size_t>(id)).name; }
    int find(const std::string& name) const;
    std::size_t count() const { return params.size(); }
};

struct Value {
    int id = -1;
};

// Reverse-mode autodiff tape over dense tensors. Nodes are appended in
// topological order during the forward pass; backward() walks them in
// reverse. One tape per loss evaluation.
class Tape {
public:
    explicit Tape(ParamStore* store = nullptr);

    Value param(int param_id);
    Value constant(Tensor t);

    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);          // Hadamard
    Value scale(Value a, double c);
    Value add_row(Value x, Value bias);   // [n,c] + [1,c] broadcast
    Value matmul(Value a, Value b);
    Value transpose_of(Value a);
    Value tanh_of(Value a);
    Value sigmoid_of(Value a);
    Value relu_of(Value a);
    Value exp_of(Value a);
    Value log_of(Value a);
    Value clamp_of(Value a, double lo, double hi);  // pass-through grad inside
    Value sum(Value a);                   // -> [1,1]
    Value mean(Value a);
    Value sum_cols(Value a);              // [r,c] -> [r,1]
    Value slice_cols(Value a, std::size_t begin, std::size_t len);
    Value slice_rows(Value a, std::size_t begin, std::size_t len);
    Value concat_cols(Value a, Value b);
    Value row_scale(Value x, Value d);    // scale row i by d[i], d is [r,1]
    Value repeat_rows(Value x, std::size_t n);  // [1,c] -> [n,c]

    // Convenience: sum of squared entries, as a scalar node.
    Value sumsq(Value a) { return sum(mul(a, a)); }

    const Tensor& value(Value v) const;
    double scalar_value(Value v) const;

    // Loss must be [1,1]; fills gradients for every node.
    void backward(Value loss);

    const Tensor& grad(Value v) const;
    // Gradient of the last backward() w.r.t. a store parameter; zeros if
    // the parameter does not participate in the graph.
    Tensor grad_of_param(int param_id) const;

    ParamStore* store() const { return store_; }

private:
    enum class Op {
        Leaf, Const, Add, Sub, Mul, Scale, AddRow, MatMul, Transpose,
        Tanh, Sigmoid, Relu, Exp, Log, Clamp, Sum, SumCols,
        SliceCols, SliceRows, ConcatCols, RowScale, RepeatRows,
    };
    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        Tensor val;
        Tensor grad;
        double p0 = 0.0, p1 = 0.0;
        std::size_t i0 = 0, i1 = 0;
        int param_id = -1;
    };

    int push(Node n);
    const Tensor& val_of(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }

    std::vector<Node> nodes_;
    std::vector<int> param_leaf_;
    ParamStore* store_;
    bool ran_backward_ = false;
};

}  // namespace embtune
