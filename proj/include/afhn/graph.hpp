#pragma once

#include <cstdint>
#include <vector>

#include "afhn/tensor.hpp"

namespace afhn {

using NodeId = std::int32_t;

enum class OpKind {
    Leaf,          // parameter or constant input
    MatMul,        // (m x k)(k x n)
    Transpose,
    Add,           // same shape
    AddRowBcast,   // (m x n) + (1 x n)
    Sub,
    Mul,           // elementwise
    Scale,         // * constant scalar
    ConcatCols,
    SliceCols,
    Relu,
    LeakyRelu,
    Mean,          // all elements -> scalar
    L2Norm,        // -> scalar
    Cosine,        // two vectors -> scalar
    SoftmaxXent,   // logits vector + target -> scalar
    SoftmaxXentRows,  // (m x n) logits + m targets -> mean scalar
    StackScalars,  // n scalar nodes -> 1 x n
    RecipClamped,  // 1 / max(x, eps), scalar
};

// Eager tape: each op evaluates when recorded. Single-threaded per instance.
class Graph {
  public:
    NodeId leaf(Tensor value, bool requires_grad);
    NodeId constant(Tensor value) { return leaf(std::move(value), false); }
    NodeId constant_scalar(double v) { return leaf(Tensor::scalar(v), false); }

    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId add(NodeId a, NodeId b);
    NodeId add_row_bcast(NodeId a, NodeId bias);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId concat_cols(NodeId a, NodeId b);
    NodeId slice_cols(NodeId a, std::size_t offset, std::size_t len);
    NodeId relu(NodeId a);
    NodeId leaky_relu(NodeId a, double slope);
    NodeId mean(NodeId a);
    NodeId l2norm(NodeId a);
    NodeId cosine(NodeId a, NodeId b);
    NodeId softmax_xent(NodeId logits, int target);
    NodeId softmax_xent_rows(NodeId logits, std::vector<int> targets);
    NodeId stack_scalars(const std::vector<NodeId>& xs);
    NodeId recip_clamped(NodeId a, double eps);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
    bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
    std::size_t num_nodes() const { return nodes_.size(); }

    // Reverse accumulation from a scalar output, seed 1.0. Grads of earlier
    // backward calls are cleared first.
    void backward(NodeId output);

    // Builds graph nodes computing d(output)/d(wrt), so the result can itself
    // be differentiated (gradient penalty double backprop). Only ops with a
    // graph-level adjoint rule may appear on the path.
    NodeId input_gradient(NodeId output, NodeId wrt);

  private:
    struct Node {
        OpKind op;
        NodeId a = -1;
        NodeId b = -1;
        Tensor value;
        Tensor grad;           // allocated lazily in backward
        bool requires_grad = false;
        double scalar = 0.0;   // Scale factor / LeakyRelu slope / RecipClamped eps
        std::size_t i0 = 0, i1 = 0;  // SliceCols offset+len
        int target = -1;             // SoftmaxXent
        std::vector<int> targets;    // SoftmaxXentRows
        std::vector<NodeId> extra;   // StackScalars inputs beyond a, b
    };

    NodeId push(Node n);
    void accumulate(NodeId id, const Tensor& g);
    void backward_node(NodeId id);

    std::vector<Node> nodes_;
};

}  // namespace afhn
