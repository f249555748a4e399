#include "afhn/graph.hpp"

#include <algorithm>
#include <cmath>

namespace afhn {

namespace {

constexpr double kNormFloor = 1e-12;

// Stable softmax of a contiguous row, in place.
void softmax_row(const double* logits, std::size_t n, double* out) {
    double mx = logits[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
}

double logsumexp_row(const double* logits, std::size_t n) {
    double mx = logits[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(logits[i] - mx);
    return mx + std::log(sum);
}

}  // namespace

NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.op = OpKind::Leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    Node n;
    n.op = OpKind::MatMul;
    n.a = a;
    n.b = b;
    matmul_into(nodes_[a].value, nodes_[b].value, n.value);
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
    Node n;
    n.op = OpKind::Transpose;
    n.a = a;
    n.value = afhn::transpose(nodes_[a].value);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[b].value;
    if (!va.same_shape(vb))
        throw DimensionError("add " + va.shape_str() + " vs " + vb.shape_str());
    Node n;
    n.op = OpKind::Add;
    n.a = a;
    n.b = b;
    n.value = va;
    for (std::size_t i = 0; i < vb.size(); ++i) n.value[i] += vb[i];
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(n));
}

NodeId Graph::add_row_bcast(NodeId a, NodeId bias) {
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[bias].value;
    if (vb.rows() != 1 || vb.cols() != va.cols())
        throw DimensionError("add_row_bcast " + va.shape_str() + " vs " + vb.shape_str());
    Node n;
    n.op = OpKind::AddRowBcast;
    n.a = a;
    n.b = bias;
    n.value = va;
    for (std::size_t r = 0; r < va.rows(); ++r)
        for (std::size_t c = 0; c < va.cols(); ++c) n.value.at(r, c) += vb[c];
    n.requires_grad = nodes_[a].requires_grad || nodes_[bias].requires_grad;
    return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[b].value;
    if (!va.same_shape(vb))
        throw DimensionError("sub " + va.shape_str() + " vs " + vb.shape_str());
    Node n;
    n.op = OpKind::Sub;
    n.a = a;
    n.b = b;
    n.value = va;
    for (std::size_t i = 0; i < vb.size(); ++i) n.value[i] -= vb[i];
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[b].value;
    if (!va.same_shape(vb))
        throw DimensionError("mul " + va.shape_str() + " vs " + vb.shape_str());
    Node n;
    n.op = OpKind::Mul;
    n.a = a;
    n.b = b;
    n.value = va;
    for (std::size_t i = 0; i < vb.size(); ++i) n.value[i] *= vb[i];
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double c) {
    Node n;
    n.op = OpKind::Scale;
    n.a = a;
    n.scalar = c;
    n.value = nodes_[a].value;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= c;
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[b].value;
    if (va.rows() != vb.rows())
        throw DimensionError("concat_cols rows " + va.shape_str() + " vs " + vb.shape_str());
    Node n;
    n.op = OpKind::ConcatCols;
    n.a = a;
    n.b = b;
    n.value = Tensor(va.rows(), va.cols() + vb.cols());
    for (std::size_t r = 0; r < va.rows(); ++r) {
        for (std::size_t c = 0; c < va.cols(); ++c) n.value.at(r, c) = va.at(r, c);
        for (std::size_t c = 0; c < vb.cols(); ++c) n.value.at(r, va.cols() + c) = vb.at(r, c);
    }
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(n));
}

NodeId Graph::slice_cols(NodeId a, std::size_t offset, std::size_t len) {
    const Tensor& va = nodes_[a].value;
    if (offset + len > va.cols()) throw DimensionError("slice_cols out of range");
    Node n;
    n.op = OpKind::SliceCols;
    n.a = a;
    n.i0 = offset;
    n.i1 = len;
    n.value = Tensor(va.rows(), len);
    for (std::size_t r = 0; r < va.rows(); ++r)
        for (std::size_t c = 0; c < len; ++c) n.value.at(r, c) = va.at(r, offset + c);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
    Node n;
    n.op = OpKind::Relu;
    n.a = a;
    n.value = nodes_[a].value;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::max(0.0, n.value[i]);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::leaky_relu(NodeId a, double slope) {
    if (!(slope > 0.0 && slope < 1.0)) throw ValidationError("leaky_relu slope must be in (0,1)");
    Node n;
    n.op = OpKind::LeakyRelu;
    n.a = a;
    n.scalar = slope;
    n.value = nodes_[a].value;
    for (std::size_t i = 0; i < n.value.size(); ++i)
        if (n.value[i] <= 0.0) n.value[i] *= slope;
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::mean(NodeId a) {
    const Tensor& va = nodes_[a].value;
    if (va.empty()) throw DimensionError("mean of empty tensor");
    double s = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) s += va[i];
    Node n;
    n.op = OpKind::Mean;
    n.a = a;
    n.value = Tensor::scalar(s / static_cast<double>(va.size()));
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::l2norm(NodeId a) {
    Node n;
    n.op = OpKind::L2Norm;
    n.a = a;
    n.value = Tensor::scalar(afhn::l2_norm(nodes_[a].value));
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::cosine(NodeId a, NodeId b) {
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[b].value;
    if (va.size() != vb.size())
        throw DimensionError("cosine " + va.shape_str() + " vs " + vb.shape_str());
    const double na = afhn::l2_norm(va);
    const double nb = afhn::l2_norm(vb);
    if (na < kNormFloor || nb < kNormFloor)
        throw DegenerateVectorError("cosine of (near-)zero vector");
    Node n;
    n.op = OpKind::Cosine;
    n.a = a;
    n.b = b;
    n.value = Tensor::scalar(dot(va, vb) / (na * nb));
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(n));
}

NodeId Graph::softmax_xent(NodeId logits, int target) {
    const Tensor& v = nodes_[logits].value;
    if (target < 0 || static_cast<std::size_t>(target) >= v.size())
        throw IndexError("softmax_xent target " + std::to_string(target) + " out of range [0," +
                         std::to_string(v.size()) + ")");
    Node n;
    n.op = OpKind::SoftmaxXent;
    n.a = logits;
    n.target = target;
    n.value = Tensor::scalar(logsumexp_row(v.data(), v.size()) - v[target]);
    n.requires_grad = nodes_[logits].requires_grad;
    return push(std::move(n));
}

NodeId Graph::softmax_xent_rows(NodeId logits, std::vector<int> targets) {
    const Tensor& v = nodes_[logits].value;
    if (targets.size() != v.rows())
        throw DimensionError("softmax_xent_rows: " + std::to_string(targets.size()) +
                             " targets for " + std::to_string(v.rows()) + " rows");
    double total = 0.0;
    for (std::size_t r = 0; r < v.rows(); ++r) {
        const int t = targets[r];
        if (t < 0 || static_cast<std::size_t>(t) >= v.cols())
            throw IndexError("softmax_xent_rows target out of range at row " + std::to_string(r));
        const double* row = v.data() + r * v.cols();
        total += logsumexp_row(row, v.cols()) - row[t];
    }
    Node n;
    n.op = OpKind::SoftmaxXentRows;
    n.a = logits;
    n.targets = std::move(targets);
    n.value = Tensor::scalar(total / static_cast<double>(v.rows()));
    n.requires_grad = nodes_[logits].requires_grad;
    return push(std::move(n));
}

NodeId Graph::stack_scalars(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw DimensionError("stack_scalars of nothing");
    Node n;
    n.op = OpKind::StackScalars;
    n.extra = xs;
    n.value = Tensor(1, xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        n.value[i] = nodes_[xs[i]].value.item();
        n.requires_grad = n.requires_grad || nodes_[xs[i]].requires_grad;
    }
    return push(std::move(n));
}

NodeId Graph::recip_clamped(NodeId a, double eps) {
    if (!(eps > 0.0)) throw ValidationError("recip_clamped eps must be > 0");
    Node n;
    n.op = OpKind::RecipClamped;
    n.a = a;
    n.scalar = eps;
    n.value = Tensor::scalar(1.0 / std::max(nodes_[a].value.item(), eps));
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

void Graph::accumulate(NodeId id, const Tensor& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
    for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

void Graph::backward(NodeId output) {
    Node& out = nodes_[output];
    if (!out.value.is_scalar())
        throw ValidationError("backward requires a scalar output, got " + out.value.shape_str());
    for (Node& n : nodes_) n.grad = Tensor();
    if (!out.requires_grad) return;
    out.grad = Tensor::scalar(1.0);
    for (NodeId i = output; i >= 0; --i) {
        if (!nodes_[i].grad.empty()) backward_node(i);
    }
}

void Graph::backward_node(NodeId id) {
    const Node& n = nodes_[id];
    const Tensor& g = n.grad;
    switch (n.op) {
        case OpKind::Leaf:
            break;
        case OpKind::MatMul: {
            if (nodes_[n.a].requires_grad)
                accumulate(n.a, afhn::matmul(g, afhn::transpose(nodes_[n.b].value)));
            if (nodes_[n.b].requires_grad)
                accumulate(n.b, afhn::matmul(afhn::transpose(nodes_[n.a].value), g));
            break;
        }
        case OpKind::Transpose:
            accumulate(n.a, afhn::transpose(g));
            break;
        case OpKind::Add:
            accumulate(n.a, g);
            accumulate(n.b, g);
            break;
        case OpKind::AddRowBcast: {
            accumulate(n.a, g);
            if (nodes_[n.b].requires_grad) {
                Tensor gb(1, g.cols());
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g.at(r, c);
                accumulate(n.b, gb);
            }
            break;
        }
        case OpKind::Sub: {
            accumulate(n.a, g);
            if (nodes_[n.b].requires_grad) {
                Tensor gb = g;
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] = -gb[i];
                accumulate(n.b, gb);
            }
            break;
        }
        case OpKind::Mul: {
            if (nodes_[n.a].requires_grad) {
                Tensor ga = g;
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= nodes_[n.b].value[i];
                accumulate(n.a, ga);
            }
            if (nodes_[n.b].requires_grad) {
                Tensor gb = g;
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= nodes_[n.a].value[i];
                accumulate(n.b, gb);
            }
            break;
        }
        case OpKind::Scale: {
            Tensor ga = g;
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= n.scalar;
            accumulate(n.a, ga);
            break;
        }
        case OpKind::ConcatCols: {
            const std::size_t ca = nodes_[n.a].value.cols();
            const std::size_t cb = nodes_[n.b].value.cols();
            if (nodes_[n.a].requires_grad) {
                Tensor ga(g.rows(), ca);
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < ca; ++c) ga.at(r, c) = g.at(r, c);
                accumulate(n.a, ga);
            }
            if (nodes_[n.b].requires_grad) {
                Tensor gb(g.rows(), cb);
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < cb; ++c) gb.at(r, c) = g.at(r, ca + c);
                accumulate(n.b, gb);
            }
            break;
        }
        case OpKind::SliceCols: {
            if (nodes_[n.a].requires_grad) {
                Tensor ga(nodes_[n.a].value.rows(), nodes_[n.a].value.cols());
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < n.i1; ++c) ga.at(r, n.i0 + c) = g.at(r, c);
                accumulate(n.a, ga);
            }
            break;
        }
        case OpKind::Relu: {
            Tensor ga = g;
            const Tensor& x = nodes_[n.a].value;
            for (std::size_t i = 0; i < ga.size(); ++i)
                if (x[i] <= 0.0) ga[i] = 0.0;
            accumulate(n.a, ga);
            break;
        }
        case OpKind::LeakyRelu: {
            Tensor ga = g;
            const Tensor& x = nodes_[n.a].value;
            for (std::size_t i = 0; i < ga.size(); ++i)
                if (x[i] <= 0.0) ga[i] *= n.scalar;
            accumulate(n.a, ga);
            break;
        }
        case OpKind::Mean: {
            const Tensor& x = nodes_[n.a].value;
            Tensor ga(x.rows(), x.cols(), g.item() / static_cast<double>(x.size()));
            accumulate(n.a, ga);
            break;
        }
        case OpKind::L2Norm: {
            const Tensor& x = nodes_[n.a].value;
            const double norm = n.value.item();
            if (norm > kNormFloor) {
                Tensor ga = x;
                const double s = g.item() / norm;
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= s;
                accumulate(n.a, ga);
            }
            break;
        }
        case OpKind::Cosine: {
            const Tensor& va = nodes_[n.a].value;
            const Tensor& vb = nodes_[n.b].value;
            const double na = afhn::l2_norm(va);
            const double nb = afhn::l2_norm(vb);
            const double c = n.value.item();
            const double gs = g.item();
            if (nodes_[n.a].requires_grad) {
                Tensor ga(va.rows(), va.cols());
                for (std::size_t i = 0; i < va.size(); ++i)
                    ga[i] = gs * (vb[i] / (na * nb) - c * va[i] / (na * na));
                accumulate(n.a, ga);
            }
            if (nodes_[n.b].requires_grad) {
                Tensor gb(vb.rows(), vb.cols());
                for (std::size_t i = 0; i < vb.size(); ++i)
                    gb[i] = gs * (va[i] / (na * nb) - c * vb[i] / (nb * nb));
                accumulate(n.b, gb);
            }
            break;
        }
        case OpKind::SoftmaxXent: {
            const Tensor& v = nodes_[n.a].value;
            Tensor ga(v.rows(), v.cols());
            softmax_row(v.data(), v.size(), ga.data());
            ga[static_cast<std::size_t>(n.target)] -= 1.0;
            const double gs = g.item();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= gs;
            accumulate(n.a, ga);
            break;
        }
        case OpKind::SoftmaxXentRows: {
            const Tensor& v = nodes_[n.a].value;
            Tensor ga(v.rows(), v.cols());
            const double gs = g.item() / static_cast<double>(v.rows());
            for (std::size_t r = 0; r < v.rows(); ++r) {
                double* grow = ga.data() + r * v.cols();
                softmax_row(v.data() + r * v.cols(), v.cols(), grow);
                grow[static_cast<std::size_t>(n.targets[r])] -= 1.0;
                for (std::size_t c = 0; c < v.cols(); ++c) grow[c] *= gs;
            }
            accumulate(n.a, ga);
            break;
        }
        case OpKind::StackScalars: {
            for (std::size_t i = 0; i < n.extra.size(); ++i)
                accumulate(n.extra[i], Tensor::scalar(g[i]));
            break;
        }
        case OpKind::RecipClamped: {
            const double x = nodes_[n.a].value.item();
            if (x > n.scalar)
                accumulate(n.a, Tensor::scalar(-g.item() / (x * x)));
            break;
        }
    }
}

NodeId Graph::input_gradient(NodeId output, NodeId wrt) {
    if (!nodes_[output].value.is_scalar())
        throw ValidationError("input_gradient requires a scalar output");
    // reach[i]: wrt is an ancestor of node i.
    std::vector<char> reach(nodes_.size(), 0);
    reach[wrt] = 1;
    for (NodeId i = wrt + 1; i <= output; ++i) {
        const Node& n = nodes_[i];
        bool r = (n.a >= 0 && reach[n.a]) || (n.b >= 0 && reach[n.b]);
        for (NodeId e : n.extra) r = r || reach[e];
        reach[i] = r ? 1 : 0;
    }
    if (!reach[output])
        throw ValidationError("input_gradient: output does not depend on wrt");

    std::vector<NodeId> adj(nodes_.size(), -1);
    auto contribute = [&](NodeId target, NodeId c) {
        adj[target] = (adj[target] < 0) ? c : add(adj[target], c);
    };
    {
        const Tensor& ov = nodes_[output].value;
        adj[output] = constant(Tensor(ov.rows(), ov.cols(), 1.0));
    }
    for (NodeId i = output; i > wrt; --i) {
        if (adj[i] < 0 || !reach[i]) continue;
        const Node n = nodes_[i];  // copy: contribute() may reallocate nodes_
        const NodeId g = adj[i];
        switch (n.op) {
            case OpKind::Leaf:
                break;
            case OpKind::MatMul:
                if (reach[n.a]) contribute(n.a, matmul(g, transpose(n.b)));
                if (reach[n.b]) contribute(n.b, matmul(transpose(n.a), g));
                break;
            case OpKind::Transpose:
                if (reach[n.a]) contribute(n.a, transpose(g));
                break;
            case OpKind::Add:
                if (reach[n.a]) contribute(n.a, g);
                if (reach[n.b]) contribute(n.b, g);
                break;
            case OpKind::AddRowBcast:
                if (reach[n.a]) contribute(n.a, g);
                if (reach[n.b])
                    throw CapabilityError("input_gradient: broadcast bias on differentiation path");
                break;
            case OpKind::Sub:
                if (reach[n.a]) contribute(n.a, g);
                if (reach[n.b]) contribute(n.b, scale(g, -1.0));
                break;
            case OpKind::Mul:
                if (reach[n.a]) contribute(n.a, mul(g, n.b));
                if (reach[n.b]) contribute(n.b, mul(g, n.a));
                break;
            case OpKind::Scale:
                if (reach[n.a]) contribute(n.a, scale(g, n.scalar));
                break;
            case OpKind::ConcatCols: {
                const std::size_t ca = nodes_[n.a].value.cols();
                const std::size_t cb = nodes_[n.b].value.cols();
                if (reach[n.a]) contribute(n.a, slice_cols(g, 0, ca));
                if (reach[n.b]) contribute(n.b, slice_cols(g, ca, cb));
                break;
            }
            case OpKind::Relu:
            case OpKind::LeakyRelu: {
                // Activation mask is a constant of the input a.e.
                const Tensor& x = nodes_[n.a].value;
                Tensor mask(x.rows(), x.cols());
                const double neg = (n.op == OpKind::Relu) ? 0.0 : n.scalar;
                for (std::size_t k = 0; k < x.size(); ++k) mask[k] = x[k] > 0.0 ? 1.0 : neg;
                if (reach[n.a]) contribute(n.a, mul(g, constant(std::move(mask))));
                break;
            }
            default:
                throw CapabilityError("input_gradient: no graph-level adjoint rule for op on path");
        }
    }
    if (adj[wrt] < 0)
        throw ValidationError("input_gradient: no adjoint reached wrt");
    return adj[wrt];
}

}  // namespace afhn
