#include "afhn/loss.hpp"

#include "afhn/errors.hpp"

namespace afhn {

NodeId gradient_penalty(Graph& g, const ParamNodes& d_params, const std::vector<Tensor>& fakes,
                        const std::vector<Tensor>& reals, const std::vector<Tensor>& conds,
                        double leaky_slope, std::mt19937_64& rng) {
    if (fakes.size() != reals.size() || fakes.size() != conds.size() || fakes.empty())
        throw DimensionError("gradient_penalty: batch size mismatch");
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const NodeId one = g.constant_scalar(1.0);
    std::vector<NodeId> penalties;
    for (std::size_t i = 0; i < fakes.size(); ++i) {
        if (!fakes[i].same_shape(reals[i]))
            throw DimensionError("gradient_penalty: fake/real shape mismatch");
        const double a = uni(rng);
        Tensor interp = reals[i];
        for (std::size_t j = 0; j < interp.size(); ++j)
            interp[j] = a * reals[i][j] + (1.0 - a) * fakes[i][j];
        const NodeId s_hat = g.constant(std::move(interp));
        const NodeId cond = g.constant(conds[i]);
        const NodeId d_out = discriminator_forward(g, s_hat, cond, d_params, leaky_slope);
        const NodeId grad = g.input_gradient(d_out, s_hat);
        const NodeId dev = g.sub(g.l2norm(grad), one);
        penalties.push_back(g.mul(dev, dev));
    }
    return g.mean(g.stack_scalars(penalties));
}

NodeId critic_loss(Graph& g, const ParamNodes& d_params, const std::vector<Tensor>& fakes1,
                   const std::vector<Tensor>& fakes2, const std::vector<Tensor>& reals,
                   const std::vector<Tensor>& conds, double lambda, double leaky_slope,
                   std::mt19937_64& rng) {
    if (fakes1.size() != reals.size() || fakes2.size() != reals.size() ||
        conds.size() != reals.size() || reals.empty())
        throw DimensionError("critic_loss: batch size mismatch");
    std::vector<NodeId> d_reals;
    std::vector<NodeId> cond_nodes;
    for (std::size_t i = 0; i < reals.size(); ++i) {
        cond_nodes.push_back(g.constant(conds[i]));
        d_reals.push_back(
            discriminator_forward(g, g.constant(reals[i]), cond_nodes[i], d_params, leaky_slope));
    }
    const NodeId mean_real = g.mean(g.stack_scalars(d_reals));
    NodeId total = g.constant_scalar(0.0);
    for (const auto* fakes : {&fakes1, &fakes2}) {
        std::vector<NodeId> d_fakes;
        for (std::size_t i = 0; i < fakes->size(); ++i) {
            d_fakes.push_back(discriminator_forward(g, g.constant((*fakes)[i]), cond_nodes[i],
                                                    d_params, leaky_slope));
        }
        NodeId term = g.sub(g.mean(g.stack_scalars(d_fakes)), mean_real);
        if (lambda != 0.0) {
            const NodeId gp = gradient_penalty(g, d_params, *fakes, reals, conds, leaky_slope, rng);
            term = g.add(term, g.scale(gp, lambda));
        }
        total = g.add(total, term);
    }
    return total;
}

NodeId generator_adv_loss(Graph& g, const ParamNodes& d_params_const,
                          const std::vector<NodeId>& fakes1, const std::vector<NodeId>& fakes2,
                          const std::vector<Tensor>& conds, double leaky_slope) {
    if (fakes1.size() != conds.size() || fakes2.size() != conds.size() || conds.empty())
        throw DimensionError("generator_adv_loss: batch size mismatch");
    std::vector<NodeId> scores;
    for (const auto* fakes : {&fakes1, &fakes2}) {
        for (std::size_t i = 0; i < fakes->size(); ++i) {
            scores.push_back(discriminator_forward(g, (*fakes)[i], g.constant(conds[i]),
                                                   d_params_const, leaky_slope));
        }
    }
    // -sum_i mean_j D = -2 * mean over both noise sets
    return g.scale(g.mean(g.stack_scalars(scores)), -2.0);
}

NodeId classification_regularizer(Graph& g, const std::vector<NodeId>& fakes1,
                                  const std::vector<NodeId>& fakes2, const Tensor& queries,
                                  const std::vector<int>& query_labels) {
    const std::size_t n_way = fakes1.size();
    if (fakes2.size() != n_way || n_way == 0)
        throw DimensionError("classification_regularizer: need one fake per class per noise set");
    if (query_labels.size() != queries.rows())
        throw DimensionError("classification_regularizer: query label count mismatch");
    std::vector<NodeId> losses;
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        const NodeId qnode = g.constant(queries.row_copy(q));
        for (const auto* fakes : {&fakes1, &fakes2}) {
            std::vector<NodeId> logits;
            for (std::size_t j = 0; j < n_way; ++j) logits.push_back(g.cosine((*fakes)[j], qnode));
            losses.push_back(g.softmax_xent(g.stack_scalars(logits), query_labels[q]));
        }
    }
    return g.mean(g.stack_scalars(losses));
}

NodeId anti_collapse(Graph& g, const std::vector<NodeId>& fakes1,
                     const std::vector<NodeId>& fakes2, const std::vector<Tensor>& z1,
                     const std::vector<Tensor>& z2, double eps) {
    const std::size_t n = fakes1.size();
    if (fakes2.size() != n || z1.size() != n || z2.size() != n || n == 0)
        throw DimensionError("anti_collapse: batch size mismatch");
    if (!(eps > 0.0)) throw ValidationError("anti_collapse: eps must be > 0");
    const NodeId one = g.constant_scalar(1.0);
    std::vector<NodeId> terms;
    for (std::size_t j = 0; j < n; ++j) {
        const double cz = dot(z1[j], z2[j]) / (l2_norm(z1[j]) * l2_norm(z2[j]));
        const double denom = std::max(1.0 - cz, eps);
        const NodeId num = g.sub(one, g.cosine(fakes1[j], fakes2[j]));
        terms.push_back(g.scale(num, 1.0 / denom));
    }
    return g.mean(g.stack_scalars(terms));
}

NodeId total_generator_loss(Graph& g, NodeId g_adv, NodeId l_cr, NodeId l_ar, double alpha,
                            double beta, double eps) {
    NodeId total = g_adv;
    if (alpha != 0.0) total = g.add(total, g.scale(l_cr, alpha));
    if (beta != 0.0) total = g.add(total, g.scale(g.recip_clamped(l_ar, eps), beta));
    return total;
}

}  // namespace afhn
