#pragma once

#include <random>
#include <vector>

#include "afhn/graph.hpp"
#include "afhn/models.hpp"
#include "afhn/tensor.hpp"

namespace afhn {

// Per-step scalars, logged to the training CSV.
struct LossBreakdown {
    double d_loss = 0.0;
    double g_adv = 0.0;
    double l_cr = 0.0;
    double l_ar = 0.0;
    double total_g = 0.0;

    bool all_finite() const {
        return std::isfinite(d_loss) && std::isfinite(g_adv) && std::isfinite(l_cr) &&
               std::isfinite(l_ar) && std::isfinite(total_g);
    }
};

// (||grad_s_hat D(s_hat, cond)||_2 - 1)^2 averaged over the batch, where
// s_hat = a*real + (1-a)*fake with a ~ U(0,1) per sample. The returned node
// stays differentiable w.r.t. the critic parameters (double backprop); the
// conditioning prototype is held constant.
NodeId gradient_penalty(Graph& g, const ParamNodes& d_params, const std::vector<Tensor>& fakes,
                        const std::vector<Tensor>& reals, const std::vector<Tensor>& conds,
                        double leaky_slope, std::mt19937_64& rng);

// Sum over the two noise sets of E[D(fake)] - E[D(real)] + lambda*GP.
// The critic minimizes this; fakes enter detached.
NodeId critic_loss(Graph& g, const ParamNodes& d_params, const std::vector<Tensor>& fakes1,
                   const std::vector<Tensor>& fakes2, const std::vector<Tensor>& reals,
                   const std::vector<Tensor>& conds, double lambda, double leaky_slope,
                   std::mt19937_64& rng);

// -sum_i E[D(fake_i, cond)]; fakes are live generator outputs, the critic's
// parameters enter as constants.
NodeId generator_adv_loss(Graph& g, const ParamNodes& d_params_const,
                          const std::vector<NodeId>& fakes1, const std::vector<NodeId>& fakes2,
                          const std::vector<Tensor>& conds, double leaky_slope);

// Cosine-softmax cross-entropy of queries against the per-class synthesized
// features, averaged over queries and both noise sets.
NodeId classification_regularizer(Graph& g, const std::vector<NodeId>& fakes1,
                                  const std::vector<NodeId>& fakes2, const Tensor& queries,
                                  const std::vector<int>& query_labels);

// Batch mean of (1 - cos(fake1, fake2)) / max(1 - cos(z1, z2), eps).
NodeId anti_collapse(Graph& g, const std::vector<NodeId>& fakes1,
                     const std::vector<NodeId>& fakes2, const std::vector<Tensor>& z1,
                     const std::vector<Tensor>& z2, double eps);

// g_adv + alpha*l_cr + beta / max(l_ar, eps).
NodeId total_generator_loss(Graph& g, NodeId g_adv, NodeId l_cr, NodeId l_ar, double alpha,
                            double beta, double eps);

}  // namespace afhn
