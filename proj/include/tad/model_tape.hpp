#ifndef TAD_MODEL_TAPE_HPP
#define TAD_MODEL_TAPE_HPP

#include <vector>

#include "tad/autodiff.hpp"
#include "tad/model.hpp"

namespace tad {

// Tape-level counterparts of the model forward/backward passes. Blocks follow
// the flat parameter layout: linear {W (CxD), b (1xC)}, mlp {W1 (HxD),
// b1 (1xH), W2 (CxH), b2 (1xC)}; biases travel as row matrices.

std::vector<Eigen::MatrixXd> split_blocks(const ModelShape& shape, const Eigen::VectorXd& flat);
Eigen::VectorXd pack_blocks(const ModelShape& shape, const std::vector<Eigen::MatrixXd>& blocks);

// Splits a flat (P x 1) parameter node into layout blocks via tape ops.
std::vector<ad::NodeId> split_param_node(ad::Tape& tape, const ModelShape& shape, ad::NodeId flat);

// Batched class probabilities for x (N x D) under the given parameter blocks.
ad::NodeId tape_probs(ad::Tape& tape, const ModelShape& shape, const std::vector<ad::NodeId>& blocks,
                      ad::NodeId x);

// Gradient blocks of the mean cross-entropy over the batch, written as
// analytic tape expressions so they stay differentiable w.r.t. x.
std::vector<ad::NodeId> tape_mean_ce_grads(ad::Tape& tape, const ModelShape& shape,
                                           const std::vector<ad::NodeId>& blocks, ad::NodeId x,
                                           ad::NodeId onehot);

// Scalar objective ce(forward(params, x), label) with params as the tape input.
ad::NodeId tape_ce_scalar(ad::Tape& tape, const ModelShape& shape, ad::NodeId flat_params,
                          const Eigen::VectorXd& x, int label);

Eigen::MatrixXd one_hot(const std::vector<int>& labels, int num_classes);

}  // namespace tad

#endif  // TAD_MODEL_TAPE_HPP
