#pragma once

#include <vector>

#include "xrs/labels.hpp"
#include "xrs/model.hpp"
#include "xrs/tensor.hpp"

namespace xrs {

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy over all N*K terms; probabilities are clamped to
/// [1e-7, 1 - 1e-7].
template <typename T>
double bce_multilabel_loss(const Tensor<T>& probabilities, const Tensor<T>& targets);

/// lambda * original + (1 - lambda) * shuffled.
double mixup_loss(double loss_original, double loss_shuffled, double lambda);

/// How the conditional class outputs of the rescoring head are supervised.
enum class RescoringTarget {
  masked,   // BCE on sigmoid(logit_i) over positive images only
  product,  // BCE on sigmoid(logit_i) * sigmoid(logit_obj) over all images
};

template <typename T>
struct LossResult {
  double loss = 0;
  double objectness_term = 0;   // rescoring head only
  double conditional_term = 0;  // rescoring head only
  Tensor<T> grad_logits;
};

/// Plain five-way head: BCE over sigmoid(logits) against all five flags.
template <typename T>
LossResult<T> plain_loss(const Tensor<T>& logits5, const Tensor<T>& targets5);

/// BCE(sigmoid(objectness), OR(targets)) over all samples plus the conditional
/// term, each mean-reduced, summed with equal weight.
template <typename T>
LossResult<T> rescoring_loss(const Tensor<T>& logits6, const Tensor<T>& targets5,
                             RescoringTarget target = RescoringTarget::masked);

template <typename T>
LossResult<T> head_loss(const Tensor<T>& logits, const Tensor<T>& targets5, HeadMode mode,
                        RescoringTarget target = RescoringTarget::masked);

template <typename T>
Tensor<T> label_targets(const std::vector<LabelVector>& labels);

}  // namespace xrs
