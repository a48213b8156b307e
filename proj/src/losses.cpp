#include "xrs/losses.hpp"

#include <algorithm>
#include <cmath>

#include "xrs/error.hpp"

namespace xrs {

namespace {

double clamp_probability(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

double bce_term(double p, double t) {
  const double q = clamp_probability(p);
  return -(t * std::log(q) + (1.0 - t) * std::log(1.0 - q));
}

double sigmoid_d(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool clamped(double p) { return p < kProbabilityClamp || p > 1.0 - kProbabilityClamp; }

}  // namespace

template <typename T>
double bce_multilabel_loss(const Tensor<T>& probabilities, const Tensor<T>& targets) {
  if (probabilities.shape() != targets.shape()) {
    throw ShapeError("bce_multilabel_loss: probabilities " + shape_string(probabilities.shape()) +
                     " vs targets " + shape_string(targets.shape()));
  }
  if (probabilities.empty()) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) sum += bce_term(probabilities[i], targets[i]);
  return sum / static_cast<double>(probabilities.size());
}

double mixup_loss(double loss_original, double loss_shuffled, double lambda) {
  return lambda * loss_original + (1.0 - lambda) * loss_shuffled;
}

template <typename T>
LossResult<T> plain_loss(const Tensor<T>& logits5, const Tensor<T>& targets5) {
  if (logits5.shape() != targets5.shape()) {
    throw ShapeError("plain_loss: logits " + shape_string(logits5.shape()) + " vs targets " +
                     shape_string(targets5.shape()));
  }
  LossResult<T> r;
  r.grad_logits = Tensor<T>(logits5.shape());
  const double count = static_cast<double>(logits5.size());
  double sum = 0;
  for (std::size_t i = 0; i < logits5.size(); ++i) {
    const double p = sigmoid_d(logits5[i]);
    const double t = targets5[i];
    sum += bce_term(p, t);
    r.grad_logits[i] = clamped(p) ? T{0} : static_cast<T>((p - t) / count);
  }
  r.loss = sum / count;
  return r;
}

template <typename T>
LossResult<T> rescoring_loss(const Tensor<T>& logits6, const Tensor<T>& targets5, RescoringTarget target) {
  if (logits6.rank() != 2 || logits6.dim(1) != 6 || targets5.rank() != 2 || targets5.dim(1) != 5 ||
      logits6.dim(0) != targets5.dim(0)) {
    throw ShapeError("rescoring_loss: logits " + shape_string(logits6.shape()) + " vs targets " +
                     shape_string(targets5.shape()));
  }
  const int n = logits6.dim(0);
  LossResult<T> r;
  r.grad_logits = Tensor<T>(logits6.shape());
  if (n == 0) return r;

  std::vector<double> objectness_target(static_cast<std::size_t>(n));
  int positives = 0;
  for (int i = 0; i < n; ++i) {
    bool any = false;
    for (int c = 0; c < 5; ++c) any = any || targets5.at(i, c) > T(0.5);
    objectness_target[static_cast<std::size_t>(i)] = any ? 1.0 : 0.0;
    positives += any ? 1 : 0;
  }

  double obj_sum = 0;
  for (int i = 0; i < n; ++i) {
    const double p = sigmoid_d(logits6.at(i, 5));
    const double t = objectness_target[static_cast<std::size_t>(i)];
    obj_sum += bce_term(p, t);
    r.grad_logits.at(i, 5) = clamped(p) ? T{0} : static_cast<T>((p - t) / n);
  }
  r.objectness_term = obj_sum / n;

  double cond_sum = 0;
  if (target == RescoringTarget::masked) {
    if (positives > 0) {
      const double count = 5.0 * positives;
      for (int i = 0; i < n; ++i) {
        if (objectness_target[static_cast<std::size_t>(i)] == 0.0) continue;
        for (int c = 0; c < 5; ++c) {
          const double p = sigmoid_d(logits6.at(i, c));
          const double t = targets5.at(i, c);
          cond_sum += bce_term(p, t);
          r.grad_logits.at(i, c) = clamped(p) ? T{0} : static_cast<T>((p - t) / count);
        }
      }
      r.conditional_term = cond_sum / count;
    }
  } else {
    const double count = 5.0 * n;
    for (int i = 0; i < n; ++i) {
      const double po = sigmoid_d(logits6.at(i, 5));
      double grad_obj = 0;
      for (int c = 0; c < 5; ++c) {
        const double pc = sigmoid_d(logits6.at(i, c));
        const double p = pc * po;
        const double t = targets5.at(i, c);
        cond_sum += bce_term(p, t);
        if (clamped(p)) continue;
        // dL/dp = (p - t) / (p (1 - p)); dp/dl_c = p (1 - pc); dp/dl_o = p (1 - po)
        const double dldp_p = (p - t) / (1.0 - p);
        r.grad_logits.at(i, c) = static_cast<T>(dldp_p * (1.0 - pc) / count);
        grad_obj += dldp_p * (1.0 - po) / count;
      }
      r.grad_logits.at(i, 5) += static_cast<T>(grad_obj);
    }
    r.conditional_term = cond_sum / count;
  }
  r.loss = r.objectness_term + r.conditional_term;
  return r;
}

template <typename T>
LossResult<T> head_loss(const Tensor<T>& logits, const Tensor<T>& targets5, HeadMode mode,
                        RescoringTarget target) {
  return mode == HeadMode::plain5 ? plain_loss(logits, targets5) : rescoring_loss(logits, targets5, target);
}

template <typename T>
Tensor<T> label_targets(const std::vector<LabelVector>& labels) {
  Tensor<T> t({static_cast<int>(labels.size()), kNumClasses});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int c = 0; c < kNumClasses; ++c) t.at(static_cast<int>(i), c) = labels[i][c] ? T{1} : T{0};
  }
  return t;
}

#define XRS_INSTANTIATE(T)                                                                        \
  template double bce_multilabel_loss<T>(const Tensor<T>&, const Tensor<T>&);                      \
  template LossResult<T> plain_loss<T>(const Tensor<T>&, const Tensor<T>&);                        \
  template LossResult<T> rescoring_loss<T>(const Tensor<T>&, const Tensor<T>&, RescoringTarget);   \
  template LossResult<T> head_loss<T>(const Tensor<T>&, const Tensor<T>&, HeadMode, RescoringTarget); \
  template Tensor<T> label_targets<T>(const std::vector<LabelVector>&);

XRS_INSTANTIATE(float)
XRS_INSTANTIATE(double)

#undef XRS_INSTANTIATE

}  // namespace xrs
