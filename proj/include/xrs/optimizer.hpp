#pragma once

#include <vector>

#include "xrs/nn.hpp"

namespace xrs {

struct NesterovConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

/// SGD with Nesterov momentum in lookahead form:
///   v <- mu * v - lr * grad f(theta + mu * v)
///   theta <- theta + v
/// Call lookahead() before the forward/backward pass that produces the gradient,
/// then step(). Between the two calls the parameters hold theta + mu * v.
template <typename T>
class NesterovSgd {
 public:
  NesterovSgd(std::vector<nn::Parameter<T>*> params, NesterovConfig config);

  void lookahead();
  void step();
  void zero_grad();

  const NesterovConfig& config() const { return config_; }
  const std::vector<std::vector<double>>& velocity() const { return velocity_; }

 private:
  std::vector<nn::Parameter<T>*> params_;
  NesterovConfig config_;
  std::vector<std::vector<double>> velocity_;
  std::vector<std::vector<T>> anchor_;  // theta while the lookahead point is loaded
  bool in_lookahead_ = false;
};

}  // namespace xrs
