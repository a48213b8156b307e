#include "xrs/optimizer.hpp"

#include "xrs/error.hpp"

namespace xrs {

template <typename T>
NesterovSgd<T>::NesterovSgd(std::vector<nn::Parameter<T>*> params, NesterovConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config.learning_rate >= 0)) throw ConfigError("optimizer: learning rate must be >= 0");
  if (!(config.momentum >= 0 && config.momentum < 1)) throw ConfigError("optimizer: momentum must be in [0,1)");
  velocity_.reserve(params_.size());
  anchor_.reserve(params_.size());
  for (auto* p : params_) {
    velocity_.emplace_back(p->value.size(), 0.0);
    anchor_.emplace_back(p->value.size());
  }
}

template <typename T>
void NesterovSgd<T>::lookahead() {
  if (in_lookahead_) throw std::logic_error("NesterovSgd::lookahead called twice without step");
  const double mu = config_.momentum;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& value = params_[k]->value;
    auto& anchor = anchor_[k];
    const auto& v = velocity_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      anchor[i] = value[i];
      value[i] = static_cast<T>(value[i] + mu * v[i]);
    }
  }
  in_lookahead_ = true;
}

template <typename T>
void NesterovSgd<T>::step() {
  if (!in_lookahead_) throw std::logic_error("NesterovSgd::step requires a preceding lookahead");
  const double mu = config_.momentum;
  const double lr = config_.learning_rate;
  const double wd = config_.weight_decay;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& value = params_[k]->value;
    const auto& grad = params_[k]->grad;
    const auto& anchor = anchor_[k];
    auto& v = velocity_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] + wd * value[i];
      v[i] = mu * v[i] - lr * g;
      value[i] = static_cast<T>(anchor[i] + v[i]);
    }
  }
  in_lookahead_ = false;
}

template <typename T>
void NesterovSgd<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

template class NesterovSgd<float>;
template class NesterovSgd<double>;

}  // namespace xrs
