#include <cmath>

#include "lunet/error.hpp"
#include "lunet/training.hpp"

namespace lunet::training {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("ADAM betas must lie in [0, 1)");
  if (!(epsilon > 0)) throw ConfigError("epsilon must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
}

void adam_step(std::span<Parameter* const> params, AdamState& state, const TrainConfig& cfg) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (Parameter* p : params) {
    auto value = p->value.data();
    auto grad = p->value.grad();
    if (grad.size() != value.size()) throw ShapeError("adam_step: parameter has no gradient buffer");
    if (p->first_moment.shape() != p->value.shape()) {
      p->first_moment = Tensor(p->value.shape(), 0.0);
      p->second_moment = Tensor(p->value.shape(), 0.0);
    }
    auto m = p->first_moment.data();
    auto v = p->second_moment.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      value[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

}  // namespace lunet::training
