#include "gtcausin/optim.hpp"

#include <cmath>

#include "gtcausin/error.hpp"

namespace gtc {

OptimState make_optim_state(double base_lr, double decay_gamma, std::size_t decay_start_step,
                            std::size_t decay_step_size) {
	require(base_lr > 0.0, "learning rate must be positive");
	require(decay_gamma > 0.0 && decay_gamma <= 1.0, "decay gamma must be in (0, 1]");
	require(decay_start_step > 0 && decay_step_size > 0, "decay start and step size must be positive");
	OptimState s;
	s.base_lr = base_lr;
	s.decay_gamma = decay_gamma;
	s.decay_start_step = decay_start_step;
	s.decay_step_size = decay_step_size;
	return s;
}

double lr_at(const OptimState& state, std::size_t step) {
	if (step < state.decay_start_step) {
		return state.base_lr;
	}
	const std::size_t decays = 1 + (step - state.decay_start_step) / state.decay_step_size;
	return state.base_lr * std::pow(state.decay_gamma, static_cast<double>(decays));
}

void adam_step(ParamStore& params, OptimState& state) {
	++state.step_count;
	const double lr = lr_at(state, state.schedule_step);
	const double t = static_cast<double>(state.step_count);
	const double c1 = 1.0 - std::pow(state.beta1, t);
	const double c2 = 1.0 - std::pow(state.beta2, t);
	for (auto& [name, e] : params.entries()) {
		Tensor& m = state.first_moment.try_emplace(name, e.value.shape()).first->second;
		Tensor& v = state.second_moment.try_emplace(name, e.value.shape()).first->second;
		require(m.shape() == e.value.shape() && v.shape() == e.value.shape(),
		        "optimizer moment shape mismatch for '" + name + "'");
		auto p = e.value.data();
		const auto g = e.grad.data();
		for (std::size_t i = 0; i < p.size(); ++i) {
			m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
			v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
			const double mhat = m[i] / c1;
			const double vhat = v[i] / c2;
			p[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
		}
	}
}

} // namespace gtc
