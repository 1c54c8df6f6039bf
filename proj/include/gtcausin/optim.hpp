#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "gtcausin/params.hpp"

namespace gtc {

struct OptimState {
	// Adam updates applied so far (drives bias correction).
	std::size_t step_count = 0;
	// Index passed to lr_at; the trainer advances it once per epoch.
	std::size_t schedule_step = 0;

	double base_lr = 1e-3;
	double decay_gamma = 0.5;
	std::size_t decay_start_step = 180;
	std::size_t decay_step_size = 50;

	double beta1 = 0.9;
	double beta2 = 0.999;
	double epsilon = 1e-8;

	std::map<std::string, Tensor> first_moment;
	std::map<std::string, Tensor> second_moment;
};

OptimState make_optim_state(double base_lr, double decay_gamma, std::size_t decay_start_step,
                            std::size_t decay_step_size);

// Step decay: base_lr until decay_start_step, then multiplied by gamma at
// decay_start_step and again every decay_step_size steps.
double lr_at(const OptimState& state, std::size_t step);

// One bias-corrected Adam update of every parameter using its current grad.
void adam_step(ParamStore& params, OptimState& state);

} // namespace gtc
