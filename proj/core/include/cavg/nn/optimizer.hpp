#pragma once

#include <cavg/nn/tape.hpp>

#include <vector>

namespace cavg::nn {

/// Adam over a ParameterSet; moments are kept per parameter in set order.
class Adam {
public:
	double beta1 = 0.9;
	double beta2 = 0.999;
	double eps = 1e-8;

	Adam() = default;
	explicit Adam(const ParameterSet& params);

	void step(ParameterSet& params, double learning_rate);

	long steps() const noexcept { return t_; }
	const std::vector<Matrix>& first_moments() const noexcept { return m_; }
	const std::vector<Matrix>& second_moments() const noexcept { return v_; }
	void restore(long steps, std::vector<Matrix> m, std::vector<Matrix> v);

private:
	long t_ = 0;
	std::vector<Matrix> m_;
	std::vector<Matrix> v_;
};

} // namespace cavg::nn
