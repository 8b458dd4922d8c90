#include <cavg/nn/optimizer.hpp>

#include <cavg/common/error.hpp>

#include <cmath>

namespace cavg::nn {

Adam::Adam(const ParameterSet& params) {
	for (const auto& p : params) {
		m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
		v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
	}
}

void Adam::step(ParameterSet& params, double learning_rate) {
	if (params.size() != m_.size()) {
		fail(ErrorCode::ShapeMismatch, "optimizer state does not match the parameter set");
	}
	++t_;
	const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
	const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
	for (std::size_t i = 0; i < params.size(); ++i) {
		auto& p = params[i];
		m_[i] = beta1 * m_[i] + (1.0 - beta1) * p.grad;
		v_[i] = beta2 * v_[i] + (1.0 - beta2) * p.grad.cwiseProduct(p.grad);
		const auto m_hat = m_[i].array() / c1;
		const auto v_hat = v_[i].array() / c2;
		p.value.array() -= learning_rate * m_hat / (v_hat.sqrt() + eps);
	}
}

void Adam::restore(long steps, std::vector<Matrix> m, std::vector<Matrix> v) {
	if (m.size() != m_.size() || v.size() != v_.size()) {
		fail(ErrorCode::IncompatibleCheckpoint, "optimizer moment count mismatch");
	}
	t_ = steps;
	m_ = std::move(m);
	v_ = std::move(v);
}

} // namespace cavg::nn
