#include <cavg/nn/tape.hpp>

#include <cavg/common/error.hpp>

#include <algorithm>
#include <cmath>

namespace cavg::nn {

std::size_t ParameterSet::add(std::string name, Matrix init) {
	if (find(name) != nullptr) {
		fail(ErrorCode::InvalidSpec, "duplicate parameter name " + name);
	}
	params_.emplace_back(std::move(name), std::move(init));
	return params_.size() - 1;
}

Parameter* ParameterSet::find(const std::string& name) {
	const auto it = std::find_if(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
	return it == params_.end() ? nullptr : &*it;
}

const Parameter* ParameterSet::find(const std::string& name) const {
	const auto it = std::find_if(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
	return it == params_.end() ? nullptr : &*it;
}

std::size_t ParameterSet::scalar_count() const noexcept {
	std::size_t n = 0;
	for (const auto& p : params_) {
		n += static_cast<std::size_t>(p.value.size());
	}
	return n;
}

void ParameterSet::zero_grad() {
	for (auto& p : params_) {
		p.grad.setZero(p.value.rows(), p.value.cols());
	}
}

bool ParameterSet::all_finite() const {
	return std::all_of(params_.begin(), params_.end(), [](const Parameter& p) {
		return p.value.allFinite() && p.grad.allFinite();
	});
}

double ParameterSet::grad_norm() const {
	double sq = 0.0;
	for (const auto& p : params_) {
		sq += p.grad.squaredNorm();
	}
	return std::sqrt(sq);
}

void ParameterSet::scale_grad(double factor) {
	for (auto& p : params_) {
		p.grad *= factor;
	}
}

Vector ParameterSet::flat_values() const {
	Vector out(static_cast<Eigen::Index>(scalar_count()));
	Eigen::Index k = 0;
	for (const auto& p : params_) {
		out.segment(k, p.value.size()) = p.value.reshaped<Eigen::RowMajor>();
		k += p.value.size();
	}
	return out;
}

Vector ParameterSet::flat_grads() const {
	Vector out(static_cast<Eigen::Index>(scalar_count()));
	Eigen::Index k = 0;
	for (const auto& p : params_) {
		out.segment(k, p.grad.size()) = p.grad.reshaped<Eigen::RowMajor>();
		k += p.grad.size();
	}
	return out;
}

void ParameterSet::set_flat_values(const Vector& flat) {
	if (flat.size() != static_cast<Eigen::Index>(scalar_count())) {
		fail(ErrorCode::ShapeMismatch, "flat parameter vector has the wrong length");
	}
	Eigen::Index k = 0;
	for (auto& p : params_) {
		p.value.reshaped<Eigen::RowMajor>() = flat.segment(k, p.value.size());
		k += p.value.size();
	}
}

const Matrix& Var::value() const {
	return tape->value(id);
}

double Var::scalar() const {
	const auto& v = value();
	if (v.size() != 1) {
		fail(ErrorCode::ShapeMismatch, "scalar() on a non-1x1 value");
	}
	return v(0, 0);
}

Var Tape::constant(Matrix value) {
	if (!value.allFinite()) {
		fail(ErrorCode::NonFiniteValue, "non-finite constant fed to the tape");
	}
	Node n;
	n.value = std::move(value);
	nodes_.push_back(std::move(n));
	return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(Parameter& p) {
	if (!p.value.allFinite()) {
		fail(ErrorCode::NonFiniteValue, "parameter " + p.name + " is not finite");
	}
	Node n;
	n.value = p.value;
	n.param = &p;
	n.requires_grad = true;
	nodes_.push_back(std::move(n));
	return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Matrix value, const std::vector<Var>& parents, BackwardFn fn) {
	if (!value.allFinite()) {
		fail(ErrorCode::NonFiniteValue, "forward pass produced NaN/Inf");
	}
	Node n;
	n.value = std::move(value);
	for (const auto& p : parents) {
		n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
	}
	if (n.requires_grad) {
		n.backward = std::move(fn);
	}
	nodes_.push_back(std::move(n));
	return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const Matrix& g) {
	auto& n = nodes_[id];
	if (!n.requires_grad) {
		return;
	}
	if (!n.has_grad) {
		n.grad = g;
		n.has_grad = true;
	} else {
		n.grad += g;
	}
}

BackwardReport Tape::backward(Var loss) {
	if (loss.tape != this || nodes_[loss.id].value.size() != 1) {
		fail(ErrorCode::ShapeMismatch, "backward() needs a 1x1 loss recorded on this tape");
	}
	for (auto& n : nodes_) {
		n.has_grad = false;
	}
	accumulate(loss.id, Matrix::Ones(1, 1));
	BackwardReport report;
	for (int id = loss.id; id >= 0; --id) {
		auto& n = nodes_[id];
		if (!n.has_grad) {
			continue;
		}
		if (n.param != nullptr) {
			n.param->grad += n.grad;
			report.reached.push_back(n.param);
		} else if (n.backward) {
			n.backward(*this, id);
		}
	}
	return report;
}

std::vector<std::string> disconnected_parameters(const ParameterSet& set, const BackwardReport& report) {
	std::vector<std::string> out;
	for (const auto& p : set) {
		if (std::find(report.reached.begin(), report.reached.end(), &p) == report.reached.end()) {
			out.push_back(p.name);
		}
	}
	return out;
}

} // namespace cavg::nn
