#pragma once

#include <cavg/common/matrix.hpp>

#include <functional>
#include <string>
#include <vector>

namespace cavg::nn {

/// A learnable matrix. `grad` accumulates across backward passes until zeroed.
struct Parameter {
	std::string name;
	Matrix value;
	Matrix grad;

	Parameter() = default;
	Parameter(std::string n, Matrix v)
		: name(std::move(n))
		, value(std::move(v))
		, grad(Matrix::Zero(value.rows(), value.cols())) {}
};

/// Ordered, name-addressable collection. Layers refer to entries by index so a
/// copy of the set is a fully independent network.
class ParameterSet {
public:
	std::size_t add(std::string name, Matrix init);

	Parameter& operator[](std::size_t i) { return params_[i]; }
	const Parameter& operator[](std::size_t i) const { return params_[i]; }
	Parameter* find(const std::string& name);
	const Parameter* find(const std::string& name) const;

	std::size_t size() const noexcept { return params_.size(); }
	std::size_t scalar_count() const noexcept;
	auto begin() { return params_.begin(); }
	auto end() { return params_.end(); }
	auto begin() const { return params_.begin(); }
	auto end() const { return params_.end(); }

	void zero_grad();
	bool all_finite() const;
	double grad_norm() const;
	void scale_grad(double factor);

	/// Flat views, in parameter order, for finite-difference checks and tests.
	Vector flat_values() const;
	Vector flat_grads() const;
	void set_flat_values(const Vector& flat);

private:
	std::vector<Parameter> params_;
};

class Tape;

/// Handle to a node of a tape.
struct Var {
	Tape* tape = nullptr;
	int id = -1;

	const Matrix& value() const;
	Eigen::Index rows() const { return value().rows(); }
	Eigen::Index cols() const { return value().cols(); }
	double scalar() const;
};

struct BackwardReport {
	/// Parameters the loss actually depends on (received a gradient path).
	std::vector<const Parameter*> reached;
};

/// Records a forward computation and replays it in reverse. Values are checked
/// for NaN/Inf as they are produced (NonFiniteValue).
class Tape {
public:
	using BackwardFn = std::function<void(Tape&, int self)>;

	Var constant(Matrix value);
	Var param(Parameter& p);

	/// Adds a node computed from `parents`. `fn` propagates this node's gradient
	/// into its parents via `accumulate`.
	Var push(Matrix value, const std::vector<Var>& parents, BackwardFn fn);

	const Matrix& value(int id) const { return nodes_[id].value; }
	const Matrix& grad(int id) const { return nodes_[id].grad; }
	bool requires_grad(int id) const { return nodes_[id].requires_grad; }
	void accumulate(int id, const Matrix& g);

	/// Seeds d(loss)/d(loss) = 1 and accumulates into every reached Parameter::grad.
	/// Throws ShapeMismatch if `loss` is not 1x1.
	BackwardReport backward(Var loss);

	std::size_t size() const noexcept { return nodes_.size(); }

private:
	struct Node {
		Matrix value;
		Matrix grad;
		Parameter* param = nullptr;
		BackwardFn backward;
		bool requires_grad = false;
		bool has_grad = false;
	};
	std::vector<Node> nodes_;
};

/// Names of parameters in `set` that the last backward pass never reached.
std::vector<std::string> disconnected_parameters(const ParameterSet& set, const BackwardReport& report);

} // namespace cavg::nn
