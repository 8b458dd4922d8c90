#include <cavg/nn/ops.hpp>

#include <cavg/common/error.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cavg::nn {

namespace {

	std::string shape_of(const Matrix& m) {
		return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
	}

	void require_same_shape(const Var& a, const Var& b, const char* op) {
		if (a.rows() != b.rows() || a.cols() != b.cols()) {
			fail(ErrorCode::ShapeMismatch, std::string(op) + ": " + shape_of(a.value()) + " vs " + shape_of(b.value()));
		}
	}

	void require_scalar(const Var& s, const char* op) {
		if (s.value().size() != 1) {
			fail(ErrorCode::ShapeMismatch, std::string(op) + ": expected 1x1, got " + shape_of(s.value()));
		}
	}

} // namespace

Var matmul(Var a, Var b) {
	if (a.cols() != b.rows()) {
		fail(ErrorCode::ShapeMismatch, "matmul: " + shape_of(a.value()) + " * " + shape_of(b.value()));
	}
	const int ia = a.id, ib = b.id;
	return a.tape->push(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, int self) {
		const Matrix& g = t.grad(self);
		if (t.requires_grad(ia)) {
			t.accumulate(ia, g * t.value(ib).transpose());
		}
		if (t.requires_grad(ib)) {
			t.accumulate(ib, t.value(ia).transpose() * g);
		}
	});
}

Var add(Var a, Var b) {
	require_same_shape(a, b, "add");
	const int ia = a.id, ib = b.id;
	return a.tape->push(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, int self) {
		t.accumulate(ia, t.grad(self));
		t.accumulate(ib, t.grad(self));
	});
}

Var sub(Var a, Var b) {
	require_same_shape(a, b, "sub");
	const int ia = a.id, ib = b.id;
	return a.tape->push(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, int self) {
		t.accumulate(ia, t.grad(self));
		t.accumulate(ib, -t.grad(self));
	});
}

Var mul(Var a, Var b) {
	require_same_shape(a, b, "mul");
	const int ia = a.id, ib = b.id;
	return a.tape->push(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
		const Matrix& g = t.grad(self);
		t.accumulate(ia, g.cwiseProduct(t.value(ib)));
		t.accumulate(ib, g.cwiseProduct(t.value(ia)));
	});
}

Var neg(Var a) {
	return scale(a, -1.0);
}

Var scale(Var a, double factor) {
	const int ia = a.id;
	return a.tape->push(a.value() * factor, {a}, [ia, factor](Tape& t, int self) {
		t.accumulate(ia, t.grad(self) * factor);
	});
}

Var add_scalar(Var a, double c) {
	const int ia = a.id;
	return a.tape->push(a.value().array() + c, {a}, [ia](Tape& t, int self) {
		t.accumulate(ia, t.grad(self));
	});
}

Var add_row(Var a, Var row) {
	if (row.rows() != 1 || row.cols() != a.cols()) {
		fail(ErrorCode::ShapeMismatch, "add_row: " + shape_of(a.value()) + " + " + shape_of(row.value()));
	}
	const int ia = a.id, ir = row.id;
	Matrix out = a.value().rowwise() + row.value().row(0);
	return a.tape->push(std::move(out), {a, row}, [ia, ir](Tape& t, int self) {
		t.accumulate(ia, t.grad(self));
		t.accumulate(ir, t.grad(self).colwise().sum());
	});
}

Var add_broadcast(Var a, Var s) {
	require_scalar(s, "add_broadcast");
	const int ia = a.id, is = s.id;
	return a.tape->push(a.value().array() + s.value()(0, 0), {a, s}, [ia, is](Tape& t, int self) {
		t.accumulate(ia, t.grad(self));
		t.accumulate(is, Matrix::Constant(1, 1, t.grad(self).sum()));
	});
}

Var mul_broadcast(Var a, Var s) {
	require_scalar(s, "mul_broadcast");
	const int ia = a.id, is = s.id;
	return a.tape->push(a.value() * s.value()(0, 0), {a, s}, [ia, is](Tape& t, int self) {
		const Matrix& g = t.grad(self);
		t.accumulate(ia, g * t.value(is)(0, 0));
		t.accumulate(is, Matrix::Constant(1, 1, g.cwiseProduct(t.value(ia)).sum()));
	});
}

Var tanh(Var a) {
	const int ia = a.id;
	return a.tape->push(a.value().array().tanh().matrix(), {a}, [ia](Tape& t, int self) {
		const Matrix& y = t.value(self);
		t.accumulate(ia, t.grad(self).cwiseProduct((1.0 - y.array().square()).matrix()));
	});
}

Var relu(Var a) {
	const int ia = a.id;
	return a.tape->push(a.value().cwiseMax(0.0), {a}, [ia](Tape& t, int self) {
		const Matrix mask = (t.value(ia).array() > 0.0).cast<double>().matrix();
		t.accumulate(ia, t.grad(self).cwiseProduct(mask));
	});
}

Var exp(Var a) {
	const int ia = a.id;
	return a.tape->push(a.value().array().exp().matrix(), {a}, [ia](Tape& t, int self) {
		t.accumulate(ia, t.grad(self).cwiseProduct(t.value(self)));
	});
}

Var square(Var a) {
	const int ia = a.id;
	return a.tape->push(a.value().array().square().matrix(), {a}, [ia](Tape& t, int self) {
		t.accumulate(ia, 2.0 * t.grad(self).cwiseProduct(t.value(ia)));
	});
}

Var sum(Var a) {
	const int ia = a.id;
	const Eigen::Index r = a.rows(), c = a.cols();
	return a.tape->push(Matrix::Constant(1, 1, a.value().sum()), {a}, [ia, r, c](Tape& t, int self) {
		t.accumulate(ia, Matrix::Constant(r, c, t.grad(self)(0, 0)));
	});
}

Var mean(Var a) {
	const auto n = static_cast<double>(a.value().size());
	if (n == 0) {
		fail(ErrorCode::ShapeMismatch, "mean of an empty matrix");
	}
	return scale(sum(a), 1.0 / n);
}

Var concat_cols(Var a, Var b) {
	return concat_cols(std::vector<Var>{a, b});
}

Var concat_cols(const std::vector<Var>& parts) {
	if (parts.empty()) {
		fail(ErrorCode::ShapeMismatch, "concat_cols of nothing");
	}
	const Eigen::Index rows = parts.front().rows();
	Eigen::Index cols = 0;
	for (const auto& p : parts) {
		if (p.rows() != rows) {
			fail(ErrorCode::ShapeMismatch, "concat_cols: row counts differ");
		}
		cols += p.cols();
	}
	Matrix out(rows, cols);
	std::vector<std::pair<int, Eigen::Index>> spans;
	Eigen::Index at = 0;
	for (const auto& p : parts) {
		out.middleCols(at, p.cols()) = p.value();
		spans.emplace_back(p.id, p.cols());
		at += p.cols();
	}
	std::vector<Var> parents(parts.begin(), parts.end());
	return parts.front().tape->push(std::move(out), parents, [spans](Tape& t, int self) {
		const Matrix& g = t.grad(self);
		Eigen::Index col = 0;
		for (const auto& [pid, width] : spans) {
			if (t.requires_grad(pid)) {
				t.accumulate(pid, g.middleCols(col, width));
			}
			col += width;
		}
	});
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index width) {
	if (start < 0 || width < 0 || start + width > a.cols()) {
		fail(ErrorCode::ShapeMismatch, "slice_cols out of range");
	}
	const int ia = a.id;
	const Eigen::Index rows = a.rows(), cols = a.cols();
	return a.tape->push(a.value().middleCols(start, width), {a}, [ia, rows, cols, start, width](Tape& t, int self) {
		Matrix g = Matrix::Zero(rows, cols);
		g.middleCols(start, width) = t.grad(self);
		t.accumulate(ia, g);
	});
}

Var transpose(Var a) {
	const int ia = a.id;
	return a.tape->push(a.value().transpose(), {a}, [ia](Tape& t, int self) {
		t.accumulate(ia, t.grad(self).transpose());
	});
}

Var clamp(Var a, double lo, double hi) {
	const int ia = a.id;
	return a.tape->push(a.value().cwiseMax(lo).cwiseMin(hi), {a}, [ia, lo, hi](Tape& t, int self) {
		const auto& x = t.value(ia).array();
		const Matrix pass = ((x >= lo) && (x <= hi)).cast<double>().matrix();
		t.accumulate(ia, t.grad(self).cwiseProduct(pass));
	});
}

Var minimum(Var a, Var b) {
	require_same_shape(a, b, "minimum");
	const int ia = a.id, ib = b.id;
	return a.tape->push(a.value().cwiseMin(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
		const Matrix pick_a = (t.value(ia).array() <= t.value(ib).array()).cast<double>().matrix();
		const Matrix& g = t.grad(self);
		t.accumulate(ia, g.cwiseProduct(pick_a));
		t.accumulate(ib, g - g.cwiseProduct(pick_a));
	});
}

Var masked_softmax(Var logits, const Matrix& mask, AttentionNormalization mode) {
	if (logits.rows() != mask.rows() || logits.cols() != mask.cols()) {
		fail(ErrorCode::ShapeMismatch, "masked_softmax: logits and mask differ in shape");
	}
	const Matrix& s = logits.value();
	const Eigen::Index n = s.rows(), m = s.cols();
	Matrix z = Matrix::Zero(n, m);  // post-normalisation logits (ratio mode)
	Vector row_total = Vector::Zero(n);
	Matrix p = Matrix::Zero(n, m);
	for (Eigen::Index i = 0; i < n; ++i) {
		bool any = false;
		double total = 0.0;
		for (Eigen::Index j = 0; j < m; ++j) {
			if (mask(i, j) != 0.0) {
				any = true;
				total += s(i, j);
			}
		}
		if (!any) {
			fail(ErrorCode::EmptyNeighborSet, "attention row " + std::to_string(i) + " has no neighbours");
		}
		row_total(i) = total;
		double peak = -std::numeric_limits<double>::infinity();
		for (Eigen::Index j = 0; j < m; ++j) {
			if (mask(i, j) != 0.0) {
				z(i, j) = mode == AttentionNormalization::Softmax ? s(i, j) : s(i, j) / total;
				peak = std::max(peak, z(i, j));
			}
		}
		double denom = 0.0;
		for (Eigen::Index j = 0; j < m; ++j) {
			if (mask(i, j) != 0.0) {
				p(i, j) = std::exp(z(i, j) - peak);
				denom += p(i, j);
			}
		}
		for (Eigen::Index j = 0; j < m; ++j) {
			p(i, j) /= denom;
		}
	}
	const int il = logits.id;
	return logits.tape->push(std::move(p), {logits}, [il, mode, mask, row_total](Tape& t, int self) {
		const Matrix& g = t.grad(self);
		const Matrix& p = t.value(self);
		// dL/dz_ij = p_ij (g_ij - sum_k p_ik g_ik); masked entries have p = 0.
		const Vector inner = p.cwiseProduct(g).rowwise().sum();
		Matrix dz = p.cwiseProduct((g.colwise() - inner).eval());
		if (mode == AttentionNormalization::RatioSoftmax) {
			// z_ij = s_ij / S_i: ds_ij = dz_ij / S_i - sum_k dz_ik z_ik / S_i over the mask.
			const Matrix& s = t.value(il);
			for (Eigen::Index i = 0; i < dz.rows(); ++i) {
				const double S = row_total(i);
				double coupling = 0.0;
				for (Eigen::Index k = 0; k < dz.cols(); ++k) {
					coupling += dz(i, k) * s(i, k);
				}
				for (Eigen::Index j = 0; j < dz.cols(); ++j) {
					dz(i, j) = mask(i, j) != 0.0 ? dz(i, j) / S - coupling / (S * S) : 0.0;
				}
			}
		}
		t.accumulate(il, dz);
	});
}

namespace {

	Eigen::Index total_rows(const std::vector<Eigen::Index>& sizes) {
		Eigen::Index n = 0;
		for (auto s : sizes) {
			n += s;
		}
		return n;
	}

	Eigen::Index widest(const std::vector<Eigen::Index>& sizes) {
		Eigen::Index w = 0;
		for (auto s : sizes) {
			w = std::max(w, s);
		}
		return w;
	}

} // namespace

Var block_matmul(const std::vector<Matrix>& blocks, Var x) {
	Eigen::Index rows = 0;
	for (const auto& b : blocks) {
		if (b.rows() != b.cols()) {
			fail(ErrorCode::ShapeMismatch, "block_matmul: blocks must be square");
		}
		rows += b.rows();
	}
	if (rows != x.rows()) {
		fail(ErrorCode::ShapeMismatch, "block_matmul: blocks cover " + std::to_string(rows) + " rows, input has " +
			std::to_string(x.rows()));
	}
	const Matrix& xv = x.value();
	Matrix out(xv.rows(), xv.cols());
	Eigen::Index at = 0;
	for (const auto& b : blocks) {
		out.middleRows(at, b.rows()).noalias() = b * xv.middleRows(at, b.rows());
		at += b.rows();
	}
	const int ix = x.id;
	return x.tape->push(std::move(out), {x}, [ix, blocks](Tape& t, int self) {
		if (!t.requires_grad(ix)) {
			return;
		}
		const Matrix& g = t.grad(self);
		Matrix dx(g.rows(), g.cols());
		Eigen::Index at = 0;
		for (const auto& b : blocks) {
			dx.middleRows(at, b.rows()).noalias() = b.transpose() * g.middleRows(at, b.rows());
			at += b.rows();
		}
		t.accumulate(ix, dx);
	});
}

Var block_scores(Var q, Var k, const std::vector<Eigen::Index>& sizes) {
	require_same_shape(q, k, "block_scores");
	if (total_rows(sizes) != q.rows()) {
		fail(ErrorCode::ShapeMismatch, "block_scores: block sizes do not cover the rows");
	}
	const Matrix& qv = q.value();
	const Matrix& kv = k.value();
	Matrix out = Matrix::Zero(qv.rows(), widest(sizes));
	Eigen::Index at = 0;
	for (auto n : sizes) {
		out.block(at, 0, n, n).noalias() = qv.middleRows(at, n) * kv.middleRows(at, n).transpose();
		at += n;
	}
	const int iq = q.id, ik = k.id;
	return q.tape->push(std::move(out), {q, k}, [iq, ik, sizes](Tape& t, int self) {
		const Matrix& g = t.grad(self);
		const Matrix& qv = t.value(iq);
		const Matrix& kv = t.value(ik);
		Matrix dq = Matrix::Zero(qv.rows(), qv.cols());
		Matrix dk = Matrix::Zero(kv.rows(), kv.cols());
		Eigen::Index at = 0;
		for (auto n : sizes) {
			const auto gb = g.block(at, 0, n, n);
			dq.middleRows(at, n).noalias() = gb * kv.middleRows(at, n);
			dk.middleRows(at, n).noalias() = gb.transpose() * qv.middleRows(at, n);
			at += n;
		}
		if (t.requires_grad(iq)) {
			t.accumulate(iq, dq);
		}
		if (t.requires_grad(ik)) {
			t.accumulate(ik, dk);
		}
	});
}

Var block_mix(Var p, Var v, const std::vector<Eigen::Index>& sizes) {
	if (total_rows(sizes) != p.rows() || p.rows() != v.rows() || p.cols() != widest(sizes)) {
		fail(ErrorCode::ShapeMismatch, "block_mix: weights / values / block sizes disagree");
	}
	const Matrix& pv = p.value();
	const Matrix& vv = v.value();
	Matrix out(vv.rows(), vv.cols());
	Eigen::Index at = 0;
	for (auto n : sizes) {
		out.middleRows(at, n).noalias() = pv.block(at, 0, n, n) * vv.middleRows(at, n);
		at += n;
	}
	const int ip = p.id, iv = v.id;
	return p.tape->push(std::move(out), {p, v}, [ip, iv, sizes](Tape& t, int self) {
		const Matrix& g = t.grad(self);
		const Matrix& pv = t.value(ip);
		const Matrix& vv = t.value(iv);
		Matrix dp = Matrix::Zero(pv.rows(), pv.cols());
		Matrix dv(vv.rows(), vv.cols());
		Eigen::Index at = 0;
		for (auto n : sizes) {
			dp.block(at, 0, n, n).noalias() = g.middleRows(at, n) * vv.middleRows(at, n).transpose();
			dv.middleRows(at, n).noalias() = pv.block(at, 0, n, n).transpose() * g.middleRows(at, n);
			at += n;
		}
		if (t.requires_grad(ip)) {
			t.accumulate(ip, dp);
		}
		if (t.requires_grad(iv)) {
			t.accumulate(iv, dv);
		}
	});
}

} // namespace cavg::nn
