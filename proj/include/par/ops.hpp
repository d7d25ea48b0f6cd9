#pragma once

// Differentiable operations over par::Tensor.
//
// Broadcasting follows the usual right-aligned rule: missing leading axes and
// axes of size 1 stretch to match the other operand.

#include <cstdint>
#include <span>
#include <vector>

#include "par/tensor.hpp"

namespace par {

/// op(a) * op(b) over the last two axes. Leading (batch) axes must match, or one
/// operand may be rank-2 and is then shared by every batch entry.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
/// ln(1 + e^x), overflow-safe.
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

/// Softmax along `axis` with max subtraction. Throws NumericError on non-finite input.
Tensor softmax(const Tensor& a, std::ptrdiff_t axis = -1);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Sum over one axis (the axis is dropped).
Tensor sum_axis(const Tensor& a, std::ptrdiff_t axis);

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes);
/// Swap the last two axes.
Tensor transpose(const Tensor& a);
Tensor broadcast_to(const Tensor& a, const Shape& shape);
Tensor concat(const std::vector<Tensor>& parts, std::ptrdiff_t axis);
Tensor slice(const Tensor& a, std::ptrdiff_t axis, std::size_t begin, std::size_t end);

/// Rows of `table` ([V x d]) selected by `ids`; output [ids.size() x d].
/// Id 0 is padding: it yields a zero row and never receives gradient.
Tensor gather_rows(const Tensor& table, std::span<const std::int64_t> ids);

/// f(d | v) = (1 + e^v) / (1 + e^(v + sigma d)) for every steepness entry of
/// `steepness` (shape [H]) and every distance; output [H x distances.size()].
Tensor learnable_sigmoid(const Tensor& steepness, std::span<const double> distances, double sigma);

/// Mean binary cross-entropy over entries with mask != 0. Predictions are
/// clamped to [1e-12, 1 - 1e-12] before the log.
Tensor bce_loss(const Tensor& pred, std::span<const double> labels, std::span<const double> mask);

/// Scalar form of learnable_sigmoid.
double learnable_sigmoid_value(double distance, double steepness, double sigma);

/// Overflow-safe ln(1 + e^x).
double softplus_value(double x);

}  // namespace par
