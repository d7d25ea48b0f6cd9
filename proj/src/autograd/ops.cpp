#include "par/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "par/errors.hpp"
#include "par/kernels.hpp"

namespace par {
namespace {

std::size_t normalize_axis(std::ptrdiff_t axis, std::size_t rank) {
  const auto r = static_cast<std::ptrdiff_t>(rank);
  const auto a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " invalid for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

std::vector<std::size_t> contiguous_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

// Visits every element of `out` in row-major order together with the offset
// obtained from `strides` (one stride per output axis, 0 for broadcast axes).
template <class F>
void for_each_strided(const Shape& out, const std::vector<std::size_t>& sa,
                      const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t rank = out.size();
  const std::size_t total = shape_numel(out);
  if (total == 0) return;
  if (rank == 0) {
    f(std::size_t{0}, std::size_t{0}, std::size_t{0});
    return;
  }
  const std::size_t inner = out[rank - 1];
  const std::size_t ia = sa[rank - 1], ib = sb[rank - 1];
  const std::size_t outer = total / inner;
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t base = o * inner;
    for (std::size_t k = 0; k < inner; ++k) f(base + k, oa + k * ia, ob + k * ib);
    for (std::size_t ax = rank - 1; ax-- > 0;) {
      ++idx[ax];
      oa += sa[ax];
      ob += sb[ax];
      if (idx[ax] < out[ax]) break;
      oa -= sa[ax] * out[ax];
      ob -= sb[ax] * out[ax];
      idx[ax] = 0;
    }
  }
}

struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> sa, sb;
  bool same = false;
};

// Strides of `in` seen through an output of shape `out` (0 on stretched axes).
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> s(out.size(), 0);
  const auto in_strides = contiguous_strides(in);
  const std::size_t lead = out.size() - in.size();
  for (std::size_t i = 0; i < in.size(); ++i) {
    s[lead + i] = in[i] == 1 ? 0 : in_strides[i];
  }
  return s;
}

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
  BroadcastPlan plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  plan.out.assign(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i + a.size() >= rank ? a[i + a.size() - rank] : 1;
    const std::size_t db = i + b.size() >= rank ? b[i + b.size() - rank] : 1;
    if (da != db && da != 1 && db != 1) {
      throw DimensionError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    plan.out[i] = std::max(da, db);
  }
  plan.sa = broadcast_strides(a, plan.out);
  plan.sb = broadcast_strides(b, plan.out);
  return plan;
}

template <class Fwd, class Back>
Tensor binary(const Tensor& a, const Tensor& b, Fwd fwd, Back back) {
  auto plan = plan_broadcast(a.shape(), b.shape());
  std::vector<double> out(shape_numel(plan.out));
  const auto av = a.values();
  const auto bv = b.values();
  if (plan.same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  } else {
    for_each_strided(plan.out, plan.sa, plan.sb,
                     [&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = fwd(av[ia], bv[ib]); });
  }
  return Tensor::make(plan.out, std::move(out), {a, b}, [plan, back](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const auto& g = self.grad;
    const auto& va = pa.value;
    const auto& vb = pb.value;
    double* ga = pa.requires_grad ? pa.ensure_grad().data() : nullptr;
    double* gb = pb.requires_grad ? pb.ensure_grad().data() : nullptr;
    auto visit = [&](std::size_t i, std::size_t ia, std::size_t ib) {
      double da = 0.0, db = 0.0;
      back(va[ia], vb[ib], g[i], da, db);
      if (ga) ga[ia] += da;
      if (gb) gb[ib] += db;
    };
    if (plan.same) {
      for (std::size_t i = 0; i < g.size(); ++i) visit(i, i, i);
    } else {
      for_each_strided(plan.out, plan.sa, plan.sb, visit);
    }
  });
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return Tensor::make(a.shape(), std::move(out), {a}, [deriv](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto ga = pa.ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * deriv(pa.value[i], self.value[i]);
  });
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Shape batch_dims(const Shape& s) { return Shape(s.begin(), s.end() - 2); }

}  // namespace

double softplus_value(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double learnable_sigmoid_value(double distance, double steepness, double sigma) {
  return std::exp(softplus_value(steepness) - softplus_value(steepness + sigma * distance));
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t p = trans_a ? a.dim(-1) : a.dim(-2);
  const std::size_t qa = trans_a ? a.dim(-2) : a.dim(-1);
  const std::size_t qb = trans_b ? b.dim(-1) : b.dim(-2);
  const std::size_t r = trans_b ? b.dim(-2) : b.dim(-1);
  if (qa != qb) {
    throw DimensionError("matmul inner dimensions differ: " + shape_str(a.shape()) +
                         (trans_a ? "^T" : "") + " * " + shape_str(b.shape()) + (trans_b ? "^T" : ""));
  }
  const std::size_t q = qa;
  const Shape ab = batch_dims(a.shape());
  const Shape bb = batch_dims(b.shape());

  // A shared rank-2 right operand against an untransposed batch of rows is just
  // one tall product.
  if (b.rank() == 2 && !trans_a && a.rank() > 2) {
    const std::size_t rows = shape_numel(ab) * p;
    Tensor flat = reshape(a, {rows, q});
    Tensor out = matmul(flat, b, false, trans_b);
    Shape os = ab;
    os.push_back(p);
    os.push_back(r);
    return reshape(out, os);
  }

  std::size_t batch = 1, a_stride = p * q, b_stride = q * r;
  Shape out_batch;
  if (ab == bb) {
    batch = shape_numel(ab);
    out_batch = ab;
  } else if (bb.empty()) {
    batch = shape_numel(ab);
    b_stride = 0;
    out_batch = ab;
  } else if (ab.empty()) {
    batch = shape_numel(bb);
    a_stride = 0;
    out_batch = bb;
  } else {
    throw DimensionError("matmul batch dimensions differ: " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));
  }
  Shape out_shape = out_batch;
  out_shape.push_back(p);
  out_shape.push_back(r);
  std::vector<double> out(batch * p * r);
  kernels::GemmShape gs{p, q, r, trans_a, trans_b};
  kernels::gemm(a.values(), b.values(), out, gs, batch, a_stride, b_stride);

  return Tensor::make(out_shape, std::move(out), {a, b},
                      [=](detail::Node& self) {
                        auto& na = *self.parents[0];
                        auto& nb = *self.parents[1];
                        const std::span<const double> dc = self.grad;
                        const std::size_t c_stride = p * r;
                        if (na.requires_grad) {
                          // d op(A) = dC op(B)^T ; stored A^T when trans_a.
                          kernels::GemmShape s = trans_a ? kernels::GemmShape{q, r, p, trans_b, true}
                                                         : kernels::GemmShape{p, r, q, false, !trans_b};
                          std::span<const double> lhs = trans_a ? std::span<const double>(nb.value) : dc;
                          std::span<const double> rhs = trans_a ? dc : std::span<const double>(nb.value);
                          const std::size_t ls = trans_a ? b_stride : c_stride;
                          const std::size_t rs = trans_a ? c_stride : b_stride;
                          auto ga = na.ensure_grad();
                          if (a_stride == 0) {
                            std::vector<double> tmp(batch * p * q);
                            kernels::gemm(lhs, rhs, tmp, s, batch, ls, rs, false);
                            for (std::size_t g = 0; g < batch; ++g)
                              for (std::size_t i = 0; i < p * q; ++i) ga[i] += tmp[g * p * q + i];
                          } else {
                            kernels::gemm(lhs, rhs, ga, s, batch, ls, rs, true);
                          }
                        }
                        if (nb.requires_grad) {
                          // d op(B) = op(A)^T dC ; stored B^T when trans_b.
                          kernels::GemmShape s = trans_b ? kernels::GemmShape{r, p, q, true, trans_a}
                                                         : kernels::GemmShape{q, p, r, !trans_a, false};
                          std::span<const double> lhs = trans_b ? dc : std::span<const double>(na.value);
                          std::span<const double> rhs = trans_b ? std::span<const double>(na.value) : dc;
                          const std::size_t ls = trans_b ? c_stride : a_stride;
                          const std::size_t rs = trans_b ? a_stride : c_stride;
                          auto gb = nb.ensure_grad();
                          if (b_stride == 0) {
                            std::vector<double> tmp(batch * q * r);
                            kernels::gemm(lhs, rhs, tmp, s, batch, ls, rs, false);
                            for (std::size_t g = 0; g < batch; ++g)
                              for (std::size_t i = 0; i < q * r; ++i) gb[i] += tmp[g * q * r + i];
                          } else {
                            kernels::gemm(lhs, rhs, gb, s, batch, ls, rs, true);
                          }
                        }
                      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(a, b, [](double x, double y) { return x + y; },
                [](double, double, double g, double& da, double& db) {
                  da = g;
                  db = g;
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(a, b, [](double x, double y) { return x - y; },
                [](double, double, double g, double& da, double& db) {
                  da = g;
                  db = -g;
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(a, b, [](double x, double y) { return x * y; },
                [](double x, double y, double g, double& da, double& db) {
                  da = g * y;
                  db = g * x;
                });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
  return unary(a, softplus_value, [](double x, double) { return sigmoid_value(x); });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softmax(const Tensor& a, std::ptrdiff_t axis) {
  const std::size_t ax = normalize_axis(axis, a.rank());
  const auto& s = a.shape();
  const auto av = a.values();
  for (double x : av) {
    if (!std::isfinite(x)) throw NumericError("softmax input is not finite");
  }
  const std::size_t len = s[ax];
  std::size_t inner = 1;
  for (std::size_t i = ax + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t outer = av.size() / std::max<std::size_t>(len * inner, 1);
  std::vector<double> out(av.size());

  if (inner == 1) {
    kernels::softmax_rows(av, out, outer, len);
    return Tensor::make(s, std::move(out), {a}, [outer, len](detail::Node& self) {
      auto& pa = *self.parents[0];
      kernels::softmax_rows_backward(self.value, self.grad, pa.ensure_grad(), outer, len);
    });
  }

  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = av[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, av[base + k * inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        out[base + k * inner] = std::exp(av[base + k * inner] - mx);
        total += out[base + k * inner];
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= total;
    }
  }
  return Tensor::make(s, std::move(out), {a}, [outer, len, inner](detail::Node& self) {
    auto ga = self.parents[0]->ensure_grad();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < len; ++k) dot += y[base + k * inner] * g[base + k * inner];
        for (std::size_t k = 0; k < len; ++k) {
          ga[base + k * inner] += y[base + k * inner] * (g[base + k * inner] - dot);
        }
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  const auto av = a.values();
  const double total = std::accumulate(av.begin(), av.end(), 0.0);
  return Tensor::make({}, {total}, {a}, [](detail::Node& self) {
    auto ga = self.parents[0]->ensure_grad();
    for (auto& x : ga) x += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ContractError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sum_axis(const Tensor& a, std::ptrdiff_t axis) {
  const std::size_t ax = normalize_axis(axis, a.rank());
  const auto& s = a.shape();
  const std::size_t len = s[ax];
  std::size_t inner = 1;
  for (std::size_t i = ax + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t outer = a.numel() / std::max<std::size_t>(len * inner, 1);
  Shape os;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != ax) os.push_back(s[i]);
  std::vector<double> out(outer * inner, 0.0);
  const auto av = a.values();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < len; ++k)
      for (std::size_t in = 0; in < inner; ++in) out[o * inner + in] += av[(o * len + k) * inner + in];
  return Tensor::make(os, std::move(out), {a}, [outer, len, inner](detail::Node& self) {
    auto ga = self.parents[0]->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t k = 0; k < len; ++k)
        for (std::size_t in = 0; in < inner; ++in) ga[(o * len + k) * inner + in] += self.grad[o * inner + in];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return Tensor::make(std::move(shape), std::move(out), {a}, [](detail::Node& self) {
    auto ga = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes) {
  const auto& s = a.shape();
  if (axes.size() != s.size()) throw DimensionError("permute axes do not match " + shape_str(s));
  std::vector<bool> used(s.size(), false);
  Shape os(s.size());
  const auto in_strides = contiguous_strides(s);
  std::vector<std::size_t> strides(s.size());
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] >= s.size() || used[axes[i]]) throw DimensionError("invalid permutation for " + shape_str(s));
    used[axes[i]] = true;
    os[i] = s[axes[i]];
    strides[i] = in_strides[axes[i]];
  }
  std::vector<double> out(a.numel());
  const auto av = a.values();
  for_each_strided(os, strides, strides, [&](std::size_t i, std::size_t ia, std::size_t) { out[i] = av[ia]; });
  return Tensor::make(os, std::move(out), {a}, [os, strides](detail::Node& self) {
    auto ga = self.parents[0]->ensure_grad();
    for_each_strided(os, strides, strides,
                     [&](std::size_t i, std::size_t ia, std::size_t) { ga[ia] += self.grad[i]; });
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() < 2) throw DimensionError("transpose needs rank >= 2, got " + shape_str(a.shape()));
  std::vector<std::size_t> axes(a.rank());
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[a.rank() - 1], axes[a.rank() - 2]);
  return permute(a, axes);
}

Tensor broadcast_to(const Tensor& a, const Shape& shape) {
  auto plan = plan_broadcast(a.shape(), shape);
  if (plan.out != shape) {
    throw DimensionError("cannot broadcast " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  if (plan.same) return reshape(a, shape);
  std::vector<double> out(shape_numel(shape));
  const auto av = a.values();
  for_each_strided(shape, plan.sa, plan.sa, [&](std::size_t i, std::size_t ia, std::size_t) { out[i] = av[ia]; });
  return Tensor::make(shape, std::move(out), {a}, [plan](detail::Node& self) {
    auto ga = self.parents[0]->ensure_grad();
    for_each_strided(plan.out, plan.sa, plan.sa,
                     [&](std::size_t i, std::size_t ia, std::size_t) { ga[ia] += self.grad[i]; });
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::ptrdiff_t axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  const auto& s0 = parts[0].shape();
  const std::size_t ax = normalize_axis(axis, s0.size());
  Shape os = s0;
  os[ax] = 0;
  std::vector<std::size_t> widths;
  std::size_t inner = 1;
  for (std::size_t i = ax + 1; i < s0.size(); ++i) inner *= s0[i];
  for (const auto& p : parts) {
    const auto& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == ax || s[i] == s0[i];
    if (!ok) throw DimensionError("concat shape mismatch: " + shape_str(s0) + " vs " + shape_str(s));
    os[ax] += s[ax];
    widths.push_back(s[ax] * inner);
  }
  const std::size_t outer = shape_numel(s0) / std::max<std::size_t>(s0[ax] * inner, 1);
  const std::size_t row = os[ax] * inner;
  std::vector<double> out(outer * row);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].values();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * widths[k]), widths[k],
                  out.begin() + static_cast<std::ptrdiff_t>(o * row + off));
    off += widths[k];
  }
  return Tensor::make(os, std::move(out), parts, [outer, row, widths](detail::Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      auto& pk = *self.parents[k];
      if (pk.requires_grad) {
        auto gk = pk.ensure_grad();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < widths[k]; ++i) gk[o * widths[k] + i] += self.grad[o * row + off + i];
      }
      off += widths[k];
    }
  });
}

Tensor slice(const Tensor& a, std::ptrdiff_t axis, std::size_t begin, std::size_t end) {
  const std::size_t ax = normalize_axis(axis, a.rank());
  const auto& s = a.shape();
  if (begin > end || end > s[ax]) {
    throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " +
                         shape_str(s));
  }
  std::size_t inner = 1;
  for (std::size_t i = ax + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t outer = a.numel() / std::max<std::size_t>(s[ax] * inner, 1);
  const std::size_t src_row = s[ax] * inner, dst_row = (end - begin) * inner, off = begin * inner;
  Shape os = s;
  os[ax] = end - begin;
  std::vector<double> out(outer * dst_row);
  const auto av = a.values();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < dst_row; ++i) out[o * dst_row + i] = av[o * src_row + off + i];
  return Tensor::make(os, std::move(out), {a}, [=](detail::Node& self) {
    auto ga = self.parents[0]->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < dst_row; ++i) ga[o * src_row + off + i] += self.grad[o * dst_row + i];
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::int64_t> ids) {
  if (table.rank() != 2) throw DimensionError("gather_rows needs a rank-2 table, got " + shape_str(table.shape()));
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  std::vector<double> out(ids.size() * d, 0.0);
  const auto tv = table.values();
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto id = ids[k];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw DataError("embedding id " + std::to_string(id) + " out of range for vocabulary of " +
                      std::to_string(vocab));
    }
    if (id == 0) continue;
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(id * d), d, out.begin() + static_cast<std::ptrdiff_t>(k * d));
  }
  std::vector<std::int64_t> kept(ids.begin(), ids.end());
  return Tensor::make({ids.size(), d}, std::move(out), {table}, [kept = std::move(kept), d](detail::Node& self) {
    auto gt = self.parents[0]->ensure_grad();
    for (std::size_t k = 0; k < kept.size(); ++k) {
      if (kept[k] == 0) continue;
      const auto base = static_cast<std::size_t>(kept[k]) * d;
      for (std::size_t j = 0; j < d; ++j) gt[base + j] += self.grad[k * d + j];
    }
  });
}

Tensor learnable_sigmoid(const Tensor& steepness, std::span<const double> distances, double sigma) {
  if (steepness.rank() != 1) {
    throw DimensionError("learnable_sigmoid steepness must be rank 1, got " + shape_str(steepness.shape()));
  }
  const std::size_t heads = steepness.dim(0), count = distances.size();
  std::vector<double> out(heads * count);
  const auto v = steepness.values();
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t k = 0; k < count; ++k) out[h * count + k] = learnable_sigmoid_value(distances[k], v[h], sigma);
  std::vector<double> dist(distances.begin(), distances.end());
  return Tensor::make({heads, count}, std::move(out), {steepness},
                      [dist = std::move(dist), sigma, heads, count](detail::Node& self) {
                        auto& pv = *self.parents[0];
                        auto gv = pv.ensure_grad();
                        for (std::size_t h = 0; h < heads; ++h) {
                          const double sv = sigmoid_value(pv.value[h]);
                          double acc = 0.0;
                          for (std::size_t k = 0; k < count; ++k) {
                            const double f = self.value[h * count + k];
                            acc += self.grad[h * count + k] * f * (sv - sigmoid_value(pv.value[h] + sigma * dist[k]));
                          }
                          gv[h] += acc;
                        }
                      });
}

Tensor bce_loss(const Tensor& pred, std::span<const double> labels, std::span<const double> mask) {
  const auto pv = pred.values();
  if (labels.size() != pv.size() || mask.size() != pv.size()) {
    throw DimensionError("bce_loss: predictions " + shape_str(pred.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels / " + std::to_string(mask.size()) + " mask");
  }
  constexpr double lo = 1e-12, hi = 1.0 - 1e-12;
  double total = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (mask[i] == 0.0) continue;
    const double p = std::clamp(pv[i], lo, hi);
    total -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
    count += 1.0;
  }
  if (count == 0.0) throw ContractError("bce_loss with every entry masked");
  std::vector<double> y(labels.begin(), labels.end());
  std::vector<double> m(mask.begin(), mask.end());
  return Tensor::make({}, {total / count}, {pred},
                      [y = std::move(y), m = std::move(m), count](detail::Node& self) {
                        auto& pp = *self.parents[0];
                        auto gp = pp.ensure_grad();
                        const double g = self.grad[0] / count;
                        for (std::size_t i = 0; i < gp.size(); ++i) {
                          if (m[i] == 0.0) continue;
                          const double p = pp.value[i];
                          if (p <= lo || p >= hi) continue;
                          gp[i] += g * (-y[i] / p + (1.0 - y[i]) / (1.0 - p));
                        }
                      });
}

}  // namespace par
