#pragma once

// Dense numeric kernels behind the autograd ops.
//
// Two implementations of each kernel live here:
//   * par::kernels::*            tiled, OpenMP-parallel over output tiles/rows
//   * par::kernels::reference::* plain serial loops, kept as the test oracle
//
// The parallel kernels never split a reduction across threads: every output
// element is produced by exactly one thread with a fixed summation order, so
// results are bitwise identical for any thread count.

#include <cstddef>
#include <span>

namespace par::kernels {

/// Worker cap for the parallel kernels (>= 1).
void set_num_threads(int threads);
int num_threads();

/// Reads PAR_THREADS; unset means the OpenMP default, unparsable means 1.
int threads_from_env();

/// Shape of one GEMM: C[p x r] = op(A)[p x q] * op(B)[q x r].
/// op(A) = A^T when trans_a is set, in which case A is stored q x p (same for B).
struct GemmShape {
  std::size_t p = 0;
  std::size_t q = 0;
  std::size_t r = 0;
  bool trans_a = false;
  bool trans_b = false;
};

/// Batched GEMM. `a_stride`/`b_stride` of 0 broadcast one operand across the
/// batch. When `accumulate` is set C += op(A)op(B), otherwise C is overwritten.
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          const GemmShape& shape, std::size_t batch = 1, std::size_t a_stride = 0,
          std::size_t b_stride = 0, bool accumulate = false);

/// Row-wise softmax with max subtraction.
void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols);

/// dx += J^T dy for row-wise softmax given its output y.
void softmax_rows_backward(std::span<const double> y, std::span<const double> dy,
                           std::span<double> dx, std::size_t rows, std::size_t cols);

namespace reference {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          const GemmShape& shape, std::size_t batch = 1, std::size_t a_stride = 0,
          std::size_t b_stride = 0, bool accumulate = false);

void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols);

void softmax_rows_backward(std::span<const double> y, std::span<const double> dy,
                           std::span<double> dx, std::size_t rows, std::size_t cols);

}  // namespace reference
}  // namespace par::kernels
