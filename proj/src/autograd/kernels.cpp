#include "par/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

namespace par::kernels {
namespace {

std::atomic<int> g_threads{1};

constexpr std::size_t kMr = 6;
constexpr std::size_t kNr = 16;
constexpr std::size_t kKc = 256;

typedef double v8d __attribute__((vector_size(64)));

inline v8d load8(const double* p) {
  v8d v;
  __builtin_memcpy(&v, p, sizeof v);
  return v;
}

inline void store8(double* p, v8d v) { __builtin_memcpy(p, &v, sizeof v); }

// Stores the transpose of a rows x cols row-major block.
void transpose_into(const double* src, double* dst, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
  }
}

// Full kMr x kNr register tile: twelve 8-wide accumulators.
inline void tile_full(const double* a, std::size_t lda, const double* b, std::size_t ldb,
                      double* c, std::size_t ldc, std::size_t q, bool accumulate) {
  v8d acc[kMr][2] = {};
  for (std::size_t k = 0; k < q; ++k) {
    const v8d b0 = load8(b + k * ldb);
    const v8d b1 = load8(b + k * ldb + 8);
    for (std::size_t ii = 0; ii < kMr; ++ii) {
      const double av = a[ii * lda + k];
      acc[ii][0] += av * b0;
      acc[ii][1] += av * b1;
    }
  }
  for (std::size_t ii = 0; ii < kMr; ++ii) {
    double* crow = c + ii * ldc;
    if (accumulate) {
      store8(crow, load8(crow) + acc[ii][0]);
      store8(crow + 8, load8(crow + 8) + acc[ii][1]);
    } else {
      store8(crow, acc[ii][0]);
      store8(crow + 8, acc[ii][1]);
    }
  }
}

// Ragged edge tile. The B panel is zero-padded to kNr columns so every
// element sees the same vector arithmetic as in tile_full.
inline void tile_edge(const double* a, std::size_t lda, const double* b, std::size_t ldb,
                      double* c, std::size_t ldc, std::size_t q, std::size_t mr,
                      std::size_t nr, bool accumulate) {
  thread_local std::vector<double> panel;
  panel.assign(q * kNr, 0.0);
  for (std::size_t k = 0; k < q; ++k) std::copy_n(b + k * ldb, nr, panel.data() + k * kNr);
  v8d acc[kMr][2] = {};
  for (std::size_t k = 0; k < q; ++k) {
    const v8d b0 = load8(panel.data() + k * kNr);
    const v8d b1 = load8(panel.data() + k * kNr + 8);
    for (std::size_t ii = 0; ii < mr; ++ii) {
      const double av = a[ii * lda + k];
      acc[ii][0] += av * b0;
      if (nr > 8) acc[ii][1] += av * b1;
    }
  }
  for (std::size_t ii = 0; ii < mr; ++ii) {
    double tmp[kNr];
    store8(tmp, acc[ii][0]);
    store8(tmp + 8, acc[ii][1]);
    double* crow = c + ii * ldc;
    for (std::size_t jj = 0; jj < nr; ++jj) crow[jj] = accumulate ? crow[jj] + tmp[jj] : tmp[jj];
  }
}

void softmax_row(const double* x, double* y, std::size_t cols) {
  double mx = x[0];
  for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
  double total = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    y[j] = std::exp(x[j] - mx);
    total += y[j];
  }
  const double inv = 1.0 / total;
  for (std::size_t j = 0; j < cols; ++j) y[j] *= inv;
}

void softmax_row_backward(const double* y, const double* dy, double* dx, std::size_t cols) {
  double dot = 0.0;
  for (std::size_t j = 0; j < cols; ++j) dot += y[j] * dy[j];
  for (std::size_t j = 0; j < cols; ++j) dx[j] += y[j] * (dy[j] - dot);
}

}  // namespace

void set_num_threads(int threads) { g_threads.store(std::max(1, threads)); }

int num_threads() { return g_threads.load(); }

int threads_from_env() {
  const char* raw = std::getenv("PAR_THREADS");
  if (raw == nullptr || *raw == '\0') return omp_get_max_threads();
  try {
    return std::max(1, std::stoi(raw));
  } catch (const std::exception&) {
    return 1;
  }
}

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          const GemmShape& s, std::size_t batch, std::size_t a_stride, std::size_t b_stride,
          bool accumulate) {
  const std::size_t p = s.p, q = s.q, r = s.r;
  if (p == 0 || r == 0 || batch == 0) return;
  const int threads = num_threads();

  // Bring both operands to plain row-major op(A) (p x q) and op(B) (q x r).
  const std::size_t a_count = a_stride == 0 ? 1 : batch;
  const std::size_t b_count = b_stride == 0 ? 1 : batch;
  std::vector<double> a_t, b_t;
  const double* a_base = a.data();
  const double* b_base = b.data();
  std::size_t a_step = a_stride, b_step = b_stride;
  if (s.trans_a) {
    a_t.resize(a_count * p * q);
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::size_t g = 0; g < a_count; ++g) {
      transpose_into(a.data() + g * a_stride, a_t.data() + g * p * q, q, p);
    }
    a_base = a_t.data();
    a_step = a_stride == 0 ? 0 : p * q;
  }
  if (s.trans_b) {
    b_t.resize(b_count * q * r);
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::size_t g = 0; g < b_count; ++g) {
      transpose_into(b.data() + g * b_stride, b_t.data() + g * q * r, r, q);
    }
    b_base = b_t.data();
    b_step = b_stride == 0 ? 0 : q * r;
  }

  if (q == 0) {
    if (!accumulate) std::fill(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(batch * p * r), 0.0);
    return;
  }

  // Column blocks outer, row blocks inner: a B panel stays cache-resident while
  // every row block of A streams past it. Long inner dimensions are split into
  // kKc slices that accumulate into C in a fixed order.
  const std::size_t row_blocks = (p + kMr - 1) / kMr;
  const std::size_t col_blocks = (r + kNr - 1) / kNr;
  const std::size_t tiles = batch * col_blocks * row_blocks;
  for (std::size_t k0 = 0; k0 < q; k0 += kKc) {
    const std::size_t kc = std::min(kKc, q - k0);
    const bool acc = accumulate || k0 > 0;
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::size_t t = 0; t < tiles; ++t) {
      const std::size_t g = t / (col_blocks * row_blocks);
      const std::size_t rem = t % (col_blocks * row_blocks);
      const std::size_t jb = rem / row_blocks;
      const std::size_t ib = rem % row_blocks;
      const std::size_t i0 = ib * kMr, j0 = jb * kNr;
      const std::size_t mr = std::min(kMr, p - i0), nr = std::min(kNr, r - j0);
      const double* ap = a_base + g * a_step + i0 * q + k0;
      const double* bp = b_base + g * b_step + k0 * r + j0;
      double* cp = c.data() + g * p * r + i0 * r + j0;
      if (mr == kMr && nr == kNr) {
        tile_full(ap, q, bp, r, cp, r, kc, acc);
      } else {
        tile_edge(ap, q, bp, r, cp, r, kc, mr, nr, acc);
      }
    }
  }
}

void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols) {
  if (cols == 0) return;
#pragma omp parallel for schedule(static) num_threads(num_threads())
  for (std::size_t i = 0; i < rows; ++i) softmax_row(x.data() + i * cols, y.data() + i * cols, cols);
}

void softmax_rows_backward(std::span<const double> y, std::span<const double> dy,
                           std::span<double> dx, std::size_t rows, std::size_t cols) {
  if (cols == 0) return;
#pragma omp parallel for schedule(static) num_threads(num_threads())
  for (std::size_t i = 0; i < rows; ++i) {
    softmax_row_backward(y.data() + i * cols, dy.data() + i * cols, dx.data() + i * cols, cols);
  }
}

namespace reference {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          const GemmShape& s, std::size_t batch, std::size_t a_stride, std::size_t b_stride,
          bool accumulate) {
  for (std::size_t g = 0; g < batch; ++g) {
    const double* ag = a.data() + g * a_stride;
    const double* bg = b.data() + g * b_stride;
    double* cg = c.data() + g * s.p * s.r;
    for (std::size_t i = 0; i < s.p; ++i) {
      for (std::size_t j = 0; j < s.r; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < s.q; ++k) {
          const double av = s.trans_a ? ag[k * s.p + i] : ag[i * s.q + k];
          const double bv = s.trans_b ? bg[j * s.q + k] : bg[k * s.r + j];
          acc += av * bv;
        }
        cg[i * s.r + j] = accumulate ? cg[i * s.r + j] + acc : acc;
      }
    }
  }
}

void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xi = x.data() + i * cols;
    double* yi = y.data() + i * cols;
    double mx = -INFINITY;
    for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, xi[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) total += std::exp(xi[j] - mx);
    for (std::size_t j = 0; j < cols; ++j) yi[j] = std::exp(xi[j] - mx) / total;
  }
}

void softmax_rows_backward(std::span<const double> y, std::span<const double> dy,
                           std::span<double> dx, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double g = 0.0;
      for (std::size_t k = 0; k < cols; ++k) {
        const double jac = y[i * cols + j] * ((j == k ? 1.0 : 0.0) - y[i * cols + k]);
        g += jac * dy[i * cols + k];
      }
      dx[i * cols + j] += g;
    }
  }
}

}  // namespace reference
}  // namespace par::kernels
