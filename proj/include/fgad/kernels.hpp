#pragma once

#include <cstddef>
#include <span>

#include "fgad/matrix.hpp"

// Dense kernels behind the autodiff tape and the server aggregation.
//
// Every kernel exists twice: a plain serial reference and an OpenMP
// version that splits output rows (or output scalars) across threads. Both
// accumulate each output element over the inner index in increasing order,
// so the two paths are bit-identical; tests rely on this.
namespace fgad::kernels {

enum class Accumulate { Overwrite, Add };

namespace reference {
// out = a * b
void matmul(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc = Accumulate::Overwrite);
// out = a^T * b
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc = Accumulate::Overwrite);
// out = a * b^T
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc = Accumulate::Overwrite);
// out[j] = sum_c weights[c] * vectors[c][j], summed in client order
void weighted_sum(std::span<const std::span<const double>> vectors, std::span<const double> weights,
                  std::span<double> out);
}  // namespace reference

namespace parallel {
void matmul(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc = Accumulate::Overwrite);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc = Accumulate::Overwrite);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc = Accumulate::Overwrite);
void weighted_sum(std::span<const std::span<const double>> vectors, std::span<const double> weights,
                  std::span<double> out);
}  // namespace parallel

// Dispatching entry points: the OpenMP path is taken when the work is large
// enough to amortise a parallel region and we are not already inside one
// (client-level parallelism owns the threads in that case).
void matmul(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc = Accumulate::Overwrite);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc = Accumulate::Overwrite);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc = Accumulate::Overwrite);
void weighted_sum(std::span<const std::span<const double>> vectors, std::span<const double> weights,
                  std::span<double> out);

// Work (multiply-add count) above which the dispatchers go parallel.
inline constexpr std::size_t kParallelWorkThreshold = std::size_t{1} << 18;

}  // namespace fgad::kernels
