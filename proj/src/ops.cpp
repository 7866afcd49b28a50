#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "trimodal/errors.hpp"
#include "trimodal/tape.hpp"

namespace trimodal {

namespace {

// C[m x n] += A[m x k] * B[k x n]
using v4d = double __attribute__((vector_size(32)));

inline v4d load4(const double* p) {
    v4d v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

inline void store4(double* p, v4d v) { std::memcpy(p, &v, sizeof v); }

// C[m x n] += A[m x k] * B[k x n]. Each output element accumulates over k in
// ascending order, so results do not depend on the blocking.
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const double* a0 = a + i * k;
        const double* a1 = a0 + k;
        const double* a2 = a1 + k;
        const double* a3 = a2 + k;
        double* c0 = c + i * n;
        double* c1 = c0 + n;
        double* c2 = c1 + n;
        double* c3 = c2 + n;
        std::size_t j = 0;
        for (; j + 8 <= n; j += 8) {
            v4d x0 = load4(c0 + j), y0 = load4(c0 + j + 4);
            v4d x1 = load4(c1 + j), y1 = load4(c1 + j + 4);
            v4d x2 = load4(c2 + j), y2 = load4(c2 + j + 4);
            v4d x3 = load4(c3 + j), y3 = load4(c3 + j + 4);
            for (std::size_t p = 0; p < k; ++p) {
                const v4d bl = load4(b + p * n + j), bh = load4(b + p * n + j + 4);
                const double s0 = a0[p], s1 = a1[p], s2 = a2[p], s3 = a3[p];
                x0 += s0 * bl;
                y0 += s0 * bh;
                x1 += s1 * bl;
                y1 += s1 * bh;
                x2 += s2 * bl;
                y2 += s2 * bh;
                x3 += s3 * bl;
                y3 += s3 * bh;
            }
            store4(c0 + j, x0), store4(c0 + j + 4, y0);
            store4(c1 + j, x1), store4(c1 + j + 4, y1);
            store4(c2 + j, x2), store4(c2 + j + 4, y2);
            store4(c3 + j, x3), store4(c3 + j + 4, y3);
        }
        for (; j < n; ++j) {
            double s0 = c0[j], s1 = c1[j], s2 = c2[j], s3 = c3[j];
            for (std::size_t p = 0; p < k; ++p) {
                const double bv = b[p * n + j];
                s0 += a0[p] * bv;
                s1 += a1[p] * bv;
                s2 += a2[p] * bv;
                s3 += a3[p] * bv;
            }
            c0[j] = s0, c1[j] = s1, c2[j] = s2, c3[j] = s3;
        }
    }
    for (; i < m; ++i) {
        double* __restrict ci = c + i * n;
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* __restrict bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// C[m x k] += A[m x n] * B^T, B is k x n
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
    std::vector<double> bt(n * k);
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
    gemm_nn(a, bt.data(), c, m, n, k);
}

// C[k x n] += A^T * B, A is m x k, B is m x n
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
    std::vector<double> at(m * k);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
    gemm_nn(at.data(), b, c, k, m, n);
}

void require_same_shape(const char* op, Var a, Var b) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

void require_same_tape(const char* op, Var a, Var b) {
    if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
}

Shape mat_shape(std::size_t r, std::size_t c) { return Shape{r, c}; }

template <class F, class D>
Var unary(Var a, F f, D df) {
    const auto& x = a.value();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    const auto ia = a.id();
    return a.tape().record(a.shape(), std::move(y), {ia}, [ia, df](Tape& t, std::size_t self) {
        const auto& g = t.grad(self);
        const auto& x = t.value(ia);
        const auto& y = t.value(self);
        auto& ga = t.grad_mut(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
    });
}

}  // namespace

Var matmul(Var a, Var b) {
    require_same_tape("matmul", a, b);
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    std::vector<double> c(m * n, 0.0);
    gemm_nn(a.value().data(), b.value().data(), c.data(), m, k, n);
    const auto ia = a.id(), ib = b.id();
    return a.tape().record(mat_shape(m, n), std::move(c), {ia, ib},
                           [ia, ib, m, k, n](Tape& t, std::size_t self) {
                               const auto& g = t.grad(self);
                               if (t.needs_grad(ia)) {
                                   gemm_nt(g.data(), t.value(ib).data(), t.grad_mut(ia).data(), m,
                                           n, k);
                               }
                               if (t.needs_grad(ib)) {
                                   gemm_tn(t.value(ia).data(), g.data(), t.grad_mut(ib).data(), m,
                                           k, n);
                               }
                           });
}

Var transpose(Var a) {
    const std::size_t r = a.rows(), c = a.cols();
    const auto& x = a.value();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) y[j * r + i] = x[i * c + j];
    const auto ia = a.id();
    return a.tape().record(mat_shape(c, r), std::move(y), {ia}, [ia, r, c](Tape& t, std::size_t self) {
        const auto& g = t.grad(self);
        auto& ga = t.grad_mut(ia);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
    });
}

Var add(Var a, Var b) {
    require_same_tape("add", a, b);
    require_same_shape("add", a, b);
    std::vector<double> y = a.value();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
    const auto ia = a.id(), ib = b.id();
    return a.tape().record(a.shape(), std::move(y), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
        const auto& g = t.grad(self);
        for (auto id : {ia, ib}) {
            if (!t.needs_grad(id)) continue;
            auto& gx = t.grad_mut(id);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
    });
}

Var sub(Var a, Var b) {
    require_same_tape("sub", a, b);
    require_same_shape("sub", a, b);
    std::vector<double> y = a.value();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
    const auto ia = a.id(), ib = b.id();
    return a.tape().record(a.shape(), std::move(y), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
        const auto& g = t.grad(self);
        if (t.needs_grad(ia)) {
            auto& ga = t.grad_mut(ia);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (t.needs_grad(ib)) {
            auto& gb = t.grad_mut(ib);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Var mul(Var a, Var b) {
    require_same_tape("mul", a, b);
    require_same_shape("mul", a, b);
    std::vector<double> y = a.value();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
    const auto ia = a.id(), ib = b.id();
    return a.tape().record(a.shape(), std::move(y), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
        const auto& g = t.grad(self);
        if (t.needs_grad(ia)) {
            const auto& bv = t.value(ib);
            auto& ga = t.grad_mut(ia);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (t.needs_grad(ib)) {
            const auto& av = t.value(ia);
            auto& gb = t.grad_mut(ib);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

Var scale(Var a, double s) {
    return unary(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale_by(Var a, Var s) {
    require_same_tape("scale_by", a, s);
    if (s.numel() != 1) throw DimensionError("scale_by: factor must be a single element, got " + shape_str(s.shape()));
    const double sv = s.value()[0];
    std::vector<double> y = a.value();
    for (auto& v : y) v *= sv;
    const auto ia = a.id(), is = s.id();
    return a.tape().record(a.shape(), std::move(y), {ia, is}, [ia, is](Tape& t, std::size_t self) {
        const auto& g = t.grad(self);
        if (t.needs_grad(ia)) {
            const double sv = t.value(is)[0];
            auto& ga = t.grad_mut(ia);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sv;
        }
        if (t.needs_grad(is)) {
            const auto& av = t.value(ia);
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
            t.grad_mut(is)[0] += acc;
        }
    });
}

Var add_row(Var a, Var row) {
    require_same_tape("add_row", a, row);
    const std::size_t r = a.rows(), c = a.cols();
    if (row.numel() != c) {
        throw DimensionError("add_row: row " + shape_str(row.shape()) + " does not match width of " +
                             shape_str(a.shape()));
    }
    std::vector<double> y = a.value();
    const auto& b = row.value();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) y[i * c + j] += b[j];
    const auto ia = a.id(), ib = row.id();
    return a.tape().record(a.shape(), std::move(y), {ia, ib}, [ia, ib, r, c](Tape& t, std::size_t self) {
        const auto& g = t.grad(self);
        if (t.needs_grad(ia)) {
            auto& ga = t.grad_mut(ia);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (t.needs_grad(ib)) {
            auto& gb = t.grad_mut(ib);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
        }
    });
}

Var sigmoid(Var a) {
    return unary(
        a, [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Var gelu(Var a) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    return unary(
        a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
        [](double x, double) {
            return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt2pi * std::exp(-0.5 * x * x);
        });
}

Var exp(Var a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
    for (double v : a.value()) {
        if (!(v > 0.0)) throw DegenerateInputError("log: non-positive input");
    }
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    const std::size_t r = parts[0].rows();
    std::size_t total = 0;
    std::vector<std::size_t> ids, widths;
    for (const auto& p : parts) {
        require_same_tape("concat_cols", parts[0], p);
        if (p.rows() != r) {
            throw DimensionError("concat_cols: row counts differ, " + shape_str(parts[0].shape()) +
                                 " vs " + shape_str(p.shape()));
        }
        ids.push_back(p.id());
        widths.push_back(p.cols());
        total += p.cols();
    }
    std::vector<double> y(r * total);
    std::size_t off = 0;
    for (const auto& p : parts) {
        const auto& x = p.value();
        const std::size_t c = p.cols();
        for (std::size_t i = 0; i < r; ++i) std::copy_n(x.data() + i * c, c, y.data() + i * total + off);
        off += c;
    }
    return parts[0].tape().record(mat_shape(r, total), std::move(y), ids,
                                  [ids, widths, r, total](Tape& t, std::size_t self) {
                                      const auto& g = t.grad(self);
                                      std::size_t off = 0;
                                      for (std::size_t q = 0; q < ids.size(); ++q) {
                                          const std::size_t c = widths[q];
                                          if (t.needs_grad(ids[q])) {
                                              auto& gx = t.grad_mut(ids[q]);
                                              for (std::size_t i = 0; i < r; ++i)
                                                  for (std::size_t j = 0; j < c; ++j)
                                                      gx[i * c + j] += g[i * total + off + j];
                                          }
                                          off += c;
                                      }
                                  });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ContractError("concat_rows: no inputs");
    const std::size_t c = parts[0].cols();
    std::size_t total = 0;
    std::vector<std::size_t> ids, sizes;
    for (const auto& p : parts) {
        require_same_tape("concat_rows", parts[0], p);
        if (p.cols() != c) {
            throw DimensionError("concat_rows: widths differ, " + shape_str(parts[0].shape()) +
                                 " vs " + shape_str(p.shape()));
        }
        ids.push_back(p.id());
        sizes.push_back(p.numel());
        total += p.rows();
    }
    std::vector<double> y;
    y.reserve(total * c);
    for (const auto& p : parts) y.insert(y.end(), p.value().begin(), p.value().end());
    return parts[0].tape().record(mat_shape(total, c), std::move(y), ids,
                                  [ids, sizes](Tape& t, std::size_t self) {
                                      const auto& g = t.grad(self);
                                      std::size_t off = 0;
                                      for (std::size_t q = 0; q < ids.size(); ++q) {
                                          if (t.needs_grad(ids[q])) {
                                              auto& gx = t.grad_mut(ids[q]);
                                              for (std::size_t i = 0; i < sizes[q]; ++i) gx[i] += g[off + i];
                                          }
                                          off += sizes[q];
                                      }
                                  });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
    const std::size_t c = a.cols();
    if (count == 0 || start + count > a.rows()) {
        throw DimensionError("slice_rows: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                             ") out of range for " + shape_str(a.shape()));
    }
    std::vector<double> y(a.value().begin() + start * c, a.value().begin() + (start + count) * c);
    const auto ia = a.id();
    return a.tape().record(mat_shape(count, c), std::move(y), {ia}, [ia, start, c](Tape& t, std::size_t self) {
        const auto& g = t.grad(self);
        auto& ga = t.grad_mut(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[start * c + i] += g[i];
    });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
    const std::size_t r = a.rows(), c = a.cols();
    if (count == 0 || start + count > c) {
        throw DimensionError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                             ") out of range for " + shape_str(a.shape()));
    }
    std::vector<double> y(r * count);
    const auto& x = a.value();
    for (std::size_t i = 0; i < r; ++i) std::copy_n(x.data() + i * c + start, count, y.data() + i * count);
    const auto ia = a.id();
    return a.tape().record(mat_shape(r, count), std::move(y), {ia},
                           [ia, start, r, c, count](Tape& t, std::size_t self) {
                               const auto& g = t.grad(self);
                               auto& ga = t.grad_mut(ia);
                               for (std::size_t i = 0; i < r; ++i)
                                   for (std::size_t j = 0; j < count; ++j) ga[i * c + start + j] += g[i * count + j];
                           });
}

Var tile_rows(Var a, std::size_t times) {
    if (times == 0) throw ContractError("tile_rows: times must be positive");
    const std::size_t n = a.numel();
    std::vector<double> y;
    y.reserve(n * times);
    for (std::size_t k = 0; k < times; ++k) y.insert(y.end(), a.value().begin(), a.value().end());
    const auto ia = a.id();
    return a.tape().record(mat_shape(a.rows() * times, a.cols()), std::move(y), {ia},
                           [ia, n, times](Tape& t, std::size_t self) {
                               const auto& g = t.grad(self);
                               auto& ga = t.grad_mut(ia);
                               for (std::size_t k = 0; k < times; ++k)
                                   for (std::size_t i = 0; i < n; ++i) ga[i] += g[k * n + i];
                           });
}

Var repeat_rows(Var a, std::size_t times) {
    if (times == 0) throw ContractError("repeat_rows: times must be positive");
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> y;
    y.reserve(r * c * times);
    const auto& x = a.value();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t k = 0; k < times; ++k) y.insert(y.end(), x.begin() + i * c, x.begin() + (i + 1) * c);
    const auto ia = a.id();
    return a.tape().record(mat_shape(r * times, c), std::move(y), {ia},
                           [ia, r, c, times](Tape& t, std::size_t self) {
                               const auto& g = t.grad(self);
                               auto& ga = t.grad_mut(ia);
                               for (std::size_t i = 0; i < r; ++i)
                                   for (std::size_t k = 0; k < times; ++k)
                                       for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[(i * times + k) * c + j];
                           });
}

namespace {

std::size_t pool_group(const char* op, Var a, std::size_t group) {
    if (group == 0) group = a.rows();
    if (a.rows() % group != 0) {
        throw DimensionError(std::string(op) + ": " + std::to_string(a.rows()) +
                             " rows do not split into groups of " + std::to_string(group));
    }
    return group;
}

}  // namespace

Var max_pool_rows(Var a, std::size_t group) {
    group = pool_group("max_pool_rows", a, group);
    const std::size_t c = a.cols(), out_rows = a.rows() / group;
    const auto& x = a.value();
    std::vector<double> y(out_rows * c);
    std::vector<std::size_t> arg(out_rows * c);
    for (std::size_t o = 0; o < out_rows; ++o) {
        for (std::size_t j = 0; j < c; ++j) {
            std::size_t best = o * group;
            for (std::size_t i = best + 1; i < (o + 1) * group; ++i) {
                if (x[i * c + j] > x[best * c + j]) best = i;
            }
            y[o * c + j] = x[best * c + j];
            arg[o * c + j] = best * c + j;
        }
    }
    const auto ia = a.id();
    return a.tape().record(mat_shape(out_rows, c), std::move(y), {ia},
                           [ia, arg = std::move(arg)](Tape& t, std::size_t self) {
                               const auto& g = t.grad(self);
                               auto& ga = t.grad_mut(ia);
                               for (std::size_t i = 0; i < g.size(); ++i) ga[arg[i]] += g[i];
                           });
}

Var mean_pool_rows(Var a, std::size_t group) {
    group = pool_group("mean_pool_rows", a, group);
    const std::size_t c = a.cols(), out_rows = a.rows() / group;
    const auto& x = a.value();
    std::vector<double> y(out_rows * c, 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < c; ++j) y[(i / group) * c + j] += x[i * c + j];
    const double inv = 1.0 / static_cast<double>(group);
    for (auto& v : y) v *= inv;
    const auto ia = a.id();
    const std::size_t rows = a.rows();
    return a.tape().record(mat_shape(out_rows, c), std::move(y), {ia},
                           [ia, rows, c, group, inv](Tape& t, std::size_t self) {
                               const auto& g = t.grad(self);
                               auto& ga = t.grad_mut(ia);
                               for (std::size_t i = 0; i < rows; ++i)
                                   for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[(i / group) * c + j] * inv;
                           });
}

Var l2_normalize_rows(Var a) {
    const std::size_t r = a.rows(), c = a.cols();
    const auto& x = a.value();
    std::vector<double> y(x.size()), norms(r);
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += x[i * c + j] * x[i * c + j];
        const double n = std::sqrt(s);
        if (n < 1e-12) {
            throw DegenerateInputError("l2_normalize: row " + std::to_string(i) + " has norm below 1e-12");
        }
        norms[i] = n;
        for (std::size_t j = 0; j < c; ++j) y[i * c + j] = x[i * c + j] / n;
    }
    const auto ia = a.id();
    return a.tape().record(a.shape(), std::move(y), {ia},
                           [ia, r, c, norms = std::move(norms)](Tape& t, std::size_t self) {
                               const auto& g = t.grad(self);
                               const auto& y = t.value(self);
                               auto& ga = t.grad_mut(ia);
                               for (std::size_t i = 0; i < r; ++i) {
                                   double d = 0.0;
                                   for (std::size_t j = 0; j < c; ++j) d += y[i * c + j] * g[i * c + j];
                                   for (std::size_t j = 0; j < c; ++j)
                                       ga[i * c + j] += (g[i * c + j] - y[i * c + j] * d) / norms[i];
                               }
                           });
}

namespace {

void softmax_inplace(double* row, std::size_t n) {
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - mx);
        s += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= s;
}

// dx = y * (dy - <y, dy>) for one softmax row.
void softmax_backward_row(const double* y, const double* dy, double* dx, std::size_t n) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += y[j] * dy[j];
    for (std::size_t j = 0; j < n; ++j) dx[j] += y[j] * (dy[j] - d);
}

}  // namespace

Var softmax(Var a, int axis) {
    if (axis == 0) return transpose(softmax(transpose(a), 1));
    if (axis != 1 && axis != -1) throw ContractError("softmax: axis must be 0 or 1");
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> y = a.value();
    for (std::size_t i = 0; i < r; ++i) softmax_inplace(y.data() + i * c, c);
    const auto ia = a.id();
    return a.tape().record(a.shape(), std::move(y), {ia}, [ia, r, c](Tape& t, std::size_t self) {
        const auto& g = t.grad(self);
        const auto& y = t.value(self);
        auto& ga = t.grad_mut(ia);
        for (std::size_t i = 0; i < r; ++i) softmax_backward_row(y.data() + i * c, g.data() + i * c, ga.data() + i * c, c);
    });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
    require_same_tape("layer_norm", x, gain);
    require_same_tape("layer_norm", x, bias);
    const std::size_t r = x.rows(), d = x.cols();
    if (gain.numel() != d || bias.numel() != d) {
        throw DimensionError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                             shape_str(bias.shape()) + " do not match width of " + shape_str(x.shape()));
    }
    if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
    const auto& xv = x.value();
    const auto& gv = gain.value();
    const auto& bv = bias.value();
    std::vector<double> y(xv.size()), xhat(xv.size()), inv_std(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double* xi = xv.data() + i * d;
        double m = 0.0;
        for (std::size_t j = 0; j < d; ++j) m += xi[j];
        m /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (xi[j] - m) * (xi[j] - m);
        var /= static_cast<double>(d);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) {
            xhat[i * d + j] = (xi[j] - m) * inv_std[i];
            y[i * d + j] = xhat[i * d + j] * gv[j] + bv[j];
        }
    }
    const auto ix = x.id(), ig = gain.id(), ib = bias.id();
    return x.tape().record(
        x.shape(), std::move(y), {ix, ig, ib},
        [ix, ig, ib, r, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
            const auto& g = t.grad(self);
            if (t.needs_grad(ig)) {
                auto& gg = t.grad_mut(ig);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < d; ++j) gg[j] += g[i * d + j] * xhat[i * d + j];
            }
            if (t.needs_grad(ib)) {
                auto& gb = t.grad_mut(ib);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
            }
            if (t.needs_grad(ix)) {
                const auto& gv = t.value(ig);
                auto& gx = t.grad_mut(ix);
                const double inv_d = 1.0 / static_cast<double>(d);
                for (std::size_t i = 0; i < r; ++i) {
                    double m1 = 0.0, m2 = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double gh = g[i * d + j] * gv[j];
                        m1 += gh;
                        m2 += gh * xhat[i * d + j];
                    }
                    m1 *= inv_d;
                    m2 *= inv_d;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double gh = g[i * d + j] * gv[j];
                        gx[i * d + j] += inv_std[i] * (gh - m1 - xhat[i * d + j] * m2);
                    }
                }
            }
        });
}

Var attention(Var q, Var k, Var v, std::size_t heads, std::size_t groups) {
    require_same_tape("attention", q, k);
    require_same_tape("attention", q, v);
    const std::size_t d = q.cols(), dv = v.cols();
    if (k.cols() != d) {
        throw DimensionError("attention: query width " + shape_str(q.shape()) + " does not match key width " +
                             shape_str(k.shape()));
    }
    if (k.rows() != v.rows()) {
        throw DimensionError("attention: key rows " + shape_str(k.shape()) + " vs value rows " +
                             shape_str(v.shape()));
    }
    if (heads == 0 || d % heads != 0 || dv % heads != 0) {
        throw DimensionError("attention: widths " + std::to_string(d) + "/" + std::to_string(dv) +
                             " do not split into " + std::to_string(heads) + " heads");
    }
    if (groups == 0 || q.rows() % groups != 0 || k.rows() % groups != 0) {
        throw DimensionError("attention: rows do not split into " + std::to_string(groups) + " groups");
    }
    const std::size_t nq = q.rows() / groups, nk = k.rows() / groups;
    const std::size_t dh = d / heads, dvh = dv / heads;
    const double scl = 1.0 / std::sqrt(static_cast<double>(dh));
    const auto& qv = q.value();
    const auto& kv = k.value();
    const auto& vv = v.value();
    // probs layout: [group][head][nq][nk]
    std::vector<double> probs(groups * heads * nq * nk);
    std::vector<double> out(groups * nq * dv, 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t h = 0; h < heads; ++h) {
            double* p = probs.data() + (g * heads + h) * nq * nk;
            for (std::size_t i = 0; i < nq; ++i) {
                const double* qi = qv.data() + (g * nq + i) * d + h * dh;
                for (std::size_t j = 0; j < nk; ++j) {
                    const double* kj = kv.data() + (g * nk + j) * d + h * dh;
                    double s = 0.0;
                    for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
                    p[i * nk + j] = s * scl;
                }
                softmax_inplace(p + i * nk, nk);
                double* oi = out.data() + (g * nq + i) * dv + h * dvh;
                for (std::size_t j = 0; j < nk; ++j) {
                    const double w = p[i * nk + j];
                    const double* vj = vv.data() + (g * nk + j) * dv + h * dvh;
                    for (std::size_t c = 0; c < dvh; ++c) oi[c] += w * vj[c];
                }
            }
        }
    }
    const auto iq = q.id(), ik = k.id(), iv = v.id();
    return q.tape().record(
        mat_shape(groups * nq, dv), std::move(out), {iq, ik, iv},
        [=, probs = std::move(probs)](Tape& t, std::size_t self) {
            const auto& go = t.grad(self);
            const auto& qv = t.value(iq);
            const auto& kv = t.value(ik);
            const auto& vv = t.value(iv);
            const bool need_q = t.needs_grad(iq), need_k = t.needs_grad(ik), need_v = t.needs_grad(iv);
            double* gq = need_q ? t.grad_mut(iq).data() : nullptr;
            double* gk = need_k ? t.grad_mut(ik).data() : nullptr;
            double* gv = need_v ? t.grad_mut(iv).data() : nullptr;
            std::vector<double> dp(nk), ds(nk);
            for (std::size_t g = 0; g < groups; ++g) {
                for (std::size_t h = 0; h < heads; ++h) {
                    const double* p = probs.data() + (g * heads + h) * nq * nk;
                    for (std::size_t i = 0; i < nq; ++i) {
                        const double* goi = go.data() + (g * nq + i) * dv + h * dvh;
                        for (std::size_t j = 0; j < nk; ++j) {
                            const double* vj = vv.data() + (g * nk + j) * dv + h * dvh;
                            double s = 0.0;
                            for (std::size_t c = 0; c < dvh; ++c) s += goi[c] * vj[c];
                            dp[j] = s;
                            if (gv) {
                                double* gvj = gv + (g * nk + j) * dv + h * dvh;
                                const double w = p[i * nk + j];
                                for (std::size_t c = 0; c < dvh; ++c) gvj[c] += w * goi[c];
                            }
                        }
                        std::fill(ds.begin(), ds.end(), 0.0);
                        softmax_backward_row(p + i * nk, dp.data(), ds.data(), nk);
                        const double* qi = qv.data() + (g * nq + i) * d + h * dh;
                        for (std::size_t j = 0; j < nk; ++j) {
                            const double w = ds[j] * scl;
                            if (w == 0.0) continue;
                            const double* kj = kv.data() + (g * nk + j) * d + h * dh;
                            if (gq) {
                                double* gqi = gq + (g * nq + i) * d + h * dh;
                                for (std::size_t c = 0; c < dh; ++c) gqi[c] += w * kj[c];
                            }
                            if (gk) {
                                double* gkj = gk + (g * nk + j) * d + h * dh;
                                for (std::size_t c = 0; c < dh; ++c) gkj[c] += w * qi[c];
                            }
                        }
                    }
                }
            }
        });
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value()) s += v;
    const auto ia = a.id();
    return a.tape().record(Shape{1}, {s}, {ia}, [ia](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        for (auto& v : t.grad_mut(ia)) v += g;
    });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Var cross_entropy_rows(Var logits, std::span<const std::size_t> targets) {
    const std::size_t r = logits.rows(), c = logits.cols();
    if (targets.size() != r) {
        throw DimensionError("cross_entropy_rows: " + std::to_string(targets.size()) + " targets for " +
                             std::to_string(r) + " rows");
    }
    for (auto tgt : targets) {
        if (tgt >= c) throw ContractError("cross_entropy_rows: target " + std::to_string(tgt) + " out of range");
    }
    std::vector<double> probs = logits.value();
    double loss = 0.0;
    const auto& x = logits.value();
    for (std::size_t i = 0; i < r; ++i) {
        const double* xi = x.data() + i * c;
        double mx = xi[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, xi[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += std::exp(xi[j] - mx);
        const double lse = mx + std::log(s);
        loss += lse - xi[targets[i]];
        softmax_inplace(probs.data() + i * c, c);
    }
    loss /= static_cast<double>(r);
    const auto ia = logits.id();
    std::vector<std::size_t> tg(targets.begin(), targets.end());
    return logits.tape().record(Shape{1}, {loss}, {ia},
                                [ia, r, c, probs = std::move(probs), tg = std::move(tg)](Tape& t, std::size_t self) {
                                    const double g = t.grad(self)[0] / static_cast<double>(r);
                                    auto& ga = t.grad_mut(ia);
                                    for (std::size_t i = 0; i < r; ++i) {
                                        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g * probs[i * c + j];
                                        ga[i * c + tg[i]] -= g;
                                    }
                                });
}

Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

}  // namespace trimodal
