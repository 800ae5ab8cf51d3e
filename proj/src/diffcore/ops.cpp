// SPDX-License-Identifier: Apache-2.0
//
// csiforge: variable-rate CSI feedback codec and MIMO-OFDM simulation harness
// Copyright (C) 2026 The csiforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "csiforge/diffcore/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace csiforge::diff
{

namespace
{

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void require_same(const char *op, const Var &a, const Var &b)
{
    if (a.shape() != b.shape())
        throw ShapeError(op, "operand shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
}

template <typename F, typename D>
Var unary(const char *op, const Var &x, F f, D dfdx)
{
    const Tensor &xv = x.value();
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i)
        out[i] = f(xv[i]);
    Graph *g = &x.graph();
    const auto ix = x.id();
    const auto self = g->size();
    return g->record(op, std::move(out), {x}, [g, ix, self, dfdx](const Tensor &go, std::vector<Tensor *> &gi) {
        const Tensor &xin = g->value(ix);
        const Tensor &y = g->value(self);
        Tensor &gx = *gi[0];
        for (std::size_t i = 0; i < go.size(); ++i)
            gx[i] += go[i] * dfdx(xin[i], y[i]);
    });
}

constexpr double kGeluC = 0.7978845608028654; // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

} // namespace

Var add(const Var &a, const Var &b)
{
    require_same("add", a, b);
    Tensor out = a.value();
    const Tensor &bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += bv[i];
    return a.graph().record("add", std::move(out), {a, b}, [](const Tensor &go, std::vector<Tensor *> &gi) {
        for (auto *t : gi)
            if (t)
                for (std::size_t i = 0; i < go.size(); ++i)
                    (*t)[i] += go[i];
    });
}

Var sub(const Var &a, const Var &b)
{
    require_same("sub", a, b);
    Tensor out = a.value();
    const Tensor &bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] -= bv[i];
    return a.graph().record("sub", std::move(out), {a, b}, [](const Tensor &go, std::vector<Tensor *> &gi) {
        if (gi[0])
            for (std::size_t i = 0; i < go.size(); ++i)
                (*gi[0])[i] += go[i];
        if (gi[1])
            for (std::size_t i = 0; i < go.size(); ++i)
                (*gi[1])[i] -= go[i];
    });
}

Var mul(const Var &a, const Var &b)
{
    require_same("mul", a, b);
    const Tensor &av = a.value();
    const Tensor &bv = b.value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = av[i] * bv[i];
    Graph *g = &a.graph();
    const auto ia = a.id(), ib = b.id();
    return g->record("mul", std::move(out), {a, b}, [g, ia, ib](const Tensor &go, std::vector<Tensor *> &gi) {
        const Tensor &av = g->value(ia);
        const Tensor &bv = g->value(ib);
        if (gi[0])
            for (std::size_t i = 0; i < go.size(); ++i)
                (*gi[0])[i] += go[i] * bv[i];
        if (gi[1])
            for (std::size_t i = 0; i < go.size(); ++i)
                (*gi[1])[i] += go[i] * av[i];
    });
}

Var scale(const Var &x, double c)
{
    Tensor out = x.value();
    for (auto &v : out.storage())
        v *= c;
    return x.graph().record("scale", std::move(out), {x}, [c](const Tensor &go, std::vector<Tensor *> &gi) {
        for (std::size_t i = 0; i < go.size(); ++i)
            (*gi[0])[i] += c * go[i];
    });
}

Var add_bias(const Var &x, const Var &b)
{
    const Shape &xs = x.shape();
    const Shape &bs = b.shape();
    if (bs.size() > xs.size() || !std::equal(bs.rbegin(), bs.rend(), xs.rbegin()))
        throw ShapeError("add_bias", "bias " + to_string(bs) + " is not a suffix of " + to_string(xs));
    Tensor out = x.value();
    const Tensor &bv = b.value();
    const std::size_t n = bv.size();
    for (std::size_t off = 0; off < out.size(); off += n)
    {
        double *o = out.ptr() + off;
        for (std::size_t j = 0; j < n; ++j)
            o[j] += bv[j];
    }
    return x.graph().record("add_bias", std::move(out), {x, b}, [n](const Tensor &go, std::vector<Tensor *> &gi) {
        if (gi[0])
        {
            double *d = gi[0]->ptr();
            for (std::size_t i = 0; i < go.size(); ++i)
                d[i] += go[i];
        }
        if (gi[1])
        {
            double *d = gi[1]->ptr();
            for (std::size_t off = 0; off < go.size(); off += n)
            {
                const double *g = go.ptr() + off;
                for (std::size_t j = 0; j < n; ++j)
                    d[j] += g[j];
            }
        }
    });
}

Var mul_rows(const Var &x, const Var &s)
{
    const std::size_t rows = s.size();
    if (rows == 0 || x.size() % rows != 0)
        throw ShapeError("mul_rows", "cannot split " + to_string(x.shape()) + " into " + std::to_string(rows) + " rows");
    const std::size_t cols = x.size() / rows;
    const Tensor &xv = x.value();
    const Tensor &sv = s.value();
    Tensor out(xv.shape());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            out[r * cols + c] = xv[r * cols + c] * sv[r];
    Graph *g = &x.graph();
    const auto ix = x.id(), is = s.id();
    return g->record("mul_rows", std::move(out), {x, s},
                     [g, ix, is, rows, cols](const Tensor &go, std::vector<Tensor *> &gi) {
                         const Tensor &xv = g->value(ix);
                         const Tensor &sv = g->value(is);
                         for (std::size_t r = 0; r < rows; ++r)
                         {
                             double acc = 0.0;
                             for (std::size_t c = 0; c < cols; ++c)
                             {
                                 const std::size_t k = r * cols + c;
                                 if (gi[0])
                                     (*gi[0])[k] += go[k] * sv[r];
                                 acc += go[k] * xv[k];
                             }
                             if (gi[1])
                                 (*gi[1])[r] += acc;
                         }
                     });
}

Var tanh(const Var &x)
{
    return unary(
        "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var &x)
{
    return unary(
        "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var gelu(const Var &x)
{
    return unary(
        "gelu", x,
        [](double v) { return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v))); },
        [](double v, double) {
            const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
            return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
        });
}

Var rsqrt(const Var &x)
{
    for (double v : x.value().data())
        if (!(v > 0.0))
            throw ShapeError("rsqrt", "non-positive operand");
    return unary(
        "rsqrt", x, [](double v) { return 1.0 / std::sqrt(v); }, [](double, double y) { return -0.5 * y * y * y; });
}

Var sign(const Var &x)
{
    Tensor out(x.shape());
    const Tensor &xv = x.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = xv[i] >= 0.0 ? 1.0 : -1.0;
    return x.graph().record("sign", std::move(out), {x}, {});
}

Var stop_gradient(const Var &x)
{
    // Recorded with no inputs, so the tape has no edge back to x.
    return x.graph().record("stop_gradient", x.value(), {}, {});
}

Var matmul(const Var &x, const Var &w)
{
    const Shape &xs = x.shape();
    const Shape &ws = w.shape();
    if (ws.size() != 2 || xs.empty() || xs.back() != ws[0])
        throw ShapeError("matmul", "cannot multiply " + to_string(xs) + " by " + to_string(ws));
    const auto k = static_cast<Eigen::Index>(ws[0]);
    const auto n = static_cast<Eigen::Index>(ws[1]);
    const auto r = static_cast<Eigen::Index>(x.size() / ws[0]);
    Shape os = xs;
    os.back() = ws[1];
    Tensor out(os);
    MapMat(out.ptr(), r, n).noalias() = CMapMat(x.value().ptr(), r, k) * CMapMat(w.value().ptr(), k, n);
    Graph *g = &x.graph();
    const auto ix = x.id(), iw = w.id();
    return g->record("matmul", std::move(out), {x, w}, [g, ix, iw, r, k, n](const Tensor &go, std::vector<Tensor *> &gi) {
        CMapMat gm(go.ptr(), r, n);
        if (gi[0])
            MapMat(gi[0]->ptr(), r, k).noalias() += gm * CMapMat(g->value(iw).ptr(), k, n).transpose();
        if (gi[1])
            MapMat(gi[1]->ptr(), k, n).noalias() += CMapMat(g->value(ix).ptr(), r, k).transpose() * gm;
    });
}

Var bmm(const Var &a, const Var &b, bool transpose_b)
{
    const Shape &as = a.shape();
    const Shape &bs = b.shape();
    if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0] || as[2] != (transpose_b ? bs[2] : bs[1]))
        throw ShapeError("bmm", "cannot multiply " + to_string(as) + " by " + to_string(bs) +
                                    (transpose_b ? " (transposed)" : ""));
    const std::size_t groups = as[0];
    const auto m = static_cast<Eigen::Index>(as[1]);
    const auto k = static_cast<Eigen::Index>(as[2]);
    const auto n = static_cast<Eigen::Index>(transpose_b ? bs[1] : bs[2]);
    Tensor out(Shape{groups, static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
    const double *ap = a.value().ptr();
    const double *bp = b.value().ptr();
    for (std::size_t gidx = 0; gidx < groups; ++gidx)
    {
        CMapMat am(ap + gidx * m * k, m, k);
        MapMat om(out.ptr() + gidx * m * n, m, n);
        if (transpose_b)
            om.noalias() = am * CMapMat(bp + gidx * n * k, n, k).transpose();
        else
            om.noalias() = am * CMapMat(bp + gidx * k * n, k, n);
    }
    Graph *g = &a.graph();
    const auto ia = a.id(), ib = b.id();
    return g->record("bmm", std::move(out), {a, b},
                     [g, ia, ib, groups, m, k, n, transpose_b](const Tensor &go, std::vector<Tensor *> &gi) {
                         const double *ap = g->value(ia).ptr();
                         const double *bp = g->value(ib).ptr();
                         for (std::size_t gidx = 0; gidx < groups; ++gidx)
                         {
                             CMapMat gm(go.ptr() + gidx * m * n, m, n);
                             CMapMat am(ap + gidx * m * k, m, k);
                             if (transpose_b)
                             {
                                 CMapMat bm(bp + gidx * n * k, n, k);
                                 if (gi[0])
                                     MapMat(gi[0]->ptr() + gidx * m * k, m, k).noalias() += gm * bm;
                                 if (gi[1])
                                     MapMat(gi[1]->ptr() + gidx * n * k, n, k).noalias() += gm.transpose() * am;
                             }
                             else
                             {
                                 CMapMat bm(bp + gidx * k * n, k, n);
                                 if (gi[0])
                                     MapMat(gi[0]->ptr() + gidx * m * k, m, k).noalias() += gm * bm.transpose();
                                 if (gi[1])
                                     MapMat(gi[1]->ptr() + gidx * k * n, k, n).noalias() += am.transpose() * gm;
                             }
                         }
                     });
}

Var softmax(const Var &x)
{
    const std::size_t cols = x.shape().back();
    const std::size_t rows = x.size() / cols;
    const Tensor &xv = x.value();
    Tensor out(xv.shape());
    for (std::size_t r = 0; r < rows; ++r)
    {
        const double *in = xv.ptr() + r * cols;
        double *o = out.ptr() + r * cols;
        const double mx = *std::max_element(in, in + cols);
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
            z += (o[c] = std::exp(in[c] - mx));
        for (std::size_t c = 0; c < cols; ++c)
            o[c] /= z;
    }
    Graph *g = &x.graph();
    const auto self = g->size();
    return g->record("softmax", std::move(out), {x}, [g, self, rows, cols](const Tensor &go, std::vector<Tensor *> &gi) {
        const Tensor &y = g->value(self);
        for (std::size_t r = 0; r < rows; ++r)
        {
            const double *yr = y.ptr() + r * cols;
            const double *gr = go.ptr() + r * cols;
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c)
                dot += gr[c] * yr[c];
            double *dx = gi[0]->ptr() + r * cols;
            for (std::size_t c = 0; c < cols; ++c)
                dx[c] += yr[c] * (gr[c] - dot);
        }
    });
}

Var layer_norm(const Var &x, const Var &gamma, const Var &beta, double eps)
{
    const std::size_t cols = x.shape().back();
    if (gamma.size() != cols || beta.size() != cols)
        throw ShapeError("layer_norm", "affine length does not match last axis of " + to_string(x.shape()));
    const std::size_t rows = x.size() / cols;
    const Tensor &xv = x.value();
    const Tensor &gv = gamma.value();
    const Tensor &bv = beta.value();
    auto xhat = std::make_shared<Tensor>(xv.shape());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    Tensor out(xv.shape());
    for (std::size_t r = 0; r < rows; ++r)
    {
        const double *in = xv.ptr() + r * cols;
        double mu = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
            mu += in[c];
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
            var += (in[c] - mu) * (in[c] - mu);
        var /= static_cast<double>(cols);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        for (std::size_t c = 0; c < cols; ++c)
        {
            const double h = (in[c] - mu) * is;
            (*xhat)[r * cols + c] = h;
            out[r * cols + c] = h * gv[c] + bv[c];
        }
    }
    Graph *g = &x.graph();
    const auto ig = gamma.id();
    return g->record("layer_norm", std::move(out), {x, gamma, beta},
                     [g, ig, xhat, inv_std, rows, cols](const Tensor &go, std::vector<Tensor *> &gi) {
                         const Tensor &gv = g->value(ig);
                         std::vector<double> gh(cols);
                         for (std::size_t r = 0; r < rows; ++r)
                         {
                             const double *h = xhat->ptr() + r * cols;
                             const double *gr = go.ptr() + r * cols;
                             double m1 = 0.0, m2 = 0.0;
                             for (std::size_t c = 0; c < cols; ++c)
                             {
                                 gh[c] = gr[c] * gv[c];
                                 m1 += gh[c];
                                 m2 += gh[c] * h[c];
                                 if (gi[1])
                                     (*gi[1])[c] += gr[c] * h[c];
                                 if (gi[2])
                                     (*gi[2])[c] += gr[c];
                             }
                             if (!gi[0])
                                 continue;
                             m1 /= static_cast<double>(cols);
                             m2 /= static_cast<double>(cols);
                             double *dx = gi[0]->ptr() + r * cols;
                             for (std::size_t c = 0; c < cols; ++c)
                                 dx[c] += (*inv_std)[r] * (gh[c] - m1 - h[c] * m2);
                         }
                     });
}

Var reshape(const Var &x, Shape shape)
{
    Tensor out = x.value().reshaped(std::move(shape));
    return x.graph().record("reshape", std::move(out), {x}, [](const Tensor &go, std::vector<Tensor *> &gi) {
        for (std::size_t i = 0; i < go.size(); ++i)
            (*gi[0])[i] += go[i];
    });
}

namespace
{

// Maps every output offset of a permuted tensor to its input offset.
std::shared_ptr<std::vector<std::size_t>> permutation_offsets(const Shape &in, const std::vector<std::size_t> &perm)
{
    const std::size_t rank = in.size();
    std::vector<std::size_t> in_stride(rank, 1);
    for (std::size_t i = rank - 1; i-- > 0;)
        in_stride[i] = in_stride[i + 1] * in[i + 1];
    Shape out(rank);
    std::vector<std::size_t> stride(rank);
    for (std::size_t i = 0; i < rank; ++i)
    {
        out[i] = in[perm[i]];
        stride[i] = in_stride[perm[i]];
    }
    auto offs = std::make_shared<std::vector<std::size_t>>(numel(in));
    std::vector<std::size_t> idx(rank, 0);
    std::size_t src = 0;
    for (std::size_t o = 0; o < offs->size(); ++o)
    {
        (*offs)[o] = src;
        for (std::size_t ax = rank; ax-- > 0;)
        {
            if (++idx[ax] < out[ax])
            {
                src += stride[ax];
                break;
            }
            src -= stride[ax] * (out[ax] - 1);
            idx[ax] = 0;
        }
    }
    return offs;
}

} // namespace

Var permute(const Var &x, const std::vector<std::size_t> &perm)
{
    const Shape &in = x.shape();
    std::vector<std::size_t> check = perm;
    std::sort(check.begin(), check.end());
    for (std::size_t i = 0; i < check.size(); ++i)
        if (check.size() != in.size() || check[i] != i)
            throw ShapeError("permute", "invalid permutation for " + to_string(in));
    Shape os(in.size());
    for (std::size_t i = 0; i < in.size(); ++i)
        os[i] = in[perm[i]];
    auto offs = permutation_offsets(in, perm);
    Tensor out(os);
    const Tensor &xv = x.value();
    for (std::size_t o = 0; o < offs->size(); ++o)
        out[o] = xv[(*offs)[o]];
    return x.graph().record("permute", std::move(out), {x}, [offs](const Tensor &go, std::vector<Tensor *> &gi) {
        Tensor &gx = *gi[0];
        for (std::size_t o = 0; o < offs->size(); ++o)
            gx[(*offs)[o]] += go[o];
    });
}

Var concat(const std::vector<Var> &parts, std::size_t axis)
{
    if (parts.empty())
        throw ShapeError("concat", "no operands");
    const Shape &s0 = parts[0].shape();
    if (axis >= s0.size())
        throw ShapeError("concat", "axis out of range for " + to_string(s0));
    Shape os = s0;
    os[axis] = 0;
    std::vector<std::size_t> chunk;
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < s0.size(); ++i)
        inner *= s0[i];
    std::size_t outer = 1;
    for (std::size_t i = 0; i < axis; ++i)
        outer *= s0[i];
    for (const auto &p : parts)
    {
        const Shape &s = p.shape();
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s.size() != s0.size() || (i != axis && s[i] != s0[i]))
                throw ShapeError("concat", "operand " + to_string(s) + " incompatible with " + to_string(s0));
        os[axis] += s[axis];
        chunk.push_back(s[axis] * inner);
    }
    Tensor out(os);
    const std::size_t row = os[axis] * inner;
    std::size_t off = 0;
    for (std::size_t p = 0; p < parts.size(); ++p)
    {
        const Tensor &v = parts[p].value();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(v.ptr() + o * chunk[p], chunk[p], out.ptr() + o * row + off);
        off += chunk[p];
    }
    return parts[0].graph().record("concat", std::move(out), parts,
                                   [chunk, outer, row](const Tensor &go, std::vector<Tensor *> &gi) {
                                       std::size_t off = 0;
                                       for (std::size_t p = 0; p < gi.size(); ++p)
                                       {
                                           if (gi[p])
                                               for (std::size_t o = 0; o < outer; ++o)
                                                   for (std::size_t c = 0; c < chunk[p]; ++c)
                                                       (*gi[p])[o * chunk[p] + c] += go[o * row + off + c];
                                           off += chunk[p];
                                       }
                                   });
}

Var slice_rows(const Var &x, std::size_t begin, std::size_t end)
{
    const Shape &s = x.shape();
    if (begin >= end || end > s[0])
        throw ShapeError("slice_rows", "range [" + std::to_string(begin) + "," + std::to_string(end) +
                                           ") out of bounds for " + to_string(s));
    const std::size_t inner = x.size() / s[0];
    Shape os = s;
    os[0] = end - begin;
    Tensor out(os);
    std::copy_n(x.value().ptr() + begin * inner, out.size(), out.ptr());
    const std::size_t off = begin * inner;
    return x.graph().record("slice_rows", std::move(out), {x}, [off](const Tensor &go, std::vector<Tensor *> &gi) {
        for (std::size_t i = 0; i < go.size(); ++i)
            (*gi[0])[off + i] += go[i];
    });
}

Var gather_rows(const Var &x, std::size_t batch, std::size_t row_len, const IndexMap &index, Shape out_shape)
{
    const std::size_t per_item = x.size() / batch;
    if (batch == 0 || row_len == 0 || x.size() % batch != 0 || per_item % row_len != 0)
        throw ShapeError("gather_rows", "cannot split " + to_string(x.shape()) + " into rows");
    const std::size_t rows_in = per_item / row_len;
    const std::size_t rows_out = index->size();
    if (numel(out_shape) != batch * rows_out * row_len)
        throw ShapeError("gather_rows", "output shape " + to_string(out_shape) + " does not hold the gathered rows");
    for (auto r : *index)
        if (r >= static_cast<std::int64_t>(rows_in))
            throw ShapeError("gather_rows", "row index out of range");
    Tensor out(std::move(out_shape));
    const double *src = x.value().ptr();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t r = 0; r < rows_out; ++r)
        {
            const auto s = (*index)[r];
            if (s >= 0)
                std::copy_n(src + (b * rows_in + s) * row_len, row_len, out.ptr() + (b * rows_out + r) * row_len);
        }
    return x.graph().record("gather_rows", std::move(out), {x},
                            [index, batch, row_len, rows_in, rows_out](const Tensor &go, std::vector<Tensor *> &gi) {
                                double *dx = gi[0]->ptr();
                                for (std::size_t b = 0; b < batch; ++b)
                                    for (std::size_t r = 0; r < rows_out; ++r)
                                    {
                                        const auto s = (*index)[r];
                                        if (s < 0)
                                            continue;
                                        const double *gr = go.ptr() + (b * rows_out + r) * row_len;
                                        double *d = dx + (b * rows_in + s) * row_len;
                                        for (std::size_t c = 0; c < row_len; ++c)
                                            d[c] += gr[c];
                                    }
                            });
}

Var sum(const Var &x)
{
    const auto &d = x.value().data();
    const double s = std::accumulate(d.begin(), d.end(), 0.0);
    return x.graph().record("sum", Tensor::scalar(s), {x}, [](const Tensor &go, std::vector<Tensor *> &gi) {
        for (auto &v : gi[0]->storage())
            v += go[0];
    });
}

Var mean(const Var &x)
{
    const auto &d = x.value().data();
    const double n = static_cast<double>(d.size());
    const double s = std::accumulate(d.begin(), d.end(), 0.0) / n;
    return x.graph().record("mean", Tensor::scalar(s), {x}, [n](const Tensor &go, std::vector<Tensor *> &gi) {
        for (auto &v : gi[0]->storage())
            v += go[0] / n;
    });
}

Var sum_last(const Var &x)
{
    const Shape &s = x.shape();
    const std::size_t cols = s.back();
    const std::size_t rows = x.size() / cols;
    Shape os(s.begin(), s.end() - 1);
    if (os.empty())
        os = {1};
    Tensor out(os);
    const Tensor &xv = x.value();
    for (std::size_t r = 0; r < rows; ++r)
    {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
            acc += xv[r * cols + c];
        out[r] = acc;
    }
    return x.graph().record("sum_last", std::move(out), {x}, [rows, cols](const Tensor &go, std::vector<Tensor *> &gi) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
                (*gi[0])[r * cols + c] += go[r];
    });
}

} // namespace csiforge::diff
