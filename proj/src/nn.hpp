#pragma once

// Internal layer stack for the dual-timestep denoiser: planar CHW tensors,
// hand-derived backward passes, Eigen for the matrix products. Templated on
// the scalar so tests can run the whole graph in double while training runs
// in float.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rbdm/rng.hpp"

namespace rbdm::nn {

template <class S>
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<S> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_) {}

    size_t size() const { return v.size(); }
    S* data() { return v.data(); }
    const S* data() const { return v.data(); }
    S& at(int ch, int y, int x) { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
    S at(int ch, int y, int x) const { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
};

// Offset of a named parameter block inside the flat parameter vector.
struct ParamBlock {
    std::string name;
    size_t offset = 0;
    size_t count = 0;
};

// Fixed registration order defines the checkpoint payload order.
class ParamLayout {
public:
    size_t add(const std::string& name, size_t count) {
        size_t off = total_;
        blocks_.push_back({name, off, count});
        total_ += count;
        return off;
    }
    size_t total() const { return total_; }
    const std::vector<ParamBlock>& blocks() const { return blocks_; }

private:
    std::vector<ParamBlock> blocks_;
    size_t total_ = 0;
};

// Init spec per block, applied in registration order with one seeded stream.
enum class InitKind { zeros, ones, he_normal };

struct InitSpec {
    InitKind kind = InitKind::zeros;
    size_t fan_in = 0;
};

template <class S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MatCM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

template <class S>
inline S sigmoid(S x) {
    return S(1) / (S(1) + std::exp(-x));
}

// ---------------------------------------------------------------------------
// Layers. Each instance caches what its backward pass needs; a fresh copy of
// the graph is used per forward/backward run.
// ---------------------------------------------------------------------------

template <class S>
struct Linear {
    int in = 0, out = 0;
    size_t w_off = 0, b_off = 0;

    std::vector<S> x_cache;

    void reg(ParamLayout& layout, std::vector<InitSpec>& inits, const std::string& name,
             int in_, int out_, bool zero_init = false) {
        in = in_;
        out = out_;
        w_off = layout.add(name + ".weight", static_cast<size_t>(out) * in);
        inits.push_back({zero_init ? InitKind::zeros : InitKind::he_normal, static_cast<size_t>(in)});
        b_off = layout.add(name + ".bias", static_cast<size_t>(out));
        inits.push_back({InitKind::zeros, 0});
    }

    std::vector<S> forward(const std::vector<S>& x, const S* P) {
        x_cache = x;
        std::vector<S> y(static_cast<size_t>(out));
        Eigen::Map<const MatRM<S>> W(P + w_off, out, in);
        Eigen::Map<const Eigen::Vector<S, Eigen::Dynamic>> xv(x.data(), in);
        Eigen::Map<Eigen::Vector<S, Eigen::Dynamic>> yv(y.data(), out);
        yv = W * xv;
        for (int i = 0; i < out; ++i) y[static_cast<size_t>(i)] += P[b_off + i];
        return y;
    }

    std::vector<S> backward(const std::vector<S>& dy, const S* P, S* G) {
        Eigen::Map<const MatRM<S>> W(P + w_off, out, in);
        Eigen::Map<MatRM<S>> dW(G + w_off, out, in);
        Eigen::Map<const Eigen::Vector<S, Eigen::Dynamic>> dyv(dy.data(), out);
        Eigen::Map<const Eigen::Vector<S, Eigen::Dynamic>> xv(x_cache.data(), in);
        dW.noalias() += dyv * xv.transpose();
        for (int i = 0; i < out; ++i) G[b_off + i] += dy[static_cast<size_t>(i)];
        std::vector<S> dx(static_cast<size_t>(in));
        Eigen::Map<Eigen::Vector<S, Eigen::Dynamic>> dxv(dx.data(), in);
        dxv.noalias() = W.transpose() * dyv;
        return dx;
    }
};

// 3x3 convolution, stride 1, zero padding 1, via im2col + GEMM.
template <class S>
struct Conv3x3 {
    int cin = 0, cout = 0;
    size_t w_off = 0, b_off = 0;

    Tensor<S> x_cache;

    void reg(ParamLayout& layout, std::vector<InitSpec>& inits, const std::string& name,
             int cin_, int cout_, bool zero_init = false) {
        cin = cin_;
        cout = cout_;
        w_off = layout.add(name + ".weight", static_cast<size_t>(cout) * cin * 9);
        inits.push_back({zero_init ? InitKind::zeros : InitKind::he_normal, static_cast<size_t>(cin) * 9});
        b_off = layout.add(name + ".bias", static_cast<size_t>(cout));
        inits.push_back({InitKind::zeros, 0});
    }

    static void im2col(const Tensor<S>& x, MatCM<S>& cols) {
        const int H = x.h, W = x.w, C = x.c;
        cols.resize(static_cast<Eigen::Index>(C) * 9, static_cast<Eigen::Index>(H) * W);
        for (int c = 0; c < C; ++c) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int row = c * 9 + (dy + 1) * 3 + (dx + 1);
                    for (int y = 0; y < H; ++y) {
                        const int sy = y + dy;
                        S* dst = cols.data() + static_cast<size_t>(row) +
                                 static_cast<size_t>(y) * W * cols.rows();
                        if (sy < 0 || sy >= H) {
                            for (int xx = 0; xx < W; ++xx) dst[static_cast<size_t>(xx) * cols.rows()] = S(0);
                            continue;
                        }
                        const S* src = &x.v[(static_cast<size_t>(c) * H + sy) * W];
                        for (int xx = 0; xx < W; ++xx) {
                            const int sx = xx + dx;
                            dst[static_cast<size_t>(xx) * cols.rows()] =
                                (sx < 0 || sx >= W) ? S(0) : src[sx];
                        }
                    }
                }
            }
        }
    }

    Tensor<S> forward(const Tensor<S>& x, const S* P) {
        x_cache = x;
        const int H = x.h, W = x.w;
        Tensor<S> y(cout, H, W);
        MatCM<S> cols;
        im2col(x, cols);
        Eigen::Map<const MatRM<S>> Wm(P + w_off, cout, cin * 9);
        Eigen::Map<MatRM<S>> ym(y.data(), cout, static_cast<Eigen::Index>(H) * W);
        ym.noalias() = Wm * cols;
        for (int c = 0; c < cout; ++c) {
            S* row = &y.v[static_cast<size_t>(c) * H * W];
            const S b = P[b_off + c];
            for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) row[i] += b;
        }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy, const S* P, S* G) {
        const int H = x_cache.h, W = x_cache.w;
        MatCM<S> cols;
        im2col(x_cache, cols);
        Eigen::Map<const MatRM<S>> dym(dy.data(), cout, static_cast<Eigen::Index>(H) * W);
        Eigen::Map<MatRM<S>> dWm(G + w_off, cout, cin * 9);
        dWm.noalias() += dym * cols.transpose();
        for (int c = 0; c < cout; ++c) {
            const S* row = &dy.v[static_cast<size_t>(c) * H * W];
            S acc = S(0);
            for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) acc += row[i];
            G[b_off + c] += acc;
        }
        // dcols = W^T dy, then scatter back (col2im).
        Eigen::Map<const MatRM<S>> Wm(P + w_off, cout, cin * 9);
        MatCM<S> dcols = Wm.transpose() * dym;
        Tensor<S> dx(cin, H, W);
        for (int c = 0; c < cin; ++c) {
            for (int dyk = -1; dyk <= 1; ++dyk) {
                for (int dxk = -1; dxk <= 1; ++dxk) {
                    const int row = c * 9 + (dyk + 1) * 3 + (dxk + 1);
                    for (int y = 0; y < H; ++y) {
                        const int sy = y + dyk;
                        if (sy < 0 || sy >= H) continue;
                        S* dst = &dx.v[(static_cast<size_t>(c) * H + sy) * W];
                        const S* src = dcols.data() + static_cast<size_t>(row) +
                                       static_cast<size_t>(y) * W * dcols.rows();
                        for (int xx = 0; xx < W; ++xx) {
                            const int sx = xx + dxk;
                            if (sx < 0 || sx >= W) continue;
                            dst[sx] += src[static_cast<size_t>(xx) * dcols.rows()];
                        }
                    }
                }
            }
        }
        return dx;
    }
};

template <class S>
struct Conv1x1 {
    int cin = 0, cout = 0;
    size_t w_off = 0, b_off = 0;

    Tensor<S> x_cache;

    void reg(ParamLayout& layout, std::vector<InitSpec>& inits, const std::string& name,
             int cin_, int cout_) {
        cin = cin_;
        cout = cout_;
        w_off = layout.add(name + ".weight", static_cast<size_t>(cout) * cin);
        inits.push_back({InitKind::he_normal, static_cast<size_t>(cin)});
        b_off = layout.add(name + ".bias", static_cast<size_t>(cout));
        inits.push_back({InitKind::zeros, 0});
    }

    Tensor<S> forward(const Tensor<S>& x, const S* P) {
        x_cache = x;
        const Eigen::Index hw = static_cast<Eigen::Index>(x.h) * x.w;
        Tensor<S> y(cout, x.h, x.w);
        Eigen::Map<const MatRM<S>> Wm(P + w_off, cout, cin);
        Eigen::Map<const MatRM<S>> xm(x.data(), cin, hw);
        Eigen::Map<MatRM<S>> ym(y.data(), cout, hw);
        ym.noalias() = Wm * xm;
        for (int c = 0; c < cout; ++c) {
            S* row = &y.v[static_cast<size_t>(c) * hw];
            const S b = P[b_off + c];
            for (Eigen::Index i = 0; i < hw; ++i) row[i] += b;
        }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy, const S* P, S* G) {
        const Eigen::Index hw = static_cast<Eigen::Index>(x_cache.h) * x_cache.w;
        Eigen::Map<const MatRM<S>> dym(dy.data(), cout, hw);
        Eigen::Map<const MatRM<S>> xm(x_cache.data(), cin, hw);
        Eigen::Map<MatRM<S>> dWm(G + w_off, cout, cin);
        dWm.noalias() += dym * xm.transpose();
        for (int c = 0; c < cout; ++c) {
            const S* row = &dy.v[static_cast<size_t>(c) * hw];
            S acc = S(0);
            for (Eigen::Index i = 0; i < hw; ++i) acc += row[i];
            G[b_off + c] += acc;
        }
        Tensor<S> dx(cin, x_cache.h, x_cache.w);
        Eigen::Map<const MatRM<S>> Wm(P + w_off, cout, cin);
        Eigen::Map<MatRM<S>> dxm(dx.data(), cin, hw);
        dxm.noalias() = Wm.transpose() * dym;
        return dx;
    }
};

// Largest power-of-two group count (<= 8) dividing the channel count.
inline int group_count(int channels) {
    for (int g : {8, 4, 2}) {
        if (channels % g == 0) return g;
    }
    return 1;
}

template <class S>
struct GroupNorm {
    int ch = 0, groups = 0;
    size_t g_off = 0, b_off = 0;
    static constexpr double kEps = 1e-5;

    Tensor<S> xhat_cache;
    std::vector<S> inv_std_cache;

    void reg(ParamLayout& layout, std::vector<InitSpec>& inits, const std::string& name, int ch_) {
        ch = ch_;
        groups = group_count(ch_);
        g_off = layout.add(name + ".gamma", static_cast<size_t>(ch));
        inits.push_back({InitKind::ones, 0});
        b_off = layout.add(name + ".beta", static_cast<size_t>(ch));
        inits.push_back({InitKind::zeros, 0});
    }

    Tensor<S> forward(const Tensor<S>& x, const S* P) {
        const int cg = ch / groups;
        const size_t plane = static_cast<size_t>(x.h) * x.w;
        const size_t n = static_cast<size_t>(cg) * plane;
        xhat_cache = Tensor<S>(x.c, x.h, x.w);
        inv_std_cache.assign(static_cast<size_t>(groups), S(0));
        Tensor<S> y(x.c, x.h, x.w);
        for (int g = 0; g < groups; ++g) {
            const S* xs = &x.v[static_cast<size_t>(g) * cg * plane];
            S mean = S(0);
            for (size_t i = 0; i < n; ++i) mean += xs[i];
            mean /= S(n);
            S var = S(0);
            for (size_t i = 0; i < n; ++i) {
                const S d = xs[i] - mean;
                var += d * d;
            }
            var /= S(n);
            const S inv_std = S(1) / std::sqrt(var + S(kEps));
            inv_std_cache[static_cast<size_t>(g)] = inv_std;
            S* xh = &xhat_cache.v[static_cast<size_t>(g) * cg * plane];
            S* ys = &y.v[static_cast<size_t>(g) * cg * plane];
            for (int cc = 0; cc < cg; ++cc) {
                const S gamma = P[g_off + g * cg + cc];
                const S beta = P[b_off + g * cg + cc];
                for (size_t i = 0; i < plane; ++i) {
                    const size_t k = static_cast<size_t>(cc) * plane + i;
                    xh[k] = (xs[k] - mean) * inv_std;
                    ys[k] = gamma * xh[k] + beta;
                }
            }
        }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy, const S* P, S* G) {
        const int cg = ch / groups;
        const size_t plane = static_cast<size_t>(dy.h) * dy.w;
        const size_t n = static_cast<size_t>(cg) * plane;
        Tensor<S> dx(dy.c, dy.h, dy.w);
        for (int g = 0; g < groups; ++g) {
            const S* dys = &dy.v[static_cast<size_t>(g) * cg * plane];
            const S* xh = &xhat_cache.v[static_cast<size_t>(g) * cg * plane];
            // Param grads and the two group means of gamma-weighted grads.
            S m1 = S(0), m2 = S(0);
            for (int cc = 0; cc < cg; ++cc) {
                const S gamma = P[g_off + g * cg + cc];
                S dgamma = S(0), dbeta = S(0);
                for (size_t i = 0; i < plane; ++i) {
                    const size_t k = static_cast<size_t>(cc) * plane + i;
                    dgamma += dys[k] * xh[k];
                    dbeta += dys[k];
                    const S gv = dys[k] * gamma;
                    m1 += gv;
                    m2 += gv * xh[k];
                }
                G[g_off + g * cg + cc] += dgamma;
                G[b_off + g * cg + cc] += dbeta;
            }
            m1 /= S(n);
            m2 /= S(n);
            const S inv_std = inv_std_cache[static_cast<size_t>(g)];
            S* dxs = &dx.v[static_cast<size_t>(g) * cg * plane];
            for (int cc = 0; cc < cg; ++cc) {
                const S gamma = P[g_off + g * cg + cc];
                for (size_t i = 0; i < plane; ++i) {
                    const size_t k = static_cast<size_t>(cc) * plane + i;
                    dxs[k] = inv_std * (dys[k] * gamma - m1 - xh[k] * m2);
                }
            }
        }
        return dx;
    }
};

template <class S>
struct SiLU {
    Tensor<S> x_cache;

    Tensor<S> forward(const Tensor<S>& x) {
        x_cache = x;
        Tensor<S> y(x.c, x.h, x.w);
        for (size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] * sigmoid(x.v[i]);
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        Tensor<S> dx(dy.c, dy.h, dy.w);
        for (size_t i = 0; i < dy.size(); ++i) {
            const S sg = sigmoid(x_cache.v[i]);
            dx.v[i] = dy.v[i] * sg * (S(1) + x_cache.v[i] * (S(1) - sg));
        }
        return dx;
    }
};

template <class S>
std::vector<S> silu_forward_vec(const std::vector<S>& x) {
    std::vector<S> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] * sigmoid(x[i]);
    return y;
}

template <class S>
std::vector<S> silu_backward_vec(const std::vector<S>& x, const std::vector<S>& dy) {
    std::vector<S> dx(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        const S sg = sigmoid(x[i]);
        dx[i] = dy[i] * sg * (S(1) + x[i] * (S(1) - sg));
    }
    return dx;
}

template <class S>
Tensor<S> avgpool2_forward(const Tensor<S>& x) {
    Tensor<S> y(x.c, x.h / 2, x.w / 2);
    for (int c = 0; c < x.c; ++c) {
        for (int yy = 0; yy < y.h; ++yy) {
            for (int xx = 0; xx < y.w; ++xx) {
                y.at(c, yy, xx) = (x.at(c, 2 * yy, 2 * xx) + x.at(c, 2 * yy, 2 * xx + 1) +
                                   x.at(c, 2 * yy + 1, 2 * xx) + x.at(c, 2 * yy + 1, 2 * xx + 1)) *
                                  S(0.25);
            }
        }
    }
    return y;
}

template <class S>
Tensor<S> avgpool2_backward(const Tensor<S>& dy) {
    Tensor<S> dx(dy.c, dy.h * 2, dy.w * 2);
    for (int c = 0; c < dy.c; ++c) {
        for (int yy = 0; yy < dy.h; ++yy) {
            for (int xx = 0; xx < dy.w; ++xx) {
                const S g = dy.at(c, yy, xx) * S(0.25);
                dx.at(c, 2 * yy, 2 * xx) = g;
                dx.at(c, 2 * yy, 2 * xx + 1) = g;
                dx.at(c, 2 * yy + 1, 2 * xx) = g;
                dx.at(c, 2 * yy + 1, 2 * xx + 1) = g;
            }
        }
    }
    return dx;
}

template <class S>
Tensor<S> upsample2_forward(const Tensor<S>& x) {
    Tensor<S> y(x.c, x.h * 2, x.w * 2);
    for (int c = 0; c < x.c; ++c) {
        for (int yy = 0; yy < y.h; ++yy) {
            for (int xx = 0; xx < y.w; ++xx) {
                y.at(c, yy, xx) = x.at(c, yy / 2, xx / 2);
            }
        }
    }
    return y;
}

template <class S>
Tensor<S> upsample2_backward(const Tensor<S>& dy) {
    Tensor<S> dx(dy.c, dy.h / 2, dy.w / 2);
    for (int c = 0; c < dy.c; ++c) {
        for (int yy = 0; yy < dy.h; ++yy) {
            for (int xx = 0; xx < dy.w; ++xx) {
                dx.at(c, yy / 2, xx / 2) += dy.at(c, yy, xx);
            }
        }
    }
    return dx;
}

template <class S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
    Tensor<S> y(a.c + b.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), y.v.begin());
    std::copy(b.v.begin(), b.v.end(), y.v.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return y;
}

template <class S>
void split_channels(const Tensor<S>& y, Tensor<S>& a, Tensor<S>& b, int ca) {
    a = Tensor<S>(ca, y.h, y.w);
    b = Tensor<S>(y.c - ca, y.h, y.w);
    std::copy(y.v.begin(), y.v.begin() + static_cast<std::ptrdiff_t>(a.size()), a.v.begin());
    std::copy(y.v.begin() + static_cast<std::ptrdiff_t>(a.size()), y.v.end(), b.v.begin());
}

// Replicate-pad on the bottom/right edges up to (H, W).
template <class S>
Tensor<S> replicate_pad(const Tensor<S>& x, int H, int W) {
    Tensor<S> y(x.c, H, W);
    for (int c = 0; c < x.c; ++c) {
        for (int yy = 0; yy < H; ++yy) {
            const int sy = std::min(yy, x.h - 1);
            for (int xx = 0; xx < W; ++xx) {
                y.at(c, yy, xx) = x.at(c, sy, std::min(xx, x.w - 1));
            }
        }
    }
    return y;
}

// Fold the gradient of a padded tensor back onto the original extent.
template <class S>
Tensor<S> replicate_pad_backward(const Tensor<S>& dy, int h, int w) {
    Tensor<S> dx(dy.c, h, w);
    for (int c = 0; c < dy.c; ++c) {
        for (int yy = 0; yy < dy.h; ++yy) {
            const int sy = std::min(yy, h - 1);
            for (int xx = 0; xx < dy.w; ++xx) {
                dx.at(c, sy, std::min(xx, w - 1)) += dy.at(c, yy, xx);
            }
        }
    }
    return dx;
}

template <class S>
Tensor<S> crop_tl(const Tensor<S>& x, int h, int w) {
    Tensor<S> y(x.c, h, w);
    for (int c = 0; c < x.c; ++c) {
        for (int yy = 0; yy < h; ++yy) {
            for (int xx = 0; xx < w; ++xx) y.at(c, yy, xx) = x.at(c, yy, xx);
        }
    }
    return y;
}

template <class S>
Tensor<S> crop_tl_backward(const Tensor<S>& dy, int H, int W) {
    Tensor<S> dx(dy.c, H, W);
    for (int c = 0; c < dy.c; ++c) {
        for (int yy = 0; yy < dy.h; ++yy) {
            for (int xx = 0; xx < dy.w; ++xx) dx.at(c, yy, xx) = dy.at(c, yy, xx);
        }
    }
    return dx;
}

// Residual block: GN -> SiLU -> conv3x3, add timestep projection,
// GN -> SiLU -> conv3x3, plus identity or 1x1-projected skip.
template <class S>
struct ResBlock {
    int cin = 0, cout = 0, emb_dim = 0;
    GroupNorm<S> gn1, gn2;
    SiLU<S> act1, act2;
    Conv3x3<S> conv1, conv2;
    Linear<S> emb_proj;
    Conv1x1<S> skip;
    bool has_skip = false;

    void reg(ParamLayout& layout, std::vector<InitSpec>& inits, const std::string& name,
             int cin_, int cout_, int emb_dim_) {
        cin = cin_;
        cout = cout_;
        emb_dim = emb_dim_;
        gn1.reg(layout, inits, name + ".norm1", cin);
        conv1.reg(layout, inits, name + ".conv1", cin, cout);
        emb_proj.reg(layout, inits, name + ".time_proj", emb_dim, cout);
        gn2.reg(layout, inits, name + ".norm2", cout);
        conv2.reg(layout, inits, name + ".conv2", cout, cout);
        has_skip = cin != cout;
        if (has_skip) skip.reg(layout, inits, name + ".skip", cin, cout);
    }

    Tensor<S> forward(const Tensor<S>& x, const std::vector<S>& emb_act, const S* P) {
        Tensor<S> h = conv1.forward(act1.forward(gn1.forward(x, P)), P);
        const std::vector<S> eb = emb_proj.forward(emb_act, P);
        const size_t plane = static_cast<size_t>(h.h) * h.w;
        for (int c = 0; c < cout; ++c) {
            S* row = &h.v[static_cast<size_t>(c) * plane];
            for (size_t i = 0; i < plane; ++i) row[i] += eb[static_cast<size_t>(c)];
        }
        h = conv2.forward(act2.forward(gn2.forward(h, P)), P);
        const Tensor<S> sk = has_skip ? skip.forward(x, P) : x;
        for (size_t i = 0; i < h.size(); ++i) h.v[i] += sk.v[i];
        return h;
    }

    // Returns dx; accumulates the timestep-path gradient into demb_act.
    Tensor<S> backward(const Tensor<S>& dy, const S* P, S* G, std::vector<S>& demb_act) {
        Tensor<S> dh = gn2.backward(act2.backward(conv2.backward(dy, P, G)), P, G);
        // Gradient through the per-channel embedding bias.
        std::vector<S> deb(static_cast<size_t>(cout), S(0));
        const size_t plane = static_cast<size_t>(dh.h) * dh.w;
        for (int c = 0; c < cout; ++c) {
            const S* row = &dh.v[static_cast<size_t>(c) * plane];
            S acc = S(0);
            for (size_t i = 0; i < plane; ++i) acc += row[i];
            deb[static_cast<size_t>(c)] = acc;
        }
        const std::vector<S> de = emb_proj.backward(deb, P, G);
        for (size_t i = 0; i < de.size(); ++i) demb_act[i] += de[i];

        Tensor<S> dx = gn1.backward(act1.backward(conv1.backward(dh, P, G)), P, G);
        if (has_skip) {
            const Tensor<S> ds = skip.backward(dy, P, G);
            for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += ds.v[i];
        } else {
            for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += dy.v[i];
        }
        return dx;
    }
};

// Sinusoidal embedding of one raw timestep index into `dim` values:
// interleaved sin/cos pairs over a geometric frequency ladder starting at 1.
inline std::vector<double> sinusoid_embedding(int t, int dim) {
    std::vector<double> e(static_cast<size_t>(dim));
    const int nfreq = (dim + 1) / 2;
    for (int j = 0; j < dim; ++j) {
        const int f = j / 2;
        const double freq = std::exp(-std::log(10000.0) * f / std::max(1, nfreq - 1));
        const double a = t * freq;
        e[static_cast<size_t>(j)] = (j % 2 == 0) ? std::sin(a) : std::cos(a);
    }
    return e;
}

}  // namespace rbdm::nn
