#include "rbdm/denoiser.hpp"

#include <cmath>
#include <stdexcept>

#include "nn.hpp"

namespace rbdm {

using nn::Tensor;

void DenoiserConfig::validate() const {
    if (image_channels != 1 && image_channels != 3) {
        throw std::invalid_argument("DenoiserConfig: image_channels must be 1 or 3");
    }
    if (base_channels < 1) throw std::invalid_argument("DenoiserConfig: base_channels must be >= 1");
    if (channel_multipliers.empty()) {
        throw std::invalid_argument("DenoiserConfig: need at least one channel multiplier");
    }
    for (int m : channel_multipliers) {
        if (m < 1) throw std::invalid_argument("DenoiserConfig: multipliers must be positive");
    }
    if (res_blocks_per_scale < 1) {
        throw std::invalid_argument("DenoiserConfig: res_blocks_per_scale must be >= 1");
    }
    if (timestep_embed_dim < 2 || timestep_embed_dim % 2 != 0) {
        throw std::invalid_argument("DenoiserConfig: timestep_embed_dim must be even and >= 2");
    }
}

std::vector<double> embed_timesteps(int t_x, int t_y, int dim) {
    if (t_x < 0 || t_y < 0) throw std::invalid_argument("embed_timesteps: negative timestep");
    if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("embed_timesteps: dim must be even");
    std::vector<double> ex = nn::sinusoid_embedding(t_x, dim / 2);
    std::vector<double> ey = nn::sinusoid_embedding(t_y, dim / 2);
    ex.insert(ex.end(), ey.begin(), ey.end());
    return ex;
}

namespace {

// Full layer graph plus per-run activation caches. One instance serves one
// forward (and optionally one backward) pass; construction only computes
// offsets and is cheap.
template <class S>
struct UNetGraph {
    DenoiserConfig cfg;
    nn::ParamLayout layout;
    std::vector<nn::InitSpec> inits;

    nn::Linear<S> time_l1, time_l2;
    nn::Conv3x3<S> stem;
    std::vector<std::vector<nn::ResBlock<S>>> down;  // per scale
    nn::ResBlock<S> mid;
    std::vector<std::vector<nn::ResBlock<S>>> up;  // stage i consumes skip i
    nn::GroupNorm<S> head_gn;
    nn::SiLU<S> head_act;
    nn::Conv3x3<S> head_conv;

    // forward caches
    std::vector<S> emb_raw, mlp1_out, mlp2_out, emb_act;
    std::vector<Tensor<S>> skips;
    int in_h = 0, in_w = 0, pad_h = 0, pad_w = 0;

    explicit UNetGraph(const DenoiserConfig& c) : cfg(c) {
        const int emb_mlp_dim = 2 * cfg.timestep_embed_dim;
        time_l1.reg(layout, inits, "time_mlp.0", cfg.timestep_embed_dim, emb_mlp_dim);
        time_l2.reg(layout, inits, "time_mlp.1", emb_mlp_dim, emb_mlp_dim);

        const int n = cfg.scales();
        const int c2 = 2 * cfg.image_channels;
        stem.reg(layout, inits, "stem", c2, cfg.base_channels * cfg.channel_multipliers[0]);

        int ch = cfg.base_channels * cfg.channel_multipliers[0];
        down.resize(static_cast<size_t>(n));
        std::vector<int> scale_ch(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            const int out = cfg.base_channels * cfg.channel_multipliers[static_cast<size_t>(i)];
            for (int b = 0; b < cfg.res_blocks_per_scale; ++b) {
                nn::ResBlock<S> rb;
                rb.reg(layout, inits, "down." + std::to_string(i) + "." + std::to_string(b),
                       b == 0 ? ch : out, out, emb_mlp_dim);
                down[static_cast<size_t>(i)].push_back(std::move(rb));
            }
            scale_ch[static_cast<size_t>(i)] = out;
            ch = out;
        }

        mid.reg(layout, inits, "mid", ch, ch, emb_mlp_dim);

        up.resize(static_cast<size_t>(n > 0 ? n - 1 : 0));
        for (int i = n - 2; i >= 0; --i) {
            const int out = cfg.base_channels * cfg.channel_multipliers[static_cast<size_t>(i)];
            const int cat = ch + scale_ch[static_cast<size_t>(i)];
            for (int b = 0; b < cfg.res_blocks_per_scale; ++b) {
                nn::ResBlock<S> rb;
                rb.reg(layout, inits, "up." + std::to_string(i) + "." + std::to_string(b),
                       b == 0 ? cat : out, out, emb_mlp_dim);
                up[static_cast<size_t>(i)].push_back(std::move(rb));
            }
            ch = out;
        }

        head_gn.reg(layout, inits, "head.norm", ch);
        head_conv.reg(layout, inits, "head.conv", ch, c2, /*zero_init=*/true);
    }

    Tensor<S> forward(const Tensor<S>& input, int t_x, int t_y, const S* P) {
        const std::vector<double> emb_d = embed_timesteps(t_x, t_y, cfg.timestep_embed_dim);
        emb_raw.assign(emb_d.begin(), emb_d.end());
        mlp1_out = time_l1.forward(emb_raw, P);
        mlp2_out = time_l2.forward(nn::silu_forward_vec(mlp1_out), P);
        emb_act = nn::silu_forward_vec(mlp2_out);

        in_h = input.h;
        in_w = input.w;
        const int div = cfg.size_divisor();
        pad_h = (input.h + div - 1) / div * div;
        pad_w = (input.w + div - 1) / div * div;
        Tensor<S> h = (pad_h == in_h && pad_w == in_w) ? input : nn::replicate_pad(input, pad_h, pad_w);

        h = stem.forward(h, P);
        const int n = cfg.scales();
        skips.clear();
        for (int i = 0; i < n; ++i) {
            for (auto& rb : down[static_cast<size_t>(i)]) h = rb.forward(h, emb_act, P);
            if (i < n - 1) {
                skips.push_back(h);
                h = nn::avgpool2_forward(h);
            }
        }
        h = mid.forward(h, emb_act, P);
        for (int i = n - 2; i >= 0; --i) {
            h = nn::upsample2_forward(h);
            h = nn::concat_channels(h, skips[static_cast<size_t>(i)]);
            for (auto& rb : up[static_cast<size_t>(i)]) h = rb.forward(h, emb_act, P);
        }
        h = head_conv.forward(head_act.forward(head_gn.forward(h, P)), P);
        if (pad_h != in_h || pad_w != in_w) h = nn::crop_tl(h, in_h, in_w);
        return h;
    }

    void backward(const Tensor<S>& dout, const S* P, S* G) {
        Tensor<S> dh = (pad_h != in_h || pad_w != in_w) ? nn::crop_tl_backward(dout, pad_h, pad_w)
                                                        : dout;
        dh = head_gn.backward(head_act.backward(head_conv.backward(dh, P, G)), P, G);

        std::vector<S> demb(emb_act.size(), S(0));
        const int n = cfg.scales();
        std::vector<Tensor<S>> dskips(skips.size());
        for (int i = 0; i <= n - 2; ++i) {
            for (int b = cfg.res_blocks_per_scale - 1; b >= 0; --b) {
                dh = up[static_cast<size_t>(i)][static_cast<size_t>(b)].backward(dh, P, G, demb);
            }
            Tensor<S> dcat_a, dcat_b;
            const int carried = dh.c - skips[static_cast<size_t>(i)].c;
            nn::split_channels(dh, dcat_a, dcat_b, carried);
            dskips[static_cast<size_t>(i)] = std::move(dcat_b);
            dh = nn::upsample2_backward(dcat_a);
        }

        dh = mid.backward(dh, P, G, demb);
        for (int i = n - 1; i >= 0; --i) {
            if (i < n - 1) {
                dh = nn::avgpool2_backward(dh);
                for (size_t k = 0; k < dh.size(); ++k) dh.v[k] += dskips[static_cast<size_t>(i)].v[k];
            }
            for (int b = cfg.res_blocks_per_scale - 1; b >= 0; --b) {
                dh = down[static_cast<size_t>(i)][static_cast<size_t>(b)].backward(dh, P, G, demb);
            }
        }
        stem.backward(dh, P, G);

        std::vector<S> dm2 = nn::silu_backward_vec(mlp2_out, demb);
        std::vector<S> dma = time_l2.backward(dm2, P, G);
        std::vector<S> dm1 = nn::silu_backward_vec(mlp1_out, dma);
        time_l1.backward(dm1, P, G);
    }
};

template <class S>
Tensor<S> pack_input(const Image& x, const Image& y) {
    const int C = x.channels;
    Tensor<S> t(2 * C, x.height, x.width);
    for (int c = 0; c < C; ++c) {
        for (int r = 0; r < x.height; ++r) {
            for (int col = 0; col < x.width; ++col) {
                t.at(c, r, col) = static_cast<S>(x.at(r, col, c));
                t.at(C + c, r, col) = static_cast<S>(y.at(r, col, c));
            }
        }
    }
    return t;
}

template <class S>
void unpack_output(const Tensor<S>& t, Image& x0_hat, Image& y0_hat) {
    const int C = t.c / 2;
    x0_hat = Image(t.h, t.w, C);
    y0_hat = Image(t.h, t.w, C);
    for (int c = 0; c < C; ++c) {
        for (int r = 0; r < t.h; ++r) {
            for (int col = 0; col < t.w; ++col) {
                x0_hat.at(r, col, c) = static_cast<double>(t.at(c, r, col));
                y0_hat.at(r, col, c) = static_cast<double>(t.at(C + c, r, col));
            }
        }
    }
}

}  // namespace

template <class Scalar>
struct DenoiserT<Scalar>::Impl {
    UNetGraph<Scalar> proto;
    explicit Impl(const DenoiserConfig& cfg) : proto(cfg) {}
};

template <class Scalar>
DenoiserT<Scalar>::DenoiserT(DenoiserConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    impl_ = std::make_unique<Impl>(cfg_);
    params_.assign(impl_->proto.layout.total(), Scalar(0));
}

template <class Scalar>
DenoiserT<Scalar>::~DenoiserT() = default;

template <class Scalar>
DenoiserT<Scalar>::DenoiserT(const DenoiserT& o) : cfg_(o.cfg_), params_(o.params_) {
    impl_ = std::make_unique<Impl>(cfg_);
}

template <class Scalar>
DenoiserT<Scalar>& DenoiserT<Scalar>::operator=(const DenoiserT& o) {
    if (this != &o) {
        cfg_ = o.cfg_;
        params_ = o.params_;
        impl_ = std::make_unique<Impl>(cfg_);
    }
    return *this;
}

template <class Scalar>
DenoiserT<Scalar>::DenoiserT(DenoiserT&&) noexcept = default;
template <class Scalar>
DenoiserT<Scalar>& DenoiserT<Scalar>::operator=(DenoiserT&&) noexcept = default;

template <class Scalar>
size_t DenoiserT<Scalar>::param_count() const {
    return impl_->proto.layout.total();
}

template <class Scalar>
std::vector<ParamBlockInfo> DenoiserT<Scalar>::param_blocks() const {
    std::vector<ParamBlockInfo> out;
    for (const auto& b : impl_->proto.layout.blocks()) out.push_back({b.name, b.offset, b.count});
    return out;
}

template <class Scalar>
void DenoiserT<Scalar>::set_params(const std::vector<Scalar>& p) {
    if (p.size() != params_.size()) {
        throw std::invalid_argument("Denoiser::set_params: expected " +
                                    std::to_string(params_.size()) + " values, got " +
                                    std::to_string(p.size()));
    }
    params_ = p;
}

template <class Scalar>
void DenoiserT<Scalar>::init_params(uint64_t seed) {
    // Draw in double so float and double instances agree bit-for-bit after cast.
    Rng rng(Rng::mix(seed, 0x6e6eULL));
    const auto& blocks = impl_->proto.layout.blocks();
    const auto& inits = impl_->proto.inits;
    for (size_t i = 0; i < blocks.size(); ++i) {
        Scalar* dst = params_.data() + blocks[i].offset;
        switch (inits[i].kind) {
            case nn::InitKind::zeros:
                for (size_t k = 0; k < blocks[i].count; ++k) dst[k] = Scalar(0);
                break;
            case nn::InitKind::ones:
                for (size_t k = 0; k < blocks[i].count; ++k) dst[k] = Scalar(1);
                break;
            case nn::InitKind::he_normal: {
                const double std_dev = std::sqrt(2.0 / static_cast<double>(inits[i].fan_in));
                for (size_t k = 0; k < blocks[i].count; ++k) {
                    dst[k] = static_cast<Scalar>(std_dev * rng.normal());
                }
                break;
            }
        }
    }
}

template <class Scalar>
DenoiserEstimate DenoiserT<Scalar>::denoise(const DualState& state) const {
    require_same_shape(state.x, state.y, "Denoiser::denoise");
    if (state.x.channels != cfg_.image_channels) {
        throw std::invalid_argument("Denoiser::denoise: expected " +
                                    std::to_string(cfg_.image_channels) + "-channel input");
    }
    UNetGraph<Scalar> g = impl_->proto;
    const Tensor<Scalar> in = pack_input<Scalar>(state.x, state.y);
    const Tensor<Scalar> out = g.forward(in, state.t_x, state.t_y, params_.data());
    DenoiserEstimate est;
    unpack_output(out, est.x0_hat, est.y0_hat);
    return est;
}

template <class Scalar>
double DenoiserT<Scalar>::loss_and_grad(const DualState& state, const Image& x0_target,
                                        const Image& y0_target, std::vector<Scalar>& grad,
                                        DenoiserEstimate* estimate_out) const {
    require_same_shape(state.x, state.y, "Denoiser::loss_and_grad");
    require_same_shape(state.x, x0_target, "Denoiser::loss_and_grad");
    require_same_shape(state.x, y0_target, "Denoiser::loss_and_grad");
    if (state.x.channels != cfg_.image_channels) {
        throw std::invalid_argument("Denoiser::loss_and_grad: expected " +
                                    std::to_string(cfg_.image_channels) + "-channel input");
    }
    if (grad.size() != params_.size()) {
        throw std::invalid_argument("Denoiser::loss_and_grad: grad buffer size mismatch");
    }

    UNetGraph<Scalar> g = impl_->proto;
    const Tensor<Scalar> in = pack_input<Scalar>(state.x, state.y);
    const Tensor<Scalar> out = g.forward(in, state.t_x, state.t_y, params_.data());
    const Tensor<Scalar> target = pack_input<Scalar>(x0_target, y0_target);

    const double n = static_cast<double>(out.size());
    double loss = 0.0;
    Tensor<Scalar> dout(out.c, out.h, out.w);
    for (size_t i = 0; i < out.size(); ++i) {
        const double d = static_cast<double>(out.v[i]) - static_cast<double>(target.v[i]);
        loss += std::fabs(d);
        // L1 subgradient with sign(0) = 0.
        dout.v[i] = static_cast<Scalar>((d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n);
    }
    loss /= n;

    g.backward(dout, params_.data(), grad.data());

    if (estimate_out) unpack_output(out, estimate_out->x0_hat, estimate_out->y0_hat);
    return loss;
}

template class DenoiserT<float>;
template class DenoiserT<double>;

}  // namespace rbdm
