// SPDX-License-Identifier: Apache-2.0
//
// Deterministic neural-network kernel: 2-D convolution, residual blocks,
// dense layers, global average pooling, an LSTM with exact backprop through
// time, softmax cross-entropy, bias-corrected Adam and a finite-difference
// gradient checker. Everything runs in 64-bit floats on a single thread.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "beamtrack/rng.hpp"
#include "beamtrack/tensor.hpp"

namespace beamtrack {

struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
};

inline void he_uniform_init(Tensor& w, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------------------
// Convolution, cross-correlation convention (no kernel flip).

class Conv2d {
public:
    Conv2d() = default;

    Conv2d(std::string name, std::size_t c_in, std::size_t c_out, std::size_t kernel,
           std::size_t stride, std::size_t pad, Rng& rng)
        : name_(std::move(name)), c_in_(c_in), c_out_(c_out), k_(kernel), stride_(stride),
          pad_(pad), w_(Tensor({c_out, c_in, kernel, kernel})), b_(Tensor({c_out})),
          dw_(Tensor({c_out, c_in, kernel, kernel})), db_(Tensor({c_out})) {
        if (stride_ == 0) throw std::invalid_argument("Conv2d: stride must be >= 1");
        he_uniform_init(w_, c_in * kernel * kernel, rng);
    }

    std::pair<std::size_t, std::size_t> output_hw(std::size_t h, std::size_t w) const {
        if (h + 2 * pad_ < k_ || w + 2 * pad_ < k_)
            throw std::invalid_argument("Conv2d: input smaller than kernel");
        return {(h + 2 * pad_ - k_) / stride_ + 1, (w + 2 * pad_ - k_) / stride_ + 1};
    }

    // Output positions r for kernel offset k whose input index r*stride+k-pad
    // lies inside [0, in); hoists the padding guards out of the hot loops.
    std::pair<std::size_t, std::size_t> valid_range(std::size_t k, std::size_t out,
                                                    std::size_t in) const {
        const long s = static_cast<long>(stride_);
        const long off = static_cast<long>(k) - static_cast<long>(pad_);
        long lo = (off < 0) ? (-off + s - 1) / s : 0;
        long hi = static_cast<long>(in) - off;
        hi = (hi <= 0) ? 0 : (hi + s - 1) / s;
        hi = std::min(hi, static_cast<long>(out));
        lo = std::min(lo, hi);
        return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
    }

    Tensor forward(const Tensor& x) {
        if (x.rank() != 3 || x.dim(0) != c_in_)
            throw std::invalid_argument("Conv2d " + name_ + ": bad input shape");
        const std::size_t h = x.dim(1), w = x.dim(2);
        const auto [oh, ow] = output_hw(h, w);
        x_cache_ = x;
        Tensor y({c_out_, oh, ow});

        for (std::size_t co = 0; co < c_out_; ++co) {
            double* ybase = y.data() + co * oh * ow;
            const double bias = b_[co];
            for (std::size_t i = 0; i < oh * ow; ++i) ybase[i] = bias;
            for (std::size_t ci = 0; ci < c_in_; ++ci) {
                const double* xbase = x.data() + ci * h * w;
                for (std::size_t kh = 0; kh < k_; ++kh) {
                    for (std::size_t kw = 0; kw < k_; ++kw) {
                        const double wv = w_[((co * c_in_ + ci) * k_ + kh) * k_ + kw];
                        const auto [r_lo, r_hi] = valid_range(kh, oh, h);
                        const auto [c_lo, c_hi] = valid_range(kw, ow, w);
                        if (c_lo >= c_hi) continue;
                        for (std::size_t r = r_lo; r < r_hi; ++r) {
                            const std::size_t ih = r * stride_ + kh - pad_;
                            const std::size_t n = c_hi - c_lo;
                            double* __restrict yrow = ybase + r * ow + c_lo;
                            // x column for output c is c*stride + kw - pad
                            const double* __restrict xp =
                                xbase + ih * w + c_lo * stride_ + kw - pad_;
                            if (stride_ == 1) {
                                for (std::size_t i = 0; i < n; ++i) yrow[i] += wv * xp[i];
                            } else {
                                for (std::size_t i = 0; i < n; ++i)
                                    yrow[i] += wv * xp[i * stride_];
                            }
                        }
                    }
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& dy) {
        const Tensor& x = x_cache_;
        const std::size_t h = x.dim(1), w = x.dim(2);
        const std::size_t oh = dy.dim(1), ow = dy.dim(2);
        if (dy.dim(0) != c_out_)
            throw std::invalid_argument("Conv2d " + name_ + ": bad gradient shape");
        Tensor dx({c_in_, h, w});

        for (std::size_t co = 0; co < c_out_; ++co) {
            const double* dybase = dy.data() + co * oh * ow;
            double acc_b = 0.0;
            for (std::size_t i = 0; i < oh * ow; ++i) acc_b += dybase[i];
            db_[co] += acc_b;
            for (std::size_t ci = 0; ci < c_in_; ++ci) {
                const double* xbase = x.data() + ci * h * w;
                double* dxbase = dx.data() + ci * h * w;
                for (std::size_t kh = 0; kh < k_; ++kh) {
                    for (std::size_t kw = 0; kw < k_; ++kw) {
                        const std::size_t widx = ((co * c_in_ + ci) * k_ + kh) * k_ + kw;
                        const double wv = w_[widx];
                        const auto [r_lo, r_hi] = valid_range(kh, oh, h);
                        const auto [c_lo, c_hi] = valid_range(kw, ow, w);
                        if (c_lo >= c_hi) continue;
                        double acc_w = 0.0;
                        for (std::size_t r = r_lo; r < r_hi; ++r) {
                            const std::size_t ih = r * stride_ + kh - pad_;
                            const std::size_t xoff = ih * w + c_lo * stride_ + kw - pad_;
                            const std::size_t n = c_hi - c_lo;
                            const double* __restrict dyp = dybase + r * ow + c_lo;
                            const double* __restrict xp = xbase + xoff;
                            double* __restrict dxp = dxbase + xoff;
                            if (stride_ == 1) {
                                // unrolled accumulators break the FP latency
                                // chain while keeping a fixed summation order
                                double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
                                std::size_t i = 0;
                                for (; i + 4 <= n; i += 4) {
                                    a0 += dyp[i] * xp[i];
                                    a1 += dyp[i + 1] * xp[i + 1];
                                    a2 += dyp[i + 2] * xp[i + 2];
                                    a3 += dyp[i + 3] * xp[i + 3];
                                }
                                for (; i < n; ++i) a0 += dyp[i] * xp[i];
                                acc_w += (a0 + a1) + (a2 + a3);
                                for (std::size_t i2 = 0; i2 < n; ++i2)
                                    dxp[i2] += wv * dyp[i2];
                            } else {
                                for (std::size_t i = 0; i < n; ++i) {
                                    acc_w += dyp[i] * xp[i * stride_];
                                    dxp[i * stride_] += wv * dyp[i];
                                }
                            }
                        }
                        dw_[widx] += acc_w;
                    }
                }
            }
        }
        return dx;
    }

    void zero_grad() {
        dw_.zero();
        db_.zero();
    }

    std::vector<ParamRef> params() {
        return {{name_ + ".w", &w_, &dw_}, {name_ + ".b", &b_, &db_}};
    }

    Tensor& weights() { return w_; }
    Tensor& bias() { return b_; }

private:
    std::string name_;
    std::size_t c_in_ = 0, c_out_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
    Tensor w_, b_, dw_, db_;
    Tensor x_cache_;
};

// ---------------------------------------------------------------------------

class Relu {
public:
    Tensor forward(const Tensor& x) {
        x_cache_ = x;
        Tensor y = x;
        for (std::size_t i = 0; i < y.numel(); ++i)
            if (y[i] < 0.0) y[i] = 0.0;
        return y;
    }

    Tensor backward(const Tensor& dy) {
        Tensor dx = dy;
        for (std::size_t i = 0; i < dx.numel(); ++i)
            if (x_cache_[i] <= 0.0) dx[i] = 0.0;
        return dx;
    }

private:
    Tensor x_cache_;
};

class Dense {
public:
    Dense() = default;

    Dense(std::string name, std::size_t in, std::size_t out, Rng& rng)
        : name_(std::move(name)), in_(in), out_(out), w_(Tensor({out, in})),
          b_(Tensor({out})), dw_(Tensor({out, in})), db_(Tensor({out})) {
        he_uniform_init(w_, in, rng);
    }

    Tensor forward(const Tensor& x) {
        if (x.numel() != in_)
            throw std::invalid_argument("Dense " + name_ + ": bad input length");
        x_cache_ = x;
        Tensor y({out_});
        for (std::size_t o = 0; o < out_; ++o) {
            const double* wrow = w_.data() + o * in_;
            double acc = b_[o];
            for (std::size_t i = 0; i < in_; ++i) acc += wrow[i] * x[i];
            y[o] = acc;
        }
        return y;
    }

    Tensor backward(const Tensor& dy) {
        if (dy.numel() != out_)
            throw std::invalid_argument("Dense " + name_ + ": bad gradient length");
        Tensor dx({in_});
        for (std::size_t o = 0; o < out_; ++o) {
            const double g = dy[o];
            db_[o] += g;
            double* dwrow = dw_.data() + o * in_;
            const double* wrow = w_.data() + o * in_;
            for (std::size_t i = 0; i < in_; ++i) {
                dwrow[i] += g * x_cache_[i];
                dx[i] += wrow[i] * g;
            }
        }
        return dx;
    }

    void zero_grad() {
        dw_.zero();
        db_.zero();
    }

    std::vector<ParamRef> params() {
        return {{name_ + ".w", &w_, &dw_}, {name_ + ".b", &b_, &db_}};
    }

    Tensor& weights() { return w_; }
    Tensor& bias() { return b_; }

private:
    std::string name_;
    std::size_t in_ = 0, out_ = 0;
    Tensor w_, b_, dw_, db_;
    Tensor x_cache_;
};

class GlobalAvgPool {
public:
    Tensor forward(const Tensor& x) {
        if (x.rank() != 3) throw std::invalid_argument("GlobalAvgPool: expects [C,H,W]");
        c_ = x.dim(0);
        hw_ = x.dim(1) * x.dim(2);
        h_ = x.dim(1);
        w_ = x.dim(2);
        Tensor y({c_});
        for (std::size_t c = 0; c < c_; ++c) {
            const double* base = x.data() + c * hw_;
            double acc = 0.0;
            for (std::size_t i = 0; i < hw_; ++i) acc += base[i];
            y[c] = acc / static_cast<double>(hw_);
        }
        return y;
    }

    Tensor backward(const Tensor& dy) {
        Tensor dx({c_, h_, w_});
        for (std::size_t c = 0; c < c_; ++c) {
            const double g = dy[c] / static_cast<double>(hw_);
            double* base = dx.data() + c * hw_;
            for (std::size_t i = 0; i < hw_; ++i) base[i] = g;
        }
        return dx;
    }

private:
    std::size_t c_ = 0, hw_ = 0, h_ = 0, w_ = 0;
};

// Two 3x3 convolutions with an identity shortcut; a 1x1 projection joins the
// shortcut when channel counts or stride differ.
class ResidualBlock {
public:
    ResidualBlock() = default;

    ResidualBlock(const std::string& name, std::size_t c_in, std::size_t c_out,
                  std::size_t stride, Rng& rng)
        : conv1_(name + ".conv1", c_in, c_out, 3, stride, 1, rng),
          conv2_(name + ".conv2", c_out, c_out, 3, 1, 1, rng),
          projecting_(c_in != c_out || stride != 1) {
        if (projecting_) proj_ = Conv2d(name + ".proj", c_in, c_out, 1, stride, 0, rng);
    }

    Tensor forward(const Tensor& x) {
        Tensor inner = relu1_.forward(conv1_.forward(x));
        inner = conv2_.forward(inner);
        const Tensor shortcut = projecting_ ? proj_.forward(x) : x;
        if (!inner.same_shape(shortcut))
            throw std::invalid_argument("ResidualBlock: branch shapes disagree");
        Tensor sum = inner;
        for (std::size_t i = 0; i < sum.numel(); ++i) sum[i] += shortcut[i];
        return relu2_.forward(sum);
    }

    Tensor backward(const Tensor& dy) {
        const Tensor dsum = relu2_.backward(dy);
        Tensor dx = conv1_.backward(relu1_.backward(conv2_.backward(dsum)));
        if (projecting_) {
            const Tensor dproj = proj_.backward(dsum);
            for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += dproj[i];
        } else {
            for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += dsum[i];
        }
        return dx;
    }

    void zero_grad() {
        conv1_.zero_grad();
        conv2_.zero_grad();
        if (projecting_) proj_.zero_grad();
    }

    std::vector<ParamRef> params() {
        auto p = conv1_.params();
        auto p2 = conv2_.params();
        p.insert(p.end(), p2.begin(), p2.end());
        if (projecting_) {
            auto p3 = proj_.params();
            p.insert(p.end(), p3.begin(), p3.end());
        }
        return p;
    }

    Conv2d& conv1() { return conv1_; }
    Conv2d& conv2() { return conv2_; }
    bool projecting() const { return projecting_; }
    Conv2d& proj() { return proj_; }

private:
    Conv2d conv1_, conv2_, proj_;
    Relu relu1_, relu2_;
    bool projecting_ = false;
};

// ---------------------------------------------------------------------------
// LSTM. Gate packing order is [input, forget, candidate, output].

struct LstmStepResult {
    Tensor h;
    Tensor c;
};

class Lstm {
public:
    Lstm() = default;

    Lstm(std::string name, std::size_t input_dim, std::size_t hidden, Rng& rng)
        : name_(std::move(name)), d_(input_dim), h_(hidden),
          wx_(Tensor({4 * hidden, input_dim})), wh_(Tensor({4 * hidden, hidden})),
          b_(Tensor({4 * hidden})), dwx_(Tensor({4 * hidden, input_dim})),
          dwh_(Tensor({4 * hidden, hidden})), db_(Tensor({4 * hidden})) {
        he_uniform_init(wx_, input_dim + hidden, rng);
        he_uniform_init(wh_, input_dim + hidden, rng);
        for (std::size_t i = hidden; i < 2 * hidden; ++i) b_[i] = 1.0;  // forget bias
    }

    std::size_t hidden_size() const { return h_; }
    std::size_t input_dim() const { return d_; }

    // Single cell update used by the sequence runner and exposed for tests.
    LstmStepResult step(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev) const {
        if (x.numel() != d_ || h_prev.numel() != h_ || c_prev.numel() != h_)
            throw std::invalid_argument("Lstm " + name_ + ": bad step shapes");
        Tensor gates({4 * h_});
        for (std::size_t r = 0; r < 4 * h_; ++r) {
            double acc = b_[r];
            const double* wxrow = wx_.data() + r * d_;
            for (std::size_t i = 0; i < d_; ++i) acc += wxrow[i] * x[i];
            const double* whrow = wh_.data() + r * h_;
            for (std::size_t i = 0; i < h_; ++i) acc += whrow[i] * h_prev[i];
            gates[r] = acc;
        }
        LstmStepResult out{Tensor({h_}), Tensor({h_})};
        for (std::size_t i = 0; i < h_; ++i) {
            const double gi = sigmoid(gates[i]);
            const double gf = sigmoid(gates[h_ + i]);
            const double gg = std::tanh(gates[2 * h_ + i]);
            const double go = sigmoid(gates[3 * h_ + i]);
            const double c = gf * c_prev[i] + gi * gg;
            out.c[i] = c;
            out.h[i] = go * std::tanh(c);
        }
        return out;
    }

    // Runs the full sequence from zero state and caches activations for BPTT.
    // Returns the final hidden state.
    Tensor forward(const std::vector<Tensor>& xs) {
        if (xs.empty()) throw std::invalid_argument("Lstm: empty sequence");
        steps_.clear();
        steps_.reserve(xs.size());
        Tensor h({h_}), c({h_});
        for (const Tensor& x : xs) {
            StepCache sc;
            sc.x = x;
            sc.h_prev = h;
            sc.c_prev = c;
            if (x.numel() != d_) throw std::invalid_argument("Lstm: bad input dim");
            Tensor gates({4 * h_});
            for (std::size_t r = 0; r < 4 * h_; ++r) {
                double acc = b_[r];
                const double* wxrow = wx_.data() + r * d_;
                for (std::size_t i = 0; i < d_; ++i) acc += wxrow[i] * x[i];
                const double* whrow = wh_.data() + r * h_;
                for (std::size_t i = 0; i < h_; ++i) acc += whrow[i] * h[i];
                gates[r] = acc;
            }
            sc.i = Tensor({h_});
            sc.f = Tensor({h_});
            sc.g = Tensor({h_});
            sc.o = Tensor({h_});
            Tensor c_next({h_}), h_next({h_});
            for (std::size_t i = 0; i < h_; ++i) {
                sc.i[i] = sigmoid(gates[i]);
                sc.f[i] = sigmoid(gates[h_ + i]);
                sc.g[i] = std::tanh(gates[2 * h_ + i]);
                sc.o[i] = sigmoid(gates[3 * h_ + i]);
                c_next[i] = sc.f[i] * c[i] + sc.i[i] * sc.g[i];
                h_next[i] = sc.o[i] * std::tanh(c_next[i]);
            }
            sc.c = c_next;
            h = h_next;
            c = c_next;
            steps_.push_back(std::move(sc));
        }
        return h;
    }

    // Exact backprop through time from the gradient of the final hidden
    // state. Returns per-step input gradients.
    std::vector<Tensor> backward(const Tensor& dh_final) {
        if (steps_.empty()) throw std::invalid_argument("Lstm: backward without forward");
        std::vector<Tensor> dxs(steps_.size(), Tensor({d_}));
        Tensor dh = dh_final;
        Tensor dc({h_});
        for (std::size_t t = steps_.size(); t-- > 0;) {
            const StepCache& sc = steps_[t];
            Tensor dgates({4 * h_});
            for (std::size_t i = 0; i < h_; ++i) {
                const double tanh_c = std::tanh(sc.c[i]);
                const double do_ = dh[i] * tanh_c;
                const double dci = dc[i] + dh[i] * sc.o[i] * (1.0 - tanh_c * tanh_c);
                const double di = dci * sc.g[i];
                const double df = dci * sc.c_prev[i];
                const double dg = dci * sc.i[i];
                dgates[i] = di * sc.i[i] * (1.0 - sc.i[i]);
                dgates[h_ + i] = df * sc.f[i] * (1.0 - sc.f[i]);
                dgates[2 * h_ + i] = dg * (1.0 - sc.g[i] * sc.g[i]);
                dgates[3 * h_ + i] = do_ * sc.o[i] * (1.0 - sc.o[i]);
                dc[i] = dci * sc.f[i];
            }
            Tensor dh_prev({h_});
            for (std::size_t r = 0; r < 4 * h_; ++r) {
                const double g = dgates[r];
                if (g == 0.0) continue;
                db_[r] += g;
                double* dwxrow = dwx_.data() + r * d_;
                const double* wxrow = wx_.data() + r * d_;
                for (std::size_t i = 0; i < d_; ++i) {
                    dwxrow[i] += g * sc.x[i];
                    dxs[t][i] += wxrow[i] * g;
                }
                double* dwhrow = dwh_.data() + r * h_;
                const double* whrow = wh_.data() + r * h_;
                for (std::size_t i = 0; i < h_; ++i) {
                    dwhrow[i] += g * sc.h_prev[i];
                    dh_prev[i] += whrow[i] * g;
                }
            }
            dh = std::move(dh_prev);
        }
        return dxs;
    }

    void zero_grad() {
        dwx_.zero();
        dwh_.zero();
        db_.zero();
    }

    std::vector<ParamRef> params() {
        return {{name_ + ".wx", &wx_, &dwx_},
                {name_ + ".wh", &wh_, &dwh_},
                {name_ + ".b", &b_, &db_}};
    }

    Tensor& weights_x() { return wx_; }
    Tensor& weights_h() { return wh_; }
    Tensor& bias() { return b_; }

private:
    static double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

    struct StepCache {
        Tensor x, h_prev, c_prev, c, i, f, g, o;
    };

    std::string name_;
    std::size_t d_ = 0, h_ = 0;
    Tensor wx_, wh_, b_, dwx_, dwh_, db_;
    std::vector<StepCache> steps_;
};

// ---------------------------------------------------------------------------

struct SoftmaxLoss {
    double loss = 0.0;
    Tensor grad;      // d loss / d logits
    Tensor probs;
};

// Numerically stable softmax cross-entropy against an integer label.
inline SoftmaxLoss softmax_cross_entropy(const Tensor& logits, std::size_t label) {
    const std::size_t m = logits.numel();
    if (label >= m) throw std::invalid_argument("softmax_cross_entropy: label out of range");
    double max_v = logits[0];
    for (std::size_t i = 1; i < m; ++i) max_v = std::max(max_v, logits[i]);
    SoftmaxLoss out;
    out.probs = Tensor({m});
    double denom = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        out.probs[i] = std::exp(logits[i] - max_v);
        denom += out.probs[i];
    }
    for (std::size_t i = 0; i < m; ++i) out.probs[i] /= denom;
    out.loss = -std::log(std::max(out.probs[label], 1e-300));
    out.grad = out.probs;
    out.grad[label] -= 1.0;
    return out;
}

// ---------------------------------------------------------------------------
// Adam with bias correction. One state per parameter tensor.

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Tensor m, v;
    long step = 0;
};

inline void adam_update(Tensor& value, const Tensor& grad, AdamState& st,
                        const AdamConfig& cfg) {
    if (!value.same_shape(grad))
        throw std::invalid_argument("adam_update: grad shape mismatch");
    grad.check_finite("adam_update gradient");
    if (st.step == 0) {
        st.m = Tensor(value.shape());
        st.v = Tensor(value.shape());
    }
    ++st.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < value.numel(); ++i) {
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grad[i];
        st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double m_hat = st.m[i] / bc1;
        const double v_hat = st.v[i] / bc2;
        value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void update(const std::vector<ParamRef>& params) {
        if (states_.size() < params.size()) states_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i)
            adam_update(*params[i].value, *params[i].grad, states_[i], cfg_);
    }

    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::vector<AdamState> states_;
};

// ---------------------------------------------------------------------------
// Central finite differences over every parameter coordinate (or a seeded
// random subset once the parameter count passes max_coords). The analytic
// gradients must already be populated for the unperturbed point; loss_fn
// re-evaluates the loss at the current parameter values.

template <typename LossFn>
double gradient_check(const std::vector<ParamRef>& params, LossFn&& loss_fn, double eps,
                      std::size_t max_coords = 10000, std::uint64_t subset_seed = 0x9dc5) {
    std::size_t total = 0;
    for (const auto& p : params) total += p.value->numel();

    std::vector<std::pair<std::size_t, std::size_t>> coords;  // (param index, offset)
    if (total <= max_coords) {
        for (std::size_t pi = 0; pi < params.size(); ++pi)
            for (std::size_t i = 0; i < params[pi].value->numel(); ++i)
                coords.emplace_back(pi, i);
    } else {
        Rng rng(subset_seed);
        coords.reserve(max_coords);
        for (std::size_t k = 0; k < max_coords; ++k) {
            std::size_t flat = rng.uniform_int(total);
            std::size_t pi = 0;
            while (flat >= params[pi].value->numel()) {
                flat -= params[pi].value->numel();
                ++pi;
            }
            coords.emplace_back(pi, flat);
        }
    }

    double max_rel = 0.0;
    for (const auto& [pi, i] : coords) {
        Tensor& value = *params[pi].value;
        const double saved = value[i];
        value[i] = saved + eps;
        const double loss_hi = loss_fn();
        value[i] = saved - eps;
        const double loss_lo = loss_fn();
        value[i] = saved;
        const double numeric = (loss_hi - loss_lo) / (2.0 * eps);
        const double analytic = (*params[pi].grad)[i];
        const double rel = std::abs(analytic - numeric) /
                           std::max({std::abs(analytic), std::abs(numeric), 1e-12});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace beamtrack
