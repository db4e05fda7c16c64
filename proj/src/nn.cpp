#include "cdf/nn.hpp"

#include <cmath>
#include <string>

#include "cdf/errors.hpp"

namespace cdf {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix glorot_matrix(std::size_t in, std::size_t out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix m(in, out);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
    return m;
}

void check_cols(const Matrix& m, std::size_t expected, const char* what) {
    if (m.cols() != expected) {
        throw DimensionMismatchError(std::string(what) + ": got " +
                                     std::to_string(m.cols()) + " columns, expected " +
                                     std::to_string(expected));
    }
}

} // namespace

DenseLayer DenseLayer::glorot(std::size_t in, std::size_t out, Activation act,
                              Rng& rng) {
    DenseLayer layer;
    layer.w = glorot_matrix(in, out, rng);
    layer.b.assign(out, 0.0);
    layer.activation = act;
    return layer;
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
    DenseCache scratch;
    return dense_forward_cached(layer, x, scratch);
}

Matrix dense_forward_cached(const DenseLayer& layer, const Matrix& x,
                            DenseCache& cache) {
    check_cols(x, layer.w.rows(), "dense input");
    Matrix pre = matmul(x, layer.w);
    for (std::size_t r = 0; r < pre.rows(); ++r) {
        for (std::size_t c = 0; c < pre.cols(); ++c) pre(r, c) += layer.b[c];
    }
    cache.input = x;
    cache.pre = pre;
    cache.ready = true;
    if (layer.activation == Activation::relu) {
        for (std::size_t i = 0; i < pre.size(); ++i) {
            if (pre.data()[i] < 0.0) pre.data()[i] = 0.0;
        }
    }
    return pre;
}

Matrix dense_backward(const DenseLayer& layer, const DenseCache& cache,
                      const Matrix& dout, DenseGrads& grads) {
    if (!cache.ready) throw MissingCacheError("dense cache not populated");
    Matrix dpre = dout;
    if (layer.activation == Activation::relu) {
        for (std::size_t i = 0; i < dpre.size(); ++i) {
            if (cache.pre.data()[i] <= 0.0) dpre.data()[i] = 0.0;
        }
    }
    if (grads.w.rows() == 0) {
        grads.w = Matrix(layer.w.rows(), layer.w.cols());
        grads.b.assign(layer.b.size(), 0.0);
    }
    const Matrix dw = matmul_tn(cache.input, dpre);
    for (std::size_t i = 0; i < dw.size(); ++i) grads.w.data()[i] += dw.data()[i];
    for (std::size_t r = 0; r < dpre.rows(); ++r) {
        for (std::size_t c = 0; c < dpre.cols(); ++c) grads.b[c] += dpre(r, c);
    }
    return matmul_nt(dpre, layer.w);
}

LstmLayer LstmLayer::glorot(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    LstmLayer layer;
    layer.input_dim = input_dim;
    layer.hidden_dim = hidden_dim;
    const std::size_t z = input_dim + hidden_dim;
    layer.wf = glorot_matrix(z, hidden_dim, rng);
    layer.wi = glorot_matrix(z, hidden_dim, rng);
    layer.wo = glorot_matrix(z, hidden_dim, rng);
    layer.wc = glorot_matrix(z, hidden_dim, rng);
    layer.bf.assign(hidden_dim, 1.0); // forget bias 1.0
    layer.bi.assign(hidden_dim, 0.0);
    layer.bo.assign(hidden_dim, 0.0);
    layer.bc.assign(hidden_dim, 0.0);
    return layer;
}

Matrix lstm_forward(const LstmLayer& layer, const Matrix& seq) {
    LstmCache scratch;
    return lstm_forward_cached(layer, seq, scratch);
}

Matrix lstm_forward_cached(const LstmLayer& layer, const Matrix& seq,
                           LstmCache& cache) {
    check_cols(seq, layer.input_dim, "lstm input");
    if (seq.rows() == 0) throw DimensionMismatchError("lstm needs >= 1 step");
    const std::size_t U = seq.rows(), H = layer.hidden_dim, Z = layer.input_dim + H;

    cache.inputs = seq;
    cache.h = Matrix(U, H);
    cache.c = Matrix(U, H);
    cache.f = Matrix(U, H);
    cache.i = Matrix(U, H);
    cache.o = Matrix(U, H);
    cache.g = Matrix(U, H);

    Matrix z(1, Z);
    for (std::size_t t = 0; t < U; ++t) {
        for (std::size_t k = 0; k < layer.input_dim; ++k) z(0, k) = seq(t, k);
        for (std::size_t k = 0; k < H; ++k) {
            z(0, layer.input_dim + k) = t > 0 ? cache.h(t - 1, k) : 0.0;
        }
        const Matrix pf = matmul(z, layer.wf);
        const Matrix pi = matmul(z, layer.wi);
        const Matrix po = matmul(z, layer.wo);
        const Matrix pg = matmul(z, layer.wc);
        for (std::size_t k = 0; k < H; ++k) {
            const double f = sigmoid(pf(0, k) + layer.bf[k]);
            const double i = sigmoid(pi(0, k) + layer.bi[k]);
            const double o = sigmoid(po(0, k) + layer.bo[k]);
            const double g = std::tanh(pg(0, k) + layer.bc[k]);
            const double c_prev = t > 0 ? cache.c(t - 1, k) : 0.0;
            const double c = f * c_prev + i * g;
            cache.f(t, k) = f;
            cache.i(t, k) = i;
            cache.o(t, k) = o;
            cache.g(t, k) = g;
            cache.c(t, k) = c;
            cache.h(t, k) = o * std::tanh(c);
        }
    }
    cache.ready = true;
    return cache.h;
}

Matrix lstm_backward(const LstmLayer& layer, const LstmCache& cache,
                     const Matrix& dh_seq, LstmGrads& grads) {
    if (!cache.ready) throw MissingCacheError("lstm cache not populated");
    const std::size_t U = cache.inputs.rows();
    const std::size_t In = layer.input_dim, H = layer.hidden_dim, Z = In + H;
    if (dh_seq.rows() != U || dh_seq.cols() != H) {
        throw DimensionMismatchError("lstm dh shape mismatch");
    }
    if (grads.wf.rows() == 0) {
        grads.wf = Matrix(Z, H);
        grads.wi = Matrix(Z, H);
        grads.wo = Matrix(Z, H);
        grads.wc = Matrix(Z, H);
        grads.bf.assign(H, 0.0);
        grads.bi.assign(H, 0.0);
        grads.bo.assign(H, 0.0);
        grads.bc.assign(H, 0.0);
    }

    Matrix dseq(U, In);
    std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0);
    Matrix z(1, Z), dpre_f(1, H), dpre_i(1, H), dpre_o(1, H), dpre_g(1, H);

    for (std::size_t t = U; t-- > 0;) {
        for (std::size_t k = 0; k < In; ++k) z(0, k) = cache.inputs(t, k);
        for (std::size_t k = 0; k < H; ++k) {
            z(0, In + k) = t > 0 ? cache.h(t - 1, k) : 0.0;
        }
        for (std::size_t k = 0; k < H; ++k) {
            const double dh = dh_seq(t, k) + dh_next[k];
            const double c = cache.c(t, k);
            const double tc = std::tanh(c);
            const double o = cache.o(t, k);
            const double f = cache.f(t, k);
            const double i = cache.i(t, k);
            const double g = cache.g(t, k);
            const double c_prev = t > 0 ? cache.c(t - 1, k) : 0.0;

            const double do_ = dh * tc;
            double dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            const double df = dc * c_prev;
            const double di = dc * g;
            const double dg = dc * i;

            dpre_o(0, k) = do_ * o * (1.0 - o);
            dpre_f(0, k) = df * f * (1.0 - f);
            dpre_i(0, k) = di * i * (1.0 - i);
            dpre_g(0, k) = dg * (1.0 - g * g);
            dc_next[k] = dc * f;
        }
        // parameter gradients: z^T * dpre
        for (std::size_t a = 0; a < Z; ++a) {
            const double za = z(0, a);
            if (za == 0.0) continue;
            for (std::size_t k = 0; k < H; ++k) {
                grads.wf(a, k) += za * dpre_f(0, k);
                grads.wi(a, k) += za * dpre_i(0, k);
                grads.wo(a, k) += za * dpre_o(0, k);
                grads.wc(a, k) += za * dpre_g(0, k);
            }
        }
        for (std::size_t k = 0; k < H; ++k) {
            grads.bf[k] += dpre_f(0, k);
            grads.bi[k] += dpre_i(0, k);
            grads.bo[k] += dpre_o(0, k);
            grads.bc[k] += dpre_g(0, k);
        }
        // dz = sum of dpre_* W_*^T
        for (std::size_t a = 0; a < Z; ++a) {
            double acc = 0.0;
            for (std::size_t k = 0; k < H; ++k) {
                acc += dpre_f(0, k) * layer.wf(a, k);
                acc += dpre_i(0, k) * layer.wi(a, k);
                acc += dpre_o(0, k) * layer.wo(a, k);
                acc += dpre_g(0, k) * layer.wc(a, k);
            }
            if (a < In) {
                dseq(t, a) = acc;
            } else {
                dh_next[a - In] = acc;
            }
        }
    }
    return dseq;
}

GraphLayer GraphLayer::glorot(Matrix propagation, std::size_t out_dim, Rng& rng) {
    GraphLayer layer;
    const std::size_t a = propagation.rows();
    layer.propagation = std::move(propagation);
    layer.w = glorot_matrix(a, out_dim, rng);
    return layer;
}

Matrix graph_forward(const GraphLayer& layer, const Matrix& x) {
    GraphCache scratch;
    return graph_forward_cached(layer, x, scratch);
}

Matrix graph_forward_cached(const GraphLayer& layer, const Matrix& x,
                            GraphCache& cache) {
    check_cols(x, layer.propagation.rows(), "graph input");
    cache.mixed = matmul(x, layer.propagation);
    cache.pre = matmul(cache.mixed, layer.w);
    cache.ready = true;
    Matrix z = cache.pre;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z.data()[i] < 0.0) z.data()[i] = 0.0;
    }
    return z;
}

void graph_backward(const GraphLayer& layer, const GraphCache& cache, const Matrix& dz,
                    GraphGrads& grads) {
    if (!cache.ready) throw MissingCacheError("graph cache not populated");
    Matrix dpre = dz;
    for (std::size_t i = 0; i < dpre.size(); ++i) {
        if (cache.pre.data()[i] <= 0.0) dpre.data()[i] = 0.0;
    }
    if (grads.w.rows() == 0) grads.w = Matrix(layer.w.rows(), layer.w.cols());
    const Matrix dw = matmul_tn(cache.mixed, dpre);
    for (std::size_t i = 0; i < dw.size(); ++i) grads.w.data()[i] += dw.data()[i];
}

LossGrad mse_loss(const Matrix& pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw DimensionMismatchError("mse shapes differ");
    }
    LossGrad out;
    out.grad = Matrix(pred.rows(), pred.cols());
    const double n = static_cast<double>(pred.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data()[i] - target.data()[i];
        loss += d * d;
        out.grad.data()[i] = 2.0 * d / n;
    }
    out.loss = loss / n;
    return out;
}

RmsProp::RmsProp(std::size_t n, double learning_rate, double rho, double eps)
    : lr_(learning_rate), rho_(rho), eps_(eps), acc_(n, 0.0) {}

void RmsProp::step(std::span<double* const> params, std::span<const double> grads) {
    if (params.size() != acc_.size() || grads.size() != acc_.size()) {
        throw DimensionMismatchError("rmsprop state size mismatch");
    }
    for (std::size_t i = 0; i < acc_.size(); ++i) {
        const double g = grads[i];
        acc_[i] = rho_ * acc_[i] + (1.0 - rho_) * g * g;
        *params[i] -= lr_ * g / std::sqrt(acc_[i] + eps_);
    }
}

} // namespace cdf
