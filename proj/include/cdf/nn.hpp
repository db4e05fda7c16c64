#ifndef CDF_NN_HPP
#define CDF_NN_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "cdf/linalg.hpp"
#include "cdf/rng.hpp"

namespace cdf {

// Row-vector convention throughout: activations are rows, weights are
// in x out, y = x * W + b.

enum class Activation { relu, identity };

struct DenseLayer {
    Matrix w;
    std::vector<double> b;
    Activation activation = Activation::identity;

    static DenseLayer glorot(std::size_t in, std::size_t out, Activation act, Rng& rng);
};

struct DenseCache {
    Matrix input;
    Matrix pre; // pre-activation
    bool ready = false;
};

struct DenseGrads {
    Matrix w;
    std::vector<double> b;
};

Matrix dense_forward(const DenseLayer& layer, const Matrix& x);
Matrix dense_forward_cached(const DenseLayer& layer, const Matrix& x, DenseCache& cache);
/// Accumulates into grads; returns d(loss)/d(input).
Matrix dense_backward(const DenseLayer& layer, const DenseCache& cache,
                      const Matrix& dout, DenseGrads& grads);

/// Standard LSTM with sigmoid gates and tanh squashing; forget-gate bias
/// initialized to 1. Gate weights act on [x_t, h_{t-1}].
struct LstmLayer {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    Matrix wf, wi, wo, wc; // (input+hidden) x hidden
    std::vector<double> bf, bi, bo, bc;

    static LstmLayer glorot(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
};

struct LstmCache {
    Matrix inputs;              // U x input
    Matrix h, c;                // U x hidden
    Matrix f, i, o, g;          // gate activations, U x hidden
    bool ready = false;
};

struct LstmGrads {
    Matrix wf, wi, wo, wc;
    std::vector<double> bf, bi, bo, bc;
};

/// Returns the full hidden sequence (U x hidden); the final state is the
/// last row. Initial hidden/cell state is zero.
Matrix lstm_forward(const LstmLayer& layer, const Matrix& seq);
Matrix lstm_forward_cached(const LstmLayer& layer, const Matrix& seq, LstmCache& cache);
/// dh_seq carries the gradient w.r.t. every hidden output row. Returns the
/// gradient w.r.t. the input sequence.
Matrix lstm_backward(const LstmLayer& layer, const LstmCache& cache,
                     const Matrix& dh_seq, LstmGrads& grads);

/// Graph propagation: Z = ReLU((X * propagation) * w). The propagation
/// matrix is fixed (from causal discovery); only w is learned.
struct GraphLayer {
    Matrix propagation; // A x A
    Matrix w;           // A x D_g

    static GraphLayer glorot(Matrix propagation, std::size_t out_dim, Rng& rng);
};

struct GraphCache {
    Matrix mixed; // X * propagation
    Matrix pre;
    bool ready = false;
};

struct GraphGrads {
    Matrix w;
};

Matrix graph_forward(const GraphLayer& layer, const Matrix& x);
Matrix graph_forward_cached(const GraphLayer& layer, const Matrix& x, GraphCache& cache);
void graph_backward(const GraphLayer& layer, const GraphCache& cache, const Matrix& dz,
                    GraphGrads& grads);

struct LossGrad {
    double loss = 0.0;
    Matrix grad;
};

/// Mean of squared differences over all entries; grad = 2 (pred - target) / n.
LossGrad mse_loss(const Matrix& pred, const Matrix& target);

/// Elementwise RMSProp over a flat parameter view:
/// acc <- rho*acc + (1-rho)*g^2; p <- p - lr * g / sqrt(acc + eps).
class RmsProp {
public:
    RmsProp(std::size_t n, double learning_rate, double rho = 0.9, double eps = 1e-8);
    void step(std::span<double* const> params, std::span<const double> grads);
    double learning_rate() const { return lr_; }

private:
    double lr_, rho_, eps_;
    std::vector<double> acc_;
};

} // namespace cdf

#endif // CDF_NN_HPP
