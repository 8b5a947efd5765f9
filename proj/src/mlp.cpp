#include "dicd/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace dicd::mlp {

namespace {

Matrix sigmoid(const Matrix &z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

// sigma'(z) expressed through h = sigma(z).
template <typename M>
Matrix sigmoid_slope(const M &h) {
    return (h.array() * (1.0 - h.array())).matrix();
}

void check_input(const MlpSem &sem, const Matrix &x) {
    if (x.cols() != sem.d)
        throw std::invalid_argument("mlp: data has " + std::to_string(x.cols()) + " columns, model expects " +
                                    std::to_string(sem.d));
    if (x.rows() == 0) throw std::invalid_argument("mlp: environment has no samples");
}

// Runs node j's network, writing hidden activations into `acts` when given.
Vector node_forward(const NodeMlp &net, const Matrix &x, std::vector<Matrix> *acts) {
    const auto layers = net.weights.size();
    Matrix h = x;
    for (std::size_t l = 0; l + 1 < layers; ++l) {
        Matrix z = h * net.weights[l];
        z.rowwise() += net.biases[l].transpose();
        h = sigmoid(z);
        if (acts) acts->push_back(h);
    }
    return h * net.weights.back();
}

} // namespace

MlpSem MlpSem::zeros(int d, const std::vector<int> &hidden) {
    if (d < 1) throw std::invalid_argument("MlpSem: need at least one node");
    if (hidden.empty()) throw std::invalid_argument("MlpSem: need at least one hidden layer");
    for (int m : hidden)
        if (m < 1) throw std::invalid_argument("MlpSem: hidden widths must be positive");
    MlpSem sem;
    sem.d = d;
    sem.hidden = hidden;
    sem.nodes.resize(d);
    for (auto &net : sem.nodes) {
        int fan_in = d;
        for (int m : hidden) {
            net.weights.push_back(Matrix::Zero(fan_in, m));
            net.biases.push_back(Vector::Zero(m));
            fan_in = m;
        }
        net.weights.push_back(Matrix::Zero(fan_in, 1));
    }
    return sem;
}

MlpSem MlpSem::glorot(int d, const std::vector<int> &hidden, Rng &rng) {
    MlpSem sem = zeros(d, hidden);
    for (auto &net : sem.nodes) {
        for (auto &w : net.weights) {
            const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = dist(rng);
        }
    }
    sem.mask_self_inputs();
    return sem;
}

Eigen::Index MlpSem::parameter_count() const {
    Eigen::Index n = 0;
    for (const auto &net : nodes) {
        for (const auto &w : net.weights) n += w.size();
        for (const auto &b : net.biases) n += b.size();
    }
    return n;
}

Vector MlpSem::flatten() const {
    Vector flat(parameter_count());
    Eigen::Index at = 0;
    for (const auto &net : nodes) {
        for (const auto &w : net.weights) {
            flat.segment(at, w.size()) = Eigen::Map<const Vector>(w.data(), w.size());
            at += w.size();
        }
        for (const auto &b : net.biases) {
            flat.segment(at, b.size()) = b;
            at += b.size();
        }
    }
    return flat;
}

void MlpSem::assign(const Vector &flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("MlpSem::assign: size mismatch");
    Eigen::Index at = 0;
    for (auto &net : nodes) {
        for (auto &w : net.weights) {
            Eigen::Map<Vector>(w.data(), w.size()) = flat.segment(at, w.size());
            at += w.size();
        }
        for (auto &b : net.biases) {
            b = flat.segment(at, b.size());
            at += b.size();
        }
    }
}

void MlpSem::mask_self_inputs() {
    for (int j = 0; j < d; ++j) nodes[j].weights.front().row(j).setZero();
}

MlpRecord::MlpRecord(const MlpSem &sem, const Matrix &x) : sem_(sem), x_(x) {
    check_input(sem, x);
    const int d = sem.d;
    const auto n = x.rows();
    m1_ = sem.hidden.front();

    // First layers of all nodes share the input X, so they run as one product.
    Matrix w1(d, d * m1_);
    Vector b1(d * m1_);
    for (int j = 0; j < d; ++j) {
        w1.middleCols(j * m1_, m1_) = sem.nodes[j].weights.front();
        b1.segment(j * m1_, m1_) = sem.nodes[j].biases.front();
    }
    Matrix z1 = x * w1;
    z1.rowwise() += b1.transpose();
    h1_ = sigmoid(z1);

    tapes_.resize(d);
    output_.resize(n, d);
    for (int j = 0; j < d; ++j) {
        const auto &net = sem.nodes[j];
        const auto layers = net.weights.size();
        auto &tape = tapes_[j];
        for (std::size_t l = 1; l + 1 < layers; ++l) {
            Matrix z = hidden(j, l - 1) * net.weights[l];
            z.rowwise() += net.biases[l].transpose();
            tape.deep_activations.push_back(sigmoid(z));
        }
        output_.col(j) = hidden(j, layers - 2) * net.weights.back();
    }
    residual_ = output_ - x;
    loss_ = 0.5 * residual_.squaredNorm() / static_cast<double>(n);
}

Eigen::Ref<const Matrix> MlpRecord::hidden(int j, std::size_t l) const {
    if (l == 0) return h1_.middleCols(j * m1_, m1_);
    return tapes_[j].deep_activations[l - 1];
}

double MlpRecord::replay() const {
    double sq = 0.0;
    for (int j = 0; j < sem_.d; ++j) sq += (node_forward(sem_.nodes[j], x_, nullptr) - x_.col(j)).squaredNorm();
    return 0.5 * sq / static_cast<double>(x_.rows());
}

const MlpSem &MlpRecord::gradient() {
    if (reversed_) return grad_;
    const int d = sem_.d;
    grad_ = MlpSem::zeros(d, sem_.hidden);
    const auto n = static_cast<double>(x_.rows());
    delta_h1_.resize(x_.rows(), d * m1_);
    Matrix delta_z1(x_.rows(), d * m1_);
    for (int j = 0; j < d; ++j) {
        const auto &net = sem_.nodes[j];
        auto &g = grad_.nodes[j];
        auto &tape = tapes_[j];
        const auto layers = net.weights.size();
        tape.delta_h.assign(layers - 1, Matrix());

        const Vector delta_out = residual_.col(j) / n;
        g.weights.back() = hidden(j, layers - 2).transpose() * delta_out;
        Matrix delta_h = delta_out * net.weights.back().transpose();
        for (std::size_t l = layers - 1; l-- > 0;) {
            const auto h = hidden(j, l);
            Matrix delta_z = delta_h.cwiseProduct(sigmoid_slope(h));
            g.biases[l] = delta_z.colwise().sum().transpose();
            if (l == 0) {
                delta_h1_.middleCols(j * m1_, m1_) = delta_h;
                delta_z1.middleCols(j * m1_, m1_) = delta_z;
            } else {
                tape.delta_h[l] = delta_h;
                g.weights[l] = hidden(j, l - 1).transpose() * delta_z;
                delta_h = delta_z * net.weights[l].transpose();
            }
        }
    }
    const Matrix g1 = x_.transpose() * delta_z1;
    for (int j = 0; j < d; ++j) grad_.nodes[j].weights.front() = g1.middleCols(j * m1_, m1_);
    grad_.mask_self_inputs();
    reversed_ = true;
    return grad_;
}

std::vector<Matrix> MlpRecord::first_layer_hvp(const std::vector<Matrix> &direction) {
    const int d = sem_.d;
    if (static_cast<int>(direction.size()) != d) throw std::invalid_argument("first_layer_hvp: need d directions");
    gradient();
    const auto n = static_cast<double>(x_.rows());

    // Tangent forward pass; only the first layer moves.
    Matrix dir(d, d * m1_);
    for (int j = 0; j < d; ++j) {
        if (direction[j].rows() != d || direction[j].cols() != m1_)
            throw std::invalid_argument("first_layer_hvp: direction shape mismatch");
        dir.middleCols(j * m1_, m1_) = direction[j];
    }
    const Matrix h1_dot = (x_ * dir).cwiseProduct(sigmoid_slope(h1_));
    Matrix delta_z1_dot(x_.rows(), d * m1_);

    for (int j = 0; j < d; ++j) {
        const auto &net = sem_.nodes[j];
        const auto &tape = tapes_[j];
        const auto layers = net.weights.size();
        std::vector<Matrix> h_dot(layers - 1);
        h_dot[0] = h1_dot.middleCols(j * m1_, m1_);
        for (std::size_t l = 1; l + 1 < layers; ++l)
            h_dot[l] = (h_dot[l - 1] * net.weights[l]).cwiseProduct(sigmoid_slope(hidden(j, l)));
        const Vector out_dot = h_dot[layers - 2] * net.weights.back();

        // Tangent of the reverse pass.
        Matrix delta_h_dot = (out_dot / n) * net.weights.back().transpose();
        for (std::size_t l = layers - 1; l-- > 0;) {
            const auto h = hidden(j, l);
            const Matrix slope_dot = h_dot[l].cwiseProduct((1.0 - 2.0 * h.array()).matrix());
            const Matrix delta_h = l == 0 ? Matrix(delta_h1_.middleCols(j * m1_, m1_)) : tape.delta_h[l];
            const Matrix delta_z_dot = delta_h_dot.cwiseProduct(sigmoid_slope(h)) + delta_h.cwiseProduct(slope_dot);
            if (l == 0)
                delta_z1_dot.middleCols(j * m1_, m1_) = delta_z_dot;
            else
                delta_h_dot = delta_z_dot * net.weights[l].transpose();
        }
    }
    const Matrix prod = x_.transpose() * delta_z1_dot;
    std::vector<Matrix> out(d);
    for (int j = 0; j < d; ++j) {
        out[j] = prod.middleCols(j * m1_, m1_);
        out[j].row(j).setZero();
    }
    return out;
}

Matrix forward(const MlpSem &sem, const Matrix &x) {
    check_input(sem, x);
    Matrix out(x.rows(), sem.d);
    for (int j = 0; j < sem.d; ++j) out.col(j) = node_forward(sem.nodes[j], x, nullptr);
    return out;
}

Matrix wtheta(const MlpSem &sem) {
    Matrix w(sem.d, sem.d);
    for (int j = 0; j < sem.d; ++j) w.col(j) = sem.nodes[j].weights.front().rowwise().norm();
    w.diagonal().setZero();
    return w;
}

double loss_env_mlp(const MlpSem &sem, const Matrix &x) { return MlpRecord(sem, x).loss(); }

MlpSem grad_loss_env_mlp(const MlpSem &sem, const Matrix &x) {
    MlpRecord rec(sem, x);
    return rec.gradient();
}

double penalty_env_mlp(const MlpSem &sem, const Matrix &x) {
    MlpRecord rec(sem, x);
    const auto &g = rec.gradient();
    double total = 0.0;
    for (int j = 0; j < sem.d; ++j)
        total += sem.nodes[j].weights.front().cwiseProduct(g.nodes[j].weights.front()).squaredNorm();
    return total;
}

std::vector<Matrix> grad_penalty_env_mlp(const MlpSem &sem, const Matrix &x) {
    // P = sum (a g)^2 over first-layer entries; dP/da = 2 a g^2 + 2 H (a^2 g).
    MlpRecord rec(sem, x);
    const MlpSem g = rec.gradient();
    std::vector<Matrix> direction(sem.d);
    for (int j = 0; j < sem.d; ++j) {
        const Matrix &a = sem.nodes[j].weights.front();
        direction[j] = a.cwiseProduct(a).cwiseProduct(g.nodes[j].weights.front());
    }
    auto hv = rec.first_layer_hvp(direction);
    for (int j = 0; j < sem.d; ++j) {
        const Matrix &a = sem.nodes[j].weights.front();
        const Matrix &gj = g.nodes[j].weights.front();
        hv[j] = 2.0 * a.cwiseProduct(gj).cwiseProduct(gj) + 2.0 * hv[j];
        hv[j].row(j).setZero();
    }
    return hv;
}

} // namespace dicd::mlp
