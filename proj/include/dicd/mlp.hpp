#pragma once

#include <vector>

#include "dicd/acyclicity.hpp"
#include "dicd/graphs.hpp"
#include "dicd/simdata.hpp"
#include "dicd/solver.hpp"

namespace dicd::mlp {

/// One node's network: weights[0] is d x m1 (row i reads input column i),
/// weights[l] is m_l x m_{l+1}, the last layer maps to a single output.
/// biases[l] belongs to hidden layer l; the output has no bias.
struct NodeMlp {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

/// d node networks sharing input dimension d. Row j of node j's first layer
/// is held at zero, so no node reads its own column.
struct MlpSem {
    int d = 0;
    std::vector<int> hidden;
    std::vector<NodeMlp> nodes;

    static MlpSem zeros(int d, const std::vector<int> &hidden);
    /// Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
    static MlpSem glorot(int d, const std::vector<int> &hidden, Rng &rng);

    Eigen::Index parameter_count() const;
    Vector flatten() const;
    void assign(const Vector &flat);
    /// Zeroes each node's self-input row.
    void mask_self_inputs();
};

/// Recorded forward pass of every node network over one observation matrix.
/// Holds a reference to `x`, which must outlive the record.
class MlpRecord {
  public:
    MlpRecord(const MlpSem &sem, const Matrix &x);

    /// (1 / 2n) |X - f(X)|_F^2 from the recorded pass.
    double loss() const { return loss_; }
    const Matrix &reconstruction() const { return output_; }
    /// Recomputes the forward pass from the stored parameters.
    double replay() const;

    /// Reverse pass; gradients have the same layout as the SEM. Self-input
    /// rows of the first layer are zeroed.
    const MlpSem &gradient();

    /// Forward-over-reverse product of the loss Hessian restricted to the
    /// first-layer weights with `direction` (one d x m1 matrix per node).
    std::vector<Matrix> first_layer_hvp(const std::vector<Matrix> &direction);

  private:
    /// Hidden activations of node j at hidden layer l (0-based).
    Eigen::Ref<const Matrix> hidden(int j, std::size_t l) const;

    struct NodeTape {
        std::vector<Matrix> deep_activations;  ///< hidden layers 2 .. L-1
        std::vector<Matrix> delta_h;           ///< dL/dH_l for l >= 1, filled by the reverse pass
    };

    const MlpSem sem_;
    const Matrix &x_;
    int m1_ = 0;
    Matrix h1_;        ///< first hidden layer of every node, n x (d * m1), node j in columns [j m1, (j+1) m1)
    Matrix delta_h1_;  ///< dL/dH_1, same layout
    std::vector<NodeTape> tapes_;
    Matrix output_;
    Matrix residual_;  ///< f(X) - X
    double loss_ = 0.0;
    bool reversed_ = false;
    MlpSem grad_;
};

Matrix forward(const MlpSem &sem, const Matrix &x);

/// [W]_ij = l2 norm of row i of node j's first layer; zero diagonal.
Matrix wtheta(const MlpSem &sem);

double loss_env_mlp(const MlpSem &sem, const Matrix &x);
MlpSem grad_loss_env_mlp(const MlpSem &sem, const Matrix &x);

/// sum_j |A1_j o dL/dA1_j|_F^2: the squared derivative of the loss with
/// respect to an elementwise first-layer rescaling B at B = 1.
double penalty_env_mlp(const MlpSem &sem, const Matrix &x);
/// Gradient of penalty_env_mlp with respect to each node's first layer.
std::vector<Matrix> grad_penalty_env_mlp(const MlpSem &sem, const Matrix &x);

struct MlpFitConfig {
    std::vector<int> hidden{10};
    double lambda1 = 0.01;
    double lambda2 = 0.01;
    double threshold = 0.3;
    std::uint64_t seed = 0;
    bool weight_by_n = false;
    solver::SolverConfig solver;

    void validate() const;
};

nlohmann::json to_json(const MlpFitConfig &cfg);
MlpFitConfig mlp_config_from_json(const nlohmann::json &j, MlpFitConfig base = {});

nlohmann::json to_json(const MlpSem &sem);
MlpSem mlp_sem_from_json(const nlohmann::json &j);

class MlpObjective : public solver::Objective {
  public:
    MlpObjective(const std::vector<Matrix> &envs, const MlpFitConfig &cfg);

    solver::Vector initial_point() const override;
    solver::Evaluation evaluate(const solver::Vector &params, double penalty_weight) const override;
    solver::Evaluation acyclicity(const solver::Vector &params) const override;
    solver::Diagnostics diagnostics(const solver::Vector &params) const override;
    void project(solver::Vector &params, double lr) const override;

    MlpSem unpack(const solver::Vector &params) const;

  private:
    const std::vector<Matrix> &envs_;
    std::vector<double> weights_;
    MlpFitConfig cfg_;
    MlpSem shape_;
};

struct MlpFit {
    MlpSem sem;
    Matrix wtheta;
    solver::FitTrace trace;
    double h_final = 0.0;
    std::vector<double> per_env_loss;
    std::vector<double> per_env_penalty;
    bool converged = false;
    double wall_time_sec = 0.0;
};

MlpFit fit_mlp(const simdata::MultiEnvDataset &ds, const MlpFitConfig &cfg);

} // namespace dicd::mlp
