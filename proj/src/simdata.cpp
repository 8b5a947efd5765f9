#include "dicd/simdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dicd::simdata {

namespace {

double signed_uniform(double low, double high, Rng &rng) {
    std::uniform_real_distribution<double> mag(low, high);
    std::bernoulli_distribution sign(0.5);
    const double v = mag(rng);
    return sign(rng) ? v : -v;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_aug(const AugmentedGraph &aug) {
    if (!graphs::is_acyclic(aug.full.adj())) throw std::invalid_argument("augmented graph is cyclic");
    if (aug.full.size() != aug.base.size() + aug.env_nodes)
        throw std::invalid_argument("augmented graph size does not match base + env nodes");
}

bool is_env_node(const AugmentedGraph &aug, int node) { return node >= aug.base.size(); }

MultiEnvDataset make_dataset_shell(const AugmentedGraph &aug, const EnvSpec &spec, Mechanism mech) {
    MultiEnvDataset ds;
    ds.meta.d = aug.base.size();
    ds.meta.truth = aug.base;
    ds.meta.spec = spec;
    ds.meta.mechanism = mech;
    ds.meta.wiring = aug.wiring;
    return ds;
}

} // namespace

std::string to_string(EnvWiring w) { return w == EnvWiring::OneToOne ? "one_to_one" : "complete"; }
std::string to_string(Mechanism m) { return m == Mechanism::Linear ? "linear" : "mlp"; }

EnvWiring parse_env_wiring(const std::string &s) {
    if (s == "one_to_one") return EnvWiring::OneToOne;
    if (s == "complete") return EnvWiring::Complete;
    throw std::invalid_argument("unknown env wiring '" + s + "'");
}

Mechanism parse_mechanism(const std::string &s) {
    if (s == "linear") return Mechanism::Linear;
    if (s == "mlp") return Mechanism::Mlp;
    throw std::invalid_argument("unknown mechanism '" + s + "'");
}

AugmentedGraph attach_env_nodes(const BinaryDag &base, double fraction, Rng &rng, EnvWiring wiring) {
    const int d = base.size();
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("attach_env_nodes: fraction must lie in (0, 1]");
    const int m = static_cast<int>(std::floor(fraction * d));
    if (m < 1) throw std::invalid_argument("attach_env_nodes: floor(fraction * d) is 0");

    std::vector<int> nodes(d);
    std::iota(nodes.begin(), nodes.end(), 0);
    std::shuffle(nodes.begin(), nodes.end(), rng);
    nodes.resize(m);

    AugmentedGraph aug;
    aug.base = base;
    aug.env_nodes = m;
    aug.wiring = wiring;
    graphs::Adjacency full = graphs::Adjacency::Zero(d + m, d + m);
    full.topLeftCorner(d, d) = base.adj();
    for (int k = 0; k < m; ++k) {
        if (wiring == EnvWiring::OneToOne) {
            aug.env_edges.emplace_back(d + k, nodes[k]);
        } else {
            for (int target : nodes) aug.env_edges.emplace_back(d + k, target);
        }
    }
    for (auto [env, target] : aug.env_edges) full(env, target) = 1;
    aug.full = BinaryDag(std::move(full));
    return aug;
}

void EnvSpec::validate() const {
    if (env_count < 1) throw std::invalid_argument("EnvSpec: env_count must be positive");
    if (static_cast<int>(noise_scales.size()) != env_count)
        throw std::invalid_argument("EnvSpec: " + std::to_string(noise_scales.size()) +
                                    " noise scales for " + std::to_string(env_count) + " environments");
    if (static_cast<int>(n_per_env.size()) != env_count)
        throw std::invalid_argument("EnvSpec: sample counts do not match env_count");
    for (double s : noise_scales)
        if (!(s > 0.0)) throw std::invalid_argument("EnvSpec: noise scales must be positive");
    for (int n : n_per_env)
        if (n < 1) throw std::invalid_argument("EnvSpec: sample counts must be positive");
    if (!(base_noise_scale > 0.0)) throw std::invalid_argument("EnvSpec: base noise scale must be positive");
}

MultiEnvDataset simulate_linear(const AugmentedGraph &aug, double weight_low, double weight_high,
                                const EnvSpec &spec, Rng &rng) {
    if (!(weight_low > 0.0 && weight_low < weight_high))
        throw std::invalid_argument("simulate_linear: need 0 < weight_low < weight_high");
    check_aug(aug);
    spec.validate();
    const int total = aug.full.size();
    const int d = aug.base.size();

    Matrix w = Matrix::Zero(total, total);
    for (int i = 0; i < total; ++i)
        for (int j = 0; j < total; ++j)
            if (aug.full.has_edge(i, j)) w(i, j) = signed_uniform(weight_low, weight_high, rng);

    MultiEnvDataset ds = make_dataset_shell(aug, spec, Mechanism::Linear);
    ds.full_weights = w;
    ds.meta.true_weights = w.topLeftCorner(d, d);

    const auto order = aug.full.topological_order();
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int e = 0; e < spec.env_count; ++e) {
        const int n = spec.n_per_env[e];
        Matrix x = Matrix::Zero(n, total);
        for (int j : order) {
            const double scale = is_env_node(aug, j) ? spec.noise_scales[e] : spec.base_noise_scale;
            Vector col = x * w.col(j);
            for (int r = 0; r < n; ++r) col(r) += scale * normal(rng);
            x.col(j) = col;
        }
        ds.envs.push_back(x.leftCols(d));
    }
    return ds;
}

MultiEnvDataset simulate_mlp(const AugmentedGraph &aug, int hidden, const EnvSpec &spec, Rng &rng) {
    if (hidden < 1) throw std::invalid_argument("simulate_mlp: hidden width must be positive");
    check_aug(aug);
    spec.validate();
    const int total = aug.full.size();
    const int d = aug.base.size();

    MultiEnvDataset ds = make_dataset_shell(aug, spec, Mechanism::Mlp);
    ds.mechanisms.resize(total);
    for (int j = 0; j < total; ++j) {
        auto &mech = ds.mechanisms[j];
        mech.parents = aug.full.parents(j);
        if (mech.parents.empty()) continue;
        const auto p = static_cast<Eigen::Index>(mech.parents.size());
        mech.w1.resize(p, hidden);
        mech.w2.resize(hidden);
        for (Eigen::Index r = 0; r < p; ++r)
            for (int c = 0; c < hidden; ++c) mech.w1(r, c) = signed_uniform(0.5, 2.0, rng);
        for (int c = 0; c < hidden; ++c) mech.w2(c) = signed_uniform(0.5, 2.0, rng);
    }

    const auto order = aug.full.topological_order();
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int e = 0; e < spec.env_count; ++e) {
        const int n = spec.n_per_env[e];
        Matrix x = Matrix::Zero(n, total);
        for (int j : order) {
            const auto &mech = ds.mechanisms[j];
            Vector col = Vector::Zero(n);
            if (!mech.parents.empty()) {
                Matrix inputs(n, static_cast<Eigen::Index>(mech.parents.size()));
                for (std::size_t c = 0; c < mech.parents.size(); ++c) inputs.col(c) = x.col(mech.parents[c]);
                const Matrix hid = (inputs * mech.w1).unaryExpr([](double z) { return sigmoid(z); });
                col = hid * mech.w2;
            }
            const double scale = is_env_node(aug, j) ? spec.noise_scales[e] : spec.base_noise_scale;
            for (int r = 0; r < n; ++r) col(r) += scale * normal(rng);
            x.col(j) = col;
        }
        ds.envs.push_back(x.leftCols(d));
    }
    return ds;
}

} // namespace dicd::simdata
