#pragma once

// Controller catalog and evaluator: symbolic expression trees (the built-in
// catalog) and small dense neural networks (loaded from JSON weight files),
// both evaluable over any scalar kind.

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "orbitcert/dynamics.hpp"
#include "orbitcert/interval.hpp"
#include "orbitcert/jet.hpp"

namespace orbitcert {

struct UnknownController : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ControllerVariant { ExpressionTree, DenseNN };
enum class Activation { Tanh, Relu, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct ExprNode {
    enum class Kind { Const, Obs, Add, Sub, Mul, Div, Neg };
    Kind kind = Kind::Const;
    double value = 0.0;  // Const
    int obs_index = -1;  // Obs
    int lhs = -1;        // binary/unary child
    int rhs = -1;        // binary child
};

struct NnLayer {
    Eigen::MatrixXd weights;  // rows = outputs, cols = inputs
    Eigen::VectorXd bias;
    Activation activation = Activation::Tanh;
};

namespace detail {

template <class S>
S checked_div(const S& a, const S& b) {
    if constexpr (std::is_same_v<S, double>) {
        if (b == 0.0) throw DivisionByZeroInterval("expression division by exact zero");
    }
    return a / b;
}

template <class S>
S apply_activation(Activation act, const S& x) {
    switch (act) {
        case Activation::Tanh: return tanh(x);
        case Activation::Relu: return relu_guarded(x);
        case Activation::Identity: return x;
    }
    throw std::logic_error("unreachable activation");
}

}  // namespace detail

/// Canonical observation feature names for a system, matching the layout
/// produced by compute_observation().
const std::vector<std::string>& canonical_feature_names(SystemKind system);

struct ControllerSpec {
    ControllerVariant variant = ControllerVariant::ExpressionTree;
    std::string name;

    // Expression tree (children always precede parents in `nodes`).
    std::vector<ExprNode> nodes;
    int root = -1;
    std::string formula;

    // Dense NN.
    std::vector<NnLayer> layers;
    Activation output_activation = Activation::Identity;
    double action_scale = 1.0;
    std::vector<std::string> obs_map;  // feature names fed to the first layer

    /// Raw (pre-clip) action from the canonical observation vector.
    template <class S>
    S eval(const std::vector<S>& obs) const {
        if (variant == ControllerVariant::ExpressionTree) return eval_tree(obs);
        return eval_nn(obs);
    }

    /// Rollout-friendly functor over any scalar kind. Owns a copy of the
    /// spec, so it stays valid after the original goes out of scope.
    auto as_fn() const {
        return [spec = *this](const auto& obs) { return spec.eval(obs); };
    }

    /// Indices (into `nodes`) of all constant leaves, in order; these are the
    /// tunable parameters of an expression-tree controller.
    std::vector<int> constant_indices() const;

    bool operator==(const ControllerSpec& other) const;

  private:
    template <class S>
    S eval_tree(const std::vector<S>& obs) const {
        std::vector<S> vals(nodes.size(), scalar_like(obs[0], 0.0));
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const ExprNode& n = nodes[i];
            switch (n.kind) {
                case ExprNode::Kind::Const: vals[i] = scalar_like(obs[0], n.value); break;
                case ExprNode::Kind::Obs:
                    if (n.obs_index < 0 || n.obs_index >= static_cast<int>(obs.size()))
                        throw DimMismatch("expression references observation x" +
                                          std::to_string(n.obs_index) + " but only " +
                                          std::to_string(obs.size()) + " features exist");
                    vals[i] = obs[static_cast<std::size_t>(n.obs_index)];
                    break;
                case ExprNode::Kind::Add: vals[i] = vals[n.lhs] + vals[n.rhs]; break;
                case ExprNode::Kind::Sub: vals[i] = vals[n.lhs] - vals[n.rhs]; break;
                case ExprNode::Kind::Mul: vals[i] = vals[n.lhs] * vals[n.rhs]; break;
                case ExprNode::Kind::Div: vals[i] = detail::checked_div(vals[n.lhs], vals[n.rhs]); break;
                case ExprNode::Kind::Neg: vals[i] = -vals[n.lhs]; break;
            }
        }
        return vals[static_cast<std::size_t>(root)];
    }

    template <class S>
    S eval_nn(const std::vector<S>& obs) const {
        // Map declared feature names onto the canonical observation layout.
        const std::vector<std::string>& names = obs.size() == 3
                                                    ? canonical_feature_names(SystemKind::Pendulum)
                                                    : canonical_feature_names(SystemKind::CartpoleSwingup);
        std::vector<S> current;
        current.reserve(obs_map.size());
        for (const std::string& feature : obs_map) {
            bool found = false;
            for (std::size_t i = 0; i < names.size(); ++i) {
                if (names[i] == feature) {
                    current.push_back(obs[i]);
                    found = true;
                    break;
                }
            }
            if (!found)
                throw DimMismatch("observation feature '" + feature + "' not available for this system");
        }
        for (const NnLayer& layer : layers) {
            if (static_cast<Eigen::Index>(current.size()) != layer.weights.cols())
                throw DimMismatch("layer input size mismatch");
            std::vector<S> next;
            next.reserve(static_cast<std::size_t>(layer.weights.rows()));
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
                S acc = scalar_like(obs[0], layer.bias(r));
                for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                    acc = acc + layer.weights(r, c) * current[static_cast<std::size_t>(c)];
                next.push_back(detail::apply_activation(layer.activation, acc));
            }
            current = std::move(next);
        }
        if (current.size() != 1) throw DimMismatch("network output is not scalar");
        S out = detail::apply_activation(output_activation, current[0]);
        return out * action_scale;
    }
};

/// Parses an arithmetic formula over +, -, *, /, unary minus, parentheses,
/// decimal constants and observation features x0..x9.
ControllerSpec parse_formula(const std::string& formula, const std::string& name = "");

/// Built-in catalog lookup; throws UnknownController for unknown names.
ControllerSpec builtin(const std::string& name);

/// Names of every built-in controller, in catalog order.
std::vector<std::string> builtin_names();

/// Loads a controller (either variant) from a JSON file.
ControllerSpec load_controller(const std::string& path);

/// Serializes a controller to JSON text; load/save round-trips bit-exactly.
std::string controller_to_json(const ControllerSpec& spec);
ControllerSpec controller_from_json(const std::string& text);
void save_controller(const ControllerSpec& spec, const std::string& path);

/// Returns a copy of an expression-tree spec with its constant leaves
/// replaced by the given values (same order as constant_indices()).
ControllerSpec with_constants(const ControllerSpec& spec, const std::vector<double>& constants);

}  // namespace orbitcert
