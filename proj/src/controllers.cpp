#include "orbitcert/controllers.hpp"

#include <array>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <utility>

#include "orbitcert/json_util.hpp"

namespace orbitcert {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Identity: return "identity";
    }
    throw std::logic_error("unreachable activation");
}

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "identity" || s == "linear") return Activation::Identity;
    throw ParseError("unknown activation: " + s);
}

const std::vector<std::string>& canonical_feature_names(SystemKind system) {
    static const std::vector<std::string> pendulum = {"cos_theta", "sin_theta", "theta_dot"};
    static const std::vector<std::string> cartpole = {"x", "x_dot", "cos_theta", "sin_theta",
                                                      "theta_dot"};
    return system == SystemKind::Pendulum ? pendulum : cartpole;
}

std::vector<int> ControllerSpec::constant_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].kind == ExprNode::Kind::Const) out.push_back(static_cast<int>(i));
    return out;
}

bool ControllerSpec::operator==(const ControllerSpec& other) const {
    if (variant != other.variant || name != other.name) return false;
    if (variant == ControllerVariant::ExpressionTree) {
        if (root != other.root || nodes.size() != other.nodes.size()) return false;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const ExprNode& a = nodes[i];
            const ExprNode& b = other.nodes[i];
            if (a.kind != b.kind || a.obs_index != b.obs_index || a.lhs != b.lhs ||
                a.rhs != b.rhs)
                return false;
            // Bit-exact constant comparison (0.0 vs -0.0 count as different).
            if (a.kind == ExprNode::Kind::Const) {
                double av = a.value, bv = b.value;
                if (std::memcmp(&av, &bv, sizeof(double)) != 0) return false;
            }
        }
        return true;
    }
    if (layers.size() != other.layers.size() || obs_map != other.obs_map ||
        output_activation != other.output_activation)
        return false;
    if (std::memcmp(&action_scale, &other.action_scale, sizeof(double)) != 0) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const NnLayer& a = layers[i];
        const NnLayer& b = other.layers[i];
        if (a.activation != b.activation || a.weights.rows() != b.weights.rows() ||
            a.weights.cols() != b.weights.cols() || a.bias.size() != b.bias.size())
            return false;
        if (std::memcmp(a.weights.data(), b.weights.data(),
                        sizeof(double) * static_cast<std::size_t>(a.weights.size())) != 0)
            return false;
        if (std::memcmp(a.bias.data(), b.bias.data(),
                        sizeof(double) * static_cast<std::size_t>(a.bias.size())) != 0)
            return false;
    }
    return true;
}

namespace {

struct Token {
    enum class Type { Number, Obs, Plus, Minus, Star, Slash, LParen, RParen, End };
    Type type;
    double number = 0.0;
    int obs_index = -1;
    std::size_t pos = 0;
};

class Lexer {
  public:
    explicit Lexer(const std::string& text) : text_(text) { advance(); }

    const Token& peek() const { return current_; }

    Token take() {
        Token t = current_;
        advance();
        return t;
    }

  private:
    void advance() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        current_.pos = pos_;
        if (pos_ >= text_.size()) {
            current_.type = Token::Type::End;
            return;
        }
        char c = text_[pos_];
        switch (c) {
            case '+': current_.type = Token::Type::Plus; ++pos_; return;
            case '-': current_.type = Token::Type::Minus; ++pos_; return;
            case '*': current_.type = Token::Type::Star; ++pos_; return;
            case '/': current_.type = Token::Type::Slash; ++pos_; return;
            case '(': current_.type = Token::Type::LParen; ++pos_; return;
            case ')': current_.type = Token::Type::RParen; ++pos_; return;
            default: break;
        }
        if (c == 'x') {
            std::size_t j = pos_ + 1;
            if (j >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[j])))
                throw ParseError("expected digit after 'x' at position " + std::to_string(pos_));
            int idx = 0;
            while (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j]))) {
                idx = idx * 10 + (text_[j] - '0');
                ++j;
            }
            current_.type = Token::Type::Obs;
            current_.obs_index = idx;
            pos_ = j;
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* start = text_.c_str() + pos_;
            char* end = nullptr;
            double value = std::strtod(start, &end);
            if (end == start)
                throw ParseError("malformed number at position " + std::to_string(pos_));
            current_.type = Token::Type::Number;
            current_.number = value;
            pos_ += static_cast<std::size_t>(end - start);
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "' at position " +
                         std::to_string(pos_));
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    Token current_;
};

// Builds nodes bottom-up so children always precede parents.
class Parser {
  public:
    explicit Parser(const std::string& text) : lexer_(text) {}

    ControllerSpec run(const std::string& formula, const std::string& name) {
        int root = parse_expr();
        if (lexer_.peek().type != Token::Type::End)
            throw ParseError("trailing input at position " + std::to_string(lexer_.peek().pos));
        ControllerSpec spec;
        spec.variant = ControllerVariant::ExpressionTree;
        spec.name = name;
        spec.nodes = std::move(nodes_);
        spec.root = root;
        spec.formula = formula;
        return spec;
    }

  private:
    int add(ExprNode node) {
        nodes_.push_back(node);
        return static_cast<int>(nodes_.size()) - 1;
    }

    int parse_expr() {
        int lhs = parse_term();
        for (;;) {
            Token::Type t = lexer_.peek().type;
            if (t == Token::Type::Plus || t == Token::Type::Minus) {
                lexer_.take();
                int rhs = parse_term();
                ExprNode n;
                n.kind = t == Token::Type::Plus ? ExprNode::Kind::Add : ExprNode::Kind::Sub;
                n.lhs = lhs;
                n.rhs = rhs;
                lhs = add(n);
            } else {
                return lhs;
            }
        }
    }

    int parse_term() {
        int lhs = parse_factor();
        for (;;) {
            Token::Type t = lexer_.peek().type;
            if (t == Token::Type::Star || t == Token::Type::Slash) {
                lexer_.take();
                int rhs = parse_factor();
                ExprNode n;
                n.kind = t == Token::Type::Star ? ExprNode::Kind::Mul : ExprNode::Kind::Div;
                n.lhs = lhs;
                n.rhs = rhs;
                lhs = add(n);
            } else {
                return lhs;
            }
        }
    }

    int parse_factor() {
        Token t = lexer_.take();
        switch (t.type) {
            case Token::Type::Minus: {
                ExprNode n;
                n.kind = ExprNode::Kind::Neg;
                n.lhs = parse_factor();
                return add(n);
            }
            case Token::Type::LParen: {
                int inner = parse_expr();
                Token close = lexer_.take();
                if (close.type != Token::Type::RParen)
                    throw ParseError("expected ')' at position " + std::to_string(close.pos));
                return inner;
            }
            case Token::Type::Number: {
                ExprNode n;
                n.kind = ExprNode::Kind::Const;
                n.value = t.number;
                return add(n);
            }
            case Token::Type::Obs: {
                ExprNode n;
                n.kind = ExprNode::Kind::Obs;
                n.obs_index = t.obs_index;
                return add(n);
            }
            default:
                throw ParseError("unexpected token at position " + std::to_string(t.pos));
        }
    }

    Lexer lexer_;
    std::vector<ExprNode> nodes_;
};

struct CatalogEntry {
    const char* name;
    const char* formula;
};

// Pendulum controllers use x0 = cos(theta), x1 = sin(theta), x2 = theta_dot.
// Cartpole controllers use x0..x4 = (x, x_dot, cos(theta), sin(theta), theta_dot).
constexpr std::array<CatalogEntry, 14> kCatalog = {{
    {"landajuela_a1", "-7.08*x1 - (13.39*x1 + 3.12*x2)/x0 + 0.27"},
    {"7A_AG", "-((1.074*(x2*x0) + 3.064*x1)/0.482)"},
    {"9A_AG", "-((((1.303*x2 + 4.180*x1)*x0) + 0.364*x1)/0.519)"},
    {"13A_AG", "(((x2*1.168 + x1*4.4618)*x0)/((x2*(-x2*0.014)) - 0.207))"},
    {"17A_AG", "(((0.567*x2 + 2.032*x1)*x0*1.381)/((x2*((x2*(x0*x0))*(-0.034))) - 0.112))"},
    {"19A_AG",
     "(((1.627*x2 + (x1/0.161))*x0)/((((x1/0.168) + 0.993*x2)*(-x2*0.085)) - 0.754))"},
    {"7A_CMA", "-((2.865*(x2*x0) + 6.973*x1)/1.048)"},
    {"9A_CMA", "((((-105.902*x2 - 424.711*x1)*x0) + 12.033*x1)/50.577)"},
    {"13A_CMA", "(((x2*31.252 + x1*122.785)*x0)/((x2*(-x2*1.426)) - 11.029))"},
    {"17A_CMA",
     "(((4.813*x2 + 11.061*x1)*x0*20.311)/((x2*(-(x2*(x0*x0))*9.437)) - 15.478))"},
    {"19A_CMA",
     "(((7.943*x2 + (x1/0.070))*x0)/((((x1/1.567) - 0.335*x2)*(x2*0.540)) - 0.639))"},
    {"cartpole_k17",
     "((x3*92.07) + 35.31*x4)/(((x4*((x3*14.61) + 2.56*x4))*(-3.52)) - 12.62)"},
    {"cartpole_k19",
     "((x3*5.04) + 1.42*x4)/((((-1.83*x4 + 1.35*x3)*((x3*3.35) + 0.50*x4))*0.33) - 1.15)"},
    {"cartpole_k21",
     "((x3*6.76) + 3.62*x4)/(((((x3*3.25) + 0.66*x4)*((x3*9.13) + 1.20*x4))*(-0.75)) + (-0.14))"},
}};

Json expr_to_json(const ControllerSpec& spec) {
    Json nodes = Json::array();
    for (const ExprNode& n : spec.nodes) {
        Json jn;
        switch (n.kind) {
            case ExprNode::Kind::Const:
                jn["kind"] = "const";
                jn["value"] = double_to_decimal(n.value);
                break;
            case ExprNode::Kind::Obs:
                jn["kind"] = "obs";
                jn["index"] = n.obs_index;
                break;
            case ExprNode::Kind::Add: jn["kind"] = "add"; break;
            case ExprNode::Kind::Sub: jn["kind"] = "sub"; break;
            case ExprNode::Kind::Mul: jn["kind"] = "mul"; break;
            case ExprNode::Kind::Div: jn["kind"] = "div"; break;
            case ExprNode::Kind::Neg: jn["kind"] = "neg"; break;
        }
        if (n.lhs >= 0) jn["lhs"] = n.lhs;
        if (n.rhs >= 0) jn["rhs"] = n.rhs;
        nodes.push_back(jn);
    }
    Json j;
    j["variant"] = "expression_tree";
    j["name"] = spec.name;
    j["formula"] = spec.formula;
    j["nodes"] = nodes;
    j["root"] = spec.root;
    return j;
}

ControllerSpec expr_from_json(const Json& j) {
    ControllerSpec spec;
    spec.variant = ControllerVariant::ExpressionTree;
    spec.name = j.value("name", "");
    spec.formula = j.value("formula", "");
    spec.root = j.at("root").get<int>();
    for (const Json& jn : j.at("nodes")) {
        ExprNode n;
        std::string kind = jn.at("kind").get<std::string>();
        if (kind == "const") {
            n.kind = ExprNode::Kind::Const;
            n.value = decimal_to_double(jn.at("value").get<std::string>());
        } else if (kind == "obs") {
            n.kind = ExprNode::Kind::Obs;
            n.obs_index = jn.at("index").get<int>();
        } else if (kind == "add") {
            n.kind = ExprNode::Kind::Add;
        } else if (kind == "sub") {
            n.kind = ExprNode::Kind::Sub;
        } else if (kind == "mul") {
            n.kind = ExprNode::Kind::Mul;
        } else if (kind == "div") {
            n.kind = ExprNode::Kind::Div;
        } else if (kind == "neg") {
            n.kind = ExprNode::Kind::Neg;
        } else {
            throw ParseError("unknown expression node kind: " + kind);
        }
        n.lhs = jn.value("lhs", -1);
        n.rhs = jn.value("rhs", -1);
        spec.nodes.push_back(n);
    }
    if (spec.root < 0 || spec.root >= static_cast<int>(spec.nodes.size()))
        throw ParseError("expression root index out of range");
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        const ExprNode& n = spec.nodes[i];
        bool needs_lhs = n.kind != ExprNode::Kind::Const && n.kind != ExprNode::Kind::Obs;
        bool needs_rhs = needs_lhs && n.kind != ExprNode::Kind::Neg;
        if (needs_lhs && (n.lhs < 0 || n.lhs >= static_cast<int>(i)))
            throw ParseError("expression node child index out of order");
        if (needs_rhs && (n.rhs < 0 || n.rhs >= static_cast<int>(i)))
            throw ParseError("expression node child index out of order");
    }
    return spec;
}

Json nn_to_json(const ControllerSpec& spec) {
    Json layers = Json::array();
    for (const NnLayer& layer : spec.layers) {
        Json rows = Json::array();
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            Json row = Json::array();
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                row.push_back(double_to_decimal(layer.weights(r, c)));
            rows.push_back(row);
        }
        Json bias = Json::array();
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
            bias.push_back(double_to_decimal(layer.bias(r)));
        layers.push_back(Json{{"weights", rows}, {"bias", bias},
                              {"activation", to_string(layer.activation)}});
    }
    Json j;
    j["variant"] = "dense_nn";
    j["name"] = spec.name;
    j["obs_map"] = spec.obs_map;
    j["layers"] = layers;
    j["output_activation"] = to_string(spec.output_activation);
    j["action_scale"] = double_to_decimal(spec.action_scale);
    return j;
}

ControllerSpec nn_from_json(const Json& j) {
    ControllerSpec spec;
    spec.variant = ControllerVariant::DenseNN;
    spec.name = j.value("name", "");
    spec.obs_map = j.at("obs_map").get<std::vector<std::string>>();
    if (spec.obs_map.empty()) throw ParseError("obs_map must not be empty");
    spec.output_activation = activation_from_string(j.value("output_activation", "identity"));
    spec.action_scale =
        j.contains("action_scale") ? decimal_to_double(j.at("action_scale").get<std::string>()) : 1.0;
    std::size_t expected_inputs = spec.obs_map.size();
    for (const Json& jl : j.at("layers")) {
        NnLayer layer;
        layer.activation = activation_from_string(jl.value("activation", "tanh"));
        const Json& rows = jl.at("weights");
        if (!rows.is_array() || rows.empty()) throw ParseError("layer weights must be a non-empty array");
        std::size_t n_out = rows.size();
        std::size_t n_in = rows[0].size();
        if (n_in != expected_inputs)
            throw DimMismatch("layer expects " + std::to_string(n_in) + " inputs but receives " +
                              std::to_string(expected_inputs));
        layer.weights.resize(static_cast<Eigen::Index>(n_out), static_cast<Eigen::Index>(n_in));
        for (std::size_t r = 0; r < n_out; ++r) {
            if (rows[r].size() != n_in) throw DimMismatch("ragged weight matrix");
            for (std::size_t c = 0; c < n_in; ++c)
                layer.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    decimal_to_double(rows[r][c].get<std::string>());
        }
        const Json& bias = jl.at("bias");
        if (bias.size() != n_out) throw DimMismatch("bias length does not match layer outputs");
        layer.bias.resize(static_cast<Eigen::Index>(n_out));
        for (std::size_t r = 0; r < n_out; ++r)
            layer.bias(static_cast<Eigen::Index>(r)) = decimal_to_double(bias[r].get<std::string>());
        expected_inputs = n_out;
        spec.layers.push_back(std::move(layer));
    }
    if (spec.layers.empty()) throw ParseError("network must have at least one layer");
    if (expected_inputs != 1) throw DimMismatch("final layer must produce a single output");
    return spec;
}

}  // namespace

ControllerSpec parse_formula(const std::string& formula, const std::string& name) {
    try {
        Parser parser(formula);
        return parser.run(formula, name);
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(std::string("formula parse failed: ") + e.what());
    }
}

ControllerSpec builtin(const std::string& name) {
    for (const CatalogEntry& entry : kCatalog)
        if (name == entry.name) return parse_formula(entry.formula, entry.name);
    throw UnknownController("no built-in controller named '" + name + "'");
}

std::vector<std::string> builtin_names() {
    std::vector<std::string> out;
    out.reserve(kCatalog.size());
    for (const CatalogEntry& entry : kCatalog) out.emplace_back(entry.name);
    return out;
}

std::string controller_to_json(const ControllerSpec& spec) {
    Json j = spec.variant == ControllerVariant::ExpressionTree ? expr_to_json(spec)
                                                               : nn_to_json(spec);
    return j.dump(2) + "\n";
}

ControllerSpec controller_from_json(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const std::exception& e) {
        throw ParseError(std::string("controller JSON parse failed: ") + e.what());
    }
    std::string variant = j.value("variant", "");
    if (variant == "expression_tree") return expr_from_json(j);
    if (variant == "dense_nn") return nn_from_json(j);
    throw ParseError("controller JSON must declare variant 'expression_tree' or 'dense_nn'");
}

ControllerSpec load_controller(const std::string& path) {
    return controller_from_json(read_file(path));
}

void save_controller(const ControllerSpec& spec, const std::string& path) {
    write_file(path, controller_to_json(spec));
}

ControllerSpec with_constants(const ControllerSpec& spec, const std::vector<double>& constants) {
    if (spec.variant != ControllerVariant::ExpressionTree)
        throw std::invalid_argument("with_constants requires an expression-tree controller");
    std::vector<int> idx = spec.constant_indices();
    if (idx.size() != constants.size())
        throw std::invalid_argument("expected " + std::to_string(idx.size()) +
                                    " constants, got " + std::to_string(constants.size()));
    ControllerSpec out = spec;
    for (std::size_t i = 0; i < idx.size(); ++i)
        out.nodes[static_cast<std::size_t>(idx[i])].value = constants[i];
    return out;
}

}  // namespace orbitcert
