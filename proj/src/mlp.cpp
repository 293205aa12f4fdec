#include "ddif/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ddif {

namespace {

// 17 significant digits: enough for double -> text -> double to be exact.
void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

std::vector<double> parse_double_line(const std::string& line, std::size_t expect,
                                      int line_no) {
    std::vector<double> out;
    out.reserve(expect);
    const char* p = line.c_str();
    char* end = nullptr;
    while (*p != '\0') {
        double v = std::strtod(p, &end);
        if (end == p) break;
        out.push_back(v);
        p = end;
    }
    if (out.size() != expect) {
        throw ParseError("mlp checkpoint line " + std::to_string(line_no) + ": expected " +
                         std::to_string(expect) + " values, got " + std::to_string(out.size()));
    }
    return out;
}

}  // namespace

const char* activation_name(Activation a) {
    return a == Activation::relu ? "relu" : "tanh";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    throw ParseError("unknown activation '" + name + "'");
}

void validate_mlp(const MlpParams& p) {
    if (p.layer_dims.size() < 2) throw ShapeError("mlp: need at least input and output dims");
    for (int d : p.layer_dims) {
        if (d <= 0) throw ShapeError("mlp: non-positive layer dim");
    }
    std::size_t layers = p.layer_dims.size() - 1;
    if (p.weights.size() != layers || p.biases.size() != layers) {
        throw ShapeError("mlp: weight/bias layer count does not match layer_dims");
    }
    for (std::size_t l = 0; l < layers; ++l) {
        std::size_t in = static_cast<std::size_t>(p.layer_dims[l]);
        std::size_t out = static_cast<std::size_t>(p.layer_dims[l + 1]);
        if (p.weights[l].size() != in * out) {
            throw ShapeError("mlp: layer " + std::to_string(l) + " weight size mismatch");
        }
        if (p.biases[l].size() != out) {
            throw ShapeError("mlp: layer " + std::to_string(l) + " bias size mismatch");
        }
    }
}

MlpParams mlp_init(std::vector<int> layer_dims, Activation act, Rng& rng) {
    MlpParams p;
    p.layer_dims = std::move(layer_dims);
    p.activation = act;
    if (p.layer_dims.size() < 2) throw ShapeError("mlp_init: need at least two dims");
    for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
        std::size_t in = static_cast<std::size_t>(p.layer_dims[l]);
        std::size_t out = static_cast<std::size_t>(p.layer_dims[l + 1]);
        double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::vector<double> w(in * out);
        for (double& x : w) x = rng.uniform(-bound, bound);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(out, 0.0);
    }
    validate_mlp(p);
    return p;
}

MlpParams mlp_zeros(std::vector<int> layer_dims, Activation act) {
    MlpParams p;
    p.layer_dims = std::move(layer_dims);
    p.activation = act;
    if (p.layer_dims.size() < 2) throw ShapeError("mlp_zeros: need at least two dims");
    for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
        std::size_t in = static_cast<std::size_t>(p.layer_dims[l]);
        std::size_t out = static_cast<std::size_t>(p.layer_dims[l + 1]);
        p.weights.emplace_back(in * out, 0.0);
        p.biases.emplace_back(out, 0.0);
    }
    return p;
}

namespace {

double apply_act(Activation a, double x) {
    if (a == Activation::relu) return x > 0.0 ? x : 0.0;
    return std::tanh(x);
}

// Derivative expressed through the pre-activation value.
double act_grad(Activation a, double pre) {
    if (a == Activation::relu) return pre > 0.0 ? 1.0 : 0.0;
    double t = std::tanh(pre);
    return 1.0 - t * t;
}

struct ForwardTrace {
    // pre[l] holds W_l * x_l + b_l; act[l] holds the layer input
    // (act[0] is the network input).
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> act;
};

ForwardTrace forward_trace(const MlpParams& p, const Embedding& input) {
    if (static_cast<int>(input.size()) != p.input_dim()) {
        throw ShapeError("mlp_forward: input dim " + std::to_string(input.size()) +
                         ", expected " + std::to_string(p.input_dim()));
    }
    ForwardTrace t;
    t.act.push_back(input);
    std::size_t layers = p.layer_count();
    for (std::size_t l = 0; l < layers; ++l) {
        std::size_t in = static_cast<std::size_t>(p.layer_dims[l]);
        std::size_t out = static_cast<std::size_t>(p.layer_dims[l + 1]);
        const std::vector<double>& x = t.act.back();
        std::vector<double> pre(out);
        for (std::size_t r = 0; r < out; ++r) {
            double acc = p.biases[l][r];
            const double* row = &p.weights[l][r * in];
            for (std::size_t c = 0; c < in; ++c) acc += row[c] * x[c];
            pre[r] = acc;
        }
        std::vector<double> y(out);
        bool last = (l + 1 == layers);
        for (std::size_t r = 0; r < out; ++r) {
            y[r] = last ? pre[r] : apply_act(p.activation, pre[r]);
        }
        t.pre.push_back(std::move(pre));
        t.act.push_back(std::move(y));
    }
    return t;
}

}  // namespace

Embedding mlp_forward(const MlpParams& p, const Embedding& input) {
    validate_mlp(p);
    return forward_trace(p, input).act.back();
}

MlpGrads zero_grads_like(const MlpParams& p) {
    MlpGrads g;
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
        g.weights.emplace_back(p.weights[l].size(), 0.0);
        g.biases.emplace_back(p.biases[l].size(), 0.0);
    }
    return g;
}

void accumulate(MlpGrads& into, const MlpGrads& delta) {
    if (into.weights.size() != delta.weights.size()) {
        throw ShapeError("accumulate: layer count mismatch");
    }
    for (std::size_t l = 0; l < into.weights.size(); ++l) {
        if (into.weights[l].size() != delta.weights[l].size() ||
            into.biases[l].size() != delta.biases[l].size()) {
            throw ShapeError("accumulate: layer shape mismatch");
        }
        for (std::size_t i = 0; i < into.weights[l].size(); ++i) {
            into.weights[l][i] += delta.weights[l][i];
        }
        for (std::size_t i = 0; i < into.biases[l].size(); ++i) {
            into.biases[l][i] += delta.biases[l][i];
        }
    }
}

void scale(MlpGrads& g, double factor) {
    for (auto& w : g.weights) {
        for (double& x : w) x *= factor;
    }
    for (auto& b : g.biases) {
        for (double& x : b) x *= factor;
    }
}

BackwardResult mlp_backward(const MlpParams& p, const Embedding& input,
                            const Embedding& upstream_grad) {
    validate_mlp(p);
    if (static_cast<int>(upstream_grad.size()) != p.output_dim()) {
        throw ShapeError("mlp_backward: upstream grad dim mismatch");
    }
    ForwardTrace t = forward_trace(p, input);

    BackwardResult res;
    res.param_grads = zero_grads_like(p);

    std::vector<double> d = upstream_grad;  // dLoss/dOutput of current layer
    for (std::size_t li = p.layer_count(); li-- > 0;) {
        std::size_t in = static_cast<std::size_t>(p.layer_dims[li]);
        std::size_t out = static_cast<std::size_t>(p.layer_dims[li + 1]);
        bool last = (li + 1 == p.layer_count());

        // Through the activation (final layer is linear).
        std::vector<double> dpre(out);
        for (std::size_t r = 0; r < out; ++r) {
            dpre[r] = last ? d[r] : d[r] * act_grad(p.activation, t.pre[li][r]);
        }

        const std::vector<double>& x = t.act[li];
        for (std::size_t r = 0; r < out; ++r) {
            double g = dpre[r];
            res.param_grads.biases[li][r] = g;
            double* wrow = &res.param_grads.weights[li][r * in];
            for (std::size_t c = 0; c < in; ++c) wrow[c] = g * x[c];
        }

        std::vector<double> dx(in, 0.0);
        for (std::size_t r = 0; r < out; ++r) {
            const double* row = &p.weights[li][r * in];
            double g = dpre[r];
            for (std::size_t c = 0; c < in; ++c) dx[c] += row[c] * g;
        }
        d = std::move(dx);
    }
    res.input_grad = std::move(d);
    return res;
}

MlpParams sgd_step(const MlpParams& p, const MlpGrads& grads, double lr) {
    validate_mlp(p);
    if (grads.weights.size() != p.layer_count()) {
        throw ShapeError("sgd_step: grad layer count mismatch");
    }
    MlpParams out = p;
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
        if (grads.weights[l].size() != p.weights[l].size() ||
            grads.biases[l].size() != p.biases[l].size()) {
            throw ShapeError("sgd_step: grad shape mismatch at layer " + std::to_string(l));
        }
        for (std::size_t i = 0; i < out.weights[l].size(); ++i) {
            out.weights[l][i] -= lr * grads.weights[l][i];
        }
        for (std::size_t i = 0; i < out.biases[l].size(); ++i) {
            out.biases[l][i] -= lr * grads.biases[l][i];
        }
    }
    return out;
}

void save_mlp(const MlpParams& p, const std::string& path) {
    validate_mlp(p);
    std::string body = "DDIF-MLP v1\n";
    for (std::size_t i = 0; i < p.layer_dims.size(); ++i) {
        if (i) body += ' ';
        body += std::to_string(p.layer_dims[i]);
    }
    body += '\n';
    body += activation_name(p.activation);
    body += '\n';
    for (const auto& w : p.weights) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (i) body += ' ';
            append_double(body, w[i]);
        }
        body += '\n';
    }
    for (const auto& b : p.biases) {
        for (std::size_t i = 0; i < b.size(); ++i) {
            if (i) body += ' ';
            append_double(body, b[i]);
        }
        body += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << body;
    if (!f) throw IoError("write failed: " + path);
}

MlpParams load_mlp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);

    std::string line;
    int line_no = 0;
    auto next_line = [&]() {
        if (!std::getline(f, line)) {
            throw ParseError("mlp checkpoint " + path + ": unexpected end of file after line " +
                             std::to_string(line_no));
        }
        ++line_no;
    };

    next_line();
    if (line != "DDIF-MLP v1") {
        throw ParseError("mlp checkpoint " + path + " line 1: bad magic '" + line + "'");
    }

    MlpParams p;
    next_line();
    {
        std::istringstream iss(line);
        int d;
        while (iss >> d) p.layer_dims.push_back(d);
        if (p.layer_dims.size() < 2) {
            throw ParseError("mlp checkpoint line 2: need at least two layer dims");
        }
    }
    next_line();
    p.activation = activation_from_name(line);

    std::size_t layers = p.layer_dims.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        std::size_t in = static_cast<std::size_t>(p.layer_dims[l]);
        std::size_t out = static_cast<std::size_t>(p.layer_dims[l + 1]);
        next_line();
        p.weights.push_back(parse_double_line(line, in * out, line_no));
    }
    for (std::size_t l = 0; l < layers; ++l) {
        std::size_t out = static_cast<std::size_t>(p.layer_dims[l + 1]);
        next_line();
        p.biases.push_back(parse_double_line(line, out, line_no));
    }
    validate_mlp(p);
    return p;
}

}  // namespace ddif
