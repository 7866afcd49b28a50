#include "trimodal/nn.hpp"

#include <cmath>

#include "trimodal/errors.hpp"

namespace trimodal::nn {

Var activate(Var x, Activation act) {
    switch (act) {
        case Activation::none: return x;
        case Activation::gelu: return gelu(x);
        case Activation::sigmoid: return sigmoid(x);
    }
    return x;
}

void add_linear(ParamSet& ps, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor w(Shape{in, out});
    for (auto& v : w.values) v = u(rng);
    ps.add(prefix + ".w", std::move(w));
    ps.add(prefix + ".b", Tensor(Shape{out}, 0.0));
}

Var linear(Tape& tape, ParamSet& ps, const std::string& prefix, Var x) {
    return trimodal::linear(x, tape.param(ps, prefix + ".w"), tape.param(ps, prefix + ".b"));
}

void add_layer_norm(ParamSet& ps, const std::string& prefix, std::size_t width) {
    ps.add(prefix + ".gain", Tensor(Shape{width}, 1.0));
    ps.add(prefix + ".bias", Tensor(Shape{width}, 0.0));
}

Var layer_norm(Tape& tape, ParamSet& ps, const std::string& prefix, Var x, double eps) {
    return trimodal::layer_norm(x, tape.param(ps, prefix + ".gain"), tape.param(ps, prefix + ".bias"), eps);
}

void add_mlp(ParamSet& ps, const std::string& prefix, const std::vector<std::size_t>& widths, Rng& rng) {
    if (widths.size() < 2) throw ContractError("add_mlp: need at least input and output widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        add_linear(ps, prefix + ".l" + std::to_string(i), widths[i], widths[i + 1], rng);
    }
}

Var mlp(Tape& tape, ParamSet& ps, const std::string& prefix, Var x, std::size_t layers, Activation hidden,
        Activation output) {
    for (std::size_t i = 0; i < layers; ++i) {
        x = linear(tape, ps, prefix + ".l" + std::to_string(i), x);
        x = activate(x, i + 1 == layers ? output : hidden);
    }
    return x;
}

void add_attention(ParamSet& ps, const std::string& prefix, std::size_t query_width, std::size_t context_width,
                   Rng& rng) {
    add_linear(ps, prefix + ".q", query_width, query_width, rng);
    add_linear(ps, prefix + ".k", context_width, query_width, rng);
    add_linear(ps, prefix + ".v", context_width, query_width, rng);
    add_linear(ps, prefix + ".o", query_width, query_width, rng);
}

Var attend(Tape& tape, ParamSet& ps, const std::string& prefix, Var queries, Var context, std::size_t heads,
           std::size_t groups) {
    Var q = linear(tape, ps, prefix + ".q", queries);
    Var k = linear(tape, ps, prefix + ".k", context);
    Var v = linear(tape, ps, prefix + ".v", context);
    return linear(tape, ps, prefix + ".o", attention(q, k, v, heads, groups));
}

void add_block(ParamSet& ps, const std::string& prefix, const BlockShape& s, Rng& rng) {
    add_attention(ps, prefix + ".self", s.width, s.width, rng);
    add_layer_norm(ps, prefix + ".ln1", s.width);
    add_attention(ps, prefix + ".cross", s.width, s.context_width, rng);
    add_layer_norm(ps, prefix + ".ln2", s.width);
    add_mlp(ps, prefix + ".mlp", {s.width, s.mlp_ratio * s.width, s.width}, rng);
    add_layer_norm(ps, prefix + ".ln3", s.width);
}

Var block(Tape& tape, ParamSet& ps, const std::string& prefix, const BlockShape& s, Var x, Var context,
          std::size_t groups) {
    x = layer_norm(tape, ps, prefix + ".ln1", add(x, attend(tape, ps, prefix + ".self", x, x, s.heads, groups)),
                   s.ln_eps);
    x = layer_norm(tape, ps, prefix + ".ln2",
                   add(x, attend(tape, ps, prefix + ".cross", x, context, s.heads, groups)), s.ln_eps);
    x = layer_norm(tape, ps, prefix + ".ln3", add(x, mlp(tape, ps, prefix + ".mlp", x, 2, Activation::gelu)),
                   s.ln_eps);
    return x;
}

}  // namespace trimodal::nn
