#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "trimodal/tape.hpp"
#include "trimodal/tensor.hpp"

namespace trimodal::nn {

using Rng = std::mt19937_64;

enum class Activation { none, gelu, sigmoid };

Var activate(Var x, Activation act);

// Weight `<prefix>.w` [in x out] drawn from U(-1/sqrt(in), 1/sqrt(in)) and a
// zero bias `<prefix>.b` [out].
void add_linear(ParamSet& ps, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
Var linear(Tape& tape, ParamSet& ps, const std::string& prefix, Var x);

// Gain `<prefix>.gain` = 1 and bias `<prefix>.bias` = 0.
void add_layer_norm(ParamSet& ps, const std::string& prefix, std::size_t width);
Var layer_norm(Tape& tape, ParamSet& ps, const std::string& prefix, Var x, double eps);

// Stack of linear layers `<prefix>.l0 ... l{n-1}` mapping widths[0] -> widths.back().
void add_mlp(ParamSet& ps, const std::string& prefix, const std::vector<std::size_t>& widths, Rng& rng);
// `hidden` follows every layer but the last, `output` follows the last.
Var mlp(Tape& tape, ParamSet& ps, const std::string& prefix, Var x, std::size_t layers,
        Activation hidden, Activation output = Activation::none);

// Attention with learned projections `<prefix>.{q,k,v,o}`.
void add_attention(ParamSet& ps, const std::string& prefix, std::size_t query_width,
                   std::size_t context_width, Rng& rng);
Var attend(Tape& tape, ParamSet& ps, const std::string& prefix, Var queries, Var context,
           std::size_t heads, std::size_t groups);

// Post-norm transformer layer over a token sequence:
//   x = LN(x + SelfAttn(x)); x = LN(x + Attn(x, ctx, ctx)); x = LN(x + MLP(x))
struct BlockShape {
    std::size_t width = 0;
    std::size_t context_width = 0;
    std::size_t heads = 1;
    std::size_t mlp_ratio = 2;
    double ln_eps = 1e-5;
};
void add_block(ParamSet& ps, const std::string& prefix, const BlockShape& shape, Rng& rng);
// tokens: groups*n rows, context: groups*m rows.
Var block(Tape& tape, ParamSet& ps, const std::string& prefix, const BlockShape& shape, Var tokens,
          Var context, std::size_t groups);

}  // namespace trimodal::nn
