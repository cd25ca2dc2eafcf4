#pragma once

#include <utility>
#include <vector>

#include "vague/autodiff.hpp"

namespace vague::nn {

// Single LSTM cell with fused gate weights.
//
// w_x (4H, d) and w_h (4H, H) hold the input/hidden weights for the four
// gates stacked in the order [input, forget, cell, output]; the forget-gate
// slice of the bias starts at 1 so early training does not wash out state.
struct LstmCell {
    Var w_x;
    Var w_h;
    Var b;
    std::size_t hidden = 0;

    static LstmCell init(std::size_t input_dim, std::size_t hidden, Rng& rng);

    struct State {
        Var h;
        Var c;
    };

    State zero_state() const;
    State step(const Var& x, const State& prev) const;
    std::vector<Var> params() const { return {w_x, w_h, b}; }
};

} // namespace vague::nn
