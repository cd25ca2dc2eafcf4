#include "vague/lstm.hpp"

namespace vague::nn {

LstmCell LstmCell::init(std::size_t input_dim, std::size_t hidden, Rng& rng) {
    LstmCell cell;
    cell.hidden = hidden;
    cell.w_x = parameter(xavier_init({4 * hidden, input_dim}, rng));
    cell.w_h = parameter(xavier_init({4 * hidden, hidden}, rng));
    Tensor b({4 * hidden});
    for (std::size_t i = hidden; i < 2 * hidden; ++i) b[i] = 1.0; // forget gate
    cell.b = parameter(std::move(b));
    return cell;
}

LstmCell::State LstmCell::zero_state() const {
    return {constant(Tensor::zeros({hidden})), constant(Tensor::zeros({hidden}))};
}

LstmCell::State LstmCell::step(const Var& x, const State& prev) const {
    Var pre = add(add(matmul(w_x, x), matmul(w_h, prev.h)), b);
    Var i = sigmoid(slice(pre, 0, hidden));
    Var f = sigmoid(slice(pre, hidden, hidden));
    Var g = tanh(slice(pre, 2 * hidden, hidden));
    Var o = sigmoid(slice(pre, 3 * hidden, hidden));
    Var c = add(mul(f, prev.c), mul(i, g));
    Var h = mul(o, tanh(c));
    return {h, c};
}

} // namespace vague::nn
