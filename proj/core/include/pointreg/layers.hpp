#pragma once

#include "pointreg/tape.hpp"

namespace pointreg {

/// Two-layer pointwise perceptron parameters bound to a tape.
struct BoundMlp {
  Var w1, b1, w2, b2;
};

/// leaky(x*w1 + b1) * w2 + b2, optionally activating the output as well.
inline Var mlp_forward(Tape& t, const BoundMlp& mlp, Var x, double slope,
                       bool activate_output) {
  Var h = leaky_relu(t, add_rowvec(t, matmul(t, x, mlp.w1), mlp.b1), slope);
  Var out = add_rowvec(t, matmul(t, h, mlp.w2), mlp.b2);
  return activate_output ? leaky_relu(t, out, slope) : out;
}

}  // namespace pointreg
