"""
Reverse-mode autodiff on the numeric kernel
===========================================

Builds a tiny computation on the tape, walks gradients backward, and
confirms one of them against a central finite difference.
"""

import numpy as np

from backstyle import kernel

rng = np.random.default_rng(0)

# a two-layer scalar-valued function: sum(tanh(x @ w) * v)
x = kernel.Tensor(rng.standard_normal((4, 3)), requires_grad=True)
w = kernel.Tensor(rng.standard_normal((3, 2)), requires_grad=True)
v = kernel.constant(rng.standard_normal((4, 2)))

hidden = kernel.tanh(kernel.matmul(x, w))
loss = kernel.sum_all(kernel.mul(hidden, v))
print("loss:", float(loss.data))

kernel.backward(loss)
print("dloss/dw:\n", w.grad)

# finite-difference check of one coordinate of w
eps = 1e-5


def loss_at(warr):
    h = np.tanh(x.data @ warr)
    return float((h * v.data).sum())


bumped = w.data.copy()
bumped[1, 0] += eps
hi = loss_at(bumped)
bumped[1, 0] -= 2 * eps
lo = loss_at(bumped)
numeric = (hi - lo) / (2 * eps)
print("analytic w[1,0]:", w.grad[1, 0])
print("numeric  w[1,0]:", numeric)
assert abs(w.grad[1, 0] - numeric) < 1e-8

# one LSTM step is just another op on the tape
h0 = kernel.Tensor(np.zeros((1, 5)), requires_grad=True)
c0 = kernel.Tensor(np.zeros((1, 5)))
wx = kernel.Tensor(rng.standard_normal((3, 20)) * 0.1, requires_grad=True)
wh = kernel.Tensor(rng.standard_normal((5, 20)) * 0.1)
b = kernel.Tensor(np.zeros(20))
h1, c1 = kernel.lstm_cell(kernel.constant(rng.standard_normal((1, 3))), h0, c0, wx, wh, b)
kernel.backward(kernel.sum_all(h1))
print("LSTM dh1/dwx has shape", wx.grad.shape, "and norm %.4f" % np.linalg.norm(wx.grad))
