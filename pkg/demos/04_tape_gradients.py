#!/usr/bin/env python3
"""The reverse-mode tape underneath the model, on problems small enough to read.

Every operation on a Tensor records how to push gradients back to its inputs.
Calling backward() on a scalar walks the recording once, so any composition of
the supported ops is differentiable with no framework involved.
"""

import numpy as np

from sessionrec import gradkit as gk

# --- a scalar chain, checked by hand -------------------------------------
x = gk.Tensor(2.0)
y = gk.sum(x * x + x)          # d/dx (x^2 + x) = 2x + 1 = 5 at x = 2
gk.backward(y)
print("dy/dx at 2:", float(x.grad))

# --- matrices, duplicated inputs, broadcasting ----------------------------
a = gk.Tensor(np.array([[0.1, -0.3], [0.2, 0.4]]))
b = gk.Tensor(np.array([0.5, -1.0]))
out = gk.sum(gk.sigmoid(a @ b) * 3.0)
gk.backward(out)
print("grad wrt a:\n", a.grad)
print("grad wrt b:", b.grad)

# --- trust, but verify -----------------------------------------------------
# grad_check perturbs every coordinate by +-h and compares the analytic
# gradient against the central difference. Worst relative error comes back.
def f(m, v):
    return gk.sum(gk.tanh(m @ v)) + gk.sum(gk.exp(v * 0.1))

m = gk.Tensor(np.random.default_rng(0).normal(size=(4, 3)))
v = gk.Tensor(np.random.default_rng(1).normal(size=3))
print("grad_check worst relative error:", gk.grad_check(f, [m, v], h=1e-5))

# --- fitting something -----------------------------------------------------
# Least squares with the Adam stepper the trainer uses. Parameters live in a
# store; each gets a group, and each group gets its own learning rate.
rng = np.random.default_rng(7)
true_w = np.array([1.5, -2.0, 0.5])
xs = rng.normal(size=(64, 3))
ys = xs @ true_w + 0.01 * rng.normal(size=64)

store = gk.ParamStore()
w = store.add("w", np.zeros(3), group="intra_shared")
for step in range(400):
    residual = gk.Tensor(xs) @ w - gk.Tensor(ys)
    loss = gk.sum(residual * residual) * (1.0 / 64.0)
    gk.backward(loss)
    gk.adam_step(store, {"w": w.grad}, lr=0.05)
    if step % 100 == 0:
        print(f"step {step:3d} loss {float(loss.values):.5f}")
print("recovered weights:", np.round(w.values, 3), "true:", true_w)
