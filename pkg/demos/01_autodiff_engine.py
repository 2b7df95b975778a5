"""Tour of the tensor engine: values, the gradient tape, and verifying
every analytic gradient against central finite differences.

Run: python demos/01_autodiff_engine.py
"""

import numpy as np

from agegender import Tape, constant, parameter
from agegender import tensor as T
from agegender.gradcheck import check_gradients

rng = np.random.default_rng(0)

print("== values ==")
a = constant([[1.0, 2.0], [3.0, 4.0]])
b = constant([[0.5, 0.0], [0.0, 0.5]])
print("a @ b =\n", (a @ b).data)
print("softmax of [1000, 0] (stable):", T.softmax(constant([1000.0, 0.0])).data)
print("gelu(0) =", T.gelu(constant([0.0])).data)

print("\n== gradients ==")
x = parameter(rng.standard_normal((3, 3)))
with Tape() as tape:
    y = (T.softmax(x @ x, axis=-1) * constant(rng.standard_normal((3, 3)))).sum()
    tape.backward(y)
print("loss:", y.item())
print("dL/dx:\n", x.grad)

print("\n== the tape runs backward exactly once ==")
with Tape() as tape:
    loss = (x * x).sum()
    tape.backward(loss)
    try:
        tape.backward(loss)
    except Exception as exc:
        print("second backward ->", type(exc).__name__, "-", exc)

print("\n== finite-difference verification ==")
x = parameter(rng.standard_normal((4, 4)))
gamma = parameter(np.ones(4))
beta = parameter(np.zeros(4))
w = constant(rng.standard_normal((4, 4)))


def build_loss():
    h = T.gelu(T.layer_norm(x @ x, gamma, beta))
    return (h * w).mean()


worst, per_param = check_gradients(build_loss, {"x": x, "gamma": gamma, "beta": beta})
for name, err in per_param.items():
    print(f"  {name}: max relative error {err:.2e}")
print(f"worst: {worst:.2e}  (threshold 1e-4)")

print("\n== local windows: fold(unfold(x)) == x * overlap counts ==")
img = constant(rng.random((1, 4, 4, 1)))
back = T.fold(T.unfold(img, k=3, stride=1, pad=1), (4, 4), k=3, stride=1, pad=1)
counts = T.overlap_counts(4, 4, k=3, stride=1, pad=1)
print("overlap counts:\n", counts)
print("max |fold(unfold(x)) - x*counts| =", np.abs(back.data[0, :, :, 0] - img.data[0, :, :, 0] * counts).max())
