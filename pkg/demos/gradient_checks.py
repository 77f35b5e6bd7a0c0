"""
Checking forward passes and gradients
=====================================

Brute-force oracles enumerate every active-set partition on small inputs.
Central differences check the backward pass in both scores and bounds.
"""
import numpy as np

from constrained_attention import csparsemax_forward, finite_diff_check, oracle_csparsemax
from constrained_attention.oracles import forward_suite, gradient_suite
from constrained_attention.transforms import csparsemax_backward

z = np.array([1.2, 0.8, -0.2, 0.5])
u = np.array([0.4, 1.0, 1.0, np.inf])

alpha, cert = csparsemax_forward(z, u)
print("forward", alpha, "oracle", oracle_csparsemax(z, u))

# a cotangent on alpha becomes gradients for z (free words) and u (clipped words)
dz, du = csparsemax_backward(cert, np.array([0.1, 0.3, -0.2, 0.0]))
print("dz", dz, "du", du)
print(finite_diff_check("csparsemax", z, u))

for name in ("softmax", "sparsemax", "csoftmax", "csparsemax"):
    fw = forward_suite(name, trials=50, seed=0)
    gr = gradient_suite(name, trials=10, seed=1)
    print(f"{name:>10}: forward err {fw.max_abs_error:.1e} over {fw.n_instances}, "
          f"gradient err {gr.max_abs_error:.1e} over {gr.n_instances}")
