"""
Four ways to turn scores into attention
=======================================

Dense, sparse, and the two bounded variants on one small score vector.
"""
import numpy as np

from constrained_attention import (
    csoftmax_forward,
    csparsemax_forward,
    softmax_forward,
    sparsemax_forward,
)

np.set_printoptions(precision=4, suppress=True)
z = np.array([1.2, 0.8, -0.2])

# softmax never produces exact zeros
print("softmax    ", softmax_forward(z))

# sparsemax projects onto the simplex; the last word drops out
alpha, cert = sparsemax_forward(z)
print("sparsemax  ", alpha, " tau =", cert.tau)

# cap the first word at 0.5; the freed mass moves to the second one
u = np.array([0.5, 1.0, 1.0])
alpha, cert = csparsemax_forward(z, u)
print("csparsemax ", alpha, " free", cert.free, "zero", cert.zero, "clipped", cert.clipped)

# the bounded softmax keeps every uncapped word positive
alpha, cert = csoftmax_forward(z, u)
print("csoftmax   ", alpha, " clipped", cert.clipped)

# with no bounds in play the constrained versions reduce to their parents
inf = np.full(3, np.inf)
print("reductions ", np.allclose(csparsemax_forward(z, inf)[0], sparsemax_forward(z)[0]),
      np.allclose(csoftmax_forward(z, inf)[0], softmax_forward(z)))
