"""
Bounded sparsemax as a quadratic knapsack
=========================================

The box-constrained projection is a separable QP with one linear
constraint. Here it is rewritten, solved by split-point shrinking, and
timed at growing sizes.
"""
import time

import numpy as np

from constrained_attention import map_csparsemax, solve_qk, solve_qk_sorted, unmap_csparsemax

z = np.array([1.2, 0.8, -0.2])
u = np.array([0.5, 1.0, 1.0])

problem = map_csparsemax(z, u)
print("a =", problem.a, " b =", problem.b, " d =", problem.d)

sol = solve_qk(problem)
print("x =", sol.x, " clamp level y =", sol.y)
print("alpha =", unmap_csparsemax(z, sol))

# the pivot rule changes only the running time
for pivot in ("median", "random", "bfprt"):
    print(pivot, solve_qk(problem, pivot=pivot, rng=0).x)

# running time grows linearly; the sorted reference pays an extra log factor
rng = np.random.default_rng(0)
for J in (10**3, 10**4, 10**5, 10**6):
    z = rng.uniform(-2, 2, size=J)
    u = rng.uniform(0, 2.0 / J, size=J)
    u[-1] = np.inf
    p = map_csparsemax(z, u)
    t0 = time.perf_counter()
    fast = solve_qk(p)
    t1 = time.perf_counter()
    ref = solve_qk_sorted(p)
    t2 = time.perf_counter()
    print(f"J={J:>8}  split-point {1e3 * (t1 - t0):7.2f} ms  sorted {1e3 * (t2 - t1):7.2f} ms  "
          f"max diff {np.max(np.abs(fast.x - ref.x)):.1e}  inspected/J {fast.n_inspected / J:.2f}")
