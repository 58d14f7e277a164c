"""A compact cousin: -h'' on [0, 1] with h(0) = 0 and kappa h(1) = h'(1).

The sine-branch eigenvalue approaches the Dirichlet value pi^2 like
pi^2 (1 + 2/kappa). For kappa > 1 there is also one negative eigenvalue
from the sinh branch, close to -kappa^2.
"""
import math

from simonscone.spectral import (compact_analog_eigenvalue, compact_analog_fd,
                                 compact_analog_negative_eigenvalue)

for kappa in (25, 50, 100, 200, 1000):
    d = compact_analog_eigenvalue(kappa)
    coef = kappa * (d / math.pi ** 2 - 1)
    fd = compact_analog_fd(kappa)
    print(f"kappa={kappa:5d}  delta1={d:.8f}  kappa*(delta1/pi^2 - 1)={coef:.4f}  "
          f"fd={fd[1]:.8f}  negative={compact_analog_negative_eigenvalue(kappa):.1f}")

print("kappa = -100:", compact_analog_eigenvalue(-100), "below pi^2 =", math.pi ** 2)
