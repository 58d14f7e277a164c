"""When does the cone become strictly stable inside the bumped ball?

The principal eigenvalue of the second variation is mu_1 = -6 + delta_1(K),
where delta_1 is the bottom of a radial Robin problem. We tabulate the closed
form next to the finite-difference value and then bisect on the sign of the
discrete mu_1.
"""
import numpy as np

from simonscone.spectral import (RadialProblem, fd_stability_threshold, stability_sweep,
                                 stability_threshold)

problem = RadialProblem(Z=100, step=0.005)
report = stability_sweep(np.arange(1, 11), problem)

print(f"{'K':>5} {'delta1':>10} {'delta1_fd':>12} {'mu1':>8} {'stable':>7}")
for row in report.rows:
    print(f"{row.K:5.1f} {row.delta1_closed:10.5f} {row.delta1_fd:12.7f} "
          f"{row.mu1_closed:8.4f} {str(row.stable):>7}")
print(f"largest |fd - closed|: {report.max_discrepancy:.2e}")

# the sign change of mu_1 sits at K = 5
k_fd = fd_stability_threshold(problem.with_K(0.0))
print(f"threshold: closed form {stability_threshold():.6f}, bisection on FD {k_fd:.5f}")
