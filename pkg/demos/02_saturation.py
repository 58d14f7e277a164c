"""Past K = 6 the principal eigenvalue stops moving.

Once the Robin coefficient stops pulling the eigenfunction toward the boundary,
delta_1 is pinned to the bottom of the essential spectrum, 25/4. On a truncated
interval the discrete value sits slightly above it, by roughly (pi / 2Z)^2,
and creeps down as the truncation deepens.
"""
import math

from simonscone.spectral import RadialProblem, radial_eigensolve_z

for K in (5.0, 5.5, 6.0, 8.0, 20.0):
    vals = [radial_eigensolve_z(RadialProblem(K=K, Z=Z)).eigenvalue for Z in (50, 100, 200, 400)]
    print(f"K={K:5.1f}  " + "  ".join(f"{v:.6f}" for v in vals))

print("truncation gap (pi/2Z)^2 at Z=200:", (math.pi / 400) ** 2)

# a Dirichlet condition at the vertex-free end gives the same limit
d = radial_eigensolve_z(RadialProblem(K=8, Z=200, boundary="dirichlet")).eigenvalue
print(f"Dirichlet, Z=200: {d:.6f}")
