"""Volume-matched competitors never beat the cone.

Each seed perturbs the cone segment, moves its boundary endpoint a little
along the bumped wall and adjusts one mode so the enclosed volume is exactly
the cone's. The calibration inequality then bounds the competitor's area from
below by the cone's area plus two boundary fluxes whose signs the bump fixes.
"""
from simonscone.calibration import build_calibration_field, minimality_check
from simonscone.geometry import (DomainParams, PerturbationSpec, make_competitor,
                                 random_perturbation)

params = DomainParams()
field = build_calibration_field()

cone = minimality_check(make_competitor(PerturbationSpec(), params), params, field)
print(f"cone itself: slack {cone.slack:.1e}")

print(f"{'seed':>4} {'area - cone':>12} {'flux lost':>11} {'flux gained':>12} {'slack':>10}")
for seed in range(20):
    rep = minimality_check(make_competitor(random_perturbation(seed, params), params),
                           params, field)
    print(f"{seed:4d} {rep.area_excess:12.3e} {rep.flux_lost:11.3e} "
          f"{rep.flux_gained:12.3e} {rep.slack:10.3e}")
