"""
Edge factors and the γ integral.

For a constant intensity ρ the global weight γ(h) is ρ²|W ∩ W_{-h}|, so the
Monte Carlo routine can be checked against the overlap area. For a varying
intensity the isotropic version γ^iso(r) is tabulated once on a grid and
interpolated from then on.
"""

import numpy as np

from inhomk import UNIT_SQUARE, KnownIntensity, build_interpolated_gamma, gamma_iso_mc, gamma_mc
from inhomk import isotropized_edge_factor, overlap_volume
from inhomk.simulate import RetentionProfile

r = np.array([0.01, 0.05, 0.1, 0.25])
print("a_W(r) on the unit square:", isotropized_edge_factor(UNIT_SQUARE, r))

h = np.array([0.1, -0.05])
rho = KnownIntensity(400.0)
est = gamma_mc(rho, UNIT_SQUARE, h, alpha=0.001, seed=1)
print("γ(h) Monte Carlo:", est.value, " exact:", 400.0**2 * overlap_volume(UNIT_SQUARE, h))

waves = RetentionProfile("waves")
model = KnownIntensity(lambda xy: 400.0 * waves(xy))
iso = gamma_iso_mc(model, UNIT_SQUARE, 0.05, alpha=0.005, seed=2)
print(f"γ^iso(0.05) for the waves intensity: {iso.value:.1f} (cv {iso.cv:.2e}, n {iso.n})")

grid = build_interpolated_gamma(model, UNIT_SQUARE, "isotropic", r_max=0.125, alpha=0.005, seed=3)
print("interpolated at 0.05:", grid(np.array([0.05]))[0], f"({len(grid.grid)} grid nodes)")
