"""Walk through the phase-change coefficient model.

Prints the smoothed thaw fraction, its derivative and the resulting
effective heat capacity across the freezing band for the default soil, then
samples a year of the seasonal air-temperature forcing that drives the
freezing columns.
"""

import numpy as np

from cryoground import (
    Material,
    PhaseModel,
    SeasonalForcing,
    air_temperature,
    effective_capacity,
    frozen_thawed_coeffs,
    phi_delta,
    phi_delta_prime,
)

model = PhaseModel(t_star=0.0, delta=1.0, latent_volumetric=1.04e8)
soil = Material.freezing_porous(
    porosity=0.35,
    crho_sc=2.17e6,
    crho_w=2.42e6,
    crho_i=1.9e6,
    lambda_sc=2.43,
    lambda_w=2.22,
    lambda_i=2.2,
)

crho_frozen, crho_thawed, lam_frozen, lam_thawed = frozen_thawed_coeffs(soil)
print("mixture coefficients for porosity 0.35 soil:")
print(f"  volumetric capacity: frozen {crho_frozen:.4g}, thawed {crho_thawed:.4g} J/(m^3 K)")
print(f"  conductivity:        frozen {lam_frozen:.4g}, thawed {lam_thawed:.4g} W/(m K)")
print()

print("T [degC]   thaw fraction   d(fraction)/dT   effective capacity [J/(m^3 K)]")
for t in np.linspace(-2.0, 2.0, 9):
    print(
        f"{t:8.2f}   {phi_delta(t, model):13.3f}   {phi_delta_prime(t, model):14.3f}   "
        f"{effective_capacity(t, soil, model):12.4g}"
    )
print()
print(
    "inside the band the capacity is dominated by the latent spike "
    f"latent/(2 delta) = {model.latent_volumetric / (2 * model.delta):.3g}"
)
print()

forcing = SeasonalForcing()  # 41 sin(2 pi (t/86400 + 250)/365) - 10.2
days = np.arange(0, 365, 30)
temps = air_temperature(days * 86400.0, forcing)
print("seasonal air temperature, one sample per 30 days:")
print("  day:  " + "  ".join(f"{d:6d}" for d in days))
print("  T_air:" + "  ".join(f"{t:6.1f}" for t in temps))
print(f"  year range: {air_temperature(23.75 * 86400):.1f} .. {air_temperature(206.25 * 86400):.1f} degC")
