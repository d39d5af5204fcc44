"""Phase-change model, material mixture rules, seasonal forcing and the
freezing-column controller.

Temperatures are in degrees Celsius, volumetric heat capacities in
J/(m^3 K), conductivities in W/(m K) and the latent heat of the water-ice
transition is stored volumetrically in J/m^3.  The sharp phase indicator is
regularized over the band [t_star - delta, t_star + delta]: the fraction of
thawed pore content ramps linearly from 0 to 1 across the band, and its
derivative contributes the latent-heat spike to the effective capacity.

All functions here are pure and accept either scalars or numpy arrays for
the temperature argument; assembly workers call them concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FREEZING_POROUS = "freezing-porous"
SINGLE_PHASE = "single-phase"


class PhysicsError(ValueError):
    """Invalid physical parameters or material lookups."""


class UnknownRegionError(PhysicsError):
    """A mesh region tag with no material assigned."""


@dataclass(frozen=True)
class PhaseModel:
    """Phase-change temperature, smoothing half-width and volumetric latent heat."""

    t_star: float = 0.0
    delta: float = 1.0
    latent_volumetric: float = 1.04e8

    def __post_init__(self):
        if not self.delta > 0:
            raise PhysicsError(f"delta must be > 0, got {self.delta}")
        if self.latent_volumetric < 0:
            raise PhysicsError(f"latent_volumetric must be >= 0, got {self.latent_volumetric}")


@dataclass(frozen=True)
class Material:
    """Thermal coefficients of one mesh region.

    A freezing-porous material mixes skeleton/water/ice coefficients by
    porosity and carries the latent-heat spike; a single-phase material has
    one capacity and one conductivity and no latent heat.
    """

    kind: str
    porosity: float = 0.0
    crho_sc: float = 0.0
    crho_w: float = 0.0
    crho_i: float = 0.0
    lambda_sc: float = 0.0
    lambda_w: float = 0.0
    lambda_i: float = 0.0
    crho: float = 0.0
    lam: float = 0.0

    @classmethod
    def freezing_porous(
        cls, porosity, crho_sc, crho_w, crho_i, lambda_sc, lambda_w, lambda_i
    ) -> "Material":
        if not 0.0 < porosity < 1.0:
            raise PhysicsError(f"porosity must be in (0, 1), got {porosity}")
        vals = dict(
            crho_sc=crho_sc,
            crho_w=crho_w,
            crho_i=crho_i,
            lambda_sc=lambda_sc,
            lambda_w=lambda_w,
            lambda_i=lambda_i,
        )
        for name, v in vals.items():
            if not v > 0:
                raise PhysicsError(f"{name} must be > 0, got {v}")
        return cls(kind=FREEZING_POROUS, porosity=float(porosity), **vals)

    @classmethod
    def single_phase(cls, crho, lam) -> "Material":
        if not crho > 0 or not lam > 0:
            raise PhysicsError(f"single-phase coefficients must be > 0, got {crho}, {lam}")
        return cls(kind=SINGLE_PHASE, crho=float(crho), lam=float(lam))


@dataclass(frozen=True)
class MaterialTable:
    """Region tag -> material map plus the shared phase model."""

    materials: dict[int, Material]
    phase: PhaseModel = field(default_factory=PhaseModel)

    def for_region(self, tag: int) -> Material:
        try:
            return self.materials[int(tag)]
        except KeyError:
            raise UnknownRegionError(
                f"no material assigned to region tag {int(tag)}"
            ) from None

    def latent_for(self, mat: Material) -> float:
        """Volumetric latent heat active in this material (zero for single-phase)."""
        return self.phase.latent_volumetric if mat.kind == FREEZING_POROUS else 0.0


def phi_delta(t, model: PhaseModel):
    """Smoothed thaw fraction: 0 below the band, 1 above, linear inside."""
    s = (np.asarray(t, dtype=np.float64) - model.t_star + model.delta) / (2.0 * model.delta)
    out = np.clip(s, 0.0, 1.0)
    return out if out.ndim else float(out)


def phi_delta_prime(t, model: PhaseModel):
    """Derivative of the thaw fraction: 1/(2*delta) strictly inside the band.

    Both band endpoints belong to the outer branches and return 0.
    """
    t = np.asarray(t, dtype=np.float64)
    inside = (t > model.t_star - model.delta) & (t < model.t_star + model.delta)
    out = np.where(inside, 1.0 / (2.0 * model.delta), 0.0)
    return out if out.ndim else float(out)


def frozen_thawed_coeffs(mat: Material) -> tuple[float, float, float, float]:
    """(crho_frozen, crho_thawed, lambda_frozen, lambda_thawed) for a material.

    Porous mixture rule: skeleton weighted by (1 - porosity), ice or water by
    porosity.  Single-phase materials collapse to their one value.
    """
    if mat.kind == SINGLE_PHASE:
        return mat.crho, mat.crho, mat.lam, mat.lam
    m = mat.porosity
    crho_minus = (1.0 - m) * mat.crho_sc + m * mat.crho_i
    crho_plus = (1.0 - m) * mat.crho_sc + m * mat.crho_w
    lam_minus = (1.0 - m) * mat.lambda_sc + m * mat.lambda_i
    lam_plus = (1.0 - m) * mat.lambda_sc + m * mat.lambda_w
    return crho_minus, crho_plus, lam_minus, lam_plus


def alpha_of_phi(phi, crho_minus: float, crho_plus: float):
    """Volumetric capacity interpolated between frozen and thawed values."""
    return crho_minus + np.multiply(phi, crho_plus - crho_minus)


def lambda_of_phi(phi, lam_minus: float, lam_plus: float):
    """Conductivity interpolated between frozen and thawed values."""
    return lam_minus + np.multiply(phi, lam_plus - lam_minus)


def effective_capacity(t, mat: Material, model: PhaseModel):
    """Apparent volumetric heat capacity including the latent-heat spike.

    alpha(phi(T)) + latent * phi'(T); the latent term is zero for
    single-phase materials.
    """
    crho_minus, crho_plus, _, _ = frozen_thawed_coeffs(mat)
    latent = model.latent_volumetric if mat.kind == FREEZING_POROUS else 0.0
    out = alpha_of_phi(phi_delta(t, model), crho_minus, crho_plus)
    out = out + latent * np.asarray(phi_delta_prime(t, model))
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class SeasonalForcing:
    """Sinusoidal yearly air temperature; defaults give
    41*sin(2*pi*(t/86400 + 250)/365) - 10.2 degrees C."""

    amplitude: float = 41.0
    day_offset: float = 250.0
    mean: float = -10.2
    seconds_per_day: float = 86400.0
    days_per_year: float = 365.0

    def __post_init__(self):
        if not self.seconds_per_day > 0:
            raise PhysicsError(f"seconds_per_day must be > 0, got {self.seconds_per_day}")
        if not self.days_per_year > 0:
            raise PhysicsError(f"days_per_year must be > 0, got {self.days_per_year}")


def air_temperature(t, forcing: SeasonalForcing = SeasonalForcing()):
    """Ambient air temperature (deg C) at time t (seconds)."""
    days = np.asarray(t, dtype=np.float64) / forcing.seconds_per_day
    out = (
        forcing.amplitude * np.sin(2.0 * np.pi * (days + forcing.day_offset) / forcing.days_per_year)
        + forcing.mean
    )
    return out if out.ndim else float(out)


ALWAYS_ON = "always_on"
ALWAYS_OFF = "always_off"
SEASONAL = "seasonal"
_MODES = (ALWAYS_ON, ALWAYS_OFF, SEASONAL)


@dataclass(frozen=True)
class ColumnController:
    """Switching rule for the freezing columns.

    In seasonal mode the columns are active whenever the air is colder than
    the ground at the reference probe, so a passive device only ever
    extracts heat.  ``literal_paper_rule`` flips the comparison (active when
    the ground is colder than the air), kept for experiments with that
    inverted formulation of the switching rule.  ``column_temperature``
    overrides the imposed boundary value (None means: use current air
    temperature).  ``probe_point`` is resolved to the nearest mesh node by
    the simulation driver.
    """

    column_tags: frozenset[int] = frozenset()
    mode: str = SEASONAL
    literal_paper_rule: bool = False
    column_temperature: float | None = None
    probe_point: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.mode not in _MODES:
            raise PhysicsError(f"controller mode must be one of {_MODES}, got {self.mode!r}")
        if self.mode != ALWAYS_OFF and not self.column_tags:
            raise PhysicsError(f"column_tags must be nonempty for mode {self.mode!r}")


def columns_active(
    t: float, soil_ref_t: float, ctrl: ColumnController, forcing: SeasonalForcing
) -> bool:
    """Decide whether the freezing columns extract heat at time t."""
    if ctrl.mode == ALWAYS_ON:
        return True
    if ctrl.mode == ALWAYS_OFF:
        return False
    t_air = air_temperature(t, forcing)
    if ctrl.literal_paper_rule:
        return soil_ref_t < t_air
    return t_air < soil_ref_t
