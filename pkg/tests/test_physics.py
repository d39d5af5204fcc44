import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cryoground.physics import (
    ColumnController,
    Material,
    MaterialTable,
    PhaseModel,
    PhysicsError,
    SeasonalForcing,
    UnknownRegionError,
    air_temperature,
    alpha_of_phi,
    columns_active,
    effective_capacity,
    frozen_thawed_coeffs,
    lambda_of_phi,
    phi_delta,
    phi_delta_prime,
)

MODEL = PhaseModel(t_star=0.0, delta=1.0, latent_volumetric=1.04e8)

temps = st.floats(min_value=-60.0, max_value=60.0, allow_nan=False)


class TestPhiDelta:
    @pytest.mark.parametrize("t,expected", [(-2.0, 0.0), (0.0, 0.5), (0.5, 0.75), (3.0, 1.0)])
    def test_values(self, t, expected):
        assert phi_delta(t, MODEL) == pytest.approx(expected, abs=1e-15)

    def test_array_input(self):
        out = phi_delta(np.array([-2.0, 0.0, 0.5]), MODEL)
        assert np.allclose(out, [0.0, 0.5, 0.75])

    @given(temps, temps)
    @settings(max_examples=100)
    def test_monotone_nondecreasing(self, t1, t2):
        lo, hi = min(t1, t2), max(t1, t2)
        assert phi_delta(lo, MODEL) <= phi_delta(hi, MODEL)

    @given(temps)
    def test_bounded(self, t):
        assert 0.0 <= phi_delta(t, MODEL) <= 1.0

    def test_sharp_limit(self):
        # pointwise convergence to the indicator away from t_star
        for t in (-0.5, 0.3):
            expected = 0.0 if t < 0 else 1.0
            errs = [
                abs(phi_delta(t, PhaseModel(0.0, d, 0.0)) - expected) for d in (1.0, 0.1, 0.01)
            ]
            assert errs[0] >= errs[1] >= errs[2]
            assert errs[2] == 0.0


class TestPhiDeltaPrime:
    @pytest.mark.parametrize("t,expected", [(-5.0, 0.0), (0.0, 0.5), (1.0, 0.0), (-1.0, 0.0)])
    def test_values(self, t, expected):
        assert phi_delta_prime(t, MODEL) == pytest.approx(expected, abs=1e-15)

    @given(temps)
    def test_nonnegative(self, t):
        assert phi_delta_prime(t, MODEL) >= 0.0

    def test_integrates_to_one(self):
        # trapezoid quadrature over the open band (the endpoints belong to
        # the outer branches and carry no measure)
        eps = 1e-12
        t = np.linspace(-1.0 + eps, 1.0 - eps, 20001)
        total = np.trapezoid(phi_delta_prime(t, MODEL), t)
        assert total == pytest.approx(1.0, abs=1e-10)


class TestMixtures:
    def test_porous_capacities(self):
        mat = Material.freezing_porous(0.5, 2.0e6, 4.2e6, 1.9e6, 2.0, 0.6, 2.2)
        crm, crp, lamm, lamp = frozen_thawed_coeffs(mat)
        assert crm == pytest.approx(1.95e6)
        assert crp == pytest.approx(3.10e6)
        assert lamm == pytest.approx(0.5 * 2.0 + 0.5 * 2.2)
        assert lamp == pytest.approx(0.5 * 2.0 + 0.5 * 0.6)

    def test_porosity_zero_limit(self):
        mat = Material.freezing_porous(1e-12, 2.0e6, 4.2e6, 1.9e6, 2.0, 0.6, 2.2)
        crm, crp, lamm, lamp = frozen_thawed_coeffs(mat)
        assert crm == pytest.approx(2.0e6, rel=1e-6)
        assert crp == pytest.approx(2.0e6, rel=1e-6)
        assert lamm == pytest.approx(2.0, rel=1e-6)

    def test_single_phase_cement(self):
        mat = Material.single_phase(crho=0.8e6, lam=0.21)
        assert frozen_thawed_coeffs(mat) == (0.8e6, 0.8e6, 0.21, 0.21)

    def test_material_validation(self):
        with pytest.raises(PhysicsError):
            Material.freezing_porous(1.5, 1, 1, 1, 1, 1, 1)
        with pytest.raises(PhysicsError):
            Material.single_phase(crho=-1.0, lam=1.0)

    def test_unknown_region(self):
        table = MaterialTable({1: Material.single_phase(1.0, 1.0)}, MODEL)
        with pytest.raises(UnknownRegionError, match="99"):
            table.for_region(99)


class TestInterpolants:
    def test_endpoints(self):
        assert alpha_of_phi(0.0, 1e6, 3e6) == 1e6
        assert alpha_of_phi(1.0, 1e6, 3e6) == 3e6
        assert lambda_of_phi(1.0, 2.2, 0.6) == pytest.approx(0.6)

    def test_interior(self):
        assert alpha_of_phi(0.25, 1e6, 3e6) == pytest.approx(1.5e6)

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    @settings(max_examples=50)
    def test_affine(self, p1, p2, p3):
        # three-point collinearity: second differences vanish
        ps = sorted([p1, p2, p3])
        ys = [alpha_of_phi(p, 1e6, 3e6) for p in ps]
        lhs = (ys[2] - ys[0]) * 1.0
        interp = ys[0] + (ys[2] - ys[0]) * (
            0.0 if ps[2] == ps[0] else (ps[1] - ps[0]) / (ps[2] - ps[0])
        )
        assert ys[1] == pytest.approx(interp, abs=1e-6 * 3e6)


class TestEffectiveCapacity:
    SOIL = Material.freezing_porous(0.5, 2.0e6, 2.0e6, 2.0e6, 2.0, 2.0, 2.0)

    def test_deep_frozen_is_exact(self):
        crm, _, _, _ = frozen_thawed_coeffs(self.SOIL)
        assert effective_capacity(-40.0, self.SOIL, MODEL) == crm

    def test_latent_spike_at_tstar(self):
        # equal capacities 2e6 plus 1.04e8 / (2 * 1)
        assert effective_capacity(0.0, self.SOIL, MODEL) == pytest.approx(2e6 + 5.2e7)

    def test_zero_latent_reduces_to_alpha(self):
        model = PhaseModel(0.0, 1.0, 0.0)
        soil = Material.freezing_porous(0.5, 2.0e6, 4.2e6, 1.9e6, 2.0, 0.6, 2.2)
        for t in np.linspace(-3, 3, 13):
            crm, crp, _, _ = frozen_thawed_coeffs(soil)
            assert effective_capacity(t, soil, model) == pytest.approx(
                alpha_of_phi(phi_delta(t, model), crm, crp)
            )

    def test_single_phase_has_no_spike(self):
        mat = Material.single_phase(0.8e6, 0.21)
        assert effective_capacity(0.0, mat, MODEL) == pytest.approx(0.8e6)

    @given(temps)
    @settings(max_examples=100)
    def test_lower_bound(self, t):
        soil = Material.freezing_porous(0.5, 2.0e6, 4.2e6, 1.9e6, 2.0, 0.6, 2.2)
        crm, crp, _, _ = frozen_thawed_coeffs(soil)
        assert effective_capacity(t, soil, MODEL) >= min(crm, crp) - 1e-9


class TestAirTemperature:
    def test_at_zero(self):
        # 41 sin(2 pi 250 / 365) - 10.2, evaluated independently
        assert air_temperature(0.0) == pytest.approx(-47.820928668435143, abs=1e-9)

    def test_maximum(self):
        t = 206.25 * 86400.0
        assert air_temperature(t) == pytest.approx(30.8, abs=1e-12)

    def test_periodicity(self):
        f = SeasonalForcing()
        for t in (0.0, 3.7e6, 2.2e7):
            year = 365.0 * 86400.0
            assert air_temperature(t, f) == pytest.approx(air_temperature(t + year, f), abs=1e-9)

    def test_independent_reevaluation(self):
        f = SeasonalForcing()
        for day in range(0, 365, 30):
            t = day * 86400.0
            expected = 41.0 * math.sin(2.0 * math.pi * (day + 250.0) / 365.0) - 10.2
            assert air_temperature(t, f) == pytest.approx(expected, abs=1e-12)

    def test_validation(self):
        with pytest.raises(PhysicsError):
            SeasonalForcing(seconds_per_day=0.0)


class TestColumnController:
    FORCING = SeasonalForcing()

    def ctrl(self, mode, literal=False):
        return ColumnController(
            column_tags=frozenset({201}), mode=mode, literal_paper_rule=literal,
            probe_point=(0.0, 0.0, 0.0),
        )

    def test_always_off(self):
        ctrl = ColumnController(mode="always_off")
        assert columns_active(0.0, -100.0, ctrl, self.FORCING) is False

    def test_always_on(self):
        assert columns_active(0.0, 100.0, self.ctrl("always_on"), self.FORCING) is True

    def test_seasonal_cold_air(self):
        # t = 0 gives air around -47.8; soil at -5 -> columns extract heat
        assert columns_active(0.0, -5.0, self.ctrl("seasonal"), self.FORCING) is True

    def test_seasonal_warm_air(self):
        t_summer = 206.25 * 86400.0  # air at +30.8
        assert columns_active(t_summer, -2.0, self.ctrl("seasonal"), self.FORCING) is False

    def test_literal_rule_flips(self):
        ctrl = self.ctrl("seasonal", literal=True)
        assert columns_active(0.0, -5.0, ctrl, self.FORCING) is False
        assert columns_active(206.25 * 86400.0, -2.0, ctrl, self.FORCING) is True

    def test_validation(self):
        with pytest.raises(PhysicsError):
            ColumnController(mode="sometimes")
        with pytest.raises(PhysicsError):
            ColumnController(mode="seasonal", column_tags=frozenset())


class TestPhaseModelValidation:
    def test_delta_positive(self):
        with pytest.raises(PhysicsError):
            PhaseModel(0.0, 0.0, 1e8)

    def test_latent_nonnegative(self):
        with pytest.raises(PhysicsError):
            PhaseModel(0.0, 1.0, -1.0)
