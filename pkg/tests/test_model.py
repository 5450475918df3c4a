from __future__ import annotations

import math

import numpy as np
import pytest

from thermorun import model
from thermorun.errors import CalibrationError, DomainError, ValidationError
from thermorun.model import ModelParams, R_GAS, State
from thermorun.solvers import bisect_root

E_MIC = 64000.0


def u_of_kelvin(T: float) -> float:
    return R_GAS * T / E_MIC


class TestValidation:
    def test_dimensional_invariants_name_the_field(self):
        good = dict(V=1.0, F=0.1, c_f=100.0, Cbar=1e6, dH=-5e4, L=10.0,
                    T_a=290.0, A=1e12, E=6e4)
        for field, bad in [("V", 0.0), ("c_f", -1.0), ("dH", 1.0), ("T_a", -5.0)]:
            with pytest.raises(ValidationError) as err:
                model.DimensionalParams(**{**good, field: bad})
            assert err.value.field == field

    def test_model_params_invariants(self):
        with pytest.raises(ValidationError):
            ModelParams(f=0.0, ell=1.0, eps=1.0, u_a=0.03)
        with pytest.raises(ValidationError):
            ModelParams(f=1.0, ell=1.0, eps=1.0, u_a=0.03, u_boil=0.02)
        # sigma = 0 is the admissible reaction-off case
        ModelParams(f=1.0, ell=1.0, eps=1.0, u_a=0.03, sigma=0.0)

    def test_state_bounds(self):
        with pytest.raises(ValidationError):
            State(-0.1, 0.03)
        with pytest.raises(ValidationError):
            State(1.1, 0.03)
        with pytest.raises(ValidationError):
            State(0.5, 0.0)


class TestScaling:
    def test_ambient_scaling_292K(self):
        # 292 K at the tabulated activation energy maps to 0.0379.
        assert u_of_kelvin(292.0) == pytest.approx(0.0379, abs=1e-4)

    def test_boiling_scaling_312K(self):
        assert u_of_kelvin(312.0) == pytest.approx(0.04053, abs=3e-4)

    def test_round_trip_temperature(self):
        for T in (250.0, 292.0, 312.0, 405.0):
            u = u_of_kelvin(T)
            back = u * E_MIC / R_GAS
            assert abs(back - T) / T < 1e-9

    def test_eps_from_tabulated_thermochemistry(self):
        # Back out c_f from eps = 10, then forward-check the definition.
        Cbar = 1188.0 * 959.9
        dH = 65100.0
        c_f = Cbar * E_MIC / (10.0 * dH * R_GAS)
        eps = Cbar * E_MIC / (c_f * dH * R_GAS)
        assert eps == pytest.approx(10.0, abs=0.1)
        assert c_f == pytest.approx(1.349e4, rel=2e-3)

    def test_nondimensionalize_matches_definitions(self, mic):
        dim = mic.dim
        p = model.nondimensionalize(dim, boiling_temperature=312.0)
        assert p.f == pytest.approx(dim.F / (dim.V * dim.A), rel=1e-12)
        assert p.u_a == pytest.approx(R_GAS * dim.T_a / dim.E, rel=1e-12)
        assert p.eps == pytest.approx(10.0, rel=1e-9)
        assert p.ell == pytest.approx(700.0, rel=1e-9)

    def test_dimensionalize_examples(self, mic):
        dim = mic.dim
        assert mic.model.u_a == pytest.approx(0.0379, abs=1e-4)
        c, T = model.dimensionalize(mic.model, (1.0, mic.model.u_a), dim)
        assert c == pytest.approx(dim.c_f, rel=1e-12)
        assert 291.8 <= T <= 292.2
        _, T_boil = model.dimensionalize(mic.model, (0.5, 0.04053), dim)
        assert T_boil == pytest.approx(312.0, abs=0.3)

    def test_round_trip_concentration_temperature(self, mic, rng):
        dim = mic.dim
        for _ in range(50):
            c = rng.uniform(1.0, dim.c_f)
            T = rng.uniform(250.0, 400.0)
            s = (c / dim.c_f, R_GAS * T / dim.E)
            c2, T2 = model.dimensionalize(mic.model, s, dim)
            assert abs(c2 - c) / c < 1e-9
            assert abs(T2 - T) / T < 1e-9


class TestVectorField:
    def test_no_reaction_equilibrium(self):
        p = ModelParams(f=1.7, ell=700.0, eps=10.0, u_a=0.0379, sigma=0.0)
        dx, du = model.vector_field(p, (1.0, p.u_a))
        assert dx == 0.0 and du == 0.0

    def test_inflow_only_at_zero_concentration(self):
        p = ModelParams(f=1.7, ell=700.0, eps=10.0, u_a=0.0379, sigma=0.0)
        dx, _ = model.vector_field(p, (0.0, 0.05))
        assert dx == pytest.approx(p.f)

    def test_near_reduced_root(self, mic):
        p = mic.model
        h = lambda u: float(model.reduced_balance(p, u))
        root = bisect_root(h, p.u_a + 1e-6, p.u_a + p.f / p.loss)
        x = float(model.quasi_steady_x(p, root))
        dx, du = model.vector_field(p, (x, root + 1e-5))
        assert abs(dx) < 0.05 and abs(du) < 0.05

    def test_domain_error(self, mic):
        with pytest.raises(DomainError):
            model.vector_field(mic.model, (0.5, -0.01))


class TestJacobian:
    def test_sigma_zero_diagonal(self):
        p = ModelParams(f=1.7, ell=700.0, eps=10.0, u_a=0.0379, sigma=0.0)
        J = model.jacobian(p, (0.3, 0.05))
        expect = np.diag([-p.f, -(p.f + p.ell / p.eps)])
        assert np.allclose(J, expect, rtol=0, atol=1e-15)

    def test_matches_finite_differences(self, rng):
        # Relative to the Jacobian scale; near-zero entries otherwise drown
        # in roundoff of the O(1) differences.
        worst = 0.0
        for _ in range(1000):
            p = ModelParams(f=float(rng.uniform(0.1, 5)),
                            ell=float(rng.uniform(1, 1000)),
                            eps=float(rng.uniform(1, 30)),
                            u_a=float(rng.uniform(0.02, 0.06)),
                            sigma=float(np.exp(rng.uniform(0, 30))))
            s = (float(rng.uniform(0, 1)), float(rng.uniform(0.02, 0.2)))
            J = model.jacobian(p, s)
            step = 1e-6
            fd = np.empty((2, 2))
            for j in range(2):
                sp = list(s)
                sm = list(s)
                sp[j] += step
                sm[j] -= step
                fd[:, j] = (np.array(model.vector_field(p, sp))
                            - np.array(model.vector_field(p, sm))) / (2 * step)
            rel = float(np.max(np.abs(J - fd)) / max(1.0, np.max(np.abs(J))))
            worst = max(worst, rel)
        assert worst < 1e-6

    def test_second_third_derivatives_match_fd(self, mic, rng):
        p = mic.model
        for _ in range(20):
            s = (float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.035, 0.06)))
            B = model.second_derivatives(p, s)
            h = 1e-5
            for j in range(2):
                sp, sm = list(s), list(s)
                sp[j] += h
                sm[j] -= h
                fd = (model.jacobian(p, sp) - model.jacobian(p, sm)) / (2 * h)
                scale = max(1.0, float(np.max(np.abs(B[:, :, j]))))
                assert np.max(np.abs(B[:, :, j] - fd)) / scale < 1e-4

    def test_stable_below_onset(self, mic):
        ts = mic.temp_scale
        p = mic.model.with_(u_a=286.0 / ts)
        h = lambda u: float(model.reduced_balance(p, u))
        root = bisect_root(h, p.u_a + 1e-9, p.u_a + p.f / p.loss)
        x = float(model.quasi_steady_x(p, root))
        tr, det = model.trace_det(p, (x, root))
        assert tr < 0 and det > 0


class TestRateDiagram:
    def test_loss_vanishes_at_ambient(self, mic):
        p = mic.model
        d = model.rate_diagram(p, p.u_a - 0.001, p.u_a + 0.003, 4001)
        i = int(np.argmin(np.abs(d.u_grid - p.u_a)))
        assert abs(d.r_l[i]) < 1e-10

    def test_generation_saturates_at_f(self):
        p = ModelParams(f=1.7, ell=700.0, eps=10.0, u_a=0.0379, sigma=1e12)
        d = model.rate_diagram(p, 5.0, 10.0, 11)  # rho >> f
        assert np.all(np.abs(d.r_g - p.f) < 1e-9)

    def test_single_crossing_near_reported_steady(self, mic):
        p, ts = mic.model, mic.temp_scale
        d = model.rate_diagram(p, 295.0 / ts, 320.0 / ts, 20001)
        crossings = model.rate_crossings(d)
        assert len(crossings) == 1
        assert 300.0 <= crossings[0] * ts <= 308.0

    def test_crossings_match_reduced_roots(self, mic):
        p, ts = mic.model, mic.temp_scale
        lo, hi = 285.0 / ts, 320.0 / ts
        n = 5001
        d = model.rate_diagram(p, lo, hi, n)
        crossings = model.rate_crossings(d)
        grid_step = (hi - lo) / (n - 1)
        h = lambda u: float(model.reduced_balance(p, u))
        for c in crossings:
            root = bisect_root(h, c - grid_step, c + grid_step)
            assert abs(root - c) <= grid_step

    def test_validation(self, mic):
        with pytest.raises(ValidationError):
            model.rate_diagram(mic.model, 0.05, 0.04, 100)


class TestCalibration:
    def test_sigma_magnitude(self, mic):
        # The reduced two-condition system puts the prefactor near e^26.7.
        ratio = mic.model.sigma / math.exp(26.7)
        assert 1.0 / 3.0 < ratio < 3.0

    def test_uncalibrated_model_is_inert(self, mic):
        p = mic.model.with_(sigma=1.0)
        h = lambda u: float(model.reduced_balance(p, u))
        root = bisect_root(h, p.u_a * (1 - 1e-9), p.u_a + p.f / p.loss)
        assert abs(root - p.u_a) < 1e-9
        # No oscillatory onset anywhere near the operating window: the
        # steady-state trace stays negative.
        ts = mic.temp_scale
        for T in np.linspace(282.0, 296.0, 30):
            q = p.with_(u_a=T / ts)
            r = bisect_root(lambda u: float(model.reduced_balance(q, u)),
                            q.u_a * (1 - 1e-9), q.u_a + q.f / q.loss)
            tr, _ = model.trace_det(q, (model.quasi_steady_x(q, r), r))
            assert tr < 0

    def test_degenerate_target_rejected(self, mic):
        with pytest.raises(ValidationError):
            model.calibrate_sigma(mic.model.with_(sigma=1.0), 292.0, 290.15,
                                  temp_scale=mic.temp_scale)

    def test_unreachable_target_raises(self, mic):
        with pytest.raises(CalibrationError):
            model.calibrate_sigma(mic.model.with_(sigma=1.0), 600.0, 10.0,
                                  temp_scale=mic.temp_scale)


class TestPresets:
    def test_mic_caption_values(self, mic):
        assert mic.model.eps == pytest.approx(10.0, rel=1e-9)
        assert mic.model.ell == pytest.approx(700.0, rel=1e-9)
        assert mic.model.f == pytest.approx(1.7, rel=1e-12)

    def test_cumene_caption_values(self):
        pre = model.preset("cumene-hydroperoxide")
        assert pre.model.eps == pytest.approx(20.0)
        assert pre.model.ell == pytest.approx(700.0)
        assert pre.dim is None
        assert "sigma" in pre.placeholders

    def test_boil_to_ambient_ratio(self, mic):
        assert mic.model.u_boil / mic.model.u_a == pytest.approx(312.0 / 292.0,
                                                                 abs=1e-3)

    def test_unknown_name_lists_valid(self):
        with pytest.raises(ValidationError) as err:
            model.preset("nope")
        assert "mic-tank610" in str(err.value)
        assert "cumene-hydroperoxide" in str(err.value)

    def test_preset_config_round_trip(self, mic):
        cfg = mic.to_config()
        p = ModelParams(**cfg["params"])
        assert p == mic.model
