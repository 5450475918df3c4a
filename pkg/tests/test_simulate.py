from __future__ import annotations

import math

import numpy as np
import pytest

from thermorun import model, simulate, steady
from thermorun.errors import ValidationError
from thermorun.model import ModelParams
from thermorun.simulate import Trajectory


def linear_params(u_a=0.0379):
    return ModelParams(f=1.7, ell=700.0, eps=10.0, u_a=u_a, sigma=0.0)


class TestIntegrate:
    def test_linear_decay_to_equilibrium(self):
        # With the reaction off both variables relax at known linear rates.
        p = linear_params()
        tau_end = 50.0 / min(p.f, p.f + p.ell / p.eps)
        traj = simulate.integrate(p, (0.5, p.u_a + 0.01), tau_end,
                                  tol_rel=1e-10, tol_abs=1e-13)
        end = traj.final_state()
        assert abs(end.x - 1.0) < 1e-8
        assert abs(end.u - p.u_a) < 1e-8

    def test_runaway_from_full_charge(self, mic):
        p = mic.model
        traj = simulate.integrate(p, (1.0, p.u_a), 50.0)
        boil = [e for e in traj.events if e.kind == "boil"]
        assert boil, "expected the boiling threshold to be crossed"
        assert boil[0].time < 50.0
        assert boil[0].u == pytest.approx(p.u_boil, abs=1e-12)
        assert traj.times[-1] == pytest.approx(boil[0].time)

    def test_invariant_box(self, mic, rng):
        # Trajectories started inside the box stay there until boiling halts
        # them; the sides x = 0, x = 1 and u = u_a are forward-invariant.
        p = mic.model
        for _ in range(100):
            s0 = (float(rng.uniform(0, 1)),
                  float(rng.uniform(p.u_a, p.u_boil * 1.5)))
            traj = simulate.integrate(p, s0, 20.0, tol_rel=1e-9, tol_abs=1e-12)
            assert np.all(traj.xs >= -1e-9)
            assert np.all(traj.xs <= 1 + 1e-9)
            assert np.all(traj.us >= p.u_a - 1e-9)

    def test_validation(self, mic):
        with pytest.raises(ValidationError):
            simulate.integrate(mic.model, (1.0, 0.04), -1.0)
        with pytest.raises(ValidationError):
            simulate.integrate(mic.model, (1.0, 0.04), 1.0, tol_rel=-1e-8)

    def test_autonomy(self, mic):
        # Restarting from a mid-trajectory state reproduces the later state.
        ts = mic.temp_scale
        p = mic.model.with_(u_a=286.0 / ts)
        full = simulate.integrate(p, (0.6, p.u_a + 0.001), 10.0,
                                  tol_rel=1e-11, tol_abs=1e-13,
                                  events=[], n_samples=2001)
        i_mid = 1000
        t_mid = float(full.times[i_mid])
        s_mid = (float(full.xs[i_mid]), float(full.us[i_mid]))
        rest = simulate.integrate(p, s_mid, 10.0 - t_mid,
                                  tol_rel=1e-11, tol_abs=1e-13,
                                  events=[], n_samples=11)
        end_full = full.final_state()
        end_rest = rest.final_state()
        assert abs(end_full.x - end_rest.x) < 1e-7
        assert abs(end_full.u - end_rest.u) < 1e-7

    def test_tolerance_halving_convergence(self, mic):
        ts = mic.temp_scale
        p = mic.model.with_(u_a=286.0 / ts)
        s0 = (0.6, p.u_a + 0.001)
        tol = 1e-8
        a = simulate.integrate(p, s0, 5.0, tol_rel=tol, tol_abs=tol * 1e-2,
                               events=[]).final_state()
        b = simulate.integrate(p, s0, 5.0, tol_rel=tol / 2,
                               tol_abs=tol * 1e-2 / 2, events=[]).final_state()
        assert abs(a.x - b.x) < 10 * tol / 2
        assert abs(a.u - b.u) < 10 * tol / 2


class TestDetectRunaway:
    def test_constant_below_threshold(self):
        times = np.linspace(0, 1, 11)
        states = np.column_stack([np.full(11, 0.5), np.full(11, 0.03)])
        traj = Trajectory(times, states)
        assert simulate.detect_runaway(traj, 0.04) is None

    def test_monotone_ramp_crossing(self):
        times = np.linspace(0.0, 1.0, 101)
        us = 0.03 + 0.02 * times  # crosses 0.04 at tau = 0.5 exactly
        states = np.column_stack([np.full_like(times, 0.5), us])
        traj = Trajectory(times, states)
        ev = simulate.detect_runaway(traj, 0.04)
        assert ev is not None
        assert abs(ev.time - 0.5) < 1e-10

    def test_matches_halting_event(self, mic):
        p = mic.model
        traj = simulate.integrate(p, (1.0, p.u_a), 50.0)
        ev = simulate.detect_runaway(traj, p.u_boil)
        assert ev is not None
        assert ev.time == traj.events[0].time


class TestSettle:
    def test_steady_matches_newton(self, mic):
        ts = mic.temp_scale
        p = mic.model.with_(u_a=286.0 / ts)
        pt = steady.solve_steady(p, (0.5, p.u_a + 0.001))
        rep = simulate.settle(p, (pt.state.x - 0.05, pt.state.u + 0.0005),
                              horizon=300.0)
        assert rep.kind == "steady"
        assert abs(rep.terminal_state.x - pt.state.x) < 1e-8
        assert abs(rep.terminal_state.u - pt.state.u) < 1e-8
        assert rep.amplitude == 0.0 and rep.period is None

    def test_reaction_off_settles_at_ambient(self):
        p = linear_params()
        rep = simulate.settle(p, (0.5, p.u_a + 0.002), horizon=150.0)
        assert rep.kind == "steady"
        assert abs(rep.terminal_state.x - 1.0) < 1e-9
        assert abs(rep.terminal_state.u - p.u_a) < 1e-9

    def test_runaway_classification(self, mic):
        rep = simulate.settle(mic.model, (1.0, mic.model.u_a), horizon=100.0)
        assert rep.kind == "runaway"
        assert rep.period is None

    def test_cycle_detection_and_section_independence(self, mic):
        ts = mic.temp_scale
        p = mic.model.with_(u_a=290.15 / ts * 1.0002, u_boil=math.inf)
        rep = simulate.settle(p, (1.0, p.u_a), horizon=130.0)
        assert rep.kind == "cycle"
        assert rep.period is not None and rep.period > 0
        assert rep.amplitude is not None and rep.amplitude > 0.01
        for frac in (0.2, 0.8):
            alt = simulate.settle(p, (1.0, p.u_a), horizon=130.0,
                                  section_level=p.u_a + frac * rep.amplitude)
            assert alt.kind == "cycle"
            assert abs(alt.period - rep.period) / rep.period < 1e-6

    def test_horizon_precondition(self, mic):
        with pytest.raises(ValidationError):
            simulate.settle(mic.model, (1.0, mic.model.u_a), horizon=1.0)
