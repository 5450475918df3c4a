from __future__ import annotations

import math

import numpy as np
import pytest

from thermorun import cycles, model, simulate, steady
from thermorun.cycles import CycleSeed, find_cycle, floquet, hopf_germ
from thermorun.errors import GermError


@pytest.fixture(scope="module")
def settled_cycle(mic, mic_h1):
    ts = mic.temp_scale
    p = mic.model.with_(u_a=mic_h1.param_value * 1.0002, u_boil=math.inf)
    rep = simulate.settle(p, (1.0, p.u_a), horizon=130.0)
    assert rep.kind == "cycle"
    return p, rep


class TestFindCycle:
    def test_matches_settled_cycle(self, settled_cycle):
        p, rep = settled_cycle
        seed = cycles.seed_from_simulation(
            p, (rep.terminal_state.x, rep.terminal_state.u), rep.period)
        orbit = find_cycle(p, seed, m=12)
        assert abs(orbit.period - rep.period) / rep.period < 1e-6
        assert abs(orbit.amplitude - rep.amplitude) < 1e-4
        assert orbit.residual < 1e-9
        assert orbit.stability == "stable"
        assert len(orbit.mesh) >= 200

    def test_trivial_multiplier_near_unity(self, settled_cycle):
        p, rep = settled_cycle
        seed = cycles.seed_from_simulation(
            p, (rep.terminal_state.x, rep.terminal_state.u), rep.period)
        orbit = find_cycle(p, seed, m=12)
        assert abs(orbit.multipliers[0] - 1.0) < 1e-4

    def test_degenerate_seed_rejected(self, mic):
        p = mic.model.with_(u_boil=math.inf)
        flat = CycleSeed(np.linspace(0, 1, 16, endpoint=False),
                         np.tile([0.5, 0.04], (16, 1)), 1.0)
        with pytest.raises(GermError):
            find_cycle(p, flat, m=12)

    def test_germ_amplitude_square_root_law(self, mic, mic_h1):
        # Orbit amplitude near the onset follows amp ~ sqrt(offset): the
        # log-log slope over two decades must be 1/2.
        p = mic.model
        deltas = np.geomspace(1e-8, 1e-6, 7)
        amps = []
        for d in deltas:
            p_off, seed = hopf_germ(p, mic_h1, float(d))
            orbit = find_cycle(p_off, seed, m=12)
            amps.append(orbit.amplitude)
        slope = np.polyfit(np.log(deltas), np.log(amps), 1)[0]
        assert slope == pytest.approx(0.5, abs=0.05)


class TestFloquet:
    def test_unstable_near_onset(self, mic, mic_h1):
        p_off, seed = hopf_germ(mic.model, mic_h1, 1e-7)
        orbit = find_cycle(p_off, seed, m=12)
        assert orbit.stability == "unstable"
        assert orbit.nontrivial_multiplier > 1.0
        assert abs(orbit.multipliers[0] - 1.0) < 1e-4

    def test_stable_cycle_contracts(self, settled_cycle):
        p, rep = settled_cycle
        seed = cycles.seed_from_simulation(
            p, (rep.terminal_state.x, rep.terminal_state.u), rep.period)
        orbit = find_cycle(p, seed, m=12)
        mults, defect = floquet(p, orbit)
        assert abs(mults[1]) < 1.0
        assert defect < 1e-6

    def test_liouville_identity_along_branch(self, mic_cycle_branch):
        for orbit in mic_cycle_branch.orbits:
            assert orbit.liouville_defect < 1e-6
            assert abs(orbit.multipliers[0] - 1.0) < 1e-4


class TestCycleBranch:
    def test_emerges_toward_lower_ambient_unstable(self, mic_h1,
                                                   mic_cycle_branch):
        first = mic_cycle_branch.orbits[:5]
        assert all(o.stability == "unstable" for o in first)
        assert all(o.param_value < mic_h1.param_value for o in first)
        deltas = np.diff([o.param_value for o in first])
        assert np.all(deltas < 0)

    def test_cycle_fold_flips_stability(self, mic_cycle_branch):
        cb = mic_cycle_branch
        assert cb.cycle_folds, "expected a turning point of the cycle branch"
        flips = [i for i in range(len(cb.orbits) - 1)
                 if cb.orbits[i].stability != cb.orbits[i + 1].stability]
        assert len(flips) == 1
        i = flips[0]
        lo = min(cb.orbits[i].param_value, cb.orbits[i + 1].param_value)
        hi = max(cb.orbits[i].param_value, cb.orbits[i + 1].param_value)
        assert lo - 1e-6 <= cb.cycle_folds[0] <= hi + 1e-6
        assert cb.orbits[i].stability == "unstable"
        assert cb.orbits[i + 1].stability == "stable"

    def test_fold_below_onset(self, mic_h1, mic_cycle_branch):
        assert mic_cycle_branch.cycle_folds[0] < mic_h1.param_value

    def test_residuals_and_amplitudes(self, mic_cycle_branch):
        for o in mic_cycle_branch.orbits:
            assert o.residual < 1e-9
            assert o.amplitude > 0

    def test_stable_amplitudes_match_simulation(self, mic, mic_h1,
                                                mic_cycle_branch):
        p = mic.model.with_(u_boil=math.inf)
        stable = [o for o in mic_cycle_branch.orbits
                  if o.stability == "stable"
                  and o.param_value > mic_h1.param_value + 1e-5]
        assert len(stable) >= 3
        idx = np.linspace(0, len(stable) - 1, 3).astype(int)
        for i in idx:
            o = stable[i]
            q = p.with_(u_a=o.param_value)
            rep = simulate.settle(q, (1.0, q.u_a), horizon=130.0)
            assert rep.kind == "cycle"
            assert abs(rep.amplitude - o.amplitude) < 1e-3

    def test_bistability_window(self, mic, mic_h1, mic_cycle_branch):
        # Between the cycle fold and the onset, the steady state and the
        # large cycle coexist, separated by the unstable small cycle.
        cb = mic_cycle_branch
        fold = cb.cycle_folds[0]
        target = 0.5 * (fold + mic_h1.param_value)
        p = mic.model.with_(u_a=target, u_boil=math.inf)
        pt = steady.solve_steady(p, (mic_h1.state.x, mic_h1.state.u))
        assert pt.stability == steady.STABLE
        unstable_amp = min(
            (o for o in cb.orbits if o.stability == "unstable"),
            key=lambda o: abs(o.param_value - target)).amplitude
        # The midpoint steady is weakly damped; the inside run needs a
        # longer (cheap, near-steady) horizon to meet the 1e-9 criterion.
        inside = simulate.settle(
            p, (pt.state.x, pt.state.u + 0.2 * unstable_amp), horizon=400.0)
        outside = simulate.settle(
            p, (pt.state.x, pt.state.u + 3.0 * unstable_amp), horizon=130.0)
        assert inside.kind == "steady"
        assert outside.kind == "cycle"
        assert inside.kind != outside.kind
