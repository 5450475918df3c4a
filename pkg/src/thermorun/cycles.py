"""Limit cycles: multiple shooting, Floquet stability, cycle continuation.

Periodic orbits are solved as a multiple-shooting boundary-value problem
(segment states plus the period as unknowns, phase pinned by an integral
condition against the seed) with the segment flows, transition matrices and
parameter sensitivities obtained from one stacked variational integration
per Newton iteration.  Floquet multipliers come from the monodromy matrix
accumulated in chunks around the orbit, with the determinant identity
against exp(integral of the Jacobian trace) kept as a consistency defect.
The cycle branch emerging from a Hopf point is traced by pseudo-arclength
continuation in (orbit, period, parameter); cycle folds are flagged by a
reversal of the parameter tangent and refined by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import block_diag

from . import model
from .errors import ConvergenceError, GermError, NotAHopfError
from .model import ModelParams
from .steady import SpecialPoint, solve_steady

CYCLE_TOL = 1e-9
TRIVIAL_MULT_TOL = 1e-4
LIOUVILLE_TOL = 1e-6
FOLD_PARAM_TOL = 1e-8
SHOOT_RTOL = 1e-11
SHOOT_ATOL = 1e-13
MESH_SAMPLES = 256


@dataclass(frozen=True)
class CycleSeed:
    """A sampled approximation of one period, used to start the BVP solve."""

    times: np.ndarray   # ascending, spanning [0, period]
    states: np.ndarray  # shape (k, 2)
    period: float

    def segment_starts(self, m: int) -> np.ndarray:
        ts = np.linspace(0.0, self.period, m, endpoint=False)
        frac = np.mod(self.times, self.period * (1 + 1e-15))
        order = np.argsort(frac)
        xs = np.interp(ts, frac[order], self.states[order, 0],
                       period=self.period)
        us = np.interp(ts, frac[order], self.states[order, 1],
                       period=self.period)
        return np.column_stack([xs, us])


@dataclass(frozen=True)
class Orbit:
    """A converged periodic orbit with Floquet data."""

    param_name: str
    param_value: float
    period: float
    mesh_times: np.ndarray
    mesh: np.ndarray            # shape (k, 2), k >= 200
    multipliers: tuple[float, float]   # (trivial, nontrivial)
    stability: str              # "stable" | "unstable"
    residual: float
    liouville_defect: float
    amplitude: float
    min_u: float
    max_u: float
    segments: int

    @property
    def nontrivial_multiplier(self) -> float:
        return self.multipliers[1]


@dataclass(frozen=True)
class CycleBranch:
    """A continued family of periodic orbits with its turning points."""

    param_name: str
    orbits: tuple[Orbit, ...]
    cycle_folds: tuple[float, ...]
    stop_reason: str

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([o.amplitude for o in self.orbits])


# ---------------------------------------------------------------------------
# Stacked segment integration


def _stacked_rhs(p: ModelParams, m: int, h: float, param: str | None):
    """RHS of the stacked segment system on the unit interval.

    Per-segment layout: y (2), flattened transition matrix M (4) and, when
    ``param`` is set, the parameter sensitivity zeta (2).
    """
    width = 8 if param else 6

    def rhs(s, Y):
        Z = Y.reshape(m, width)
        x, u = Z[:, 0], Z[:, 1]
        out = np.empty_like(Z)
        fx, fu = model._field_xu(p, x, u)
        out[:, 0] = h * fx
        out[:, 1] = h * fu
        J = model._jac_xu(p, x, u)                       # (m, 2, 2)
        Mm = Z[:, 2:6].reshape(m, 2, 2)
        out[:, 2:6] = (h * np.einsum("mij,mjk->mik", J, Mm)).reshape(m, 4)
        if param:
            zeta = Z[:, 6:8]
            b = model.param_derivative(p, x, u, param)   # (m, 2)
            out[:, 6:8] = h * (np.einsum("mij,mj->mi", J, zeta) + b)
        return out.ravel()

    return rhs, width


def _stacked_jac(p: ModelParams, m: int, h: float, param: str | None):
    width = 8 if param else 6

    def jac(s, Y):
        Z = Y.reshape(m, width)
        blocks = []
        for i in range(m):
            x, u = float(Z[i, 0]), float(Z[i, 1])
            J = model._jac_xu(p, x, u)
            B = model._hessian_xu(p, x, u)
            Mi = Z[i, 2:6].reshape(2, 2)
            blk = np.zeros((width, width))
            blk[0:2, 0:2] = h * J
            # d(J M)/dy via the Hessian tensor.
            dJM = np.einsum("jla,lk->jka", B, Mi)        # (2, 2, 2): j, k, a
            blk[2:6, 0:2] = h * dJM.reshape(4, 2)
            blk[2:6, 2:6] = h * np.kron(J, np.eye(2))
            if param:
                zeta = Z[i, 6:8]
                dJz = np.einsum("jla,l->ja", B, zeta)
                blk[6:8, 0:2] = h * (dJz + model.param_derivative_state_jac(p, x, u, param))
                blk[6:8, 6:8] = h * J
            blocks.append(blk)
        return block_diag(*blocks)

    return jac


def _shoot(p: ModelParams, starts: np.ndarray, T: float, param: str | None = None,
           rtol: float = SHOOT_RTOL, atol: float = SHOOT_ATOL, var: bool = True):
    """Flow all segments over T/m; return endpoints and variational data."""
    m = len(starts)
    h = T / m
    if not var:
        def rhs(s, Y):
            Z = Y.reshape(m, 2)
            fx, fu = model._field_xu(p, Z[:, 0], Z[:, 1])
            return (h * np.column_stack([fx, fu])).ravel()

        def jac(s, Y):
            Z = Y.reshape(m, 2)
            return block_diag(*(h * model._jac_xu(p, Z[:, 0], Z[:, 1])))

        sol = solve_ivp(rhs, (0.0, 1.0), starts.ravel(), method="LSODA",
                        rtol=rtol, atol=atol, jac=jac)
        if not sol.success:
            raise ConvergenceError(f"segment integration failed: {sol.message}")
        return sol.y[:, -1].reshape(m, 2), None, None

    rhs, width = _stacked_rhs(p, m, h, param)
    jac = _stacked_jac(p, m, h, param)
    Y0 = np.zeros((m, width))
    Y0[:, 0:2] = starts
    Y0[:, 2] = 1.0
    Y0[:, 5] = 1.0
    sol = solve_ivp(rhs, (0.0, 1.0), Y0.ravel(), method="LSODA",
                    rtol=rtol, atol=atol, jac=jac)
    if not sol.success:
        raise ConvergenceError(f"variational integration failed: {sol.message}")
    Z = sol.y[:, -1].reshape(m, width)
    ends = Z[:, 0:2].copy()
    Ms = Z[:, 2:6].reshape(m, 2, 2).copy()
    zetas = Z[:, 6:8].copy() if param else None
    return ends, Ms, zetas


def _residual(p: ModelParams, starts: np.ndarray, T: float, ends: np.ndarray,
              ref_states: np.ndarray, ref_fields: np.ndarray) -> np.ndarray:
    m = len(starts)
    R = np.empty(2 * m + 1)
    for i in range(m):
        R[2 * i:2 * i + 2] = ends[i] - starts[(i + 1) % m]
    R[2 * m] = float(np.sum((starts - ref_states) * ref_fields))
    return R


def _bvp_jacobian(p: ModelParams, starts: np.ndarray, T: float,
                  ends: np.ndarray, Ms: np.ndarray, zetas: np.ndarray | None,
                  ref_fields: np.ndarray) -> np.ndarray:
    """Jacobian of (matching, phase) w.r.t. (segment states, period[, param])."""
    m = len(starts)
    ncols = 2 * m + 1 + (1 if zetas is not None else 0)
    J = np.zeros((2 * m + 1, ncols))
    for i in range(m):
        r = slice(2 * i, 2 * i + 2)
        J[r, 2 * i:2 * i + 2] = Ms[i]
        j = (i + 1) % m
        J[r, 2 * j:2 * j + 2] -= np.eye(2)
        fx, fu = model._field_xu(p, ends[i, 0], ends[i, 1])
        J[r, 2 * m] = np.array([fx, fu]) / m
        if zetas is not None:
            J[r, 2 * m + 1] = zetas[i]
    J[2 * m, 0:2 * m] = ref_fields.ravel()
    return J


def _fields_at(p: ModelParams, states: np.ndarray) -> np.ndarray:
    fx, fu = model._field_xu(p, states[:, 0], states[:, 1])
    return np.column_stack([fx, fu])


def _newton_cycle(p: ModelParams, starts: np.ndarray, T: float,
                  ref_states: np.ndarray, ref_fields: np.ndarray,
                  tol: float = CYCLE_TOL, max_iter: int = 25,
                  rtol: float = SHOOT_RTOL, atol: float = SHOOT_ATOL):
    """Newton on the fixed-parameter shooting system; returns (starts, T, res)."""
    m = len(starts)
    starts = starts.copy()
    norm = np.inf
    for _ in range(max_iter):
        ends, Ms, _ = _shoot(p, starts, T, rtol=rtol, atol=atol)
        R = _residual(p, starts, T, ends, ref_states, ref_fields)
        norm = float(np.max(np.abs(R)))
        if norm < tol:
            return starts, T, norm
        J = _bvp_jacobian(p, starts, T, ends, Ms, None, ref_fields)
        try:
            step = np.linalg.solve(J, -R)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular shooting Jacobian: {exc}",
                                   residual=norm) from None
        lam = 1.0
        for _ in range(12):
            s_new = starts + lam * step[:2 * m].reshape(m, 2)
            T_new = T + lam * step[2 * m]
            if T_new > 0:
                ends_new, _, _ = _shoot(p, s_new, T_new, var=False,
                                        rtol=rtol, atol=atol)
                R_new = _residual(p, s_new, T_new, ends_new, ref_states, ref_fields)
                if float(np.max(np.abs(R_new))) < norm:
                    break
            lam *= 0.5
        else:
            raise ConvergenceError("cycle Newton line search stalled", residual=norm)
        starts, T = s_new, T_new
    raise ConvergenceError(f"cycle Newton did not reach {tol:g}", residual=norm)


# ---------------------------------------------------------------------------
# Floquet analysis and orbit finalization


def _stable_multipliers(tr: float, det: float) -> tuple[float, float]:
    """Eigenvalues of a real 2x2 via the numerically stable quadratic form."""
    disc = tr * tr - 4.0 * det
    if disc < 0:
        # Planar monodromy has real spectrum; tiny negatives are roundoff.
        disc = 0.0
    root = math.sqrt(disc)
    lam1 = (tr + root) / 2 if tr >= 0 else (tr - root) / 2
    lam2 = det / lam1 if lam1 != 0 else 0.0
    return lam1, lam2


LEG_TRACE_BUDGET = 12.0
"""Renormalize the variational flow whenever int |trace J| grows this much,
so every leg's transition-matrix determinant stays well-conditioned."""


def floquet(p: ModelParams, orbit_or_state, period: float | None = None,
            rtol: float = SHOOT_RTOL, atol: float = SHOOT_ATOL,
            ) -> tuple[tuple[float, float], float]:
    """Floquet multipliers of a periodic orbit and the Liouville defect.

    Integrates the variational equations around the orbit, restarting from
    the identity whenever the accumulated |trace| budget is exhausted
    (strongly contracting relaxation orbits would otherwise lose the tiny
    determinant to cancellation).  The monodromy matrix is the ordered
    product of the legs, its determinant the product of well-conditioned leg
    determinants.  The defect reported is the relative mismatch between that
    determinant and exp(integral of trace J), an identity in exact
    arithmetic.  Returns ((trivial, nontrivial), defect), trivial being the
    multiplier closest to unity.
    """
    if isinstance(orbit_or_state, Orbit):
        y0 = orbit_or_state.mesh[0]
        period = orbit_or_state.period
    else:
        y0 = np.asarray(orbit_or_state, dtype=float)
        if period is None:
            raise ValueError("period required when passing a bare state")

    # State layout: y (2), M (4), q = int trace, qa = int |trace|.
    def rhs(t, Y):
        x, u = Y[0], Y[1]
        fx, fu = model._field_xu(p, x, u)
        J = model._jac_xu(p, x, u)
        tr = J[0, 0] + J[1, 1]
        Mdot = J @ Y[2:6].reshape(2, 2)
        return np.concatenate([[fx, fu], Mdot.ravel(), [tr, abs(tr)]])

    def jac(t, Y):
        x, u = float(Y[0]), float(Y[1])
        J = model._jac_xu(p, x, u)
        B = model._hessian_xu(p, x, u)
        M = Y[2:6].reshape(2, 2)
        out = np.zeros((8, 8))
        out[0:2, 0:2] = J
        out[2:6, 0:2] = np.einsum("jla,lk->jka", B, M).reshape(4, 2)
        out[2:6, 2:6] = np.kron(J, np.eye(2))
        dtr = B[0, 0, :] + B[1, 1, :]
        out[6, 0:2] = dtr
        tr = J[0, 0] + J[1, 1]
        out[7, 0:2] = math.copysign(1.0, tr) * dtr
        return out

    def budget(t, Y):
        return Y[7] - LEG_TRACE_BUDGET

    budget.direction = 1
    budget.terminal = True

    Mtot = np.eye(2)
    log_det = 0.0
    det_sign = 1.0
    q_total = 0.0
    y = y0.copy()
    t_done = 0.0
    for _ in range(10000):
        Y0 = np.concatenate([y, np.eye(2).ravel(), [0.0, 0.0]])
        sol = solve_ivp(rhs, (0.0, period - t_done), Y0, method="LSODA",
                        rtol=rtol, atol=atol, jac=jac, events=[budget])
        if not sol.success:
            raise ConvergenceError(f"variational integration failed: {sol.message}")
        Z = sol.y[:, -1]
        y = Z[0:2].copy()
        Mk = Z[2:6].reshape(2, 2)
        Mtot = Mk @ Mtot
        det_k = float(np.linalg.det(Mk))
        if det_k == 0.0:
            raise ConvergenceError("degenerate variational leg")
        det_sign *= math.copysign(1.0, det_k)
        log_det += math.log(abs(det_k))
        q_total += float(Z[6])
        t_done += float(sol.t[-1])
        if t_done >= period * (1 - 1e-14):
            break
    else:
        raise ConvergenceError("variational renormalization did not terminate")

    det_prod = det_sign * math.exp(log_det)
    defect = abs(math.expm1(log_det - q_total)) if det_sign > 0 else np.inf
    lam1, lam2 = _stable_multipliers(float(np.trace(Mtot)), det_prod)
    if abs(lam1 - 1.0) <= abs(lam2 - 1.0):
        trivial, nontrivial = lam1, lam2
    else:
        trivial, nontrivial = lam2, lam1
    return (trivial, nontrivial), defect


def _finalize_orbit(p: ModelParams, starts: np.ndarray, T: float, res: float,
                    param_name: str, n_mesh: int = MESH_SAMPLES) -> Orbit:
    """Sample the orbit densely, extract extrema exactly, attach Floquet data."""
    mults, defect = floquet(p, starts[0], T)

    def rhs(t, y):
        return model._field_xu(p, y[0], y[1])

    def jac(t, y):
        return model._jac_xu(p, y[0], y[1])

    def du(t, y):
        return model._field_xu(p, y[0], y[1])[1]

    du.direction = 0
    du.terminal = False
    ts = np.linspace(0.0, T, n_mesh, endpoint=False)
    sol = solve_ivp(rhs, (0.0, T), starts[0], method="LSODA",
                    rtol=SHOOT_RTOL, atol=SHOOT_ATOL, jac=jac,
                    t_eval=ts, events=[du])
    if not sol.success:
        raise ConvergenceError(f"orbit sampling failed: {sol.message}")
    mesh = sol.y.T.copy()
    u_candidates = list(mesh[:, 1])
    if sol.y_events and len(sol.y_events[0]):
        u_candidates.extend(sol.y_events[0][:, 1])
    max_u = float(np.max(u_candidates))
    min_u = float(np.min(u_candidates))
    nontrivial = mults[1]
    return Orbit(
        param_name=param_name,
        param_value=float(getattr(p, param_name)),
        period=float(T),
        mesh_times=ts.copy(),
        mesh=mesh,
        multipliers=mults,
        stability="stable" if abs(nontrivial) < 1.0 else "unstable",
        residual=res,
        liouville_defect=defect,
        amplitude=max_u - min_u,
        min_u=min_u,
        max_u=max_u,
        segments=len(starts),
    )


# ---------------------------------------------------------------------------
# Seeds


def hopf_germ(p: ModelParams, hopf: SpecialPoint, delta: float,
              n_samples: int = 64) -> tuple[ModelParams, CycleSeed]:
    """Small-amplitude elliptic seed near a Hopf point, offset by ``delta``.

    The parameter offset is taken on the side where the normal form predicts
    a cycle (opposite the stable side for a subcritical point); the ellipse
    radius follows the square-root law from the first Lyapunov coefficient
    and the eigenvalue crossing speed.
    """
    if hopf.kind != "hopf":
        raise NotAHopfError("germ requires a hopf special point")
    if delta <= 0:
        raise GermError("germ offset must be positive")
    p = p.with_(u_boil=math.inf)
    from .steady import lyapunov_first_coeff, _complex_pair

    name = hopf.param_name
    p_h = p.with_(**{name: hopf.param_value})
    s_h = (hopf.state.x, hopf.state.u)
    omega = math.sqrt(hopf.det)
    l1 = hopf.l1 if hopf.l1 is not None else lyapunov_first_coeff(p_h, hopf)

    # Eigenvalue crossing speed d(Re lambda)/d(param) along the branch.
    dp = 1e-7 * max(abs(hopf.param_value), 1e-3)
    tr = {}
    for sgn in (+1, -1):
        q = p.with_(**{name: hopf.param_value + sgn * dp})
        pt = solve_steady(q, s_h, param_name=name)
        tr[sgn] = pt.trace
    re_lam_prime = (tr[+1] - tr[-1]) / (4 * dp)
    if re_lam_prime == 0:
        raise GermError("eigenvalues do not cross transversally")

    side = -math.copysign(1.0, re_lam_prime * l1)
    mu = re_lam_prime * side * delta
    r2 = -mu / (omega * l1)
    if r2 <= 0:
        raise GermError("normal form predicts no cycle on this side")
    r = math.sqrt(r2)
    if 2 * r < 1e-8:
        raise GermError(f"germ amplitude {2*r:.2e} below 1e-8")

    A = model.jacobian(p_h, s_h)
    qv, _ = _complex_pair(A, omega)
    period = 2 * math.pi / omega
    ts = np.linspace(0.0, period, n_samples, endpoint=False)
    z = r * np.exp(1j * omega * ts)
    states = np.array(s_h)[None, :] + 2 * np.real(z[:, None] * qv[None, :])
    p_off = p.with_(**{name: hopf.param_value + side * delta})
    return p_off, CycleSeed(ts, states, period)


def seed_from_simulation(p: ModelParams, state, period: float,
                         n_samples: int = 128) -> CycleSeed:
    """Sample one period of the flow from a settled point on a cycle."""
    x0, u0 = model._as_state(state)

    def rhs(t, y):
        return model._field_xu(p, y[0], y[1])

    def jac(t, y):
        return model._jac_xu(p, y[0], y[1])

    ts = np.linspace(0.0, period, n_samples, endpoint=False)
    sol = solve_ivp(rhs, (0.0, period), [x0, u0], method="LSODA",
                    rtol=1e-11, atol=1e-13, jac=jac, t_eval=ts)
    if not sol.success:
        raise ConvergenceError(f"seed sampling failed: {sol.message}")
    return CycleSeed(ts.copy(), sol.y.T.copy(), period)


# ---------------------------------------------------------------------------
# Public solves


def _solve_cycle_raw(p: ModelParams, seed: CycleSeed, m: int,
                     tol: float = CYCLE_TOL) -> tuple[np.ndarray, float, float]:
    """Correct a seed at fixed parameters; returns (segment starts, T, residual)."""
    starts = seed.segment_starts(m)
    spread = float(np.max(starts[:, 1]) - np.min(starts[:, 1]))
    if np.max(np.abs(starts - starts.mean(axis=0))) < 1e-8:
        raise GermError("seed amplitude below 1e-8")
    ref_states = starts.copy()
    ref_fields = _fields_at(p, starts)
    s, T, res = _newton_cycle(p, starts, seed.period, ref_states, ref_fields, tol=tol)
    if float(np.max(s[:, 1]) - np.min(s[:, 1])) < max(1e-8, 1e-6 * spread):
        raise GermError("corrected orbit collapsed to a steady state")
    return s, T, res


def _solve_cycle(p: ModelParams, seed: CycleSeed, m: int,
                 param_name: str = "u_a", tol: float = CYCLE_TOL) -> Orbit:
    s, T, res = _solve_cycle_raw(p, seed, m, tol)
    return _finalize_orbit(p, s, T, res, param_name)


def find_cycle(p: ModelParams, seed: CycleSeed | Orbit, m: int = 12,
               param_name: str = "u_a", tol: float = CYCLE_TOL,
               m_max: int = 96, period_rtol: float = 1e-8) -> Orbit:
    """Correct a seed into a periodic orbit by multiple shooting.

    The segment count doubles from ``m`` until the period is stable to
    ``period_rtol`` relative, so the returned orbit's discretization is
    self-validated.  Raises :class:`GermError` for degenerate seeds and
    :class:`ConvergenceError` when Newton fails (with the final residual).
    """
    if isinstance(seed, Orbit):
        seed = CycleSeed(seed.mesh_times, seed.mesh, seed.period)
    m = max(10, m)
    orbit = _solve_cycle(p, seed, m, param_name, tol)
    while 2 * orbit.segments <= m_max:
        finer = _solve_cycle(
            p, CycleSeed(orbit.mesh_times, orbit.mesh, orbit.period),
            2 * orbit.segments, param_name, tol)
        if abs(finer.period - orbit.period) <= period_rtol * orbit.period:
            return finer
        orbit = finer
    return orbit


# ---------------------------------------------------------------------------
# Cycle continuation


def _params_at(p0: ModelParams, active: str, alpha: float) -> ModelParams:
    from .errors import ValidationError
    try:
        return p0.with_(**{active: float(alpha)})
    except ValidationError as exc:
        raise ConvergenceError(f"trial parameter rejected: {exc}") from None


def _cycle_tangent(p: ModelParams, starts: np.ndarray, T: float, active: str,
                   ref_states: np.ndarray, ref_fields: np.ndarray,
                   scales: np.ndarray, prev: np.ndarray | None) -> np.ndarray:
    ends, Ms, zetas = _shoot(p, starts, T, param=active)
    J = _bvp_jacobian(p, starts, T, ends, Ms, zetas, ref_fields)
    n = J.shape[1]
    border = prev if prev is not None else np.eye(n)[-1]
    A = np.vstack([J, border])
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        t = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        _, _, vh = np.linalg.svd(J)
        t = vh[-1]
    t = t / scales
    t /= np.linalg.norm(t)
    if prev is not None and float(np.dot(t, prev)) < 0:
        t = -t
    return t


def _correct_cycle_arclength(p0: ModelParams, active: str, Y_pred: np.ndarray,
                             t_hat: np.ndarray, scales: np.ndarray,
                             ref_states: np.ndarray, ref_fields: np.ndarray,
                             m: int, tol: float = CYCLE_TOL,
                             max_iter: int = 12) -> np.ndarray:
    """Newton on (shooting system, arclength constraint) sharing integrations."""
    Y = Y_pred.copy()
    norm = np.inf
    for _ in range(max_iter):
        starts = Y[:2 * m].reshape(m, 2)
        T, alpha = Y[2 * m], Y[2 * m + 1]
        if T <= 0:
            raise ConvergenceError("nonpositive period during correction")
        p = _params_at(p0, active, alpha)
        ends, Ms, zetas = _shoot(p, starts, T, param=active)
        R = _residual(p, starts, T, ends, ref_states, ref_fields)
        c = float(np.dot(t_hat, (Y - Y_pred) / scales))
        Rfull = np.append(R, c)
        norm = float(np.max(np.abs(Rfull)))
        if not np.isfinite(norm) or norm > 1e6:
            raise ConvergenceError("cycle corrector diverged", residual=norm)
        if norm < tol:
            return Y, norm
        J = _bvp_jacobian(p, starts, T, ends, Ms, zetas, ref_fields)
        Jfull = np.vstack([J, t_hat / scales])
        try:
            step = np.linalg.solve(Jfull, -Rfull)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular cycle system: {exc}", residual=norm)
        Y = Y + step
    raise ConvergenceError("cycle corrector did not converge", residual=norm)


def _pinned_cycle_solve(p0: ModelParams, active: str, Y_guess: np.ndarray,
                        pivot: int, value: float, ref_states: np.ndarray,
                        ref_fields: np.ndarray, m: int,
                        tol: float = CYCLE_TOL, max_iter: int = 15) -> np.ndarray:
    """Solve the shooting system with one unknown pinned to ``value``."""
    Y = Y_guess.copy()
    Y[pivot] = value
    free = [i for i in range(len(Y)) if i != pivot]
    norm = np.inf
    for _ in range(max_iter):
        starts = Y[:2 * m].reshape(m, 2)
        T, alpha = Y[2 * m], Y[2 * m + 1]
        if T <= 0:
            raise ConvergenceError("nonpositive period during pinned solve")
        p = _params_at(p0, active, alpha)
        ends, Ms, zetas = _shoot(p, starts, T, param=active)
        R = _residual(p, starts, T, ends, ref_states, ref_fields)
        norm = float(np.max(np.abs(R)))
        if not np.isfinite(norm) or norm > 1e6:
            raise ConvergenceError("pinned cycle solve diverged", residual=norm)
        if norm < tol:
            return Y
        J = _bvp_jacobian(p, starts, T, ends, Ms, zetas, ref_fields)
        try:
            step = np.linalg.solve(J[:, free], -R)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular pinned cycle system: {exc}",
                                   residual=norm)
        Y[free] += step
    raise ConvergenceError("pinned cycle solve did not converge", residual=norm)


def continue_cycles(p: ModelParams, from_hopf: SpecialPoint,
                    prange: tuple[float, float], m: int = 12,
                    ds0: float = 2e-3, ds_min: float = 1e-7, ds_max: float = 0.25,
                    max_orbits: int = 120, germ_radius: float = 2e-3,
                    ) -> CycleBranch:
    """Continue the periodic-orbit family born at a Hopf point.

    Starts from two small germ orbits, then takes pseudo-arclength steps in
    (segment states, period, parameter).  Cycle folds are detected by a sign
    reversal of the parameter tangent component and refined by bisection to
    1e-8 in the parameter; each accepted orbit carries Floquet data, so the
    stability flip at a fold is explicit.  Continuation stops at the range
    boundary, on a corrector failure (truncated branch) or at ``max_orbits``.
    """
    if from_hopf.kind != "hopf":
        raise NotAHopfError("cycle continuation must start from a hopf point")
    active = from_hopf.param_name
    p = p.with_(u_boil=math.inf)
    lo, hi = float(prange[0]), float(prange[1])
    m = max(10, m)

    # Germ offset sized so the first orbit has a workable radius.
    p_h = p.with_(**{active: from_hopf.param_value})
    omega = math.sqrt(from_hopf.det)
    l1 = from_hopf.l1
    if l1 is None:
        from .steady import lyapunov_first_coeff
        l1 = lyapunov_first_coeff(p_h, from_hopf)
    dp = 1e-7 * max(abs(from_hopf.param_value), 1e-3)
    tr_p = solve_steady(p.with_(**{active: from_hopf.param_value + dp}),
                        (from_hopf.state.x, from_hopf.state.u), active).trace
    tr_m = solve_steady(p.with_(**{active: from_hopf.param_value - dp}),
                        (from_hopf.state.x, from_hopf.state.u), active).trace
    re_lam_prime = (tr_p - tr_m) / (4 * dp)
    delta0 = germ_radius ** 2 * omega * abs(l1) / max(abs(re_lam_prime), 1e-300)

    orbits: list[Orbit] = []
    Ys: list[np.ndarray] = []

    def pack(orbit_starts, T, alpha):
        return np.concatenate([orbit_starts.ravel(), [T, alpha]])

    first = None
    for scale in (1.0, 4.0, 16.0, 0.25):
        try:
            p_off, seed = hopf_germ(p, from_hopf, scale * delta0)
            starts1, T1, res1 = _solve_cycle_raw(p_off, seed, m)
            first = _finalize_orbit(p_off, starts1, T1, res1, active)
            delta_used = scale * delta0
            break
        except (GermError, ConvergenceError):
            continue
    if first is None:
        raise ConvergenceError("could not start the cycle branch from the germ")
    orbits.append(first)
    Ys.append(pack(starts1, T1, first.param_value))

    p_off2, seed2 = hopf_germ(p, from_hopf, 2.0 * delta_used)
    starts2, T2, res2 = _solve_cycle_raw(p_off2, seed2, m)
    orbits.append(_finalize_orbit(p_off2, starts2, T2, res2, active))
    Ys.append(pack(starts2, T2, orbits[-1].param_value))

    seg_w = math.sqrt(2.0 * m)
    scales = np.concatenate([
        np.tile([seg_w, seg_w * 0.02], m),
        [max(first.period, 1.0), max(hi - lo, 1e-6)],
    ])

    t_hat = (Ys[1] - Ys[0]) / scales
    t_hat /= np.linalg.norm(t_hat)

    folds: list[float] = []
    stop_reason = "max orbits"
    ds = ds0
    prev_Y = Ys[0]
    Y = Ys[1]
    last_tangent = t_hat

    while len(orbits) < max_orbits:
        starts = Y[:2 * m].reshape(m, 2)
        alpha = Y[2 * m + 1]
        pa = p.with_(**{active: float(alpha)})
        ref_states = starts.copy()
        ref_fields = _fields_at(pa, starts)

        tang = _cycle_tangent(pa, starts, Y[2 * m], active, ref_states,
                              ref_fields, scales, last_tangent)
        # Cycle fold: parameter component of the tangent reverses.
        if last_tangent is not None and len(orbits) >= 3:
            a_prev = last_tangent[2 * m + 1]
            a_now = tang[2 * m + 1]
            if a_prev * a_now < 0:
                try:
                    fold_alpha = _refine_cycle_fold(
                        p, active, prev_Y, Y, last_tangent, tang, scales,
                        ref_states, ref_fields, m)
                    folds.append(fold_alpha)
                except ConvergenceError:
                    folds.append(float(0.5 * (prev_Y[2 * m + 1] + Y[2 * m + 1])))
        last_tangent = tang

        stepped = False
        while not stepped:
            Y_pred = Y + ds * tang * scales
            try:
                Y_new, res_new = _correct_cycle_arclength(
                    p, active, Y_pred, tang, scales, ref_states, ref_fields, m)
                stepped = True
            except ConvergenceError:
                if ds <= ds_min * (1 + 1e-12):
                    stop_reason = "corrector failure"
                    return CycleBranch(active, tuple(orbits), tuple(folds), stop_reason)
                ds = max(ds_min, ds / 2)
        ds = min(ds_max, ds * 1.3)

        prev_Y, Y = Y, Y_new
        starts_new = Y[:2 * m].reshape(m, 2)
        T_new, alpha_new = float(Y[2 * m]), float(Y[2 * m + 1])
        p_new = p.with_(**{active: alpha_new})
        orbits.append(_finalize_orbit(p_new, starts_new, T_new, res_new, active))

        if alpha_new < lo or alpha_new > hi:
            stop_reason = "window boundary"
            break

    return CycleBranch(active, tuple(orbits), tuple(folds), stop_reason)


def _refine_cycle_fold(p0: ModelParams, active: str, Y_a: np.ndarray,
                       Y_b: np.ndarray, t_a: np.ndarray, t_b: np.ndarray,
                       scales: np.ndarray, ref_states: np.ndarray,
                       ref_fields: np.ndarray, m: int) -> float:
    """Bisect the parameter-tangent sign change between two cycle points."""
    n_alpha = 2 * m + 1
    diff = np.abs((Y_b - Y_a) / scales)
    diff[n_alpha] = 0.0  # never pin the parameter at a fold
    pivot = int(np.argmax(diff))
    a, b = float(Y_a[pivot]), float(Y_b[pivot])
    fa, fb = float(t_a[n_alpha]), float(t_b[n_alpha])
    Ya, Yb = Y_a.copy(), Y_b.copy()
    ta = t_a
    alpha_best = float(0.5 * (Y_a[n_alpha] + Y_b[n_alpha]))
    for _ in range(60):
        if abs(Ya[n_alpha] - Yb[n_alpha]) <= FOLD_PARAM_TOL:
            break
        c = 0.5 * (a + b)
        if c == a or c == b:
            break
        w = (c - a) / (b - a)
        Yc = _pinned_cycle_solve(p0, active, Ya + w * (Yb - Ya), pivot, c,
                                 ref_states, ref_fields, m)
        pc = _params_at(p0, active, float(Yc[n_alpha]))
        tc = _cycle_tangent(pc, Yc[:2 * m].reshape(m, 2), Yc[2 * m], active,
                            ref_states, ref_fields, scales, ta)
        fc = float(tc[n_alpha])
        alpha_best = float(Yc[n_alpha])
        if fa * fc < 0:
            b, Yb, fb = c, Yc, fc
        else:
            a, Ya, fa, ta = c, Yc, fc, tc
    return alpha_best
