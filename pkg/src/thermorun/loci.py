"""Two-parameter bifurcation loci over ambient temperature and flow rate.

Hopf and fold curves are traced in the (u_a, f) plane by pseudo-arclength
continuation of the augmented systems {vector field = 0, trace = 0} and
{vector field = 0, det = 0} in the unknowns (x, u, u_a, ln f); the log of
the flow rate keeps the stepping well-scaled across decades.  Fold seeds
are hunted through the one-variable fold condition (the u-derivative of the
reduced balance vanishes), which fixes u and f first and back-solves the
ambient temperature.  A classifier assigns regime labels to points of the
plane by ray-parity against the computed loci.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .errors import ConvergenceError, ValidationError
from .model import ModelParams
from .solvers import ContinuationProblem, bisect_root, continue_curve
from .steady import SpecialPoint, continue_branch

LOCUS_TOL = 1e-10
CLOSURE_TOL = 1e-6
BOUNDARY_TOL = 1e-8

OSCILLATORY = "oscillatory-runaway"
BISTABLE = "bistable"
UNIQUE_STABLE = "unique-stable"
BOUNDARY = "boundary"


@dataclass(frozen=True)
class Window:
    """Search window: ambient-temperature and flow-rate intervals."""

    u_a: tuple[float, float]
    f: tuple[float, float]

    def __post_init__(self):
        if not (self.u_a[0] < self.u_a[1] and 0 < self.f[0] < self.f[1]):
            raise ValidationError("window", "need u_a_lo < u_a_hi and 0 < f_lo < f_hi")

    def contains(self, u_a: float, f: float) -> bool:
        return (self.u_a[0] <= u_a <= self.u_a[1]
                and self.f[0] <= f <= self.f[1])


@dataclass(frozen=True)
class Locus:
    """A codimension-one bifurcation curve in the (u_a, f) plane.

    ``points`` rows are (u_a, f, x, u).  ``extra`` carries the complementary
    test function at each point (det along a Hopf locus, trace along a fold
    locus).  An empty locus explains itself through ``empty_reason``.
    """

    kind: str  # "hopf" | "fold"
    points: np.ndarray
    extra: np.ndarray
    stop_reasons: tuple[str, ...] = ()
    empty_reason: str = ""
    f_threshold: float | None = None

    def __len__(self) -> int:
        return len(self.points)


def _trace_grad(p: ModelParams, x: float, u: float) -> tuple[float, np.ndarray]:
    """Trace of the Jacobian and its gradient w.r.t. (x, u, u_a, f)."""
    r, d1, _, _ = model.rho_derivs(p, u)
    tr = -(r + p.f) + (x * d1 - p.loss) / p.eps
    dd1 = r / u**4 - 2 * r / u**3  # d/du of rho/u^2
    g = np.array([
        d1 / p.eps,
        -d1 + x * dd1 / p.eps,
        0.0,
        -2.0,
    ])
    return tr, g


def _det_grad(p: ModelParams, x: float, u: float) -> tuple[float, np.ndarray]:
    """Determinant of the Jacobian and its gradient w.r.t. (x, u, u_a, f)."""
    r, d1, _, _ = model.rho_derivs(p, u)
    det = (p.loss * (r + p.f) - p.f * x * d1) / p.eps
    dd1 = r / u**4 - 2 * r / u**3
    g = np.array([
        -p.f * d1 / p.eps,
        (p.loss * d1 - p.f * x * dd1) / p.eps,
        0.0,
        (p.eps * (r + p.f) + p.loss - x * d1) / p.eps,
    ])
    return det, g


def _augmented_problem(p: ModelParams, test: str,
                       scales: np.ndarray) -> ContinuationProblem:
    """{F = 0, test fn = 0} over y = (x, u, u_a, ln f)."""
    grad_fn = _trace_grad if test == "trace" else _det_grad

    def params_at(y):
        return p.with_(u_a=float(y[2]), f=float(math.exp(y[3])))

    def residual(y):
        q = params_at(y)
        fx, fu = model._field_xu(q, y[0], y[1])
        t, _ = grad_fn(q, y[0], y[1])
        return np.array([fx, fu, t])

    def jacobian(y):
        q = params_at(y)
        x, u = float(y[0]), float(y[1])
        J = np.zeros((3, 4))
        J[:2, :2] = model._jac_xu(q, x, u)
        J[:2, 2] = model.param_derivative(q, x, u, "u_a")
        J[:2, 3] = q.f * model.param_derivative(q, x, u, "f")
        t, g = grad_fn(q, x, u)
        J[2, :3] = g[:3]
        J[2, 3] = q.f * g[3]
        return J

    return ContinuationProblem(residual, jacobian, scales)


def _other_test(p: ModelParams, test: str, y) -> float:
    q = p.with_(u_a=float(y[2]), f=float(math.exp(y[3])))
    if test == "trace":
        return _det_grad(q, float(y[0]), float(y[1]))[0]
    return _trace_grad(q, float(y[0]), float(y[1]))[0]


def _trace_locus(p: ModelParams, y0: np.ndarray, test: str, window: Window,
                 ds0: float, ds_max: float, max_steps: int):
    """Run the augmented continuation in both directions from a seed."""
    u_scale = max(p.f / p.loss, 1e-4)
    scales = np.array([1.0, u_scale, window.u_a[1] - window.u_a[0], 1.0])
    prob = _augmented_problem(p, test, scales)

    halves = []
    reasons = []
    for sign in (+1.0, -1.0):
        state = {"closed": False}

        def stop(y, _state=state):
            if not window.contains(float(y[2]), float(math.exp(y[3]))):
                return "window boundary"
            if test == "trace" and _other_test(p, "trace", y) <= 0:
                return "determinant nonpositive (neutral saddle boundary)"
            return None

        direction = np.zeros(4)
        direction[3] = sign
        run = continue_curve(prob, y0, direction, ds0=ds0, ds_min=1e-9,
                             ds_max=ds_max, max_steps=max_steps, tol=LOCUS_TOL,
                             stop=stop)
        # Closure: returning to the seed closes the curve.
        pts = run.points
        for k in range(20, len(pts)):
            if np.linalg.norm((pts[k] - y0) / scales) < CLOSURE_TOL:
                pts = pts[:k + 1]
                run.stop_reason = "closed"
                break
        halves.append(pts)
        reasons.append(run.stop_reason)
        if run.stop_reason == "closed":
            return [pts], ("closed",)
    merged = list(reversed(halves[1][1:])) + halves[0]
    return [merged], tuple(reasons)


def _locus_from_points(p: ModelParams, pts, test: str, reasons,
                       f_threshold: float | None = None) -> Locus:
    rows = []
    extra = []
    for y in pts:
        f_val = float(math.exp(y[3]))
        rows.append([float(y[2]), f_val, float(y[0]), float(y[1])])
        extra.append(_other_test(p, test, y))
    kind = "hopf" if test == "trace" else "fold"
    rows = np.array(rows)
    extra = np.array(extra)
    if kind == "hopf" and len(rows):
        # Endpoints where the determinant has crossed zero are neutral
        # saddles, not Hopf points; they only mark where tracing stopped.
        keep = extra > 0
        lo = int(np.argmax(keep)) if keep.any() else len(rows)
        hi = len(keep) - int(np.argmax(keep[::-1])) if keep.any() else len(rows)
        rows, extra = rows[lo:hi], extra[lo:hi]
    return Locus(kind, rows, extra, tuple(reasons), f_threshold=f_threshold)


def continue_hopf_locus(p: ModelParams, start: SpecialPoint | None = None,
                        window: Window | None = None, ds0: float = 1e-3,
                        ds_max: float = 0.05, max_steps: int = 4000) -> Locus:
    """Trace the Hopf locus through a verified Hopf point.

    Without an explicit start, a one-parameter branch at the template's flow
    rate is scanned for a Hopf; if none exists (e.g. the reaction is
    switched off) an empty locus is returned with the reason recorded.
    Continuation runs both ways until the window boundary, a vanishing
    determinant, or closure of the curve.
    """
    p = p.with_(u_boil=math.inf)
    if window is None:
        window = default_window(p)
    if start is None:
        start = _auto_hopf_seed(p, window)
        if start is None:
            return Locus("hopf", np.empty((0, 4)), np.empty(0),
                         empty_reason="no Hopf point found at the seed flow rate")
    y0 = np.array([start.state.x, start.state.u, start.param_value, math.log(p.f)])
    pts_runs, reasons = _trace_locus(p, y0, "trace", window, ds0, ds_max, max_steps)
    return _locus_from_points(p, pts_runs[0], "trace", reasons)


def continue_fold_locus(p: ModelParams, start: SpecialPoint | None = None,
                        window: Window | None = None, ds0: float = 1e-3,
                        ds_max: float = 0.05, max_steps: int = 4000) -> Locus:
    """Trace the fold locus; hunts a seed at high flow rates when needed.

    When no fold exists anywhere in the window the result is empty, with the
    reason and the scanned threshold recorded.
    """
    p = p.with_(u_boil=math.inf)
    if window is None:
        window = default_window(p)
    f_star = fold_threshold(p, window)
    if start is None:
        seed = find_fold_seed(p, window)
        if seed is None:
            return Locus("fold", np.empty((0, 4)), np.empty(0),
                         empty_reason="no fold point in the window "
                                      f"(flow rates up to {window.f[1]:g} scanned)",
                         f_threshold=f_star)
        start_y = seed
    else:
        start_y = np.array([start.state.x, start.state.u, start.param_value,
                            math.log(p.f)])
    pts_runs, reasons = _trace_locus(p, start_y, "det", window, ds0, ds_max,
                                     max_steps)
    return _locus_from_points(p, pts_runs[0], "det", reasons, f_threshold=f_star)


def _auto_hopf_seed(p: ModelParams, window: Window) -> SpecialPoint | None:
    try:
        br = continue_branch(p, "u_a", window.u_a, ds0=1e-3)
    except ConvergenceError:
        return None
    hopfs = [sp for sp in br.specials if sp.kind == "hopf"]
    return hopfs[0] if hopfs else None


# ---------------------------------------------------------------------------
# Fold seeds


def _fold_condition(p: ModelParams, u: float) -> float:
    """u-derivative of the reduced balance; zero at a steady-state fold."""
    r, d1, _, _ = model.rho_derivs(p, u)
    return p.f ** 2 * d1 / (p.f + r) ** 2 - p.loss


def _fold_roots_at_f(p: ModelParams, f: float, window: Window,
                     n: int = 2000) -> list[np.ndarray]:
    """Fold points (x, u, u_a, ln f) at a fixed flow rate, inside the window."""
    q = p.with_(f=f, u_boil=math.inf)
    u_lo = window.u_a[0]
    u_hi = window.u_a[1] + f / q.loss
    grid = np.linspace(u_lo, u_hi, n)
    vals = np.array([_fold_condition(q, u) for u in grid])
    out = []
    for i in range(n - 1):
        if vals[i] == 0.0 or vals[i] * vals[i + 1] < 0:
            u = bisect_root(lambda v: _fold_condition(q, v), grid[i], grid[i + 1])
            r = model.rho(q, u)
            r_g = q.f * r / (q.f + r)
            u_a = u - r_g / q.loss
            if window.u_a[0] <= u_a <= window.u_a[1]:
                x = q.f / (q.f + r)
                out.append(np.array([x, u, u_a, math.log(f)]))
    return out


def _f_sweep(window: Window, per_decade: int = 12) -> np.ndarray:
    decades = math.log10(window.f[1] / window.f[0])
    n = max(8, int(per_decade * decades) + 1)
    return np.geomspace(window.f[0], window.f[1], n)


def find_fold_seed(p: ModelParams, window: Window) -> np.ndarray | None:
    """First fold point found by a logarithmic sweep of the flow rate."""
    for f in _f_sweep(window):
        roots = _fold_roots_at_f(p, float(f), window)
        if roots:
            return roots[0]
    return None


def fold_threshold(p: ModelParams, window: Window) -> float | None:
    """Smallest flow rate in the window at which steady-state folds exist.

    Log-sweeps the window, then bisects the onset between the last fold-free
    and the first fold-bearing flow rate.  None when the window has no folds.
    """
    sweep = _f_sweep(window, per_decade=24)
    has = [bool(_fold_roots_at_f(p, float(f), window)) for f in sweep]
    if not any(has):
        return None
    first = next(i for i, h in enumerate(has) if h)
    if first == 0:
        return float(sweep[0])
    lo, hi = float(sweep[first - 1]), float(sweep[first])
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if _fold_roots_at_f(p, mid, window):
            hi = mid
        else:
            lo = mid
        if hi / lo < 1 + 1e-12:
            break
    return hi


# ---------------------------------------------------------------------------
# Regime classification


def _ray_crossings(locus: Locus, u_a: float, f: float) -> int:
    """Crossings of the downward ray from (u_a, f) with the locus polyline."""
    if len(locus) < 2:
        return 0
    pts = locus.points
    count = 0
    for k in range(len(pts) - 1):
        a1, b1 = pts[k, 0], pts[k, 1]
        a2, b2 = pts[k + 1, 0], pts[k + 1, 1]
        if (b1 <= f < b2) or (b2 <= f < b1):
            a_cross = a1 + (f - b1) / (b2 - b1) * (a2 - a1)
            if a_cross < u_a:
                count += 1
    return count


def _distance_to(locus: Locus, u_a: float, f: float) -> float:
    if len(locus) < 2:
        return math.inf
    pts = locus.points[:, :2].copy()
    scale = np.array([1.0, max(1.0, abs(f))])
    q = np.array([u_a, f]) / scale
    segs_a = pts[:-1] / scale
    segs_b = pts[1:] / scale
    d = segs_b - segs_a
    denom = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", q - segs_a, d) / np.where(denom > 0, denom, 1.0),
                0.0, 1.0)
    proj = segs_a + t[:, None] * d
    return float(np.min(np.linalg.norm(proj - q, axis=1)))


def classify_point(u_a: float, f: float, loci: dict[str, Locus],
                   window: Window | None = None) -> str:
    """Regime label at a parameter point, from ray parity against the loci.

    Inside the fold wedge the regime is bistable; otherwise inside the Hopf
    region the steady state is oscillatory-unstable and any runaway is
    oscillatory; otherwise a unique stable steady state prevails.  Points
    within 1e-8 (scaled) of a locus are labelled as boundary.
    """
    if window is not None and not window.contains(u_a, f):
        raise ValidationError("point", "outside the computed window")
    hopf = loci.get("hopf")
    fold = loci.get("fold")
    for locus in (hopf, fold):
        if locus is not None and _distance_to(locus, u_a, f) < BOUNDARY_TOL:
            return BOUNDARY
    if fold is not None and _ray_crossings(fold, u_a, f) % 2 == 1:
        return BISTABLE
    if hopf is not None and _ray_crossings(hopf, u_a, f) % 2 == 1:
        return OSCILLATORY
    return UNIQUE_STABLE


def region_map(loci: dict[str, Locus], window: Window,
               n_ua: int = 60, n_f: int = 60) -> list[tuple[float, float, str]]:
    """Regime labels on a grid over the window (flow rate log-spaced)."""
    uas = np.linspace(window.u_a[0], window.u_a[1], n_ua)
    fs = np.geomspace(window.f[0], window.f[1], n_f)
    rows = []
    for f in fs:
        for ua in uas:
            rows.append((float(ua), float(f),
                         classify_point(float(ua), float(f), loci)))
    return rows


def default_window(p: ModelParams) -> Window:
    """Window spanning the interesting ambient range and six flow decades."""
    lo = 0.75 * p.u_a
    hi = 1.35 * p.u_a
    return Window((lo, hi), (max(p.f * 1e-2, 1e-6), p.f * 1e6))
