"""The growth map, its fixed point, the physicality jump rule, and extinction.

Gamma[lambda] turns a trial boundary into the boundary generated by the
melted volume: solid starts are absorbed at lambda before the cold core,
liquid starts at lambda with no core cap, each weighted by the initial
nu-mass. Fixed points of the map are the free boundaries of the problem.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from meltfront.core import (
    Boundary,
    CoverageError,
    DomainError,
    EmptyMassError,
    InitialData,
    TemperatureField,
    nu_integral,
    sample_from_cells,
    sample_from_profile,
)
from meltfront.stochastic import (
    EVENT_BOUNDARY,
    block_generator,
    simulate_crossings,
)
from meltfront.temperature import TAIL_SIGMAS, sample_from_field

BISECT_XTOL = 1e-12
MAX_ITER_DEFAULT = 40


def default_jump_tol(lam_ref: float) -> float:
    # strict ">" in the jump rule cannot be realized in floating point
    return 1e-10 * lam_ref**3


# ---------------------------------------------------------------------------
# Gamma evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaResult:
    """Generated boundary with its solid/liquid melt volumes per grid node."""

    times: np.ndarray
    boundary: Boundary
    solid: np.ndarray
    liquid: np.ndarray
    solid_se: np.ndarray
    liquid_se: np.ndarray
    boundary_se: np.ndarray
    zeta_gamma: float
    n_paths: int


def _crossing_fractions(res, grid: np.ndarray):
    """Fraction of paths whose boundary crossing happened by each grid time."""
    hit = res.event_type == EVENT_BOUNDARY
    times = np.sort(res.event_time[hit])
    n = res.event_type.size
    counts = np.searchsorted(times, grid, side="right")
    p = counts / n
    return p, np.sqrt(p * (1.0 - p) / n)


def evaluate_gamma(
    init: InitialData,
    lam: Boundary,
    grid,
    n_paths: int,
    seed: int,
    delta: "float | None" = None,
    workers: int = 1,
    purpose: str = "gamma",
) -> GammaResult:
    """Monte Carlo evaluation of the growth map on a time grid.

    Solid and liquid starts are nu-importance samples of the initial profile;
    the crossing sign is anchored at lambda0minus, so mass in a ring vacated
    by an initial boundary drop is collected at time zero.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly ascending")
    if grid[0] != 0.0:
        raise DomainError("grid must start at time 0")
    horizon = float(grid[-1])
    if delta is None:
        delta = 1e-4 * horizon if horizon > 0 else 1.0
    lam_grid = np.asarray(lam(grid), dtype=float)
    if np.any(lam_grid <= init.r0):
        raise DomainError("trial boundary must stay above the cold core")

    rng = block_generator(seed, purpose + "/starts", 0)
    m_solid = m_liquid = 0.0
    gp = np.zeros(grid.size)
    gp_se = np.zeros(grid.size)
    gm = np.zeros(grid.size)
    gm_se = np.zeros(grid.size)

    try:
        solid_starts, m_solid = sample_from_profile(init, "solid", n_paths, rng)
    except EmptyMassError:
        solid_starts = None
    if solid_starts is not None:
        res = simulate_crossings(
            starts=solid_starts,
            boundary=lam,
            r0=init.r0,
            delta=delta,
            horizon=horizon,
            seed=seed,
            purpose=purpose + "/solid",
            anchor=init.lambda0minus,
            workers=workers,
        )
        p, se = _crossing_fractions(res, grid)
        gp, gp_se = m_solid * p, m_solid * se

    x_cut = init.lambda0minus + TAIL_SIGMAS * math.sqrt(max(horizon, 0.0))
    try:
        liq_starts, m_liquid = sample_from_profile(init, "liquid", n_paths, rng, x_max=x_cut)
    except EmptyMassError:
        liq_starts = None
    if liq_starts is not None:
        res = simulate_crossings(
            starts=liq_starts,
            boundary=lam,
            r0=init.r0,
            delta=delta,
            horizon=horizon,
            seed=seed,
            purpose=purpose + "/liquid",
            anchor=init.lambda0minus,
            workers=workers,
        )
        p, se = _crossing_fractions(res, grid)
        gm, gm_se = m_liquid * p, m_liquid * se

    volume = init.lambda0minus**3 - 3.0 * (gp + gm)
    floor = init.r0**3
    clipped = volume < floor
    values = np.cbrt(np.maximum(volume, floor))
    zeta_gamma = math.inf
    if np.any(clipped):
        k = int(np.argmax(clipped))
        if k == 0:
            zeta_gamma = 0.0
        else:
            v_prev, v_k = volume[k - 1], volume[k]
            frac = (v_prev - floor) / (v_prev - v_k) if v_prev > v_k else 1.0
            zeta_gamma = float(grid[k - 1] + frac * (grid[k] - grid[k - 1]))
    left = values.copy()
    left[0] = init.lambda0minus
    boundary = Boundary(grid.copy(), values, left_values=left, zeta=zeta_gamma)
    vol_se = 3.0 * np.sqrt(gp_se**2 + gm_se**2)
    return GammaResult(
        times=grid.copy(),
        boundary=boundary,
        solid=gp,
        liquid=gm,
        solid_se=gp_se,
        liquid_se=gm_se,
        boundary_se=vol_se / (3.0 * values**2),
        zeta_gamma=zeta_gamma,
        n_paths=n_paths,
    )


def contraction_ratio(
    init: InitialData,
    lam_a: Boundary,
    lam_b: Boundary,
    grid,
    n_paths: int,
    seed: int,
    delta: "float | None" = None,
    workers: int = 1,
) -> float:
    """max_t |Gamma[a]^3 - Gamma[b]^3| / max_t |a^3 - b^3| under shared noise."""
    grid = np.asarray(grid, dtype=float)
    ga = evaluate_gamma(init, lam_a, grid, n_paths, seed, delta=delta, workers=workers)
    gb = evaluate_gamma(init, lam_b, grid, n_paths, seed, delta=delta, workers=workers)
    num = float(np.max(np.abs(ga.boundary.values**3 - gb.boundary.values**3)))
    den = float(np.max(np.abs(np.asarray(lam_a(grid)) ** 3 - np.asarray(lam_b(grid)) ** 3)))
    if den == 0.0:
        raise DomainError("trial boundaries coincide on the grid")
    return num / den


# ---------------------------------------------------------------------------
# physicality jump
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpResult:
    jump: float
    side: str  # "down" | "none"
    bracket: tuple
    residual: float
    up_jump: float
    extinction: bool


def _cell_integral(a: float, b: float, wa: float, wb: float, sign: float) -> float:
    # integral of (1 - sign*w_lin(x)) x^2 over [a, b]; Simpson is exact for
    # the cubic integrand and avoids cancellation on near-degenerate cells
    mid = 0.5 * (a + b)
    wm = 0.5 * (wa + wb)
    qa = (1.0 - sign * wa) * a * a
    qm = (1.0 - sign * wm) * mid * mid
    qb = (1.0 - sign * wb) * b * b
    return (b - a) / 6.0 * (qa + 4.0 * qm + qb)


def _first_exceed_down(radii, values, lam, tol):
    """First y with integral of (1-w) x^2 over (lam-y, lam) exceeding tol.

    Marches cells downward from lam, splitting at interior w=1 crossings so
    every piece is monotone; the crossing in the first rising piece from y=0
    means the set {D > 0} reaches down to 0, i.e. no jump.
    """
    # cell edges descending from lam
    inside = (radii < lam) & (radii > 0)
    xs = np.concatenate([[lam], radii[inside][::-1]])
    ws = np.interp(xs, radii, values)
    d_hi = 0.0
    first_piece = True
    for k in range(xs.size - 1):
        hi, lo = xs[k], xs[k + 1]
        w_hi, w_lo = ws[k], ws[k + 1]
        splits = [hi]
        if (w_hi - 1.0) * (w_lo - 1.0) < 0:
            xc = hi + (lo - hi) * (1.0 - w_hi) / (w_lo - w_hi)
            if lo < xc < hi:
                splits.append(xc)
        splits.append(lo)
        for j in range(len(splits) - 1):
            a_hi, a_lo = splits[j], splits[j + 1]
            w_a = np.interp(a_hi, radii, values) if j > 0 else w_hi
            w_b = np.interp(a_lo, radii, values) if j + 2 < len(splits) + 0 else w_lo
            w_a = float(np.interp(a_hi, radii, values))
            w_b = float(np.interp(a_lo, radii, values))
            inc = _cell_integral(a_lo, a_hi, w_b, w_a, +1.0)
            d_lo = d_hi + inc
            if d_lo > tol:
                if first_piece and inc >= 0.0:
                    # D rises from 0 immediately: the strict set starts at 0+
                    return 0.0, (0.0, lam - a_lo), 0.0

                def dfun(x):
                    wl = float(np.interp(x, radii, values))
                    return d_hi + _cell_integral(x, a_hi, wl, w_a, +1.0) - tol

                x_star = brentq(dfun, a_lo, a_hi, xtol=BISECT_XTOL)
                y = lam - x_star
                return y, (lam - a_hi, lam - a_lo), dfun(x_star)
            d_hi = d_lo
            first_piece = first_piece and inc >= 0.0 and d_hi > tol
            first_piece = False if d_hi <= tol else first_piece
    return None, (0.0, lam - xs[-1]), d_hi - tol


def compute_jump(
    field: TemperatureField,
    lam_tminus: float,
    r0: float,
    jump_tol: "float | None" = None,
) -> JumpResult:
    """Physicality jump size from the pre-jump field slice.

    The boundary drops to the first depth where the vacated latent volume
    exceeds the thermal mass stored in the ring; no crossing down to the
    cold core means total extinction.
    """
    radii = field.radii
    if radii[0] > r0 + 1e-12 or radii[-1] < lam_tminus - 1e-12:
        raise CoverageError("field grid must cover (r0, lam_tminus)")
    if jump_tol is None:
        jump_tol = default_jump_tol(lam_tminus)

    y, bracket, resid = _first_exceed_down(radii, field.values, lam_tminus, jump_tol)
    if y is None:
        jump, extinct = lam_tminus - r0, True
        resid = float(resid)
    else:
        jump, extinct = float(min(y, lam_tminus - r0)), False

    # liquid-side analog with integrand (1 + w) x^2: for the non-negative
    # fields handled here it rises from zero immediately, so the upward jump
    # is zero; evaluated for symmetry with the rule above
    above = radii > lam_tminus
    up_jump = 0.0
    if np.any(above):
        w0 = float(field.interp(lam_tminus))
        q0 = (1.0 + w0) * lam_tminus**2
        up_jump = 0.0 if q0 > 0 else math.nan

    side = "down" if jump > 0.0 else "none"
    return JumpResult(
        jump=jump,
        side=side,
        bracket=bracket,
        residual=float(resid),
        up_jump=up_jump,
        extinction=extinct,
    )


def initial_jump(init: InitialData, n_fill: int = 1024) -> JumpResult:
    """Jump rule applied to the initial profile itself, on an exact grid.

    Profile breakpoints get a one-ulp shadow node so plateau steps survive the
    piecewise-linear field representation.
    """
    pts = {init.r0, init.lambda0minus}
    for seg in init.profile.segments:
        for b in (seg.lo, seg.hi):
            if init.r0 < b < init.lambda0minus:
                pts.add(b)
                pts.add(np.nextafter(b, -math.inf))
    base = np.linspace(init.r0, init.lambda0minus, n_fill + 1)
    radii = np.unique(np.concatenate([base, np.array(sorted(pts))]))
    values = init.profile(radii)
    fld = TemperatureField(
        0.0, radii, values, boundary_value=init.lambda0minus, r0=init.r0
    )
    return compute_jump(fld, init.lambda0minus, init.r0)


# ---------------------------------------------------------------------------
# extinction time
# ---------------------------------------------------------------------------


def detect_zeta(lam: Boundary, r0: float) -> float:
    """First time the interpolated boundary reaches r0; inf when it never does."""
    times, vals, lefts = lam.times, lam.values, lam.left_values
    if lam.lambda0minus <= r0:
        return float(times[0])
    for k in range(times.size):
        if k > 0:
            # segment from values[k-1] at times[k-1] to left_values[k]
            v0, v1 = vals[k - 1], lefts[k]
            if v0 > r0 >= v1:
                frac = (v0 - r0) / (v0 - v1)
                return float(times[k - 1] + frac * (times[k] - times[k - 1]))
        if vals[k] <= r0:
            return float(times[k])
    return math.inf


def extinction_inequality_gap(field: TemperatureField, lam_zminus: float, r0: float) -> float:
    """max_y of latent volume minus thermal mass over rings below lam_zminus.

    Non-positive values certify the extinction inequality on the slice; the
    check is informational (MC noise enters through the field).
    """
    radii = field.radii
    inside = (radii < lam_zminus) & (radii > r0)
    xs = np.concatenate([[lam_zminus], radii[inside][::-1], [r0]])
    ws = field.interp(xs)
    d = 0.0
    best = -math.inf
    for k in range(xs.size - 1):
        hi, lo = float(xs[k]), float(xs[k + 1])
        w_hi, w_lo = float(ws[k]), float(ws[k + 1])
        # extremum candidates: piece ends and the interior w=1 crossing
        if (w_hi - 1.0) * (w_lo - 1.0) < 0:
            xc = hi + (lo - hi) * (1.0 - w_hi) / (w_lo - w_hi)
            wc = 1.0
            d_mid = d + _cell_integral(xc, hi, wc, w_hi, +1.0)
            best = max(best, d_mid)
            d = d_mid + _cell_integral(lo, xc, w_lo, wc, +1.0)
        else:
            d = d + _cell_integral(lo, hi, w_lo, w_hi, +1.0)
        best = max(best, d)
    return float(best)


# ---------------------------------------------------------------------------
# growth residual
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    times: np.ndarray
    residual: np.ndarray
    se: np.ndarray
    estimate: np.ndarray
    target: np.ndarray


def growth_residual(
    init: InitialData,
    lam: Boundary,
    grid,
    n_paths: int,
    seed: int,
    delta: "float | None" = None,
    workers: int = 1,
    t0: float = 0.0,
    slice_field: "TemperatureField | None" = None,
) -> ResidualReport:
    """Per-node defect of the growth condition along a candidate boundary.

    t0 = 0 checks the anchored form (initial profile, crossing sign anchored
    at lambda0minus). t0 > 0 checks the restart form: mass of w(t0,.) melted
    over (t0, t], crossing sign anchored at lambda(t0), which requires a field
    slice at t0.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly ascending")
    if t0 == 0.0:
        if grid[0] != 0.0:
            raise DomainError("grid must start at 0 for the anchored form")
        g = evaluate_gamma(
            init, lam, grid, n_paths, seed, delta=delta, workers=workers, purpose="residual"
        )
        estimate = g.solid + g.liquid
        se = np.sqrt(g.solid_se**2 + g.liquid_se**2)
        lam_grid = np.asarray(lam(grid), dtype=float)
        target = (init.lambda0minus**3 - lam_grid**3) / 3.0
    else:
        if slice_field is None:
            raise DomainError("restart residual needs the field slice at t0")
        if grid[0] < t0:
            raise DomainError("grid must lie at or after t0")
        horizon = float(grid[-1] - t0)
        if delta is None:
            delta = 1e-4 * horizon if horizon > 0 else 1.0
        rng = block_generator(seed, "residual-restart/starts", 0)
        starts, mass = sample_from_field(slice_field, n_paths, rng)
        res = simulate_crossings(
            starts=starts,
            boundary=lambda s: lam(t0 + np.asarray(s, dtype=float)),
            r0=init.r0,
            delta=delta,
            horizon=horizon,
            seed=seed,
            purpose="residual-restart",
            anchor=float(lam(t0)),
            workers=workers,
        )
        p, pse = _crossing_fractions(res, grid - t0)
        estimate = mass * p
        se = mass * pse
        lam_grid = np.asarray(lam(grid), dtype=float)
        target = (float(lam(t0)) ** 3 - lam_grid**3) / 3.0
    return ResidualReport(
        times=grid.copy(),
        residual=np.abs(target - estimate),
        se=se,
        estimate=estimate,
        target=target,
    )


# ---------------------------------------------------------------------------
# fixed point
# ---------------------------------------------------------------------------


@dataclass
class SolveResult:
    boundary: Boundary
    zeta: float
    iterations: int
    converged: bool
    residual_history: list
    node_residuals: np.ndarray
    jump_events: list
    gamma: GammaResult
    iterates: list = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "grid": [float(t) for t in self.boundary.times],
            "lambda": [float(v) for v in self.boundary.values],
            "zeta": None if math.isinf(self.zeta) else float(self.zeta),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "residuals": [float(r) for r in self.residual_history],
            "jump_events": [
                {"t": float(e["t"]), "size": float(e["size"])} for e in self.jump_events
            ],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def fixed_point_solve(
    init: InitialData,
    horizon: float,
    grid,
    n_paths: int,
    tol_fp: float,
    seed: int,
    delta: "float | None" = None,
    workers: int = 1,
    max_iter: int = MAX_ITER_DEFAULT,
) -> SolveResult:
    """Iterate the growth map from the constant post-jump boundary.

    The random numbers are frozen across iterations, which makes the iterate
    sequence pointwise monotone for solid-only data; convergence is declared
    when the sup-norm update falls below tol_fp.
    """
    if horizon <= 0:
        raise DomainError("horizon must be positive")
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0.0 or abs(grid[-1] - horizon) > 1e-12:
        raise DomainError("grid must span [0, horizon]")

    j0 = initial_jump(init)
    lam0 = init.lambda0minus - j0.jump
    jump_events = []
    if j0.jump > 0.0:
        jump_events.append({"t": 0.0, "size": j0.jump})
    if j0.extinction or lam0 <= init.r0:
        flat = np.full(grid.size, init.r0)
        left = flat.copy()
        left[0] = init.lambda0minus
        boundary = Boundary(grid.copy(), flat, left_values=left, zeta=0.0)
        empty = GammaResult(
            times=grid.copy(),
            boundary=boundary,
            solid=np.zeros(grid.size),
            liquid=np.zeros(grid.size),
            solid_se=np.zeros(grid.size),
            liquid_se=np.zeros(grid.size),
            boundary_se=np.zeros(grid.size),
            zeta_gamma=0.0,
            n_paths=0,
        )
        return SolveResult(
            boundary=boundary,
            zeta=0.0,
            iterations=0,
            converged=True,
            residual_history=[],
            node_residuals=np.zeros(grid.size),
            jump_events=jump_events,
            gamma=empty,
            iterates=[flat],
        )

    values = np.full(grid.size, lam0)
    left = values.copy()
    left[0] = init.lambda0minus
    lam = Boundary(grid.copy(), values, left_values=left)
    iterates = [values.copy()]
    history = []
    node_res = np.zeros(grid.size)
    converged = False
    g = None
    it = 0
    for it in range(1, max_iter + 1):
        g = evaluate_gamma(init, lam, grid, n_paths, seed, delta=delta, workers=workers)
        node_res = np.abs(g.boundary.values - lam.values)
        history.append(float(node_res.max()))
        lam = g.boundary
        iterates.append(lam.values.copy())
        if history[-1] < tol_fp:
            converged = True
            break
    return SolveResult(
        boundary=lam,
        zeta=g.zeta_gamma,
        iterations=it,
        converged=converged,
        residual_history=history,
        node_residuals=node_res,
        jump_events=jump_events,
        gamma=g,
        iterates=iterates,
    )
