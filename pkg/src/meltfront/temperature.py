"""Monte Carlo evaluation of the temperature-like field w.

Backward route: w(t,x) is the expectation of w(0-, R_t) over paths started at
x and killed on the time-reversed boundary s -> Lambda(t-s) or at the cold
core. Forward route: the nu-weighted initial mass is transported by the killed
process and histogrammed; x^2 w(t,x) dx is the density of the survivors. The
two routes estimate the same object and their per-bin mismatch is the
time-reversal residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from meltfront.core import (
    Boundary,
    CoverageError,
    DomainError,
    EmptyMassError,
    InitialData,
    TemperatureField,
    linear_field_cells,
    sample_from_cells,
    sample_from_profile,
)
from meltfront.stochastic import block_generator, simulate_crossings

# liquid starts beyond Lambda0minus + TAIL_SIGMAS * sqrt(t) cannot reach the
# region of interest against this many standard deviations; the sampler
# truncates admissible (infinite-mass) tails there
TAIL_SIGMAS = 8.0


class _ReversedBoundary:
    """s -> Lambda(t - s); the constant extension before time 0 is inherited
    from Boundary (Lambda = Lambda0minus on negative times)."""

    def __init__(self, lam: Boundary, t: float):
        self.lam = lam
        self.t = t

    def __call__(self, s):
        return self.lam(self.t - np.asarray(s, dtype=float))


def default_delta(horizon: float) -> float:
    return 1e-4 * horizon


def _post_jump_payoff(init: InitialData, lam0: float):
    """Time-zero slice seen by the killed paths: the stored profile with the
    ring vacated by an initial jump (and the boundary point) zeroed out."""

    def g(r: np.ndarray) -> np.ndarray:
        vals = init.profile(r)
        return np.where((r >= lam0) & (r <= init.lambda0minus), 0.0, vals)

    return g


# ---------------------------------------------------------------------------
# backward representation
# ---------------------------------------------------------------------------


def evaluate_w_backward(
    init: InitialData,
    lam: Boundary,
    t: float,
    x: float,
    n_paths: int,
    seed: int,
    delta: "float | None" = None,
    workers: int = 1,
    purpose: str = "wback",
):
    """Estimate w(t,x) with its standard error by the killed-path expectation."""
    vals, ses = evaluate_w_backward_grid(
        init, lam, t, np.array([x]), n_paths, seed, delta=delta, workers=workers, purpose=purpose
    )
    return float(vals[0]), float(ses[0])


def evaluate_w_backward_grid(
    init: InitialData,
    lam: Boundary,
    t: float,
    xs,
    n_paths: int,
    seed: int,
    delta: "float | None" = None,
    workers: int = 1,
    purpose: str = "wback",
):
    """w(t, x) for every x in xs, sharing one noise schedule across queries.

    Common random numbers make differences across nearby query points far less
    noisy than the pointwise standard errors suggest, which is what the
    boundary-slope consumers rely on.
    """
    if t < 0:
        raise DomainError("t must be >= 0")
    if t >= lam.zeta:
        raise DomainError("t must be before the extinction time")
    xs = np.asarray(xs, dtype=float)
    if np.any(xs <= 0):
        raise DomainError("x must be positive")
    values = np.zeros(xs.size)
    ses = np.zeros(xs.size)
    if t == 0.0:
        live = xs > init.r0
        values[live] = init.profile(xs[live])
        # the ring vacated by an initial jump carries zero field, and the
        # boundary itself is held at zero
        values[(xs >= lam(0.0)) & (xs <= init.lambda0minus)] = 0.0
        return values, ses
    if delta is None:
        delta = default_delta(t)
    rev = _ReversedBoundary(lam, t)
    anchor = float(lam(t))
    g = _post_jump_payoff(init, float(lam(0.0)))
    for i, x in enumerate(xs):
        if x <= init.r0:
            continue
        res = simulate_crossings(
            starts=np.full(n_paths, float(x)),
            boundary=rev,
            r0=init.r0,
            delta=delta,
            horizon=t,
            seed=seed,
            purpose=purpose,
            anchor=anchor,
            workers=workers,
        )
        payoff = np.where(res.survived, g(res.r_final), 0.0)
        values[i] = float(payoff.mean())
        ses[i] = float(payoff.std(ddof=1) / math.sqrt(n_paths))
    return values, ses


def make_backward_field(
    init: InitialData,
    lam: Boundary,
    t: float,
    radii,
    n_paths: int,
    seed: int,
    delta: "float | None" = None,
    workers: int = 1,
) -> tuple[TemperatureField, np.ndarray]:
    """One time slice of w on a radial grid, with per-node standard errors."""
    radii = np.asarray(radii, dtype=float)
    values, ses = evaluate_w_backward_grid(
        init, lam, t, radii, n_paths, seed, delta=delta, workers=workers
    )
    field = TemperatureField(t, radii, values, boundary_value=float(lam(t)), r0=init.r0)
    return field, ses


def propagate_from_slice(
    slice_field: TemperatureField,
    lam: Boundary,
    t: float,
    x: float,
    n_paths: int,
    seed: int,
    delta: "float | None" = None,
    workers: int = 1,
):
    """Markov restart: w(t,x) from the slice w(t0,.), killing over [0, t-t0].

    The payoff interpolates the stored slice at R_{t-t0}; the stopping times
    are the same time-reversed ones anchored at Lambda(t).
    """
    t0 = slice_field.time
    if not t0 < t:
        raise DomainError("slice time must precede the target time")
    if t >= lam.zeta:
        raise DomainError("t must be before the extinction time")
    window = t - t0
    if delta is None:
        delta = default_delta(window)
    res = simulate_crossings(
        starts=np.full(n_paths, float(x)),
        boundary=_ReversedBoundary(lam, t),
        r0=slice_field.r0,
        delta=delta,
        horizon=window,
        seed=seed,
        purpose="wback-restart",
        anchor=float(lam(t)),
        workers=workers,
    )
    r_end = res.r_final
    payoff = np.where(
        res.survived & (r_end > slice_field.r0), slice_field.interp(r_end), 0.0
    )
    # outside the stored grid the slice is unknown; clamp-interp is used, and
    # values beyond the last node should be negligible for covering grids
    return float(payoff.mean()), float(payoff.std(ddof=1) / math.sqrt(n_paths))


# ---------------------------------------------------------------------------
# forward representation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DensitySlice:
    """Killed-process mass per radial bin at one time."""

    time: float
    bin_lo: np.ndarray
    bin_hi: np.ndarray
    mass: np.ndarray
    se: np.ndarray
    total_mass: float
    initial_mass: float
    n_paths: int

    def to_csv(self) -> str:
        lines = ["bin_lo,bin_hi,mass"]
        for lo, hi, m in zip(self.bin_lo, self.bin_hi, self.mass):
            lines.append(f"{lo:.17g},{hi:.17g},{m:.17g}")
        return "\n".join(lines) + "\n"


def forward_killed_density(
    init: InitialData,
    lam: Boundary,
    t: float,
    bin_edges,
    n_paths: int,
    seed: int,
    delta: "float | None" = None,
    workers: int = 1,
) -> DensitySlice:
    """Histogram the nu-importance-sampled initial mass surviving to time t.

    Starts are drawn from w(0-,x) x^2 dx / m over (r0, x_cut); each survivor
    carries weight m / n_paths. Killing happens at the boundary (anchored at
    Lambda0minus) or the cold core.
    """
    bin_edges = np.asarray(bin_edges, dtype=float)
    if bin_edges.ndim != 1 or bin_edges.size < 2 or np.any(np.diff(bin_edges) <= 0):
        raise DomainError("bin edges must be ascending with at least one bin")
    nb = bin_edges.size - 1
    if t < 0:
        raise DomainError("t must be >= 0")
    if delta is None:
        delta = default_delta(t) if t > 0 else 1.0

    x_cut = max(init.lambda0minus, float(bin_edges[-1])) + TAIL_SIGMAS * math.sqrt(max(t, 0.0))
    rng = block_generator(seed, "fwd-starts", 0)
    try:
        starts, total0 = sample_from_profile(init, "solid", n_paths, rng)
    except EmptyMassError:
        starts, total0 = np.empty(0), 0.0
    try:
        liq, m_liq = sample_from_profile(init, "liquid", n_paths, rng, x_max=x_cut)
    except EmptyMassError:
        liq, m_liq = np.empty(0), 0.0

    mass = np.zeros(nb)
    var = np.zeros(nb)
    total = 0.0
    initial = total0 + m_liq
    for phase_starts, phase_mass, tag in (
        (starts, total0, "fwd-solid"),
        (liq, m_liq, "fwd-liquid"),
    ):
        if phase_mass <= 0.0 or phase_starts.size == 0:
            continue
        res = simulate_crossings(
            starts=phase_starts,
            boundary=lam,
            r0=init.r0,
            delta=delta,
            horizon=t,
            seed=seed,
            purpose=tag,
            anchor=init.lambda0minus,
            workers=workers,
        )
        surv = res.r_final[res.survived]
        counts, _ = np.histogram(surv, bins=bin_edges)
        n = phase_starts.size
        p = counts / n
        mass += phase_mass * p
        var += (phase_mass**2) * p * (1 - p) / n
        total += phase_mass * float(np.count_nonzero(res.survived)) / n
    return DensitySlice(
        time=t,
        bin_lo=bin_edges[:-1],
        bin_hi=bin_edges[1:],
        mass=mass,
        se=np.sqrt(var),
        total_mass=total,
        initial_mass=initial,
        n_paths=n_paths,
    )


@dataclass(frozen=True)
class IdentityResidual:
    """Per-bin gap between the forward mass and the backward w-integral."""

    bin_lo: np.ndarray
    bin_hi: np.ndarray
    forward_mass: np.ndarray
    backward_mass: np.ndarray
    residual: np.ndarray
    combined_se: np.ndarray


def density_identity_residual(
    init: InitialData,
    lam: Boundary,
    t: float,
    bin_edges,
    n_paths: int,
    seed: int,
    delta: "float | None" = None,
    workers: int = 1,
) -> IdentityResidual:
    """Check that x^2 w(t,x) dx is the killed-process density, per bin.

    The backward side integrates w(t,.) x^2 by Simpson inside each bin (the
    three nodes come from one common-random-number sweep); the forward side is
    the survivor histogram. Standard errors are combined additively, which is
    conservative under positively correlated node errors.
    """
    bin_edges = np.asarray(bin_edges, dtype=float)
    fwd = forward_killed_density(
        init, lam, t, bin_edges, n_paths, seed, delta=delta, workers=workers
    )
    mids = 0.5 * (bin_edges[:-1] + bin_edges[1:])
    nodes = np.unique(np.concatenate([bin_edges, mids]))
    vals, ses = evaluate_w_backward_grid(
        init, lam, t, nodes, n_paths, seed + 1, delta=delta, workers=workers
    )
    val_at = dict(zip(nodes.tolist(), vals.tolist()))
    se_at = dict(zip(nodes.tolist(), ses.tolist()))

    nb = bin_edges.size - 1
    back = np.zeros(nb)
    back_se = np.zeros(nb)
    for i in range(nb):
        lo, hi = bin_edges[i], bin_edges[i + 1]
        mid = mids[i]
        h = hi - lo
        back[i] = (h / 6.0) * (
            val_at[lo] * lo**2 + 4.0 * val_at[mid] * mid**2 + val_at[hi] * hi**2
        )
        back_se[i] = (h / 6.0) * (
            se_at[lo] * lo**2 + 4.0 * se_at[mid] * mid**2 + se_at[hi] * hi**2
        )
    residual = np.abs(back - fwd.mass)
    combined = back_se + fwd.se
    return IdentityResidual(
        bin_lo=fwd.bin_lo,
        bin_hi=fwd.bin_hi,
        forward_mass=fwd.mass,
        backward_mass=back,
        residual=residual,
        combined_se=combined,
    )


# ---------------------------------------------------------------------------
# boundary slopes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlopeEstimate:
    """One-sided boundary slope with a Richardson pair exposing truncation."""

    value: float  # Richardson extrapolant of (h, h/2)
    val_h: float
    val_h2: float
    h: float
    trunc_estimate: float


def _one_sided_slope(field: TemperatureField, lam_t: float, side: str, h: float) -> float:
    # quadratic through the known zero at the boundary and two interior nodes
    if side == "minus":
        w1 = float(field.interp(lam_t - h))
        w2 = float(field.interp(lam_t - 2 * h))
        return (w2 - 4.0 * w1) / (2.0 * h)
    w1 = float(field.interp(lam_t + h))
    w2 = float(field.interp(lam_t + 2 * h))
    return (4.0 * w1 - w2) / (2.0 * h)


def boundary_slope(
    field: TemperatureField, lam_t: float, side: str, h: "float | None" = None
) -> SlopeEstimate:
    """Second-order one-sided slope of w at the boundary, zero anchored there."""
    if side not in ("minus", "plus"):
        raise DomainError("side must be 'minus' or 'plus'")
    radii = field.radii
    if h is None:
        spacing = float(np.median(np.diff(radii)))
        h = 2.0 * spacing
    if side == "minus":
        window = (radii >= lam_t - 3 * h) & (radii < lam_t)
        if window.sum() < 3 or radii[0] > lam_t - 2 * h:
            raise CoverageError("need 3 field nodes within 3h below the boundary")
    else:
        window = (radii > lam_t) & (radii <= lam_t + 3 * h)
        if window.sum() < 3 or radii[-1] < lam_t + 2 * h:
            raise CoverageError("need 3 field nodes within 3h above the boundary")
    s_h = _one_sided_slope(field, lam_t, side, h)
    s_h2 = _one_sided_slope(field, lam_t, side, h / 2.0)
    rich = (4.0 * s_h2 - s_h) / 3.0
    return SlopeEstimate(
        value=rich,
        val_h=s_h,
        val_h2=s_h2,
        h=h,
        trunc_estimate=abs(s_h2 - s_h) / 3.0,
    )


# ---------------------------------------------------------------------------
# sampling from an MC field slice
# ---------------------------------------------------------------------------


def sample_from_field(
    field: TemperatureField,
    count: int,
    rng: np.random.Generator,
    lo: "float | None" = None,
    hi: "float | None" = None,
):
    """Draw from the density w(t0,x) x^2 / m on [lo, hi] of a stored slice."""
    lo = field.r0 if lo is None else lo
    hi = float(field.radii[-1]) if hi is None else hi
    cells = linear_field_cells(field.radii, field.values, lo, hi)
    return sample_from_cells(cells, count, rng)
