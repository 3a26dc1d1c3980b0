"""Data model: piecewise initial profiles, admissibility validation, integrals
against the volume measure nu(dx) = x^2 dx, boundary trajectories, temperature
fields, and profile sampling.

Profiles are piecewise (constant / linear / rational-tail) rather than arbitrary
callables so that every admissibility clause is decidable in closed form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class DomainError(ValueError):
    """Argument outside an operation's domain."""


class CoverageError(ValueError):
    """A grid or field does not cover the region an operation needs."""


class EmptyMassError(ValueError):
    """Requested sampling support carries zero mass."""


class DivergentMassError(ValueError):
    """Requested integral or sampling mass is not finite."""


# ---------------------------------------------------------------------------
# Piecewise profiles
# ---------------------------------------------------------------------------

_KINDS = ("constant", "linear", "rational_tail")


@dataclass(frozen=True)
class Segment:
    """One piece of a profile on [lo, hi).

    kind "constant": value c                      params (c,)
    kind "linear":   value a + b*x                params (a, b)
    kind "rational_tail": value c1*(x - x0)/x^2   params (c1, x0)
    """

    lo: float
    hi: float
    kind: str
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise DomainError(f"unknown segment kind {self.kind!r}")
        if not (self.lo >= 0.0 and self.hi > self.lo):
            raise DomainError("segment needs 0 <= lo < hi")
        if math.isinf(self.hi) and self.kind == "linear" and self.params[1] != 0.0:
            raise DomainError("unbounded linear segment")
        if math.isinf(self.hi) and self.kind == "constant" and self.params[0] != 0.0:
            raise DomainError("constant segment extending to infinity must be zero")
        if self.kind == "rational_tail" and self.lo < self.params[1]:
            raise DomainError("rational tail starts below its anchor x0")

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.params[0])
        if self.kind == "linear":
            a, b = self.params
            return a + b * x
        c1, x0 = self.params
        return c1 * (x - x0) / (x * x)

    def nu_poly(self) -> np.ndarray:
        """Coefficients (ascending) of value(x) * x^2, a polynomial on the cell."""
        if self.kind == "constant":
            return np.array([0.0, 0.0, self.params[0]])
        if self.kind == "linear":
            a, b = self.params
            return np.array([0.0, 0.0, a, b])
        c1, x0 = self.params
        return np.array([-c1 * x0, c1])

    def monotone_pieces(self) -> list[tuple[float, float, int]]:
        """Split into (lo, hi, direction) pieces with direction in {-1, 0, +1}."""
        if self.kind == "constant":
            return [(self.lo, self.hi, 0)]
        if self.kind == "linear":
            return [(self.lo, self.hi, int(np.sign(self.params[1])))]
        c1, x0 = self.params
        if c1 == 0.0:
            return [(self.lo, self.hi, 0)]
        # derivative sign of (x - x0)/x^2 is sign(2*x0 - x)
        split = 2.0 * x0
        s = int(np.sign(c1))
        if split <= self.lo:
            return [(self.lo, self.hi, -s)]
        if split >= self.hi:
            return [(self.lo, self.hi, s)]
        return [(self.lo, split, s), (split, self.hi, -s)]


def _segment_from_json(obj: dict, lambda0minus: float) -> Segment:
    kind = obj["kind"]
    p = obj["params"]
    hi = obj["hi"]
    hi = math.inf if hi is None else float(hi)
    if kind == "constant":
        params: tuple[float, ...] = (float(p["c"]),)
    elif kind == "linear":
        params = (float(p["a"]), float(p["b"]))
    elif kind == "rational_tail":
        params = (float(p["c1"]), float(p.get("x0", lambda0minus)))
    else:
        raise DomainError(f"unknown segment kind {kind!r}")
    return Segment(float(obj["lo"]), hi, kind, params)


def _segment_to_json(seg: Segment) -> dict:
    if seg.kind == "constant":
        p = {"c": seg.params[0]}
    elif seg.kind == "linear":
        p = {"a": seg.params[0], "b": seg.params[1]}
    else:
        p = {"c1": seg.params[0], "x0": seg.params[1]}
    return {
        "lo": seg.lo,
        "hi": None if math.isinf(seg.hi) else seg.hi,
        "kind": seg.kind,
        "params": p,
    }


class PiecewiseProfile:
    """Non-overlapping piecewise profile; zero wherever no segment applies."""

    def __init__(self, segments: Iterable[Segment]):
        segs = sorted(segments, key=lambda s: s.lo)
        for a, b in zip(segs, segs[1:]):
            if b.lo < a.hi - 1e-15:
                raise DomainError("overlapping segments")
            if math.isinf(a.hi):
                raise DomainError("only the last segment may be unbounded")
        self.segments: tuple[Segment, ...] = tuple(segs)
        self.breakpoints = np.array(
            sorted({s.lo for s in segs} | {s.hi for s in segs if math.isfinite(s.hi)})
        )

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for s in self.segments:
            m = (x >= s.lo) & (x < s.hi)
            if m.any():
                out[m] = s.value(x[m])
        return out

    @property
    def support_hi(self) -> float:
        hi = 0.0
        for s in self.segments:
            if s.kind == "constant" and s.params[0] == 0.0:
                continue
            hi = max(hi, s.hi)
        return hi

    def nu_integral(self, lo: float, hi: float) -> float:
        """Integral of value(x) * x^2 dx over [lo, hi], exact per segment."""
        if lo > hi:
            raise DomainError("lo > hi")
        if math.isinf(hi):
            for s in self.segments:
                if math.isinf(s.hi) and max(lo, s.lo) < s.hi:
                    p = s.nu_poly()
                    if np.any(p != 0.0):
                        raise DivergentMassError("nu-integral diverges on an unbounded segment")
            hi = max((s.hi for s in self.segments if math.isfinite(s.hi)), default=lo)
            hi = max(hi, lo)
        total = 0.0
        for s in self.segments:
            a, b = max(lo, s.lo), min(hi, s.hi)
            if b <= a:
                continue
            anti = np.polynomial.polynomial.polyint(s.nu_poly())
            total += np.polynomial.polynomial.polyval(b, anti) - np.polynomial.polynomial.polyval(a, anti)
        return float(total)

    def _pieces_with_owner(self, lo: float, hi: float):
        """Monotone pieces tiling [lo, hi]: (a, b, direction, segment-or-None)."""
        pieces: list[tuple[float, float, int, "Segment | None"]] = []
        cursor = lo
        for s in self.segments:
            if s.lo > cursor + 1e-15:
                pieces.append((cursor, s.lo, 0, None))  # implicit zero gap
            for a, b, d in s.monotone_pieces():
                pieces.append((a, b, d, s))
            cursor = max(cursor, s.hi)
        if hi > cursor:
            pieces.append((cursor, hi, 0, None))
        out = []
        for a, b, d, seg in pieces:
            a2, b2 = max(a, lo), min(b, hi)
            if b2 > a2:
                out.append((a2, b2, d, seg))
        return out

    def monotonicity_change_count(self, lo: float = 0.0, hi: float = math.inf) -> int:
        """Exact count of monotonicity direction flips on [lo, hi].

        Jumps at segment boundaries count as monotone moves in the jump's
        direction; flat pieces never flip the direction. Left limits use each
        piece's own closed form, so continuous junctions never register.
        """
        events: list[int] = []
        prev_end = None
        for a, b, d, seg in self._pieces_with_owner(lo, hi):
            start = 0.0 if seg is None else float(seg.value(np.array([a]))[0])
            if prev_end is not None:
                step = start - prev_end
                if abs(step) > 1e-12 * max(1.0, abs(start), abs(prev_end)):
                    events.append(1 if step > 0 else -1)
            if d != 0:
                events.append(d)
            if math.isinf(b):
                prev_end = None
            else:
                prev_end = 0.0 if seg is None else float(seg.value(np.array([b]))[0])
        flips = 0
        for e1, e2 in zip(events, events[1:]):
            if e1 != e2:
                flips += 1
        return flips

    def sup_value(self, lo: float = 0.0, hi: float = math.inf) -> float:
        """Supremum of the profile on [lo, hi]; exact per segment."""
        best = 0.0
        for s in self.segments:
            a, b = max(lo, s.lo), min(hi, s.hi)
            if b <= a:
                continue
            if s.kind == "constant":
                best = max(best, s.params[0])
            elif s.kind == "linear":
                va, vb = s.value(np.array([a, b if math.isfinite(b) else a]))
                best = max(best, float(va), float(vb))
            else:
                c1, x0 = s.params
                cands = [a] + ([b] if math.isfinite(b) else [])
                if a < 2 * x0 < b:
                    cands.append(2 * x0)
                for c in cands:
                    best = max(best, float(s.value(np.array([c]))[0]))
        return best

    def sup_x_times_value(self) -> float:
        """Supremum of x * value(x) over the whole domain (decay constant)."""
        best = 0.0
        for s in self.segments:
            if s.kind == "constant":
                c = s.params[0]
                if c > 0:
                    if math.isinf(s.hi):
                        return math.inf
                    best = max(best, c * s.hi)
            elif s.kind == "linear":
                a, b = s.params
                # maximize (a + b x) x on [lo, hi]
                cands = [s.lo, s.hi]
                if b != 0.0 and s.lo < -a / (2 * b) < s.hi:
                    cands.append(-a / (2 * b))
                for c in cands:
                    best = max(best, (a + b * c) * c)
            else:
                c1, x0 = s.params
                # c1 (x - x0)/x increases toward c1
                if math.isinf(s.hi):
                    best = max(best, c1)
                else:
                    best = max(best, c1 * (s.hi - x0) / s.hi)
        return float(best)

    def to_json(self) -> list[dict]:
        return [_segment_to_json(s) for s in self.segments]


# ---------------------------------------------------------------------------
# nu integrals
# ---------------------------------------------------------------------------


def nu_integral(lo: float, hi: float, weight: "PiecewiseProfile | float | None" = None) -> float:
    """Integral of weight(x) * x^2 dx over [lo, hi].

    weight None means 1. Exact closed forms for every piecewise kind.
    """
    if lo > hi:
        raise DomainError("nu_integral needs lo <= hi")
    if lo < 0:
        raise DomainError("nu_integral needs lo >= 0")
    if weight is None:
        weight = 1.0
    if isinstance(weight, (int, float)):
        if math.isinf(hi):
            if weight == 0.0:
                return 0.0
            raise DivergentMassError("constant-weight nu-integral diverges on [lo, inf)")
        return float(weight) * (hi**3 - lo**3) / 3.0
    return weight.nu_integral(lo, hi)


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InitialData:
    """Cold-core radius, starting interface, conversion constant, growth
    constant for the liquid bound, and the initial profile."""

    r0: float
    lambda0minus: float
    gamma: float
    C: float
    profile: PiecewiseProfile

    def __post_init__(self) -> None:
        if not (self.r0 > 0 and self.lambda0minus > self.r0):
            raise DomainError("need 0 < r0 < lambda0minus")
        if self.gamma <= 0:
            raise DomainError("gamma must be positive")

    def to_json(self) -> str:
        doc = {
            "r0": self.r0,
            "lambda0minus": self.lambda0minus,
            "gamma": self.gamma,
            "C": self.C,
            "segments": self.profile.to_json(),
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "InitialData":
        doc = json.loads(text)
        segs = [_segment_from_json(o, float(doc["lambda0minus"])) for o in doc["segments"]]
        return InitialData(
            r0=float(doc["r0"]),
            lambda0minus=float(doc["lambda0minus"]),
            gamma=float(doc["gamma"]),
            C=float(doc["C"]),
            profile=PiecewiseProfile(segs),
        )


@dataclass
class ValidationReport:
    passed: bool
    violations: list[str] = field(default_factory=list)
    monotonicity_changes: int = 0


def _poly_nonneg_on(poly: np.ndarray, lo: float, hi: float, tol: float = 1e-11) -> bool:
    """Whether an ascending-coefficient polynomial is >= -tol on [lo, hi]."""
    poly = np.trim_zeros(np.asarray(poly, dtype=float), "b")
    if poly.size == 0:
        return True
    if math.isinf(hi) and poly.size > 1 and poly[-1] < 0:
        return False  # negative leading coefficient loses at infinity
    p = np.polynomial.Polynomial(poly)
    cands = [lo] + ([hi] if math.isfinite(hi) else [])
    dp = p.deriv()
    if dp.degree() >= 1:
        for r in np.atleast_1d(dp.roots()):
            if abs(r.imag) < 1e-12 and lo < r.real < hi:
                cands.append(float(r.real))
    return all(p(c) >= -tol for c in cands)


def validate_initial_data(data: InitialData) -> ValidationReport:
    """Check every admissibility clause; violations are report entries."""
    violations: list[str] = []
    prof = data.profile
    L0, r0, C = data.lambda0minus, data.r0, data.C

    # non-negativity everywhere
    for s in prof.segments:
        if s.kind == "constant":
            ok = s.params[0] >= 0
        elif s.kind == "linear":
            a, b = s.params
            hi = s.hi if math.isfinite(s.hi) else s.lo + 1.0
            ok = (a + b * s.lo) >= -1e-12 and (a + b * hi) >= -1e-12
        else:
            ok = s.params[0] >= 0
        if not ok:
            violations.append(f"negative values on segment [{s.lo}, {s.hi})")

    # growth bound w(x) <= C (x - L0) / x^2 for x >= L0
    for s in prof.segments:
        a, b = max(s.lo, L0), s.hi
        if b <= a:
            continue
        # h(x) = C (x - L0) - w(x) x^2 must be >= 0 on [a, b)
        h = np.zeros(5)
        h[0] += -C * L0
        h[1] += C
        w_poly = s.nu_poly()
        h[: w_poly.size] -= w_poly
        if not _poly_nonneg_on(h, a, b):
            violations.append(
                f"growth bound exceeded on segment [{s.lo}, {s.hi}) for C={C}"
            )

    # boundedness on the solid side (structural: only tails may be unbounded in x)
    for s in prof.segments:
        if s.lo < L0 and math.isinf(s.hi):
            violations.append("unbounded segment intersects the solid side")

    # tail decay O(1/x): an unbounded segment must be a rational tail (or zero)
    for s in prof.segments:
        if math.isinf(s.hi) and s.kind == "linear" and s.params != (0.0, 0.0):
            violations.append("tail segment does not decay")

    changes = prof.monotonicity_change_count(r0, L0)
    return ValidationReport(passed=not violations, violations=violations, monotonicity_changes=changes)


# ---------------------------------------------------------------------------
# w <-> temperature conversion
# ---------------------------------------------------------------------------


def w_to_temperature(w, x, gamma: float):
    """v = gamma/x - w; at the interface (w=0) this is the curvature value gamma/x."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("x must be positive")
    return gamma / x - np.asarray(w, dtype=float)


def temperature_to_w(v, x, gamma: float):
    """Inverse of w_to_temperature (the map is an involution in w <-> v)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("x must be positive")
    return gamma / x - np.asarray(v, dtype=float)


# ---------------------------------------------------------------------------
# Boundary trajectories
# ---------------------------------------------------------------------------


class Boundary:
    """Right-continuous non-increasing boundary on a time grid.

    Values between nodes are linearly interpolated from a node's value to the
    next node's left limit; left limits differ from values only at jump nodes.
    Before time 0 the boundary is the constant left_values[0].
    """

    def __init__(
        self,
        times: Sequence[float],
        values: Sequence[float],
        left_values: "Sequence[float] | None" = None,
        zeta: float = math.inf,
    ):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.left_values = (
            self.values.copy() if left_values is None else np.asarray(left_values, dtype=float)
        )
        self.zeta = float(zeta)
        if self.times.ndim != 1 or self.times.size < 1:
            raise DomainError("boundary needs at least one node")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("boundary times must be strictly ascending")
        if self.values.shape != self.times.shape or self.left_values.shape != self.times.shape:
            raise DomainError("boundary arrays must share one shape")
        if np.any(self.left_values < self.values - 1e-12):
            raise DomainError("left limits must dominate values (downward jumps only)")
        if np.any(self.values[:-1] < self.left_values[1:] - 1e-12):
            raise DomainError("boundary must be non-increasing between nodes")

    @property
    def lambda0minus(self) -> float:
        return float(self.left_values[0])

    def __call__(self, t):
        """Right-continuous evaluation, constant-extended on both ends."""
        shape = np.shape(t)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        below = t < self.times[0]
        out[below] = self.left_values[0]
        above = t >= self.times[-1]
        out[above] = self.values[-1]
        mid = ~(below | above)
        if np.any(mid):
            tm = t[mid]
            idx = np.searchsorted(self.times, tm, side="right") - 1
            t0, t1 = self.times[idx], self.times[idx + 1]
            v0, v1 = self.values[idx], self.left_values[idx + 1]
            out[mid] = v0 + (tm - t0) / (t1 - t0) * (v1 - v0)
        return out.reshape(shape) if shape else float(out[0])

    def left_limit(self, t):
        shape = np.shape(t)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.atleast_1d(np.asarray(self(t), dtype=float)).copy()
        hits = np.searchsorted(self.times, t)
        ok = hits < self.times.size
        at_node = np.zeros(t.shape, dtype=bool)
        at_node[ok] = self.times[hits[ok]] == t[ok]
        out[at_node] = self.left_values[hits[at_node]]
        return out.reshape(shape) if shape else float(out[0])

    def is_jump_node(self) -> np.ndarray:
        return self.left_values > self.values + 1e-14

    def to_csv(self) -> str:
        lines = ["t,lambda,lambda_left"]
        for t, v, lv in zip(self.times, self.values, self.left_values):
            lines.append(f"{t:.17g},{v:.17g},{lv:.17g}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_csv(text: str, zeta: float = math.inf) -> "Boundary":
        rows = [r for r in text.strip().splitlines() if r]
        if rows[0] != "t,lambda,lambda_left":
            raise DomainError("bad boundary CSV header")
        cols = np.array([[float(c) for c in r.split(",")] for r in rows[1:]])
        return Boundary(cols[:, 0], cols[:, 1], cols[:, 2], zeta=zeta)


# ---------------------------------------------------------------------------
# Temperature field slices
# ---------------------------------------------------------------------------


class TemperatureField:
    """One time slice of w on a radial grid with phase tags."""

    def __init__(self, time: float, radii, values, boundary_value: float, r0: float):
        self.time = float(time)
        self.radii = np.asarray(radii, dtype=float)
        vals = np.asarray(values, dtype=float).copy()
        if np.any(np.diff(self.radii) <= 0):
            raise DomainError("field radii must be strictly ascending")
        if vals.shape != self.radii.shape:
            raise DomainError("field arrays must share one shape")
        vals[self.radii <= r0] = 0.0
        np.maximum(vals, 0.0, out=vals)  # estimates are clipped at the positivity floor
        self.values = vals
        self.boundary_value = float(boundary_value)
        self.r0 = float(r0)

    @property
    def phase(self) -> np.ndarray:
        return np.where(self.radii < self.boundary_value, "solid", "liquid")

    def to_csv(self) -> str:
        lines = ["x,w,phase"]
        for x, w, ph in zip(self.radii, self.values, self.phase):
            lines.append(f"{x:.17g},{w:.17g},{ph}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_csv(text: str, time: float, boundary_value: float, r0: float) -> "TemperatureField":
        rows = [r for r in text.strip().splitlines() if r]
        if rows[0] != "x,w,phase":
            raise DomainError("bad field CSV header")
        xs, ws = [], []
        for r in rows[1:]:
            x, w, _ = r.split(",")
            xs.append(float(x))
            ws.append(float(w))
        return TemperatureField(time, xs, ws, boundary_value, r0)

    def interp(self, x) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.radii, self.values)


# ---------------------------------------------------------------------------
# Profile sampling
# ---------------------------------------------------------------------------


def _cells_for_range(prof: PiecewiseProfile, lo: float, hi: float):
    """Cells (a, b, poly, mass) of the nu-weighted density inside [lo, hi]."""
    cells = []
    for s in prof.segments:
        a, b = max(lo, s.lo), min(hi, s.hi)
        if b <= a or not math.isfinite(b):
            if b > a:  # infinite cell with nonzero weight
                p = s.nu_poly()
                if np.any(p != 0.0):
                    raise DivergentMassError("sampling mass diverges; pass a finite cutoff")
            continue
        poly = s.nu_poly()
        anti = np.polynomial.polynomial.polyint(poly)
        mass = np.polynomial.polynomial.polyval(b, anti) - np.polynomial.polynomial.polyval(a, anti)
        if mass < -1e-12:
            raise DomainError("negative mass cell; profile must be non-negative")
        cells.append((a, b, poly, max(mass, 0.0)))
    return cells


def sample_from_cells(cells, count: int, rng: np.random.Generator):
    """Inverse-CDF draws from a density given as polynomial cells.

    cells: list of (a, b, poly, mass) with poly the ascending coefficients of
    the unnormalized density on [a, b] and mass its integral there. Returns
    (samples, total_mass). Bisection on the exact cell antiderivative.
    """
    masses = np.array([c[3] for c in cells]) if cells else np.empty(0)
    total = float(masses.sum()) if cells else 0.0
    if not math.isfinite(total):
        raise DivergentMassError("density mass is not finite")
    if total <= 0.0:
        raise EmptyMassError("density carries no mass on the requested support")

    u = rng.random(count) * total
    edges = np.concatenate([[0.0], np.cumsum(masses)])
    idx = np.clip(np.searchsorted(edges, u, side="right") - 1, 0, len(cells) - 1)
    samples = np.empty(count)
    for j, (a, b, poly, mass) in enumerate(cells):
        m = idx == j
        if not m.any():
            continue
        target = u[m] - edges[j]
        anti = np.polynomial.polynomial.polyint(poly)
        base = np.polynomial.polynomial.polyval(a, anti)
        xlo = np.full(m.sum(), a)
        xhi = np.full(m.sum(), b)
        for _ in range(64):  # bisection: cell CDF is monotone, poly is exact
            mid = 0.5 * (xlo + xhi)
            cdf = np.polynomial.polynomial.polyval(mid, anti) - base
            takes_hi = cdf < target
            xlo[takes_hi] = mid[takes_hi]
            xhi[~takes_hi] = mid[~takes_hi]
        samples[m] = 0.5 * (xlo + xhi)
    return samples, total


def linear_field_cells(radii, values, lo: float, hi: float):
    """Polynomial cells of x^2 times the linear interpolant of a sampled field.

    Cells feed sample_from_cells; values are treated as 0 outside the grid.
    """
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    cells = []
    for i in range(radii.size - 1):
        a, b = max(lo, radii[i]), min(hi, radii[i + 1])
        if b <= a:
            continue
        slope = (values[i + 1] - values[i]) / (radii[i + 1] - radii[i])
        c0 = values[i] - slope * radii[i]
        poly = np.array([0.0, 0.0, c0, slope])
        anti = np.polynomial.polynomial.polyint(poly)
        mass = np.polynomial.polynomial.polyval(b, anti) - np.polynomial.polynomial.polyval(a, anti)
        cells.append((a, b, poly, max(float(mass), 0.0)))
    return cells


def sample_from_profile(
    data: InitialData,
    phase: str,
    count: int,
    rng: np.random.Generator,
    x_max: "float | None" = None,
):
    """Draw `count` points from the density w(0-,x) x^2 / m on one phase's support.

    Returns (samples, m). The liquid support is truncated at x_max when the
    profile extends beyond it (admissible tails carry infinite nu-mass, so a
    finite horizon-dependent cutoff is required there).
    """
    if phase == "solid":
        lo, hi = data.r0, data.lambda0minus
    elif phase == "liquid":
        lo = data.lambda0minus
        hi = data.profile.support_hi
        if x_max is not None:
            hi = min(hi, x_max) if math.isfinite(hi) else x_max
    else:
        raise DomainError("phase must be 'solid' or 'liquid'")
    cells = _cells_for_range(data.profile, lo, hi)
    return sample_from_cells(cells, count, rng)
