"""Data-model tests: profiles, nu-integrals, validation clauses, sampling,
boundary trajectories, field slices, and serialization round-trips."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from meltfront.core import (
    Boundary,
    DivergentMassError,
    DomainError,
    EmptyMassError,
    InitialData,
    PiecewiseProfile,
    Segment,
    TemperatureField,
    nu_integral,
    sample_from_profile,
    temperature_to_w,
    validate_initial_data,
    w_to_temperature,
)


def tent_data(r0=0.5, L0=1.9, gamma=1.0, C=1.0):
    """Tent bump: up 1.6(x-0.9) to peak 0.8 at 1.4, down to 0 at 1.9."""
    prof = PiecewiseProfile(
        [
            Segment(0.9, 1.4, "linear", (-1.44, 1.6)),
            Segment(1.4, 1.9, "linear", (3.04, -1.6)),
        ]
    )
    return InitialData(r0=r0, lambda0minus=L0, gamma=gamma, C=C, profile=prof)


# ---------------------------------------------------------------------------
# nu_integral
# ---------------------------------------------------------------------------


def test_nu_integral_unit_weight():
    assert nu_integral(0.0, 1.0) == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert nu_integral(1.0, 2.0) == pytest.approx(7.0 / 3.0, abs=1e-14)
    assert nu_integral(1.0, 2.0, 2.0) == pytest.approx(14.0 / 3.0, abs=1e-14)


def test_nu_integral_domain_errors():
    with pytest.raises(DomainError):
        nu_integral(2.0, 1.0)
    with pytest.raises(DomainError):
        nu_integral(-1.0, 1.0)
    with pytest.raises(DivergentMassError):
        nu_integral(1.0, math.inf, 1.0)


def test_nu_integral_tent_mass():
    prof = tent_data().profile
    # frozen by independent adaptive quadrature (err 9e-15)
    assert prof.nu_integral(0.9, 1.9) == pytest.approx(0.8006666666666666, abs=1e-12)
    assert nu_integral(0.0, 5.0, prof) == pytest.approx(0.8006666666666666, abs=1e-12)


def test_nu_integral_rational_tail_exact():
    prof = PiecewiseProfile([Segment(1.9, 6.0, "rational_tail", (1.2, 1.9))])
    # integrand after weighting is 1.2(x-1.9); frozen via quadrature: 10.086
    assert prof.nu_integral(1.9, 6.0) == pytest.approx(10.086, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(0.0, 10.0),
    b=st.floats(0.0, 10.0),
    c=st.floats(0.0, 10.0),
)
def test_nu_integral_additive(a, b, c):
    lo, mid, hi = sorted([a, b, c])
    prof = tent_data().profile
    left = prof.nu_integral(lo, mid)
    right = prof.nu_integral(mid, hi)
    total = prof.nu_integral(lo, hi)
    assert left + right == pytest.approx(total, abs=1e-12)


# ---------------------------------------------------------------------------
# conversions
# ---------------------------------------------------------------------------


def test_w_to_temperature_values():
    assert w_to_temperature(0.1, 2.0, 1.0) == pytest.approx(0.4, abs=1e-15)
    # zero w at the interface gives the curvature values gamma/x
    assert w_to_temperature(0.0, 2.0, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert w_to_temperature(0.0, 0.5, 1.0) == pytest.approx(2.0, abs=1e-15)


def test_conversion_domain():
    with pytest.raises(DomainError):
        w_to_temperature(0.1, 0.0, 1.0)
    with pytest.raises(DomainError):
        temperature_to_w(0.1, -1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(
    w=st.floats(-5, 5, allow_nan=False),
    x=st.floats(0.01, 100, allow_nan=False),
    gamma=st.floats(0.01, 10, allow_nan=False),
)
def test_conversion_roundtrip(w, x, gamma):
    v = w_to_temperature(w, x, gamma)
    back = temperature_to_w(v, x, gamma)
    assert back == pytest.approx(w, abs=1e-12, rel=1e-12)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def test_validate_accepts_plateau_with_tail():
    # 0.5 on the solid side, admissible rational tail above with C = c1
    prof = PiecewiseProfile(
        [
            Segment(0.5, 1.9, "constant", (0.5,)),
            Segment(1.9, math.inf, "rational_tail", (0.7, 1.9)),
        ]
    )
    data = InitialData(r0=0.5, lambda0minus=1.9, gamma=1.0, C=0.7, profile=prof)
    rep = validate_initial_data(data)
    assert rep.passed, rep.violations


def test_validate_accepts_tent():
    rep = validate_initial_data(tent_data())
    assert rep.passed, rep.violations
    assert rep.monotonicity_changes == 1  # up then down


def test_validate_rejects_negative_segment():
    prof = PiecewiseProfile([Segment(0.6, 1.0, "constant", (-0.1,))])
    data = InitialData(r0=0.5, lambda0minus=1.9, gamma=1.0, C=1.0, profile=prof)
    rep = validate_initial_data(data)
    assert not rep.passed
    assert any("negative" in v for v in rep.violations)


def test_validate_rejects_flat_liquid_profile():
    # w == 1 above the boundary violates the growth bound / tail decay
    prof = PiecewiseProfile(
        [
            Segment(0.5, 1.9, "constant", (0.5,)),
            Segment(1.9, 40.0, "constant", (1.0,)),
        ]
    )
    data = InitialData(r0=0.5, lambda0minus=1.9, gamma=1.0, C=1.0, profile=prof)
    rep = validate_initial_data(data)
    assert not rep.passed
    assert any("growth bound" in v for v in rep.violations)


def test_validate_rejects_oversized_tail():
    # tail coefficient above the stored C violates the growth bound
    prof = PiecewiseProfile([Segment(1.9, math.inf, "rational_tail", (2.0, 1.9))])
    data = InitialData(r0=0.5, lambda0minus=1.9, gamma=1.0, C=1.0, profile=prof)
    rep = validate_initial_data(data)
    assert not rep.passed


def test_monotonicity_count_with_jumps():
    # two plateaus separated by a zero gap: up, down, up, down = 3 flips
    prof = PiecewiseProfile(
        [
            Segment(0.6, 0.9, "constant", (1.0,)),
            Segment(1.2, 1.5, "constant", (2.0,)),
        ]
    )
    assert prof.monotonicity_change_count(0.5, 1.9) == 3
    # single plateau inside the window: up at entry, down at exit = 1 flip
    lone = PiecewiseProfile([Segment(1.0, 1.5, "constant", (1.0,))])
    assert lone.monotonicity_change_count(0.5, 1.9) == 1
    # continuous tent: no spurious junction jumps
    assert tent_data().profile.monotonicity_change_count(0.5, 1.9) == 1


def test_monotonicity_rational_tail_interior_peak():
    # (x - x0)/x^2 peaks at 2 x0; starting below that gives up-then-down
    prof = PiecewiseProfile([Segment(1.0, 10.0, "rational_tail", (1.0, 1.0))])
    assert prof.monotonicity_change_count(1.0, 10.0) == 1
    assert prof.sup_value() == pytest.approx(0.25, abs=1e-15)  # at x = 2


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def test_sample_mean_constant_segment():
    # w == 1 on (1,2): density x^2/m, analytic mean 45/28
    prof = PiecewiseProfile([Segment(1.0, 2.0, "constant", (1.0,))])
    data = InitialData(r0=1.0, lambda0minus=2.0, gamma=1.0, C=1.0, profile=prof)
    rng = np.random.default_rng(101)
    n = 200_000
    xs, mass = sample_from_profile(data, "solid", n, rng)
    assert mass == pytest.approx(7.0 / 3.0, abs=1e-12)
    se = xs.std(ddof=1) / math.sqrt(n)
    assert abs(xs.mean() - 45.0 / 28.0) < 3 * se


def test_sample_mean_tent():
    data = tent_data()
    rng = np.random.default_rng(202)
    n = 200_000
    xs, mass = sample_from_profile(data, "solid", n, rng)
    assert mass == pytest.approx(0.8006666666666666, abs=1e-12)
    se = xs.std(ddof=1) / math.sqrt(n)
    # frozen analytic mean 1.458284762697752
    assert abs(xs.mean() - 1.458284762697752) < 3 * se


def test_sample_support_containment():
    prof = PiecewiseProfile([Segment(1.0, 1.01, "constant", (0.3,))])
    data = InitialData(r0=0.5, lambda0minus=1.9, gamma=1.0, C=1.0, profile=prof)
    rng = np.random.default_rng(7)
    xs, _ = sample_from_profile(data, "solid", 5_000, rng)
    assert np.all((xs >= 1.0) & (xs <= 1.01))


def test_sample_empty_and_divergent():
    zero = PiecewiseProfile([Segment(0.6, 1.9, "constant", (0.0,))])
    data = InitialData(r0=0.5, lambda0minus=1.9, gamma=1.0, C=1.0, profile=zero)
    with pytest.raises(EmptyMassError):
        sample_from_profile(data, "solid", 10, np.random.default_rng(0))
    tail = PiecewiseProfile([Segment(1.9, math.inf, "rational_tail", (0.7, 1.9))])
    data2 = InitialData(r0=0.5, lambda0minus=1.9, gamma=1.0, C=0.7, profile=tail)
    with pytest.raises(DivergentMassError):
        sample_from_profile(data2, "liquid", 10, np.random.default_rng(0))
    # a finite cutoff makes the tail sampleable
    xs, m = sample_from_profile(data2, "liquid", 10, np.random.default_rng(0), x_max=6.0)
    assert np.all((xs >= 1.9) & (xs <= 6.0)) and m > 0


def test_sample_phase_argument():
    with pytest.raises(DomainError):
        sample_from_profile(tent_data(), "plasma", 1, np.random.default_rng(0))


@pytest.mark.parametrize(
    "segment,lo,hi",
    [
        (Segment(1.0, 2.0, "constant", (1.0,)), 1.0, 2.0),
        (Segment(0.9, 1.4, "linear", (-1.44, 1.6)), 0.9, 1.4),
        (Segment(1.9, 6.0, "rational_tail", (1.2, 1.9)), 1.9, 6.0),
    ],
    ids=["constant", "linear", "rational_tail"],
)
def test_sample_kolmogorov_smirnov(segment, lo, hi):
    """Inverse-CDF sampler against the analytic CDF, n = 1e5, level 0.001."""
    prof = PiecewiseProfile([segment])
    data = InitialData(r0=lo, lambda0minus=hi, gamma=1.0, C=2.0, profile=prof)
    rng = np.random.default_rng(55)
    n = 100_000
    xs, mass = sample_from_profile(data, "solid", n, rng)

    anti = np.polynomial.polynomial.polyint(segment.nu_poly())

    def cdf(x):
        x = np.clip(x, lo, hi)
        vals = np.polynomial.polynomial.polyval(x, anti)
        base = np.polynomial.polynomial.polyval(lo, anti)
        return (vals - base) / mass

    res = stats.kstest(xs, cdf)
    assert res.pvalue > 0.001


# ---------------------------------------------------------------------------
# boundary
# ---------------------------------------------------------------------------


def test_boundary_eval_and_left_limits():
    b = Boundary(
        times=[0.0, 1.0, 2.0],
        values=[1.8, 1.4, 1.0],
        left_values=[1.9, 1.4, 1.2],
    )
    assert b.lambda0minus == 1.9
    assert b(-0.5) == 1.9  # constant extension before time 0
    assert b(0.0) == 1.8  # right-continuous at the initial jump
    assert b.left_limit(0.0) == 1.9
    assert b(0.5) == pytest.approx(1.6)  # value 1.8 -> left limit 1.4
    assert b(1.0) == 1.4
    assert b(1.5) == pytest.approx(1.3)  # toward left limit 1.2 at t=2
    assert b.left_limit(2.0) == 1.2
    assert b(2.0) == 1.0
    assert b(3.0) == 1.0  # constant extension after the grid
    assert list(b.is_jump_node()) == [True, False, True]


def test_boundary_monotone_checks():
    with pytest.raises(DomainError):
        Boundary([0.0, 1.0], [1.0, 1.5])  # increasing
    with pytest.raises(DomainError):
        Boundary([0.0, 1.0], [1.0, 0.5], [0.9, 0.5])  # left limit below value
    with pytest.raises(DomainError):
        Boundary([0.0, 0.0], [1.0, 1.0])  # non-ascending times


def test_boundary_csv_roundtrip():
    b = Boundary([0.0, 0.5, 1.0], [1.8, 1.6, 1.5], [1.9, 1.6, 1.55])
    text = b.to_csv()
    assert text.splitlines()[0] == "t,lambda,lambda_left"
    b2 = Boundary.from_csv(text)
    assert np.array_equal(b2.times, b.times)
    assert np.array_equal(b2.values, b.values)
    assert np.array_equal(b2.left_values, b.left_values)
    assert b2.to_csv() == text


def test_boundary_vector_eval():
    b = Boundary([0.0, 1.0], [2.0, 1.0])
    ts = np.array([-1.0, 0.0, 0.25, 1.0, 9.0])
    out = b(ts)
    assert out.shape == ts.shape
    assert np.allclose(out, [2.0, 2.0, 1.75, 1.0, 1.0])


# ---------------------------------------------------------------------------
# temperature field
# ---------------------------------------------------------------------------


def test_field_clipping_and_phase():
    f = TemperatureField(
        time=0.5,
        radii=[0.4, 0.6, 1.0, 1.5, 2.0],
        values=[0.3, -0.01, 0.2, 0.0, 0.1],
        boundary_value=1.5,
        r0=0.5,
    )
    assert f.values[0] == 0.0  # inside the cold core
    assert f.values[1] == 0.0  # negative clipped
    assert list(f.phase) == ["solid", "solid", "solid", "liquid", "liquid"]


def test_field_csv_roundtrip():
    f = TemperatureField(0.5, [0.6, 1.0, 2.0], [0.1, 0.2, 0.05], 1.5, 0.5)
    text = f.to_csv()
    assert text.splitlines()[0] == "x,w,phase"
    f2 = TemperatureField.from_csv(text, 0.5, 1.5, 0.5)
    assert np.array_equal(f2.radii, f.radii)
    assert np.array_equal(f2.values, f.values)
    assert f2.to_csv() == text


def test_field_rejects_bad_grids():
    with pytest.raises(DomainError):
        TemperatureField(0.0, [1.0, 1.0], [0.1, 0.1], 1.5, 0.5)
    with pytest.raises(DomainError):
        TemperatureField(0.0, [1.0, 2.0], [0.1], 1.5, 0.5)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_initial_data_json_roundtrip():
    data = tent_data()
    doc = data.to_json()
    parsed = json.loads(doc)
    assert set(parsed) == {"r0", "lambda0minus", "gamma", "C", "segments"}
    back = InitialData.from_json(doc)
    assert back.r0 == data.r0
    assert back.lambda0minus == data.lambda0minus
    xs = np.linspace(0.5, 2.5, 301)
    assert np.allclose(back.profile(xs), data.profile(xs), atol=1e-15)


def test_initial_data_json_tail_defaults_anchor():
    doc = json.dumps(
        {
            "r0": 0.5,
            "lambda0minus": 1.9,
            "gamma": 1.0,
            "C": 0.7,
            "segments": [
                {"lo": 1.9, "hi": None, "kind": "rational_tail", "params": {"c1": 0.7}}
            ],
        }
    )
    data = InitialData.from_json(doc)
    seg = data.profile.segments[0]
    assert seg.params == (0.7, 1.9)
    assert math.isinf(seg.hi)


def test_initial_data_field_checks():
    with pytest.raises(DomainError):
        InitialData(r0=1.0, lambda0minus=0.9, gamma=1.0, C=1.0, profile=tent_data().profile)
    with pytest.raises(DomainError):
        InitialData(r0=0.5, lambda0minus=1.9, gamma=0.0, C=1.0, profile=tent_data().profile)


def test_segment_constraints():
    with pytest.raises(DomainError):
        Segment(1.0, 1.0, "constant", (1.0,))
    with pytest.raises(DomainError):
        Segment(1.0, 2.0, "cubic", (1.0,))
    with pytest.raises(DomainError):
        Segment(1.0, math.inf, "linear", (0.0, 0.5))
    with pytest.raises(DomainError):
        Segment(1.0, 2.0, "rational_tail", (1.0, 1.5))  # starts below anchor
    with pytest.raises(DomainError):
        PiecewiseProfile(
            [Segment(0.5, 1.5, "constant", (1.0,)), Segment(1.0, 2.0, "constant", (1.0,))]
        )
