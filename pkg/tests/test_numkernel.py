"""Kernel tests: precision contexts, AGM, paths, quadrature, crossings.

Oracle values are frozen from independent computations (hand-iterated AGM,
closed-form contour integrals, angles read off by elementary trigonometry).
"""

import random

import mpmath as mp
import pytest

from haj.numkernel import (
    CircleAround,
    Crossing,
    LatticeCut,
    LatticeSegment,
    NegativeRealAxis,
    NonConvergence,
    ParamPath,
    Polyline,
    PrecisionCtx,
    QuadratureStall,
    TangencySuspected,
    agm,
    complex_from_json,
    complex_to_json,
    detect_crossings,
    integrate_path,
    winding_number,
)

CTX = PrecisionCtx(48)

# agm(1, sqrt(2)), frozen from 60 hand iterations a <- (a+b)/2, b <- sqrt(ab)
# at 70 digits; this is the lemniscatic value pi/varpi.
AGM_1_SQRT2 = "1.198140234735592207439922492280323878227212663215651558"
# agm(1, 3+4i) by the same hand iteration with the closest-to-mean branch rule.
AGM_1_3_4I_RE = "2.020103187239161848666101235454040502243240124815665679"
AGM_1_3_4I_IM = "1.485292844799555011187849521580774725620106056959227862"


def test_precision_ctx_validates():
    with pytest.raises(ValueError):
        PrecisionCtx(31)
    PrecisionCtx(32)  # boundary is legal


def test_tolerance_ladder():
    ctx = PrecisionCtx(100)
    with ctx.work():
        assert mp.almosteq(mp.log10(ctx.tol), -80)
        assert mp.almosteq(mp.log10(ctx.relation_tol), -60)
        assert mp.almosteq(mp.log10(ctx.agreement_tol), -50)


def test_serialization_roundtrip_1ulp():
    rng = random.Random(20260817)
    for digits in (32, 48, 128):
        ctx = PrecisionCtx(digits)
        with ctx.work():
            ulp = mp.power(10, 1 - digits)
            for _ in range(25):
                mag = rng.uniform(-30, 30)
                z = mp.mpc(rng.uniform(-1, 1), rng.uniform(-1, 1)) * mp.power(10, mag)
                back = complex_from_json(complex_to_json(z, ctx), ctx)
                assert abs(back - z) <= ulp * abs(z)


def test_serialization_exact_zero():
    ctx = PrecisionCtx(32)
    j = complex_to_json(mp.mpc(0), ctx)
    assert complex_from_json(j, ctx) == 0


def test_agm_frozen_real():
    with CTX.work():
        got = agm(1, mp.sqrt(2), CTX)
        assert abs(got - mp.mpf(AGM_1_SQRT2)) < mp.mpf(10) ** -46


def test_agm_frozen_complex():
    with CTX.work():
        got = agm(1, mp.mpc(3, 4), CTX)
        want = mp.mpc(mp.mpf(AGM_1_3_4I_RE), mp.mpf(AGM_1_3_4I_IM))
        assert abs(got - want) < mp.mpf(10) ** -46


def test_agm_fixed_and_degenerate_points():
    with CTX.work():
        assert agm(mp.mpf(3), mp.mpf(3), CTX) == 3
        assert agm(0, mp.mpc(2, 1), CTX) == 0
        assert agm(mp.mpc(2, 1), 0, CTX) == 0


def test_agm_homogeneity():
    # agm(ka, kb) = k agm(a, b); seeded complex samples
    rng = random.Random(7)
    with CTX.work():
        for _ in range(20):
            a = mp.mpc(rng.uniform(0.5, 3), rng.uniform(-1, 1))
            b = mp.mpc(rng.uniform(0.5, 3), rng.uniform(-1, 1))
            k = mp.mpc(rng.uniform(0.5, 2), rng.uniform(-0.5, 0.5))
            lhs = agm(k * a, k * b, CTX)
            rhs = k * agm(a, b, CTX)
            assert abs(lhs - rhs) < mp.mpf(10) ** -40 * abs(rhs)


def test_agm_matches_mpmath_on_positive_reals():
    rng = random.Random(11)
    with CTX.work():
        for _ in range(10):
            a = mp.mpf(rng.uniform(0.1, 10))
            b = mp.mpf(rng.uniform(0.1, 10))
            assert abs(agm(a, b, CTX) - mp.agm(a, b)) < mp.mpf(10) ** -40


def test_path_point_and_tangent_consistency():
    # tangent should match a central difference of point()
    paths = [
        ParamPath(CircleAround(mp.mpc(1, 2), mp.mpf("0.75"))),
        ParamPath(LatticeSegment(mp.mpc(-1, 0), mp.mpc(2, 3))),
        ParamPath(Polyline((mp.mpc(0), mp.mpc(1, 1), mp.mpc(2, 0)))),
    ]
    with CTX.work():
        h = mp.mpf(10) ** -20
        for path in paths:
            for t in (mp.mpf("0.15"), mp.mpf("0.4"), mp.mpf("0.8")):
                fd = (path.point(t + h) - path.point(t - h)) / (2 * h)
                assert abs(fd - path.tangent(t)) < mp.mpf(10) ** -15


def test_path_orientation_validation():
    with pytest.raises(ValueError):
        ParamPath(LatticeSegment(0, 1), orientation=2)
    with pytest.raises(ValueError):
        Polyline((mp.mpc(0),))


def test_polyline_breakpoints():
    p = ParamPath(Polyline((mp.mpc(0), mp.mpc(1), mp.mpc(1, 1), mp.mpc(0, 1))))
    with CTX.work():
        bps = p.breakpoints()
        assert len(bps) == 2
        assert mp.almosteq(bps[0], mp.mpf(1) / 3)


def test_integrate_residue_2pii():
    # closed form: contour integral of 1/z over the unit circle is 2 pi i
    p = ParamPath(CircleAround(0, 1))
    with CTX.work():
        v = integrate_path(lambda t: p.tangent(t) / p.point(t), p, CTX)
        assert abs(v - 2j * mp.pi) < CTX.tol * 10


def test_integrate_holomorphic_vanishes():
    p = ParamPath(CircleAround(mp.mpc(0, 1), mp.mpf(2)))
    with CTX.work():
        v = integrate_path(lambda t: p.point(t) ** 2 * p.tangent(t), p, CTX)
        assert abs(v) < CTX.tol * 10


def test_integrate_segment_closed_form():
    # int_a^b z^2 dz = (b^3 - a^3)/3
    a = mp.mpc(-1, 2)
    b = mp.mpc(3, 1)
    p = ParamPath(LatticeSegment(a, b - a))
    with CTX.work():
        v = integrate_path(lambda t: p.point(t) ** 2 * p.tangent(t), p, CTX)
        want = (b**3 - a**3) / 3
        assert abs(v - want) < CTX.tol * 10


def test_integrate_orientation_flips_sign():
    a = mp.mpc(0)
    b = mp.mpc(1, 1)
    fwd = ParamPath(LatticeSegment(a, b - a))
    rev = ParamPath(LatticeSegment(a, b - a), orientation=-1)
    with CTX.work():
        v1 = integrate_path(lambda t: mp.exp(fwd.point(t)) * fwd.tangent(t), fwd, CTX)
        v2 = integrate_path(lambda t: mp.exp(rev.point(t)) * rev.tangent(t), rev, CTX)
        assert abs(v1 + v2) < CTX.tol * 10


def test_integrate_splits_preserve_smooth_value():
    p = ParamPath(LatticeSegment(0, 1))
    with CTX.work():
        base = integrate_path(lambda t: mp.cos(t), p, CTX)
        split = integrate_path(
            lambda t: mp.cos(t), p, CTX, splits=(mp.mpf("0.3"), mp.mpf("0.7"))
        )
        assert abs(base - split) < CTX.tol * 10
        assert abs(base - mp.sin(1)) < CTX.tol * 10


def test_integrate_piecewise_with_declared_split():
    # |t - 1/2| integrand, smooth on each side of the declared split
    p = ParamPath(LatticeSegment(0, 1))
    with CTX.work():
        v = integrate_path(lambda t: abs(t - mp.mpf("0.5")), p, CTX, splits=(mp.mpf("0.5"),))
        assert abs(v - mp.mpf(1) / 4) < CTX.tol * 10


def test_quadrature_stall_on_undeclared_jump():
    p = ParamPath(LatticeSegment(0, 1))
    c = mp.mpf(2) ** mp.mpf("-0.5")
    with pytest.raises(QuadratureStall):
        integrate_path(lambda t: mp.mpf(0) if t < c else mp.mpf(1), p, CTX)


def test_axis_crossings_double_loop():
    # e^{4 pi i t}: crossings at t = 1/4 and 3/4, both downward (+1)
    crossings = detect_crossings(lambda t: mp.expjpi(4 * t), NegativeRealAxis(), CTX)
    assert len(crossings) == 2
    with CTX.work():
        assert abs(mp.mpf(crossings[0].param) - mp.mpf("0.25")) < CTX.tol * 4
        assert abs(mp.mpf(crossings[1].param) - mp.mpf("0.75")) < CTX.tol * 4
    assert [c.orientation for c in crossings] == [1, 1]


def test_axis_crossing_sum_matches_winding():
    # the signed crossing count of the log cut equals the winding number
    rng = random.Random(99)
    for _ in range(12):
        k = rng.choice([-3, -2, -1, 1, 2, 3])
        r = mp.mpf(rng.uniform(0.5, 2.0))
        wobble = mp.mpf(rng.uniform(0, 0.3))

        def trace(t, k=k, r=r, wobble=wobble):
            return r * (1 + wobble * mp.cospi(2 * t)) * mp.expjpi(2 * k * t)

        w = winding_number(trace, CTX)
        assert w == k
        crossings = detect_crossings(trace, NegativeRealAxis(), CTX)
        assert sum(c.orientation for c in crossings) == k


def test_axis_no_crossing_when_left_half_avoided():
    crossings = detect_crossings(
        lambda t: 3 + mp.expjpi(2 * t), NegativeRealAxis(), CTX
    )
    assert crossings == []


def test_axis_tangency_detected():
    with pytest.raises(TangencySuspected):
        detect_crossings(
            lambda t: mp.mpc(-1, (t - mp.mpf(1) / 3) ** 2), NegativeRealAxis(), CTX
        )


def test_axis_near_miss_is_clean():
    crossings = detect_crossings(
        lambda t: mp.mpc(-1, (t - mp.mpf(1) / 3) ** 2 + mp.mpf("1e-4")),
        NegativeRealAxis(),
        CTX,
    )
    assert crossings == []


def test_axis_touch_on_positive_side_is_clean():
    crossings = detect_crossings(
        lambda t: mp.mpc(1, (t - mp.mpf(1) / 3) ** 2), NegativeRealAxis(), CTX
    )
    assert crossings == []


def test_lattice_crossings_square_lattice():
    cut0 = LatticeCut(1, mp.mpc(0, 1), 0)
    crossings = detect_crossings(lambda t: mp.mpf(-1) / 8 + 2 * t + 0j, cut0, CTX)
    assert [(c.orientation, c.level) for c in crossings] == [(1, 0), (1, 1)]
    with CTX.work():
        assert abs(mp.mpf(crossings[0].param) - mp.mpf("0.3125")) < CTX.tol * 4
        assert abs(mp.mpf(crossings[1].param) - mp.mpf("0.8125")) < CTX.tol * 4


def test_lattice_crossings_reverse_orientation():
    cut0 = LatticeCut(1, mp.mpc(0, 1), 0)
    crossings = detect_crossings(lambda t: mp.mpf(15) / 8 - 2 * t + 0j, cut0, CTX)
    assert [c.orientation for c in crossings] == [-1, -1]
    assert [c.level for c in crossings] == [1, 0]


def test_lattice_crossing_grid_exact_hit():
    # crossing parameter 5/8 lies exactly on the 257-point sampling grid
    cut0 = LatticeCut(1, mp.mpc(0, 1), 0)
    crossings = detect_crossings(lambda t: mp.mpf(-1) / 8 + t + 0j, cut0, CTX)
    assert len(crossings) == 1
    assert mp.mpf(crossings[0].param) == mp.mpf("0.625")
    assert crossings[0].orientation == 1


def test_lattice_beta_cut_and_offset():
    cut1 = LatticeCut(1, mp.mpc(0, 1), 1, offset=mp.mpc(0, "0.25"))
    crossings = detect_crossings(lambda t: mp.mpc(0, 1) * t, cut1, CTX)
    # beta coordinate runs from -0.25 to 0.75: single crossing of level 1/2
    assert len(crossings) == 1
    assert crossings[0].orientation == 1
    with CTX.work():
        assert abs(mp.mpf(crossings[0].param) - mp.mpf("0.75")) < CTX.tol * 4


def test_lattice_tangency_detected():
    cut0 = LatticeCut(1, mp.mpc(0, 1), 0)
    with pytest.raises(TangencySuspected):
        detect_crossings(
            lambda t: mp.mpf("0.5") - (t - mp.mpf(1) / 3) ** 2 + 0j, cut0, CTX
        )


def test_lattice_constant_coordinate_near_cut_is_clean():
    # trace holds one coordinate at -1/8; no level is ever approached
    cut1 = LatticeCut(1, mp.mpc(0, 1), 1)
    crossings = detect_crossings(lambda t: mp.mpc(0, -0.125) + t, cut1, CTX)
    assert crossings == []


def test_lattice_skew_basis_coordinates():
    wa = mp.mpc(2, 1)
    wb = mp.mpc(-1, 3)
    cut = LatticeCut(wa, wb, 0)
    with CTX.work():
        z = mp.mpf("0.3") * wa + mp.mpf("-0.2") * wb
        assert abs(cut.coordinate(z) - mp.mpf("0.3")) < CTX.tol
        cutb = LatticeCut(wa, wb, 1)
        assert abs(cutb.coordinate(z) + mp.mpf("0.2")) < CTX.tol


def test_winding_number_seeded_circles():
    rng = random.Random(5)
    for _ in range(10):
        cx = rng.uniform(2, 4)  # circle strictly in the right half plane
        path = ParamPath(CircleAround(mp.mpc(cx, 0), 1))
        assert winding_number(lambda t: path.point(t), CTX) == 0
        around = ParamPath(CircleAround(0, mp.mpf(rng.uniform(0.5, 2))))
        assert winding_number(lambda t: around.point(t), CTX) == 1
