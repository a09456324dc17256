import math

import numpy as np
import pytest

from drsurf.complex_core import LAMBDA, Cochain, boundary, build_double, coboundary
from drsurf.critical_maps import (YoungDiagram, b_recursive, b_young, chain_patch, chain_powers,
                                  change_base_point, continue_holomorphic, dz_diamond, dz_lambda,
                                  exp_rectangular, exp_series, exponential, face_products,
                                  face_ramification, faces_within, integrate_fdZ, is_convex, modulus,
                                  power, power_bound, power_path_residual, powers, ramification_number,
                                  rebase, refine, region_boundary, rhombus_patch, sextant_patch,
                                  smallest_angle, square_patch, square_torus, train_tracks,
                                  translated_powers, tri_hex_torus, young_coefficient, young_diagrams)
from drsurf.discrete_calculus import cr_residuals, is_holomorphic
from drsurf.errors import (BadTheta, DRSError, NotCritical, NotSimplyConnected, OnSingularCircle,
                           PassesThroughOrigin)
from drsurf.fixtures import tri_hex_params
from drsurf.homology import cycle_basis

# Powers on the chain {0, 1/n, ..., 1}, derived by hand from the trapezoid recursion.
CHAIN_POWERS = {
    3: lambda x, n: x**3 + x / (2 * n**2),
    4: lambda x, n: x**4 + 2 * x**2 / n**2,
    5: lambda x, n: x**5 + 5 * x**3 / n**2 + 3 * x / (2 * n**4),
    6: lambda x, n: x**6 + 10 * x**4 / n**2 + 23 * x**2 / (2 * n**4),
    7: lambda x, n: x**7 + 35 * x**5 / (2 * n**2) + 49 * x**3 / n**4 + 45 * x / (4 * n**6),
}

# B^k as (coefficient, row lengths) pairs
TABLE_B = {
    0: [],
    1: [(1, (1,))],
    2: [(-1, (1, 1)), (2, (2,))],
    3: [(1, (1, 1, 1)), (-6, (2, 1)), (6, (3,))],
    4: [(-1, (1, 1, 1, 1)), (8, (2, 1, 1)), (6, (2, 2)), (-36, (3, 1)), (24, (4,))],
    5: [(1, (1, 1, 1, 1, 1)), (-10, (2, 1, 1, 1)), (-20, (2, 2, 1)), (60, (3, 1, 1)), (90, (3, 2)),
        (-240, (4, 1)), (120, (5,))],
    6: [(-1, (1,) * 6), (12, (2, 1, 1, 1, 1)), (30, (2, 2, 1, 1)), (-90, (3, 1, 1, 1)), (20, (2, 2, 2)),
        (-360, (3, 2, 1)), (480, (4, 1, 1)), (-90, (3, 3)), (1080, (4, 2)), (-1800, (5, 1)), (720, (6,))],
}


def z_form(m):
    return Cochain(m.dc, 0, LAMBDA, m.vertex_z)


def neighbors_of_origin(m):
    dc, o = m.dc, m.origin
    out = set()
    for a, b in dc.edges:
        if a == o:
            out.add(int(b))
        elif b == o:
            out.add(int(a))
    return sorted(out)


# ------------------------------------------------------------- generators

def test_square_torus_is_critical_and_flat():
    m = square_torus(2, 3, math.pi / 3)
    assert m.check() <= 1e-12
    assert modulus(m) == pytest.approx(1.5 * np.exp(2j * math.pi / 3), abs=1e-13)
    assert np.allclose(m.dc.conic_angles(), 2 * math.pi, atol=1e-12)


def test_square_torus_plus_layout_modulus():
    m = square_torus(2, 3, 0.9, layout="plus")
    assert modulus(m) == pytest.approx(1.5 * np.exp(1j * (math.pi - 1.8)), abs=1e-13)


def test_square_torus_rho_values():
    m = square_torus(1, 1, math.pi / 4)
    assert np.allclose(m.dc.rho, 1.0)
    m = square_torus(1, 2, 0.4)
    assert np.allclose(np.sort(np.unique(np.round(m.dc.rho, 12))), sorted([math.tan(0.4), 1 / math.tan(0.4)]))


@pytest.mark.parametrize("theta", [0.0, math.pi / 2, -0.3])
def test_square_torus_rejects_bad_angles(theta):
    with pytest.raises(BadTheta):
        square_torus(1, 1, theta)


def test_tri_hex_torus_is_critical():
    rho = tri_hex_params((1.0, 0.9))
    assert rho[0] * rho[1] + rho[1] * rho[2] + rho[2] * rho[0] == pytest.approx(1.0, abs=1e-12)
    m = tri_hex_torus(rho, m=3, n=2)
    assert m.check() <= 1e-12
    assert m.dc.closed and m.dc.genus == 1
    assert np.allclose(m.dc.conic_angles(), 2 * math.pi, atol=1e-12)


def test_equilateral_tri_hex_default():
    m = tri_hex_torus(m=2, n=2)
    assert np.allclose(m.dc.rho, 1 / math.sqrt(3))


def test_tri_hex_rejects_non_critical_parameters():
    with pytest.raises(NotCritical):
        tri_hex_torus((1.0, 1.0, 1.0))


def test_check_detects_broken_rhombus():
    m = square_patch(1)
    bad = type(m)(dc=m.dc, corner_z=m.corner_z * np.array([1, 1, 1.1, 1]), delta=m.delta)
    with pytest.raises(NotCritical):
        bad.check()


def test_sextant_patch_grows_quadratically():
    counts = [sextant_patch(r).dc.n_quads for r in (4, 8)]
    assert 3.0 <= counts[1] / counts[0] <= 5.0
    assert sextant_patch(4).check() <= 1e-12


def test_single_rhombus_patch():
    m = rhombus_patch([(0, 0)], (np.exp(-0.5j), np.exp(0.5j)))
    assert m.dc.n_quads == 1 and not m.dc.closed


def test_refine_quadruples_faces_and_halves_delta():
    m = square_torus(1, 1, math.pi / 4)
    r = refine(m)
    assert r.dc.n_quads == 4 * m.dc.n_quads
    assert r.delta == m.delta / 2
    assert r.check() <= 1e-12
    assert r.dc.genus == 1
    assert np.allclose(r.dc.rho, 1.0)
    # refined basis has the same displacements
    dz, dzr = dz_diamond(m), dz_diamond(r)
    for a, b in zip(m.basis, r.basis):
        assert dzr(b) == pytest.approx(dz(a), abs=1e-12)


def test_refine_keeps_disc_positions():
    m = square_patch(2, theta=0.6)
    r = refine(m)
    assert r.check() <= 1e-12
    assert not r.dc.closed
    assert r.vertex_z[r.origin] == 0


# ------------------------------------------------------------------ dZ, f dZ

def test_dz_is_holomorphic_on_the_double():
    m = square_torus(2, 3, 0.8)
    assert is_holomorphic(dz_lambda(m))[0]


def test_f_dz_with_constant_gives_dz():
    m = square_patch(3, theta=0.7)
    one = Cochain(m.dc, 0, LAMBDA, np.ones(m.dc.n_vertices))
    assert np.abs(integrate_fdZ(m, one).values - dz_lambda(m).values).max() <= 1e-14


def test_f_dz_with_z_is_half_d_z_squared():
    m = square_patch(3, theta=0.7)
    lhs = integrate_fdZ(m, z_form(m)).values
    rhs = 0.5 * coboundary(power(m, 2)).values
    assert np.abs(lhs - rhs).max() <= 1e-12


def test_f_dz_of_holomorphic_is_closed_and_holomorphic():
    m = square_patch(3, theta=0.4)
    f = exponential(m, 0.3 - 0.8j)
    w = integrate_fdZ(m, f)
    assert np.abs(m.dc.d1_lambda @ w.values).max() <= 1e-12
    assert is_holomorphic(w, tol=1e-10)[0]


# ------------------------------------------------------------- exponential

def test_face_products_are_one_for_random_parameters(rng):
    m = sextant_patch(5)
    for _ in range(100):
        r = rng.uniform(0.0, 4.0)
        if abs(r - 2.0) < 0.1:
            continue  # ill conditioned next to the singular circle
        lam = r / m.delta * np.exp(1j * rng.uniform(0, 2 * math.pi))
        assert np.abs(face_products(m, lam) - 1).max() <= 1e-13


def test_face_products_lose_digits_only_near_the_singular_circle():
    m = sextant_patch(5)
    far = np.abs(face_products(m, 1.0 * np.exp(0.3j)) - 1).max()
    assert far <= 1e-14
    # still equal to 1 up to the amplified rounding of the corner positions
    near = np.abs(face_products(m, 2.001 * np.exp(0.3j)) - 1).max()
    assert near <= 1e-10


def test_exponential_at_zero_is_constant():
    m = square_patch(3)
    assert np.abs(exponential(m, 0).values - 1).max() == 0


def test_exponential_is_holomorphic(rng):
    m = square_patch(3, theta=0.5)
    for _ in range(10):
        lam = complex(*rng.normal(size=2))
        assert cr_residuals(exponential(m, lam)).max() <= 1e-10


def test_exponential_along_an_edge():
    m = square_patch(2, theta=0.5)
    lam = 0.4 + 0.2j
    e = exponential(m, lam).values
    for v in neighbors_of_origin(m):
        x = m.vertex_z[v]
        assert e[v] == pytest.approx((2 + lam * x) / (2 - lam * x), abs=1e-15)


@pytest.mark.parametrize("theta,delta", [(0.5, 1.0), (math.pi / 4, 0.5), (1.2, 0.3)])
def test_exponential_matches_rectangular_closed_form(theta, delta):
    m = square_patch(3, theta=theta, delta=delta)
    lam = 0.9 - 0.6j
    e = exponential(m, lam).values
    u, w = delta * np.exp(-1j * theta), delta * np.exp(1j * theta)
    A = np.array([[u.real, w.real], [u.imag, w.imag]])
    nm = np.rint(np.linalg.solve(A, np.vstack([m.vertex_z.real, m.vertex_z.imag]))).astype(int)
    ref = exp_rectangular(theta, delta, lam, nm[0], nm[1])
    assert np.abs(e - ref).max() <= 1e-13 * np.abs(ref).max()


def test_exponential_converges_quadratically():
    lam, theta = 0.7 + 0.4j, 0.6
    errs = []
    for level in range(1, 5):
        N = 2**level
        m = square_patch(2 * N, theta=theta, delta=1.0 / N, lo=0)
        target = 2 * (np.exp(-1j * theta) + np.exp(1j * theta))
        v = int(np.argmin(np.abs(m.vertex_z - target)))
        assert abs(m.vertex_z[v] - target) <= 1e-12
        errs.append(abs(exponential(m, lam).values[v] - np.exp(lam * target)))
    ratios = [errs[i] / errs[i + 1] for i in range(3)]
    assert all(3.4 <= r <= 4.6 for r in ratios), ratios


def test_singular_circle_is_rejected():
    m = square_patch(2, delta=0.5)
    with pytest.raises(OnSingularCircle):
        exponential(m, 4.0)
    with pytest.raises(OnSingularCircle):
        exponential(m, 4j * np.exp(0.3j))


def test_exponential_needs_a_disc():
    with pytest.raises(NotSimplyConnected):
        exponential(square_torus(1, 1, 0.7), 0.5)


def test_change_of_base_point_identity():
    m = square_patch(3, theta=0.8)
    assert change_base_point(m, m.origin, 1.0, 0.5 + 0.5j) <= 1e-15


def test_change_of_base_point_to_a_neighbor(rng):
    m = square_patch(3, theta=0.8)
    b = neighbors_of_origin(m)[0]
    for _ in range(5):
        lam = complex(*rng.uniform(-0.6, 0.6, size=2))
        assert change_base_point(m, b, 2.0, lam) <= 1e-10


def test_rebase_is_a_critical_map():
    m = square_patch(2, theta=0.8)
    r = rebase(m, 1 - 1j, 3)
    assert r.check() <= 1e-12
    assert r.vertex_z[3] == 0
    with pytest.raises(DRSError):
        rebase(m, 0, 3)


# ------------------------------------------------------------------ powers

@pytest.mark.parametrize("n", [5, 10])
def test_chain_powers_closed_forms(n):
    table = chain_powers(n, 7)
    x = np.arange(n + 1) / n
    for k, formula in CHAIN_POWERS.items():
        assert np.abs(table[k] - formula(x, n)).max() <= 1e-12, k


def test_chain_low_powers_are_exact():
    table = chain_powers(10, 2)
    x = np.arange(11) / 10
    assert np.abs(table[1] - x).max() <= 1e-15
    assert np.abs(table[2] - x**2).max() <= 1e-15


def test_chain_patch_gamma_values_match_chain():
    n = 6
    m = chain_patch(n)
    t = powers(m, 5)
    ref = chain_powers(n, 5)
    # on the thin strip the midpoints sit half a step off the axis
    assert np.abs(t[1][: n + 1] - ref[1]).max() <= 1e-15
    assert np.abs(t[2][: n + 1] - ref[2]).max() <= 1e-5


def test_neighbor_formula_up_to_degree_ten():
    m = square_patch(2, theta=0.5)
    t = powers(m, 10)
    for v in neighbors_of_origin(m):
        x = m.vertex_z[v]
        for k in range(1, 11):
            pred = math.factorial(k) / 2 ** (k - 1) * x**k
            assert abs(t[k][v] - pred) <= 1e-12 * max(1.0, abs(pred)), (v, k)


def test_next_neighbor_formula():
    m = square_patch(3, theta=0.5)
    t = powers(m, 7)
    dc = m.dc
    checked = 0
    for q, quad in enumerate(dc.quads):
        k0 = int(np.flatnonzero(quad == m.origin)[0]) if m.origin in quad else None
        if k0 is None:
            continue
        z = np.roll(m.corner_z[q], -k0)
        y = int(np.roll(quad, -k0)[2])
        half = abs(np.angle((z[1] - z[0]) / (z[3] - z[0]))) / 2
        yz = m.vertex_z[y]
        for k in range(1, 8):
            pred = (math.factorial(k) / 2 ** (2 * k - 2) * math.sin(k * half)
                    / (math.sin(half) * math.cos(half) ** (k - 1)) * yz**k)
            assert abs(t[k][y] - pred) <= 1e-12 * max(1.0, abs(pred))
        checked += 1
    assert checked == 4


def test_powers_are_path_independent_and_holomorphic():
    for m in (square_patch(3, theta=0.7), sextant_patch(6)):
        t = powers(m, 6)
        assert power_path_residual(m, t) <= 1e-12
        for k in range(7):
            assert cr_residuals(Cochain(m.dc, 0, LAMBDA, t[k])).max() <= 1e-9 * max(1, np.abs(t[k]).max())


def test_low_powers_are_exact_polynomials():
    m = sextant_patch(5)
    t = powers(m, 2)
    assert np.abs(t[1] - m.vertex_z).max() <= 1e-13
    assert np.abs(t[2] - m.vertex_z**2).max() <= 1e-12


@pytest.mark.parametrize("make", [lambda: square_patch(4, theta=0.5), lambda: square_patch(4, theta=1.1),
                                  lambda: sextant_patch(8), lambda: square_patch(3, theta=0.3, delta=0.25)])
def test_power_error_bound_holds(make):
    m = make()
    eta = smallest_angle(m.dc)
    t = powers(m, 6)
    z = m.vertex_z
    for k in range(2, 7):
        lhs = np.abs(t[k] - z**k)
        rhs = power_bound(k, eta) * np.abs(z) ** (k - 2) * m.delta**2
        assert (lhs <= rhs + 1e-12).all(), k


def test_power_error_shrinks_under_refinement():
    errs = []
    for level in range(3):
        N = 2**level
        m = square_patch(2 * N, theta=0.6, delta=1.0 / N, lo=0)
        target = 2 * (np.exp(-0.6j) + np.exp(0.6j))
        v = int(np.argmin(np.abs(m.vertex_z - target)))
        errs.append(abs(power(m, 4).values[v] - target**4))
    assert 3.0 <= errs[0] / errs[1] <= 5.0 and 3.0 <= errs[1] / errs[2] <= 5.0


def test_power_bound_constant():
    assert power_bound(2, 0.3) == 1.0
    assert power_bound(4, math.pi / 2) == pytest.approx(12 * 16)


def test_powers_reject_negative_degree():
    with pytest.raises(DRSError):
        powers(square_patch(1), -1)


# ------------------------------------------------------------------ series

def test_series_at_zero_parameter():
    r = exp_series(square_patch(2), 0.0, 0)
    assert np.all(r.partial == 1) and r.gaps[0] == 0


def test_series_converges_inside_the_disc():
    m = square_patch(3, delta=1.0)
    r = exp_series(m, 1.0 * np.exp(0.4j), 60)
    tail = r.gaps[20:]
    assert tail[-1] <= 1e-10
    assert all(b <= a * (1 + 1e-9) + 1e-14 for a, b in zip(tail, tail[1:]))


def test_series_terms_grow_outside_the_disc():
    m = square_patch(2)
    r = exp_series(m, 4.0, 30)
    assert r.term_norms[30] > r.term_norms[20] > r.term_norms[10]
    # at a neighbor the k-th term is 2 (lambda x / 2)^k
    x = m.vertex_z[neighbors_of_origin(m)[0]]
    assert r.term_norms[30] >= 2 * abs(2 * x) ** 30 * (1 - 1e-12)


def test_series_on_the_singular_circle_has_no_target():
    r = exp_series(square_patch(1), 2.0, 3)
    assert r.gaps == [None] * 4


# ---------------------------------------------------------- Young diagrams

def test_single_row_and_single_column_coefficients():
    for n in range(1, 9):
        assert young_coefficient(YoungDiagram.from_rows((n,))) == math.factorial(n)
        assert young_coefficient(YoungDiagram.from_rows((1,) * n)) == (-1) ** (n + 1)


def test_rows_and_columns_are_transposes():
    y = YoungDiagram.from_rows((7, 6, 2))
    assert y.rows == (7, 6, 2)
    assert y.columns == (3, 3, 2, 2, 2, 2, 1)
    assert y.degree == 15 and y.parts == 7
    assert y.multiplicities == [(3, 2), (2, 4), (1, 1)]


def test_young_rejects_empty_columns():
    with pytest.raises(DRSError):
        YoungDiagram((2, 0))


@pytest.mark.parametrize("k", range(7))
def test_young_table_rows(k):
    expected = {YoungDiagram.from_rows(rows): c for c, rows in TABLE_B[k]}
    got = {y: young_coefficient(y) for y in young_diagrams(k)} if k else {}
    assert got == expected


@pytest.mark.parametrize("k", range(1, 9))
def test_young_coefficients_sum_to_one(k):
    assert sum(young_coefficient(y) for y in young_diagrams(k)) == 1


def test_partition_counts():
    assert [len(young_diagrams(k)) for k in range(1, 9)] == [1, 2, 3, 5, 7, 11, 15, 22]


def test_b_routes_agree_at_random_values(rng):
    zvals = np.concatenate([[1.0], rng.normal(size=8) + 1j * rng.normal(size=8)])
    a, b = b_recursive(zvals, 8), b_young(zvals, 8)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_b_of_continuous_powers_is_power():
    # with Z^j(b) = b^j exactly, B^k(b) = b^k
    b = 0.3 - 0.7j
    zvals = [b**j for j in range(9)]
    assert np.allclose(b_recursive(zvals, 8), zvals, atol=1e-13)


def test_translated_powers_at_origin_are_powers():
    m = square_patch(3, theta=0.7)
    t = powers(m, 5)
    for k in range(6):
        assert np.abs(translated_powers(m, 1.0, m.origin, k).values - t[k]).max() <= 1e-12


@pytest.mark.parametrize("b", [5, 17, 30])
def test_translated_powers_match_rebased_map(b):
    m = square_patch(3, theta=0.7)
    a = 0.8 + 0.3j
    r = rebase(m, a, b)
    direct = powers(r, 8)
    for k in range(9):
        via_rec = translated_powers(m, a, b, k).values
        via_young = translated_powers(m, a, b, k, route="young").values
        scale = max(1.0, np.abs(direct[k]).max())
        assert np.abs(via_rec - via_young).max() <= 1e-10 * scale
        assert np.abs(via_rec - direct[k]).max() <= 1e-9 * scale


def test_translated_powers_reject_unknown_route():
    with pytest.raises(DRSError):
        translated_powers(square_patch(1), 1.0, 0, 2, route="other")


# ------------------------------------------------------------ ramification

def test_ramification_of_z_and_z_squared():
    m = square_patch(5, theta=0.7)
    loop = region_boundary(m.dc, faces_within(m, 4.0))
    assert ramification_number(z_form(m), loop) == 1
    assert ramification_number(power(m, 2), loop) == 2
    assert ramification_number(power(m, 3), loop) == 3


def test_ramification_of_a_constant_is_zero():
    m = square_patch(3)
    loop = region_boundary(m.dc, faces_within(m, 2.5))
    f = Cochain(m.dc, 0, LAMBDA, np.full(m.dc.n_vertices, 2 - 1j))
    assert ramification_number(f, loop) == 0


def test_loop_away_from_origin_has_no_ramification():
    m = square_patch(4, theta=0.7)
    far = [q for q in range(m.dc.n_quads) if abs(m.corner_z[q].mean() - 3 * np.exp(0.7j)) < 1.2]
    loop = region_boundary(m.dc, far)
    assert ramification_number(z_form(m), loop) == 0


def test_face_ramification_values():
    m = square_patch(4, theta=0.9)
    for f in (z_form(m), power(m, 2), power(m, 3), exponential(m, 1 + 1j)):
        vals = face_ramification(f)
        vals = vals[~np.isnan(vals)]
        assert set(vals.tolist()) <= {-1.0, 0.0, 1.0}


def test_loop_through_origin_is_rejected():
    m = square_patch(2)
    q = int(np.flatnonzero((m.dc.quads == m.origin).any(axis=1))[0])
    with pytest.raises(PassesThroughOrigin):
        ramification_number(z_form(m), list(m.dc.quads[q]))


def test_region_boundary_is_counterclockwise():
    m = square_patch(3)
    loop = region_boundary(m.dc, range(m.dc.n_quads))
    z = m.vertex_z[loop]
    area = 0.5 * np.sum((z.conj() * np.roll(z, -1)).imag)
    assert area > 0
    assert len(loop) == 4 * 6


# ------------------------------------------------------------ continuation

def test_continuation_from_the_axes_fills_the_rectangle():
    theta = 0.6
    m = square_patch(4, theta=theta, lo=0)
    u, w = np.exp(-1j * theta), np.exp(1j * theta)
    on_axes = np.array([abs((z / u).imag) <= 1e-12 or abs((z / w).imag) <= 1e-12 for z in m.vertex_z])
    f = exponential(m, 0.5 - 0.3j).values
    start = np.where(on_axes, f, np.nan)
    res = continue_holomorphic(m.dc, start)
    assert res.known.all()
    assert res.obstructions == []
    assert res.added == int((~on_axes).sum())
    assert np.abs(res.values - f).max() <= 1e-10


def test_continuation_of_full_data_changes_nothing():
    m = square_patch(2, theta=0.6)
    f = power(m, 3).values
    res = continue_holomorphic(m.dc, f)
    assert res.added == 0 and res.obstructions == []
    assert np.array_equal(res.values, f)


def test_continuation_reports_obstructions():
    m = square_patch(2, theta=0.6)
    f = m.vertex_z.copy()
    f[m.origin] += 0.1
    res = continue_holomorphic(m.dc, f)
    touched = {int(q) for q in np.flatnonzero((m.dc.quads == m.origin).any(axis=1))}
    assert {q for q, _ in res.obstructions} == touched


def test_continuation_stays_inside_region():
    m = square_patch(3, theta=0.6, lo=0)
    f = power(m, 2).values
    start = f.copy()
    start[m.dc.quads[8][2]] = np.nan  # far corner of the last cell
    res = continue_holomorphic(m.dc, start, region=[0])
    assert not res.known.all()


# ----------------------------------------------------------- train-tracks

def test_single_rhombus_has_two_open_threads():
    threads = train_tracks(build_double([(0, 1, 2, 3)]))
    assert len(threads) == 2
    assert not any(t.closed for t in threads)
    assert all(len(t.edges) == 2 for t in threads)


def test_threads_partition_the_edges():
    for dc in (square_torus(2, 3, 0.8).dc, square_patch(3).dc, tri_hex_torus(m=2, n=2).dc):
        threads = train_tracks(dc)
        edges = sorted(e for t in threads for e in t.edges)
        assert edges == list(range(dc.n_edges))
        # every face is crossed by exactly two thread segments
        counts = np.zeros(dc.n_quads, dtype=int)
        for t in threads:
            np.add.at(counts, t.faces, 1)
        assert (counts == 2).all()


def test_square_torus_has_four_threads():
    threads = train_tracks(square_torus(1, 1, math.pi / 4).dc)
    assert len(threads) == 4
    assert all(t.closed for t in threads)


def test_thread_edges_are_parallel():
    m = square_torus(2, 3, 0.8)
    dz = dz_diamond(m).values
    for t in train_tracks(m.dc):
        steps = np.array([s * dz[e] for e, s in zip(t.edges, t.signs)])
        assert np.abs(steps - steps[0]).max() <= 1e-12


def test_closed_threads_are_not_null_homologous():
    for m in (square_torus(2, 3, 0.8), tri_hex_torus(m=3, n=2), square_torus(1, 2, 0.5, layout="plus")):
        cycles = cycle_basis(m.dc)
        for t in train_tracks(m.dc):
            assert t.closed
            assert any(t.intersection(c) != 0 for c in cycles)


def test_threads_do_not_cross_a_face_boundary():
    m = square_torus(2, 2, 0.8)
    from drsurf.complex_core import face_chain
    loop = boundary(face_chain(m.dc, 5))
    for t in train_tracks(m.dc):
        assert t.intersection(loop) == 0


# -------------------------------------------------------------- convexity

def cell_faces(cells, n=3):
    return [i * n + j for i, j in cells]


def test_full_rectangle_is_convex():
    m = square_patch(3, lo=0)
    assert is_convex(m.dc, range(m.dc.n_quads))


def test_rectangle_with_hole_is_not_convex():
    m = square_patch(3, lo=0)
    assert not is_convex(m.dc, [q for q in range(9) if q != cell_faces([(1, 1)])[0]])


def test_u_shape_is_not_convex():
    m = square_patch(3, lo=0)
    u = cell_faces([(0, 0), (0, 1), (0, 2), (1, 0), (2, 0), (2, 1), (2, 2)])
    assert not is_convex(m.dc, u)


def test_l_shape_is_thread_convex():
    m = square_patch(3, lo=0)
    assert is_convex(m.dc, cell_faces([(0, 0), (0, 1), (0, 2), (1, 0), (2, 0)]))


def test_disconnected_region_is_not_convex():
    m = square_patch(3, lo=0)
    assert not is_convex(m.dc, cell_faces([(0, 0), (2, 2)]))
    assert not is_convex(m.dc, [])


def test_convex_region_on_a_torus():
    m = square_torus(2, 2, 0.8)
    assert is_convex(m.dc, range(m.dc.n_quads))
