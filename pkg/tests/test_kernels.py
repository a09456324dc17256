import numpy as np
import pytest

from drsurf import _kernels
from drsurf.critical_maps import _origin_tree, exponential, powers, sextant_patch, square_torus
from drsurf.discrete_calculus import cr_residuals, laplacian_matrix

BACKENDS = [_kernels.numpy_kernels] + ([_kernels.numba_kernels] if _kernels.numba_kernels else [])


@pytest.fixture(scope="module")
def patch():
    return sextant_patch(10)


def test_environment_switch(monkeypatch):
    monkeypatch.setenv("DRSURF_DISABLE_NUMBA", "1")
    assert _kernels.active() is _kernels.numpy_kernels
    monkeypatch.setenv("DRSURF_DISABLE_NUMBA", "0")
    expected = _kernels.numba_kernels if _kernels.HAS_NUMBA else _kernels.numpy_kernels
    assert _kernels.active() is expected


@pytest.mark.parametrize("k", BACKENDS, ids=lambda k: k.name)
def test_propagation_matches_sequential_products(k, patch):
    t = _origin_tree(patch)
    rng = np.random.default_rng(1)
    factor = np.exp(1j * rng.normal(size=len(t.order)))
    got = np.asarray(k.propagate_product(t.order, t.parent, factor, 2.0 + 0j))
    ref = np.empty_like(got)
    for v in t.order:
        ref[v] = 2.0 if v == patch.origin else ref[t.parent[v]] * factor[v]
    assert np.abs(got - ref).max() <= 1e-13


@pytest.mark.parametrize("k", BACKENDS, ids=lambda k: k.name)
def test_power_step_is_the_trapezoid_rule(k, patch):
    t = _origin_tree(patch)
    prev = patch.vertex_z ** 2
    got = np.asarray(k.propagate_power(t.order, t.parent, t.dz, prev, 3.0))
    ref = np.zeros_like(got)
    for v in t.order:
        if v != patch.origin:
            p = t.parent[v]
            ref[v] = ref[p] + 1.5 * (prev[p] + prev[v]) * t.dz[v]
    assert np.abs(got - ref).max() <= 1e-12 * np.abs(ref).max()


def test_backends_agree_on_functions(monkeypatch, patch):
    out = {}
    for flag in ("1", "0"):
        monkeypatch.setenv("DRSURF_DISABLE_NUMBA", flag)
        out[flag] = (exponential(patch, 0.4 - 0.3j).values, powers(patch, 6),
                     cr_residuals(exponential(patch, 0.2j)))
    for a, b in zip(out["1"], out["0"]):
        assert np.abs(a - b).max() <= 1e-12 * max(1.0, np.abs(a).max())


@pytest.mark.parametrize("k", BACKENDS, ids=lambda k: k.name)
def test_cg_solves_a_torus_laplacian(k, monkeypatch):
    dc = square_torus(3, 3, 0.8).dc
    L = laplacian_matrix(dc)
    rng = np.random.default_rng(2)
    comp = dc.lambda_components
    b = rng.normal(size=dc.n_vertices)
    for c in np.unique(comp):
        b[comp == c] -= b[comp == c].mean()
    monkeypatch.setattr(_kernels, "active", lambda: k)
    x, it, rel = _kernels.cg_solve(L, b, comp, tol=1e-12)
    assert rel <= 1e-12
    assert np.abs(L @ x - b).max() <= 1e-10
    for c in np.unique(comp):
        assert abs(x[comp == c].sum()) <= 1e-10
