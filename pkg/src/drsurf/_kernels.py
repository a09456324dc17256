"""Hot numeric loops, with a numba path and a pure-numpy path.

The numba path is used when numba imports and ``DRSURF_DISABLE_NUMBA`` is
unset (or ``0``).  Both paths expose the same four functions:

``cg_solve``          conjugate gradient on a CSR Laplacian with per-component
                      constant modes projected out
``propagate_product`` multiplicative propagation down a BFS tree
``propagate_power``   trapezoid-rule propagation of ``k Z^(k-1) dZ``
``cr_residuals``      Cauchy-Riemann residual of a vertex function per quad
"""
import os
from types import SimpleNamespace

import numpy as np
import scipy.sparse as sp

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False


def _env_disabled():
    return os.environ.get("DRSURF_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


# ---------------------------------------------------------------- pure python
# These bodies are compiled by numba as-is; they are written with explicit loops.

def _project_py(x, comp, ncomp):
    sums = np.zeros(ncomp)
    counts = np.zeros(ncomp)
    for i in range(x.shape[0]):
        sums[comp[i]] += x[i]
        counts[comp[i]] += 1.0
    for i in range(x.shape[0]):
        x[i] -= sums[comp[i]] / counts[comp[i]]


def _matvec_py(indptr, indices, data, x, out):
    for i in range(indptr.shape[0] - 1):
        s = 0.0
        for j in range(indptr[i], indptr[i + 1]):
            s += data[j] * x[indices[j]]
        out[i] = s


def _cg_py(indptr, indices, data, b, comp, ncomp, tol, maxiter):
    n = b.shape[0]
    rhs = b.copy()
    _project_py(rhs, comp, ncomp)
    bnorm = np.sqrt(np.dot(rhs, rhs))
    x = np.zeros(n)
    if bnorm == 0.0:
        return x, 0, 0.0
    r = rhs.copy()
    p = r.copy()
    ap = np.zeros(n)
    rr = np.dot(r, r)
    it = 0
    while it < maxiter:
        _matvec_py(indptr, indices, data, p, ap)
        pap = np.dot(p, ap)
        if pap <= 0.0:
            break
        alpha = rr / pap
        x += alpha * p
        r -= alpha * ap
        it += 1
        if it % 50 == 0:
            # recompute the true residual to shed rounding drift
            _matvec_py(indptr, indices, data, x, ap)
            r = rhs - ap
            _project_py(r, comp, ncomp)
        rr_new = np.dot(r, r)
        if np.sqrt(rr_new) <= tol * bnorm:
            rr = rr_new
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    _project_py(x, comp, ncomp)
    _matvec_py(indptr, indices, data, x, ap)
    res = rhs - ap
    return x, it, np.sqrt(np.dot(res, res)) / bnorm


def _propagate_product_py(order, parent, factor, root_value):
    out = np.zeros(parent.shape[0], dtype=np.complex128)
    out[order[0]] = root_value
    for t in range(1, order.shape[0]):
        v = order[t]
        out[v] = out[parent[v]] * factor[v]
    return out


def _propagate_power_py(order, parent, dz, prev, k):
    out = np.zeros(parent.shape[0], dtype=np.complex128)
    for t in range(1, order.shape[0]):
        v = order[t]
        u = parent[v]
        out[v] = out[u] + k * 0.5 * (prev[u] + prev[v]) * dz[v]
    return out


def _cr_residuals_py(quads, rho, f):
    nq = quads.shape[0]
    out = np.zeros(nq)
    for q in range(nq):
        x = quads[q, 0]
        y = quads[q, 1]
        x2 = quads[q, 2]
        y2 = quads[q, 3]
        out[q] = abs(f[y2] - f[y] - 1j * rho[q] * (f[x2] - f[x]))
    return out


# ---------------------------------------------------------------- numpy path

def _cg_np(indptr, indices, data, b, comp, ncomp, tol, maxiter):
    n = b.shape[0]
    lap = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    counts = np.bincount(comp, minlength=ncomp).astype(float)

    def project(v):
        return v - (np.bincount(comp, weights=v, minlength=ncomp) / counts)[comp]

    rhs = project(np.asarray(b, dtype=float))
    bnorm = np.linalg.norm(rhs)
    x = np.zeros(n)
    if bnorm == 0.0:
        return x, 0, 0.0
    r = rhs.copy()
    p = r.copy()
    rr = r @ r
    it = 0
    while it < maxiter:
        ap = lap @ p
        pap = p @ ap
        if pap <= 0.0:
            break
        alpha = rr / pap
        x += alpha * p
        r -= alpha * ap
        it += 1
        if it % 50 == 0:
            r = project(rhs - lap @ x)
        rr_new = r @ r
        if np.sqrt(rr_new) <= tol * bnorm:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    x = project(x)
    return x, it, np.linalg.norm(rhs - lap @ x) / bnorm


def _levels(order, parent):
    depth = np.zeros(parent.shape[0], dtype=np.int64)
    for v in order[1:]:
        depth[v] = depth[parent[v]] + 1
    visited = order
    d = depth[visited]
    return [visited[d == k] for k in range(1, int(d.max()) + 1)] if len(visited) > 1 else []


def _propagate_product_np(order, parent, factor, root_value):
    out = np.zeros(parent.shape[0], dtype=np.complex128)
    out[order[0]] = root_value
    for lvl in _levels(order, parent):
        out[lvl] = out[parent[lvl]] * factor[lvl]
    return out


def _propagate_power_np(order, parent, dz, prev, k):
    out = np.zeros(parent.shape[0], dtype=np.complex128)
    for lvl in _levels(order, parent):
        u = parent[lvl]
        out[lvl] = out[u] + k * 0.5 * (prev[u] + prev[lvl]) * dz[lvl]
    return out


def _cr_residuals_np(quads, rho, f):
    x, y, x2, y2 = quads.T
    return np.abs(f[y2] - f[y] - 1j * rho * (f[x2] - f[x]))


numpy_kernels = SimpleNamespace(
    name="numpy",
    cg_solve=_cg_np,
    propagate_product=_propagate_product_np,
    propagate_power=_propagate_power_np,
    cr_residuals=_cr_residuals_np,
)

if HAS_NUMBA:
    _project_nb = numba.njit(_project_py, cache=True)
    _matvec_nb = numba.njit(_matvec_py, cache=True)
    # rebind the helpers so the compiled CG body resolves compiled callees
    _cg_globals = dict(_cg_py.__globals__)
    _cg_globals.update(_project_py=_project_nb, _matvec_py=_matvec_nb)
    _cg_src = type(_cg_py)(_cg_py.__code__, _cg_globals, "_cg_nb")
    numba_kernels = SimpleNamespace(
        name="numba",
        cg_solve=numba.njit(_cg_src, cache=True),
        propagate_product=numba.njit(_propagate_product_py, cache=True),
        propagate_power=numba.njit(_propagate_power_py, cache=True),
        cr_residuals=numba.njit(_cr_residuals_py, cache=True),
    )
else:  # pragma: no cover
    numba_kernels = None


def active():
    """Kernel namespace selected by the environment."""
    if HAS_NUMBA and not _env_disabled():
        return numba_kernels
    return numpy_kernels


def cg_solve(lap, b, comp, tol=1e-11, maxiter=None):
    """Solve ``lap x = b`` on the complement of per-component constants.

    ``lap`` is a symmetric positive semidefinite sparse matrix whose kernel
    is spanned by the indicator vectors of the labels in ``comp``.
    Returns ``(x, iterations, relative_residual)``.
    """
    lap = sp.csr_matrix(lap)
    n = lap.shape[0]
    if maxiter is None:
        maxiter = 10 * max(n, 1)
    comp = np.ascontiguousarray(comp, dtype=np.int64)
    ncomp = int(comp.max()) + 1 if n else 0
    k = active()
    return k.cg_solve(lap.indptr.astype(np.int64), lap.indices.astype(np.int64),
                      lap.data.astype(np.float64), np.ascontiguousarray(b, dtype=np.float64),
                      comp, ncomp, float(tol), int(maxiter))
