"""Hodge star, Laplacian, wedge products, averaging, lifting and holomorphy tests."""
from __future__ import annotations

import numpy as np

from . import _kernels
from .complex_core import DIAMOND, LAMBDA, SIDE_SIGN, Cochain, DoubleComplex, biconstant, cell_count
from .errors import CarrierDiamond, DRSError, GradeOverflow, HolonomyMismatch

HOLONOMY_RTOL = 1e-9


def _require_lambda(f: Cochain):
    if f.carrier != LAMBDA:
        raise CarrierDiamond("this operation only exists on the double")


def cochain(dc: DoubleComplex, grade: int, carrier: str, values=None) -> Cochain:
    n = cell_count(dc, grade, carrier)
    return Cochain(dc, grade, carrier, np.zeros(n) if values is None else values)


def hodge_star(f: Cochain) -> Cochain:
    """Hodge star on the double.

    0-forms and 2-forms are both stored per vertex (a 2-form lives on the dual
    face of the vertex), so on them the star keeps the values.  On 1-forms
    ``*a(e) = -rho(e*) a(e*)``, which squares to ``-1``.
    """
    _require_lambda(f)
    dc = f.dc
    if f.grade == 1:
        return Cochain(dc, 1, LAMBDA, dc.star1 @ f.values)
    return Cochain(dc, 2 - f.grade, LAMBDA, f.values.copy())


def laplacian(f: Cochain) -> Cochain:
    """Positive semidefinite Laplacian ``-d*d* - *d*d``.

    On functions ``(Lf)(x) = sum rho(x, x') (f(x) - f(x'))``.  In disc mode the
    value is only meaningful at interior vertices and is set to 0 elsewhere.
    """
    _require_lambda(f)
    dc = f.dc
    W = dc.rho_lambda
    D0, D1, S = dc.d0_lambda, dc.d1_lambda, dc.star1
    if f.grade == 0:
        out = D0.T @ (W * (D0 @ f.values))
        if not dc.closed:
            out = np.where(dc.interior, out, 0.0)
    elif f.grade == 1:
        out = -(D0 @ (D1 @ (S @ f.values))) - S @ (D0 @ (D1 @ f.values))
    else:
        out = -(D1 @ (S @ (D0 @ f.values)))
    return Cochain(dc, f.grade, LAMBDA, out)


def laplacian_matrix(dc: DoubleComplex):
    """Sparse weighted graph Laplacian on functions of the double."""
    import scipy.sparse as sp
    return sp.csr_matrix(dc.d0_lambda.T @ sp.diags(dc.rho_lambda) @ dc.d0_lambda)


def cr_residuals(f: Cochain) -> np.ndarray:
    """Per-quad residual ``|f(y') - f(y) - i rho (f(x') - f(x))|``."""
    dc = f.dc
    k = _kernels.active()
    return np.asarray(k.cr_residuals(dc.quads, dc.rho, np.ascontiguousarray(f.values)))


def is_holomorphic(f: Cochain, tol: float = 1e-10):
    """Holomorphy test on the double.

    Functions are tested against the Cauchy-Riemann equation on every quad;
    1-forms must be closed and of type (1,0) (``*a = -i a``).

    Returns
    -------
    (bool, float)
        Verdict and the largest residual.
    """
    _require_lambda(f)
    if f.grade == 0:
        res = cr_residuals(f)
        worst = float(res.max()) if len(res) else 0.0
    elif f.grade == 1:
        closed = np.abs(coboundary_values(f))
        typ = np.abs(f.dc.star1 @ f.values + 1j * f.values)
        worst = float(max(closed.max(initial=0.0), typ.max(initial=0.0)))
    else:
        raise DRSError("holomorphy is defined for functions and 1-forms")
    return worst <= tol, worst


def coboundary_values(f: Cochain) -> np.ndarray:
    dc = f.dc
    if f.carrier == LAMBDA:
        return (dc.d0_lambda if f.grade == 0 else dc.d1_lambda) @ f.values
    return (dc.d0_diamond if f.grade == 0 else dc.d1_diamond) @ f.values


# ------------------------------------------------------------------- wedges

def _side_values(a: Cochain) -> np.ndarray:
    """Values of a ◊ 1-form on each quad side, oriented along the face."""
    dc = a.dc
    return a.values[dc.sides] * SIDE_SIGN[None, :]


def wedge_diamond(a: Cochain, b: Cochain) -> Cochain:
    """Wedge product of forms on the quad-graph.

    * functions: pointwise product
    * function and 1-form: ``f`` averaged over the two ends of each edge
    * 1-forms: ``1/4 sum_k (s_{k-1} t_k - s_k t_{k-1})`` around the face
    * function and 2-form: ``f`` averaged over the four corners
    """
    if a.carrier != DIAMOND or b.carrier != DIAMOND:
        raise DRSError("both factors must live on the quad-graph")
    if a.grade + b.grade > 2:
        raise GradeOverflow(f"grade {a.grade} + {b.grade} exceeds 2")
    dc = a.dc
    if a.grade > b.grade:
        if a.grade == 1 and b.grade == 1:
            pass
        else:
            return wedge_diamond(b, a)
    if a.grade == 0 and b.grade == 0:
        return Cochain(dc, 0, DIAMOND, a.values * b.values)
    if a.grade == 0 and b.grade == 1:
        mean = 0.5 * (a.values[dc.edges[:, 0]] + a.values[dc.edges[:, 1]])
        return Cochain(dc, 1, DIAMOND, mean * b.values)
    if a.grade == 0 and b.grade == 2:
        mean = a.values[dc.quads].mean(axis=1)
        return Cochain(dc, 2, DIAMOND, mean * b.values)
    s, t = _side_values(a), _side_values(b)
    sp_, tp = np.roll(s, 1, axis=1), np.roll(t, 1, axis=1)
    return Cochain(dc, 2, DIAMOND, 0.25 * (sp_ * t - s * tp).sum(axis=1))


def wedge_hetero(a: Cochain, b: Cochain) -> Cochain:
    """Wedge of two 1-forms on the double, giving a 2-form on the quad-graph.

    On the quad ``(x, y, x', y')``:
    ``a(x,x') b(y,y') + a(y,y') b(x',x)``.
    """
    _require_lambda(a)
    _require_lambda(b)
    if a.grade != 1 or b.grade != 1:
        raise DRSError("the heterogeneous wedge takes two 1-forms")
    F = a.dc.n_quads
    av, bv = a.values, b.values
    return Cochain(a.dc, 2, DIAMOND, av[:F] * bv[F:] - av[F:] * bv[:F])


def integral(w: Cochain) -> complex:
    """Sum of a 2-form over all faces."""
    return complex(w.values.sum())


def scalar_product(a: Cochain, b: Cochain) -> complex:
    """``(a, b) = sum_e rho(e) a(e) conj(b(e))`` over edges of the double."""
    _require_lambda(a)
    return complex(np.sum(a.dc.rho_lambda * a.values * np.conj(b.values)))


def conj(a: Cochain) -> Cochain:
    return Cochain(a.dc, a.grade, a.carrier, np.conj(a.values))


# ---------------------------------------------------------------- averaging

def average(a: Cochain) -> Cochain:
    """Averaging map from the quad-graph to the double.

    Functions are unchanged; a 1-form is averaged over the two parallel sides
    of each quad; a 2-form on faces becomes, for every vertex, half the sum
    over the quads around it.
    """
    if a.carrier != DIAMOND:
        raise DRSError("average expects a form on the quad-graph")
    dc = a.dc
    if a.grade == 0:
        return Cochain(dc, 0, LAMBDA, a.values.copy())
    if a.grade == 1:
        return Cochain(dc, 1, LAMBDA, dc.average1 @ a.values)
    return Cochain(dc, 2, LAMBDA, dc.average2 @ a.values)


def d_epsilon_diamond(dc: DoubleComplex) -> Cochain:
    """``d eps`` on the quad-graph (the kernel of the averaging map)."""
    return Cochain(dc, 1, DIAMOND, dc.d0_diamond @ biconstant(dc))


def lift_to_diamond(mu: Cochain, base_edge: int = 0) -> Cochain:
    """Closed ◊ 1-form ``nu`` with ``A(nu) = mu``.

    The ``d eps`` ambiguity is fixed by ``nu(base_edge) = 0``.  Raises
    :class:`HolonomyMismatch` when the propagated values disagree, i.e. when
    the holonomies of ``mu`` on Gamma and Gamma* differ on some class.
    """
    _require_lambda(mu)
    if mu.grade != 1:
        raise DRSError("lift_to_diamond expects a 1-form")
    dc = mu.dc
    F = dc.n_quads
    m = mu.values
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    tol = HOLONOMY_RTOL * scale
    nu = np.full(dc.n_edges, np.nan, dtype=np.complex128)
    nu[base_edge] = 0.0
    # quads incident to each edge
    inc = [[] for _ in range(dc.n_edges)]
    for q in range(F):
        for k in range(4):
            inc[int(dc.sides[q, k])].append(q)
    done = np.zeros(F, dtype=bool)
    stack = list(inc[base_edge])
    while stack:
        q = stack.pop()
        if done[q]:
            continue
        s = dc.sides[q]
        known = [k for k in range(4) if not np.isnan(nu[s[k]].real)]
        if not known:
            continue
        k0 = known[0]
        # canonical values: a0 = a1 + mu_f, a2 = a1 + mu_{F+f}, a3 = a1 + mu_f + mu_{F+f}
        offs = np.array([m[q], 0.0, m[F + q], m[q] + m[F + q]])
        a1 = nu[s[k0]] - offs[k0]
        vals = a1 + offs
        for k in range(4):
            e = s[k]
            if np.isnan(nu[e].real):
                nu[e] = vals[k]
                stack.extend(inc[e])
            elif abs(nu[e] - vals[k]) > tol:
                raise HolonomyMismatch(
                    f"lift inconsistent on edge {int(e)} by {abs(nu[e] - vals[k]):.3e}")
        done[q] = True
    if np.isnan(nu.real).any():
        raise DRSError("the quad-graph is not connected")
    return Cochain(dc, 1, DIAMOND, nu)


def diamond_from_lambda_function(f: Cochain) -> Cochain:
    return Cochain(f.dc, 0, DIAMOND, f.values.copy())
