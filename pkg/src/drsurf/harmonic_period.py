"""Harmonic forms dual to cycles, Gram and star matrices, holomorphic bases and periods."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .complex_core import DIAMOND, LAMBDA, Chain, Cochain, DoubleComplex
from .discrete_calculus import (coboundary_values, hodge_star, integral, lift_to_diamond,
                                scalar_product, wedge_diamond, wedge_hetero)
from .errors import DRSError, HolonomyMismatch, NotClosed, SingularC, SolverFail
from .homology import CanonicalDissection

SOLVER_TOL = 1e-11
CLOSED_TOL = 1e-9


@dataclass
class SolveStats:
    """Iteration counts and residuals of the Laplacian solves."""

    iterations: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    coclosed: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "solves": len(self.iterations),
            "max_iterations": int(max(self.iterations, default=0)),
            "max_relative_residual": float(max(self.residuals, default=0.0)),
            "max_coclosed_residual": float(max(self.coclosed, default=0.0)),
        }


@dataclass
class PeriodData:
    """Everything computed by :func:`compute_periods`.

    Index conventions: ``alpha[l]`` is dual to ``aleph_lambda[l]``;
    ``pi[k, l]`` is the period of ``zeta[l]`` on ``aleph_lambda[2g + k]``.
    """

    dissection: CanonicalDissection
    alpha: list
    gram: np.ndarray
    star_table: np.ndarray
    duality: np.ndarray
    zeta: list
    pi: np.ndarray
    pi_direct: np.ndarray
    pi_gamma: np.ndarray
    pi_gamma_star: np.ndarray
    pi_diamond: np.ndarray
    zeta_diamond: list | None
    stats: SolveStats

    @property
    def genus(self) -> int:
        return self.dissection.genus

    def blocks(self):
        """``A, B, C, D`` with ``gram = [[A, D], [B, C]]``."""
        h = 2 * self.genus
        G = self.gram
        return G[:h, :h], G[h:, :h], G[h:, h:], G[:h, h:]


def _require_closed_surface(dc: DoubleComplex):
    if not dc.closed:
        raise DRSError("period computations need a closed surface")


def harmonic_projection(omega: Cochain, stats: SolveStats | None = None,
                        tol: float = SOLVER_TOL) -> Cochain:
    """Harmonic representative ``omega - du`` of a closed 1-form on the double.

    ``u`` solves the weighted Laplace equation ``L u = d^T W omega`` with the
    constants on Gamma and Gamma* projected out.  Raises :class:`SolverFail`
    when the relative residual stays above ``100 * tol``.
    """
    dc = omega.dc
    _require_closed_surface(dc)
    if omega.carrier != LAMBDA or omega.grade != 1:
        raise DRSError("harmonic_projection expects a 1-form on the double")
    W = dc.rho_lambda
    D0 = dc.d0_lambda
    L = (D0.T @ (D0.multiply(W[:, None]))).tocsr()
    comp = dc.lambda_components
    rhs = D0.T @ (W * omega.values)
    u = np.zeros(dc.n_vertices, dtype=np.complex128)
    for part, unit in ((rhs.real, 1.0), (rhs.imag, 1j)):
        if not np.any(part):
            continue
        x, it, rel = _kernels.cg_solve(L, part, comp, tol=tol)
        if not np.isfinite(rel) or rel > 100 * tol:
            raise SolverFail(f"conjugate gradient stalled at relative residual {rel:.3e} after {it} steps")
        u += unit * x
        if stats is not None:
            stats.iterations.append(int(it))
            stats.residuals.append(float(rel))
    h = omega.values - D0 @ u
    if stats is not None:
        co = D0.T @ (W * h)
        scale = max(1.0, float(np.abs(W * omega.values).max(initial=0.0)))
        stats.coclosed.append(float(np.abs(co).max(initial=0.0)) / scale)
    return Cochain(dc, 1, LAMBDA, h)


def crossing_cocycle(c: Chain) -> Cochain:
    """Closed 1-form counting crossings with a cycle of the double.

    ``k(x,x') = c(y,y')`` and ``k(y,y') = -c(x,x')`` on every quad, so that
    ``sum k ^ theta = integral of theta along c`` for every 1-form theta.
    """
    if c.carrier != LAMBDA or c.grade != 1:
        raise DRSError("crossing_cocycle expects a 1-cycle of the double")
    F = c.dc.n_quads
    v = np.concatenate([c.coeffs[F:], -c.coeffs[:F]]).astype(float)
    return Cochain(c.dc, 1, LAMBDA, v)


def eta_form(c: Chain, stats: SolveStats | None = None) -> Cochain:
    """Harmonic form dual to a cycle of the double (Poincare dual)."""
    return harmonic_projection(crossing_cocycle(c), stats)


def period(form: Cochain, cycle: Chain) -> complex:
    return complex(np.dot(cycle.coeffs, form.values))


def period_table(forms, cycles) -> np.ndarray:
    X = np.array([c.coeffs for c in cycles], dtype=float)
    Y = np.array([f.values for f in forms])
    return X @ Y.T


def alpha_basis(d: CanonicalDissection, stats: SolveStats | None = None) -> list:
    """Real harmonic forms dual to ``aleph_lambda``.

    ``alpha[k] = eta(aleph[k + 2g])`` and ``alpha[k + 2g] = -eta(aleph[k])``
    for ``k < 2g``.
    """
    h = 2 * d.genus
    al = d.aleph_lambda
    first = [eta_form(al[k + h], stats) for k in range(h)]
    second = [-eta_form(al[k], stats) for k in range(h)]
    return first + second


def gram_matrix(alpha) -> np.ndarray:
    """Real symmetric matrix of scalar products of the harmonic basis."""
    dc = alpha[0].dc
    Y = np.array([a.values.real for a in alpha])
    return (Y * dc.rho_lambda[None, :]) @ Y.T


def star_matrix(gram: np.ndarray) -> np.ndarray:
    """Matrix ``[[-D, A], [-C, B]]`` of the Hodge star in the harmonic basis.

    Row ``k`` holds the coordinates of ``*alpha_k``.
    """
    h = len(gram) // 2
    A, B, C, D = gram[:h, :h], gram[h:, :h], gram[h:, h:], gram[:h, h:]
    return np.block([[-D, A], [-C, B]])


def star_identities(gram: np.ndarray) -> dict:
    h = len(gram) // 2
    A, B, C = gram[:h, :h], gram[h:, :h], gram[h:, h:]
    I = np.eye(h)
    S = star_matrix(gram)
    return {
        "star_squared": float(np.abs(S @ S + np.eye(2 * h)).max(initial=0.0)),
        "B2-CA+I": float(np.abs(B @ B - C @ A + I).max(initial=0.0)),
        "AB-BtA": float(np.abs(A @ B - B.T @ A).max(initial=0.0)),
        "CBt-BC": float(np.abs(C @ B.T - B @ C).max(initial=0.0)),
    }


def holomorphic_basis(alpha, gram) -> list:
    """``zeta_k = (i - *) sum_l Cinv[k, l] alpha[l + 2g]`` for ``k < 2g``."""
    h = len(gram) // 2
    C = gram[h:, h:]
    if np.linalg.cond(C) > 1e12:
        raise SingularC("the C block of the Gram matrix is singular")
    Cinv = np.linalg.inv(C)
    out = []
    for k in range(h):
        theta = Cochain(alpha[0].dc, 1, LAMBDA, sum(Cinv[k, l] * alpha[l + h].values for l in range(h)))
        out.append(Cochain(theta.dc, 1, LAMBDA, 1j * theta.values - hodge_star(theta).values))
    return out


def compute_periods(d: CanonicalDissection) -> PeriodData:
    """Run the whole pipeline on a canonical dissection of a closed surface."""
    dc = d.dc
    _require_closed_surface(dc)
    if d.genus == 0:
        raise DRSError("a sphere has no periods")
    g = d.genus
    h = 2 * g
    stats = SolveStats()
    alpha = alpha_basis(d, stats)
    al = d.aleph_lambda
    duality = period_table(alpha, al).real
    gram = gram_matrix(alpha)
    star_table = period_table([hodge_star(a) for a in alpha], al).real
    zeta = holomorphic_basis(alpha, gram)
    C, B = gram[h:, h:], gram[h:, :h]
    pi = np.linalg.solve(C, 1j * np.eye(h) - B)
    P = period_table(zeta, al)
    pi_direct = P[h:, :]
    pi_gamma = pi[:g, g:] + pi[:g, :g]
    pi_gamma_star = pi[g:, :g] + pi[g:, g:]
    pi_diamond = 0.5 * (pi_gamma + pi_gamma_star)
    zeta_diamond = None
    C_G, C_S = gram[h + g:, h + g:], gram[h:h + g, h:h + g]
    if np.abs(C_G - C_S).max() <= 1e-6:
        try:
            zeta_diamond = [lift_to_diamond(zeta[k] + zeta[k + g]) for k in range(g)]
        except HolonomyMismatch:
            zeta_diamond = None
    return PeriodData(d, alpha, gram, star_table, duality, zeta, pi, pi_direct, pi_gamma,
                      pi_gamma_star, pi_diamond, zeta_diamond, stats)


def structural_report(pd: PeriodData) -> dict:
    """Residuals of every structural identity the period data should satisfy."""
    h = 2 * pd.genus
    g = pd.genus
    gram = pd.gram
    out = dict(star_identities(gram))
    out["gram_symmetry"] = float(np.abs(gram - gram.T).max())
    out["gram_min_eig"] = float(np.linalg.eigvalsh(0.5 * (gram + gram.T)).min())
    out["duality"] = float(np.abs(pd.duality - np.eye(2 * h)).max())
    # the integral formula for the Gram matrix: +periods of *alpha on the second half, - on the first
    expect = np.vstack([pd.star_table[h:], -pd.star_table[:h]])
    out["gram_vs_star_periods"] = float(np.abs(gram - expect).max())
    out["star_expansion"] = float(np.abs(pd.star_table.T - star_matrix(gram)).max())
    out["pi_symmetry"] = float(np.abs(pd.pi - pd.pi.T).max())
    out["pi_im_min_eig"] = float(np.linalg.eigvalsh(0.5 * (pd.pi.imag + pd.pi.imag.T)).min())
    out["pi_direct"] = float(np.abs(pd.pi - pd.pi_direct).max())
    P = period_table(pd.zeta, pd.dissection.aleph_lambda)
    out["zeta_normalization"] = float(np.abs(P[:h] - np.eye(h)).max())
    hol = 0.0
    for z in pd.zeta:
        closed = np.abs(coboundary_values(z)).max()
        typ = np.abs(z.dc.star1 @ z.values + 1j * z.values).max()
        hol = max(hol, float(closed), float(typ))
    out["zeta_holomorphic"] = hol
    F = pd.dissection.dc.n_quads
    ri = 0.0
    for k, z in enumerate(pd.zeta):
        real_part = z.values[:F] if k < g else z.values[F:]
        imag_part = z.values[F:] if k < g else z.values[:F]
        ri = max(ri, float(np.abs(real_part.imag).max()), float(np.abs(imag_part.real).max()))
    out["zeta_real_imaginary"] = ri
    C = gram[h:, h:]
    B = gram[h:, :h]
    Cinv = np.linalg.inv(C)
    blocks = np.block([[1j * Cinv[:g, :g], -(Cinv @ B)[:g, g:]], [-(Cinv @ B)[g:, :g], 1j * Cinv[g:, g:]]])
    out["pi_blocks"] = float(np.abs(pd.pi - blocks).max())
    out["A_C_block_diagonal"] = float(max(np.abs(gram[:g, g:h]).max(), np.abs(gram[h:h + g, h + g:]).max()))
    out["B_block_antidiagonal"] = float(max(np.abs(B[:g, :g]).max(), np.abs(B[g:, g:]).max()))
    out["intersection_is_J"] = bool(np.array_equal(
        pd.dissection.intersection, np.block([[np.zeros((g, g), int), np.eye(g, dtype=int)],
                                               [-np.eye(g, dtype=int), np.zeros((g, g), int)]])))
    Gd = np.block([[gram[:g, :g] + gram[g:h, g:h], B[g:, :g].T + B[:g, g:].T],
                   [B[g:, :g] + B[:g, g:], C[:g, :g] + C[g:, g:]]])
    out["diamond_gram_cond"] = float(np.linalg.cond(Gd))
    out["pi_gamma_gap"] = float(np.abs(pd.pi_gamma - pd.pi_gamma_star).max())
    out.update({f"solver_{k}": v for k, v in pd.stats.as_dict().items()})
    return out


def diamond_gram(gram: np.ndarray, g: int) -> np.ndarray:
    h = 2 * g
    A, B, C = gram[:h, :h], gram[h:, :h], gram[h:, h:]
    return np.block([[A[:g, :g] + A[g:, g:], B[g:, :g].T + B[:g, g:].T],
                     [B[g:, :g] + B[:g, g:], C[:g, :g] + C[g:, g:]]])


# ------------------------------------------------------------ bilinear relations

def _check_closed(theta: Cochain):
    res = np.abs(coboundary_values(theta)).max(initial=0.0)
    scale = max(1.0, float(np.abs(theta.values).max(initial=0.0)))
    if res > CLOSED_TOL * scale:
        raise NotClosed(f"form is not closed (residual {res:.3e})")


def bilinear_sides(theta: Cochain, theta2: Cochain, d: CanonicalDissection):
    """Left and right sides of the bilinear relation for two closed forms.

    On the double the right side sums over the 2g pairs of ``aleph_lambda``;
    on the quad-graph over the g pairs of ``aleph``.
    """
    if theta.carrier != theta2.carrier:
        raise DRSError("both forms must live on the same complex")
    _check_closed(theta)
    _check_closed(theta2)
    if theta.carrier == LAMBDA:
        lhs = integral(wedge_hetero(theta, theta2))
        cyc = d.aleph_lambda
    else:
        lhs = integral(wedge_diamond(theta, theta2))
        cyc = d.aleph
    n = len(cyc) // 2
    p1 = [period(theta, c) for c in cyc]
    p2 = [period(theta2, c) for c in cyc]
    rhs = sum(p1[j] * p2[j + n] - p1[j + n] * p2[j] for j in range(n))
    return lhs, rhs


def check_bilinear(theta: Cochain, theta2: Cochain, d: CanonicalDissection) -> float:
    """``|LHS - RHS|`` of the bilinear relation."""
    lhs, rhs = bilinear_sides(theta, theta2, d)
    return abs(lhs - rhs)


def harmonic_norm_check(theta: Cochain, d: CanonicalDissection) -> float:
    """``|(theta, theta) - sum(periods of theta and *conj(theta))|`` for harmonic theta."""
    cyc = d.aleph_lambda
    n = len(cyc) // 2
    st = Cochain(theta.dc, 1, LAMBDA, np.conj(hodge_star(theta).values))
    p1 = [period(theta, c) for c in cyc]
    p2 = [period(st, c) for c in cyc]
    rhs = sum(p1[j] * p2[j + n] - p1[j + n] * p2[j] for j in range(n))
    return abs(scalar_product(theta, theta) - rhs)


def random_closed_lambda(pd: PeriodData, rng, exact_scale: float = 1.0) -> Cochain:
    """Random closed complex 1-form: harmonic part plus an exact part."""
    dc = pd.dissection.dc
    xi = rng.normal(size=len(pd.alpha)) + 1j * rng.normal(size=len(pd.alpha))
    v = sum(x * a.values for x, a in zip(xi, pd.alpha))
    f = rng.normal(size=dc.n_vertices) + 1j * rng.normal(size=dc.n_vertices)
    return Cochain(dc, 1, LAMBDA, v + exact_scale * (dc.d0_lambda @ f))


def diamond_harmonic_lifts(pd: PeriodData) -> list:
    """Closed ◊ forms lifting ``alpha_k + alpha_{k+g}`` (equal holonomies on both graphs)."""
    g = pd.genus
    h = 2 * g
    out = []
    for k in list(range(g)) + list(range(h, h + g)):
        out.append(lift_to_diamond(pd.alpha[k] + pd.alpha[k + g]))
    return out


def random_closed_diamond(lifts, rng) -> Cochain:
    dc = lifts[0].dc
    xi = rng.normal(size=len(lifts)) + 1j * rng.normal(size=len(lifts))
    v = sum(x * a.values for x, a in zip(xi, lifts))
    f = rng.normal(size=dc.n_vertices) + 1j * rng.normal(size=dc.n_vertices)
    return Cochain(dc, 1, DIAMOND, v + dc.d0_diamond @ f)
