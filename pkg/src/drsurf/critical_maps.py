"""Critical (rhombic) maps, lattice generators and discrete holomorphic functions.

A critical map stores, for every quad, the complex positions of its four
corners in the universal cover (``corner_z``).  On a disc these positions are
single valued and also available per vertex (``vertex_z``).
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .complex_core import DIAMOND, Chain, Cochain, DoubleComplex, LAMBDA, build_double
from .errors import (BadTheta, DRSError, NotCritical, NotSimplyConnected, OnSingularCircle,
                     PassesThroughOrigin)


@dataclass(frozen=True, eq=False)
class CriticalMap:
    """Rhombic realization of a quad-graph.

    Attributes
    ----------
    dc : DoubleComplex
    corner_z : (F, 4) complex array of corner positions, lifted per quad.
    delta : common side length of the rhombi.
    vertex_z : (V,) complex positions on a disc, ``None`` on a closed surface.
    origin : vertex sent to 0 (disc only).
    periods : lattice periods ``(w1, w2)`` for tori, matching the stored
        homology basis ``basis``.
    basis : optional pair of ◊ cycles (a, b) realizing the periods.
    """

    dc: DoubleComplex
    corner_z: np.ndarray
    delta: float
    vertex_z: np.ndarray | None = None
    origin: int | None = None
    periods: tuple | None = None
    basis: tuple | None = None

    def check(self, tol: float = 1e-12) -> float:
        """Largest relative violation of the rhombus and ratio invariants."""
        z = self.corner_z
        sides = np.abs(np.roll(z, -1, axis=1) - z)
        worst = float(np.max(np.abs(sides - self.delta))) / self.delta
        dg = z[:, 2] - z[:, 0]
        ds = z[:, 3] - z[:, 1]
        # the dual diagonal is the primal one turned by +90 degrees and scaled by rho
        worst = max(worst, float(np.max(np.abs(ds - 1j * self.dc.rho * dg))) / self.delta)
        if worst > tol:
            raise NotCritical(f"map violates rhombus invariants by {worst:.3e}")
        return worst


def _lattice_key(a, b, dz):
    return (int(a), int(b), round(dz.real, 9), round(dz.imag, 9))


def _build_from_corners(corner_ids, corner_z, color, delta, **kw):
    corner_ids = np.asarray(corner_ids, dtype=np.int64)
    corner_z = np.asarray(corner_z, dtype=np.complex128)
    keys = []
    for ids, z in zip(corner_ids, corner_z):
        row = []
        for k in range(4):
            a, b = ids[k], ids[(k + 1) % 4]
            dz = z[(k + 1) % 4] - z[k]
            if k % 2 == 1:  # orient from the Gamma end
                a, b, dz = b, a, -dz
            row.append(_lattice_key(a, b, dz / delta))
        keys.append(row)
    rho = np.abs(corner_z[:, 3] - corner_z[:, 1]) / np.abs(corner_z[:, 2] - corner_z[:, 0])
    dc = build_double(corner_ids, rho, graph=color, side_keys=keys)
    # build_double keeps corner 0 on Gamma here, so positions line up
    return CriticalMap(dc=dc, corner_z=corner_z, delta=delta, **kw)


def square_torus(p: int, q: int, theta: float, delta: float = 1.0, layout: str = "minus") -> CriticalMap:
    """Torus quotient of the rhombic lattice ``Z e^{-i theta} + Z e^{i theta}``.

    Gamma edges parallel to the real axis carry ``rho = tan(theta)``, the
    vertical ones ``cot(theta)``.  The stored basis ``(a, b)`` has
    ``a . b = +1``:

    * ``layout="minus"``: ``a`` runs along ``2p e^{-i theta}`` and ``b`` along
      ``2q e^{i theta}``; the modulus is ``(q/p) e^{2 i theta}``.
    * ``layout="plus"``: ``a`` runs along ``2p e^{i theta}`` and ``b`` along
      ``-2q e^{-i theta}``; the modulus is ``(q/p) e^{i (pi - 2 theta)}``.
    """
    if not (0.0 < theta < math.pi / 2):
        raise BadTheta(f"theta must lie in (0, pi/2), got {theta!r}")
    if p < 1 or q < 1:
        raise DRSError("p and q must be positive")
    if layout not in ("minus", "plus"):
        raise DRSError(f"unknown layout {layout!r}")
    P, Q = (2 * p, 2 * q) if layout == "minus" else (2 * q, 2 * p)
    u, w = delta * np.exp(-1j * theta), delta * np.exp(1j * theta)

    def vid(i, j):
        return (i % P) * Q + (j % Q)

    color = np.array([(i + j) % 2 for i in range(P) for j in range(Q)])
    ids, zs = [], []
    for i in range(P):
        for j in range(Q):
            cells = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            if (i + j) % 2 == 1:
                cells = cells[1:] + cells[:1]
            ids.append([vid(a, b) for a, b in cells])
            zs.append([a * u + b * w for a, b in cells])
    m = _build_from_corners(ids, zs, color, delta)
    lat = lambda i, j: i * u + j * w  # noqa: E731
    if layout == "minus":
        a = lifted_path(m, [(vid(i, 0), lat(i, 0)) for i in range(P + 1)])
        b = lifted_path(m, [(vid(0, j), lat(0, j)) for j in range(Q + 1)])
        periods = (P * u, Q * w)
    else:
        a = lifted_path(m, [(vid(0, j), lat(0, j)) for j in range(Q + 1)])
        b = lifted_path(m, [(vid(-i, 0), lat(-i, 0)) for i in range(P + 1)])
        periods = (Q * w, -P * u)
    return CriticalMap(dc=m.dc, corner_z=m.corner_z, delta=delta, periods=periods, basis=(a, b))


def lifted_path(m: CriticalMap, steps) -> Chain:
    """◊-chain through ``(vertex, lifted position)`` pairs.

    Consecutive pairs must be joined by a ◊-edge whose lifted displacement
    matches; this disambiguates parallel edges on small tori.
    """
    table = {}
    for q in range(m.dc.n_quads):
        for k in range(4):
            k2 = (k + 1) % 4
            a, b = int(m.dc.quads[q, k]), int(m.dc.quads[q, k2])
            dz = m.corner_z[q, k2] - m.corner_z[q, k]
            e = int(m.dc.sides[q, k])
            sign = 1 if k % 2 == 0 else -1
            table[_lattice_key(a, b, dz / m.delta)] = (e, sign)
            table[_lattice_key(b, a, -dz / m.delta)] = (e, -sign)
    c = np.zeros(m.dc.n_edges, dtype=np.int64)
    for (a, za), (b, zb) in zip(steps[:-1], steps[1:]):
        hit = table.get(_lattice_key(a, b, (zb - za) / m.delta))
        if hit is None:
            raise DRSError(f"no ◊-edge from {a} to {b} with displacement {zb - za!r}")
        c[hit[0]] += hit[1]
    return Chain(m.dc, 1, DIAMOND, c)


def path_chain(dc: DoubleComplex, verts, edges=None) -> Chain:
    """1-chain on ◊ following the vertex sequence ``verts``.

    ``edges`` optionally names the ◊-edge for every step; otherwise the first
    edge found between consecutive vertices is used (ambiguous only when the
    complex has parallel edges, in which case pass ``edges``).
    """
    c = np.zeros(dc.n_edges, dtype=np.int64)
    lookup = {}
    for e, (a, b) in enumerate(dc.edges.tolist()):
        lookup.setdefault((a, b), e)
    for t in range(len(verts) - 1):
        a, b = int(verts[t]), int(verts[t + 1])
        if edges is not None:
            e = int(edges[t])
            s = 1 if tuple(dc.edges[e]) == (a, b) else -1
        elif (a, b) in lookup:
            e, s = lookup[(a, b)], 1
        elif (b, a) in lookup:
            e, s = lookup[(b, a)], -1
        else:
            raise DRSError(f"no ◊-edge between {a} and {b}")
        c[e] += s
    return Chain(dc, 1, DIAMOND, c)


def _tri_geometry(rho):
    r_minus, r_slash, r_back = (float(v) for v in rho)
    if min(r_minus, r_slash, r_back) <= 0:
        raise NotCritical("parameters must be positive")
    constraint = r_minus * r_back + r_back * r_slash + r_slash * r_minus
    if abs(constraint - 1.0) > 1e-12:
        raise NotCritical(f"rho_- rho_\\ + rho_\\ rho_/ + rho_/ rho_- = {constraint!r} != 1")
    a2, a1, a0 = (math.atan2(1.0, r) for r in (r_minus, r_slash, r_back))
    w1 = 2.0 * math.sin(a2)
    w2 = 2.0 * math.sin(a1) * complex(math.cos(a0), math.sin(a0))
    # circumcenter of the triangle 0, w1, w2 (circumradius 1)
    c_up = complex(w1 / 2.0, (abs(w2) ** 2 - w1 * w2.real) / (2.0 * w2.imag))
    return w1, w2, c_up


def tri_hex_torus(rho=(1 / math.sqrt(3),) * 3, m: int = 1, n: int = 1) -> CriticalMap:
    """Critical triangular/hexagonal torus on ``m x n`` fundamental triangles pairs.

    ``rho = (rho_-, rho_/, rho_\\)`` are the parameters of the Gamma edges
    along ``w1``, along ``w2`` and along ``w2 - w1``.  They must satisfy
    ``rho_- rho_\\ + rho_\\ rho_/ + rho_/ rho_- = 1``.  Gamma is the triangular
    lattice ``Z w1 + Z w2`` modulo ``m w1, n w2``; its modulus is
    ``n w2 / (m w1)``.  ``m = n = 1`` is the torus made of three quads.
    """
    w1, w2, c_up = _tri_geometry(rho)
    c_down = w1 + w2 - c_up
    nG = m * n

    def g(i, j):
        return (i % m) * n + (j % n)

    def up(i, j):
        return nG + 2 * g(i, j)

    def down(i, j):
        return nG + 2 * g(i, j) + 1

    def pos(i, j):
        return i * w1 + j * w2

    color = np.array([0] * nG + [1] * (2 * nG))
    ids, zs = [], []
    for i in range(m):
        for j in range(n):
            o = pos(i, j)
            # edge along w1
            ids.append([g(i, j), down(i, j - 1), g(i + 1, j), up(i, j)])
            zs.append([o, o - w2 + c_down, o + w1, o + c_up])
            # edge along w2
            ids.append([g(i, j), up(i, j), g(i, j + 1), down(i - 1, j)])
            zs.append([o, o + c_up, o + w2, o - w1 + c_down])
            # edge from (i+1, j) to (i, j+1)
            ids.append([g(i + 1, j), down(i, j), g(i, j + 1), up(i, j)])
            zs.append([o + w1, o + c_down, o + w2, o + c_up])
    cm = _build_from_corners(ids, zs, color, 1.0, periods=(m * w1, n * w2))
    # zigzag x(i, 0) -> up(i, 0) -> x(i + 1, 0) and the same along w2
    a = [(g(0, 0), 0j)]
    for i in range(m):
        a += [(up(i, 0), pos(i, 0) + c_up), (g(i + 1, 0), pos(i + 1, 0))]
    b = [(g(0, 0), 0j)]
    for j in range(n):
        b += [(up(0, j), pos(0, j) + c_up), (g(0, j + 1), pos(0, j + 1))]
    basis = (lifted_path(cm, a), lifted_path(cm, b))
    return CriticalMap(dc=cm.dc, corner_z=cm.corner_z, delta=1.0, periods=cm.periods, basis=basis)


def modulus(m: CriticalMap) -> complex:
    """Ratio of the two stored periods (the continuous modulus of a flat torus)."""
    w1, w2 = m.periods
    return complex(w2 / w1)


def rhombus_patch(cells, directions, delta: float = 1.0) -> CriticalMap:
    """Disc-mode map from integer cells of a rhombic lattice.

    ``directions = (u, w)`` are unit vectors (counterclockwise order) and
    every cell ``(i, j)`` becomes the rhombus with corners ``i u + j w`` etc.
    Vertex ``(0, 0)`` is the origin and lies on Gamma.
    """
    u, w = (delta * complex(d) for d in directions)
    cells = sorted(set((int(i), int(j)) for i, j in cells))
    index = {}
    ids, zs = [], []
    for i, j in cells:
        corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
        if (i + j) % 2:
            corners = corners[1:] + corners[:1]
        row = []
        for c in corners:
            if c not in index:
                index[c] = len(index)
            row.append(index[c])
        ids.append(row)
        zs.append([a * u + b * w for a, b in corners])
    if (0, 0) not in index:
        raise DRSError("the patch must contain the lattice point (0, 0)")
    color = np.zeros(len(index), dtype=np.int64)
    vz = np.zeros(len(index), dtype=np.complex128)
    for (a, b), v in index.items():
        color[v] = (a + b) % 2
        vz[v] = a * u + b * w
    cm = _build_from_corners(ids, zs, color, delta)
    return CriticalMap(dc=cm.dc, corner_z=cm.corner_z, delta=delta, vertex_z=vz, origin=index[(0, 0)])


def square_patch(n: int, theta: float = math.pi / 4, delta: float = 1.0, *, lo=None) -> CriticalMap:
    """Rhombic patch ``[-n, n)^2`` (or ``[lo, n)^2``) of the lattice with directions ``e^{-i theta}, e^{i theta}``."""
    if not (0.0 < theta < math.pi / 2):
        raise BadTheta(f"theta must lie in (0, pi/2), got {theta!r}")
    lo = -n if lo is None else lo
    cells = [(i, j) for i in range(lo, n) for j in range(lo, n)]
    return rhombus_patch(cells, (np.exp(-1j * theta), np.exp(1j * theta)), delta)


def sextant_patch(radius: int, delta: float = 1.0) -> CriticalMap:
    """First sextant of the equilateral triangular/hexagonal lattice.

    One rhombus is placed on every Gamma edge ``a + b e^{i pi/3}`` with both
    ends in the sector ``a, b >= 0, a + b <= radius``; the Gamma* vertices are
    the centers of the adjacent triangles.
    """
    w1, w2 = delta * math.sqrt(3.0), delta * math.sqrt(3.0) * np.exp(1j * math.pi / 3)
    c_up = (w1 + w2) / 3.0
    c_down = w1 + w2 - c_up
    index = {}

    def vid(key):
        if key not in index:
            index[key] = len(index)
        return index[key]

    def gp(i, j):
        return ("g", i, j), i * w1 + j * w2

    def tri(kind, i, j):
        o = i * w1 + j * w2
        return (kind, i, j), o + (c_up if kind == "u" else c_down)

    def inside(p):
        return p[0] >= 0 and p[1] >= 0 and p[0] + p[1] <= radius

    ids, zs = [], []
    origin_key = ("g", 0, 0)
    vid(origin_key)
    for i in range(-1, radius + 1):
        for j in range(-1, radius + 1):
            for a, b, y, y2 in (
                ((i, j), (i + 1, j), tri("d", i, j - 1), tri("u", i, j)),
                ((i, j), (i, j + 1), tri("u", i, j), tri("d", i - 1, j)),
                ((i + 1, j), (i, j + 1), tri("d", i, j), tri("u", i, j)),
            ):
                if not (inside(a) and inside(b)):
                    continue
                xa, xb = gp(*a), gp(*b)
                ids.append([vid(xa[0]), vid(y[0]), vid(xb[0]), vid(y2[0])])
                zs.append([xa[1], y[1], xb[1], y2[1]])
    color = np.zeros(len(index), dtype=np.int64)
    vz = np.zeros(len(index), dtype=np.complex128)
    for key, v in index.items():
        color[v] = 0 if key[0] == "g" else 1
        if key[0] == "g":
            vz[v] = key[1] * w1 + key[2] * w2
        else:
            vz[v] = tri(*key)[1]
    cm = _build_from_corners(ids, zs, color, delta)
    return CriticalMap(dc=cm.dc, corner_z=cm.corner_z, delta=delta, vertex_z=vz, origin=index[origin_key])


def chain_patch(n: int, width: float = 1e-3) -> CriticalMap:
    """Thin strip of rhombi whose Gamma vertices are ``0, 1/n, ..., 1`` on the real axis.

    The Gamma* vertices sit at ``(k + 1/2)/n +- i width/2``.  Only the Gamma
    values are of interest; the one-dimensional limit itself is handled by
    :func:`chain_powers`.
    """
    h = 1.0 / n
    ids, zs = [], []
    for k in range(n):
        x, x2 = k, k + 1
        ids.append([x, n + 1 + 2 * k, x2, n + 2 + 2 * k])
        zs.append([k * h, (k + 0.5) * h - 0.5j * width, (k + 1) * h, (k + 0.5) * h + 0.5j * width])
    zs = np.array(zs)
    rho = np.full(n, width / h)
    color = np.array([0] * (n + 1) + [1] * (2 * n))
    dc = build_double(ids, rho, graph=color)
    vz = np.zeros(3 * n + 1, dtype=np.complex128)
    for q in range(n):
        vz[ids[q]] = zs[q]
    delta = abs(zs[0, 1] - zs[0, 0])
    return CriticalMap(dc=dc, corner_z=zs, delta=float(delta), vertex_z=vz, origin=0)


def refine(m: CriticalMap) -> CriticalMap:
    """Split every rhombus into four rhombi of half the side.

    New Gamma vertices are the old vertices (both colors) together with the
    quad centers; new Gamma* vertices are the midpoints of the old sides.
    """
    dc = m.dc
    V, E, F = dc.n_vertices, dc.n_edges, dc.n_quads
    center = lambda q: V + q  # noqa: E731
    mid = lambda e: V + F + e  # noqa: E731
    ids, zs, keys = [], [], []
    for q in range(F):
        z = m.corner_z[q]
        c = z.mean()
        for k in range(4):
            v = int(dc.quads[q, k])
            e_in, e_out = int(dc.sides[q, (k - 1) % 4]), int(dc.sides[q, k])
            zm_out = 0.5 * (z[k] + z[(k + 1) % 4])
            zm_in = 0.5 * (z[k] + z[(k - 1) % 4])
            ids.append([v, mid(e_out), center(q), mid(e_in)])
            zs.append([z[k], zm_out, c, zm_in])
            end = k % 2  # 0 when v is the Gamma end of both sides
            keys.append([("half", e_out, end), ("inner", q, k), ("inner", q, (k - 1) % 4),
                         ("half", e_in, end)])
    color = np.array([0] * (V + F) + [1] * E)
    rho = np.ones(4 * F)
    # all refined rhombi are similar to the parent with a rotated role; recompute from geometry
    zs = np.array(zs)
    rho = np.abs(zs[:, 3] - zs[:, 1]) / np.abs(zs[:, 2] - zs[:, 0])
    new = build_double(ids, rho, graph=color, side_keys=keys)
    vz = None
    if m.vertex_z is not None:
        vz = np.zeros(new.n_vertices, dtype=np.complex128)
        for q in range(len(ids)):
            vz[ids[q]] = zs[q]
    basis = None
    if m.basis is not None:
        basis = tuple(_refine_cycle(m, new, c) for c in m.basis)
    return CriticalMap(dc=new, corner_z=zs, delta=m.delta / 2, vertex_z=vz, origin=m.origin,
                       periods=m.periods, basis=basis)


def _refine_cycle(m, new, chain):
    """Image of a ◊-cycle under refinement: every edge becomes its two halves."""
    dc = m.dc
    V, F = dc.n_vertices, dc.n_quads
    half = {}
    for e, (a, b) in enumerate(new.edges.tolist()):
        half.setdefault((a, b), e)
    c = np.zeros(new.n_edges, dtype=np.int64)
    for e, s in chain.support().items():
        g_end, s_end = (int(v) for v in dc.edges[e])
        mid = V + F + e
        # the Gamma end of the old edge stays on the new Gamma; the old Gamma* end
        # is on the new Gamma too, and the midpoint is on the new Gamma*
        c[half[(g_end, mid)]] += s
        c[half[(s_end, mid)]] -= s
    return Chain(new, 1, DIAMOND, c)


# ------------------------------------------------------------- forms along Z

def dz_diamond(m: CriticalMap) -> Cochain:
    """``dZ`` on the quad-graph: the displacement of every edge (Gamma to Gamma* end)."""
    dc = m.dc
    out = np.zeros(dc.n_edges, dtype=np.complex128)
    z = m.corner_z
    step = np.roll(z, -1, axis=1) - z
    signs = np.array([1, -1, 1, -1])
    out[dc.sides.ravel()] = (step * signs[None, :]).ravel()
    return Cochain(dc, 1, DIAMOND, out)


def dz_lambda(m: CriticalMap) -> Cochain:
    """``dZ`` on the double: the two diagonals of every rhombus."""
    z = m.corner_z
    return Cochain(m.dc, 1, LAMBDA, np.concatenate([z[:, 2] - z[:, 0], z[:, 3] - z[:, 1]]))


def fdz_diamond(m: CriticalMap, f: Cochain) -> Cochain:
    """Trapezoid 1-form ``(f(x) + f(y))/2 (Z(y) - Z(x))`` on every quad-graph edge."""
    dc = m.dc
    fv = np.asarray(f.values)
    mean = 0.5 * (fv[dc.edges[:, 0]] + fv[dc.edges[:, 1]])
    return Cochain(dc, 1, DIAMOND, mean * dz_diamond(m).values)


def integrate_fdZ(m: CriticalMap, f: Cochain) -> Cochain:
    """The 1-form ``f dZ`` on the double.

    The trapezoid form on the quad-graph is averaged onto the diagonals.  For a
    holomorphic ``f`` the result is closed and of type (1,0); otherwise it is
    still returned and is merely closed on the quad-graph faces where ``f``
    satisfies the Cauchy-Riemann equation.
    """
    nu = fdz_diamond(m, f)
    return Cochain(m.dc, 1, LAMBDA, m.dc.average1 @ nu.values)


# --------------------------------------------------------------- BFS from O

@dataclass(frozen=True)
class _Tree:
    order: np.ndarray
    parent: np.ndarray
    dz: np.ndarray


def _origin_tree(m: CriticalMap) -> _Tree:
    if m.vertex_z is None or m.origin is None:
        raise NotSimplyConnected("this evaluation needs a simply connected (disc) map with an origin")
    import scipy.sparse as sp
    from scipy.sparse.csgraph import breadth_first_order
    dc = m.dc
    n = dc.n_vertices
    a, b = dc.edges[:, 0], dc.edges[:, 1]
    adj = sp.csr_matrix((np.ones(2 * len(a)), (np.concatenate([a, b]), np.concatenate([b, a]))),
                        shape=(n, n))
    order, pred = breadth_first_order(adj, int(m.origin), directed=False, return_predecessors=True)
    if len(order) != n:
        raise DRSError("the quad-graph is not connected")
    parent = np.where(pred < 0, int(m.origin), pred).astype(np.int64)
    dz = m.vertex_z - m.vertex_z[parent]
    return _Tree(order.astype(np.int64), parent, np.ascontiguousarray(dz))


def _check_lambda(m: CriticalMap, lam: complex):
    if abs(abs(lam) * m.delta - 2.0) <= 1e-12:
        raise OnSingularCircle(f"|lambda| delta = 2 for lambda = {lam!r}")


def exponential(m: CriticalMap, lam: complex) -> Cochain:
    """Discrete exponential ``Exp(:lambda:)`` with value 1 at the origin.

    Along every edge ``(x, y)`` the value is multiplied by
    ``(2 + lambda dZ) / (2 - lambda dZ)``; products run down a breadth-first
    tree from the origin.  Path independence is the face identity checked by
    :func:`face_products`.
    """
    lam = complex(lam)
    _check_lambda(m, lam)
    t = _origin_tree(m)
    factor = (2.0 + lam * t.dz) / (2.0 - lam * t.dz)
    k = _kernels.active()
    vals = k.propagate_product(t.order, t.parent, np.ascontiguousarray(factor), 1.0 + 0.0j)
    return Cochain(m.dc, 0, LAMBDA, np.asarray(vals))


def face_products(m: CriticalMap, lam: complex) -> np.ndarray:
    """Product of the four edge factors around every rhombus (equal to 1)."""
    lam = complex(lam)
    _check_lambda(m, lam)
    z = m.corner_z
    step = np.roll(z, -1, axis=1) - z
    return np.prod((2.0 + lam * step) / (2.0 - lam * step), axis=1)


def exp_rectangular(theta: float, delta: float, lam: complex, n, mm):
    """Closed form of the exponential at ``delta (n e^{-i theta} + mm e^{i theta})``.

    Each step along ``delta e^{-i theta}`` contributes the factor built from
    ``e^{-i theta}``, and likewise for ``e^{i theta}``.
    """
    u, w = delta * np.exp(-1j * theta), delta * np.exp(1j * theta)
    fu = (1 + lam * u / 2) / (1 - lam * u / 2)
    fw = (1 + lam * w / 2) / (1 - lam * w / 2)
    return fu ** np.asarray(n) * fw ** np.asarray(mm)


def rebase(m: CriticalMap, a: complex, b: int) -> CriticalMap:
    """The critical map ``zeta = a (Z - Z(b))`` with origin ``b``."""
    if m.vertex_z is None:
        raise NotSimplyConnected("rebasing needs vertex positions")
    a = complex(a)
    if a == 0:
        raise DRSError("the scale a must be nonzero")
    zb = m.vertex_z[b]
    return CriticalMap(dc=m.dc, corner_z=a * (m.corner_z - zb), delta=abs(a) * m.delta,
                       vertex_z=a * (m.vertex_z - zb), origin=int(b))


def change_base_point(m: CriticalMap, b: int, a: complex, lam: complex) -> float:
    """Largest gap between ``Exp_zeta(:lambda:)`` and ``Exp_Z(:a lambda:) / Exp_Z(:a lambda:)(b)``."""
    lhs = exponential(rebase(m, a, b), lam).values
    e = exponential(m, complex(a) * complex(lam)).values
    rhs = e / e[b]
    return float(np.max(np.abs(lhs - rhs)))


# ------------------------------------------------------------------- powers

def powers(m: CriticalMap, kmax: int) -> np.ndarray:
    """``Z^0 .. Z^kmax`` as rows of a ``(kmax + 1, V)`` array.

    ``Z^k`` is the integral from the origin of ``k Z^(k-1) dZ`` computed with
    the trapezoid rule along a breadth-first tree.
    """
    if kmax < 0:
        raise DRSError("the degree must be non-negative")
    t = _origin_tree(m)
    k = _kernels.active()
    out = np.empty((kmax + 1, m.dc.n_vertices), dtype=np.complex128)
    out[0] = 1.0
    for j in range(1, kmax + 1):
        out[j] = k.propagate_power(t.order, t.parent, t.dz, out[j - 1], float(j))
    return out


def power(m: CriticalMap, k: int) -> Cochain:
    """The discrete power ``Z^k`` as a function on the double."""
    return Cochain(m.dc, 0, LAMBDA, powers(m, k)[k])


def power_path_residual(m: CriticalMap, table: np.ndarray) -> float:
    """Largest violation of ``Z^k(y) - Z^k(x) = k (Z^(k-1)(x) + Z^(k-1)(y))/2 dZ`` on any edge."""
    dc = m.dc
    a, b = dc.edges[:, 0], dc.edges[:, 1]
    dz = m.vertex_z[b] - m.vertex_z[a]
    worst = 0.0
    for j in range(1, len(table)):
        r = table[j][b] - table[j][a] - j * 0.5 * (table[j - 1][a] + table[j - 1][b]) * dz
        scale = max(1.0, float(np.abs(table[j]).max()))
        worst = max(worst, float(np.abs(r).max()) / scale)
    return worst


def chain_powers(n: int, kmax: int) -> np.ndarray:
    """Powers on the one-dimensional chain ``0, 1/n, ..., 1``.

    Consecutive chain points are joined by an edge of length ``1/n`` and the
    trapezoid rule is applied along the chain.  Returns ``(kmax + 1, n + 1)``.
    """
    h = 1.0 / n
    out = np.zeros((kmax + 1, n + 1))
    out[0] = 1.0
    for k in range(1, kmax + 1):
        inc = 0.5 * k * (out[k - 1][:-1] + out[k - 1][1:]) * h
        out[k, 1:] = np.cumsum(inc)
    return out


def smallest_angle(dc: DoubleComplex) -> float:
    """Smallest rhombus angle ``eta``."""
    return float(np.min(np.minimum(2 * np.arctan(dc.rho), 2 * np.arctan(1 / dc.rho))))


def power_bound(k: int, eta: float) -> float:
    """Constant ``k!/2 (4 / sin eta)^(k-2)`` of the power error bound."""
    return math.factorial(k) / 2.0 * (4.0 / math.sin(eta)) ** (k - 2)


@dataclass
class SeriesReport:
    """Partial sums of ``sum lambda^k Z^k / k!``.

    ``gaps[K]`` is the sup-norm distance of the K-th partial sum to the
    exponential (``None`` on the singular circle); ``term_norms[K]`` the
    sup norm of the K-th term.
    """

    partial: np.ndarray
    gaps: list
    term_norms: list


def exp_series(m: CriticalMap, lam: complex, kmax: int) -> SeriesReport:
    lam = complex(lam)
    t = _origin_tree(m)
    kern = _kernels.active()
    try:
        target = exponential(m, lam).values
    except OnSingularCircle:
        target = None
    # W_k = Z^k / k! satisfies the same trapezoid recursion with factor 1
    w = np.ones(m.dc.n_vertices, dtype=np.complex128)
    term = w.copy()
    s = term.copy()
    gaps = [None if target is None else float(np.abs(s - target).max())]
    norms = [float(np.abs(term).max())]
    for k in range(1, kmax + 1):
        w = np.asarray(kern.propagate_power(t.order, t.parent, t.dz, w, 1.0))
        term = lam ** k * w
        s = s + term
        norms.append(float(np.abs(term).max()))
        gaps.append(None if target is None else float(np.abs(s - target).max()))
    return SeriesReport(partial=s, gaps=gaps, term_norms=norms)


# ----------------------------------------------------------- Young diagrams

@dataclass(frozen=True)
class YoungDiagram:
    """Pointwise monomial ``prod_j (Z^(k_j))^(l_j)`` coded by its column heights.

    ``columns`` lists the column heights in non-increasing order; a column of
    height ``k`` stands for one factor ``Z^k``.
    """

    columns: tuple

    def __post_init__(self):
        cols = tuple(int(c) for c in self.columns)
        if any(c <= 0 for c in cols):
            raise DRSError("column heights must be positive")
        object.__setattr__(self, "columns", tuple(sorted(cols, reverse=True)))

    @classmethod
    def from_rows(cls, rows) -> "YoungDiagram":
        """Diagram given by its row lengths (top row first)."""
        rows = [int(r) for r in rows]
        if not rows:
            return cls(())
        return cls(tuple(sum(1 for r in rows if r > i) for i in range(max(rows))))

    @property
    def degree(self) -> int:
        return sum(self.columns)

    @property
    def parts(self) -> int:
        return len(self.columns)

    @property
    def multiplicities(self) -> list:
        """``[(k_1, l_1), (k_2, l_2), ...]`` with ``k_1 > k_2 > ...``."""
        out = []
        for c in self.columns:
            if out and out[-1][0] == c:
                out[-1] = (c, out[-1][1] + 1)
            else:
                out.append((c, 1))
        return out

    @property
    def rows(self) -> tuple:
        cols = self.columns
        if not cols:
            return ()
        return tuple(sum(1 for c in cols if c > i) for i in range(cols[0]))

    def evaluate(self, zvals) -> complex:
        """Pointwise product, ``zvals[k]`` being ``Z^k`` at the point."""
        out = 1.0 + 0.0j
        for c in self.columns:
            out *= zvals[c]
        return out


def young_coefficient(y: YoungDiagram) -> int:
    """Integer coefficient of a diagram in the translated powers."""
    k, l = y.degree, y.parts
    num = math.factorial(k) * math.factorial(l)
    den = 1
    for kj, lj in y.multiplicities:
        den *= math.factorial(kj) ** lj * math.factorial(lj)
    if num % den:
        raise DRSError("non-integer Young coefficient")  # cannot happen: multinomials
    return (-1) ** (k + l) * (num // den)


def young_diagrams(degree: int) -> list:
    """All diagrams of a given degree, as column partitions in reverse lexicographic order."""
    def parts(n, cap):
        if n == 0:
            yield ()
            return
        for first in range(min(n, cap), 0, -1):
            for rest in parts(n - first, first):
                yield (first,) + rest
    return [YoungDiagram(p) for p in parts(degree, degree)]


def b_recursive(zvals, kmax: int) -> list:
    """``B^0 .. B^kmax`` from the values ``Z^j(b)`` by the binomial recursion."""
    B = [1.0 + 0.0j]
    for k in range(1, kmax + 1):
        B.append(sum(math.comb(k, j) * (-1) ** (k + j + 1) * zvals[k - j] * B[j] for j in range(k)))
    return B


def b_young(zvals, kmax: int) -> list:
    """``B^0 .. B^kmax`` as sums ``sum_Y c(Y) Y(b)`` over Young diagrams."""
    return [sum(young_coefficient(y) * y.evaluate(zvals) for y in young_diagrams(k)) if k else 1.0 + 0.0j
            for k in range(kmax + 1)]


def translated_powers(m: CriticalMap, a: complex, b: int, k: int, route: str = "recursion") -> Cochain:
    """Powers of ``zeta = a (Z - Z(b))`` written through the powers of ``Z``.

    ``zeta^k = a^k sum_j binom(k, j) (-1)^j Z^(k-j) B^j(b)``, with ``B^j``
    from the recursion (``route="recursion"``) or from Young diagrams
    (``route="young"``).
    """
    table = powers(m, k)
    zvals = table[:, b]
    if route == "recursion":
        B = b_recursive(zvals, k)
    elif route == "young":
        B = b_young(zvals, k)
    else:
        raise DRSError(f"unknown route {route!r}")
    out = sum(math.comb(k, j) * (-1) ** j * table[k - j] * B[j] for j in range(k + 1))
    return Cochain(m.dc, 0, LAMBDA, complex(a) ** k * out)


# -------------------------------------------------------------- ramification

def winding_number(points, tol: float = 1e-12) -> int:
    """Winding number of the closed polygon through ``points`` around 0.

    Raises :class:`PassesThroughOrigin` when a vertex or an edge of the
    polygon comes within ``tol`` (relative) of the origin.
    """
    p = np.asarray(points, dtype=np.complex128)
    q = np.roll(p, -1)
    scale = max(1.0, float(np.abs(p).max()))
    seg = q - p
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.clip(-(np.conj(seg) * p).real / (np.abs(seg) ** 2), 0.0, 1.0)
    t = np.where(np.abs(seg) > 0, t, 0.0)
    dist = np.abs(p + t * seg)
    if (dist <= tol * scale).any():
        raise PassesThroughOrigin("the image polygon meets the origin")
    total = np.angle(q / p).sum()
    return int(round(total / (2 * math.pi)))


def ramification_number(f: Cochain, loop, tol: float = 1e-12) -> int:
    """Winding number around 0 of the image of a closed vertex loop."""
    vals = np.asarray(f.values)[np.asarray(loop, dtype=np.int64)]
    return winding_number(vals, tol)


def face_ramification(f: Cochain, tol: float = 1e-12) -> np.ndarray:
    """Per-face winding numbers (``nan`` where the image quad meets 0)."""
    out = np.full(f.dc.n_quads, np.nan)
    vals = np.asarray(f.values)
    for q, quad in enumerate(f.dc.quads):
        try:
            out[q] = winding_number(vals[quad], tol)
        except PassesThroughOrigin:
            pass
    return out


def _edge_quads(dc: DoubleComplex) -> list:
    inc = [[] for _ in range(dc.n_edges)]
    for q in range(dc.n_quads):
        for k in range(4):
            inc[int(dc.sides[q, k])].append((q, k))
    return inc


def region_boundary(dc: DoubleComplex, faces) -> list:
    """Counterclockwise vertex loop bounding a disc-like union of faces."""
    region = set(int(q) for q in faces)
    inc = _edge_quads(dc)
    nxt = {}
    for q in region:
        for k in range(4):
            e = int(dc.sides[q, k])
            if all(q2 in region for q2, _ in inc[e]) and len(inc[e]) == 2:
                continue
            a, b = int(dc.quads[q, k]), int(dc.quads[q, (k + 1) % 4])
            if a in nxt:
                raise DRSError("the region boundary is not a simple loop")
            nxt[a] = b
    if not nxt:
        raise DRSError("the region has no boundary")
    start = min(nxt)
    loop = [start]
    while True:
        v = nxt[loop[-1]]
        if v == start:
            break
        loop.append(v)
        if len(loop) > len(nxt):
            raise DRSError("the region boundary is not a simple loop")
    if len(loop) != len(nxt):
        raise DRSError("the region boundary has several components")
    return loop


def faces_within(m: CriticalMap, radius: float) -> list:
    """Faces whose center lies within ``radius`` of the origin."""
    c = m.corner_z.mean(axis=1)
    return [int(q) for q in np.flatnonzero(np.abs(c) < radius)]


# ------------------------------------------------------------ continuation

@dataclass
class Continuation:
    """Result of corner closing: values, which of them are known, and obstructions ``(quad, residual)``."""

    values: np.ndarray
    known: np.ndarray
    obstructions: list
    added: int


def continue_holomorphic(dc: DoubleComplex, values, region=None, tol: float = 1e-10) -> Continuation:
    """Extend a partial holomorphic function by closing corners.

    Wherever three corners of a face in ``region`` are known, the fourth
    follows from the Cauchy-Riemann equation.  Unknown entries of ``values``
    are ``nan``.  Faces with four known corners that violate the equation by
    more than ``tol`` are reported as obstructions.
    """
    f = np.array(values, dtype=np.complex128)
    known = ~np.isnan(f.real)
    faces = range(dc.n_quads) if region is None else sorted(set(int(q) for q in region))
    allowed = np.zeros(dc.n_quads, dtype=bool)
    allowed[list(faces)] = True
    by_vertex = [[] for _ in range(dc.n_vertices)]
    for q in faces:
        for v in set(dc.quads[q].tolist()):
            by_vertex[v].append(q)
    queue = deque(faces)
    queued = np.zeros(dc.n_quads, dtype=bool)
    queued[list(faces)] = True
    added = 0
    while queue:
        q = queue.popleft()
        queued[q] = False
        x, y, x2, y2 = (int(v) for v in dc.quads[q])
        r = dc.rho[q]
        miss = [v for v in (x, y, x2, y2) if not known[v]]
        if len(set(miss)) != 1:
            continue
        v = miss[0]
        if v == y2:
            f[v] = f[y] + 1j * r * (f[x2] - f[x])
        elif v == y:
            f[v] = f[y2] - 1j * r * (f[x2] - f[x])
        elif v == x2:
            f[v] = f[x] + (f[y2] - f[y]) / (1j * r)
        else:
            f[v] = f[x2] - (f[y2] - f[y]) / (1j * r)
        known[v] = True
        added += 1
        for q2 in by_vertex[v]:
            if not queued[q2]:
                queued[q2] = True
                queue.append(q2)
    obstructions = []
    for q in faces:
        quad = dc.quads[q]
        if known[quad].all():
            x, y, x2, y2 = quad
            res = abs(f[y2] - f[y] - 1j * dc.rho[q] * (f[x2] - f[x]))
            if res > tol:
                obstructions.append((int(q), float(res)))
    return Continuation(values=f, known=known, obstructions=obstructions, added=added)


# ------------------------------------------------------------- train-tracks

@dataclass
class Thread:
    """A train-track: faces crossed in order and the edges between them.

    ``signs[i]`` orients ``edges[i]`` consistently along the thread (all
    signed edges are parallel in a rhombic realization).  For a closed
    thread the first edge is not repeated at the end.
    """

    faces: list
    edges: list
    signs: list
    closed: bool

    def intersection(self, cycle: Chain) -> int:
        """Algebraic number of crossings with a quad-graph cycle."""
        return int(sum(s * int(cycle.coeffs[e]) for e, s in zip(self.edges, self.signs)))


# opposite sides of a rhombus are antiparallel once both are oriented Gamma -> Gamma*
_OPPOSITE_SIGN = -1


def train_tracks(dc: DoubleComplex) -> list:
    """Partition of the quad-graph edges into threads.

    A thread enters a face through one side and leaves through the opposite
    side, so each face is crossed by exactly two thread segments.
    """
    inc = _edge_quads(dc)

    def other(e, q, k):
        for q2, k2 in inc[e]:
            if (q2, k2) != (q, k):
                return q2, k2
        return None

    def walk(state):
        states = [state]
        while True:
            q, k = states[-1]
            ko = (k + 2) % 4
            e = int(dc.sides[q, ko])
            nxt = other(e, q, ko)
            if nxt is None:
                return states, False
            if nxt == states[0]:
                return states, True
            states.append(nxt)

    seen = np.zeros(dc.n_edges, dtype=bool)
    threads = []
    for e0 in range(dc.n_edges):
        if seen[e0]:
            continue
        q, k = inc[e0][0]
        states, closed = walk((q, k))
        if not closed:
            back = other(e0, q, k)
            if back is not None:
                rev, _ = walk(back)
                # reversed backward walk, re-entered from the far end
                flipped = [(qq, (kk + 2) % 4) for qq, kk in reversed(rev)]
                states = flipped + states
        faces = [s[0] for s in states]
        edges = [int(dc.sides[states[0][0], states[0][1]])]
        signs = [1]
        for qq, kk in states:
            ko = (kk + 2) % 4
            edges.append(int(dc.sides[qq, ko]))
            signs.append(signs[-1] * _OPPOSITE_SIGN)
        if closed:
            edges.pop()
            signs.pop()
        seen[edges] = True
        threads.append(Thread(faces=faces, edges=edges, signs=signs, closed=closed))
    return threads


def _face_adjacency_connected(dc: DoubleComplex, region: set) -> bool:
    if not region:
        return False
    inc = _edge_quads(dc)
    start = next(iter(region))
    seen = {start}
    stack = [start]
    while stack:
        q = stack.pop()
        for k in range(4):
            for q2, _ in inc[int(dc.sides[q, k])]:
                if q2 in region and q2 not in seen:
                    seen.add(q2)
                    stack.append(q2)
    return seen == region


def is_convex(dc: DoubleComplex, faces, threads=None) -> bool:
    """Thread-interval convexity of a set of faces.

    The region must be connected, and along every thread the faces it
    contains must form one interval (one cyclic interval on a closed thread,
    so that one of the two arcs between any two of them is complete).
    """
    region = set(int(q) for q in faces)
    if not _face_adjacency_connected(dc, region):
        return False
    for t in threads if threads is not None else train_tracks(dc):
        inside = np.array([q in region for q in t.faces])
        if not inside.any() or inside.all():
            continue
        if t.closed:
            starts = np.sum(inside & ~np.roll(inside, 1))
        else:
            starts = int(inside[0]) + np.sum(inside[1:] & ~inside[:-1])
        if starts > 1:
            return False
    return True
