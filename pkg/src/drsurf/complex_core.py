"""Quad-graphs, their double, chains, cochains and (co)boundaries.

Cell conventions
----------------
* Vertices are dense integers.  ``color[v]`` is 0 on the graph Gamma and 1 on
  the dual graph Gamma*.
* Quads are stored counterclockwise as ``(x, y, x', y')`` with ``x, x'`` in
  Gamma.  Side ``k`` of a quad runs from corner ``k`` to corner ``k+1``.
* Quad-graph edges are stored once, oriented from their Gamma end to their
  Gamma* end.  Side ``k`` traverses its edge with sign ``SIDE_SIGN[k]``.
* Edges of the double are indexed by quad: edge ``f`` is the Gamma diagonal
  ``x -> x'`` of quad ``f`` and edge ``F + f`` its Gamma* diagonal ``y -> y'``.
  The dual of ``x -> x'`` is ``y -> y'`` (rotation by +90 degrees), the dual of
  ``y -> y'`` is ``x' -> x``.
* Faces of the double are indexed by the vertex they are dual to.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import BadDual, GradeTwo, GradeZero, NonBipartite, NonManifold, DRSError

GAMMA, GAMMA_STAR = 0, 1
SIDE_SIGN = np.array([1, -1, 1, -1])
LAMBDA, DIAMOND = "lambda", "diamond"


@dataclass(frozen=True, eq=False)
class DoubleComplex:
    """Immutable quad-graph together with its double and conformal structure."""

    color: np.ndarray
    quads: np.ndarray
    rho: np.ndarray
    sides: np.ndarray
    edges: np.ndarray
    closed: bool
    genus: int | None
    labels: tuple = field(default=(), repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.color)

    @property
    def n_quads(self) -> int:
        return len(self.quads)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_quads

    @cached_property
    def rho_lambda(self) -> np.ndarray:
        """Conformal weight of every edge of the double (Gamma edges first)."""
        return np.concatenate([self.rho, 1.0 / self.rho])

    @cached_property
    def lambda_edges(self) -> np.ndarray:
        """``(2F, 2)`` endpoints of the edges of the double."""
        q = self.quads
        return np.concatenate([q[:, [0, 2]], q[:, [1, 3]]])

    @cached_property
    def edge_use(self) -> np.ndarray:
        """Number of quads bordering each quad-graph edge (1 on the rim)."""
        return np.bincount(self.sides.ravel(), minlength=self.n_edges)

    # ---- incidence operators -------------------------------------------------
    @cached_property
    def d0_lambda(self) -> sp.csr_matrix:
        F, V = self.n_quads, self.n_vertices
        ends = self.lambda_edges
        rows = np.repeat(np.arange(2 * F), 2)
        cols = ends.ravel()
        vals = np.tile([-1.0, 1.0], 2 * F)
        return sp.csr_matrix((vals, (rows, cols)), shape=(2 * F, V))

    @cached_property
    def d1_lambda(self) -> sp.csr_matrix:
        F, V = self.n_quads, self.n_vertices
        q = self.quads
        f = np.arange(F)
        rows = np.concatenate([q[:, 3], q[:, 1], q[:, 0], q[:, 2]])
        cols = np.concatenate([f, f, F + f, F + f])
        vals = np.concatenate([np.ones(F), -np.ones(F), np.ones(F), -np.ones(F)])
        m = sp.csr_matrix((vals, (rows, cols)), shape=(V, 2 * F))
        if not self.closed:
            m = sp.diags(self.interior.astype(float)) @ m
        return sp.csr_matrix(m)

    @cached_property
    def star1(self) -> sp.csr_matrix:
        F = self.n_quads
        f = np.arange(F)
        rows = np.concatenate([f, F + f])
        cols = np.concatenate([F + f, f])
        vals = np.concatenate([-1.0 / self.rho, self.rho])
        return sp.csr_matrix((vals, (rows, cols)), shape=(2 * F, 2 * F))

    @cached_property
    def d0_diamond(self) -> sp.csr_matrix:
        E, V = self.n_edges, self.n_vertices
        rows = np.repeat(np.arange(E), 2)
        vals = np.tile([-1.0, 1.0], E)
        return sp.csr_matrix((vals, (rows, self.edges.ravel())), shape=(E, V))

    @cached_property
    def d1_diamond(self) -> sp.csr_matrix:
        F, E = self.n_quads, self.n_edges
        rows = np.repeat(np.arange(F), 4)
        vals = np.tile(SIDE_SIGN.astype(float), F)
        return sp.csr_matrix((vals, (rows, self.sides.ravel())), shape=(F, E))

    @cached_property
    def average1(self) -> sp.csr_matrix:
        """Averaging map on 1-forms, quad-graph -> double."""
        F, E = self.n_quads, self.n_edges
        f = np.arange(F)
        s = self.sides
        rows = np.concatenate([np.repeat(f, 4), np.repeat(F + f, 4)])
        cols = np.concatenate([s.ravel(), s.ravel()])
        vals = np.concatenate([np.tile([0.5, -0.5, -0.5, 0.5], F), np.tile([-0.5, -0.5, 0.5, 0.5], F)])
        return sp.csr_matrix((vals, (rows, cols)), shape=(2 * F, E))

    @cached_property
    def average2(self) -> sp.csr_matrix:
        """Averaging map on 2-forms, quad-graph -> double (faces = dual vertices)."""
        F, V = self.n_quads, self.n_vertices
        rows = self.quads.ravel()
        cols = np.repeat(np.arange(F), 4)
        m = sp.csr_matrix((np.full(4 * F, 0.5), (rows, cols)), shape=(V, F))
        if not self.closed:
            m = sp.diags(self.interior.astype(float)) @ m
        return sp.csr_matrix(m)

    # ---- vertex stars ----------------------------------------------------------
    @cached_property
    def stars(self) -> list:
        """Corners ``(quad, position)`` around each vertex in counterclockwise order."""
        first = {}
        seconds = {}
        for q in range(self.n_quads):
            for k in range(4):
                v = int(self.quads[q, k])
                first[(v, int(self.sides[q, k]))] = (q, k)
                seconds.setdefault(v, []).append(int(self.sides[q, (k - 1) % 4]))
        by_vertex = [[] for _ in range(self.n_vertices)]
        for (v, e), c in first.items():
            by_vertex[v].append((e, c))
        out = []
        for v in range(self.n_vertices):
            corners = by_vertex[v]
            if not corners:
                out.append([])
                continue
            sec = set(seconds.get(v, ()))
            start = None
            for e, c in sorted(corners, key=lambda t: t[1]):
                if e not in sec:
                    start = c
                    break
            if start is None:
                start = min(c for _, c in corners)
            ring = [start]
            while True:
                q, k = ring[-1]
                nxt = first.get((v, int(self.sides[q, (k - 1) % 4])))
                if nxt is None or nxt == start:
                    break
                ring.append(nxt)
            out.append(ring)
        return out

    @cached_property
    def interior(self) -> np.ndarray:
        """True where the vertex star closes up (every vertex in closed mode)."""
        mask = np.ones(self.n_vertices, dtype=bool)
        rim = self.edge_use < 2
        if rim.any():
            mask[np.unique(self.edges[rim].ravel())] = False
        return mask

    @cached_property
    def lambda_components(self) -> np.ndarray:
        """Connected-component label of every vertex in the double."""
        n = self.n_vertices
        a = sp.csr_matrix((np.ones(2 * self.n_quads), (self.lambda_edges[:, 0], self.lambda_edges[:, 1])),
                          shape=(n, n))
        _, labels = sp.csgraph.connected_components(a, directed=False)
        return labels

    def corner_angles(self) -> np.ndarray:
        """Rhombic angle ``2 arctan`` of the diagonal ratio at every corner, shape ``(F, 4)``."""
        a = 2.0 * np.arctan(self.rho)
        b = 2.0 * np.arctan(1.0 / self.rho)
        return np.stack([a, b, a, b], axis=1)

    def conic_angles(self) -> np.ndarray:
        """Total angle of the rhombic metric at every vertex."""
        return np.bincount(self.quads.ravel(), weights=self.corner_angles().ravel(),
                           minlength=self.n_vertices)

    # ---- equality and serialisation ------------------------------------------
    def side_partition(self) -> list:
        groups = {}
        for q in range(self.n_quads):
            for k in range(4):
                groups.setdefault(int(self.sides[q, k]), []).append((q, k))
        return sorted(tuple(sorted(g)) for g in groups.values())

    def same_as(self, other: "DoubleComplex", tol: float = 1e-12) -> bool:
        return (self.n_vertices == other.n_vertices
                and np.array_equal(self.color, other.color)
                and np.array_equal(self.quads, other.quads)
                and np.allclose(self.rho, other.rho, rtol=tol, atol=0)
                and self.side_partition() == other.side_partition())

    def to_json(self) -> dict:
        ids = list(self.labels) if self.labels else list(range(self.n_vertices))
        return {
            "vertices": [{"id": ids[v], "graph": "G" if self.color[v] == GAMMA else "G*"}
                         for v in range(self.n_vertices)],
            "quads": [[ids[v] for v in q] for q in self.quads.tolist()],
            "rho": [{"edge": [ids[q[0]], ids[q[2]]], "value": float(r), "quad": i}
                    for i, (q, r) in enumerate(zip(self.quads.tolist(), self.rho))],
            "sides": self.sides.tolist(),
        }


def _two_color(n, quads):
    adj = [[] for _ in range(n)]
    for q in quads:
        for k in range(4):
            a, b = q[k], q[(k + 1) % 4]
            adj[a].append(b)
            adj[b].append(a)
    color = -np.ones(n, dtype=np.int64)
    for s in range(n):
        if color[s] >= 0 or not adj[s]:
            continue
        color[s] = 0
        dq = deque([s])
        while dq:
            u = dq.popleft()
            for w in adj[u]:
                if color[w] < 0:
                    color[w] = 1 - color[u]
                    dq.append(w)
                elif color[w] == color[u]:
                    raise NonBipartite(f"vertices {u} and {w} share a quad side but cannot be 2-colored")
    return color


def build_double(quads, rho=None, *, graph=None, side_keys=None, labels=None) -> DoubleComplex:
    """Build a :class:`DoubleComplex` from counterclockwise quads.

    Parameters
    ----------
    quads : sequence of 4-tuples of vertex indices ``0..V-1``.
    rho : array of per-quad values of ``rho`` on the diagonal through corners
        0 and 2 (as given), or a mapping ``(a, b) -> value`` keyed by diagonal
        endpoints on either graph.  Defaults to 1 everywhere.
    graph : optional per-vertex color (0 for Gamma, 1 for Gamma*).  When absent
        the quad-graph is 2-colored with vertex ``quads[0][0]`` on Gamma.
    side_keys : optional ``(F, 4)`` hashable keys; sides sharing a key are the
        same edge.  Needed when two distinct edges join the same vertex pair.
    """
    q = np.array(quads, dtype=np.int64).reshape(-1, 4)
    if len(q) == 0:
        raise DRSError("a complex needs at least one quad")
    n = int(q.max()) + 1
    if graph is None:
        color = _two_color(n, q)
        if color[q[0, 0]] != GAMMA:
            color = np.where(color >= 0, 1 - color, color)
        color[color < 0] = GAMMA
    else:
        color = np.asarray(graph, dtype=np.int64)
        if len(color) < n:
            raise DRSError("graph labels missing for some vertices")
        n = len(color)
    qc = color[q]
    ok = (qc[:, 0] == qc[:, 2]) & (qc[:, 1] == qc[:, 3]) & (qc[:, 0] != qc[:, 1])
    if not ok.all():
        raise NonBipartite(f"quad {int(np.argmin(ok))} does not alternate between the two graphs")

    # per-quad rho on the diagonal through the given corners 0,2
    F = len(q)
    if rho is None:
        r_given = np.ones(F)
    elif isinstance(rho, dict):
        r_given = np.empty(F)
        for i, quad in enumerate(q.tolist()):
            e = rho.get((quad[0], quad[2]), rho.get((quad[2], quad[0])))
            es = rho.get((quad[1], quad[3]), rho.get((quad[3], quad[1])))
            if e is None and es is None:
                raise DRSError(f"no rho given for quad {i}")
            if e is not None and es is not None and abs(e * es - 1.0) > 1e-12:
                raise BadDual(f"rho(e*) rho(e) = {e * es!r} on quad {i}")
            r_given[i] = e if e is not None else 1.0 / es
    else:
        r_given = np.asarray(rho, dtype=float).reshape(F)
    if not (r_given > 0).all():
        raise DRSError("rho must be positive")

    # rotate so that corner 0 is on Gamma
    shift = (qc[:, 0] != GAMMA).astype(np.int64)
    idx = (np.arange(4)[None, :] + shift[:, None]) % 4
    q_rot = np.take_along_axis(q, idx, axis=1)
    r = np.where(shift == 1, 1.0 / r_given, r_given)
    if side_keys is None:
        keys = [[frozenset((a[k], a[(k + 1) % 4])) for k in range(4)] for a in q.tolist()]
    else:
        keys = [list(row) for row in side_keys]
    keys = [[row[(k + s) % 4] for k in range(4)] for row, s in zip(keys, shift.tolist())]

    edge_id, edge_list, parity = {}, [], {}
    sides = np.empty((F, 4), dtype=np.int64)
    for i in range(F):
        for k in range(4):
            key = keys[i][k]
            a, b = int(q_rot[i, k]), int(q_rot[i, (k + 1) % 4])
            if key not in edge_id:
                edge_id[key] = len(edge_list)
                edge_list.append((a, b) if k % 2 == 0 else (b, a))
                parity[key] = []
            e = edge_id[key]
            ends = (a, b) if k % 2 == 0 else (b, a)
            if ends != edge_list[e]:
                raise NonManifold(f"side key {key!r} names edges with different endpoints")
            parity[key].append(k % 2)
            sides[i, k] = e
    for key, ps in parity.items():
        if len(ps) > 2:
            raise NonManifold(f"edge {key!r} bounds {len(ps)} quads")
        if len(ps) == 2 and ps[0] == ps[1]:
            raise NonManifold(f"edge {key!r} is traversed twice in the same direction")
    edges = np.array(edge_list, dtype=np.int64)
    use = np.bincount(sides.ravel(), minlength=len(edges))
    closed = bool((use == 2).all())
    used = np.zeros(n, dtype=bool)
    used[q.ravel()] = True
    if not used.all():
        raise DRSError(f"vertex {int(np.argmin(used))} belongs to no quad")
    genus = None
    if closed:
        chi = n - len(edges) + F
        genus = (2 - chi) // 2
    return DoubleComplex(color=color.astype(np.int8), quads=q_rot, rho=r, sides=sides, edges=edges,
                         closed=closed, genus=genus, labels=tuple(labels) if labels is not None else ())


def load_json(obj) -> DoubleComplex:
    """Load and validate the JSON complex format (a dict, a path or a JSON string)."""
    if isinstance(obj, str):
        obj = json.loads(obj) if obj.lstrip().startswith("{") else json.load(open(obj))
    try:
        verts = obj["vertices"]
        ids = [v["id"] for v in verts]
        index = {vid: i for i, vid in enumerate(ids)}
        if len(index) != len(ids):
            raise DRSError("duplicate vertex ids")
        graph = []
        for v in verts:
            if v["graph"] not in ("G", "G*"):
                raise DRSError(f"graph must be 'G' or 'G*', got {v['graph']!r}")
            graph.append(GAMMA if v["graph"] == "G" else GAMMA_STAR)
        quads = [[index[v] for v in quad] for quad in obj["quads"]]
        if any(len(quad) != 4 for quad in quads):
            raise DRSError("every quad needs exactly 4 vertices")
        per_quad = {}
        rho = {}
        for entry in obj.get("rho", []):
            a, b = (index[v] for v in entry["edge"])
            val = float(entry["value"])
            if val <= 0:
                raise DRSError("rho values must be positive")
            if "quad" in entry:
                qi = int(entry["quad"])
                quad = quads[qi]
                if {a, b} == {quad[0], quad[2]}:
                    per_quad[qi] = val
                elif {a, b} == {quad[1], quad[3]}:
                    per_quad[qi] = 1.0 / val
                else:
                    raise DRSError(f"rho edge {entry['edge']} is not a diagonal of quad {qi}")
            else:
                key = (a, b)
                if key in rho and abs(rho[key] - val) > 1e-12:
                    raise BadDual(f"conflicting rho on edge {entry['edge']}")
                rho[key] = val
    except (KeyError, TypeError, ValueError) as exc:
        raise DRSError(f"malformed complex JSON: {exc!r}") from exc
    if per_quad:
        values = []
        for i, quad in enumerate(quads):
            if i in per_quad:
                values.append(per_quad[i])
                continue
            e = rho.get((quad[0], quad[2]), rho.get((quad[2], quad[0])))
            es = rho.get((quad[1], quad[3]), rho.get((quad[3], quad[1])))
            if e is None and es is None:
                values.append(1.0)
            else:
                values.append(e if e is not None else 1.0 / es)
        rho_arg = values
    else:
        rho_arg = rho if rho else None
    side_keys = obj.get("sides")
    if side_keys is not None:
        side_keys = [[int(s) for s in row] for row in side_keys]
    return build_double(quads, rho_arg, graph=graph, side_keys=side_keys, labels=ids)


# ---------------------------------------------------------------- chains/cochains

@dataclass
class Chain:
    """Integer chain on the double or on the quad-graph."""

    dc: DoubleComplex = field(repr=False)
    grade: int
    carrier: str
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.int64)

    def __add__(self, other):
        return Chain(self.dc, self.grade, self.carrier, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return Chain(self.dc, self.grade, self.carrier, self.coeffs - other.coeffs)

    def __neg__(self):
        return Chain(self.dc, self.grade, self.carrier, -self.coeffs)

    def __rmul__(self, k):
        return Chain(self.dc, self.grade, self.carrier, int(k) * self.coeffs)

    def support(self) -> dict:
        nz = np.flatnonzero(self.coeffs)
        return {int(i): int(self.coeffs[i]) for i in nz}


@dataclass
class Cochain:
    """Complex-valued cochain; 1-cochain values refer to the stored edge orientation."""

    dc: DoubleComplex = field(repr=False)
    grade: int
    carrier: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)

    def __add__(self, other):
        return Cochain(self.dc, self.grade, self.carrier, self.values + other.values)

    def __sub__(self, other):
        return Cochain(self.dc, self.grade, self.carrier, self.values - other.values)

    def __neg__(self):
        return Cochain(self.dc, self.grade, self.carrier, -self.values)

    def __mul__(self, k):
        return Cochain(self.dc, self.grade, self.carrier, k * self.values)

    __rmul__ = __mul__

    def __call__(self, chain: Chain) -> complex:
        if chain.grade != self.grade or chain.carrier != self.carrier:
            raise DRSError("chain and cochain live on different cells")
        return complex(np.dot(chain.coeffs, self.values))


def cell_count(dc: DoubleComplex, grade: int, carrier: str) -> int:
    if carrier == LAMBDA:
        return (dc.n_vertices, 2 * dc.n_quads, dc.n_vertices)[grade]
    return (dc.n_vertices, dc.n_edges, dc.n_quads)[grade]


def _incidence(dc, grade, carrier):
    """Coboundary matrix from grade-1 to grade cells (grade >= 1)."""
    if carrier == LAMBDA:
        return dc.d0_lambda if grade == 1 else dc.d1_lambda
    return dc.d0_diamond if grade == 1 else dc.d1_diamond


def boundary(c: Chain) -> Chain:
    """Boundary operator; faces of the double are the dual cells of vertices."""
    if c.grade == 0:
        raise GradeZero("the boundary of a 0-chain is not defined")
    m = _incidence(c.dc, c.grade, c.carrier)
    out = m.T @ c.coeffs.astype(float)
    return Chain(c.dc, c.grade - 1, c.carrier, np.rint(out).astype(np.int64))


def coboundary(f: Cochain) -> Cochain:
    """Coboundary ``d`` defined by Stokes' formula."""
    if f.grade >= 2:
        raise GradeTwo("there is no coboundary of a 2-form on a surface")
    m = _incidence(f.dc, f.grade + 1, f.carrier)
    return Cochain(f.dc, f.grade + 1, f.carrier, m @ f.values)


def biconstant(dc: DoubleComplex) -> np.ndarray:
    """+1 on Gamma, -1 on Gamma*."""
    return np.where(dc.color == GAMMA, 1.0, -1.0)


def face_chain(dc: DoubleComplex, q: int) -> Chain:
    c = np.zeros(dc.n_quads, dtype=np.int64)
    c[q] = 1
    return Chain(dc, 2, DIAMOND, c)


def edge_path_chain(dc: DoubleComplex, steps, carrier=DIAMOND) -> Chain:
    """1-chain from ``(edge, sign)`` steps."""
    n = dc.n_edges if carrier == DIAMOND else 2 * dc.n_quads
    c = np.zeros(n, dtype=np.int64)
    for e, s in steps:
        c[e] += s
    return Chain(dc, 1, carrier, c)


def connected_sum(a: DoubleComplex, b: DoubleComplex, qa: int = 0, qb: int = 0) -> DoubleComplex:
    """Remove quad ``qa`` of ``a`` and ``qb`` of ``b`` and glue the two boundaries.

    The boundary of ``qa`` is identified with the boundary of ``qb`` by an
    orientation reversing map that preserves the coloring, giving a closed
    surface of genus ``a.genus + b.genus``.
    """
    if not (a.closed and b.closed):
        raise DRSError("connected_sum needs closed complexes")
    A = a.quads[qa]
    B = b.quads[qb]
    if len(set(A.tolist())) != 4 or len(set(B.tolist())) != 4:
        raise DRSError("the removed quads need four distinct corners")
    # x->x2, y->y2', x'->x2', y'->y2
    glue_v = {int(B[0]): int(A[0]), int(B[3]): int(A[1]), int(B[2]): int(A[2]), int(B[1]): int(A[3])}
    vmap = {}
    nxt = a.n_vertices
    for v in range(b.n_vertices):
        if v in glue_v:
            vmap[v] = glue_v[v]
        else:
            vmap[v] = nxt
            nxt += 1
    glue_e = {int(b.sides[qb, 3 - k]): ("a", int(a.sides[qa, k])) for k in range(4)}
    quads, rho, keys = [], [], []
    for i in range(a.n_quads):
        if i == qa:
            continue
        quads.append(a.quads[i].tolist())
        rho.append(a.rho[i])
        keys.append([("a", int(e)) for e in a.sides[i]])
    for i in range(b.n_quads):
        if i == qb:
            continue
        quads.append([vmap[int(v)] for v in b.quads[i]])
        rho.append(b.rho[i])
        keys.append([glue_e.get(int(e), ("b", int(e))) for e in b.sides[i]])
    color = np.empty(nxt, dtype=np.int64)
    color[: a.n_vertices] = a.color
    for v in range(b.n_vertices):
        color[vmap[v]] = b.color[v]
    return build_double(quads, rho, graph=color, side_keys=keys)
