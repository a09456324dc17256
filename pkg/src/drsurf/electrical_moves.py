"""Electrical moves on discrete Riemann surfaces.

Three local rewrites keep the space of holomorphic forms (up to isomorphism)
and the total curvature:

* type I removes a quad two of whose adjacent sides are the same edge (a
  loop quad), or inserts one on an edge;
* type II merges two quads sharing both edges at a vertex of degree two
  (parallel/series rule ``rho = rho1 + rho2``), or splits a quad;
* type III is the star-triangle relation on three quads around a vertex of
  degree three.

Every move returns the new complex and a :class:`MoveRecord` holding the
vertex correspondence, the consumed and produced conformal parameters, the
coefficients used to transport holomorphic functions, the updated angle
ledger and the specification of the inverse move.

Vertices keep their relative order; removed vertices are dropped and created
ones are appended.  Quads that are not touched keep their order and created
quads are appended.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .complex_core import GAMMA, Cochain, DoubleComplex, LAMBDA, build_double
from .errors import BadConfiguration, DRSError, NotALoopQuad, NotHolomorphic

TWO_PI = 2.0 * math.pi
TRANSPORT_TOL = 1e-10


def _atan2x(r: float) -> float:
    return 2.0 * math.atan(r)


@dataclass
class MoveRecord:
    """What a move consumed and produced.

    Attributes
    ----------
    kind : ``"I"``, ``"II"`` or ``"III"``.
    direction : ``remove``/``insert``, ``merge``/``split`` or
        ``star_to_triangle``/``triangle_to_star`` (seen from Gamma).
    site : the site the move was applied to (quad, vertex or edge index).
    quads_before, quads_after : affected quads in the old and new complex.
    vertex_map : old vertex -> new vertex, ``-1`` when removed.
    removed, created : removed old vertices and created new vertices, paired
        by position with the inverse move's ``created`` and ``removed``.
    weights : new vertex -> ``{old vertex: weight}`` used by :func:`transport`.
    rho_in, rho_out : conformal parameters consumed and produced.
    angles : angle ledger of the new complex.
    inverse : move specification that undoes this move on the new complex.
    """

    kind: str
    direction: str
    site: int
    quads_before: tuple
    quads_after: tuple
    vertex_map: np.ndarray
    removed: tuple
    created: tuple
    weights: dict
    rho_in: tuple
    rho_out: tuple
    angles: np.ndarray
    inverse: dict
    before: DoubleComplex = field(repr=False, default=None)
    after: DoubleComplex = field(repr=False, default=None)

    def star_triangle_residual(self) -> float:
        """Residual of ``rho_i rho'_i = sigma = prod rho' / sum rho'`` (type III only)."""
        if self.kind != "III":
            raise DRSError("only type III moves carry the star-triangle relation")
        tri, star = np.array(self.rho_in), np.array(self.rho_out)
        sigma = tri[0] * tri[1] + tri[1] * tri[2] + tri[2] * tri[0]
        # star[j] goes to a_j, opposite to the triangle side tri[(j + 1) % 3]
        r1 = np.abs(np.roll(tri, -1) * star - sigma).max()
        r2 = abs(np.prod(star) / np.sum(star) - sigma)
        return float(max(r1, r2) / sigma)


# ------------------------------------------------------------------ helpers

def total_curvature(angles) -> float:
    """``sum_v (2 pi - angle(v))``."""
    a = np.asarray(angles, dtype=float)
    return float(np.sum(TWO_PI - a))


def _ledger(dc: DoubleComplex, angles):
    return dc.conic_angles() if angles is None else np.array(angles, dtype=float)


def _rotate(corners, keys, shift):
    return corners[shift:] + corners[:shift], keys[shift:] + keys[:shift]


def _quad_rows(dc: DoubleComplex, skip):
    rows = []
    for q in range(dc.n_quads):
        if q in skip:
            continue
        rows.append((q, [int(v) for v in dc.quads[q]], float(dc.rho[q]),
                     [("e", int(e)) for e in dc.sides[q]]))
    return rows


def _assemble(dc, skip, new_quads, removed, new_colors, angles, new_angles, rekey=None):
    """Build the new complex.

    ``new_quads`` are ``(corners, rho of the 0-2 diagonal, keys)`` with corners
    given as old vertex ids or ``("new", j)``; the first corner must be on
    Gamma.  ``rekey`` maps old edge keys to replacement keys.
    """
    V = dc.n_vertices
    removed = set(removed)
    keep = [v for v in range(V) if v not in removed]
    vmap = -np.ones(V, dtype=np.int64)
    vmap[keep] = np.arange(len(keep))
    base = len(keep)

    def res(v):
        return base + v[1] if isinstance(v, tuple) else int(vmap[v])

    rekey = rekey or {}
    quads, rho, keys, qmap = [], [], [], {}
    for q, corners, r, ks in _quad_rows(dc, skip):
        qmap[q] = len(quads)
        quads.append([res(v) for v in corners])
        rho.append(r)
        keys.append([rekey.get(k, k) for k in ks])
    first_new = len(quads)
    for corners, r, ks in new_quads:
        quads.append([res(v) for v in corners])
        rho.append(r)
        keys.append([rekey.get(k, k) for k in ks])
    color = np.concatenate([dc.color[keep].astype(np.int64), np.asarray(new_colors, dtype=np.int64)])
    if (color[np.array([q[0] for q in quads])] != GAMMA).any():
        raise DRSError("internal error: new quads must start on Gamma")
    new = build_double(quads, rho, graph=color, side_keys=keys)
    led = np.concatenate([angles[keep], np.asarray(new_angles, dtype=float)])
    created = tuple(range(base, base + len(new_colors)))
    return new, vmap, qmap, tuple(range(first_new, len(quads))), created, led


def _incidences(dc: DoubleComplex, e: int):
    return [(q, k) for q in range(dc.n_quads) for k in range(4) if dc.sides[q, k] == e]


def _record(dc, new, kind, direction, site, before, after, vmap, removed, created, weights,
            rho_in, rho_out, led, inverse):
    return MoveRecord(kind=kind, direction=direction, site=int(site), quads_before=tuple(before),
                      quads_after=tuple(after), vertex_map=vmap, removed=tuple(removed),
                      created=tuple(created), weights=weights, rho_in=tuple(rho_in),
                      rho_out=tuple(rho_out), angles=led, inverse=inverse, before=dc, after=new)


# -------------------------------------------------------------------- type I

def loop_summit(dc: DoubleComplex, q: int):
    """Corner position of the summit of a loop quad, or ``None``.

    The summit is the corner whose two sides are the same edge.
    """
    for j in range(4):
        if dc.sides[q, (j - 1) % 4] == dc.sides[q, j]:
            return j
    return None


def move_I(dc: DoubleComplex, site: int, *, direction: str = "remove", at: int | None = None,
           rho: float = 1.0, angles=None):
    """Type I move.

    ``direction="remove"``: ``site`` is a loop quad ``(v0, s, v0, o)`` whose
    sides at the summit ``s`` are identified.  The quad and the summit go
    away and the two remaining sides are glued into one edge.  The ledger
    loses ``4 arctan(rho)`` at ``v0`` and ``2 arctan(1/rho)`` at ``o``,
    ``rho`` being the parameter of the loop diagonal.

    ``direction="insert"``: ``site`` is an edge, ``at`` the end that becomes
    the loop vertex (default: its Gamma end) and ``rho`` the parameter of the
    new loop diagonal.
    """
    led = _ledger(dc, angles)
    if direction == "remove":
        return _move_I_remove(dc, int(site), led)
    if direction == "insert":
        return _move_I_insert(dc, int(site), at, float(rho), led)
    raise BadConfiguration(f"unknown type I direction {direction!r}")


def _move_I_remove(dc, q, led):
    if not (0 <= q < dc.n_quads):
        raise BadConfiguration(f"quad {q} does not exist")
    j = loop_summit(dc, q)
    if j is None:
        raise NotALoopQuad(f"quad {q} has no pair of identified adjacent sides")
    c = [int(v) for v in dc.quads[q]]
    s, v0, o = c[j], c[(j + 1) % 4], c[(j + 2) % 4]
    e_a, e_b = int(dc.sides[q, (j + 1) % 4]), int(dc.sides[q, (j + 2) % 4])
    if e_a == e_b:
        raise BadConfiguration(f"quad {q} is a whole sphere; nothing to glue")
    rho_l = float(dc.rho[q]) if j % 2 == 1 else 1.0 / float(dc.rho[q])
    if not any(q2 != q for q2 in np.flatnonzero((dc.quads == o).any(axis=1))):
        raise BadConfiguration(f"vertex {o} would be left without quads")
    led = led.copy()
    led[v0] -= 4.0 * math.atan(rho_l)
    led[o] -= _atan2x(1.0 / rho_l)
    new, vmap, qmap, _, _, led2 = _assemble(dc, {q}, [], [s], [], led, [],
                                            rekey={("e", e_b): ("e", e_a)})
    # locate the glued edge through a neighbour that used e_a
    glued = None
    for q2, k2 in _incidences(dc, e_a) + _incidences(dc, e_b):
        if q2 != q:
            glued = int(new.sides[qmap[q2], k2])
            break
    inverse = {"kind": "I", "direction": "insert", "site": glued, "at": int(vmap[v0]), "rho": rho_l}
    return new, _record(dc, new, "I", "remove", q, [q], [], vmap, [s], [], {}, [rho_l], [], led2, inverse)


def _move_I_insert(dc, e, at, rho_l, led):
    if not (0 <= e < dc.n_edges):
        raise BadConfiguration(f"edge {e} does not exist")
    if rho_l <= 0:
        raise BadConfiguration("rho must be positive")
    g, h = (int(v) for v in dc.edges[e])
    v0 = g if at is None else int(at)
    if v0 not in (g, h):
        raise BadConfiguration(f"vertex {v0} is not an end of edge {e}")
    o = h if v0 == g else g
    inc = _incidences(dc, e)
    # the neighbour running v0 -> o keeps the edge and faces the loop side o -> v0
    split_key = ("split", e)
    loop_key = ("loop", e)
    rekey_quads = {}
    for q2, k2 in inc:
        if int(dc.quads[q2, k2]) == o:
            rekey_quads[(q2, k2)] = split_key
    corners = [v0, ("new", 0), v0, o]
    keys = [loop_key, loop_key, split_key, ("e", e)]
    r02 = rho_l
    if dc.color[v0] != GAMMA:
        # the Gamma diagonal is then s-o, with parameter 1/rho
        corners, keys = _rotate(corners, keys, 1)
        r02 = 1.0 / rho_l
    led = led.copy()
    led[v0] += 4.0 * math.atan(rho_l)
    led[o] += _atan2x(1.0 / rho_l)
    new, vmap, qmap, after, created, led2 = _assemble_with_side_rekey(
        dc, [(corners, r02, keys)], [int(1 - dc.color[v0])], led, [_atan2x(1.0 / rho_l)], rekey_quads)
    weights = {created[0]: {o: 1.0}}
    inverse = {"kind": "I", "direction": "remove", "site": after[0]}
    return new, _record(dc, new, "I", "insert", e, [], after, vmap, [], created, weights, [], [rho_l],
                        led2, inverse)


def _assemble_with_side_rekey(dc, new_quads, new_colors, led, new_angles, side_rekey):
    """Like :func:`_assemble` but re-keys individual ``(quad, side)`` slots."""
    V = dc.n_vertices
    base = V
    quads, rho, keys, qmap = [], [], [], {}
    for q, corners, r, ks in _quad_rows(dc, set()):
        qmap[q] = len(quads)
        quads.append(corners)
        rho.append(r)
        keys.append([side_rekey.get((q, k), ks[k]) for k in range(4)])
    first_new = len(quads)
    for corners, r, ks in new_quads:
        quads.append([base + v[1] if isinstance(v, tuple) else v for v in corners])
        rho.append(r)
        keys.append(list(ks))
    color = np.concatenate([dc.color.astype(np.int64), np.asarray(new_colors, dtype=np.int64)])
    new = build_double(quads, rho, graph=color, side_keys=keys)
    vmap = np.arange(V, dtype=np.int64)
    created = tuple(range(base, base + len(new_colors)))
    led2 = np.concatenate([led, np.asarray(new_angles, dtype=float)])
    return new, vmap, qmap, tuple(range(first_new, len(quads))), created, led2


# ------------------------------------------------------------------- type II

def series_site(dc: DoubleComplex, m: int):
    """Corners ``((q1, k1), (q2, k2))`` of a degree-two vertex in two distinct quads, else ``None``."""
    if not dc.interior[m]:
        return None
    ring = dc.stars[m]
    if len(ring) != 2 or ring[0][0] == ring[1][0]:
        return None
    return ring[0], ring[1]


def move_II(dc: DoubleComplex, site: int, *, direction: str = "merge", t: float = 0.5,
            axis: int = 0, angles=None):
    """Type II move.

    ``direction="merge"``: ``site`` is a vertex ``m`` of degree two.  The quads
    ``(x, y, x', m)`` and ``(x, m, x', y')`` become ``(x, y, x', y')`` with
    ``rho(x, x') = rho1 + rho2``; the dual diagonal gets the series value.

    ``direction="split"``: ``site`` is a quad ``(c0, c1, c2, c3)``.  With
    ``axis=0`` the diagonal ``c0 c2`` is split in parallel as
    ``t rho`` and ``(1 - t) rho`` and a new vertex is placed between ``c1``
    and ``c3``; ``axis=1`` does the same to the other diagonal.
    """
    led = _ledger(dc, angles)
    if direction == "merge":
        return _move_II_merge(dc, int(site), led)
    if direction == "split":
        return _move_II_split(dc, int(site), float(t), int(axis), led)
    raise BadConfiguration(f"unknown type II direction {direction!r}")


def _diag_rho(dc, q, through_gamma: bool) -> float:
    return float(dc.rho[q]) if through_gamma else 1.0 / float(dc.rho[q])


def _move_II_merge(dc, m, led):
    if not (0 <= m < dc.n_vertices):
        raise BadConfiguration(f"vertex {m} does not exist")
    site = series_site(dc, m)
    if site is None:
        raise BadConfiguration(f"vertex {m} is not a degree-two vertex between two quads")
    (q1, k1), (q2, k2) = site
    c1 = [int(v) for v in dc.quads[q1]]
    c2 = [int(v) for v in dc.quads[q2]]
    x, y, x2 = c1[(k1 + 1) % 4], c1[(k1 + 2) % 4], c1[(k1 + 3) % 4]
    y2 = c2[(k2 + 2) % 4]
    if c2[(k2 - 1) % 4] != x or c2[(k2 + 1) % 4] != x2:
        # ring order gave the quads the other way round
        (q1, k1), (q2, k2) = (q2, k2), (q1, k1)
        c1, c2 = c2, c1
        x, y, x2 = c1[(k1 + 1) % 4], c1[(k1 + 2) % 4], c1[(k1 + 3) % 4]
        y2 = c2[(k2 + 2) % 4]
    x_gamma = dc.color[x] == GAMMA
    r1, r2 = _diag_rho(dc, q1, x_gamma), _diag_rho(dc, q2, x_gamma)
    S = r1 + r2
    corners = [x, y, x2, y2]
    keys = [("e", int(dc.sides[q1, (k1 + 1) % 4])), ("e", int(dc.sides[q1, (k1 + 2) % 4])),
            ("e", int(dc.sides[q2, (k2 + 1) % 4])), ("e", int(dc.sides[q2, (k2 + 2) % 4]))]
    r02 = S
    t_inv = r1 / S
    if not x_gamma:
        corners, keys = _rotate(corners, keys, 1)
        r02 = 1.0 / S
        # after rotation the split's c1 is x' and its first quad holds y'
        t_inv = r2 / S
    led = led.copy()
    dw = _atan2x(S) - _atan2x(r1) - _atan2x(r2)
    led[x] += dw
    led[x2] += dw
    led[y] += _atan2x(1.0 / S) - _atan2x(1.0 / r1)
    led[y2] += _atan2x(1.0 / S) - _atan2x(1.0 / r2)
    new, vmap, _, after, _, led2 = _assemble(dc, {q1, q2}, [(corners, r02, keys)], [m], [], led, [])
    inverse = {"kind": "II", "direction": "split", "site": after[0], "t": t_inv, "axis": 0 if x_gamma else 1}
    return new, _record(dc, new, "II", "merge", m, [q1, q2], after, vmap, [m], [], {}, [r1, r2], [S],
                        led2, inverse)


def _move_II_split(dc, q, t, axis, led):
    if not (0 <= q < dc.n_quads):
        raise BadConfiguration(f"quad {q} does not exist")
    if not (0.0 < t < 1.0):
        raise BadConfiguration("split fraction t must lie in (0, 1)")
    if axis not in (0, 1):
        raise BadConfiguration("axis must be 0 or 1")
    c = [int(v) for v in dc.quads[q]]
    ks = [("e", int(e)) for e in dc.sides[q]]
    c, ks = _rotate(c, ks, axis)
    x, y, x2, y2 = c
    S = _diag_rho(dc, q, axis == 0)
    r1, r2 = t * S, (1.0 - t) * S
    n0, n1 = ("mid", q, 0), ("mid", q, 1)
    mnew = ("new", 0)
    halves = []
    for corners, keys, r in (([x, y, x2, mnew], [ks[0], ks[1], n1, n0], r1),
                             ([x, mnew, x2, y2], [n0, n1, ks[2], ks[3]], r2)):
        if axis == 1:  # x is on Gamma*; start the quad at a Gamma corner
            corners, keys = _rotate(corners, keys, 1)
            r = 1.0 / r
        halves.append((corners, r, keys))
    led = led.copy()
    dw = _atan2x(S) - _atan2x(r1) - _atan2x(r2)
    led[x] -= dw
    led[x2] -= dw
    led[y] -= _atan2x(1.0 / S) - _atan2x(1.0 / r1)
    led[y2] -= _atan2x(1.0 / S) - _atan2x(1.0 / r2)
    m_angle = _atan2x(1.0 / r1) + _atan2x(1.0 / r2)
    new, vmap, _, after, created, led2 = _assemble(dc, {q}, halves, [], [int(dc.color[y])], led, [m_angle])
    w = {y: r2 / S}
    w[y2] = w.get(y2, 0.0) + r1 / S  # y and y' coincide on loop quads
    weights = {created[0]: w}
    inverse = {"kind": "II", "direction": "merge", "site": created[0]}
    return new, _record(dc, new, "II", "split", q, [q], after, vmap, [], created, weights, [S], [r1, r2],
                        led2, inverse)


# ------------------------------------------------------------------ type III

def star_site(dc: DoubleComplex, c: int):
    """Corners of a degree-three interior vertex lying in three distinct quads, else ``None``."""
    if not dc.interior[c]:
        return None
    ring = dc.stars[c]
    if len(ring) != 3 or len({q for q, _ in ring}) != 3:
        return None
    return ring


def star_triangle(tri) -> tuple:
    """Star parameters from triangle parameters.

    ``tri[i]`` is the parameter of the triangle side ``a_i a_(i+1)``; the
    returned ``star[j]`` belongs to the branch towards ``a_j`` and satisfies
    ``star[j] * tri[j+1] = sigma``.
    """
    t = [float(v) for v in tri]
    sigma = t[0] * t[1] + t[1] * t[2] + t[2] * t[0]
    return tuple(sigma / t[(j + 1) % 3] for j in range(3))


def move_III(dc: DoubleComplex, site: int, *, direction: str | None = None, angles=None):
    """Star-triangle move around a degree-three vertex ``c``.

    The quads ``(c, a_i, w_i, a_(i+1))`` are replaced by
    ``(c', w_i, a_(i+1), w_(i+1))``: the star at ``c`` becomes the triangle
    ``w_1 w_2 w_3`` and the triangle ``a_1 a_2 a_3`` gains the center ``c'``.
    ``direction`` names the change seen from Gamma and is checked against the
    color of ``c`` when given.
    """
    led = _ledger(dc, angles)
    c = int(site)
    if not (0 <= c < dc.n_vertices):
        raise BadConfiguration(f"vertex {c} does not exist")
    expected = "star_to_triangle" if dc.color[c] == GAMMA else "triangle_to_star"
    if direction is not None and direction != expected:
        raise BadConfiguration(f"vertex {c} calls for {expected}, not {direction}")
    ring = star_site(dc, c)
    if ring is None:
        raise BadConfiguration(f"vertex {c} is not the center of three quads")
    O = []
    for q, k in ring:
        corners = [int(dc.quads[q, (k + i) % 4]) for i in range(4)]
        keys = [("e", int(dc.sides[q, (k + i) % 4])) for i in range(4)]
        tri = _diag_rho(dc, q, k % 2 == 1)  # diagonal a_i a_(i+1) goes through corners k+1, k+3
        O.append((q, corners, keys, tri))
    for i in range(3):
        if O[i][1][3] != O[(i + 1) % 3][1][1]:
            raise BadConfiguration(f"quads around vertex {c} are not in hexagon order")
    tri = [o[3] for o in O]
    star = star_triangle(tri)
    a = [o[1][1] for o in O]
    w = [o[1][2] for o in O]
    cnew = ("new", 0)
    new_quads = []
    for i in range(3):
        j = (i + 1) % 3
        corners = [cnew, w[i], a[j], w[j]]
        keys = [("star", c, i), O[i][2][2], O[j][2][1], ("star", c, j)]
        r02 = star[j]
        if dc.color[a[0]] != GAMMA:
            corners, keys = _rotate(corners, keys, 1)
            r02 = 1.0 / star[j]
        new_quads.append((corners, r02, keys))
    led = led.copy()
    for i in range(3):
        j = (i + 1) % 3
        led[a[i]] -= _atan2x(tri[i])
        led[a[j]] -= _atan2x(tri[i])
        led[w[i]] -= _atan2x(1.0 / tri[i])
        led[w[i]] += _atan2x(1.0 / star[j])
        led[a[j]] += _atan2x(star[j])
        led[w[j]] += _atan2x(1.0 / star[j])
    c_angle = sum(_atan2x(s) for s in star)
    new, vmap, _, after, created, led2 = _assemble(dc, {o[0] for o in O}, new_quads, [c],
                                                   [int(dc.color[a[0]])], led, [c_angle])
    total = sum(star)
    weights = {created[0]: {}}
    for j in range(3):
        weights[created[0]][a[j]] = weights[created[0]].get(a[j], 0.0) + star[j] / total
    inv_dir = "star_to_triangle" if expected == "triangle_to_star" else "triangle_to_star"
    inverse = {"kind": "III", "direction": inv_dir, "site": created[0]}
    return new, _record(dc, new, "III", expected, c, [o[0] for o in O], after, vmap, [c], created,
                        weights, tri, star, led2, inverse)


# -------------------------------------------------------------- dispatching

def apply_move(dc: DoubleComplex, spec: dict, angles=None):
    """Apply a move given as ``{"kind", "site", "direction", ...}``."""
    try:
        kind = str(spec["kind"])
        site = int(spec["site"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BadConfiguration(f"malformed move {spec!r}") from exc
    extra = {k: v for k, v in spec.items() if k not in ("kind", "site")}
    if kind == "I":
        return move_I(dc, site, angles=angles, **extra)
    if kind == "II":
        return move_II(dc, site, angles=angles, **extra)
    if kind == "III":
        return move_III(dc, site, angles=angles, **extra)
    raise BadConfiguration(f"unknown move kind {kind!r}")


def invert(rec: MoveRecord):
    """Apply the inverse of ``rec`` to ``rec.after``."""
    return apply_move(rec.after, rec.inverse, angles=rec.angles)


def compose_vertex_maps(rec: MoveRecord, back: MoveRecord) -> np.ndarray:
    """Vertex map from ``rec.before`` to ``back.after`` for a move followed by its inverse."""
    out = np.empty(len(rec.vertex_map), dtype=np.int64)
    for v, w in enumerate(rec.vertex_map):
        if w >= 0:
            out[v] = back.vertex_map[w]
        else:
            out[v] = back.created[rec.removed.index(v)]
    return out


def equivalent(a: DoubleComplex, b: DoubleComplex, vmap, tol: float = 1e-12) -> bool:
    """Whether ``vmap`` carries ``a`` onto ``b`` with the same parameters and gluing."""
    vmap = np.asarray(vmap)
    if a.n_vertices != b.n_vertices or a.n_quads != b.n_quads or a.n_edges != b.n_edges:
        return False
    if not np.array_equal(a.color, b.color[vmap]):
        return False

    def signature(dc, mapping):
        quads = {}
        for q in range(dc.n_quads):
            c = [int(mapping[v]) for v in dc.quads[q]]
            alt = c[2:] + c[:2]
            shift = 0 if tuple(c) <= tuple(alt) else 2
            quads[q] = (tuple(c[shift:] + c[:shift]), shift)
        sides = []
        for e in range(dc.n_edges):
            uses = []
            for q in range(dc.n_quads):
                for k in range(4):
                    if dc.sides[q, k] == e:
                        key, shift = quads[q]
                        uses.append((key, (k - shift) % 4))
            sides.append(tuple(sorted(uses)))
        qs = sorted((quads[q][0], float(dc.rho[q])) for q in range(dc.n_quads))
        return qs, sorted(sides)

    qa, sa = signature(a, vmap)
    qb, sb = signature(b, np.arange(b.n_vertices))
    if sa != sb or [k for k, _ in qa] != [k for k, _ in qb]:
        return False
    return all(abs(ra - rb) <= tol * max(1.0, abs(rb)) for (_, ra), (_, rb) in zip(qa, qb))


# ---------------------------------------------------------------- transport

def transport(f: Cochain, rec: MoveRecord, tol: float = TRANSPORT_TOL) -> Cochain:
    """Carry a holomorphic function across a move.

    Surviving vertices keep their values; a new vertex receives the weighted
    average recorded by the move (the opposite vertex for type I, the
    ``rho2/(rho1+rho2), rho1/(rho1+rho2)`` average for type II and the star
    weighted average for type III).
    """
    if f.grade != 0 or f.carrier != LAMBDA:
        raise DRSError("transport expects a function on the double")
    dc = rec.before
    vals = np.asarray(f.values)
    scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
    for q in rec.quads_before:
        x, y, x2, y2 = dc.quads[q]
        r = abs(vals[y2] - vals[y] - 1j * dc.rho[q] * (vals[x2] - vals[x]))
        if r > tol * scale:
            raise NotHolomorphic(f"function violates Cauchy-Riemann on quad {q} by {r:.3e}")
    new = rec.after
    out = np.zeros(new.n_vertices, dtype=np.result_type(vals.dtype, np.complex128))
    keep = rec.vertex_map >= 0
    out[rec.vertex_map[keep]] = vals[keep]
    for v, w in rec.weights.items():
        out[v] = sum(wt * vals[u] for u, wt in w.items())
    return Cochain(new, 0, LAMBDA, out)


def dirichlet_energy(f: Cochain) -> float:
    """``(df, df)`` on the double (rim edges included on discs)."""
    d = f.dc.d0_lambda @ f.values
    return float(np.sum(f.dc.rho_lambda * np.abs(d) ** 2))


# ------------------------------------------------------------- invariants

def holomorphic_dimension(dc: DoubleComplex, rtol: float = 1e-8) -> int:
    """Dimension of the space of holomorphic 1-forms on the double.

    Numerical nullity of the stacked closedness and type (1,0) constraints,
    with singular values below ``rtol`` times the largest counted as zero.
    """
    import scipy.sparse as sp
    n = 2 * dc.n_quads
    m = sp.vstack([dc.d1_lambda.astype(np.complex128),
                   dc.star1.astype(np.complex128) + 1j * sp.identity(n, format="csr")]).toarray()
    s = np.linalg.svd(m, compute_uv=False)
    rank = int(np.sum(s > rtol * s.max())) if len(s) else 0
    return n - rank


def type_I_sites(dc: DoubleComplex) -> list:
    return [q for q in range(dc.n_quads) if loop_summit(dc, q) is not None
            and dc.sides[q, (loop_summit(dc, q) + 1) % 4] != dc.sides[q, (loop_summit(dc, q) + 2) % 4]]


def type_II_sites(dc: DoubleComplex) -> list:
    return [v for v in range(dc.n_vertices) if series_site(dc, v) is not None]


def type_III_sites(dc: DoubleComplex) -> list:
    return [v for v in range(dc.n_vertices) if star_site(dc, v) is not None]


def is_tensed(dc: DoubleComplex) -> bool:
    """True when no type I or type II reduction applies."""
    return not type_I_sites(dc) and not type_II_sites(dc)


def tense(dc: DoubleComplex, angles=None):
    """Apply type I removals and type II merges until none is left."""
    led = _ledger(dc, angles)
    records = []
    while True:
        sites = type_I_sites(dc)
        if sites:
            dc, rec = move_I(dc, sites[0], angles=led)
        else:
            sites = type_II_sites(dc)
            if not sites:
                return dc, led, records
            dc, rec = move_II(dc, sites[0], angles=led)
        led = rec.angles
        records.append(rec)


def random_script(dc: DoubleComplex, n_moves: int, seed: int = 0, angles=None):
    """Apply ``n_moves`` random moves; returns the final complex and the records.

    Each step picks uniformly among the move types that have a site and then
    uniformly among the sites.  Splits and insertions use ``t`` in
    ``[0.2, 0.8]`` and log-uniform ``rho``.
    """
    rng = np.random.default_rng(seed)
    led = _ledger(dc, angles)
    records = []
    for _ in range(n_moves):
        options = []
        s1, s2, s3 = type_I_sites(dc), type_II_sites(dc), type_III_sites(dc)
        if s1:
            options.append(("I", "remove", s1))
        if s2:
            options.append(("II", "merge", s2))
        if s3:
            options.append(("III", None, s3))
        options.append(("II", "split", list(range(dc.n_quads))))
        options.append(("I", "insert", list(range(dc.n_edges))))
        kind, direction, sites = options[int(rng.integers(len(options)))]
        site = int(sites[int(rng.integers(len(sites)))])
        spec = {"kind": kind, "site": site}
        if direction is not None:
            spec["direction"] = direction
        if direction == "split":
            spec["t"] = float(rng.uniform(0.2, 0.8))
            spec["axis"] = int(rng.integers(2))
        if direction == "insert":
            spec["rho"] = float(np.exp(rng.uniform(-0.7, 0.7)))
            ends = dc.edges[site]
            spec["at"] = int(ends[int(rng.integers(2))])
        dc, rec = apply_move(dc, spec, angles=led)
        led = rec.angles
        records.append((spec, rec))
    return dc, led, records
