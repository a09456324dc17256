"""Trees, cycle bases, left companions, intersection numbers and canonical dissections."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .complex_core import DIAMOND, LAMBDA, Chain, DoubleComplex
from .errors import DRSError, DegeneratePairing, Disconnected


@dataclass
class CanonicalDissection:
    """Symplectic homology basis.

    ``aleph`` holds ``a_1..a_g, b_1..b_g`` on the quad-graph with
    ``a_k . b_l = delta_kl``.  ``aleph_lambda`` holds the 4g companions on the
    double ordered ``[Gamma(a), Gamma*(a), Gamma*(b), Gamma(b)]``.
    """

    dc: DoubleComplex
    aleph: list
    aleph_lambda: list
    intersection: np.ndarray

    @property
    def genus(self) -> int:
        return len(self.aleph) // 2

    def lambda_intersection(self) -> np.ndarray:
        return intersection_matrix(self.aleph_lambda)


def spanning_tree(dc: DoubleComplex, root: int = 0) -> np.ndarray:
    """Breadth-first spanning tree of the quad-graph, as a boolean mask over ◊-edges."""
    V = dc.n_vertices
    adj = [[] for _ in range(V)]
    for e, (a, b) in enumerate(dc.edges.tolist()):
        adj[a].append((b, e))
        adj[b].append((a, e))
    seen = np.zeros(V, dtype=bool)
    seen[root] = True
    tree = np.zeros(dc.n_edges, dtype=bool)
    dq = deque([root])
    while dq:
        u = dq.popleft()
        for w, e in adj[u]:
            if not seen[w]:
                seen[w] = True
                tree[e] = True
                dq.append(w)
    if not seen.all():
        raise Disconnected(f"{int((~seen).sum())} vertices are not reachable from vertex {root}")
    return tree


def _tree_parents(dc, tree, root=0):
    parent = -np.ones(dc.n_vertices, dtype=np.int64)
    pedge = -np.ones(dc.n_vertices, dtype=np.int64)
    depth = np.zeros(dc.n_vertices, dtype=np.int64)
    adj = [[] for _ in range(dc.n_vertices)]
    for e in np.flatnonzero(tree):
        a, b = dc.edges[e]
        adj[a].append((b, e))
        adj[b].append((a, e))
    parent[root] = root
    dq = deque([root])
    while dq:
        u = dq.popleft()
        for w, e in adj[u]:
            if parent[w] < 0:
                parent[w], pedge[w], depth[w] = u, e, depth[u] + 1
                dq.append(w)
    return parent, pedge, depth


def cotree(dc: DoubleComplex, tree: np.ndarray) -> np.ndarray:
    """Spanning tree of the dual graph (quads) crossing only non-tree edges."""
    F = dc.n_quads
    inc = [[] for _ in range(dc.n_edges)]
    for q in range(F):
        for e in dc.sides[q]:
            inc[int(e)].append(q)
    seen = np.zeros(F, dtype=bool)
    seen[0] = True
    co = np.zeros(dc.n_edges, dtype=bool)
    dq = deque([0])
    while dq:
        q = dq.popleft()
        for e in dc.sides[q]:
            e = int(e)
            if tree[e] or co[e] or len(inc[e]) != 2:
                continue
            other = inc[e][0] if inc[e][1] == q else inc[e][1]
            if not seen[other]:
                seen[other] = True
                co[e] = True
                dq.append(other)
    return co


def cycle_basis(dc: DoubleComplex, tree: np.ndarray | None = None) -> list:
    """2g cycles on the quad-graph from a tree-cotree decomposition.

    Each edge outside both trees closes a unique loop in the tree; that loop
    is what remains of ``T + e`` once its pending branches are pruned.
    """
    if not dc.closed:
        raise DRSError("a cycle basis is only computed on closed surfaces")
    if tree is None:
        tree = spanning_tree(dc)
    co = cotree(dc, tree)
    parent, pedge, depth = _tree_parents(dc, tree)
    out = []
    for e in np.flatnonzero(~tree & ~co):
        a, b = (int(v) for v in dc.edges[e])
        c = np.zeros(dc.n_edges, dtype=np.int64)
        c[e] += 1  # a -> b, then back from b to a through the tree
        u, w = b, a
        while u != w:
            if depth[u] >= depth[w]:
                pe = pedge[u]
                c[pe] += 1 if dc.edges[pe][0] == u else -1
                u = parent[u]
            else:
                pe = pedge[w]
                c[pe] += -1 if dc.edges[pe][0] == w else 1
                w = parent[w]
        out.append(Chain(dc, 1, DIAMOND, c))
    if len(out) != 2 * dc.genus:
        raise DRSError(f"found {len(out)} loops, expected {2 * dc.genus}")
    return out


def _vertex_pairings(dc, c):
    """Pair incoming and outgoing edge uses of a ◊ 1-cycle at every vertex."""
    ins = {}
    outs = {}
    for e, k in c.support().items():
        a, b = (int(v) for v in dc.edges[e])
        if k < 0:
            a, b = b, a
        for _ in range(abs(k)):
            outs.setdefault(a, []).append(e)
            ins.setdefault(b, []).append(e)
    pairs = []
    for v, lst in ins.items():
        olst = outs.get(v, [])
        if len(olst) != len(lst):
            raise DRSError(f"chain is not a cycle at vertex {v}")
        pairs += [(v, ei, eo) for ei, eo in zip(lst, olst)]
    return pairs


def left_companions(c: Chain) -> tuple:
    """Cycles on Gamma and on Gamma* running just to the left of a ◊-cycle.

    At every vertex ``v`` the path enters along ``e_in`` and leaves along
    ``e_out``; the corners swept counterclockwise from ``e_out`` to ``e_in``
    contribute their diagonal on the other graph, traversed clockwise.
    """
    dc = c.dc
    if c.carrier != DIAMOND or c.grade != 1:
        raise DRSError("left companions are defined for 1-cycles on the quad-graph")
    F = dc.n_quads
    first = {}
    for q in range(F):
        for k in range(4):
            first[(int(dc.quads[q, k]), int(dc.sides[q, k]))] = (q, k)
    cg = np.zeros(2 * F, dtype=np.int64)
    cs = np.zeros(2 * F, dtype=np.int64)
    for v, e_in, e_out in _vertex_pairings(dc, c):
        corner = first.get((v, e_out))
        for _ in range(len(first) + 1):
            if corner is None:
                raise DRSError(f"vertex {v} has an open star; companions need interior vertices")
            q, k = corner
            if k == 1:
                cg[q] += 1
            elif k == 3:
                cg[q] -= 1
            elif k == 0:
                cs[F + q] -= 1
            else:
                cs[F + q] += 1
            second = int(dc.sides[q, (k - 1) % 4])
            if second == e_in:
                break
            corner = first.get((v, second))
        else:  # pragma: no cover - guarded by the star structure
            raise DRSError("corner walk did not terminate")
    return Chain(dc, 1, LAMBDA, cg), Chain(dc, 1, LAMBDA, cs)


def lambda_pairing(a: np.ndarray, b: np.ndarray, F: int) -> int:
    return int(np.dot(a[:F], b[F:]) - np.dot(a[F:], b[:F]))


def intersection_number(A: Chain, B: Chain) -> int:
    """Algebraic intersection number of two 1-cycles.

    On the double a quad counts when one cycle uses its Gamma diagonal and
    the other its Gamma* diagonal.  On the quad-graph the cycles are first
    replaced by their left companions.
    """
    if A.carrier != B.carrier:
        raise DRSError("both cycles must live on the same complex")
    F = A.dc.n_quads
    if A.carrier == LAMBDA:
        return lambda_pairing(A.coeffs, B.coeffs, F)
    ag, as_ = left_companions(A)
    bg, bs = left_companions(B)
    two = lambda_pairing(ag.coeffs, bs.coeffs, F) + lambda_pairing(as_.coeffs, bg.coeffs, F)
    if two % 2:
        raise DRSError("companion intersection numbers disagree")
    return two // 2


def intersection_matrix(cycles) -> np.ndarray:
    n = len(cycles)
    if n == 0:
        return np.zeros((0, 0), dtype=np.int64)
    if cycles[0].carrier == LAMBDA:
        F = cycles[0].dc.n_quads
        C = np.array([c.coeffs for c in cycles])
        return (C[:, :F] @ C[:, F:].T - C[:, F:] @ C[:, :F].T).astype(np.int64)
    comps = [left_companions(c) for c in cycles]
    F = cycles[0].dc.n_quads
    G = np.array([g.coeffs for g, _ in comps])
    S = np.array([s.coeffs for _, s in comps])
    two = (G[:, :F] @ S[:, F:].T - G[:, F:] @ S[:, :F].T) + (S[:, :F] @ G[:, F:].T - S[:, F:] @ G[:, :F].T)
    return (two // 2).astype(np.int64)


def symplectic_reduce(M: np.ndarray):
    """Integer change of basis bringing an antisymmetric form to ``[[0, I], [-I, 0]]``.

    Parameters
    ----------
    M : (n, n) antisymmetric integer matrix of pairings between generators.

    Returns
    -------
    (g, 2g, n) -> an integer matrix ``P`` of shape ``(2g, n)``; row ``k`` gives
    the new cycle ``k`` as a combination of the generators.
    """
    M = np.asarray(M, dtype=np.int64)
    n = len(M)
    vecs = [np.eye(n, dtype=np.int64)[i] for i in range(n)]

    def pair(u, v):
        return int(u @ M @ v)

    a_list, b_list = [], []
    while True:
        vecs = [v for v in vecs if any(pair(v, w) for w in vecs)]
        if not vecs:
            break
        # smallest nonzero pairing, then Euclid until it is +-1
        for _ in range(10000):
            best = None
            for i in range(len(vecs)):
                for j in range(len(vecs)):
                    p = pair(vecs[i], vecs[j])
                    if p and (best is None or abs(p) < abs(best[2])):
                        best = (i, j, p)
            i, j, p = best
            if abs(p) == 1:
                break
            reduced = False
            for k in range(len(vecs)):
                if k in (i, j):
                    continue
                rj = pair(vecs[k], vecs[j])
                if rj % p:
                    vecs[k] = vecs[k] - (rj // p) * vecs[i]
                    reduced = True
                    break
                ri = pair(vecs[i], vecs[k])
                if ri % p:
                    vecs[k] = vecs[k] - (ri // p) * vecs[j]
                    reduced = True
                    break
            if not reduced:
                # try mixing two other generators before giving up
                for k in range(len(vecs)):
                    for l in range(len(vecs)):
                        if len({i, j, k, l}) == 4 and pair(vecs[k], vecs[l]) % p:
                            vecs[i] = vecs[i] + vecs[k]
                            reduced = True
                            break
                    if reduced:
                        break
            if not reduced:
                raise DegeneratePairing(f"pairing has no unimodular pair (smallest value {p})")
        a, b = vecs[i], vecs[j]
        if p == -1:
            b = -b
        a_list.append(a)
        b_list.append(b)
        rest = [vecs[k] for k in range(len(vecs)) if k not in (i, j)]
        vecs = [r - pair(r, b) * a + pair(r, a) * b for r in rest]
    P = np.array(a_list + b_list, dtype=np.int64).reshape(-1, n)
    return P


def canonical_dissection(basis, dc: DoubleComplex | None = None) -> CanonicalDissection:
    """Canonical dissection from cycles that generate the first homology.

    The output satisfies ``a_k . a_l = b_k . b_l = 0`` and ``a_k . b_l = delta_kl``
    and every output cycle is an integer combination of the input cycles.
    """
    basis = list(basis)
    if dc is None:
        if not basis:
            raise DRSError("pass the complex when the basis is empty")
        dc = basis[0].dc
    if not basis:
        if dc.genus not in (0, None):
            raise DegeneratePairing("empty basis on a surface of positive genus")
        return CanonicalDissection(dc, [], [], np.zeros((0, 0), dtype=np.int64))
    M = intersection_matrix(basis)
    if not M.any():
        raise DegeneratePairing("all intersection numbers vanish")
    P = symplectic_reduce(M)
    g = len(P) // 2
    if dc.genus is not None and g != dc.genus:
        raise DegeneratePairing(f"reduced to {g} pairs on a surface of genus {dc.genus}")
    C = np.array([c.coeffs for c in basis])
    aleph = [Chain(dc, 1, DIAMOND, row @ C) for row in P]
    inter = P @ M @ P.T
    comps = [left_companions(c) for c in aleph]
    gam = [cg for cg, _ in comps]
    sta = [cs for _, cs in comps]
    aleph_lambda = gam[:g] + sta[:g] + sta[g:] + gam[g:]
    return CanonicalDissection(dc, aleph, aleph_lambda, inter.astype(np.int64))


def canonical_dissection_of(dc: DoubleComplex) -> CanonicalDissection:
    """Tree-cotree cycles reduced to a canonical dissection."""
    return canonical_dissection(cycle_basis(dc), dc)


def cycle_vertices(c: Chain) -> list:
    """Vertex sequence of a simple ◊ or Λ cycle (for serialization)."""
    dc = c.dc
    ends = dc.edges if c.carrier == DIAMOND else dc.lambda_edges
    nxt = {}
    for e, k in c.support().items():
        a, b = (int(v) for v in ends[e])
        if k < 0:
            a, b = b, a
        for _ in range(abs(k)):
            nxt.setdefault(a, []).append(b)
    if not nxt:
        return []
    start = min(nxt)
    seq = [start]
    cur = start
    total = sum(len(v) for v in nxt.values())
    for _ in range(total):
        cur = nxt[cur].pop()
        seq.append(cur)
        if cur == start and not nxt.get(cur):
            break
    return seq
