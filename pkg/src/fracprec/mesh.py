"""Structured triangulations of the unit square and their refinement hierarchy.

A level with ``n`` cells per side splits each grid cell along one diagonal,
giving ``2*n**2`` triangles, ``3*n**2 + 2*n`` edges and ``(n+1)**2``
vertices.  The diagonal's direction alternates with the parity of the cell:
cells with even ``i + j`` use the lower-left to upper-right diagonal, odd
cells the lower-right to upper-left one.  The alternation matters twice
over: the pattern reproduces itself under midpoint refinement (so coarse
edges are unions of fine edges and the spaces nest exactly), and every
corner of the square meets a diagonal, so no vertex star degenerates to a
single triangle.  With one diagonal direction throughout, two corners would
have one-triangle stars, and the patch smoothers below would lose a
noticeable constant in the mass-matrix limit.

Vertices are numbered row-major (x fastest), triangles cell-major (bottom
triangle first), and edges in three structured blocks: horizontal, vertical,
diagonal.  Every edge is stored from its lower-numbered to its
higher-numbered vertex; its unit normal is the tangent rotated by -90
degrees.  That global orientation is what the per-triangle signs below
encode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MeshLevel",
    "MeshHierarchy",
    "VertexPatch",
    "build_level",
    "build_hierarchy",
    "vertex_patches",
]


@dataclass(frozen=True)
class MeshLevel:
    """One structured triangulation of the unit square.

    Attributes
    ----------
    n : cells per side; ``h = 1/n``.
    vertices : (nv, 2) float array of coordinates.
    triangles : (nt, 3) int array, counterclockwise.
    edges : (ne, 2) int array, lower vertex id first.
    triangle_edges : (nt, 3) int array; entry ``a`` is the edge opposite
        local vertex ``a``.
    triangle_edge_signs : (nt, 3) int array in {-1, +1}; +1 where the global
        edge normal coincides with the triangle's outward normal.
    edge_triangles : (ne, 2) int array of incident triangles, -1 padded.
    """

    n: int
    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    triangle_edges: np.ndarray
    triangle_edge_signs: np.ndarray
    edge_triangles: np.ndarray
    edge_index: dict = field(repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def dims(self) -> dict:
        """Dimensions of the piecewise-constant (S), edge-flux (V) and
        vertex (C) degree-of-freedom spaces."""
        return {"S": self.num_triangles, "V": self.num_edges, "C": self.num_vertices}

    def areas(self) -> np.ndarray:
        """Signed triangle areas (all equal to ``1/(2 n^2)`` and positive)."""
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def boundary_edge_mask(self) -> np.ndarray:
        return self.edge_triangles[:, 1] < 0

    def dump(self) -> str:
        """Plain-text listing of vertices, triangles and edges (debugging)."""
        out = [f"# level n={self.n}"]
        out.append(f"# vertices {self.num_vertices}")
        for i, (x, y) in enumerate(self.vertices):
            out.append(f"v {i} {x:.6f} {y:.6f}")
        out.append(f"# triangles {self.num_triangles}")
        for i, t in enumerate(self.triangles):
            out.append(f"t {i} {t[0]} {t[1]} {t[2]}")
        out.append(f"# edges {self.num_edges}")
        for i, (a, b) in enumerate(self.edges):
            out.append(f"e {i} {a} {b}")
        return "\n".join(out) + "\n"


@dataclass(frozen=True)
class MeshHierarchy:
    """Nested levels produced by uniform refinement.

    ``edge_children[k][e]`` holds the two fine edges covering coarse edge
    ``e`` of level ``k`` (half at the lower endpoint first);
    ``triangle_children[k][t]`` the four fine triangles covering coarse
    triangle ``t``.
    """

    levels: list
    edge_children: list
    triangle_children: list

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def finest(self) -> MeshLevel:
        return self.levels[-1]


@dataclass(frozen=True)
class VertexPatch:
    """Star of one vertex: its incident triangles and incident edges."""

    vertex: int
    triangle_ids: np.ndarray
    edge_ids: np.ndarray


def build_level(n: int) -> MeshLevel:
    """Triangulate the unit square with ``n`` cells per side."""
    if n < 1:
        raise ValueError(f"cells per side must be >= 1, got {n}")
    m = n + 1

    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="xy")
    vertices = np.column_stack([ii.ravel() / n, jj.ravel() / n]).astype(float)

    def vid(i, j):
        return j * m + i

    ci, cj = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ci = ci.ravel()
    cj = cj.ravel()
    even = (ci + cj) % 2 == 0
    a = vid(ci, cj)
    b = vid(ci + 1, cj)
    c = vid(ci + 1, cj + 1)
    d = vid(ci, cj + 1)
    # Even cells carry the a-c diagonal, odd cells the b-d one.  The bottom
    # triangle (the one containing the cell's bottom edge) comes first.
    bottom = np.column_stack([a, b, np.where(even, c, d)])
    top = np.column_stack([np.where(even, a, b), c, d])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = bottom
    triangles[1::2] = top

    # Structured edge blocks: horizontal, vertical, diagonal; each block scans
    # rows bottom-up.  All three run lower vertex id -> higher vertex id
    # (for the odd-cell diagonal that is b -> d since b < d row-major).
    hi, hj = np.meshgrid(np.arange(n), np.arange(m), indexing="xy")
    horiz = np.column_stack([vid(hi.ravel(), hj.ravel()), vid(hi.ravel() + 1, hj.ravel())])
    vi, vj = np.meshgrid(np.arange(m), np.arange(n), indexing="xy")
    vert = np.column_stack([vid(vi.ravel(), vj.ravel()), vid(vi.ravel(), vj.ravel() + 1)])
    diag = np.column_stack([np.where(even, a, b), np.where(even, c, d)])
    edges = np.vstack([horiz, vert, diag]).astype(np.int64)

    edge_index = {(int(a), int(b)): k for k, (a, b) in enumerate(edges)}

    triangle_edges = np.empty((triangles.shape[0], 3), dtype=np.int64)
    triangle_edge_signs = np.empty((triangles.shape[0], 3), dtype=np.int64)
    edge_triangles = np.full((edges.shape[0], 2), -1, dtype=np.int64)
    for t, tri in enumerate(triangles):
        for a in range(3):
            # Edge opposite local vertex a, directed as part of the ccw
            # boundary walk; the walk direction matching the stored
            # low->high direction means the outward normal is the global one.
            u, w = int(tri[(a + 1) % 3]), int(tri[(a + 2) % 3])
            key = (u, w) if u < w else (w, u)
            e = edge_index[key]
            triangle_edges[t, a] = e
            triangle_edge_signs[t, a] = 1 if u < w else -1
            if edge_triangles[e, 0] < 0:
                edge_triangles[e, 0] = t
            else:
                edge_triangles[e, 1] = t

    return MeshLevel(
        n=n,
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        triangle_edges=triangle_edges,
        triangle_edge_signs=triangle_edge_signs,
        edge_triangles=edge_triangles,
        edge_index=edge_index,
    )


def _edge_children(coarse: MeshLevel, fine: MeshLevel) -> np.ndarray:
    """Fine halves of each coarse edge, lower-endpoint half first."""
    n_c = coarse.n
    mf = fine.n + 1
    # Coarse vertex (i, j) sits at fine vertex (2i, 2j).
    ic = coarse.edges % (n_c + 1)
    jc = coarse.edges // (n_c + 1)
    fa = (2 * jc[:, 0]) * mf + 2 * ic[:, 0]
    fb = (2 * jc[:, 1]) * mf + 2 * ic[:, 1]
    fm = (jc[:, 0] + jc[:, 1]) * mf + (ic[:, 0] + ic[:, 1])
    out = np.empty((coarse.num_edges, 2), dtype=np.int64)
    for e in range(coarse.num_edges):
        out[e, 0] = fine.edge_index[(min(fa[e], fm[e]), max(fa[e], fm[e]))]
        out[e, 1] = fine.edge_index[(min(fm[e], fb[e]), max(fm[e], fb[e]))]
    return out


def triangle_parents(coarse: MeshLevel, fine: MeshLevel) -> np.ndarray:
    """Coarse parent of each fine triangle (integer centroid test, exact)."""
    n_c = coarse.n
    mf = fine.n + 1
    tri = fine.triangles
    # Centroid in units of 1/(3 n_f): integer, never on a coarse cell border
    # and never on the coarse diagonal (one cell spans 6 units).
    cx = (tri % mf).sum(axis=1)
    cy = (tri // mf).sum(axis=1)
    ci = cx // 6
    cj = cy // 6
    lx = cx - 6 * ci
    ly = cy - 6 * cj
    even = (ci + cj) % 2 == 0
    bottom = np.where(even, ly < lx, lx + ly < 6)
    return 2 * (cj * n_c + ci) + np.where(bottom, 0, 1)


def _triangle_children(coarse: MeshLevel, fine: MeshLevel) -> np.ndarray:
    parents = triangle_parents(coarse, fine)
    order = np.argsort(parents, kind="stable")
    return order.reshape(coarse.num_triangles, 4)


def build_hierarchy(n0: int, num_levels: int) -> MeshHierarchy:
    """Uniformly refined hierarchy with ``n0 * 2**k`` cells per side on level k."""
    if n0 < 1:
        raise ValueError(f"coarsest cells per side must be >= 1, got {n0}")
    if num_levels < 1:
        raise ValueError(f"need at least one level, got {num_levels}")
    levels = [build_level(n0 * 2**k) for k in range(num_levels)]
    edge_children = []
    triangle_children = []
    for k in range(num_levels - 1):
        edge_children.append(_edge_children(levels[k], levels[k + 1]))
        triangle_children.append(_triangle_children(levels[k], levels[k + 1]))
    return MeshHierarchy(levels=levels, edge_children=edge_children, triangle_children=triangle_children)


def vertex_patches(level: MeshLevel) -> list:
    """Vertex stars, one per mesh vertex in ascending vertex order.

    A patch collects the triangles containing the vertex and the edges having
    it as an endpoint.  With the alternating diagonals an interior vertex has
    8 of each when the diagonals of all four surrounding cells meet there and
    4 otherwise; corners and boundary vertices have fewer.  Every edge of the
    mesh belongs to exactly two patches — one per endpoint.
    """
    nv = level.num_vertices
    tri_of = [[] for _ in range(nv)]
    for t, tri in enumerate(level.triangles):
        for v in tri:
            tri_of[v].append(t)
    edge_of = [[] for _ in range(nv)]
    for e, (a, b) in enumerate(level.edges):
        edge_of[a].append(e)
        edge_of[b].append(e)
    return [
        VertexPatch(
            vertex=v,
            triangle_ids=np.asarray(sorted(tri_of[v]), dtype=np.int64),
            edge_ids=np.asarray(sorted(edge_of[v]), dtype=np.int64),
        )
        for v in range(nv)
    ]
