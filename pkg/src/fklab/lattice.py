"""Square-lattice box geometry: primal, dual and medial lattices.

The box with half-width ``N`` has vertex set {-N..N}^2.  All geometry is
done in *doubled* integer coordinates so that primal vertices, dual
vertices and edge midpoints are all exact integer points:

    primal vertex (i, j)        -> (2i, 2j)        (even, even)
    dual vertex   (i+1/2,j+1/2) -> (2i+1, 2j+1)    (odd, odd)
    edge midpoint (medial vtx)  -> mixed parity    (odd, even) / (even, odd)

The lattice spacing ``delta`` is metadata: it scales coordinates only when
quantities are reported in physical units.  Faces of the medial lattice
are the diamonds of area delta^2/2 centered on primal and dual vertices.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = ["EdgeId", "BoundarySpec", "MedialGraph", "Domain", "dual_edge"]

_MEDIAL_DIRS = ((1, 1), (-1, 1), (-1, -1), (1, -1))


class EdgeId(NamedTuple):
    """A lattice edge, primal or dual, with sorted endpoints."""

    a: tuple
    b: tuple
    orientation: str  # "horizontal" | "vertical"


def _canon(t):
    return tuple(int(x) if float(x).is_integer() else float(x) for x in t)


def _make_edge(p, q):
    a, b = sorted((_canon(p), _canon(q)))
    orientation = "horizontal" if a[1] == b[1] else "vertical"
    return EdgeId(a, b, orientation)


def dual_edge(e: EdgeId) -> EdgeId:
    """The unique edge of the dual lattice crossing ``e`` in its middle.

    Maps primal (integer) edges to dual (half-integer) edges and back;
    applying it twice returns the argument.
    """
    mx = (e.a[0] + e.b[0]) / 2.0
    my = (e.a[1] + e.b[1]) / 2.0
    if e.orientation == "horizontal":
        return _make_edge((mx, my - 0.5), (mx, my + 0.5))
    return _make_edge((mx - 0.5, my), (mx + 0.5, my))


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary condition: free, wired, or a partition of boundary vertices.

    ``groups`` is only meaningful for kind="partition" and lists disjoint
    groups of boundary vertices (as (i, j) tuples) that are wired together.
    Free is the empty partition, wired the full one.
    """

    kind: str = "free"  # "free" | "wired" | "partition"
    groups: tuple = ()

    def __post_init__(self):
        if self.kind not in ("free", "wired", "partition"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "partition":
            seen = set()
            for g in self.groups:
                for v in g:
                    if tuple(v) in seen:
                        raise ValueError("partition groups must be disjoint")
                    seen.add(tuple(v))


FREE = BoundarySpec("free")
WIRED = BoundarySpec("wired")


@dataclass
class MedialGraph:
    """Medial lattice of the box, in doubled coordinates.

    vertices     : (E, 2) int array, one per primal edge (its midpoint)
    edges        : (M, 2) int array of vertex indices (the diagonal
                   quarter-turn segments between midpoints of box edges)
    primal_faces : (V, 2) doubled coords of primal-vertex faces
    dual_faces   : (D, 2) doubled coords of interior dual-vertex faces
    """

    vertices: np.ndarray
    edges: np.ndarray
    primal_faces: np.ndarray
    dual_faces: np.ndarray

    def degree(self):
        deg = np.zeros(len(self.vertices), dtype=np.int64)
        np.add.at(deg, self.edges.ravel(), 1)
        return deg


class Domain:
    """The box Lambda_N on the (rescaled) square lattice.

    Immutable after construction and shared freely between worker chains.
    Vertices and edges carry a fixed canonical index used by the sampler
    and the estimators; edge k of every Domain with the same N is the same
    geometric edge.
    """

    def __init__(self, N: int, delta=1.0):
        if not isinstance(N, (int, np.integer)) or N < 1:
            raise ValueError(f"half-width N must be a positive integer, got {N!r}")
        if delta <= 0:
            raise ValueError(f"scale delta must be positive, got {delta!r}")
        self.N = int(N)
        self.delta = float(delta)
        self.side = 2 * self.N + 1

        n, side = self.N, self.side
        # vertex index: (i + N) * side + (j + N)
        ii, jj = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
        self._vi = ii.ravel().astype(np.int32)
        self._vj = jj.ravel().astype(np.int32)

        # horizontal edges (i,j)-(i+1,j) then vertical edges (i,j)-(i,j+1),
        # each block in row-major order of the lower/left endpoint
        hi, hj = np.meshgrid(np.arange(-n, n), np.arange(-n, n + 1), indexing="ij")
        vi, vj = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n), indexing="ij")
        hu = (hi.ravel() + n) * side + (hj.ravel() + n)
        hv = (hi.ravel() + 1 + n) * side + (hj.ravel() + n)
        vu = (vi.ravel() + n) * side + (vj.ravel() + n)
        vv = (vi.ravel() + n) * side + (vj.ravel() + 1 + n)
        self.edge_endpoints = np.stack(
            [np.concatenate([hu, vu]), np.concatenate([hv, vv])], axis=1
        ).astype(np.int32)
        self.n_horizontal = hu.size
        self.n_vertices = side * side
        self.n_edges = self.edge_endpoints.shape[0]

        # doubled coordinates of edge midpoints (medial vertices)
        hmx, hmy = 2 * hi.ravel() + 1, 2 * hj.ravel()
        vmx, vmy = 2 * vi.ravel(), 2 * vj.ravel() + 1
        self.edge_mid_doubled = np.stack(
            [np.concatenate([hmx, vmx]), np.concatenate([hmy, vmy])], axis=1
        ).astype(np.int32)

        self._medial = None

    # -- vertices ----------------------------------------------------------

    def vertex_index(self, v):
        i, j = v
        if abs(i) > self.N or abs(j) > self.N:
            raise KeyError(f"vertex {v} outside the box")
        return (int(i) + self.N) * self.side + (int(j) + self.N)

    def vertex_coords(self, k):
        return (int(self._vi[k]), int(self._vj[k]))

    def boundary_vertex_mask(self):
        """Vertices incident to fewer than four edges of the box."""
        return (np.abs(self._vi) == self.N) | (np.abs(self._vj) == self.N)

    def boundary_vertices(self):
        mask = self.boundary_vertex_mask()
        return [
            (int(i), int(j)) for i, j in zip(self._vi[mask], self._vj[mask])
        ]

    # -- edges -------------------------------------------------------------

    def edge(self, k) -> EdgeId:
        u, v = self.edge_endpoints[k]
        return _make_edge(self.vertex_coords(u), self.vertex_coords(v))

    def edges(self):
        return [self.edge(k) for k in range(self.n_edges)]

    def edge_index(self, e: EdgeId):
        (x1, y1), (x2, y2) = sorted((e.a, e.b))
        n, side = self.N, self.side
        if e.orientation == "horizontal":
            if not (-n <= x1 < n and -n <= y1 <= n):
                raise KeyError(f"edge {e} outside the box")
            return (int(x1) + n) * (2 * n + 1) + (int(y1) + n)
        if not (-n <= x1 <= n and -n <= y1 < n):
            raise KeyError(f"edge {e} outside the box")
        return self.n_horizontal + (int(x1) + n) * (2 * n) + (int(y1) + n)

    def edge_index_of(self, a, b):
        return self.edge_index(_make_edge(a, b))

    def edge_in_domain(self, e: EdgeId) -> bool:
        try:
            self.edge_index(e)
        except KeyError:
            return False
        return True

    # -- physical coordinates and balls -------------------------------------

    def physical(self, doubled):
        """Map doubled lattice coordinates to physical units."""
        return np.asarray(doubled, dtype=float) * (self.delta / 2.0)

    def vertices_in_ball(self, x, eps):
        """Indices of vertices at Euclidean distance <= eps (physical) of x."""
        n = self.N
        r = eps / self.delta
        cx, cy = x[0] / self.delta, x[1] / self.delta
        out = []
        i0 = max(int(np.floor(cx - r)), -n)
        i1 = min(int(np.ceil(cx + r)), n)
        for i in range(i0, i1 + 1):
            dy = r * r - (i - cx) ** 2
            if dy < 0:
                continue
            dy = np.sqrt(dy)
            j0 = max(int(np.ceil(cy - dy)), -n)
            j1 = min(int(np.floor(cy + dy)), n)
            for j in range(j0, j1 + 1):
                out.append((i + n) * self.side + (j + n))
        return np.asarray(out, dtype=np.int64)

    def dual_faces_in_ball(self, x, eps):
        """Interior dual faces (doubled coords) with center within eps of x.

        Enumerates only the bounding box of the ball, so the cost does not
        depend on the box size."""
        s = 2.0 / self.delta
        cx, cy = x[0] * s, x[1] * s
        r = eps * s
        n2 = 2 * self.N - 1
        out = []
        x0 = max(int(np.floor(cx - r)) | 1, -n2)
        x1 = min(int(np.ceil(cx + r)), n2)
        for fx in range(x0, x1 + 1, 2):
            dy = r * r - (fx - cx) ** 2
            if dy < 0:
                continue
            dy = np.sqrt(dy)
            y0 = max(int(np.ceil(cy - dy)), -n2)
            y1 = min(int(np.floor(cy + dy)), n2)
            y0 += (y0 + 1) % 2  # odd coordinates only
            for fy in range(y0, y1 + 1, 2):
                out.append((fx, fy))
        return np.asarray(out, dtype=np.int64).reshape(-1, 2)

    def assert_in_safe_interior(self, x, eps, clearance=1.0):
        """Reject supports that touch the boundary of the physical box.

        ``clearance`` is measured in lattice units beyond the ball radius.
        """
        bound = (self.N - clearance) * self.delta - eps
        if max(abs(x[0]), abs(x[1])) > bound:
            raise ValueError(
                f"ball B({x}, {eps}) leaves the safe interior of Lambda_{self.N}"
            )

    # -- medial lattice ------------------------------------------------------

    def medial(self) -> MedialGraph:
        """Build (once) and return the medial graph of the box.

        Cost and memory are linear in the edge count; intended for desk
        scales.  The large-box estimators trace loops without ever
        materializing this graph.
        """
        if self._medial is not None:
            return self._medial
        mids = self.edge_mid_doubled
        index = {(int(x), int(y)): k for k, (x, y) in enumerate(mids)}
        pairs = []
        for k, (x, y) in enumerate(mids):
            for dx, dy in ((1, 1), (-1, 1)):
                other = index.get((int(x) + dx, int(y) + dy))
                if other is not None:
                    pairs.append((k, other))
        n = self.N
        pf = np.stack([2 * self._vi, 2 * self._vj], axis=1)
        di, dj = np.meshgrid(np.arange(-n, n), np.arange(-n, n), indexing="ij")
        df = np.stack([2 * di.ravel() + 1, 2 * dj.ravel() + 1], axis=1)
        self._medial = MedialGraph(
            vertices=mids,
            edges=np.asarray(pairs, dtype=np.int64).reshape(-1, 2),
            primal_faces=pf.astype(np.int64),
            dual_faces=df.astype(np.int64),
        )
        return self._medial

    # -- dual bookkeeping ----------------------------------------------------

    def edge_dual_faces(self):
        """For each edge, the doubled coords of the two faces its dual edge
        joins; the outer face is marked with coordinates (2N+1, 2N+1).
        Cached after the first call."""
        if getattr(self, "_edge_dual_faces", None) is not None:
            return self._edge_dual_faces
        out = np.empty((self.n_edges, 2, 2), dtype=np.int64)
        mids = self.edge_mid_doubled
        horiz = np.arange(self.n_edges) < self.n_horizontal
        # horizontal primal edge: dual runs vertically through the midpoint
        out[horiz, 0] = mids[horiz] + np.array([0, -1])
        out[horiz, 1] = mids[horiz] + np.array([0, 1])
        out[~horiz, 0] = mids[~horiz] + np.array([-1, 0])
        out[~horiz, 1] = mids[~horiz] + np.array([1, 0])
        lim = 2 * self.N - 1
        outer = np.abs(out).max(axis=2) > lim
        out[outer] = 2 * self.N + 1
        self._edge_dual_faces = out
        return out

    def __repr__(self):
        return f"Domain(N={self.N}, delta={self.delta})"
