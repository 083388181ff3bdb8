"""Loop representation of a percolation configuration on the medial lattice.

A configuration on the box is embedded in the plane with every outside
edge closed (so the dual is wired through the exterior sea).  Interfaces
are traced on the medial lattice of the enlarged box: at a medial vertex
sitting on edge e the two arc pairings join medial edges on the same side
of e when e is open and on the same side of the dual edge when e is
closed.  The loop set of the domain consists of the traced cycles that use
at least one *core* medial edge, i.e. one joining midpoints of two box
edges.  Under this convention the loop count equals

    k(omega) + k(omega*) - 1

where k(omega) counts clusters of the box configuration (free count) and
k(omega*) counts dual clusters containing at least one interior face, the
exterior sea being one dual vertex.  The constant was frozen after
validating it against exhaustive enumeration (see the loop tests).

Coordinates are doubled integers throughout; see ``lattice``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import geom
from .lattice import Domain
from .sampler import FkConfig, Graph, cluster_labels

__all__ = [
    "Loop",
    "LoopSet",
    "extract_loops",
    "all_interface_cycles",
    "trace_loops_near",
    "surround_count",
    "loop_tail_event",
    "ball_faces",
    "classify_loop",
    "seed_edges_in_box",
    "BallSystem",
    "euler_counts",
]


# ---------------------------------------------------------------------------
# medial walk machinery


class _MedialWalker:
    """On-the-fly arc pairing for the embedded configuration.

    Holds the 2D views of the edge bits and answers two questions: is a
    doubled point a medial vertex of the embedding, and which direction
    does the interface leave a medial vertex given how it came in.

    ``exterior`` is the state of every edge outside the box: 0 embeds a
    free-boundary sample (the dual is wired through the exterior sea), 1
    embeds a wired-boundary sample (the primal boundary joins the sea).
    """

    def __init__(self, domain: Domain, bits, exterior=0):
        N = domain.N
        self.N = N
        self.M = N + 1  # embedding half-width
        self.exterior = int(exterior)
        n_h = domain.n_horizontal
        self.h = np.asarray(bits[:n_h]).reshape(2 * N, 2 * N + 1)
        self.v = np.asarray(bits[n_h:]).reshape(2 * N + 1, 2 * N)

    def is_medial(self, x, y):
        m2 = 2 * self.M
        if (x + y) & 1 == 0:
            return False
        if x & 1:  # horizontal edge midpoint
            return abs(x) <= m2 - 1 and abs(y) <= m2
        return abs(x) <= m2 and abs(y) <= m2 - 1

    def state(self, x, y):
        # open/closed state of the box edge under the medial vertex; the
        # embedding edges outside the box all carry the exterior state
        N = self.N
        if x & 1:
            i, j = (x - 1) >> 1, y >> 1
            if -N <= i < N and -N <= j <= N:
                return int(self.h[i + N, j + N])
            return self.exterior
        i, j = x >> 1, (y - 1) >> 1
        if -N <= i <= N and -N <= j < N:
            return int(self.v[i + N, j + N])
        return self.exterior

    def step(self, x, y, ux, uy):
        """Arriving at medial vertex (x, y) along incoming slot (ux, uy)
        (the previous vertex was (x - ux, y - uy)), return the outgoing
        slot.  Falls back to the reflected pairing when the nominal
        partner leaves the embedding (only happens on its outer ring)."""
        horizontal = bool(x & 1)
        s = self.state(x, y)
        if horizontal == (s == 1):
            out = (ux, -uy)  # bounce: the strand stays on its side of e
        else:
            out = (-ux, uy)  # bounce off the dual edge instead
        if self.is_medial(x + out[0], y + out[1]):
            return out
        # forced pairing at the embedding's outer ring: flip the other axis
        alt = (-ux, uy) if out == (ux, -uy) else (ux, -uy)
        if self.is_medial(x + alt[0], y + alt[1]):
            return alt
        raise AssertionError(f"dangling medial vertex at {(x, y)}")

    def trace(self, start, u0):
        """Walk the interface cycle through the directed medial edge
        (start -> start+u0); returns the cyclic vertex list.

        The successor map on directed medial edges is a bijection, so the
        walk returns to the starting directed edge after finitely many
        steps and the vertex list closes into a loop."""
        verts = []
        x, y = start
        ux, uy = u0
        while True:
            verts.append((x, y))
            x, y = x + ux, y + uy
            ux, uy = self.step(x, y, ux, uy)
            if (x, y) == start and (ux, uy) == u0:
                return verts


def _is_core_vertex(x, y, N):
    # midpoint of a box edge
    n2 = 2 * N
    if x & 1:
        return abs(x) <= n2 - 1 and abs(y) <= n2
    return abs(x) <= n2 and abs(y) <= n2 - 1


def _edge_key(a, b):
    return (a, b) if a <= b else (b, a)


# ---------------------------------------------------------------------------
# loops


@dataclass
class Loop:
    """One interface loop: a closed non-crossing cycle of medial edges."""

    verts: np.ndarray  # (L, 2) doubled coordinates, cyclic order
    domain: Domain
    _diameter: float = field(default=None, repr=False)
    _touched: set = field(default=None, repr=False)
    _interior: list = field(default=None, repr=False)

    def __len__(self):
        return len(self.verts)

    @property
    def physical_verts(self):
        return self.verts * (self.domain.delta / 2.0)

    def diameter(self):
        """Euclidean extent of the medial-vertex point set, physical units."""
        if self._diameter is None:
            self._diameter = geom.hull_diameter(self.physical_verts.tolist())
        return self._diameter

    def touched_faces(self):
        """Doubled coords of every face bordered by a segment of the loop."""
        if self._touched is None:
            v = self.verts
            w = np.roll(v, -1, axis=0)
            faces = set()
            for (ax, ay), (bx, by) in zip(v.tolist(), w.tolist()):
                faces.add((ax, by))
                faces.add((bx, ay))
            self._touched = faces
        return self._touched

    def winding(self, px, py):
        """Winding number around the doubled point (px, py), by signed
        crossings of the rightward horizontal ray.  The quarter offset
        avoids ray-through-vertex degeneracies for lattice-aligned
        queries without moving the query off its face."""
        v = self.verts
        ax, ay = v[:, 0], v[:, 1]
        bx = np.roll(ax, -1)
        by = np.roll(ay, -1)
        # nudge only lattice-aligned queries off the vertex grid
        yq = py + 0.25 if 2.0 * py == round(2.0 * py) else py
        sy = by - ay  # +-1 for the diagonal medial segments
        t = (yq - ay) / sy
        hits = (t > 0.0) & (t < 1.0)
        x_cross = ax + t * (bx - ax)
        cross = hits & (x_cross > px)
        return int(np.sum(np.sign(sy)[cross]))

    def contains_face(self, face):
        return self.winding(face[0], face[1]) != 0

    def contains_point_physical(self, x, y):
        s = 2.0 / self.domain.delta
        return self.winding(x * s, y * s) != 0

    def parity_contains(self, px, py):
        # even-odd ray casting along +y; independent oracle for winding()
        v = self.verts
        ax, ay = v[:, 0], v[:, 1]
        bx = np.roll(ax, -1)
        by = np.roll(ay, -1)
        xq = px + 0.25 if 2.0 * px == round(2.0 * px) else px
        sx = bx - ax
        t = (xq - ax) / sx
        hits = (t > 0.0) & (t < 1.0)
        y_cross = ay + t * (by - ay)
        return int(np.sum(hits & (y_cross > py))) % 2 == 1

    def interior_faces(self):
        """Doubled coords of every face inside the loop (both sublattices).

        Scanline sweep over the loop's bounding box; cost is linear in the
        enclosed area, so this is a desk-scale tool.  Cached.
        """
        if self._interior is not None:
            return self._interior
        import bisect

        v = self.verts
        w = np.roll(v, -1, axis=0)
        rows = {}
        for (ax, ay), (bx, by) in zip(v.tolist(), w.tolist()):
            yrow = min(ay, by)
            rows.setdefault(yrow, []).append(((ax + bx), by - ay))
        faces = []
        for cy, crossings in rows.items():
            crossings.sort()
            xs = [c[0] for c in crossings]  # doubled 2x positions, odd
            suffix = np.cumsum([c[1] for c in crossings][::-1])[::-1]
            # faces on row cy have cx = cy (mod 2); winding at a face is
            # the signed number of crossings strictly to its right
            cx = (min(xs) + 1) // 2
            if (cx + cy) % 2:
                cx += 1
            hi = max(xs) // 2
            while cx <= hi:
                pos = bisect.bisect_right(xs, 2 * cx)
                if pos < len(xs) and suffix[pos] != 0:
                    faces.append((cx, cy))
                cx += 2
        self._interior = faces
        return faces

    def area(self):
        """Enclosed area |int(loop)| in physical units."""
        return abs(geom.polygon_signed_area(self.physical_verts))

    def ball_overlap_area(self, center, radius):
        """Exact area of B(center, radius) intersected with int(loop)."""
        return geom.circle_polygon_area(center, radius, self.physical_verts)

    def has_core_edge(self):
        N = self.domain.N
        v = self.verts.tolist()
        prev = v[-1]
        for cur in v:
            if _is_core_vertex(*prev, N) and _is_core_vertex(*cur, N):
                return True
            prev = cur
        return False


@dataclass
class LoopSet:
    """All loops of the domain: the cycles owning at least one core medial
    edge.  ``edge_owner`` maps each core medial edge key to its loop."""

    loops: list
    domain: Domain
    edge_owner: dict

    def __len__(self):
        return len(self.loops)

    def __iter__(self):
        return iter(self.loops)


def _loop_from_verts(verts, domain):
    return Loop(verts=np.asarray(verts, dtype=np.int64), domain=domain)


def _trace_all(walker: _MedialWalker):
    """Every interface cycle of the embedding, as vertex lists."""
    M2 = 2 * walker.M
    visited = set()
    for x in range(-M2, M2 + 1):
        ystart = -M2 + ((x + M2 + 1) & 1)
        for y in range(ystart, M2 + 1, 2):
            if not walker.is_medial(x, y):
                continue
            for u in ((1, 1), (-1, 1)):
                nx, ny = x + u[0], y + u[1]
                if not walker.is_medial(nx, ny):
                    continue
                key = _edge_key((x, y), (nx, ny))
                if key in visited:
                    continue
                verts = walker.trace((x, y), u)
                prev = verts[-1]
                for cur in verts:
                    visited.add(_edge_key(prev, cur))
                    prev = cur
                yield verts


def _exterior_of(cfg: FkConfig, exterior=None):
    if exterior is not None:
        return int(exterior)
    return 1 if cfg.bc is not None and cfg.bc.kind == "wired" else 0


def all_interface_cycles(cfg: FkConfig, exterior=None):
    """All cycles of the embedded configuration, unfiltered (diagnostics)."""
    walker = _MedialWalker(cfg.domain, cfg.bits, _exterior_of(cfg, exterior))
    return list(_trace_all(walker))


def extract_loops(cfg: FkConfig, exterior=None) -> LoopSet:
    """Trace every interface cycle of the embedded configuration and keep
    those using a core medial edge.  Desk-scale: cost is linear in the
    embedding's medial edge count.

    The exterior state follows the sample's boundary condition (free ->
    closed exterior, wired -> open exterior) unless overridden."""
    domain = cfg.domain
    if domain is None:
        raise ValueError("extract_loops needs a Domain-backed configuration")
    walker = _MedialWalker(domain, cfg.bits, _exterior_of(cfg, exterior))
    loops = []
    edge_owner = {}
    N = domain.N
    for verts in _trace_all(walker):
        core_edges = []
        prev = verts[-1]
        for cur in verts:
            if _is_core_vertex(*prev, N) and _is_core_vertex(*cur, N):
                core_edges.append(_edge_key(prev, cur))
            prev = cur
        if core_edges:
            loop = _loop_from_verts(verts, domain)
            idx = len(loops)
            loops.append(loop)
            for ek in core_edges:
                edge_owner[ek] = idx
    return LoopSet(loops=loops, domain=domain, edge_owner=edge_owner)


def trace_loops_near(cfg: FkConfig, seed_edges, exterior=None) -> list:
    """Trace only the loops through the given medial edges.

    ``seed_edges`` is an iterable of ((x, y), (ux, uy)) directed medial
    half-edges in doubled coordinates.  Used by the large-box estimators,
    which know which loops can matter (those meeting the support of a test
    function or crossing a ray from a ball to the boundary)."""
    domain = cfg.domain
    walker = _MedialWalker(domain, cfg.bits, _exterior_of(cfg, exterior))
    visited = set()
    out = []
    for (x, y), u in seed_edges:
        if not (walker.is_medial(x, y) and walker.is_medial(x + u[0], y + u[1])):
            continue
        key = _edge_key((x, y), (x + u[0], y + u[1]))
        if key in visited:
            continue
        verts = walker.trace((x, y), u)
        prev = verts[-1]
        for cur in verts:
            visited.add(_edge_key(prev, cur))
            prev = cur
        out.append(_loop_from_verts(verts, domain))
    return out


# ---------------------------------------------------------------------------
# ball bookkeeping and loop classification


def ball_faces(domain: Domain, center, eps):
    """Doubled coords of the faces whose center lies within eps of
    ``center`` (physical units): the face discretization of the ball."""
    s = 2.0 / domain.delta
    cx, cy = center[0] * s, center[1] * s
    r = eps * s
    out = set()
    x0, x1 = int(np.floor(cx - r)), int(np.ceil(cx + r))
    for x in range(x0, x1 + 1):
        dy = r * r - (x - cx) ** 2
        if dy < 0:
            continue
        dy = np.sqrt(dy)
        y0, y1 = int(np.ceil(cy - dy)), int(np.floor(cy + dy))
        for y in range(y0, y1 + 1):
            if (x + y) % 2 == 0:
                out.add((x, y))
    if not out:
        raise ValueError(f"ball B({center}, {eps}) contains no lattice face")
    return out


def classify_loop(loop: Loop, ball_face_sets):
    """For each ball (given by its face set) report (intersects, surrounds).

    A loop intersects the discretized ball when it borders one of its
    faces; it surrounds the ball when it does not intersect it and the
    ball lies in its interior.  Boundary-grazing loops therefore count as
    intersecting, never as surrounding.
    """
    touched = loop.touched_faces()
    flags = []
    for faces in ball_face_sets:
        inter = not touched.isdisjoint(faces)
        if inter:
            flags.append((True, False))
        else:
            probe = next(iter(faces))
            flags.append((False, loop.contains_face(probe)))
    return flags


def surround_count(loop: Loop, X, eps):
    """Per-ball indicator that the ball is strictly surrounded, plus the
    intersects-any-ball flag.  Balls must be pairwise disjoint (mutual
    center distances > 2 eps)."""
    X = np.asarray(X, dtype=float)
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            if np.hypot(*(X[i] - X[j])) <= 2 * eps:
                raise ValueError("balls overlap: need mutual distances > 2*eps")
    sets = [ball_faces(loop.domain, x, eps) for x in X]
    flags = classify_loop(loop, sets)
    vec = np.array([1 if s else 0 for _, s in flags], dtype=int)
    intersects = any(i for i, _ in flags)
    return vec, intersects


def loop_tail_event(loopset, eps, eta, lam, center=(0.0, 0.0)):
    """The event E(eps, eta, lam): more than lam/eta^2 loops of diameter at
    least eta*eps/2 intersect the ball B_eps(center)."""
    if not (0.0 < eta < 1.0):
        raise ValueError("need 0 < eta < 1")
    loops = list(loopset)
    if not loops:
        return False
    domain = loops[0].domain
    faces = ball_faces(domain, center, eps)
    threshold = eta * eps / 2.0
    count = 0
    for lo in loops:
        if lo.touched_faces().isdisjoint(faces):
            continue
        if lo.diameter() >= threshold:
            count += 1
    return count > lam / (eta * eta)


# ---------------------------------------------------------------------------
# window machinery for large boxes


def seed_edges_in_box(domain: Domain, lo, hi):
    """All directed medial half-edges with base vertex inside the doubled
    coordinate box [lo, hi]^2 (componentwise).  Seed set for the window
    tracer: every loop intersecting the physical region is caught."""
    M2 = 2 * (domain.N + 1)
    x0 = max(int(np.floor(lo[0])), -M2)
    x1 = min(int(np.ceil(hi[0])), M2)
    y0 = max(int(np.floor(lo[1])), -M2)
    y1 = min(int(np.ceil(hi[1])), M2)
    seeds = []
    for x in range(x0, x1 + 1):
        ystart = y0 + ((x + y0 + 1) & 1)
        for y in range(ystart, y1 + 1, 2):
            seeds.append(((x, y), (1, 1)))
            seeds.append(((x, y), (-1, 1)))
    return seeds


class BallSystem:
    """Fixed ball pattern on a domain, with cached face sets and seeds.

    Built once per experiment and reused across samples: the ball faces,
    the seed window (the dilated bounding box of all balls, which every
    loop meeting a ball or separating two balls must cross), and optional
    upward rays that catch loops surrounding a ball from far away.
    """

    def __init__(self, domain: Domain, centers, eps, rays=()):
        self.domain = domain
        self.centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        self.eps = float(eps)
        k = len(self.centers)
        for i in range(k):
            for j in range(i + 1, k):
                if np.hypot(*(self.centers[i] - self.centers[j])) <= 2 * eps:
                    raise ValueError("balls overlap: mutual distances must exceed 2*eps")
        for c in self.centers:
            domain.assert_in_safe_interior(c, eps)
        self.face_sets = [ball_faces(domain, c, eps) for c in self.centers]

        s = 2.0 / domain.delta
        r2 = eps * s + 2.0
        lo = self.centers.min(axis=0) * s - r2
        hi = self.centers.max(axis=0) * s + r2
        self._seeds = seed_edges_in_box(domain, lo, hi)
        M2 = 2 * (domain.N + 1)
        for i in rays:
            cx, cy = self.centers[i] * s
            self._seeds += seed_edges_in_box(
                domain, (cx - 1.5, cy), (cx + 1.5, M2)
            )
        # doubled-coordinate centers and a conservative touch radius
        self._c2 = self.centers * s
        self._touch2 = (eps * s + 2.0) ** 2

    def trace(self, cfg) -> list:
        """The loops of cfg that can interact with the ball pattern."""
        return trace_loops_near(cfg, self._seeds)

    def classify(self, loop: Loop):
        """(intersects, surrounds) boolean vectors for one loop.

        Loops whose vertices stay far from a ball cannot intersect it, so
        only the winding test runs for them; the face-set test is reserved
        for nearby loops.
        """
        v = loop.verts
        k = len(self.centers)
        inter = np.zeros(k, dtype=bool)
        surr = np.zeros(k, dtype=bool)
        touched = None
        for i in range(k):
            cx, cy = self._c2[i]
            d2 = (v[:, 0] - cx) ** 2 + (v[:, 1] - cy) ** 2
            if d2.min() > self._touch2:
                surr[i] = loop.winding(cx, cy) != 0
                continue
            if touched is None:
                touched = loop.touched_faces()
            if not touched.isdisjoint(self.face_sets[i]):
                inter[i] = True
            else:
                surr[i] = loop.winding(cx, cy) != 0
        return inter, surr

    def loop_integral(self, loop: Loop, charges, scale=1.0):
        """integral over int(loop) of the disk-indicator sum with the
        given charges; exact overlap areas for touching balls, winding
        tests otherwise."""
        inter, surr = self.classify(loop)
        total = 0.0
        eps = self.eps
        for i, q in enumerate(charges):
            if inter[i]:
                a = loop.ball_overlap_area(tuple(self.centers[i]), eps)
                total += q / (2.0 * eps**2) * a
            elif surr[i]:
                total += q * math.pi / 2.0
        return total * scale


# ---------------------------------------------------------------------------
# the Euler loop-count identity


def euler_counts(domain: Domain, bits, wired=False):
    """Return (k, k_dual) for the identity  loops = k + k_dual - 1.

    Free embedding (default): k counts clusters of the box configuration
    with no wiring; k_dual counts dual clusters containing at least one
    interior face, with the exterior sea wired into a single dual vertex
    (dual edges are open exactly where the crossing primal edge is
    closed).

    Wired embedding: k counts clusters of the wired quotient and k_dual
    counts all interior-face dual clusters without any sea merging; this
    matches extract_loops(cfg, exterior=1).
    """
    if wired:
        boundary = np.nonzero(domain.boundary_vertex_mask())[0]
        g = Graph(domain.n_vertices, domain.edge_endpoints, boundary_groups=[boundary])
        k_primal = int(np.unique(cluster_labels(g, bits)).size)
        k_dual = _interior_dual_clusters(domain, bits)
        return k_primal, k_dual
    free_graph = Graph(domain.n_vertices, domain.edge_endpoints)
    labels = cluster_labels(free_graph, bits)
    k_free = int(np.unique(labels).size)

    n = domain.N
    side = 2 * n  # interior faces per row/column
    sea = side * side  # index of the sea vertex

    def face_idx(fx, fy):
        # doubled (odd, odd) -> linear index, or the sea
        i, j = (fx - 1) >> 1, (fy - 1) >> 1
        if -n <= i < n and -n <= j < n:
            return (i + n) * side + (j + n)
        return sea

    parent = list(range(side * side + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    duals = domain.edge_dual_faces()
    closed = np.asarray(bits) == 0
    lim = 2 * n + 1
    for (f1, f2) in duals[closed]:
        a = sea if f1[0] == lim else face_idx(f1[0], f1[1])
        b = sea if f2[0] == lim else face_idx(f2[0], f2[1])
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
    roots_with_face = {find(k) for k in range(side * side)}
    return k_free, len(roots_with_face)


def _interior_dual_clusters(domain: Domain, bits):
    # clusters of the interior faces under interior-interior dual edges
    n = domain.N
    side = 2 * n
    parent = list(range(side * side))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    duals = domain.edge_dual_faces()
    closed = np.asarray(bits) == 0
    lim = 2 * n + 1
    for (f1, f2) in duals[closed]:
        if f1[0] == lim or f2[0] == lim:
            continue
        a = ((f1[0] - 1) >> 1) + n
        b = ((f1[1] - 1) >> 1) + n
        c = ((f2[0] - 1) >> 1) + n
        d = ((f2[1] - 1) >> 1) + n
        ra, rb = find(a * side + b), find(c * side + d)
        if ra != rb:
            parent[rb] = ra
    return len({find(k) for k in range(side * side)})
