r"""Height field of the uniformly oriented loop gas.

Orienting every loop with an independent fair sign and summing signed
interior indicators gives an integer field on the medial faces, constant
on each face and zero on the outer face.  Averaging e^{i \int F h} over
the orientations of a fixed configuration collapses, loop by loop, to the
cosine product A_F of the loop set; that identity is exact and is one of
the acceptance gates.

Heights are stored sparsely: faces not interior to any loop are zero.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import geom
from .lattice import Domain
from .loops import LoopSet

__all__ = [
    "OrientedLoops",
    "HeightField",
    "orient",
    "height",
    "test_integral",
    "face_weights",
    "loop_integral",
    "cosine_product",
]


@dataclass
class OrientedLoops:
    """A loop set plus one +-1 sign per loop."""

    loopset: LoopSet
    signs: np.ndarray


@dataclass
class HeightField:
    """Sparse face-indexed heights; absent faces carry height zero."""

    values: dict
    domain: Domain

    def __getitem__(self, face):
        return self.values.get(tuple(face), 0)

    def to_matrix(self):
        """Dense doubled-coordinate matrix of heights over the box.

        Row r, column c holds the height of the face at doubled
        coordinates (x, y) = (c - 2N, 2N - r); entries that are not faces
        (mixed parity) are zero by convention.
        """
        n2 = 2 * self.domain.N
        size = 2 * n2 + 1
        out = np.zeros((size, size), dtype=int)
        for (x, y), h in self.values.items():
            if abs(x) <= n2 and abs(y) <= n2:
                out[n2 - y, x + n2] = h
        return out


def orient(loopset: LoopSet, rng) -> OrientedLoops:
    """Draw one independent uniform sign per loop."""
    signs = rng.integers(0, 2, size=len(loopset)) * 2 - 1
    return OrientedLoops(loopset=loopset, signs=signs.astype(np.int64))


def height(oriented: OrientedLoops) -> HeightField:
    """h = sum over loops of sign * indicator(interior); zero outside."""
    values = {}
    for lo, s in zip(oriented.loopset, oriented.signs):
        for face in lo.interior_faces():
            values[face] = values.get(face, 0) + int(s)
    values = {f: h for f, h in values.items() if h != 0}
    return HeightField(values=values, domain=oriented.loopset.domain)


def face_weights(F, domain: Domain):
    """Exact integral of the test function over each face diamond.

    Only faces overlapping some ball of F appear.  Overlap areas are the
    analytic disk/polygon intersection, so the face-wise sums below are
    exact rather than grid approximations.
    """
    delta = domain.delta
    half = delta / 2.0
    weights = {}
    for center, q in zip(F.centers, F.charges):
        cx, cy = float(center[0]), float(center[1])
        coef = q / (2.0 * F.eps**2)
        # doubled-coordinate bounding box of faces that can overlap
        s = 2.0 / delta
        r = F.eps * s + 1.0
        x0, x1 = int(math.floor(cx * s - r)), int(math.ceil(cx * s + r))
        y0, y1 = int(math.floor(cy * s - r)), int(math.ceil(cy * s + r))
        for fx in range(x0, x1 + 1):
            for fy in range(y0, y1 + 1):
                if (fx + fy) % 2:
                    continue
                px, py = fx * half, fy * half
                poly = [
                    (px + half, py),
                    (px, py + half),
                    (px - half, py),
                    (px, py - half),
                ]
                a = geom.circle_polygon_area((cx, cy), F.eps, poly)
                if a > 0.0:
                    weights[(fx, fy)] = weights.get((fx, fy), 0.0) + coef * a
    return weights


def test_integral(h: HeightField, F, weights=None):
    """Face-exact integral of F against the height field.

    The support of F must sit in the safe interior of the box; a support
    touching the boundary is rejected.
    """
    domain = h.domain
    for center in F.centers:
        domain.assert_in_safe_interior(center, F.eps)
    if weights is None:
        weights = face_weights(F, domain)
    total = 0.0
    if len(weights) < len(h.values):
        for face, w in weights.items():
            hv = h.values.get(face)
            if hv:
                total += hv * w
    else:
        for face, hv in h.values.items():
            w = weights.get(face)
            if w:
                total += hv * w
    return total


def loop_integral(loop, F):
    """Exact integral of F over the interior of one loop, via analytic
    disk/polygon overlap areas."""
    total = 0.0
    for center, q in zip(F.centers, F.charges):
        a = loop.ball_overlap_area((float(center[0]), float(center[1])), F.eps)
        if a:
            total += q / (2.0 * F.eps**2) * a
    return total


def cosine_product(loops, F):
    """prod over loops of cos(integral of F over the loop interior).

    This is the per-configuration value A_F of a loop collection; loops
    whose interiors integrate F to zero contribute factors of one.
    """
    out = 1.0
    for lo in loops:
        a = loop_integral(lo, F)
        if a != 0.0:
            out *= math.cos(a)
    return out
