"""Exact planar geometry helpers shared by the loop and height-field code.

Everything here is plain float geometry: disk/polygon overlap areas via a
Green's-theorem decomposition, convex-hull diameters, and point-in-polygon
tests.  The lattice-combinatorial (integer) geometry lives in ``lattice``
and ``loops``; this module is deliberately free of any lattice knowledge.
"""

import math

import numpy as np

__all__ = [
    "circle_polygon_area",
    "polygon_signed_area",
    "hull_diameter",
    "disk_overlap_kernel",
]


def polygon_signed_area(poly):
    """Signed area of a closed polygon given as an (n, 2) array of vertices.

    Positive for counterclockwise orientation.  The closing edge from the
    last vertex back to the first is implied.
    """
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _segment_disk_contribution(ax, ay, bx, by, r):
    # Signed area of (triangle O-a-b) intersected with the disk |z| <= r.
    # Splits the segment a->b at its crossings with the circle; inside
    # pieces contribute a triangle area, outside pieces a circular sector.
    r2 = r * r
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return 0.0

    # Quadratic |a + t d|^2 = r^2 for t in [0, 1].
    bq = ax * dx + ay * dy
    cq = ax * ax + ay * ay - r2
    disc = bq * bq - seg2 * cq
    ts = [0.0]
    if disc > 0.0:
        root = math.sqrt(disc)
        for t in ((-bq - root) / seg2, (-bq + root) / seg2):
            if 1e-14 < t < 1.0 - 1e-14:
                ts.append(t)
    ts.sort()
    ts.append(1.0)

    total = 0.0
    for t0, t1 in zip(ts, ts[1:]):
        if t1 - t0 <= 1e-15:
            continue
        tm = 0.5 * (t0 + t1)
        mx, my = ax + tm * dx, ay + tm * dy
        px, py = ax + t0 * dx, ay + t0 * dy
        qx, qy = ax + t1 * dx, ay + t1 * dy
        if mx * mx + my * my <= r2:
            # chord piece inside the disk: plain triangle with the origin
            total += 0.5 * (px * qy - py * qx)
        else:
            # outside piece: circular sector spanned by the wrapped angle
            ang = math.atan2(px * qy - py * qx, px * qx + py * qy)
            total += 0.5 * r2 * ang
    return total


def circle_polygon_area(center, r, poly):
    """Area of the intersection of a disk with a simple polygon.

    Parameters
    ----------
    center : (2,) sequence
        Disk center.
    r : float
        Disk radius.
    poly : (n, 2) array_like
        Polygon vertices in traversal order (closing edge implied).  The
        polygon may be traversed in either orientation; the absolute
        overlap area is returned.

    The decomposition is exact up to floating point roundoff (triangle and
    circular-sector terms only), which is what the face-exact integrals of
    the height field require.
    """
    p = np.asarray(poly, dtype=float)
    cx, cy = float(center[0]), float(center[1])
    xs = p[:, 0] - cx
    ys = p[:, 1] - cy
    n = len(p)
    total = 0.0
    for i in range(n):
        j = (i + 1) % n
        total += _segment_disk_contribution(xs[i], ys[i], xs[j], ys[j], r)
    return abs(total)


def _convex_hull(points):
    # Andrew's monotone chain; returns hull vertices in ccw order.
    pts = sorted(set(map(tuple, points)))
    if len(pts) <= 2:
        return pts

    def half(seq):
        out = []
        for q in seq:
            while len(out) >= 2:
                ox, oy = out[-2]
                px, py = out[-1]
                if (px - ox) * (q[1] - oy) - (py - oy) * (q[0] - ox) <= 0:
                    out.pop()
                else:
                    break
            out.append(q)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    return lower[:-1] + upper[:-1]


def hull_diameter(points):
    """Euclidean diameter (max pairwise distance) of a point set."""
    hull = _convex_hull(points)
    if len(hull) == 1:
        return 0.0
    best = 0.0
    for i in range(len(hull)):
        xi, yi = hull[i]
        for j in range(i + 1, len(hull)):
            d = (hull[j][0] - xi) ** 2 + (hull[j][1] - yi) ** 2
            if d > best:
                best = d
    return math.sqrt(best)


def disk_overlap_kernel(r):
    """Area of the intersection of two unit disks with centers r apart.

    Vanishes for r >= 2.  This is the density of the difference of two
    independent uniform points on the unit disk, up to normalization; it is
    the reduction kernel used by the log-kernel quadratures.
    """
    r = np.asarray(r, dtype=float)
    r = np.clip(r, 0.0, 2.0)
    half = r / 2.0
    return 2.0 * np.arccos(half) - half * np.sqrt(np.maximum(4.0 - r * r, 0.0))
