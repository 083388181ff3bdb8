"""Monte Carlo estimators: arms, crossings, loop observables, two-point
functions and the conditioned normalization factor.

Estimators are fold-style consumers of sample streams.  Each per-sample
measurement is a scalar; chains are reduced to batch means (at least 16
batches, batch length at least 10 measured autocorrelation times where
the sample count allows) and chain results merge associatively, so the
reduction order never changes a reported mean.

Ball membership uses face-center Euclidean distance; each loop-based
estimate therefore carries an eps-resolution of half a lattice spacing,
reported alongside the estimate in its metadata.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import Domain
from .loops import BallSystem
from .sampler import FkConfig, integrated_autocorrelation

__all__ = [
    "TestFunction",
    "EstimatorResult",
    "ArmSpec",
    "estimate_from_values",
    "merge_results",
    "pi1_indicator",
    "pi2_indicator",
    "pi2k_count",
    "crossing_indicator",
    "two_point_indicator",
    "estimate_pi1",
    "estimate_pi2k",
    "estimate_delta",
    "estimate_two_point",
    "potts_correlation",
    "af_value",
    "estimate_AF",
    "estimate_characteristic",
    "tilde_pi1_indicator",
    "estimate_tilde_pi1",
    "four_ball_values",
    "estimate_tilde_pi2_and_delta",
    "cdelta_value",
    "estimate_cdelta",
    "results_csv_rows",
]


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class TestFunction:
    """F = sum_i q_i/(2 eps^2) 1_{B_eps(x_i)} with unit charges and balls
    at mutual distances above 2 eps."""

    __test__ = False  # not a pytest item despite the name

    centers: tuple
    charges: tuple
    eps: float

    def __post_init__(self):
        if len(self.centers) != len(self.charges):
            raise ValueError("need one charge per center")
        if any(q not in (-1, 1) for q in self.charges):
            raise ValueError("charges must be +-1")
        pts = np.asarray(self.centers, dtype=float)
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if np.hypot(*(pts[i] - pts[j])) <= 2 * self.eps:
                    raise ValueError("balls overlap: centers closer than 2*eps")

    @property
    def mean_zero(self):
        return sum(self.charges) == 0

    @classmethod
    def two_ball(cls, x, eps):
        return cls(centers=((0.0, 0.0), tuple(map(float, x))), charges=(1, -1), eps=eps)

    @classmethod
    def four_ball(cls, x, y, eps):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return cls(
            centers=(
                (0.0, 0.0),
                tuple(y),
                tuple(x),
                tuple(x + y),
            ),
            charges=(1, 1, -1, -1),
            eps=eps,
        )

    @classmethod
    def single_ball(cls, eps, center=(0.0, 0.0)):
        return cls(centers=(tuple(map(float, center)),), charges=(1,), eps=eps)


# ---------------------------------------------------------------------------
# estimator plumbing


@dataclass
class EstimatorResult:
    """A Monte Carlo estimate with batch-mean errors.

    ``batch_means`` is the raw batch table the stderr came from; merges
    pool these tables, so merging is associative and commutative.
    """

    estimate: float
    stderr: float
    n_eff: float
    n_samples: int
    batch_means: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("standard error must be nonnegative")


def _batch_means(values, tau, min_batches=16):
    n = len(values)
    length = max(1, int(math.ceil(10.0 * tau)))
    if n // length < min_batches:
        length = max(1, n // min_batches)
    n_batches = n // length
    trimmed = values[: n_batches * length]
    return trimmed.reshape(n_batches, length).mean(axis=1)


def estimate_from_values(chains_values, meta=None, min_batches=16):
    """Reduce per-chain measurement arrays to an EstimatorResult.

    ``chains_values`` is a list of 1D arrays, one per chain in chain-index
    order.  Batching is done within chains (autocorrelation lives there)
    and the batch tables are pooled.
    """
    chains = [np.asarray(v, dtype=float) for v in chains_values if len(v)]
    if not chains:
        raise ValueError("no samples")
    n_total = sum(len(v) for v in chains)
    mean = sum(v.sum() for v in chains) / n_total
    taus = [integrated_autocorrelation(v) for v in chains]
    tau = float(np.mean(taus))
    per_chain_min = max(1, min_batches // len(chains))
    tables = [_batch_means(v, tau, per_chain_min) for v in chains]
    batch = np.concatenate(tables)
    if len(batch) >= 2:
        stderr = float(batch.std(ddof=1) / math.sqrt(len(batch)))
    else:
        stderr = 0.0
    result = EstimatorResult(
        estimate=float(mean),
        stderr=stderr,
        n_eff=float(n_total / (2.0 * tau)),
        n_samples=int(n_total),
        batch_means=batch,
        meta=dict(meta or {}),
    )
    result.meta.setdefault("tau_int", tau)
    result.meta.setdefault("n_batches", len(batch))
    return result


def merge_results(results):
    """Associative, commutative merge of estimates of one observable."""
    results = list(results)
    n = sum(r.n_samples for r in results)
    mean = sum(r.estimate * r.n_samples for r in results) / n
    batch = np.sort(np.concatenate([r.batch_means for r in results]))
    stderr = float(batch.std(ddof=1) / math.sqrt(len(batch))) if len(batch) > 1 else 0.0
    meta = dict(results[0].meta)
    return EstimatorResult(
        estimate=float(mean),
        stderr=stderr,
        n_eff=float(sum(r.n_eff for r in results)),
        n_samples=n,
        batch_means=batch,
        meta=meta,
    )


def _collect(samples, fn, meta=None):
    values = [fn(cfg) for cfg in samples]
    return estimate_from_values([np.asarray(values, dtype=float)], meta=meta)


# ---------------------------------------------------------------------------
# connectivity events


@dataclass(frozen=True)
class ArmSpec:
    """Annulus arm event: inner box radius r, outer radius R (lattice
    units), multiplicity k (the 2k-arm event uses k crossing clusters),
    and the pattern: "primal" (one arm), "primal-dual" (pi_2), or
    "clusters" (k disjoint primal crossing clusters)."""

    r: int
    R: int
    k: int = 1
    pattern: str = "primal"

    def validate(self, domain: Domain):
        if not (self.r <= self.R):
            raise ValueError(f"need r <= R, got ({self.r}, {self.R})")
        if not (domain.delta <= self.r * domain.delta):
            raise ValueError("inner radius below one lattice step")
        if self.R > domain.N / 2:
            raise ValueError(
                f"outer radius {self.R} exceeds N/2 = {domain.N / 2}: the"
                " annulus must sit in the bulk of the box"
            )


def _ring_vertices(domain: Domain, radius):
    i, j = np.meshgrid(
        np.arange(-radius, radius + 1), np.arange(-radius, radius + 1), indexing="ij"
    )
    mask = np.maximum(np.abs(i), np.abs(j)) == radius
    return (i[mask] + domain.N) * domain.side + (j[mask] + domain.N)


def _box_vertices(domain: Domain, radius):
    i, j = np.meshgrid(
        np.arange(-radius, radius + 1), np.arange(-radius, radius + 1), indexing="ij"
    )
    return (i.ravel() + domain.N) * domain.side + (j.ravel() + domain.N)


class _ArmIndex:
    # cached vertex index sets per (domain, radius)
    def __init__(self, domain):
        self.domain = domain
        self.rings = {}
        self.boxes = {}

    def ring(self, radius):
        if radius not in self.rings:
            self.rings[radius] = _ring_vertices(self.domain, radius)
        return self.rings[radius]

    def box(self, radius):
        if radius not in self.boxes:
            self.boxes[radius] = _box_vertices(self.domain, radius)
        return self.boxes[radius]


_arm_cache = {}


def _arm_index(domain):
    key = id(domain)
    if key not in _arm_cache:
        _arm_cache[key] = _ArmIndex(domain)
    return _arm_cache[key]


def pi1_indicator(cfg: FkConfig, r, R):
    """Lambda_r is connected to the boundary of Lambda_R (within Lambda_R;
    the restriction is immaterial because any path reaching the ring
    first crosses it)."""
    idx = _arm_index(cfg.domain)
    inner = set(cfg.labels[idx.box(r)].tolist())
    outer = cfg.labels[idx.ring(R)]
    return int(any(l in inner for l in outer.tolist()))


_dual_graph_cache = {}


def _dual_graph_static(domain):
    # config-independent part of the interior dual graph
    key = id(domain)
    if key in _dual_graph_cache:
        return _dual_graph_cache[key]
    n = domain.N
    side = 2 * n
    duals = domain.edge_dual_faces()
    lim = 2 * n + 1
    interior = (duals[:, :, 0] != lim).all(axis=1)
    edge_ids = np.nonzero(interior)[0]
    pairs = duals[interior]
    a = ((pairs[:, 0, 0] - 1) // 2 + n) * side + ((pairs[:, 0, 1] - 1) // 2 + n)
    b = ((pairs[:, 1, 0] - 1) // 2 + n) * side + ((pairs[:, 1, 1] - 1) // 2 + n)
    out = (edge_ids, a.astype(np.int64), b.astype(np.int64), side * side)
    _dual_graph_cache[key] = out
    return out


def _dual_labels(cfg: FkConfig):
    if "dual_labels" in cfg.__dict__ and cfg.__dict__["dual_labels"] is not None:
        return cfg.__dict__["dual_labels"]
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    edge_ids, a, b, n_faces = _dual_graph_static(cfg.domain)
    open_dual = cfg.bits[edge_ids] == 0
    m = coo_matrix(
        (
            np.ones(int(open_dual.sum()), dtype=np.int8),
            (a[open_dual], b[open_dual]),
        ),
        shape=(n_faces, n_faces),
    )
    _, labels = connected_components(m, directed=False)
    cfg.__dict__["dual_labels"] = labels
    return labels


_dual_box_cache = {}


def _dual_box_idx(domain, radius, outside=False):
    key = (id(domain), radius, outside)
    if key in _dual_box_cache:
        return _dual_box_cache[key]
    n = domain.N
    side = 2 * n
    i, j = np.meshgrid(np.arange(-n, n), np.arange(-n, n), indexing="ij")
    cx, cy = i + 0.5, j + 0.5
    dist = np.maximum(np.abs(cx), np.abs(cy))
    mask = dist > radius if outside else dist < radius
    out = (i[mask] + n) * side + (j[mask] + n)
    _dual_box_cache[key] = out
    return out


_dual_band_cache = {}


def _dual_band_idx(domain, radius, outside):
    # one-face-thick ring just inside (or outside) Chebyshev radius
    key = (id(domain), radius, outside, "band")
    if key in _dual_band_cache:
        return _dual_band_cache[key]
    n = domain.N
    side = 2 * n
    lo, hi = (radius, radius + 1.0) if outside else (radius - 1.0, radius)
    i, j = np.meshgrid(np.arange(-n, n), np.arange(-n, n), indexing="ij")
    dist = np.maximum(np.abs(i + 0.5), np.abs(j + 0.5))
    mask = (dist > lo) & (dist < hi)
    arr = ((i[mask] + n) * side + (j[mask] + n)).astype(np.int64)
    _dual_band_cache[key] = arr
    return arr


def pi2_indicator(cfg: FkConfig, r, R):
    """Simultaneous primal arm and dual arm across Ann(r, R).

    A dual path from Lambda_r to the complement of Lambda_R crosses the
    one-face rings at both radii, so the label intersection of the two
    thin bands decides the dual arm."""
    if not pi1_indicator(cfg, r, R):
        return 0
    labels = _dual_labels(cfg)
    inner = set(labels[_dual_band_idx(cfg.domain, r, False)].tolist())
    outer = labels[_dual_band_idx(cfg.domain, R, True)]
    return int(any(l in inner for l in outer.tolist()))


def pi2k_count(cfg: FkConfig, r, R):
    """Number of disjoint clusters of Ann(r, R) joining its boundaries."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    domain = cfg.domain
    vi, vj = domain._vi, domain._vj
    cheb = np.maximum(np.abs(vi), np.abs(vj))
    in_ann = (cheb >= r) & (cheb <= R)
    e = domain.edge_endpoints
    keep = cfg.bits.astype(bool) & in_ann[e[:, 0]] & in_ann[e[:, 1]]
    m = coo_matrix(
        (np.ones(int(keep.sum()), dtype=np.int8), (e[keep, 0], e[keep, 1])),
        shape=(domain.n_vertices, domain.n_vertices),
    )
    _, labels = connected_components(m, directed=False)
    inner = set(labels[_arm_index(domain).ring(r)].tolist())
    outer = set(labels[_arm_index(domain).ring(R)].tolist())
    return len(inner & outer)


_crossing_cache = {}


class _SquareCrossing:
    # static local subgraph of one square, so the per-sample work scales
    # with the square and not with the box
    def __init__(self, domain, r, corner):
        x0, y0 = corner
        vi, vj = domain._vi, domain._vj
        inside = (vi >= x0) & (vi <= x0 + r) & (vj >= y0) & (vj <= y0 + r)
        self.local_of = -np.ones(domain.n_vertices, dtype=np.int64)
        verts = np.nonzero(inside)[0]
        self.local_of[verts] = np.arange(verts.size)
        self.n_local = verts.size
        e = domain.edge_endpoints
        keep = inside[e[:, 0]] & inside[e[:, 1]]
        self.edge_ids = np.nonzero(keep)[0]
        self.lu = self.local_of[e[keep, 0]]
        self.lv = self.local_of[e[keep, 1]]
        side, n = domain.side, domain.N
        ys = np.arange(y0, y0 + r + 1)
        self.left = self.local_of[(x0 + n) * side + (ys + n)]
        self.right = self.local_of[(x0 + r + n) * side + (ys + n)]

    def crossed(self, bits):
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components

        open_mask = bits[self.edge_ids].astype(bool)
        m = coo_matrix(
            (
                np.ones(int(open_mask.sum()), dtype=np.int8),
                (self.lu[open_mask], self.lv[open_mask]),
            ),
            shape=(self.n_local, self.n_local),
        )
        _, labels = connected_components(m, directed=False)
        return int(bool(set(labels[self.left].tolist())
                        & set(labels[self.right].tolist())))


def crossing_indicator(cfg: FkConfig, r, corner=(0, 0)):
    """Horizontal crossing of the square [0, r] x [0, r] translated to
    ``corner``, by open edges inside the square."""
    key = (id(cfg.domain), int(r), tuple(corner))
    if key not in _crossing_cache:
        _crossing_cache[key] = _SquareCrossing(cfg.domain, int(r), corner)
    return _crossing_cache[key].crossed(cfg.bits)


def two_point_indicator(cfg: FkConfig, x):
    """0 <-> x_delta: same cluster of the origin and the vertex nearest x."""
    domain = cfg.domain
    i = int(round(x[0] / domain.delta))
    j = int(round(x[1] / domain.delta))
    u = domain.vertex_index((0, 0))
    v = domain.vertex_index((i, j))
    return int(cfg.labels[u] == cfg.labels[v])


# ---------------------------------------------------------------------------
# named estimators (stream -> EstimatorResult)


def estimate_pi1(spec: ArmSpec, samples):
    samples = iter(samples)
    first = next(samples)
    spec.validate(first.domain)
    meta = {"observable": "pi1", "r": spec.r, "R": spec.R}
    stream = itertools.chain([first], samples)
    return _collect(stream, lambda c: pi1_indicator(c, spec.r, spec.R), meta)


def estimate_pi2k(spec: ArmSpec, samples):
    if spec.k < 1:
        raise ValueError("arm multiplicity k must be >= 1")
    samples = iter(samples)
    first = next(samples)
    spec.validate(first.domain)
    stream = itertools.chain([first], samples)
    if spec.k == 1 and spec.pattern != "clusters":
        meta = {"observable": "pi2", "r": spec.r, "R": spec.R}
        return _collect(stream, lambda c: pi2_indicator(c, spec.r, spec.R), meta)
    meta = {"observable": f"pi{2 * spec.k}", "r": spec.r, "R": spec.R, "k": spec.k}
    return _collect(
        stream, lambda c: int(pi2k_count(c, spec.r, spec.R) >= spec.k), meta
    )


def estimate_delta(r, R, samples_wired, samples_free):
    """Delta(r, R): wired minus free probability of the horizontal
    crossing of [0, r]^2 on Lambda_R chains; errors combine in
    quadrature."""
    wired = list(samples_wired)
    free = list(samples_free)
    if not wired or not free:
        raise ValueError("need samples from both chain families")
    dw, df = wired[0].domain, free[0].domain
    if dw.N != df.N or dw.delta != df.delta:
        raise ValueError("mismatched domains for the two chain families")
    if R != dw.N:
        raise ValueError(f"Delta(r, R) needs chains on Lambda_R (N={dw.N}, R={R})")
    rw = _collect(wired, lambda c: crossing_indicator(c, r), {"bc": "wired"})
    rf = _collect(free, lambda c: crossing_indicator(c, r), {"bc": "free"})
    est = rw.estimate - rf.estimate
    err = math.hypot(rw.stderr, rf.stderr)
    return EstimatorResult(
        estimate=est,
        stderr=err,
        n_eff=min(rw.n_eff, rf.n_eff),
        n_samples=rw.n_samples + rf.n_samples,
        batch_means=np.concatenate([rw.batch_means, -rf.batch_means]),
        meta={"observable": "delta", "r": r, "R": R,
              "wired": rw.estimate, "free": rf.estimate},
    )


def estimate_two_point(x, samples):
    return _collect(
        samples, lambda c: two_point_indicator(c, x), {"observable": "two_point", "x": x}
    )


def potts_correlation(x, samples):
    """P[sigma_0 = sigma_x] - 1/4 = (3/4) phi[0 <-> x] via the coupling."""
    r = estimate_two_point(x, samples)
    return EstimatorResult(
        estimate=0.75 * r.estimate,
        stderr=0.75 * r.stderr,
        n_eff=r.n_eff,
        n_samples=r.n_samples,
        batch_means=0.75 * r.batch_means,
        meta={"observable": "potts_correlation", "x": x},
    )


# ---------------------------------------------------------------------------
# loop observables


def af_value(cfg: FkConfig, system: BallSystem, charges, scale=1.0):
    """One sample of the loop cosine product for the ball pattern.

    The product runs over the loops meeting the window around the balls;
    all other loops contribute unit factors because the charge pattern is
    mean-zero (a loop avoiding the pattern's hull surrounds all balls or
    none)."""
    out = 1.0
    for lo in system.trace(cfg):
        a = system.loop_integral(lo, charges, scale=scale)
        if a != 0.0:
            out *= math.cos(a)
    return out


def estimate_AF(F: TestFunction, samples):
    """Sample mean of A_F over the stream; F must be mean-zero."""
    if not F.mean_zero:
        raise ValueError("A_F estimation needs a mean-zero test function")
    samples = iter(samples)
    first = next(samples)
    system = BallSystem(first.domain, F.centers, F.eps)
    stream = itertools.chain([first], samples)
    meta = {
        "observable": "A_F",
        "eps": F.eps,
        "eps_resolution": first.domain.delta / 2.0,
        "charges": tuple(F.charges),
    }
    values = []
    for cfg in stream:
        v = af_value(cfg, system, F.charges)
        if not -1.0 <= v <= 1.0 + 1e-12:
            raise AssertionError(f"A_F sample {v} outside [-1, 1]")
        values.append(v)
    return estimate_from_values([np.asarray(values)], meta=meta)


def estimate_characteristic(F: TestFunction, t, samples):
    r"""Empirical characteristic value E[e^{i t \int F h}] via the exact
    per-configuration orientation average prod cos(t * loop integrals)."""
    samples = iter(samples)
    first = next(samples)
    system = BallSystem(first.domain, F.centers, F.eps)
    return _collect(
        itertools.chain([first], samples),
        lambda c: af_value(c, system, F.charges, scale=t),
        {"observable": "characteristic", "t": t, "eps": F.eps},
    )


def _ball_vertex_idx(cfg, system, i):
    cache = system.__dict__.setdefault("_vertex_idx", {})
    if i not in cache:
        cache[i] = cfg.domain.vertices_in_ball(system.centers[i], system.eps)
    return cache[i]


def _ball_dual_idx(cfg, system, i):
    cache = system.__dict__.setdefault("_dual_idx", {})
    if i not in cache:
        dom = cfg.domain
        n, side = dom.N, 2 * dom.N
        faces = dom.dual_faces_in_ball(system.centers[i], system.eps)
        cache[i] = ((faces[:, 0] - 1) // 2 + n) * side + (
            (faces[:, 1] - 1) // 2 + n
        )
    return cache[i]


def _primal_ball_connected(cfg, system, i, j):
    labels = cfg.labels
    a = labels[_ball_vertex_idx(cfg, system, i)]
    b = labels[_ball_vertex_idx(cfg, system, j)]
    return bool(set(a.tolist()) & set(b.tolist()))


def _dual_ball_connected(cfg, system, i, j):
    labels = _dual_labels(cfg)
    a = labels[_ball_dual_idx(cfg, system, i)]
    b = labels[_ball_dual_idx(cfg, system, j)]
    return bool(set(a.tolist()) & set(b.tolist()))


def tilde_pi1_indicator(cfg: FkConfig, system: BallSystem):
    """(event, connected): the no-odd-surrounding-loop event for the two
    balls, and whether they are joined by a primal or a dual path.

    At scale the event coincides with the connection disjunction; at
    finite lattice spacing an interface can graze one ball (which removes
    it from every loop class) while separating the two, so the implication
    event => connected carries a small discretization defect.  Violations
    are therefore counted rather than asserted; their rate vanishes as
    delta/eps -> 0 and is reported with each estimate."""
    event = 1
    for lo in system.trace(cfg):
        inter, surr = system.classify(lo)
        if not inter.any() and surr.sum() == 1:
            event = 0
            break
    if not event:
        return 0, False
    connected = _primal_ball_connected(cfg, system, 0, 1) or _dual_ball_connected(
        cfg, system, 0, 1
    )
    return 1, connected


def estimate_tilde_pi1(x, y, eps, samples):
    """Frequency of the no-odd-surrounding-loop event for balls at x, y.

    The metadata reports the rate of samples where the event holds with
    neither a primal nor a dual connection between the balls (the
    finite-delta defect of the event identity)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.hypot(*(x - y)) <= 2 * eps:
        raise ValueError("balls overlap: need |x - y| > 2*eps")
    samples = iter(samples)
    first = next(samples)
    system = BallSystem(first.domain, [x, y], eps)
    values, violations = [], 0
    for cfg in itertools.chain([first], samples):
        event, connected = tilde_pi1_indicator(cfg, system)
        values.append(event)
        violations += int(event and not connected)
    meta = {
        "observable": "tilde_pi1",
        "eps": eps,
        "eps_resolution": first.domain.delta / 2.0,
        "implication_violation_rate": violations / len(values),
    }
    return estimate_from_values([np.asarray(values, dtype=float)], meta=meta)


def four_ball_values(cfg: FkConfig, system: BallSystem, k=1):
    """(pi~_2k indicator, Delta~ value) for the four-ball pattern
    (0, y, x, x+y); ball order in the system must match.

    Classifies every loop that can separate the balls:
      L_odd : avoids all balls, surrounds an odd number
      L2    : avoids all balls, surrounds exactly two
      L2_1  : in L2, surrounds exactly one of ball 0 (at 0), ball 1 (at y)
    The events {L2_1 nonempty} and {L2 \\ L2_1 nonempty} are disjoint by
    loop topology; that disjointness is asserted on every sample.
    """
    n_odd = 0
    n_l2 = 0
    n_l21 = 0
    for lo in system.trace(cfg):
        inter, surr = system.classify(lo)
        if inter.any():
            continue
        s = int(surr.sum())
        if s % 2 == 1:
            n_odd += 1
        if s == 2:
            n_l2 += 1
            if int(surr[0]) + int(surr[1]) == 1:
                n_l21 += 1
    if n_l21 > 0 and n_l2 - n_l21 > 0:
        raise AssertionError("L2_1 and L2 \\ L2_1 simultaneously nonempty")
    pi2k = int(n_l21 >= k and n_odd == 0)
    delta = ((-1) ** n_l2) if (n_l21 == 0 and n_odd == 0) else 0
    return pi2k, delta


def estimate_tilde_pi2_and_delta(x, y, eps, samples, k=1):
    """(pi~_2k, Delta~) estimates for the four-ball observables.

    The admissible regime |x|/16 >= |y| >= 4*eps is enforced.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.hypot(*x) / 16.0 >= np.hypot(*y) >= 4.0 * eps):
        raise ValueError("regime violation: need |x|/16 >= |y| >= 4*eps")
    samples = iter(samples)
    first = next(samples)
    system = BallSystem(first.domain, [(0.0, 0.0), tuple(y), tuple(x), tuple(x + y)], eps)
    p_vals, d_vals = [], []
    for cfg in itertools.chain([first], samples):
        p, d = four_ball_values(cfg, system, k=k)
        p_vals.append(p)
        d_vals.append(d)
    meta = {"eps": eps, "k": k, "eps_resolution": first.domain.delta / 2.0}
    rp = estimate_from_values(
        [np.asarray(p_vals, dtype=float)], meta={**meta, "observable": "tilde_pi2k"}
    )
    rd = estimate_from_values(
        [np.asarray(d_vals, dtype=float)], meta={**meta, "observable": "tilde_delta"}
    )
    return rp, rd


_boundary_idx_cache = {}


def _primal_arm_to_boundary(cfg: FkConfig, center, eps, system=None):
    domain = cfg.domain
    if system is not None:
        ball_idx = _ball_vertex_idx(cfg, system, 0)
    else:
        ball_idx = domain.vertices_in_ball(center, eps)
    key = id(domain)
    if key not in _boundary_idx_cache:
        _boundary_idx_cache[key] = np.nonzero(domain.boundary_vertex_mask())[0]
    ring = cfg.labels[_boundary_idx_cache[key]]
    ball = cfg.labels[ball_idx]
    return bool(set(ball.tolist()) & set(ring.tolist()))


def has_surrounding_loop(cfg: FkConfig, ray_system: BallSystem):
    """Whether some loop avoiding the ball surrounds it.

    A primal path from the ball to the (wired) boundary rules this out
    topologically, so that cheap test short-circuits the geometric scan;
    otherwise every candidate crosses the upward ray and is traced.
    """
    if _primal_arm_to_boundary(
        cfg, ray_system.centers[0], ray_system.eps, system=ray_system
    ):
        return False
    for lo in ray_system.trace(cfg):
        inter, surr = ray_system.classify(lo)
        if surr[0] and not inter[0]:
            return True
    return False


def cdelta_value(cfg: FkConfig, system: BallSystem, ray_system: BallSystem):
    """One conditioned sample of the single-ball cosine product, or None
    when the sample is rejected (some loop surrounds the ball)."""
    if has_surrounding_loop(cfg, ray_system):
        return None
    out = 1.0
    for lo in system.trace(cfg):
        a = system.loop_integral(lo, (1,))
        if a != 0.0:
            out *= math.cos(a)
    return out


def estimate_cdelta(eps, R, samples_wired, min_acceptance=1e-3):
    """Conditional mean of the single-ball cosine product given that no
    loop surrounds B_eps(0), by rejection, under wired boundary
    conditions on Lambda_R.  Reports the acceptance rate and aborts if it
    falls below ``min_acceptance``."""
    samples = iter(samples_wired)
    first = next(samples)
    domain = first.domain
    if first.bc.kind != "wired":
        raise ValueError("the normalization factor is defined under wired bc")
    if domain.N * domain.delta < 32 * eps:
        raise ValueError("need R >= 32*eps for the conditioned estimate")
    if R != domain.N:
        raise ValueError(f"chains are on Lambda_{domain.N}, not Lambda_{R}")
    system = BallSystem(domain, [(0.0, 0.0)], eps)
    ray_system = BallSystem(domain, [(0.0, 0.0)], eps, rays=(0,))
    accepted, total = [], 0
    for cfg in itertools.chain([first], samples):
        total += 1
        v = cdelta_value(cfg, system, ray_system)
        if v is not None:
            accepted.append(v)
    rate = len(accepted) / total if total else 0.0
    if rate < min_acceptance:
        raise RuntimeError(
            f"cdelta acceptance rate {rate:.2e} below {min_acceptance:.0e} "
            f"({len(accepted)}/{total} accepted; eps={eps}, R={R})"
        )
    res = estimate_from_values(
        [np.asarray(accepted, dtype=float)],
        meta={
            "observable": "cdelta",
            "eps": eps,
            "R": R,
            "acceptance_rate": rate,
            "n_rejected": total - len(accepted),
            "eps_resolution": domain.delta / 2.0,
        },
    )
    return res


# ---------------------------------------------------------------------------
# result table export


_CSV_COLUMNS = [
    "observable",
    "r",
    "R",
    "eps",
    "x",
    "y",
    "N",
    "delta",
    "bc",
    "estimate",
    "stderr",
    "n_eff",
    "seed",
    "config_hash",
    "code_version",
]


def results_csv_rows(rows):
    """Render result dicts as RFC-4180 CSV lines with the fixed column
    order; identical inputs give byte-identical output."""
    import io

    def fmt(v):
        if v is None or v == "":
            return ""
        if isinstance(v, float):
            return repr(v)
        if isinstance(v, (tuple, list, np.ndarray)):
            return "(" + " ".join(repr(float(u)) for u in np.ravel(v)) + ")"
        return str(v)

    buf = io.StringIO()
    buf.write(",".join(_CSV_COLUMNS) + "\r\n")
    for row in rows:
        rendered = []
        for c in _CSV_COLUMNS:
            cell = fmt(row.get(c, ""))
            if "," in cell or '"' in cell:
                cell = '"' + cell.replace('"', '""') + '"'
            rendered.append(cell)
        buf.write(",".join(rendered) + "\r\n")
    return buf.getvalue()
