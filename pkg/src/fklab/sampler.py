"""Exact-target Monte Carlo for the critical random-cluster model (q=4).

Sampling runs through the Edwards-Sokal coupling with the 4-state Potts
model: one sweep colors every FK cluster uniformly in {1,2,3,4} (clusters
touching a wired group get that group's color) and then re-opens each
monochromatic edge independently with probability p.  At q=4 this is plain
Swendsen-Wang and leaves the target measure invariant for any boundary
condition realized as virtual mega-vertices.

A brute-force enumeration oracle for graphs with at most 24 edges provides
the exact distribution that the chain tests are run against.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .lattice import BoundarySpec, Domain

__all__ = [
    "ModelParams",
    "Graph",
    "FkConfig",
    "PottsConfig",
    "ChainStats",
    "CRITICAL",
    "es_update",
    "sample_chain",
    "brute_force_distribution",
    "BruteForceTable",
    "potts_from_fk",
    "integrated_autocorrelation",
    "chain_rng",
    "dump_samples",
    "load_samples",
]

# a sweep on graphs at or below this edge count runs the pure-python
# union-find; larger graphs go through scipy's connected components
_SMALL_GRAPH_EDGES = 4096


@dataclass(frozen=True)
class ModelParams:
    """Edge weight and cluster weight; shipped experiments fix p=2/3, q=4."""

    p: float = 2.0 / 3.0
    q: float = 4.0

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if self.q <= 0.0:
            raise ValueError(f"q must be positive, got {self.q}")


CRITICAL = ModelParams()  # p/(1-p) = 2 at the self-dual point


class Graph:
    """Finite graph the chain runs on, with boundary wiring pre-resolved.

    Boundary groups are realized as virtual mega-vertices appended after
    the real ones; group g is the vertex ``n_vertices + g`` and is united
    with its members before every cluster computation.
    """

    def __init__(self, n_vertices, edges, boundary_groups=(), wired_pinned=False):
        self.n_vertices = int(n_vertices)
        self.edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.n_edges = self.edges.shape[0]
        self.boundary_groups = [list(map(int, g)) for g in boundary_groups]
        self.n_virtual = len(self.boundary_groups)
        self.n_total = self.n_vertices + self.n_virtual
        # pin the color of the (single) wired group instead of redrawing it
        self.wired_pinned = bool(wired_pinned) and self.n_virtual == 1
        wiring = []
        for g, members in enumerate(self.boundary_groups):
            for v in members:
                wiring.append((self.n_vertices + g, v))
        self.wiring = np.asarray(wiring, dtype=np.int64).reshape(-1, 2)
        self._edge_list = [(int(u), int(v)) for u, v in self.edges]

    @classmethod
    def from_domain(cls, domain: Domain, bc: BoundarySpec):
        if bc.kind == "free":
            groups = ()
        elif bc.kind == "wired":
            groups = (np.nonzero(domain.boundary_vertex_mask())[0],)
        else:
            groups = tuple(
                [domain.vertex_index(v) for v in g] for g in bc.groups
            )
        return cls(
            domain.n_vertices,
            domain.edge_endpoints,
            groups,
            wired_pinned=(bc.kind == "wired"),
        )


@dataclass
class FkConfig:
    """A percolation configuration with its cached cluster structure.

    ``bits`` is the per-edge open/closed vector in the graph's canonical
    edge order.  ``labels`` assigns every vertex (virtual mega-vertices
    included) its cluster label under the boundary wiring; the dual
    configuration is determined edge-by-edge as open iff the primal edge
    is closed.
    """

    graph: Graph
    bits: np.ndarray
    labels: np.ndarray
    bc: BoundarySpec = field(default_factory=BoundarySpec)
    domain: Domain = None
    sweep_index: int = 0

    @property
    def dual_bits(self):
        return 1 - self.bits

    def cluster_count(self):
        """k(omega^xi): distinct clusters of the wired quotient graph."""
        roots = np.unique(self.labels)
        return int(roots.size)


@dataclass
class PottsConfig:
    """Per-vertex colors in {1,2,3,4}, constant on each FK cluster."""

    colors: np.ndarray


@dataclass
class ChainStats:
    """Bookkeeping for one chain: sweeps done and mixing diagnostics."""

    sweeps: int = 0
    tau_int: float = 0.5
    monitored: str = "edge_density"


def chain_rng(seed, chain_index=0):
    """The documented seed-splitting rule: (master, chain_index) -> stream."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(int(chain_index),))
    )


# ---------------------------------------------------------------------------
# cluster labelling


def _labels_python(graph: Graph, bits):
    parent = list(range(graph.n_total))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in graph.wiring:
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[rb] = ra
    for k, (u, v) in enumerate(graph._edge_list):
        if bits[k]:
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[rv] = ru
    return np.fromiter((find(x) for x in range(graph.n_total)), dtype=np.int64)


def _labels_scipy(graph: Graph, bits):
    mask = bits.astype(bool)
    rows = np.concatenate([graph.edges[mask, 0], graph.wiring[:, 0]])
    cols = np.concatenate([graph.edges[mask, 1], graph.wiring[:, 1]])
    data = np.ones(rows.size, dtype=np.int8)
    m = coo_matrix((data, (rows, cols)), shape=(graph.n_total, graph.n_total))
    _, labels = connected_components(m, directed=False)
    return labels.astype(np.int64)


def cluster_labels(graph: Graph, bits):
    if graph.n_edges <= _SMALL_GRAPH_EDGES:
        return _labels_python(graph, bits)
    return _labels_scipy(graph, bits)


# ---------------------------------------------------------------------------
# the Edwards-Sokal sweep


def _apply_sweep(graph: Graph, labels, colors, reopen_rand, p):
    # (a) color clusters uniformly: colors are indexed per label slot so
    # each distinct cluster gets an independent uniform color;
    # (b) re-open each monochromatic edge independently with probability p
    if graph.wired_pinned:
        colors = colors.copy()
        colors[labels == labels[graph.n_vertices]] = 1
    cu = colors[labels[graph.edges[:, 0]]]
    cv = colors[labels[graph.edges[:, 1]]]
    return ((cu == cv) & (reopen_rand < p)).astype(np.uint8)


def _sweep(graph: Graph, bits, labels, params: ModelParams, rng):
    colors = rng.integers(1, 5, size=graph.n_total, dtype=np.int8)
    reopen_rand = rng.random(graph.n_edges)
    return _apply_sweep(graph, labels, colors, reopen_rand, params.p)


def es_update(cfg: FkConfig, params: ModelParams = CRITICAL, rng=None) -> FkConfig:
    """One Swendsen-Wang sweep through the Edwards-Sokal coupling.

    Total function on valid configs; the invariant distribution is the
    random-cluster measure on cfg.graph with its boundary wiring.
    """
    if rng is None:
        rng = np.random.default_rng()
    new_bits = _sweep(cfg.graph, cfg.bits, cfg.labels, params, rng)
    return FkConfig(
        graph=cfg.graph,
        bits=new_bits,
        labels=cluster_labels(cfg.graph, new_bits),
        bc=cfg.bc,
        domain=cfg.domain,
        sweep_index=cfg.sweep_index + 1,
    )


def default_burn_in(N):
    return 8 * N


def default_thin(N):
    return max(1, N // 8)


def initial_config(graph: Graph, bc, domain, params, rng):
    bits = (rng.random(graph.n_edges) < params.p).astype(np.uint8)
    return FkConfig(
        graph=graph,
        bits=bits,
        labels=cluster_labels(graph, bits),
        bc=bc,
        domain=domain,
        sweep_index=0,
    )


def sample_chain(
    domain,
    bc: BoundarySpec = BoundarySpec("free"),
    burn_in=None,
    n_samples=1,
    thin=None,
    seed=0,
    chain_index=0,
    params: ModelParams = CRITICAL,
    start: FkConfig = None,
):
    """Generator of FkConfig samples from one seeded chain.

    Identical (seed, chain_index) yields a bit-identical stream.  Samples
    are separated by ``thin`` sweeps after ``burn_in`` initial sweeps;
    defaults are 8N and max(1, N/8).  ``domain`` may be a Domain or a bare
    Graph (in which case ``bc`` must already be encoded in the graph and
    the defaults fall back to N=1).
    """
    if isinstance(domain, Domain):
        graph = Graph.from_domain(domain, bc)
        dom, N = domain, domain.N
    else:
        graph, dom, N = domain, None, 1
    if burn_in is None:
        burn_in = default_burn_in(N)
    if thin is None:
        thin = default_thin(N)
    if burn_in < 0 or n_samples < 0 or thin < 1:
        raise ValueError("need burn_in >= 0, n_samples >= 0, thin >= 1")

    rng = chain_rng(seed, chain_index)
    cfg = start if start is not None else initial_config(graph, bc, dom, params, rng)
    if graph.n_edges <= 64:
        yield from _small_graph_chain(
            cfg, graph, bc, dom, params, rng, burn_in, n_samples, thin
        )
        return
    for _ in range(burn_in):
        cfg = es_update(cfg, params, rng)
    for _ in range(n_samples):
        for _ in range(thin):
            cfg = es_update(cfg, params, rng)
        yield cfg


def _small_graph_chain(cfg, graph, bc, dom, params, rng, burn_in, n_samples, thin):
    # fast path for tiny graphs: random draws come in blocks so the numpy
    # call overhead amortizes over many sweeps, and the union-find runs on
    # plain lists; the sweep semantics are _apply_sweep's, unchanged
    p = params.p
    edge_list = graph._edge_list
    wiring = [(int(a), int(b)) for a, b in graph.wiring]
    n_total = graph.n_total
    pinned = graph.wired_pinned
    pin_slot = graph.n_vertices
    eu = [e[0] for e in edge_list]
    ev = [e[1] for e in edge_list]

    bits = [int(b) for b in cfg.bits]
    total_sweeps = burn_in + n_samples * thin
    block = 512
    done = 0
    sweep_index = cfg.sweep_index
    while done < total_sweeps:
        todo = min(block, total_sweeps - done)
        colors_blk = rng.integers(1, 5, size=(todo, n_total))
        rand_blk = rng.random((todo, len(edge_list)))
        for t in range(todo):
            parent = list(range(n_total))

            def find(x):
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x

            for a, b in wiring:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[rb] = ra
            for k in range(len(edge_list)):
                if bits[k]:
                    ru, rv = find(eu[k]), find(ev[k])
                    if ru != rv:
                        parent[rv] = ru
            colors = colors_blk[t].tolist()
            if pinned:
                pin_root = find(pin_slot)
                for x in range(n_total):
                    if find(x) == pin_root:
                        colors[x] = 1
            rand = rand_blk[t]
            bits = [
                1
                if colors[find(eu[k])] == colors[find(ev[k])] and rand[k] < p
                else 0
                for k in range(len(edge_list))
            ]
            done += 1
            sweep_index += 1
            if done > burn_in and (done - burn_in) % thin == 0:
                arr = np.asarray(bits, dtype=np.uint8)
                yield FkConfig(
                    graph=graph,
                    bits=arr,
                    labels=cluster_labels(graph, arr),
                    bc=bc,
                    domain=dom,
                    sweep_index=sweep_index,
                )


def sample_chain_pool(
    domain,
    bc: BoundarySpec = BoundarySpec("free"),
    n_chains=64,
    burn_in=None,
    n_samples=1,
    thin=1,
    seed=0,
    params: ModelParams = CRITICAL,
):
    """Vectorized pool of independent chains on one small graph.

    Runs ``n_chains`` chains side by side with a replicated union-find, so
    tiny-graph campaigns (the exactness tests) amortize the array
    overhead across chains.  Yields (n_chains, n_edges) uint8 blocks, one
    row per chain, ``n_samples`` times.  The pool draws from a single
    stream seeded by (seed, chain_index=0); chains are independent because
    every replica consumes its own slice of each draw.
    """
    if isinstance(domain, Domain):
        graph = Graph.from_domain(domain, bc)
        N = domain.N
    else:
        graph, N = domain, 1
    if graph.n_edges > 256:
        raise ValueError("the chain pool is a small-graph tool (<= 256 edges)")
    if burn_in is None:
        burn_in = default_burn_in(N)
    if thin is None:
        thin = default_thin(N)

    rng = chain_rng(seed, 0)
    R = int(n_chains)
    V = graph.n_total
    E = graph.n_edges
    eu = graph.edges[:, 0].copy()
    ev = graph.edges[:, 1].copy()
    wiring = graph.wiring
    p = params.p
    rows = np.arange(R)

    bits = (rng.random((R, E)) < p).astype(np.uint8)

    def find_all(parent, x):
        # vectorized root finding for one vertex slot across replicas
        r = parent[rows, x]
        while True:
            rr = parent[rows, r]
            if np.array_equal(rr, r):
                return r
            r = rr

    def sweep(bits, colors, rand):
        parent = np.tile(np.arange(V, dtype=np.int32), (R, 1))
        for a, b in wiring:
            ra = find_all(parent, np.full(R, a))
            rb = find_all(parent, np.full(R, b))
            parent[rows, rb] = ra
        for k in range(E):
            ru = find_all(parent, np.full(R, eu[k]))
            rv = find_all(parent, np.full(R, ev[k]))
            open_mask = bits[:, k].astype(bool)
            parent[rows, np.where(open_mask, rv, rows * 0 + rv)] = np.where(
                open_mask, ru, rv
            )
        # final roots per vertex
        roots = np.empty((R, V), dtype=np.int32)
        for x in range(V):
            roots[:, x] = find_all(parent, np.full(R, x))
        if graph.wired_pinned:
            pin = roots[:, graph.n_vertices]
            colors = colors.copy()
            colors[roots == pin[:, None]] = 1
        cu = np.take_along_axis(colors, roots[:, eu], axis=1)
        cv = np.take_along_axis(colors, roots[:, ev], axis=1)
        return ((cu == cv) & (rand < p)).astype(np.uint8)

    total = burn_in + n_samples * thin
    done = 0
    while done < total:
        colors = rng.integers(1, 5, size=(R, V), dtype=np.int8)
        rand = rng.random((R, E))
        bits = sweep(bits, colors, rand)
        done += 1
        if done > burn_in and (done - burn_in) % thin == 0:
            yield bits.copy()


def potts_from_fk(cfg: FkConfig, rng) -> PottsConfig:
    """Color the clusters of cfg uniformly; the marginal law of the result
    is the 4-state Potts measure coupled to the random-cluster measure."""
    graph = cfg.graph
    colors = rng.integers(1, 5, size=graph.n_total, dtype=np.int8)
    if graph.wired_pinned:
        colors[cfg.labels == cfg.labels[graph.n_vertices]] = 1
    return PottsConfig(colors=colors[cfg.labels[: graph.n_vertices]])


# ---------------------------------------------------------------------------
# exact enumeration oracle


@dataclass
class BruteForceTable:
    """Exact probabilities for every configuration of a small graph.

    ``probs[code]`` is the probability of the configuration whose edge k
    is open iff bit k of ``code`` is set.
    """

    graph: Graph
    params: ModelParams
    probs: np.ndarray
    cluster_counts: np.ndarray

    def marginal_open(self, edge_index):
        codes = np.arange(self.probs.size, dtype=np.int64)
        mask = (codes >> edge_index) & 1
        return float(self.probs[mask == 1].sum())

    def mean_open_edges(self):
        codes = np.arange(self.probs.size, dtype=np.int64)
        popcount = np.zeros_like(codes)
        for k in range(self.graph.n_edges):
            popcount += (codes >> k) & 1
        return float(np.dot(popcount, self.probs))

    def event_probability(self, predicate):
        """Probability of {predicate(bits) is true}, bits a uint8 vector."""
        total = 0.0
        for code in range(self.probs.size):
            bits = _bits_of(code, self.graph.n_edges)
            if predicate(bits):
                total += self.probs[code]
        return total

    def connection_probability(self, u, v):
        total = 0.0
        for code in range(self.probs.size):
            bits = _bits_of(code, self.graph.n_edges)
            labels = cluster_labels(self.graph, bits)
            if labels[u] == labels[v]:
                total += self.probs[code]
        return total


def _bits_of(code, n_edges):
    return np.fromiter(
        ((code >> k) & 1 for k in range(n_edges)), dtype=np.uint8, count=n_edges
    )


def brute_force_distribution(domain, bc=BoundarySpec("free"), params=CRITICAL):
    """Exact phi^xi[omega] for every omega by full enumeration.

    Refuses graphs with more than 24 edges.  Probabilities are normalized
    with a compensated sum and add to 1 within 1e-12.
    """
    graph = (
        Graph.from_domain(domain, bc) if isinstance(domain, Domain) else domain
    )
    E = graph.n_edges
    if E > 24:
        raise ValueError(f"enumeration refused: {E} edges exceeds the 24-edge cap")
    if params.p >= 1.0:
        raise ValueError("enumeration needs p < 1")

    ratio = params.p / (1.0 - params.p)
    n_codes = 1 << E
    weights = np.empty(n_codes, dtype=float)
    kcounts = np.empty(n_codes, dtype=np.int32)

    edge_list = graph._edge_list
    wiring = [(int(a), int(b)) for a, b in graph.wiring]
    n_total = graph.n_total
    for code in range(n_codes):
        parent = list(range(n_total))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in wiring:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[rb] = ra
        n_open = 0
        c = code
        for u, v in edge_list:
            if c & 1:
                n_open += 1
                ru, rv = find(u), find(v)
                if ru != rv:
                    parent[rv] = ru
            c >>= 1
        k = sum(1 for x in range(n_total) if find(x) == x)
        kcounts[code] = k
        weights[code] = (ratio**n_open) * (params.q**k)

    z = math.fsum(weights)
    return BruteForceTable(
        graph=graph, params=params, probs=weights / z, cluster_counts=kcounts
    )


# ---------------------------------------------------------------------------
# diagnostics and the raw-sample dump


def integrated_autocorrelation(series):
    """Integrated autocorrelation time by the initial-positive-sequence
    estimator, clamped below at 0.5."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 2:
        return 0.5
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    if var == 0.0:
        return 0.5
    tau = 0.5
    for t in range(1, n // 2):
        c = float(np.dot(x[: n - t], x[t:])) / ((n - t) * var)
        if c < 0.0:
            break
        tau += c
    return max(tau, 0.5)


def _rle_encode(bits):
    runs = []
    current, count = 0, 0
    for b in bits:
        if int(b) == current:
            count += 1
        else:
            runs.append(count)
            current, count = int(b), 1
    runs.append(count)
    return ",".join(str(r) for r in runs)


def _rle_decode(text, n_edges):
    runs = [int(r) for r in text.split(",")]
    bits = np.zeros(n_edges, dtype=np.uint8)
    pos, value = 0, 0
    for r in runs:
        bits[pos : pos + r] = value
        pos += r
        value ^= 1
    if pos != n_edges:
        raise ValueError("run lengths do not cover the edge vector")
    return bits


def dump_samples(path, stream, domain, bc, seed):
    """Write samples as run-length-encoded open-edge bitmaps.

    Format (one record per line after the header):
        # fklab samples v1
        # N=<N> delta=<delta> bc=<kind> seed=<seed> edges=<E>
        # rle runs alternate starting with the closed (0) state
        <sweep_index> <comma separated run lengths>
    """
    with open(path, "w") as fh:
        fh.write("# fklab samples v1\n")
        fh.write(
            f"# N={domain.N} delta={domain.delta} bc={bc.kind} "
            f"seed={seed} edges={domain.n_edges}\n"
        )
        fh.write("# rle runs alternate starting with the closed (0) state\n")
        count = 0
        for cfg in stream:
            fh.write(f"{cfg.sweep_index} {_rle_encode(cfg.bits)}\n")
            count += 1
    return count


def load_samples(path):
    """Yield (sweep_index, bits) records from a dump file."""
    with open(path) as fh:
        header = fh.readline()
        if "fklab samples v1" not in header:
            raise ValueError(f"{path}: not a fklab sample dump")
        meta_line = fh.readline().strip("#\n ").split()
        meta = dict(kv.split("=") for kv in meta_line)
        n_edges = int(meta["edges"])
        fh.readline()
        for line in fh:
            if not line.strip():
                continue
            idx, rle = line.split(None, 1)
            yield int(idx), _rle_decode(rle.strip(), n_edges)
