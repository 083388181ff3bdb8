"""Experiment driver: one pass over a chain family, many measurements.

A measurement turns one sample into one or more named scalars; a bundle
evaluates a list of measurements on every sample of every chain and
reduces each named series to an estimate with batch-mean errors.  Chains
are independent and merged in chain-index order, so results do not depend
on scheduling.  Chain state checkpoints make long campaigns resumable.
"""

import math
import os
import pickle
import time
from dataclasses import dataclass

import numpy as np

from .lattice import BoundarySpec, Domain
from .loops import BallSystem
from .observables import (
    TestFunction,
    crossing_indicator,
    estimate_from_values,
    four_ball_values,
    pi1_indicator,
    pi2_indicator,
    pi2k_count,
    tilde_pi1_indicator,
    two_point_indicator,
)
from .sampler import (
    CRITICAL,
    Graph,
    chain_rng,
    cluster_labels,
    es_update,
    initial_config,
    default_burn_in,
    default_thin,
)

__all__ = ["Measurement", "measurement_from_dict", "run_bundle", "BundleResult"]


class Measurement:
    """Base: subclasses provide names() and evaluate(cfg, ctx) -> dict."""

    def prepare(self, domain):
        pass

    def names(self):
        raise NotImplementedError

    def evaluate(self, cfg, ctx):
        raise NotImplementedError


class _Ctx:
    # per-sample cache shared between measurements (ball systems, traces)
    def __init__(self):
        self.traces = {}

    def trace(self, system, cfg):
        key = id(system)
        if key not in self.traces:
            self.traces[key] = system.trace(cfg)
        return self.traces[key]


class Pi1(Measurement):
    def __init__(self, r, R):
        self.r, self.R = int(r), int(R)

    def names(self):
        return [f"pi1_{self.r}_{self.R}"]

    def evaluate(self, cfg, ctx):
        return {self.names()[0]: pi1_indicator(cfg, self.r, self.R)}


class Pi2(Measurement):
    def __init__(self, r, R):
        self.r, self.R = int(r), int(R)

    def names(self):
        return [f"pi2_{self.r}_{self.R}"]

    def evaluate(self, cfg, ctx):
        return {self.names()[0]: pi2_indicator(cfg, self.r, self.R)}


class Pi2k(Measurement):
    def __init__(self, r, R, k):
        self.r, self.R, self.k = int(r), int(R), int(k)

    def names(self):
        return [f"pi{2 * self.k}_{self.r}_{self.R}"]

    def evaluate(self, cfg, ctx):
        return {self.names()[0]: int(pi2k_count(cfg, self.r, self.R) >= self.k)}


class TwoPoint(Measurement):
    def __init__(self, x):
        self.x = tuple(x)

    def names(self):
        return [f"two_point_{self.x[0]:g}_{self.x[1]:g}"]

    def evaluate(self, cfg, ctx):
        return {self.names()[0]: two_point_indicator(cfg, self.x)}


class Crossing(Measurement):
    def __init__(self, r, corner=(0, 0)):
        self.r = int(r)
        self.corner = tuple(corner)

    def names(self):
        return [f"crossing_{self.r}_{self.corner[0]}_{self.corner[1]}"]

    def evaluate(self, cfg, ctx):
        return {self.names()[0]: crossing_indicator(cfg, self.r, self.corner)}


class MixingPair(Measurement):
    """Joint and marginal indicators for a local event in Lambda_r and a
    far event outside Lambda_R (crossings of two r/2-sized squares)."""

    def __init__(self, r, R):
        self.r, self.R = int(r), int(R)
        h = self.r // 2
        self.near_corner = (-h, -h)
        self.far_corner = (self.R + h, -h)

    def names(self):
        tag = f"{self.r}_{self.R}"
        return [f"mix_a_{tag}", f"mix_b_{tag}", f"mix_ab_{tag}"]

    def evaluate(self, cfg, ctx):
        a = crossing_indicator(cfg, self.r, self.near_corner)
        b = crossing_indicator(cfg, self.r, self.far_corner)
        na, nb, nab = self.names()
        return {na: a, nb: b, nab: a * b}


class AF(Measurement):
    """Loop cosine product for a mean-zero ball pattern, and optionally
    the scaled products (empirical characteristic values)."""

    def __init__(self, F: TestFunction, label="af", scales=(1.0,)):
        if not F.mean_zero:
            raise ValueError("A_F measurement needs a mean-zero pattern")
        self.F = F
        self.label = label
        self.scales = tuple(scales)
        self.system = None

    def prepare(self, domain):
        self.system = BallSystem(domain, self.F.centers, self.F.eps)

    def names(self):
        return [
            self.label if t == 1.0 else f"{self.label}_t{t:g}" for t in self.scales
        ]

    def evaluate(self, cfg, ctx):
        loops = ctx.trace(self.system, cfg)
        integrals = [self.system.loop_integral(lo, self.F.charges) for lo in loops]
        out = {}
        for name, t in zip(self.names(), self.scales):
            v = 1.0
            for a in integrals:
                if a != 0.0:
                    v *= math.cos(t * a)
            if not -1.0 - 1e-12 <= v <= 1.0 + 1e-12:
                raise AssertionError(f"A_F sample {v} outside [-1, 1]")
            out[name] = v
        return out


class TildePi1(Measurement):
    def __init__(self, x, y, eps):
        self.x, self.y, self.eps = tuple(x), tuple(y), float(eps)
        self.system = None

    def prepare(self, domain):
        self.system = BallSystem(domain, [self.x, self.y], self.eps)

    def names(self):
        return ["tilde_pi1", "tilde_pi1_conn_gap"]

    def evaluate(self, cfg, ctx):
        event, connected = tilde_pi1_indicator(cfg, self.system)
        return {
            "tilde_pi1": event,
            "tilde_pi1_conn_gap": int(event and not connected),
        }


class FourBall(Measurement):
    def __init__(self, x, y, eps, k=1):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.eps = float(eps)
        self.k = int(k)
        if not (np.hypot(*self.x) / 16.0 >= np.hypot(*self.y) >= 4.0 * eps):
            raise ValueError("regime violation: need |x|/16 >= |y| >= 4*eps")
        self.system = None

    def prepare(self, domain):
        self.system = BallSystem(
            domain,
            [(0.0, 0.0), tuple(self.y), tuple(self.x), tuple(self.x + self.y)],
            self.eps,
        )

    def names(self):
        return ["tilde_pi2k", "tilde_delta"]

    def evaluate(self, cfg, ctx):
        p, dv = four_ball_values(cfg, self.system, k=self.k)
        return {"tilde_pi2k": p, "tilde_delta": dv}


class LRPair(Measurement):
    """Indicators of L(1) n R(1) and L(1) n R(0): the left ball pair
    joined by a primal path, the right pair by a primal (resp. dual)
    path.  The influence identity predicts the difference of their
    probabilities is nonnegative."""

    def __init__(self, x, y, eps):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.eps = float(eps)
        self.system = None

    def prepare(self, domain):
        self.system = BallSystem(
            domain,
            [(0.0, 0.0), tuple(self.y), tuple(self.x), tuple(self.x + self.y)],
            self.eps,
        )

    def names(self):
        return ["lr_11", "lr_10"]

    def evaluate(self, cfg, ctx):
        from .observables import _dual_ball_connected, _primal_ball_connected

        left = _primal_ball_connected(cfg, self.system, 0, 1)
        if not left:
            return {"lr_11": 0, "lr_10": 0}
        right_primal = _primal_ball_connected(cfg, self.system, 2, 3)
        right_dual = _dual_ball_connected(cfg, self.system, 2, 3)
        return {"lr_11": int(right_primal), "lr_10": int(right_dual)}


class CDelta(Measurement):
    """Rejection-conditioned single-ball cosine product.

    A sample is rejected when some loop avoiding the ball surrounds it;
    detection is geometric (every such loop crosses the upward ray from
    the ball center), with a primal-arm short circuit: an open path from
    the ball to the wired boundary makes a surrounding loop impossible.
    Rejected samples yield NaN, filtered in the reduction.
    """

    def __init__(self, eps, label=None):
        self.eps = float(eps)
        self.label = label or f"cdelta_{eps:g}"
        self.system = None
        self.ray_system = None

    def prepare(self, domain):
        if domain.N * domain.delta < 32 * self.eps:
            raise ValueError("need box radius >= 32*eps for the conditioning")
        self.system = BallSystem(domain, [(0.0, 0.0)], self.eps)
        self.ray_system = BallSystem(domain, [(0.0, 0.0)], self.eps, rays=(0,))

    def names(self):
        return [self.label]

    def evaluate(self, cfg, ctx):
        from .observables import has_surrounding_loop

        if has_surrounding_loop(cfg, self.ray_system):
            return {self.label: float("nan")}
        loops = ctx.trace(self.system, cfg)
        v = 1.0
        for lo in loops:
            a = self.system.loop_integral(lo, (1,))
            if a != 0.0:
                v *= math.cos(a)
        return {self.label: v}


class LoopTail(Measurement):
    """Indicators of E(eps, eta, lambda) for a ladder of lambdas."""

    def __init__(self, eps, eta, lambdas):
        if not (0 < eta < 1):
            raise ValueError("need 0 < eta < 1")
        self.eps, self.eta = float(eps), float(eta)
        self.lambdas = tuple(lambdas)
        self.system = None

    def prepare(self, domain):
        self.system = BallSystem(domain, [(0.0, 0.0)], self.eps)

    def names(self):
        return [f"loop_tail_{lam:g}" for lam in self.lambdas]

    def evaluate(self, cfg, ctx):
        loops = ctx.trace(self.system, cfg)
        faces = self.system.face_sets[0]
        threshold = self.eta * self.eps / 2.0
        count = 0
        for lo in loops:
            v = lo.verts
            cx, cy = self.system._c2[0]
            d2 = (v[:, 0] - cx) ** 2 + (v[:, 1] - cy) ** 2
            if d2.min() > self.system._touch2:
                continue
            if lo.touched_faces().isdisjoint(faces):
                continue
            if lo.diameter() >= threshold:
                count += 1
        return {
            name: int(count > lam / (self.eta * self.eta))
            for name, lam in zip(self.names(), self.lambdas)
        }


class EdgeDensity(Measurement):
    def names(self):
        return ["edge_density"]

    def evaluate(self, cfg, ctx):
        return {"edge_density": float(cfg.bits.mean())}


_REGISTRY = {
    "pi1": lambda s: Pi1(s["r"], s["R"]),
    "pi2": lambda s: Pi2(s["r"], s["R"]),
    "pi2k": lambda s: Pi2k(s["r"], s["R"], s["k"]),
    "two_point": lambda s: TwoPoint(s["x"]),
    "crossing": lambda s: Crossing(s["r"], s.get("corner", (0, 0))),
    "mixing": lambda s: MixingPair(s["r"], s["R"]),
    "af": lambda s: AF(
        TestFunction(
            centers=tuple(map(tuple, s["centers"])),
            charges=tuple(s["charges"]),
            eps=s["eps"],
        ),
        label=s.get("label", "af"),
        scales=tuple(s.get("scales", (1.0,))),
    ),
    "tilde_pi1": lambda s: TildePi1(s["x"], s["y"], s["eps"]),
    "four_ball": lambda s: FourBall(s["x"], s["y"], s["eps"], s.get("k", 1)),
    "lr_pair": lambda s: LRPair(s["x"], s["y"], s["eps"]),
    "cdelta": lambda s: CDelta(s["eps"], s.get("label")),
    "loop_tail": lambda s: LoopTail(s["eps"], s["eta"], s["lambdas"]),
    "edge_density": lambda s: EdgeDensity(),
}


def measurement_from_dict(spec):
    kind = spec["type"]
    if kind not in _REGISTRY:
        raise ValueError(f"unknown measurement type {kind!r}")
    return _REGISTRY[kind](spec)


@dataclass
class BundleResult:
    """Named estimates plus the raw per-chain series for post-processing."""

    results: dict
    series: dict  # name -> list of per-chain arrays
    domain: Domain
    bc: BoundarySpec
    seed: int
    n_chains: int
    wall_time: float


def _chain_pass(
    domain,
    bc,
    measurements,
    seed,
    chain_index,
    burn_in,
    n_samples,
    thin,
    checkpoint_path=None,
    checkpoint_every=0,
    log=None,
):
    rng = chain_rng(seed, chain_index)
    graph = Graph.from_domain(domain, bc)
    values = {name: [] for m in measurements for name in m.names()}
    cfg = None
    done = 0
    if checkpoint_path and os.path.exists(checkpoint_path):
        with open(checkpoint_path, "rb") as fh:
            state = pickle.load(fh)
        rng = state["rng"]
        done = state["done"]
        values = state["values"]
        from .sampler import FkConfig

        cfg = FkConfig(
            graph=graph,
            bits=state["bits"],
            labels=cluster_labels(graph, state["bits"]),
            bc=bc,
            domain=domain,
            sweep_index=state["sweep_index"],
        )
    if cfg is None:
        cfg = initial_config(graph, bc, domain, CRITICAL, rng)
        for _ in range(burn_in):
            cfg = es_update(cfg, CRITICAL, rng)
    for i in range(done, n_samples):
        for _ in range(thin):
            cfg = es_update(cfg, CRITICAL, rng)
        ctx = _Ctx()
        for m in measurements:
            for name, v in m.evaluate(cfg, ctx).items():
                values[name].append(v)
        if checkpoint_path and checkpoint_every and (i + 1) % checkpoint_every == 0:
            tmp = checkpoint_path + ".tmp"
            with open(tmp, "wb") as fh:
                pickle.dump(
                    {
                        "rng": rng,
                        "done": i + 1,
                        "values": values,
                        "bits": cfg.bits,
                        "sweep_index": cfg.sweep_index,
                    },
                    fh,
                )
            os.replace(tmp, checkpoint_path)
            if log:
                log(f"chain {chain_index}: {i + 1}/{n_samples} samples")
    return {name: np.asarray(v, dtype=float) for name, v in values.items()}


def run_bundle(
    domain,
    bc,
    measurement_specs,
    seed,
    n_chains=1,
    burn_in=None,
    n_samples=100,
    thin=None,
    threads=1,
    checkpoint_dir=None,
    checkpoint_every=0,
    log=None,
) -> BundleResult:
    """Run the chain family and reduce every measurement.

    Measurements returning NaN for a sample (rejection-conditioned ones)
    are filtered per chain before the reduction; their acceptance rate is
    recorded in the estimate metadata.
    """
    t0 = time.time()
    if burn_in is None:
        burn_in = default_burn_in(domain.N)
    if thin is None:
        thin = default_thin(domain.N)
    measurements = [
        measurement_from_dict(s) if isinstance(s, dict) else s
        for s in measurement_specs
    ]
    for m in measurements:
        m.prepare(domain)

    jobs = []
    for c in range(n_chains):
        path = (
            os.path.join(checkpoint_dir, f"chain_{c}.pkl") if checkpoint_dir else None
        )
        jobs.append(
            dict(
                domain=domain,
                bc=bc,
                measurements=measurements,
                seed=seed,
                chain_index=c,
                burn_in=burn_in,
                n_samples=n_samples,
                thin=thin,
                checkpoint_path=path,
                checkpoint_every=checkpoint_every,
                log=log,
            )
        )
    if threads > 1:
        import multiprocessing as mp

        with mp.Pool(threads) as pool:
            chain_values = pool.map(_chain_pass_star, [(j,) for j in jobs])
    else:
        chain_values = [_chain_pass(**j) for j in jobs]

    series = {}
    for name in chain_values[0]:
        series[name] = [cv[name] for cv in chain_values]
    results = {}
    for name, chains in series.items():
        kept = []
        n_rej = 0
        for arr in chains:
            ok = ~np.isnan(arr)
            n_rej += int((~ok).sum())
            kept.append(arr[ok])
        meta = {"observable": name, "N": domain.N, "delta": domain.delta,
                "bc": bc.kind, "seed": seed}
        if n_rej:
            total = sum(len(a) for a in chains)
            meta["acceptance_rate"] = (total - n_rej) / total
        results[name] = estimate_from_values(kept, meta=meta)
    return BundleResult(
        results=results,
        series=series,
        domain=domain,
        bc=bc,
        seed=seed,
        n_chains=n_chains,
        wall_time=time.time() - t0,
    )


def _chain_pass_star(args):
    (job,) = args
    job = dict(job)
    job["log"] = None  # not picklable across workers
    return _chain_pass(**job)
