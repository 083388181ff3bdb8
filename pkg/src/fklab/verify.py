"""Fast property suites behind `fklab verify`.

Each suite prints one PASS/FAIL line; any failure makes the command exit
nonzero.  The suites re-run the frozen correctness anchors from a fresh
checkout in a few minutes: exact sampler distributions on tiny graphs,
the orientation-average cosine identity, the loop-count identity, and
the quadrature goldens.
"""

import itertools
import math

import numpy as np
from scipy import stats

from .lattice import BoundarySpec, Domain
from .sampler import (
    FkConfig,
    Graph,
    brute_force_distribution,
    cluster_labels,
    sample_chain,
)

__all__ = ["run_all", "SUITES"]


def _chi_square_ok(counts, probs, alpha_quantile=0.999):
    n = counts.sum()
    expected = probs * n
    order = np.argsort(expected)
    counts, expected = counts[order], expected[order]
    # pool low-expectation cells so the chi-square approximation holds
    cells_c, cells_e = [], []
    acc_c = acc_e = 0.0
    for c, e in zip(counts, expected):
        acc_c += c
        acc_e += e
        if acc_e >= 5.0:
            cells_c.append(acc_c)
            cells_e.append(acc_e)
            acc_c = acc_e = 0.0
    if acc_e > 0:
        cells_c[-1] += acc_c
        cells_e[-1] += acc_e
    cells_c = np.asarray(cells_c)
    cells_e = np.asarray(cells_e)
    chi2 = float(((cells_c - cells_e) ** 2 / cells_e).sum())
    dof = len(cells_e) - 1
    return chi2 < stats.chi2.ppf(alpha_quantile, dof), chi2, dof


def suite_enumeration_oracle(n_samples=200_000):
    """Chain laws on tiny graphs against exact enumeration."""
    # exact single-edge values
    g_free = Graph(2, [(0, 1)])
    g_wired = Graph(2, [(0, 1)], boundary_groups=[[0, 1]], wired_pinned=True)
    if abs(brute_force_distribution(g_free).probs[1] - 1 / 3) > 1e-12:
        return False, "single-edge free marginal"
    if abs(brute_force_distribution(g_wired).probs[1] - 2 / 3) > 1e-12:
        return False, "single-edge wired marginal"

    from .sampler import sample_chain_pool

    domain = Domain(1)
    for kind in ("free", "wired"):
        bc = BoundarySpec(kind)
        table = brute_force_distribution(domain, bc)
        counts = np.zeros(1 << domain.n_edges, dtype=np.int64)
        weights = 1 << np.arange(domain.n_edges, dtype=np.int64)
        pool = sample_chain_pool(
            domain, bc, n_chains=64, burn_in=64, n_samples=n_samples // 64,
            thin=4, seed=20260808,
        )
        for block in pool:
            counts += np.bincount(block @ weights, minlength=counts.size)
        ok, chi2, dof = _chi_square_ok(counts, table.probs)
        if not ok:
            return False, f"N=1 {kind}: chi2={chi2:.1f} (dof={dof})"
    # exact bc monotonicity of the mean edge count
    mw = brute_force_distribution(domain, BoundarySpec("wired")).mean_open_edges()
    mf = brute_force_distribution(domain, BoundarySpec("free")).mean_open_edges()
    if not mw > mf:
        return False, "wired mean density not above free"
    return True, f"N=1 free+wired chi-square ok at n={n_samples}"


def suite_bkw_cosine(n_configs=20, tol=1e-10):
    """Orientation-average of e^{i integral F h} equals the cosine product."""
    from .heightfield import face_weights, loop_integral
    from .loops import extract_loops
    from .observables import TestFunction

    domain = Domain(6)
    F = TestFunction.two_ball((3.0, 0.0), eps=1.2)
    weights = face_weights(F, domain)
    worst = 0.0
    stream = sample_chain(
        domain, BoundarySpec("free"), burn_in=64, n_samples=n_configs, thin=4,
        seed=11,
    )
    for cfg in stream:
        ls = extract_loops(cfg)
        a = np.array([loop_integral(lo, F) for lo in ls])
        A = np.array(
            [sum(weights.get(f, 0.0) for f in lo.interior_faces()) for lo in ls]
        )
        meet = np.nonzero((np.abs(a) > 1e-15) | (np.abs(A) > 1e-15))[0]
        if len(meet) > 18:
            continue
        target = float(np.prod(np.cos(a)))
        total = 0.0
        for signs in itertools.product((-1.0, 1.0), repeat=len(meet)):
            total += math.cos(float(np.dot(signs, A[meet])))
        worst = max(worst, abs(total / 2 ** len(meet) - target))
    if worst > tol:
        return False, f"worst deviation {worst:.2e}"
    return True, f"worst deviation {worst:.2e} over {n_configs} configs"


def suite_euler_loops(n_random=500):
    """Loop count equals k(omega) + k(omega*) - 1."""
    from .loops import euler_counts, extract_loops

    domain = Domain(1)
    g = Graph.from_domain(domain, BoundarySpec("free"))
    for code in range(1 << domain.n_edges):
        bits = ((code >> np.arange(domain.n_edges)) & 1).astype(np.uint8)
        cfg = FkConfig(g, bits, cluster_labels(g, bits), domain=domain)
        kf, kd = euler_counts(domain, bits)
        if len(extract_loops(cfg)) != kf + kd - 1:
            return False, f"violation at N=1 code {code}"
    rng = np.random.default_rng(2)
    domain = Domain(4)
    g = Graph.from_domain(domain, BoundarySpec("free"))
    for _ in range(n_random):
        bits = (rng.random(domain.n_edges) < rng.uniform(0.1, 0.9)).astype(np.uint8)
        cfg = FkConfig(g, bits, cluster_labels(g, bits), domain=domain)
        kf, kd = euler_counts(domain, bits)
        if len(extract_loops(cfg)) != kf + kd - 1:
            return False, "violation at N=4"
    return True, f"exhaustive N=1 plus {n_random} random N=4 configs"


def suite_quadrature_goldens():
    """Self-term constant, mean-value identity, two-ball closed form."""
    from .gffpredict import b0, b_eps, gff_characteristic
    from .observables import TestFunction

    if abs(b0() + 1.0 / 32.0) > 1e-9:
        return False, f"b0 = {b0()}"
    for dist, eps in ((0.5, 0.125), (0.30, 0.125), (1.0, 0.25)):
        val, _ = b_eps(dist, eps)
        if abs(val) > 1e-8:
            return False, f"b_eps({dist}, {eps}) = {val:.2e}"
    F = TestFunction.two_ball((0.5, 0.0), eps=0.125)
    golden = math.exp(-1.0 / 16.0) * 0.25**0.25
    if abs(gff_characteristic(F) - golden) > 1e-8:
        return False, "two-ball characteristic"
    return True, "b0, mean-value identity and two-ball golden reproduced"


SUITES = [
    ("quadrature-goldens", suite_quadrature_goldens),
    ("euler-loop-count", suite_euler_loops),
    ("bkw-cosine-identity", suite_bkw_cosine),
    ("enumeration-oracle", suite_enumeration_oracle),
]


def run_all():
    failures = 0
    for name, fn in SUITES:
        try:
            ok, detail = fn()
        except Exception as e:  # a crashed suite is a failed suite
            ok, detail = False, f"exception: {e!r}"
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", flush=True)
        failures += 0 if ok else 1
    return 1 if failures else 0
