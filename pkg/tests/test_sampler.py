"""Sampler correctness against the exact enumeration oracle.

The heavyweight chi-square exactness runs (10^6 samples) live in the
acceptance module; here the same machinery runs at smoke scale together
with the exact identities that need no sampling at all.
"""

import numpy as np
import pytest

from fklab.lattice import BoundarySpec, Domain
from fklab.sampler import (
    CRITICAL,
    FkConfig,
    Graph,
    ModelParams,
    brute_force_distribution,
    chain_rng,
    cluster_labels,
    dump_samples,
    es_update,
    integrated_autocorrelation,
    load_samples,
    potts_from_fk,
    sample_chain,
)

SINGLE_EDGE = Graph(2, [(0, 1)])
SINGLE_EDGE_WIRED = Graph(2, [(0, 1)], boundary_groups=[[0, 1]], wired_pinned=True)


def make_cfg(graph, bits, domain=None):
    bits = np.asarray(bits, dtype=np.uint8)
    return FkConfig(graph, bits, cluster_labels(graph, bits), domain=domain)


class TestEnumerationOracle:
    def test_single_edge_free(self):
        t = brute_force_distribution(SINGLE_EDGE)
        assert t.probs[1] == pytest.approx(1 / 3, abs=1e-14)

    def test_single_edge_wired_together(self):
        t = brute_force_distribution(SINGLE_EDGE_WIRED)
        assert t.probs[1] == pytest.approx(2 / 3, abs=1e-14)

    def test_probabilities_sum_to_one(self):
        for bc in ("free", "wired"):
            t = brute_force_distribution(Domain(1), BoundarySpec(bc))
            assert abs(t.probs.sum() - 1.0) < 1e-12

    def test_q1_is_product_bernoulli(self):
        params = ModelParams(p=0.37, q=1.0)
        t = brute_force_distribution(Domain(1), BoundarySpec("free"), params)
        codes = np.arange(t.probs.size)
        n_open = sum((codes >> k) & 1 for k in range(12))
        expected = 0.37**n_open * 0.63 ** (12 - n_open)
        assert np.allclose(t.probs, expected, atol=1e-12)

    def test_refuses_large_graphs(self):
        with pytest.raises(ValueError, match="24"):
            brute_force_distribution(Domain(2), BoundarySpec("free"))

    def test_edge_marginals_constant_on_symmetry_orbits(self):
        d = Domain(1)
        t = brute_force_distribution(d, BoundarySpec("free"))
        marg = [t.marginal_open(k) for k in range(12)]
        center, boundary = [], []
        for k in range(12):
            e = d.edge(k)
            if (0, 0) in (e.a, e.b):
                center.append(marg[k])
            else:
                boundary.append(marg[k])
        assert len(center) == 4 and len(boundary) == 8
        assert np.allclose(center, center[0], atol=1e-12)
        assert np.allclose(boundary, boundary[0], atol=1e-12)
        assert abs(center[0] - boundary[0]) > 1e-6

    def test_wired_mean_density_exceeds_free(self):
        mw = brute_force_distribution(Domain(1), BoundarySpec("wired"))
        mf = brute_force_distribution(Domain(1), BoundarySpec("free"))
        assert mw.mean_open_edges() > mf.mean_open_edges()


class TestSweep:
    def test_all_open_is_fixed_point_at_p_one(self):
        params = ModelParams(p=1.0)
        cfg = make_cfg(SINGLE_EDGE_WIRED, [1])
        rng = chain_rng(0)
        for _ in range(8):
            cfg = es_update(cfg, params, rng)
            assert cfg.bits.tolist() == [1]
        d = Domain(1)
        g = Graph.from_domain(d, BoundarySpec("free"))
        cfg = make_cfg(g, np.ones(12), domain=d)
        for _ in range(4):
            cfg = es_update(cfg, params, rng)
            assert cfg.bits.all()

    def test_deterministic_streams(self):
        d = Domain(1)
        a = [c.bits.copy() for c in sample_chain(d, seed=42, n_samples=16, burn_in=4, thin=2)]
        b = [c.bits.copy() for c in sample_chain(d, seed=42, n_samples=16, burn_in=4, thin=2)]
        for x, y in zip(a, b):
            assert np.array_equal(x, y)
        c = [c.bits.copy() for c in sample_chain(d, seed=43, n_samples=16, burn_in=4, thin=2)]
        assert any(not np.array_equal(x, y) for x, y in zip(a, c))

    def test_empty_stream(self):
        assert list(sample_chain(Domain(1), n_samples=0)) == []

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            list(sample_chain(Domain(1), n_samples=2, thin=0))

    def test_single_edge_stationarity(self):
        # empirical P[open] matches the oracle on both wirings
        for graph, target in ((SINGLE_EDGE, 1 / 3), (SINGLE_EDGE_WIRED, 2 / 3)):
            rng = chain_rng(7)
            cfg = make_cfg(graph, [0])
            hits = 0
            n = 40_000
            for _ in range(64):
                cfg = es_update(cfg, CRITICAL, rng)
            for _ in range(n):
                cfg = es_update(cfg, CRITICAL, rng)
                hits += int(cfg.bits[0])
            se = np.sqrt(target * (1 - target) / n)
            assert abs(hits / n - target) < 5 * se

    def test_wired_stochastically_denser(self):
        # exact means from the oracle, then sampled means within error
        d = Domain(1)
        exact = {
            bc: brute_force_distribution(d, BoundarySpec(bc)).mean_open_edges()
            for bc in ("free", "wired")
        }
        assert exact["wired"] > exact["free"]
        means = {}
        for bc in ("free", "wired"):
            vals = [
                c.bits.sum()
                for c in sample_chain(
                    d, BoundarySpec(bc), burn_in=64, n_samples=20_000, thin=1, seed=5
                )
            ]
            means[bc] = np.mean(vals)
            se = np.std(vals) / np.sqrt(len(vals) / 4)  # crude correlation slack
            assert abs(means[bc] - exact[bc]) < 5 * se
        assert means["wired"] > means["free"]


class TestChiSquareSmoke:
    # the full 10^6-sample runs are acceptance criterion 1
    def test_n1_free_smoke(self):
        d = Domain(1)
        table = brute_force_distribution(d, BoundarySpec("free"))
        weights = 1 << np.arange(12, dtype=np.int64)
        counts = np.zeros(4096, dtype=np.int64)
        for cfg in sample_chain(d, burn_in=64, n_samples=60_000, thin=4, seed=3):
            counts[int(cfg.bits @ weights)] += 1
        from fklab.verify import _chi_square_ok

        ok, chi2, dof = _chi_square_ok(counts, table.probs)
        assert ok, f"chi2={chi2} at dof={dof}"

    def test_pool_matches_single_chain_marginals(self):
        from fklab.sampler import sample_chain_pool

        d = Domain(1)
        # pooled chains and the sequential sampler target one measure:
        # compare per-edge marginals
        counts_pool = np.zeros(12)
        n_pool = 0
        for block in sample_chain_pool(d, n_chains=16, burn_in=32,
                                       n_samples=1500, thin=2, seed=9):
            counts_pool += block.sum(axis=0)
            n_pool += block.shape[0]
        single = np.zeros(12)
        n_single = 0
        for cfg in sample_chain(d, burn_in=32, n_samples=24_000, thin=2, seed=10):
            single += cfg.bits
            n_single += 1
        se = np.sqrt(0.25 / n_pool) + np.sqrt(0.25 / n_single)
        assert np.all(np.abs(counts_pool / n_pool - single / n_single) < 6 * se)

    def test_pool_deterministic(self):
        from fklab.sampler import sample_chain_pool

        d = Domain(1)
        a = list(sample_chain_pool(d, n_chains=4, burn_in=8, n_samples=5,
                                   thin=1, seed=11))
        b = list(sample_chain_pool(d, n_chains=4, burn_in=8, n_samples=5,
                                   thin=1, seed=11))
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_pool_rejects_large_graphs(self):
        from fklab.sampler import sample_chain_pool

        with pytest.raises(ValueError, match="small-graph"):
            list(sample_chain_pool(Domain(16), n_chains=2, n_samples=1))


class TestPotts:
    def test_all_closed_gives_iid_uniform(self):
        rng = chain_rng(1)
        cfg = make_cfg(SINGLE_EDGE, [0])
        pairs = np.array(
            [potts_from_fk(cfg, rng).colors for _ in range(20_000)]
        )
        same = (pairs[:, 0] == pairs[:, 1]).mean()
        assert abs(same - 0.25) < 0.02
        for color in (1, 2, 3, 4):
            assert abs((pairs[:, 0] == color).mean() - 0.25) < 0.02

    def test_all_open_single_color(self):
        d = Domain(1)
        g = Graph.from_domain(d, BoundarySpec("free"))
        cfg = make_cfg(g, np.ones(12), domain=d)
        rng = chain_rng(2)
        for _ in range(32):
            colors = potts_from_fk(cfg, rng).colors
            assert (colors == colors[0]).all()

    def test_open_edge_forces_equality(self):
        rng = chain_rng(3)
        cfg = make_cfg(SINGLE_EDGE, [1])
        for _ in range(32):
            colors = potts_from_fk(cfg, rng).colors
            assert colors[0] == colors[1]

    def test_edwards_sokal_identity_sampled(self):
        # empirical Potts correlation against the enumeration oracle
        d = Domain(1)
        table = brute_force_distribution(d, BoundarySpec("free"))
        u, v = d.vertex_index((0, 0)), d.vertex_index((1, 1))
        exact = 0.25 + 0.75 * table.connection_probability(u, v)
        rng = chain_rng(17)
        hits = 0
        n = 12_000
        for cfg in sample_chain(d, burn_in=64, n_samples=n, thin=1, seed=18):
            colors = potts_from_fk(cfg, rng).colors
            hits += int(colors[u] == colors[v])
        se = np.sqrt(exact * (1 - exact) / (n / 4))  # correlation slack
        assert abs(hits / n - exact) < 5 * se

    def test_self_duality_proxy(self):
        # primal crossing of a rectangle vs dual crossing of the rotated
        # congruent rectangle agree within error bars in the bulk
        d = Domain(32)
        a = 8

        def primal_cross(cfg):
            # horizontal crossing of [-a, a] x [-a/2, a/2]
            key = getattr(primal_cross, "sq", None)
            if key is None:
                vi, vj = d._vi, d._vj
                inside = (np.abs(vi) <= a) & (np.abs(vj) <= a // 2)
                primal_cross.sq = inside
            inside = primal_cross.sq
            e = d.edge_endpoints
            keep = cfg.bits.astype(bool) & inside[e[:, 0]] & inside[e[:, 1]]
            from scipy.sparse import coo_matrix
            from scipy.sparse.csgraph import connected_components

            m = coo_matrix(
                (np.ones(int(keep.sum()), dtype=np.int8),
                 (e[keep, 0], e[keep, 1])),
                shape=(d.n_vertices, d.n_vertices),
            )
            _, lab = connected_components(m, directed=False)
            side, n0 = d.side, d.N
            ys = np.arange(-(a // 2), a // 2 + 1)
            left = lab[(-a + n0) * side + (ys + n0)]
            right = lab[(a + n0) * side + (ys + n0)]
            return int(bool(set(left.tolist()) & set(right.tolist())))

        def dual_cross(cfg):
            # dual-open horizontal crossing of the rotated rectangle
            # [-a/2, a/2] x [-a, a], on the dual (face) lattice, crossed
            # in its short direction to stay congruent to the primal event
            duals = d.edge_dual_faces()
            closed = np.asarray(cfg.bits) == 0
            lim = 2 * d.N + 1
            parent = {}

            def find(x):
                while parent.setdefault(x, x) != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x

            def inside(f):
                return abs(f[0]) <= a and abs(f[1]) <= 2 * a

            for f1, f2 in duals[closed]:
                f1, f2 = tuple(f1), tuple(f2)
                if f1[0] == lim or f2[0] == lim:
                    continue
                if inside(f1) and inside(f2):
                    ra, rb = find(f1), find(f2)
                    if ra != rb:
                        parent[rb] = ra
            # crossing in the long (vertical) direction of the rotated
            # rectangle, congruent to the primal long-direction crossing
            bottom = {find((x, -2 * a + 1)) for x in range(-a + 1, a, 2)}
            top = {find((x, 2 * a - 1)) for x in range(-a + 1, a, 2)}
            return int(bool(bottom & top))

        p_vals, d_vals = [], []
        for cfg in sample_chain(d, BoundarySpec("free"), burn_in=150,
                                n_samples=300, thin=2, seed=19):
            p_vals.append(primal_cross(cfg))
            d_vals.append(dual_cross(cfg))
        pm, dm = np.mean(p_vals), np.mean(d_vals)
        se = np.sqrt((np.var(p_vals) + np.var(d_vals)) / (len(p_vals) / 4))
        assert abs(pm - dm) < 4 * se + 0.02, (pm, dm, se)

    def test_edwards_sokal_identity_exact(self):
        # P[sigma_u = sigma_v] - 1/4 = (3/4) phi[u <-> v], summed exactly
        # over the enumeration oracle with the coupling's conditional law
        path = Graph(3, [(0, 1), (1, 2)])
        t = brute_force_distribution(path)
        u, v = 0, 2
        p_same = 0.0
        p_conn = t.connection_probability(u, v)
        for code in range(t.probs.size):
            bits = [(code >> k) & 1 for k in range(2)]
            labels = cluster_labels(path, np.array(bits, dtype=np.uint8))
            p_same += t.probs[code] * (1.0 if labels[u] == labels[v] else 0.25)
        assert p_same - 0.25 == pytest.approx(0.75 * p_conn, abs=1e-12)


def test_autocorrelation_estimator_floor():
    assert integrated_autocorrelation(np.ones(100)) == 0.5
    rng = np.random.default_rng(0)
    assert integrated_autocorrelation(rng.standard_normal(4000)) < 1.0
    # strongly correlated series
    x = np.repeat(rng.standard_normal(100), 40)
    assert integrated_autocorrelation(x) > 5.0


def test_rle_dump_roundtrip(tmp_path):
    d = Domain(2)
    path = tmp_path / "samples.rle"
    stream = sample_chain(d, burn_in=8, n_samples=10, thin=1, seed=9)
    originals = []

    def tee():
        for cfg in stream:
            originals.append(cfg.bits.copy())
            yield cfg

    n = dump_samples(path, tee(), d, BoundarySpec("free"), seed=9)
    assert n == 10
    loaded = list(load_samples(path))
    assert len(loaded) == 10
    for (idx, bits), orig in zip(loaded, originals):
        assert np.array_equal(bits, orig)
