"""Batch experiment driver.

Verbs:
    run     --config PATH [--seed U64] [--threads K] [--out DIR]
    verify  [--out DIR]
    report  --results DIR [--out DIR]

A run reads one declarative JSON config (schema in docs/config_schema.json),
executes the experiment, and writes CSV/JSON artifacts plus a manifest of
every produced file with its sha256.  Outputs are deterministic: rerunning
with the same config and seed gives byte-identical CSV bodies.  Command
line flags override config fields.  Invalid configs exit nonzero with a
single machine-parsable line on stderr; partially written outputs are
removed on failure.

The default output root is the FKLAB_OUT environment variable, else
./results.
"""

import argparse
import hashlib
import json
import os
import shutil
import sys
import tempfile

import numpy as np

from . import __version__
from .lattice import BoundarySpec, Domain

_KINDS = (
    "sample",
    "arms",
    "delta",
    "two-point",
    "mformula",
    "cdelta",
    "heights",
    "fit",
    "relations",
    "bundle",
)


class ConfigError(ValueError):
    pass


def config_hash(cfg: dict) -> str:
    # underscore keys are runtime plumbing, not part of the experiment
    public = {k: v for k, v in cfg.items() if not k.startswith("_")}
    blob = json.dumps(public, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path, overrides=None):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"unreadable config {path}: {e}")
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = v
    if cfg.get("kind") not in _KINDS:
        raise ConfigError(f"unknown experiment kind {cfg.get('kind')!r}")
    cfg.setdefault("seed", 0)
    cfg.setdefault("delta", 1.0)
    cfg.setdefault("threads", 1)
    return cfg


def _bc(cfg):
    kind = cfg.get("bc", "free")
    if kind not in ("free", "wired"):
        raise ConfigError(f"unsupported boundary condition {kind!r}")
    return BoundarySpec(kind)


def _chain_params(cfg, domain):
    from .sampler import default_burn_in, default_thin

    return dict(
        burn_in=int(cfg.get("burn_in", default_burn_in(domain.N))),
        thin=int(cfg.get("thin", default_thin(domain.N))),
        n_samples=int(cfg.get("n_samples", 100)),
        n_chains=int(cfg.get("n_chains", 1)),
    )


def _result_row(name, res, cfg, chash, extra=None):
    row = {
        "observable": res.meta.get("observable", name),
        "r": res.meta.get("r", ""),
        "R": res.meta.get("R", ""),
        "eps": res.meta.get("eps", ""),
        "x": res.meta.get("x", ""),
        "y": res.meta.get("y", ""),
        "N": cfg.get("N", ""),
        "delta": cfg.get("delta", 1.0),
        "bc": cfg.get("bc", "free"),
        "estimate": res.estimate,
        "stderr": res.stderr,
        "n_eff": res.n_eff,
        "seed": cfg.get("seed", 0),
        "config_hash": chash,
        "code_version": __version__,
    }
    if extra:
        row.update(extra)
    return row


def _parse_measurement_name(name):
    # pi1_8_256 -> (pi1, r=8, R=256); two_point_32_0 -> x
    parts = name.split("_")
    out = {}
    if parts[0] in ("pi1", "pi2", "pi4", "pi6") and len(parts) == 3:
        out["r"], out["R"] = parts[1], parts[2]
    elif name.startswith("two_point_"):
        out["x"] = (float(parts[2]), float(parts[3]))
    return out


def run_bundle_kind(cfg, out_dir, log):
    from .experiments import run_bundle
    from .observables import results_csv_rows

    domain = Domain(int(cfg["N"]), float(cfg.get("delta", 1.0)))
    bc = _bc(cfg)
    chash = config_hash(cfg)
    # checkpoints survive interruption: they live outside the staging dir,
    # keyed by the config hash, and are removed only on success
    ckpt = cfg.get("_checkpoint_dir") or os.path.join(out_dir, "checkpoints")
    os.makedirs(ckpt, exist_ok=True)
    bundle = run_bundle(
        domain,
        bc,
        cfg["measurements"],
        seed=int(cfg["seed"]),
        threads=int(cfg.get("threads", 1)),
        checkpoint_dir=ckpt,
        checkpoint_every=int(cfg.get("checkpoint_every", 0)),
        log=log,
        **_chain_params(cfg, domain),
    )
    rows = []
    for name in sorted(bundle.results):
        res = bundle.results[name]
        extra = _parse_measurement_name(name)
        rows.append(_result_row(name, res, cfg, chash, extra))
    with open(os.path.join(out_dir, "estimates.csv"), "w", newline="") as fh:
        fh.write(results_csv_rows(rows))
    summary = {
        name: {
            "estimate": bundle.results[name].estimate,
            "stderr": bundle.results[name].stderr,
            "n_eff": bundle.results[name].n_eff,
            "n_samples": bundle.results[name].n_samples,
            "meta": {
                k: v
                for k, v in bundle.results[name].meta.items()
                if isinstance(v, (int, float, str))
            },
        }
        for name in sorted(bundle.results)
    }
    with open(os.path.join(out_dir, "estimates.json"), "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    # raw batch tables for post-processing (fits, bootstrap)
    np.savez(
        os.path.join(out_dir, "series.npz"),
        **{name: np.concatenate(chains) for name, chains in bundle.series.items()},
        **{
            f"_chain_lengths_{name}": np.array([len(c) for c in chains])
            for name, chains in bundle.series.items()
        },
    )
    log(f"bundle done in {bundle.wall_time:.1f}s")
    shutil.rmtree(ckpt, ignore_errors=True)
    return 0


def run_arms_kind(cfg, out_dir, log):
    ladder = cfg.get("r_ladder")
    R = int(cfg["R"])
    if not ladder:
        raise ConfigError("arms experiment needs r_ladder")
    meas = [{"type": "pi1", "r": int(r), "R": R} for r in ladder]
    meas += [{"type": "pi2", "r": int(r), "R": R} for r in ladder]
    cfg2 = dict(cfg, measurements=meas, kind="bundle")
    return run_bundle_kind(cfg2, out_dir, log)


def run_delta_kind(cfg, out_dir, log):
    from .experiments import run_bundle
    from .observables import results_csv_rows

    domain = Domain(int(cfg["N"]), float(cfg.get("delta", 1.0)))
    R = domain.N
    ladder = [int(r) for r in cfg.get("r_ladder", ())]
    if not ladder:
        raise ConfigError("delta experiment needs r_ladder")
    meas = [{"type": "crossing", "r": r} for r in ladder]
    chash = config_hash(cfg)
    fam = {}
    for kind in ("wired", "free"):
        fam[kind] = run_bundle(
            domain,
            BoundarySpec(kind),
            meas,
            seed=int(cfg["seed"]),
            threads=int(cfg.get("threads", 1)),
            log=log,
            **_chain_params(cfg, domain),
        )
    rows = []
    for r in ladder:
        name = f"crossing_{r}_0_0"
        rw, rf = fam["wired"].results[name], fam["free"].results[name]
        est = rw.estimate - rf.estimate
        err = float(np.hypot(rw.stderr, rf.stderr))
        rows.append(
            {
                "observable": "delta",
                "r": r,
                "R": R,
                "N": domain.N,
                "delta": domain.delta,
                "bc": "wired-free",
                "estimate": est,
                "stderr": err,
                "n_eff": min(rw.n_eff, rf.n_eff),
                "seed": cfg["seed"],
                "config_hash": chash,
                "code_version": __version__,
            }
        )
    with open(os.path.join(out_dir, "delta.csv"), "w", newline="") as fh:
        fh.write(results_csv_rows(rows))
    return 0


def run_two_point_kind(cfg, out_dir, log):
    xs = cfg.get("x_ladder")
    if not xs:
        raise ConfigError("two-point experiment needs x_ladder")
    meas = [{"type": "two_point", "x": x} for x in xs]
    cfg2 = dict(cfg, measurements=meas, kind="bundle")
    return run_bundle_kind(cfg2, out_dir, log)


def run_mformula_kind(cfg, out_dir, log):
    from .experiments import run_bundle
    from .gffpredict import gff_characteristic
    from .observables import TestFunction, results_csv_rows

    domain = Domain(int(cfg["N"]), float(cfg.get("delta", 1.0)))
    chash = config_hash(cfg)
    rows = []
    patterns = cfg.get("patterns")
    if not patterns:
        raise ConfigError("mformula experiment needs patterns")
    meas = []
    fns = []
    for i, pat in enumerate(patterns):
        F = TestFunction(
            centers=tuple(map(tuple, pat["centers"])),
            charges=tuple(pat["charges"]),
            eps=float(pat["eps"]),
        )
        fns.append(F)
        meas.append(
            {
                "type": "af",
                "centers": pat["centers"],
                "charges": pat["charges"],
                "eps": pat["eps"],
                "label": f"af_{i}",
            }
        )
    bundle = run_bundle(
        domain,
        _bc(cfg),
        meas,
        seed=int(cfg["seed"]),
        threads=int(cfg.get("threads", 1)),
        log=log,
        **_chain_params(cfg, domain),
    )
    for i, F in enumerate(fns):
        res = bundle.results[f"af_{i}"]
        pred = gff_characteristic(F)
        rows.append(
            _result_row(
                f"af_{i}",
                res,
                cfg,
                chash,
                {
                    "observable": "A_F",
                    "eps": F.eps,
                    "x": F.centers[1] if len(F.centers) > 1 else "",
                },
            )
        )
        rows[-1]["gff_prediction"] = pred
        rows[-1]["relative_error"] = abs(res.estimate - pred) / pred
    text = results_csv_rows(rows)
    # append the prediction columns, keeping the base table layout intact
    lines = text.split("\r\n")
    lines[0] += ",gff_prediction,relative_error"
    for j, row in enumerate(rows):
        lines[j + 1] += f",{row['gff_prediction']!r},{row['relative_error']!r}"
    with open(os.path.join(out_dir, "mformula.csv"), "w", newline="") as fh:
        fh.write("\r\n".join(lines))
    # standalone prediction table keyed by the ball pattern, for joins
    from .gffpredict import prediction_table

    specs = []
    for F in fns:
        if len(F.centers) == 2:
            specs.append({"pattern": "two_ball", "x": F.centers[1], "eps": F.eps})
        elif len(F.centers) == 4:
            specs.append(
                {"pattern": "four_ball", "x": F.centers[2], "y": F.centers[1],
                 "eps": F.eps}
            )
    if specs:
        with open(os.path.join(out_dir, "predictions.csv"), "w", newline="") as fh:
            fh.write(prediction_table(specs))
    return 0


def run_cdelta_kind(cfg, out_dir, log):
    eps_list = cfg.get("eps_ladder")
    if not eps_list:
        raise ConfigError("cdelta experiment needs eps_ladder")
    meas = [{"type": "cdelta", "eps": float(e)} for e in eps_list]
    cfg2 = dict(cfg, measurements=meas, kind="bundle", bc="wired")
    return run_bundle_kind(cfg2, out_dir, log)


def run_sample_kind(cfg, out_dir, log):
    from .sampler import dump_samples, sample_chain

    domain = Domain(int(cfg["N"]), float(cfg.get("delta", 1.0)))
    bc = _bc(cfg)
    p = _chain_params(cfg, domain)
    stream = sample_chain(
        domain,
        bc,
        burn_in=p["burn_in"],
        n_samples=p["n_samples"],
        thin=p["thin"],
        seed=int(cfg["seed"]),
    )
    n = dump_samples(
        os.path.join(out_dir, "samples.rle"), stream, domain, bc, cfg["seed"]
    )
    log(f"wrote {n} samples")
    return 0


def run_heights_kind(cfg, out_dir, log):
    from .heightfield import height, orient
    from .loops import extract_loops
    from .sampler import chain_rng, sample_chain

    domain = Domain(int(cfg["N"]), float(cfg.get("delta", 1.0)))
    bc = _bc(cfg)
    p = _chain_params(cfg, domain)
    cfg_sample = None
    for cfg_sample in sample_chain(
        domain, bc, burn_in=p["burn_in"], n_samples=1, thin=p["thin"],
        seed=int(cfg["seed"]),
    ):
        pass
    ls = extract_loops(cfg_sample)
    oriented = orient(ls, chain_rng(int(cfg["seed"]), 1))
    h = height(oriented)
    mat = h.to_matrix()
    with open(os.path.join(out_dir, "heights.txt"), "w") as fh:
        fh.write(
            "# height matrix: row i, column j -> face at doubled coords "
            "(x, y) = (j - 2N, 2N - i); mixed-parity slots are 0\n"
        )
        fh.write(f"# N={domain.N} delta={domain.delta} seed={cfg['seed']}\n")
        for row in mat:
            fh.write(" ".join(str(v) for v in row) + "\n")
    with open(os.path.join(out_dir, "loops.txt"), "w") as fh:
        fh.write("# loops as closed polylines: 'loop k: x0,y0 x1,y1 ...'\n")
        fh.write("# coordinates are physical units\n")
        for k, lo in enumerate(ls):
            pts = " ".join(f"{x:g},{y:g}" for x, y in lo.physical_verts)
            fh.write(f"loop {k}: {pts}\n")
    log(f"{len(ls)} loops, height range [{mat.min()}, {mat.max()}]")
    return 0


def run_fit_kind(cfg, out_dir, log):
    from .analysis import ScalingSeries, fit_exponent

    src = cfg.get("input")
    if not src or not os.path.exists(src):
        raise ConfigError("fit experiment needs an existing input series.npz")
    data = np.load(src)
    prefix = cfg.get("observable", "pi1")
    R = int(cfg["R"])
    ratios, estimates, stderrs, batches = [], [], [], []
    from .observables import estimate_from_values

    for r in sorted((int(v) for v in cfg["r_ladder"]), reverse=True):
        name = f"{prefix}_{r}_{R}"
        if name not in data:
            raise ConfigError(f"series {name} missing from {src}")
        lengths = data[f"_chain_lengths_{name}"]
        chains = np.split(data[name], np.cumsum(lengths)[:-1])
        res = estimate_from_values(chains)
        ratios.append(r / R)
        estimates.append(res.estimate)
        stderrs.append(res.stderr)
        batches.append(res.batch_means)
    series = ScalingSeries(
        ratios=ratios,
        estimates=estimates,
        stderrs=stderrs,
        batch_means=batches,
        observable=prefix,
        N=int(cfg.get("N", 0)),
    )
    fit = fit_exponent(
        series,
        drop_largest=int(cfg.get("drop_largest", 2)),
        seed=int(cfg["seed"]),
    )
    report = fit.as_dict()
    report["points"] = [
        {"ratio": float(q), "estimate": float(e), "stderr": float(s)}
        for q, e, s in zip(ratios, estimates, stderrs)
    ]
    report["N"] = int(cfg.get("N", 0))
    report["N_ladder"] = [int(cfg.get("N", 0))]
    report["config_hash"] = config_hash(cfg)
    with open(os.path.join(out_dir, "fit.json"), "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
    log(f"{prefix}: slope {fit.slope:+.4f} in [{-fit.ci_high:+.4f}, {-fit.ci_low:+.4f}]")
    return 0


def run_relations_kind(cfg, out_dir, log):
    from fractions import Fraction

    from .analysis import scaling_relations

    xi1 = Fraction(str(cfg.get("xi1", "1/8")))
    iota = Fraction(str(cfg.get("iota", "1/2")))
    table = scaling_relations(xi1, iota).as_dict()
    table["config_hash"] = config_hash(cfg)
    with open(os.path.join(out_dir, "relations.json"), "w") as fh:
        json.dump(table, fh, indent=1, sort_keys=True)
    log(" ".join(f"{k}={v}" for k, v in table.items() if k != "config_hash"))
    return 0


_RUNNERS = {
    "bundle": run_bundle_kind,
    "arms": run_arms_kind,
    "delta": run_delta_kind,
    "two-point": run_two_point_kind,
    "mformula": run_mformula_kind,
    "cdelta": run_cdelta_kind,
    "sample": run_sample_kind,
    "heights": run_heights_kind,
    "fit": run_fit_kind,
    "relations": run_relations_kind,
}


def write_manifest(out_dir):
    entries = []
    for root, _, files in os.walk(out_dir):
        for f in sorted(files):
            if f == "MANIFEST.txt":
                continue
            path = os.path.join(root, f)
            rel = os.path.relpath(path, out_dir)
            with open(path, "rb") as fh:
                digest = hashlib.sha256(fh.read()).hexdigest()
            entries.append(f"{digest}  {os.path.getsize(path):>10}  {rel}")
    with open(os.path.join(out_dir, "MANIFEST.txt"), "w") as fh:
        fh.write("\n".join(sorted(entries, key=lambda s: s.split()[-1])) + "\n")


def cmd_run(args):
    overrides = {"seed": args.seed, "threads": args.threads}
    cfg = load_config(args.config, overrides)
    out_root = args.out or os.environ.get("FKLAB_OUT", "results")
    name = cfg.get("name") or os.path.splitext(os.path.basename(args.config))[0]
    out_dir = os.path.join(out_root, name)
    os.makedirs(out_root, exist_ok=True)

    def log(msg):
        print(f"[{name}] {msg}", flush=True)

    staging = tempfile.mkdtemp(prefix=f".{name}-", dir=out_root)
    ckpt_dir = os.path.join(out_root, f".ckpt-{name}-{config_hash(cfg)[:8]}")
    try:
        with open(os.path.join(staging, "config.json"), "w") as fh:
            json.dump(cfg, fh, indent=1, sort_keys=True)
        rc = _RUNNERS[cfg["kind"]](dict(cfg, _checkpoint_dir=ckpt_dir), staging, log)
        write_manifest(staging)
        if os.path.isdir(out_dir):
            shutil.rmtree(out_dir)
        os.replace(staging, out_dir)
        shutil.rmtree(ckpt_dir, ignore_errors=True)
        log(f"artifacts in {out_dir}")
        return rc
    except Exception:
        shutil.rmtree(staging, ignore_errors=True)
        raise


def cmd_verify(args):
    from .verify import run_all

    return run_all()


def cmd_report(args):
    results_dir = args.results
    if not os.path.isdir(results_dir):
        raise ConfigError(f"no results directory {results_dir}")
    out_dir = args.out or results_dir
    summary = {}
    for sub in sorted(os.listdir(results_dir)):
        for fname in ("estimates.json", "fit.json", "relations.json"):
            path = os.path.join(results_dir, sub, fname)
            if os.path.exists(path):
                with open(path) as fh:
                    summary[sub] = json.load(fh)
                break
        for fname in ("delta.csv", "mformula.csv"):
            path = os.path.join(results_dir, sub, fname)
            if os.path.exists(path):
                with open(path) as fh:
                    header = fh.readline().strip().split(",")
                    rows = [
                        dict(zip(header, line.strip().split(",")))
                        for line in fh
                        if line.strip()
                    ]
                summary[sub] = {"table": rows}
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    print(f"report: {path} ({len(summary)} experiment(s))")
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(prog="fklab", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)
    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(fn=cmd_run)
    p_ver = sub.add_parser("verify", help="run the fast property suites")
    p_ver.add_argument("--out", default=None)
    p_ver.set_defaults(fn=cmd_verify)
    p_rep = sub.add_parser("report", help="collect results into one report")
    p_rep.add_argument("--results", required=True)
    p_rep.add_argument("--out", default=None)
    p_rep.set_defaults(fn=cmd_report)
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
