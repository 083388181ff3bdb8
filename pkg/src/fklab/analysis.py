"""Exponent extraction and the scaling-relations calculator.

Arm-type observables obey quasi-multiplicativity across scales, so the
exponent of a scale-to-scale series upsilon(eps*R, R) is read off from a
weighted log-log fit; the double-limit structure (first the lattice, then
the scale ratio) is respected by fitting at the largest available box and
reporting the trend along the box ladder.

The scaling-relations map takes the one-arm exponent and the influence
exponent to the thermodynamic exponents.  It is exact on rationals and
reproduces the known q=4 table from (1/8, 1/2) with zero error; that
reproduction is its validation.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "ScalingSeries",
    "ExponentFit",
    "ScalingExponents",
    "fit_exponent",
    "quasi_mult_audit",
    "scaling_relations",
]


@dataclass
class ScalingSeries:
    """Estimates of one observable at a ladder of scale ratios.

    ratios      : r/R values, strictly decreasing
    estimates   : positive point estimates
    stderrs     : one standard error each
    batch_means : optional list of per-point batch-mean arrays, used by
                  the bootstrap confidence interval
    """

    ratios: np.ndarray
    estimates: np.ndarray
    stderrs: np.ndarray
    batch_means: list = None
    observable: str = ""
    N: int = 0
    delta: float = 1.0
    bc: str = "free"

    def __post_init__(self):
        self.ratios = np.asarray(self.ratios, dtype=float)
        self.estimates = np.asarray(self.estimates, dtype=float)
        self.stderrs = np.asarray(self.stderrs, dtype=float)
        if not np.all(np.diff(self.ratios) < 0):
            raise ValueError("scale ratios must be strictly decreasing")
        if np.any(self.estimates <= 0):
            raise ValueError("estimates must be positive")


@dataclass
class ExponentFit:
    """A fitted decay exponent with its diagnostics.

    ``varsigma`` is the positive exponent of upsilon(r, R) ~ (r/R)^varsigma;
    ``slope`` = -varsigma is the slope of log(estimate) against log(R/r).
    """

    varsigma: float
    slope: float
    ci_low: float
    ci_high: float
    residuals: np.ndarray
    n_points: int
    observable: str = ""

    def as_dict(self):
        return {
            "observable": self.observable,
            "varsigma": self.varsigma,
            "slope": self.slope,
            "ci": [self.ci_low, self.ci_high],
            "residuals": list(map(float, self.residuals)),
            "n_points": self.n_points,
        }


def _weighted_slope(logx, logy, w):
    W = w.sum()
    xbar = (w * logx).sum() / W
    ybar = (w * logy).sum() / W
    sxx = (w * (logx - xbar) ** 2).sum()
    sxy = (w * (logx - xbar) * (logy - ybar)).sum()
    return sxy / sxx, ybar - (sxy / sxx) * xbar


def fit_exponent(
    series: ScalingSeries,
    drop_largest=2,
    n_bootstrap=1000,
    seed=0,
) -> ExponentFit:
    """Weighted least squares of log(estimate) on log(ratio).

    Weights are stderr^-2 on the log scale (delta method).  By default the
    two largest ratios are excluded, where finite-size corrections are
    strongest; pass drop_largest=0 to fit the full ladder.  The confidence
    interval comes from a nonparametric bootstrap over batch means, which
    respects chain autocorrelation; without batch tables it falls back to
    a Gaussian resampling of the points.
    """
    keep = slice(drop_largest, None)
    ratios = series.ratios[keep]
    est = series.estimates[keep]
    err = series.stderrs[keep]
    if len(ratios) < 4:
        raise ValueError("need at least 4 points after exclusions")
    if np.unique(ratios).size < 2:
        raise ValueError("degenerate design: all ratios equal")

    logx = np.log(ratios)
    logy = np.log(est)
    relerr = np.where(err > 0, err / est, 1e-12)
    w = 1.0 / np.maximum(relerr, 1e-12) ** 2
    slope_x, icpt = _weighted_slope(logx, logy, w)
    varsigma = slope_x  # log e on log eps: upsilon ~ eps^varsigma

    fitted = icpt + slope_x * logx
    residuals = (logy - fitted) / np.maximum(relerr, 1e-12)

    rng = np.random.default_rng(seed)
    boots = np.empty(n_bootstrap)
    batch = series.batch_means[drop_largest:] if series.batch_means else None
    for b in range(n_bootstrap):
        if batch is not None:
            ys = np.array(
                [
                    np.mean(rng.choice(bm, size=len(bm), replace=True))
                    for bm in batch
                ]
            )
        else:
            ys = est + err * rng.standard_normal(len(est))
        ok = ys > 0
        if ok.sum() < 2:
            boots[b] = varsigma
            continue
        s, _ = _weighted_slope(logx[ok], np.log(ys[ok]), w[ok])
        boots[b] = s
    lo, hi = np.quantile(boots, [0.025, 0.975])
    lo, hi = min(lo, varsigma), max(hi, varsigma)
    return ExponentFit(
        varsigma=float(varsigma),
        slope=float(-varsigma),
        ci_low=float(lo),
        ci_high=float(hi),
        residuals=residuals,
        n_points=len(ratios),
        observable=series.observable,
    )


def quasi_mult_audit(triples):
    """Band report for pi(r, R) / (pi(r, rho) pi(rho, R)).

    ``triples`` is a list of dicts with keys inner, mid, outer (each a
    (estimate, stderr) pair) and the scales (r, rho, R).  Scales must
    chain consistently.  Returns the per-triple ratios with propagated
    errors and the overall band.
    """
    rows = []
    for t in triples:
        r, rho, R = t["r"], t["rho"], t["R"]
        if not (r <= rho <= R):
            raise ValueError(f"inconsistent scales ({r}, {rho}, {R})")
        (pin, ein), (pmid, emid), (pout, eout) = t["inner"], t["mid"], t["outer"]
        ratio = pout / (pin * pmid)
        rel = np.sqrt(
            (eout / pout) ** 2 + (ein / pin) ** 2 + (emid / pmid) ** 2
        )
        rows.append(
            {
                "r": r,
                "rho": rho,
                "R": R,
                "ratio": float(ratio),
                "stderr": float(ratio * rel),
            }
        )
    ratios = [row["ratio"] for row in rows]
    return {
        "rows": rows,
        "band_low": float(min(ratios)),
        "band_high": float(max(ratios)),
        "C": float(max(max(ratios), 1.0 / min(ratios))),
    }


@dataclass(frozen=True)
class ScalingExponents:
    """The exponent tuple produced by the scaling relations; all entries
    are exact fractions when the inputs are."""

    xi1: Fraction
    iota: Fraction
    nu: Fraction
    beta: Fraction
    gamma: Fraction
    alpha: Fraction
    eta: Fraction
    volume_tail: Fraction

    def as_dict(self):
        return {
            k: str(getattr(self, k))
            for k in (
                "xi1",
                "iota",
                "nu",
                "beta",
                "gamma",
                "alpha",
                "eta",
                "volume_tail",
            )
        }


def scaling_relations(xi1, iota) -> ScalingExponents:
    """Map the one-arm exponent xi1 and influence exponent iota to the
    thermodynamic exponents:

        nu = 1/(2 - iota),   beta = xi1 * nu,   gamma = (2 - 2 xi1) * nu,
        alpha = 2 - 2 nu,    eta = 2 xi1,       volume tail = xi1/(2 - xi1).

    Exact on rationals; (1/8, 1/2) reproduces the q=4 table
    (2/3, 1/12, 7/6, 2/3, 1/4, 1/15).
    """
    xi1 = Fraction(xi1)
    iota = Fraction(iota)
    # xi1 = 0 is the admissible degenerate case (beta = eta = 0)
    if not (0 <= xi1 < 1):
        raise ValueError("one-arm exponent must lie in [0, 1)")
    if not (0 < iota < 2):
        raise ValueError("influence exponent must lie in (0, 2)")
    nu = 1 / (2 - iota)
    return ScalingExponents(
        xi1=xi1,
        iota=iota,
        nu=nu,
        beta=xi1 * nu,
        gamma=(2 - 2 * xi1) * nu,
        alpha=2 - 2 * nu,
        eta=2 * xi1,
        volume_tail=xi1 / (2 - xi1),
    )


def fit_report(fits_by_N, config_hash=""):
    """JSON-ready ladder report: one fit per box size plus the trend."""
    ladder = sorted(fits_by_N)
    return {
        "N_ladder": ladder,
        "fits": {str(N): fits_by_N[N].as_dict() for N in ladder},
        "slope_trend": [fits_by_N[N].slope for N in ladder],
        "config_hash": config_hash,
    }
