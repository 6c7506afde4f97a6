"""L^2(G_X) risk, Monte Carlo replicates, convergence-rate fits and kappa selection."""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .coefficients import theoretical_wavelet_coeffs
from .design import (
    DesignCdf,
    SampleZ,
    TestFunction,
    default_bound,
    generate_sample,
    get_design,
    get_function,
    truncated_noise_variance,
)
from .dyadic import interval
from .estimators import (
    PIECEWISE_KIND,
    FitConfig,
    FitError,
    WarpedEstimator,
    fit,
)
from .quadrature import cell_integrals

DEFAULT_KAPPA_GRID = (0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0)


class RiskError(ValueError):
    pass


def n_threads() -> int:
    raw = os.environ.get("WARPTREE_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise RiskError(f"WARPTREE_THREADS must be an integer, got {raw!r}") from None


# ------------------------------------------------------------- distance


def _estimator_breaks(est: WarpedEstimator, d: DesignCdf) -> np.ndarray:
    if est.kind == PIECEWISE_KIND:
        ends = {float(e) for ix in est.terms.entries for e in interval(ix)}
        return np.array(sorted(ends))
    levels = [ix.j for ix in est.terms.entries if ix.j >= 0]
    if not levels:
        return np.array([0.0, 1.0])
    fine = max(levels) + 1 + (0 if est.wavelet.is_haar else 5)
    u = np.arange(2**fine + 1) / 2**fine
    return np.unique(d.inverse(u))


def l2g_distance(
    f: TestFunction, est: WarpedEstimator, d: DesignCdf | None = None, quad_order: int = 16, tol: float = 1e-13
) -> float:
    """||f - est|| in L^2(G_X), by composite Gauss-Legendre in x with density weight.

    Pieces are split where the estimator, ``f`` or the density can jump.
    """
    if quad_order < 16:
        raise RiskError("quad_order must be >= 16")
    d = d or est.design
    edges = _estimator_breaks(est, d)
    extra = tuple(f.breakpoints) + tuple(d.breakpoints)
    integrand = lambda x: (f(x) - est.predict(x)) ** 2 * d.density(x)
    total = cell_integrals(integrand, edges, extra, order=quad_order, tol=tol).sum()
    return float(math.sqrt(max(total, 0.0)))


def l2g_norm(f: TestFunction, d: DesignCdf, quad_order: int = 16) -> float:
    extra = tuple(f.breakpoints) + tuple(d.breakpoints)
    total = cell_integrals(lambda x: f(x) ** 2 * d.density(x), [0.0, 1.0], extra, order=quad_order, tol=1e-13)
    return float(math.sqrt(total.sum()))


# ------------------------------------------------------------ experiments


@dataclass(frozen=True)
class ExperimentConfig:
    design: str = "uniform"
    function: str = "sine"
    sigma: float = 0.1
    n: int = 1024
    n_reps: int = 20
    base_seed: int = 0
    fit: FitConfig = field(default_factory=FitConfig)
    M: float | None = None
    kappa_cv: bool = False
    kappa_grid: tuple = DEFAULT_KAPPA_GRID
    cv_folds: int = 5
    quad_order: int = 16

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass
class RiskResult:
    mean_sq_error: float
    std_error: float
    n_reps: int
    n_sample: int
    rule: str
    config_hash: str
    n_failed: int = 0
    kappas: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data) -> "RiskResult":
        return cls(**data)


def replicate_seed(base_seed: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(base_seed, spawn_key=(rep,))


def _run_replicate(exp: ExperimentConfig, rep: int):
    design = get_design(exp.design)
    f = get_function(exp.function, design)
    rng = np.random.default_rng(replicate_seed(exp.base_seed, rep))
    z = generate_sample(design, f, exp.sigma, exp.n, seed=exp.base_seed, M=exp.M, rng=rng)
    cfg = exp.fit.with_(design=exp.design)
    if exp.kappa_cv:
        cv = cv_kappa(z, exp.kappa_grid, exp.cv_folds, cfg, seed=exp.base_seed + rep)
        cfg = cfg.with_(kappa=cv.kappa)
    try:
        est = fit(z, cfg)
    except FitError as exc:
        return None, cfg.kappa, str(exc)
    return l2g_distance(f, est, design, exp.quad_order), cfg.kappa, None


def replicate_distances(exp: ExperimentConfig, n_reps: int | None = None):
    """Per-replicate L^2(G_X) distances (NaN where the fit failed) and the kappas used."""
    reps = exp.n_reps if n_reps is None else n_reps
    with ThreadPoolExecutor(max_workers=n_threads()) as pool:
        out = list(pool.map(lambda r: _run_replicate(exp, r), range(reps)))
    dist = np.array([np.nan if o[0] is None else o[0] for o in out])
    return dist, [o[1] for o in out]


def mc_risk(exp: ExperimentConfig) -> RiskResult:
    """Mean and standard error of ||f - f_z||^2 over independent replicates."""
    if exp.n_reps < 2:
        raise RiskError("n_reps must be >= 2")
    dist, kappas = replicate_distances(exp)
    ok = ~np.isnan(dist)
    if ok.sum() < 2:
        raise RiskError(f"only {int(ok.sum())} of {exp.n_reps} replicates produced a fit")
    sq = dist[ok] ** 2
    return RiskResult(
        mean_sq_error=float(np.mean(sq)),
        std_error=float(np.std(sq, ddof=1) / math.sqrt(sq.size)),
        n_reps=int(sq.size),
        n_sample=exp.n,
        rule=exp.fit.rule,
        config_hash=exp.digest(),
        n_failed=int((~ok).sum()),
        kappas=[float(k) for k in kappas],
    )


def excess_probability(exp: ExperimentConfig, eta, n_reps: int | None = None):
    """Fraction of replicates with ||f - f_z|| > eta, and its binomial standard error."""
    eta_arr = np.atleast_1d(np.asarray(eta, dtype=float))
    if np.any(eta_arr < 0):
        raise RiskError("eta must be >= 0")
    dist, _ = replicate_distances(exp, n_reps)
    dist = dist[~np.isnan(dist)]
    frac = (dist[None, :] > eta_arr[:, None]).mean(axis=1)
    se = np.sqrt(frac * (1 - frac) / dist.size)
    if np.ndim(eta) == 0:
        return float(frac[0]), float(se[0])
    return frac, se


# ----------------------------------------------------------------- rates


@dataclass
class RateReport:
    points: list  # (n, mean risk, std error)
    fitted_slope: float
    theoretical_exponent: float
    tolerance_band: tuple = (0.45, 0.95)
    rule: str = ""

    @property
    def within_band(self) -> bool:
        lo, hi = self.tolerance_band
        return lo <= self.fitted_slope <= hi

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "points": [{"n": n, "mean_risk": r, "std_err": s} for n, r, s in self.points],
            "fitted_slope": self.fitted_slope,
            "theoretical_exponent": self.theoretical_exponent,
            "tolerance_band": list(self.tolerance_band),
        }


def rate_slope(ns, risks) -> float:
    """OLS slope of log(risk) against log(ln(n) / n)."""
    ns = np.asarray(ns, dtype=float)
    risks = np.asarray(risks, dtype=float)
    if ns.size < 2 or np.any(risks <= 0) or np.any(~np.isfinite(risks)):
        raise RiskError("degenerate rate data: need >= 2 points with positive finite risk")
    xv = np.log(np.log(ns) / ns)
    yv = np.log(risks)
    xc = xv - xv.mean()
    return float((xc * (yv - yv.mean())).sum() / (xc * xc).sum())


def theoretical_rate_exponent(s: float) -> float:
    return 2 * s / (2 * s + 1)


def validate_grid(grid) -> list[int]:
    grid = sorted(int(n) for n in grid)
    if len(grid) < 4:
        raise RiskError("rate grid needs at least 4 sample sizes")
    if any(n < 4 or n & (n - 1) for n in grid) or len(set(grid)) != len(grid):
        raise RiskError("rate grid must hold distinct powers of two >= 4")
    return grid


def rate_experiment(grid, exp: ExperimentConfig, s: float = 1.0, checkpoint_dir=None, band=(0.45, 0.95)) -> RateReport:
    """Run ``mc_risk`` for each n and regress log risk on log(ln n / n).

    With ``checkpoint_dir`` each finished n is stored as JSON and reused on
    a later call with the same configuration.
    """
    grid = validate_grid(grid)
    points = []
    for n in grid:
        cfg_n = exp.with_(n=n)
        ck = None
        if checkpoint_dir is not None:
            ck = Path(checkpoint_dir) / f"{cfg_n.fit.rule}_n{n}_{cfg_n.digest()}.json"
        if ck is not None and ck.exists():
            res = RiskResult.from_dict(json.loads(ck.read_text()))
        else:
            res = mc_risk(cfg_n)
            if ck is not None:
                ck.parent.mkdir(parents=True, exist_ok=True)
                tmp = ck.with_suffix(".tmp")
                tmp.write_text(json.dumps(res.to_dict(), sort_keys=True))
                tmp.replace(ck)
        points.append((n, res.mean_sq_error, res.std_error))
    slope = rate_slope([p[0] for p in points], [p[1] for p in points])
    return RateReport(points, slope, theoretical_rate_exponent(s), tuple(band), exp.fit.rule)


# ---------------------------------------------------------- kappa via CV


@dataclass
class CVResult:
    kappa: float
    grid: list
    scores: list


def cv_kappa(z: SampleZ, kappa_grid, folds: int, cfg: FitConfig, seed: int = 0) -> CVResult:
    """K-fold choice of kappa by held-out squared prediction error.

    Folds come from a seeded permutation. Ties go to the smallest kappa;
    kappas whose fit fails on a training fold score +inf.
    """
    grid = sorted(float(k) for k in kappa_grid)
    if not grid:
        raise RiskError("kappa grid is empty")
    if folds < 2:
        raise RiskError("need at least 2 folds")
    if z.n / folds < 4:
        raise RiskError(f"fold too small to fit: n={z.n}, folds={folds}")
    perm = np.random.default_rng(seed).permutation(z.n)
    parts = np.array_split(perm, folds)
    scores = []
    for kappa in grid:
        c = cfg.with_(kappa=kappa)
        errs = []
        for i, test in enumerate(parts):
            train = np.concatenate([p for m, p in enumerate(parts) if m != i])
            try:
                est = fit(z.subset(train), c)
            except FitError:
                errs = [math.inf]
                break
            held = z.subset(test)
            errs.append(float(np.mean((est.predict(held.x) - held.y) ** 2)))
        scores.append(float(np.mean(errs)))
    best = min(range(len(grid)), key=lambda i: (scores[i], grid[i]))
    return CVResult(grid[best], grid, scores)


# ------------------------------------------------------ bias / variance


def projection_estimator(f: TestFunction, est: WarpedEstimator, quad_order: int = 16) -> WarpedEstimator:
    """Same index set as ``est`` with theoretical coefficients: Pi_Lambda(f)."""
    j_top = max(ix.j for ix in est.terms.entries) + 1
    theo = theoretical_wavelet_coeffs(f, est.wavelet, est.design, j_top, quad_order)
    terms = theo.restrict(est.terms.entries)
    return WarpedEstimator(est.kind, terms, est.tree, dict(est.meta))


def bias_variance_split(f: TestFunction, est: WarpedEstimator, quad_order: int = 16) -> dict:
    """Direct ||f - f_z||^2 next to e1 = ||f - Pi f||^2 and e2 = sum (d - d(z))^2."""
    if est.kind == PIECEWISE_KIND:
        raise RiskError("split implemented for wavelet expansions")
    d = est.design
    proj = projection_estimator(f, est, quad_order)
    direct = l2g_distance(f, est, d, quad_order) ** 2
    e1 = l2g_distance(f, proj, d, quad_order) ** 2
    e2 = sum((proj.terms[ix] - v) ** 2 for ix, v in est.terms.entries.items())
    return {"direct": direct, "e1": e1, "e2": float(e2)}


def expected_variance_term(f: TestFunction, d: DesignCdf, sigma: float, M: float | None, est: WarpedEstimator, n: int, quad_order: int = 16) -> float:
    """E e2 = sum over retained indices of Var(Y psi_I(G(X))) / n, Haar only.

    Uses E[Y^2 psi^2] = int f^2 psi^2 dG + Var(eps) since int psi^2 dG = 1.
    """
    if not est.wavelet.is_haar:
        raise RiskError("expected variance term implemented for Haar")
    if M is None:
        M = default_bound(f.sup_bound, sigma)
    noise_var = truncated_noise_variance(sigma, M - f.sup_bound)
    proj = projection_estimator(f, est, quad_order)
    extra = tuple(f.breakpoints) + tuple(d.breakpoints)
    total = 0.0
    for ix in est.terms.entries:
        if ix.j < 0:
            a, b, scale = 0.0, 1.0, 1.0
        else:
            a, b, scale = ix.k / 2**ix.j, (ix.k + 1) / 2**ix.j, 2.0**ix.j
        xa, xb = d.inverse(np.array([a, b]))
        f2psi2 = scale * cell_integrals(lambda x: f(x) ** 2 * d.density(x), [xa, xb], extra, order=quad_order, tol=1e-13)[0]
        total += f2psi2 + noise_var - proj.terms[ix] ** 2
    return float(total / n)

