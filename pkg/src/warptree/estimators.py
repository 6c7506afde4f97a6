"""Warped-wavelet regression estimators.

Rules
-----
uniform            all warped wavelet terms below a level fixed by the assumed smoothness
vertical           keep (j, k) when the energy nu_{j,k}(z) of its whole subtree reaches
                   lambda_n, then complete to a tree
piecewise          least squares on the adaptive partition driven by the
                   piecewise-constant residuals
piecewise-uniform  least squares on the uniform partition of the uniform rule
linear, hard       baselines: linear truncation and term-by-term hard thresholding

The scaling term ``(-1, 0)`` is kept by every wavelet rule.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .coefficients import (
    CoefficientMap,
    cell_of,
    empirical_scaling_coeffs,
    empirical_wavelet_coeffs,
    piecewise_residuals,
    vertical_residuals,
)
from .design import DesignCdf, SampleZ, get_design
from .dyadic import (
    ROOT,
    SCALING,
    DyadicIndex,
    DyadicTree,
    ancestors,
    complete_to_tree,
    outer_leaves,
    uniform_tree,
)
from .wavelets import WaveletFamily, get_wavelet, level_terms

RULES = ("uniform", "vertical", "piecewise", "piecewise-uniform", "linear", "hard")
WAVELET_KIND = "wavelet-expansion"
PIECEWISE_KIND = "piecewise-constant"


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitConfig:
    rule: str = "vertical"
    kappa: float = 1.0
    gamma: float = 1.0
    s_assumed: float = 1.0
    wavelet: str = "haar"
    design: str = "uniform"
    j_cut: int | None = None  # linear baseline override

    def validate(self) -> "FitConfig":
        if self.rule not in RULES:
            raise FitError(f"unknown rule {self.rule!r}; valid rules: {', '.join(RULES)}")
        if not self.kappa > 0:
            raise FitError("kappa must be > 0")
        if self.rule in ("vertical", "piecewise", "hard") and self.gamma < 0.5:
            raise FitError("gamma must be >= 1/2")
        if self.rule in ("uniform", "piecewise-uniform", "linear") and not self.s_assumed > 0:
            raise FitError("s_assumed must be > 0")
        return self

    def with_(self, **kw) -> "FitConfig":
        return replace(self, **kw)


def threshold_lambda(n: int, kappa: float) -> float:
    """lambda_n = kappa * sqrt(ln(n) / n)."""
    if n < 2:
        raise FitError("threshold needs n >= 2")
    if not kappa > 0:
        raise FitError("kappa must be > 0")
    return kappa * math.sqrt(math.log(n) / n)


def jstar_adaptive(lam: float, gamma: float) -> int:
    """Largest j >= 0 with 2^j <= lam^(-1/gamma)."""
    if not 0 < lam < 1:
        raise FitError(f"lambda_n={lam:.4g} must lie in (0, 1); sample too small for this kappa")
    if gamma < 0.5:
        raise FitError("gamma must be >= 1/2")
    bound = lam ** (-1.0 / gamma)
    j = 0
    while 2.0 ** (j + 1) <= bound:
        j += 1
    return j


def jstar_uniform(n: int, s: float) -> int:
    """Smallest j >= 0 with 2^(j(1+2s)) >= n / ln(n)."""
    if n < 3:
        raise FitError("uniform level needs n >= 3")
    if not s > 0:
        raise FitError("s must be > 0")
    target = n / math.log(n)
    j = 0
    while 2.0 ** (j * (1 + 2 * s)) < target:
        j += 1
    return j


@dataclass
class WarpedEstimator:
    """A fitted expansion.

    For the wavelet kind ``terms`` maps retained indices to ``d_{j,k}(z)``.
    For the piecewise kind ``terms`` maps the partition cells to the fitted
    constant on each cell (``s_I(z) / sqrt(G_n(I))``, i.e. the cell mean).
    """

    kind: str
    terms: CoefficientMap
    tree: DyadicTree
    meta: dict = field(default_factory=dict)

    @property
    def design(self) -> DesignCdf:
        return get_design(self.meta.get("design", "uniform"))

    @property
    def wavelet(self) -> WaveletFamily:
        return get_wavelet(self.meta.get("wavelet", "haar"))

    @property
    def retained(self) -> set:
        return set(self.terms.entries)

    def predict(self, x, design: DesignCdf | None = None):
        x = np.asarray(x, dtype=float)
        if np.any(~np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
            raise FitError("prediction points must lie in [0, 1]")
        flat = x.ravel()
        if self.kind == PIECEWISE_KIND:
            out = self._predict_cells(flat)
        else:
            out = self._predict_wavelet(flat, design or self.design)
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def _predict_wavelet(self, x, design):
        u = design.cdf(x)
        w = self.wavelet
        out = np.zeros_like(u)
        levels = sorted({ix.j for ix in self.terms.entries})
        for j in levels:
            coef = self.terms.level(j)
            ks, vals = level_terms(w, j, u)
            out += (coef[ks] * vals).sum(axis=0)
        return out

    def _predict_cells(self, x):
        out = np.full(x.shape, np.nan)
        levels = sorted({ix.j for ix in self.terms.entries})
        for lev in levels:
            table = np.full(2**lev, np.nan)
            for ix, v in self.terms.entries.items():
                if ix.j == lev:
                    table[ix.k] = v
            vals = table[cell_of(x, lev)]
            out = np.where(np.isnan(out), vals, out)
        return out

    def empirical_risk(self, z: SampleZ) -> float:
        return float(np.mean((self.predict(z.x) - z.y) ** 2))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "meta": {k: self.meta.get(k) for k in sorted(self.meta)},
            "terms": [{"j": ix.j, "k": ix.k, "value": float(v)} for ix, v in sorted(self.terms.entries.items())],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "WarpedEstimator":
        kind = data["kind"]
        if kind not in (WAVELET_KIND, PIECEWISE_KIND):
            raise FitError(f"unknown estimator kind {kind!r}")
        entries = {DyadicIndex(int(t["j"]), int(t["k"])).validate(): float(t["value"]) for t in data["terms"]}
        meta = dict(data.get("meta", {}))
        if kind == PIECEWISE_KIND:
            tree = DyadicTree(frozenset(a for ix in entries for a in ancestors(ix)))
            terms = CoefficientMap(entries, "scaling-empirical", meta.get("j_star") or 0)
        else:
            tree = DyadicTree(frozenset(ix for ix in entries if ix.j >= 0))
            terms = CoefficientMap(entries, "wavelet-empirical", meta.get("j_star") or 0)
        return cls(kind, terms, tree, meta)

    @classmethod
    def from_json(cls, text: str) -> "WarpedEstimator":
        return cls.from_dict(json.loads(text))


def _meta(z: SampleZ, cfg: FitConfig, lam, j_star) -> dict:
    return {
        "n": z.n,
        "kappa": cfg.kappa,
        "gamma": cfg.gamma,
        "lambda_n": lam,
        "j_star": j_star,
        "rule": cfg.rule,
        "design": cfg.design,
        "wavelet": cfg.wavelet,
        "s_assumed": cfg.s_assumed,
    }


def _check_sample(z: SampleZ):
    if z.n == 0:
        raise FitError("empty sample")


def _wavelet_estimator(coeffs: CoefficientMap, nodes, z, cfg, lam, j_star, tree=None):
    keep = set(nodes) | {SCALING}
    terms = coeffs.restrict(keep)
    if tree is None:
        tree = DyadicTree(frozenset(ix for ix in keep if ix.j >= 0))
    return WarpedEstimator(WAVELET_KIND, terms, tree, _meta(z, cfg, lam, j_star))


def fit_uniform(z: SampleZ, cfg: FitConfig) -> WarpedEstimator:
    """All indices below the smoothness-driven level, plus the scaling term."""
    _check_sample(z)
    cfg.validate()
    j_star = jstar_uniform(z.n, cfg.s_assumed) if cfg.j_cut is None else cfg.j_cut
    coeffs = empirical_wavelet_coeffs(z, get_wavelet(cfg.wavelet), get_design(cfg.design), j_star)
    tree = uniform_tree(j_star)
    return _wavelet_estimator(coeffs, tree.nodes, z, cfg, None, j_star, tree)


def _adaptive_setup(z: SampleZ, cfg: FitConfig):
    _check_sample(z)
    cfg.validate()
    lam = threshold_lambda(z.n, cfg.kappa)
    return lam, jstar_adaptive(lam, cfg.gamma)


def fit_adaptive_vertical(z: SampleZ, cfg: FitConfig, return_details=False):
    """Vertical (tree-structured) thresholding of warped wavelet coefficients.

    1. lambda_n and J*;  2. d_{j,k}(z) and nu_{j,k}(z) for j < J*;
    3. Sigma = {nu >= lambda_n};  4. complete Sigma to a tree;
    5. expand over the tree nodes and the scaling index.
    """
    lam, j_star = _adaptive_setup(z, cfg)
    coeffs = empirical_wavelet_coeffs(z, get_wavelet(cfg.wavelet), get_design(cfg.design), j_star)
    nu = vertical_residuals(coeffs, j_star)
    selected = {ix for ix, v in nu.items() if v >= lam}
    tree = complete_to_tree(selected)
    est = _wavelet_estimator(coeffs, tree.nodes, z, cfg, lam, j_star, tree)
    if return_details:
        return est, {"coeffs": coeffs, "residuals": nu, "selected": selected}
    return est


def _cell_means(z: SampleZ, leaves) -> dict:
    out = {}
    by_level: dict[int, list] = {}
    for ix in leaves:
        by_level.setdefault(ix.j, []).append(ix)
    for lev, ixs in by_level.items():
        cells = cell_of(z.x, lev)
        counts = np.bincount(cells, minlength=2**lev)
        sums = np.bincount(cells, weights=z.y, minlength=2**lev)
        for ix in ixs:
            # s_I(z) / sqrt(G_n(I)) reduces to the cell mean; empty cells give 0
            out[ix] = float(sums[ix.k] / counts[ix.k]) if counts[ix.k] else 0.0
    return out


def _piecewise_estimator(z, cfg, tree, lam, j_star):
    leaves = outer_leaves(tree).leaves
    terms = CoefficientMap(_cell_means(z, leaves), "scaling-empirical", j_star)
    return WarpedEstimator(PIECEWISE_KIND, terms, tree, _meta(z, cfg, lam, j_star))


def fit_adaptive_piecewise(z: SampleZ, cfg: FitConfig, return_details=False):
    """Least squares on the adaptive partition selected by the residuals nu_I(z)."""
    lam, j_star = _adaptive_setup(z, cfg)
    scal = empirical_scaling_coeffs(z, j_star)
    nu = piecewise_residuals(scal, j_star)
    selected = {ix for ix, v in nu.items() if v >= lam}
    tree = complete_to_tree(selected)
    est = _piecewise_estimator(z, cfg, tree, lam, j_star)
    if return_details:
        return est, {"coeffs": scal, "residuals": nu, "selected": selected}
    return est


def fit_piecewise_uniform(z: SampleZ, cfg: FitConfig) -> WarpedEstimator:
    _check_sample(z)
    cfg.validate()
    j_star = jstar_uniform(z.n, cfg.s_assumed) if cfg.j_cut is None else cfg.j_cut
    return _piecewise_estimator(z, cfg, uniform_tree(j_star), None, j_star)


def baseline_fit(z: SampleZ, cfg: FitConfig) -> WarpedEstimator:
    """Linear truncation or term-by-term hard thresholding (no tree completion)."""
    if cfg.rule == "linear":
        return fit_uniform(z, cfg)
    if cfg.rule != "hard":
        raise FitError("baseline_fit handles rule 'linear' or 'hard'")
    lam, j_star = _adaptive_setup(z, cfg)
    return hard_threshold_fit(z, cfg, lam, j_star)


def hard_threshold_fit(z: SampleZ, cfg: FitConfig, lam: float, j_star: int) -> WarpedEstimator:
    coeffs = empirical_wavelet_coeffs(z, get_wavelet(cfg.wavelet), get_design(cfg.design), j_star)
    keep = {ix for ix, v in coeffs.entries.items() if ix.j >= 0 and abs(v) >= lam}
    return _wavelet_estimator(coeffs, keep, z, cfg, lam, j_star)


_DISPATCH = {
    "uniform": fit_uniform,
    "vertical": fit_adaptive_vertical,
    "piecewise": fit_adaptive_piecewise,
    "piecewise-uniform": fit_piecewise_uniform,
    "linear": baseline_fit,
    "hard": baseline_fit,
}


def fit(z: SampleZ, cfg: FitConfig) -> WarpedEstimator:
    cfg.validate()
    return _DISPATCH[cfg.rule](z, cfg)


def predict(est: WarpedEstimator, x):
    return est.predict(x)


def grow_greedy_tree(coeffs: CoefficientMap, n_nodes: int, j_star: int, check=True) -> DyadicTree:
    """Grow a tree from {(0,0)} by repeatedly adding the leaf with the largest nu.

    Ties go to the lexicographically smallest (j, k).
    """
    if n_nodes < 1:
        raise FitError("target size must be >= 1")
    if j_star < 1 or n_nodes > 2**j_star - 1:
        raise FitError(f"target size {n_nodes} exceeds the {2**j_star - 1} nodes below level {j_star}")
    nu = vertical_residuals(coeffs, j_star)
    nodes = {ROOT}
    while len(nodes) < n_nodes:
        leaves = [ix for ix in outer_leaves(DyadicTree(frozenset(nodes))).leaves if ix.j < j_star]
        best = min(leaves, key=lambda ix: (-nu[ix], ix.j, ix.k))
        if check:
            assert all(nu[best] >= nu[ix] for ix in leaves)
        nodes.add(best)
    return DyadicTree(frozenset(nodes))


def config_dict(cfg: FitConfig) -> dict:
    return asdict(cfg)
