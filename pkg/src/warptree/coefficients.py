"""Empirical and theoretical scaling / wavelet coefficients and residuals.

Theoretical coefficients are computed in the design variable ``x``: the
change of variables ``u = G(x)`` turns ``int_0^1 f(G^-1(u)) psi(u) du`` into
``int f(x) psi(G(x)) g(x) dx`` with ``g`` the design density, and the
cells of ``psi`` map to ``[G^-1(a), G^-1(b)]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .design import DesignCdf, SampleZ, TestFunction
from .dyadic import DyadicIndex, SCALING, children
from .quadrature import cell_integrals
from .wavelets import WaveletFamily, level_terms, psi_jk_eval

KINDS = ("scaling-empirical", "scaling-theoretical", "wavelet-empirical", "wavelet-theoretical")


class CoefficientError(ValueError):
    pass


@dataclass
class CoefficientMap:
    entries: dict = field(default_factory=dict)
    kind: str = "wavelet-empirical"
    max_level: int = 0

    def __getitem__(self, ix):
        try:
            return self.entries[DyadicIndex(*ix)]
        except KeyError:
            raise CoefficientError(f"missing coefficient {tuple(ix)}") from None

    def __contains__(self, ix):
        return DyadicIndex(*ix) in self.entries

    def __len__(self):
        return len(self.entries)

    def get(self, ix, default=0.0):
        return self.entries.get(DyadicIndex(*ix), default)

    def level(self, j: int) -> np.ndarray:
        """Dense array of level-``j`` values (zeros where absent)."""
        out = np.zeros(2 ** max(j, 0))
        for ix, v in self.entries.items():
            if ix.j == j:
                out[ix.k] = v
        return out

    def restrict(self, indices) -> "CoefficientMap":
        keep = {DyadicIndex(*ix) for ix in indices}
        return CoefficientMap({ix: v for ix, v in self.entries.items() if ix in keep}, self.kind, self.max_level)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["j", "k", "value", "kind"])
            for ix in sorted(self.entries):
                w.writerow([ix.j, ix.k, repr(float(self.entries[ix])), self.kind])


@dataclass
class ResidualMap:
    entries: dict = field(default_factory=dict)
    kind: str = "vertical"
    truncation_level: int | None = None

    def __getitem__(self, ix):
        return self.entries[DyadicIndex(*ix)]

    def __len__(self):
        return len(self.entries)

    def items(self):
        return self.entries.items()


def _level_dict(j, values) -> dict:
    return {DyadicIndex(j, k): float(v) for k, v in enumerate(values)}


# --------------------------------------------------------------- empirical


def _require_sample(z: SampleZ):
    if z.n == 0:
        raise CoefficientError("empty sample")


def cell_of(x, level: int) -> np.ndarray:
    """Position of the level-``level`` dyadic cell holding each x (last cell closed)."""
    size = 2**level
    return np.minimum(np.floor(np.asarray(x, dtype=float) * size), size - 1).astype(np.int64)


def _in_cell(x, ix):
    return cell_of(x, ix[0]) == ix[1]


def empirical_measure(z: SampleZ, ix) -> float:
    _require_sample(z)
    ix = DyadicIndex(*ix)
    if ix.j < 0:
        raise CoefficientError("empirical measure needs j >= 0")
    return float(np.count_nonzero(_in_cell(z.x, ix))) / z.n


def empirical_scaling_coeff(z: SampleZ, ix) -> float:
    """s_I(z) = (1/n) sum y_i 1_I(x_i) / sqrt(G_n(I)); zero on empty cells."""
    mass = empirical_measure(z, ix)
    if mass == 0.0:
        return 0.0
    inside = _in_cell(z.x, DyadicIndex(*ix))
    return float(z.y[inside].sum() / z.n / np.sqrt(mass))


def empirical_scaling_coeffs(z: SampleZ, max_level: int) -> CoefficientMap:
    """All s_I(z) for levels 0..max_level."""
    _require_sample(z)
    entries = {}
    for lev in range(max_level + 1):
        cells = cell_of(z.x, lev)
        counts = np.bincount(cells, minlength=2**lev)
        sums = np.bincount(cells, weights=z.y, minlength=2**lev)
        mass = counts / z.n
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(counts > 0, sums / z.n / np.sqrt(mass), 0.0)
        entries.update(_level_dict(lev, s))
    return CoefficientMap(entries, "scaling-empirical", max_level)


def empirical_wavelet_coeff(z: SampleZ, w: WaveletFamily, d: DesignCdf, ix) -> float:
    _require_sample(z)
    j, k = ix
    return float(np.mean(z.y * psi_jk_eval(w, j, k, d.cdf(z.x))))


def empirical_wavelet_coeffs(z: SampleZ, w: WaveletFamily, d: DesignCdf, j_star: int) -> CoefficientMap:
    """d_{j,k}(z) for the scaling index and every level j < j_star."""
    _require_sample(z)
    u = d.cdf(z.x)
    entries = {}
    for j in range(-1, j_star):
        ks, vals = level_terms(w, j, u)
        dj = np.bincount(ks.ravel(), weights=(vals * z.y[None, :]).ravel(), minlength=2 ** max(j, 0)) / z.n
        entries.update(_level_dict(j, dj) if j >= 0 else {SCALING: float(dj[0])})
    return CoefficientMap(entries, "wavelet-empirical", j_star - 1)


# ------------------------------------------------------------- theoretical


def _breaks(f: TestFunction, d: DesignCdf):
    return tuple(f.breakpoints) + tuple(d.breakpoints)


def _weighted(f: TestFunction, d: DesignCdf):
    return lambda x: f(x) * d.density(x)


def theoretical_scaling_coeffs(f: TestFunction, d: DesignCdf, level: int, quad_order=16, tol=1e-9) -> np.ndarray:
    """s_I = int_I f dG / sqrt(G(I)) for every cell of level ``level`` (x-space cells)."""
    if quad_order < 16:
        raise CoefficientError("quad_order must be >= 16")
    edges = np.arange(2**level + 1) / 2**level
    ints = cell_integrals(_weighted(f, d), edges, _breaks(f, d), order=quad_order, tol=tol)
    mass = np.diff(d.cdf(edges))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(mass > 0, ints / np.sqrt(mass), 0.0)


def theoretical_scaling_coeff(f: TestFunction, d: DesignCdf, ix, quad_order=16, tol=1e-9) -> float:
    if quad_order < 16:
        raise CoefficientError("quad_order must be >= 16")
    j, k = ix
    a, b = k / 2**j, (k + 1) / 2**j
    mass = float(d.cdf(b) - d.cdf(a))
    if mass <= 0:
        return 0.0
    val = cell_integrals(_weighted(f, d), [a, b], _breaks(f, d), order=quad_order, tol=tol)[0]
    return float(val / np.sqrt(mass))


def theoretical_scaling_map(f, d, max_level, quad_order=16) -> CoefficientMap:
    entries = {}
    for lev in range(max_level + 1):
        entries.update(_level_dict(lev, theoretical_scaling_coeffs(f, d, lev, quad_order)))
    return CoefficientMap(entries, "scaling-theoretical", max_level)


def _haar_level(f, d, j, quad_order, tol):
    if j == -1:
        return cell_integrals(_weighted(f, d), [0.0, 1.0], _breaks(f, d), order=quad_order, tol=tol)
    u_edges = np.arange(2 ** (j + 1) + 1) / 2 ** (j + 1)
    x_edges = d.inverse(u_edges)
    halves = cell_integrals(_weighted(f, d), x_edges, _breaks(f, d), order=quad_order, tol=tol)
    return 2.0 ** (j / 2.0) * (halves[0::2] - halves[1::2])


def _generic_coeff(f, w, d, j, k, quad_order, tol, refine=6):
    jj = max(j, 0)
    u_edges = np.arange(2 ** (jj + refine) + 1) / 2 ** (jj + refine)
    x_edges = np.unique(d.inverse(u_edges))
    integrand = lambda x: f(x) * psi_jk_eval(w, j, k, d.cdf(x)) * d.density(x)
    parts = cell_integrals(integrand, x_edges, _breaks(f, d), order=quad_order, tol=tol)
    return float(parts.sum())


def theoretical_wavelet_coeff(f, w: WaveletFamily, d: DesignCdf, ix, quad_order=16, tol=1e-9) -> float:
    """d_{j,k} = <f, psi_jk(G)> in L^2(G_X)."""
    if quad_order < 16:
        raise CoefficientError("quad_order must be >= 16")
    j, k = ix
    if not w.is_haar:
        return _generic_coeff(f, w, d, j, k, quad_order, tol)
    if j == -1:
        return float(_haar_level(f, d, -1, quad_order, tol)[0])
    base = k / 2**j
    step = 1 / 2 ** (j + 1)
    x_edges = d.inverse(np.array([base, base + step, base + 2 * step]))
    halves = cell_integrals(_weighted(f, d), x_edges, _breaks(f, d), order=quad_order, tol=tol)
    return float(2.0 ** (j / 2.0) * (halves[0] - halves[1]))


def theoretical_wavelet_coeffs(f, w: WaveletFamily, d: DesignCdf, j_star: int, quad_order=16, tol=1e-9) -> CoefficientMap:
    """Quadrature-oracle d_{j,k} for the scaling index and all levels j < j_star."""
    entries = {}
    for j in range(-1, j_star):
        if w.is_haar:
            vals = _haar_level(f, d, j, quad_order, tol)
        else:
            vals = [_generic_coeff(f, w, d, j, k, quad_order, tol) for k in range(2 ** max(j, 0))]
        entries.update(_level_dict(j, vals) if j >= 0 else {SCALING: float(vals[0])})
    return CoefficientMap(entries, "wavelet-theoretical", j_star - 1)


# --------------------------------------------------------------- residuals


def piecewise_residual(coeffs: CoefficientMap, ix) -> float:
    """sqrt(sum_{J in C(I)} s_J^2 - s_I^2), clamped at zero."""
    ix = DyadicIndex(*ix)
    c0, c1 = children(ix)
    energy = coeffs[c0] ** 2 + coeffs[c1] ** 2 - coeffs[ix] ** 2
    return float(np.sqrt(max(0.0, energy)))


def piecewise_residuals(coeffs: CoefficientMap, j_star: int) -> ResidualMap:
    entries = {}
    for j in range(j_star):
        s = coeffs.level(j)
        sc = coeffs.level(j + 1)
        energy = sc[0::2] ** 2 + sc[1::2] ** 2 - s**2
        entries.update(_level_dict(j, np.sqrt(np.maximum(energy, 0.0))))
    return ResidualMap(entries, "piecewise", j_star)


def vertical_residual(coeffs: CoefficientMap, ix, j_star: int) -> float:
    """sqrt of the summed squares of d_{l,m} over the subtree rooted at ``ix``, l < j_star.

    The node itself is included.
    """
    j, k = ix
    if j < 0 or j >= j_star:
        raise CoefficientError("vertical residual needs 0 <= j < j_star")
    total = 0.0
    for lev in range(j, j_star):
        width = 2 ** (lev - j)
        for m in range(k * width, (k + 1) * width):
            total += coeffs[(lev, m)] ** 2
    return float(np.sqrt(total))


def vertical_residuals(coeffs: CoefficientMap, j_star: int) -> ResidualMap:
    """All nu_{j,k} for j < j_star via nu^2 = d^2 + nu_left^2 + nu_right^2."""
    for j in range(j_star):
        if not all((j, k) in coeffs for k in range(2**j)):
            raise CoefficientError(f"missing wavelet coefficients at level {j}")
    entries = {}
    below = np.zeros(2**j_star)
    for j in range(j_star - 1, -1, -1):
        sq = coeffs.level(j) ** 2 + below[0::2] + below[1::2]
        entries.update(_level_dict(j, np.sqrt(sq)))
        below = sq
    return ResidualMap(entries, "vertical", j_star)


def warped_gram(w: WaveletFamily, d: DesignCdf, max_level: int, quad_order=16, tol=1e-12):
    """Gram matrix of the warped Haar system up to ``max_level`` in L^2(G_X).

    Products of Haar functions are constant on the level ``max_level + 1``
    cells of u, so the inner products reduce to those cells' G_X masses,
    which are integrated from the density in x.
    Returns ``(indices, gram)``.
    """
    if not w.is_haar:
        raise CoefficientError("warped_gram supports the Haar family only")
    fine = max_level + 1
    u_edges = np.arange(2**fine + 1) / 2**fine
    x_edges = d.inverse(u_edges)
    masses = cell_integrals(d.density, x_edges, d.breakpoints, order=quad_order, tol=tol)
    mid = 0.5 * (u_edges[:-1] + u_edges[1:])
    indices = [SCALING] + [DyadicIndex(j, k) for j in range(max_level + 1) for k in range(2**j)]
    basis = np.array([psi_jk_eval(w, ix.j, ix.k, mid) for ix in indices])
    return indices, (basis * masses[None, :]) @ basis.T
