"""Known design distributions on [0, 1], regression test functions and samples.

Samples follow ``Y = f(X) + eps`` with ``X = G^{-1}(U)``, ``U`` uniform, and
``eps`` a Gaussian truncated so that ``|Y| <= M``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats


class DesignError(ValueError):
    pass


class CatalogError(KeyError):
    def __init__(self, kind: str, name: str, valid):
        self.kind, self.name, self.valid = kind, name, sorted(valid)
        super().__init__(f"unknown {kind} {name!r}; valid names: {', '.join(self.valid)}")

    def __str__(self):
        return self.args[0]


def _check_unit(x, what="x"):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise DesignError(f"{what} must lie in [0, 1]")
    return x


@dataclass(frozen=True)
class DesignCdf:
    """A known design CDF ``G`` with inverse and density on [0, 1].

    ``breakpoints`` lists interior points where the density is not smooth;
    quadrature routines split there.
    """

    name: str
    cdf_fn: Callable[[np.ndarray], np.ndarray]
    inverse_fn: Callable[[np.ndarray], np.ndarray]
    density_fn: Callable[[np.ndarray], np.ndarray]
    breakpoints: tuple[float, ...] = ()
    closed_form_inverse: bool = True

    def cdf(self, x):
        x = _check_unit(x)
        return np.clip(self.cdf_fn(x), 0.0, 1.0)

    def inverse(self, u):
        u = _check_unit(u, "u")
        return np.clip(self.inverse_fn(u), 0.0, 1.0)

    def density(self, x):
        return self.density_fn(np.asarray(x, dtype=float))

    def measure(self, a, b):
        """G_X([a, b))."""
        return self.cdf(b) - self.cdf(a)


def cdf_eval(d: DesignCdf, x):
    return d.cdf(x)


def cdf_inverse(d: DesignCdf, u):
    return d.inverse(u)


def _invert_monotone(cdf_fn, density_fn, u, iters=60):
    """Safeguarded Newton on [0, 1] for a strictly increasing smooth CDF."""
    u = np.asarray(u, dtype=float)
    shape = u.shape
    u = u.ravel()
    lo = np.zeros_like(u)
    hi = np.ones_like(u)
    x = u.copy()
    active = np.arange(u.size)
    for _ in range(iters):
        if active.size == 0:
            break
        xa, ua = x[active], u[active]
        g = cdf_fn(xa) - ua
        lo[active] = np.where(g < 0, xa, lo[active])
        hi[active] = np.where(g > 0, xa, hi[active])
        with np.errstate(divide="ignore", invalid="ignore"):
            step = xa - g / density_fn(xa)
        la, ha = lo[active], hi[active]
        ok = np.isfinite(step) & (step > la) & (step < ha)
        x_new = np.where(ok, step, 0.5 * (la + ha))
        x_new = np.where(g == 0, xa, x_new)
        x[active] = x_new
        active = active[np.abs(x_new - xa) > 4e-16]
    return x.reshape(shape)


def _uniform():
    return DesignCdf(
        "uniform",
        lambda x: x,
        lambda u: u,
        lambda x: np.ones_like(x),
    )


def _power(p: int):
    return DesignCdf(
        f"power{p}",
        lambda x: x**p,
        lambda u: u ** (1.0 / p),
        lambda x: p * x ** (p - 1),
    )


# two slopes: 1.6 on [0, 1/2), 0.4 on [1/2, 1]
_PL_KNOT, _PL_S1, _PL_S2 = 0.5, 1.6, 0.4
_PL_U = _PL_KNOT * _PL_S1


def _piecewise_linear():
    def cdf(x):
        return np.where(x < _PL_KNOT, _PL_S1 * x, _PL_U + _PL_S2 * (x - _PL_KNOT))

    def inv(u):
        return np.where(u < _PL_U, u / _PL_S1, _PL_KNOT + (u - _PL_U) / _PL_S2)

    def dens(x):
        return np.where(x < _PL_KNOT, _PL_S1, _PL_S2)

    return DesignCdf("piecewise", cdf, inv, dens, breakpoints=(_PL_KNOT,))


_S_AMP = 0.8


def _scurve():
    # G(x) = x - a sin(2 pi x) / (2 pi); density 1 - a cos(2 pi x) > 0 for a < 1
    def cdf(x):
        return x - _S_AMP * np.sin(2 * np.pi * x) / (2 * np.pi)

    def dens(x):
        return 1.0 - _S_AMP * np.cos(2 * np.pi * x)

    return DesignCdf(
        "scurve",
        cdf,
        lambda u: _invert_monotone(cdf, dens, u),
        dens,
        closed_form_inverse=False,
    )


DESIGNS: dict[str, Callable[[], DesignCdf]] = {
    "uniform": _uniform,
    "power2": lambda: _power(2),
    "power3": lambda: _power(3),
    "piecewise": _piecewise_linear,
    "scurve": _scurve,
}


def get_design(name: str) -> DesignCdf:
    try:
        return DESIGNS[name]()
    except KeyError:
        raise CatalogError("design", name, DESIGNS) from None


@dataclass(frozen=True)
class TestFunction:
    name: str
    eval_fn: Callable[[np.ndarray], np.ndarray]
    sup_bound: float
    smoothness_tag: str
    breakpoints: tuple[float, ...] = ()

    __test__ = False  # keep pytest from collecting this class

    def __call__(self, x):
        return self.eval_fn(np.asarray(x, dtype=float))


STEP_JUMP = 1.0 / 3.0


def _sine(design):
    return TestFunction(
        "sine", lambda x: np.sin(2 * np.pi * x), 1.0, "lipschitz: A^1 for Haar"
    )


def _step(design):
    return TestFunction(
        "step",
        lambda x: np.where(x < STEP_JUMP, 1.0, -1.0),
        1.0,
        "single jump: B^s but not A^s for s > 1/2",
        breakpoints=(STEP_JUMP,),
    )


def _warped(design: DesignCdf):
    # f = g o G with g(u) = cos(2 pi u)
    return TestFunction(
        "warped",
        lambda x: np.cos(2 * np.pi * design.cdf_fn(x)),
        1.0,
        "warped-regular: f o G^-1 lipschitz",
        breakpoints=design.breakpoints,
    )


def _constant(design):
    return TestFunction("constant", lambda x: np.full_like(x, 0.5), 0.5, "constant")


FUNCTIONS = {"sine": _sine, "step": _step, "warped": _warped, "constant": _constant}


def get_function(name: str, design: DesignCdf | None = None) -> TestFunction:
    try:
        factory = FUNCTIONS[name]
    except KeyError:
        raise CatalogError("function", name, FUNCTIONS) from None
    return factory(design if design is not None else _uniform())


@dataclass
class SampleZ:
    x: np.ndarray
    y: np.ndarray
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise DesignError("x and y must be 1-d arrays of equal length")

    @property
    def n(self) -> int:
        return int(self.x.size)

    def subset(self, idx) -> "SampleZ":
        return SampleZ(self.x[idx], self.y[idx], self.seed, dict(self.meta))


def default_bound(sup_bound: float, sigma: float) -> float:
    return 2.0 * sup_bound + 4.0 * sigma


def generate_sample(
    design: DesignCdf,
    f: TestFunction,
    sigma: float,
    n: int,
    seed: int | None = None,
    M: float | None = None,
    rng: np.random.Generator | None = None,
) -> SampleZ:
    """Draw ``n`` iid pairs with ``X = G^{-1}(U)`` and bounded responses.

    The noise is N(0, sigma^2) truncated symmetrically at ``M - sup|f|`` so
    that every response lies in ``[-M, M]``.
    """
    if n < 1:
        raise DesignError("sample size n must be >= 1")
    if sigma < 0:
        raise DesignError("noise level sigma must be >= 0")
    if M is None:
        M = default_bound(f.sup_bound, sigma)
    half_width = M - f.sup_bound
    if half_width < 0 or (sigma > 0 and half_width == 0):
        raise DesignError(f"bound M={M} leaves no room for noise around sup|f|={f.sup_bound}")
    if rng is None:
        rng = np.random.default_rng(seed)
    u = rng.random(n)
    x = design.inverse(u)
    fx = f(x)
    if sigma > 0:
        c = half_width / sigma
        eps = stats.truncnorm.rvs(-c, c, scale=sigma, size=n, random_state=rng)
    else:
        eps = np.zeros(n)
    y = np.clip(fx + eps, -M, M)
    meta = {"design": design.name, "function": f.name, "sigma": sigma, "M": M, "n": n, "seed": seed}
    return SampleZ(x, y, seed, meta)


def stratified_sample(design: DesignCdf, f: TestFunction, n: int) -> SampleZ:
    """Noiseless sample at ``x_i = G^{-1}((i + 1/2) / n)``."""
    u = (np.arange(n) + 0.5) / n
    x = design.inverse(u)
    return SampleZ(x, f(x), None, {"design": design.name, "function": f.name, "sigma": 0.0, "n": n})


def truncated_noise_variance(sigma: float, half_width: float) -> float:
    if sigma == 0:
        return 0.0
    c = half_width / sigma
    return float(stats.truncnorm.var(-c, c, scale=sigma))


# ---------------------------------------------------------------- file I/O


def _fmt(v: float) -> str:
    return repr(float(v))


def write_sample(sample: SampleZ, csv_path, sidecar_path=None) -> None:
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for xi, yi in zip(sample.x, sample.y):
            w.writerow([_fmt(xi), _fmt(yi)])
    if sidecar_path is None:
        sidecar_path = csv_path.with_suffix(".json")
    keys = ("design", "function", "sigma", "M", "n", "seed")
    meta = {k: sample.meta.get(k) for k in keys}
    Path(sidecar_path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


class SampleFormatError(ValueError):
    def __init__(self, msg, row=None):
        self.row = row
        super().__init__(msg if row is None else f"row {row}: {msg}")


def read_sample(csv_path, sidecar_path=None) -> SampleZ:
    csv_path = Path(csv_path)
    xs, ys = [], []
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y"]:
            raise SampleFormatError("header must be 'x,y'", row=1)
        for row_no, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise SampleFormatError(f"expected 2 fields, got {len(row)}", row=row_no)
            try:
                xi, yi = float(row[0]), float(row[1])
            except ValueError:
                raise SampleFormatError("non-numeric field", row=row_no) from None
            if not (math.isfinite(xi) and math.isfinite(yi)) or not 0.0 <= xi <= 1.0:
                raise SampleFormatError("x must be finite and in [0, 1]", row=row_no)
            xs.append(xi)
            ys.append(yi)
    if not xs:
        raise SampleFormatError("sample has no rows")
    meta = {}
    if sidecar_path is None:
        sidecar_path = csv_path.with_suffix(".json")
    if Path(sidecar_path).exists():
        meta = json.loads(Path(sidecar_path).read_text())
    return SampleZ(np.array(xs), np.array(ys), meta.get("seed"), meta)
