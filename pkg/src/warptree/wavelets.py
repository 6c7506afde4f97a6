"""Periodized wavelets on [0, 1] and their warped versions ``psi_jk(G(x))``.

Haar is evaluated exactly. Daubechies families are tabulated once by the
cascade algorithm and linearly interpolated.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass
from math import comb

import numpy as np

from .design import DesignCdf


class WaveletError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class WaveletFamily:
    """A compactly supported orthonormal wavelet.

    ``filter`` is the low-pass sequence ``h`` (sums to sqrt(2)); ``psi_table``
    and ``phi_table`` hold mother and father values on the grid
    ``t = m 2^-cascade_depth`` covering the support ``[0, support]``.
    """

    name: str
    filter: np.ndarray
    cascade_depth: int
    support: int
    phi_table: np.ndarray | None = None
    psi_table: np.ndarray | None = None

    @property
    def is_haar(self) -> bool:
        return self.name == "haar"

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.psi_table.size) / 2.0**self.cascade_depth


def daubechies_filter(length: int) -> np.ndarray:
    """Extremal-phase Daubechies low-pass filter with ``length`` taps.

    Built by spectral factorisation of the Daubechies polynomial
    ``P(y) = sum_k C(p-1+k, k) y^k`` with ``p = length / 2``.
    """
    if length < 2 or length % 2:
        raise WaveletError("filter length must be even and >= 2")
    p = length // 2
    poly = np.array([1.0, 1.0])
    h = np.array([1.0])
    for _ in range(p):
        h = np.convolve(h, poly)
    if p > 1:
        coeffs = [comb(p - 1 + k, k) for k in range(p)]
        y_roots = np.roots(coeffs[::-1])
        q = np.array([1.0 + 0j])
        for y in y_roots:
            # z + 1/z = 2 - 4y; keep the root inside the unit circle
            b = 2.0 - 4.0 * y
            disc = np.sqrt(b * b - 4.0 + 0j)
            z1, z2 = (b + disc) / 2.0, (b - disc) / 2.0
            z = z1 if abs(z1) < 1 else z2
            q = np.convolve(q, [1.0, -z])
        h = np.convolve(h, q).real
    h = h * np.sqrt(2.0) / h.sum()
    if abs(h[0]) < abs(h[-1]):
        h = h[::-1]
    return h


def _cascade(h: np.ndarray, depth: int) -> tuple[np.ndarray, np.ndarray]:
    n_taps = h.size
    L = n_taps - 1
    # phi at the integers 0..L: eigenvector of the two-scale matrix
    A = np.zeros((L + 1, L + 1))
    for n in range(L + 1):
        for k in range(n_taps):
            m = 2 * n - k
            if 0 <= m <= L:
                A[n, m] += np.sqrt(2.0) * h[k]
    vals, vecs = np.linalg.eig(A)
    i = int(np.argmin(np.abs(vals - 1.0)))
    phi = np.real(vecs[:, i])
    phi = phi / phi.sum()
    for r in range(1, depth + 2):
        step = 2 ** (r - 1)
        new = np.zeros(L * 2**r + 1)
        m = np.arange(new.size)
        for k in range(n_taps):
            src = m - k * step
            ok = (src >= 0) & (src < phi.size)
            new[ok] += np.sqrt(2.0) * h[k] * phi[src[ok]]
        phi = new
    # phi now on grid 2^-(depth+1); psi(t) = sqrt2 sum_k g_k phi(2t - k)
    g = np.array([(-1) ** k * h[n_taps - 1 - k] for k in range(n_taps)])
    psi = np.zeros(L * 2**depth + 1)
    m = np.arange(psi.size)
    for k in range(n_taps):
        src = 4 * m - k * 2 ** (depth + 1)
        ok = (src >= 0) & (src < phi.size)
        psi[ok] += np.sqrt(2.0) * g[k] * phi[src[ok]]
    return phi[::2], psi


@functools.lru_cache(maxsize=None)
def get_wavelet(name: str = "haar", cascade_depth: int = 14) -> WaveletFamily:
    name = name.lower()
    if name == "haar":
        h = np.array([1.0, 1.0]) / np.sqrt(2.0)
        return WaveletFamily("haar", h, cascade_depth, 1)
    if name.startswith("db") and name[2:].isdigit():
        length = int(name[2:])
        if length % 2 or not 4 <= length <= 12:
            raise WaveletError("Daubechies filter length must be even, 4..12")
        h = daubechies_filter(length)
        phi, psi = _cascade(h, cascade_depth)
        return WaveletFamily(name, h, cascade_depth, length - 1, phi, psi)
    raise WaveletError(f"unknown wavelet {name!r}; use 'haar' or 'db4'..'db12'")


def mother_eval(w: WaveletFamily, t):
    t = np.asarray(t, dtype=float)
    if w.is_haar:
        return np.where((t >= 0) & (t < 0.5), 1.0, np.where((t >= 0.5) & (t < 1.0), -1.0, 0.0))
    return np.interp(t, w.grid, w.psi_table, left=0.0, right=0.0)


def father_eval(w: WaveletFamily, t):
    t = np.asarray(t, dtype=float)
    if w.is_haar:
        return np.where((t >= 0) & (t < 1.0), 1.0, 0.0)
    return np.interp(t, w.grid, w.phi_table, left=0.0, right=0.0)


def level_terms(w: WaveletFamily, j: int, u):
    """Nonzero periodized contributions at level ``j`` for points ``u``.

    Returns ``(ks, vals)`` of shape ``(R, len(u))`` such that
    ``psi_jk(u_i) = sum_r vals[r, i] * [ks[r, i] == k]``. Level ``-1`` is the
    periodized scaling function.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if j < -1:
        raise WaveletError("level must be >= -1")
    jj = max(j, 0)
    size = 2**jj
    t = u * size
    cell = np.minimum(np.floor(t), size - 1).astype(np.int64)
    frac = t - cell
    if w.is_haar:
        ks = cell[None, :]
        if j == -1:
            return np.zeros_like(ks), np.ones((1, u.size))
        # right-closed last cell: frac == 1 only at u == 1, counted as right half
        vals = np.where(frac < 0.5, 1.0, -1.0) * 2.0 ** (j / 2.0)
        return ks, vals[None, :]
    R = w.support
    r = np.arange(R)[:, None]
    ks = np.mod(cell[None, :] - r, size)
    arg = frac[None, :] + r
    if j == -1:
        return ks, father_eval(w, arg)
    return ks, 2.0 ** (j / 2.0) * mother_eval(w, arg)


def _check_index(j, k):
    if j < -1 or (j == -1 and k != 0) or (j >= 0 and not 0 <= k < 2**j):
        raise WaveletError(f"invalid index {(j, k)}")


def psi_jk_eval(w: WaveletFamily, j: int, k: int, u):
    _check_index(j, k)
    u = np.asarray(u, dtype=float)
    ks, vals = level_terms(w, j, u.ravel())
    out = np.where(ks == (k if j >= 0 else 0), vals, 0.0).sum(axis=0)
    return out.reshape(u.shape) if u.ndim else float(out[0])


def warped_eval(w: WaveletFamily, j: int, k: int, design: DesignCdf, x):
    return psi_jk_eval(w, j, k, design.cdf(x))


def write_cascade_csv(w: WaveletFamily, path) -> None:
    if w.is_haar:
        t = np.array([0.0, 0.5, 1.0])
        v = mother_eval(w, t)
    else:
        t, v = w.grid, w.psi_table
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "value"])
        for ti, vi in zip(t, v):
            wr.writerow([repr(float(ti)), repr(float(vi))])
