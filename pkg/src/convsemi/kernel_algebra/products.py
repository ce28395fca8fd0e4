"""Truncated infinite products with explicit tail bounds.

Two Laplace-side kernels live here:

* ``GevreyProduct`` -- ``P(z) = prod_j (1 + l z / m_j)`` with ``m_j = j**s``
  (``s > 1``); its kernel has transform ``1 / P``.
* ``BaumerProduct`` -- ``K(lam) = lam**-2 prod_{n>=0} (n**2 - lam)/(n**2 + lam)``.

Neither kernel is sampled in time; only the products are evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .grid import ResidualReport
from .kernels import Kernel

CHUNK = 1 << 20


@dataclass(frozen=True)
class ProductValue:
    """Truncated product and a bound on ``|full - truncated|``."""

    value: complex
    tail_bound: float
    factors: int


EPS = np.finfo(float).eps


def _clog1p(z: np.ndarray) -> np.ndarray:
    """``log(1 + z)`` accurate for tiny complex ``z`` (numpy's complex log1p is not)."""
    x, y = z.real, z.imag
    re = 0.5 * np.log1p(2 * x + x * x + y * y)
    return re + 1j * np.arctan2(y, 1 + x)


def _log_prod(term, n_start: int, n_stop: int) -> tuple[complex, float]:
    """``sum_{j=n_start}^{n_stop} log1p(term(j))`` in chunks, and ``sum |log1p|``."""
    total = 0.0 + 0.0j
    mag = 0.0
    for a in range(n_start, n_stop + 1, CHUNK):
        j = np.arange(a, min(n_stop, a + CHUNK - 1) + 1, dtype=float)
        t = term(j)
        logs = np.log1p(t) if np.isrealobj(t) else _clog1p(t)
        total += np.sum(logs)
        mag += float(np.sum(np.abs(logs)))
    return total, mag


def _rounding_allowance(n_terms: int, magnitude: float) -> float:
    # pairwise summation of n logs, then one exp: a generous relative bound
    return 4 * EPS * (math.log2(max(n_terms, 2)) + 2) * (magnitude + 1)


@dataclass(frozen=True)
class GevreyProduct(Kernel):
    """Kernel whose transform is ``1/P(lam)``, ``P(z) = prod_{j>=1} (1 + l z / j**s)``.

    Parameters
    ----------
    s : float
        Exponent of the sequence ``m_j = j**s``; must exceed 1.  The growth
        order of ``P`` is ``a = 1/s``.
    l : float
        Scale in front of ``z``.
    trunc : int
        Number of factors kept.
    """

    s: float = 2.0
    l: float = 1.0
    trunc: int = 10**7

    sampleable = False

    def __post_init__(self) -> None:
        if not self.s > 1:
            raise ValueError("the sequence exponent must exceed 1")
        if self.trunc < 1:
            raise ValueError("need at least one factor")

    @property
    def order(self) -> float:
        return 1.0 / self.s

    def __call__(self, t):
        raise TypeError("GevreyProduct is defined on the Laplace side only")

    def polynomial(self, z: complex) -> ProductValue:
        """Truncated ``P(z)``.

        The bound is ``|P_J| (exp(l|z| zeta(s, J+1)) - 1)`` plus an allowance
        for rounding in the partial product.
        """
        z = complex(z)
        J = self.trunc
        if z == 0:
            return ProductValue(1.0 + 0j, 0.0, J)
        w = z if z.imag else z.real
        logp, mag = _log_prod(lambda j: self.l * w / j**self.s, 1, J)
        val = complex(np.exp(logp))
        tail = float(self.l * abs(z) * special.zeta(self.s, J + 1))
        bound = abs(val) * (math.expm1(tail) + _rounding_allowance(J, mag))
        return ProductValue(val, float(bound), J)

    def laplace_valid(self, lam):
        return complex(lam).real >= 0

    def laplace(self, lam):
        return 1.0 / self.polynomial(lam).value


@dataclass(frozen=True)
class BaumerProduct(Kernel):
    """Kernel with transform ``lam**-2 prod_{n=0}^{trunc} (n**2 - lam)/(n**2 + lam)``."""

    trunc: int = 10**6

    sampleable = False

    def __call__(self, t):
        raise TypeError("BaumerProduct is defined on the Laplace side only")

    def product(self, lam: complex) -> ProductValue:
        """Truncated ``K(lam)`` with a bound on the neglected factors."""
        lam = complex(lam)
        J = self.trunc
        # direct products so that a vanishing factor gives an exact zero
        acc = -1.0 + 0j  # n = 0 factor
        for a in range(1, J + 1, CHUNK):
            n2 = np.arange(a, min(J, a + CHUNK - 1) + 1, dtype=float) ** 2
            acc *= complex(np.prod((n2 - lam) / (n2 + lam)))
        val = acc / lam**2
        # |n^2 + lam| >= n^2 for Re lam >= 0, so |factor - 1| <= 2|lam|/n^2
        tail = 2 * abs(lam) * float(special.zeta(2.0, J + 1))
        # sequential products: rounding grows at most linearly in J
        bound = abs(val) * (math.expm1(tail) + 4 * EPS * (J + 2))
        return ProductValue(val, float(bound), J)

    def laplace_valid(self, lam):
        return complex(lam).real > 0

    def laplace(self, lam):
        return self.product(lam).value


def gevrey_bound_check(
    k: GevreyProduct, sample_points, tol: float = 1e-3
) -> ResidualReport:
    """Fit ``exp((l|z|)^a) <= |P(z)| <= exp((L|z|)^a)`` on sample points.

    The empirical constants are ``l_emp = min (log|P|)^(1/a) / |z|`` and
    ``L_emp = max`` of the same ratio over the nonzero samples, so the
    sandwich holds on the sample set exactly when ``l_emp > 0``.  The
    reported residual is the largest relative truncation bound of the
    product values; the check passes when the sandwich holds and the
    truncation is below ``tol``.
    """
    pts = [complex(z) for z in sample_points]
    if not pts:
        raise ValueError("empty sample set")
    if any(z.real < 0 for z in pts):
        raise ValueError("sample points must satisfy Re z >= 0")
    a = k.order
    vals = [k.polynomial(z) for z in pts]
    logabs = np.array([math.log(abs(v.value)) for v in vals])
    rel_tail = max(v.tail_bound / abs(v.value) for v in vals)
    mods = np.array([abs(z) for z in pts])
    nz = mods > 0
    values: dict = {"order": a, "log_abs_P": logabs.tolist(), "abs_z": mods.tolist()}
    holds = True
    if nz.any():
        lp = logabs[nz]
        holds = bool(np.all(lp > 0))
        ratio = np.where(lp > 0, np.abs(lp) ** (1 / a), 0.0) / mods[nz]
        values["l_emp"] = float(ratio.min())
        values["L_emp"] = float(ratio.max())
        if nz.sum() >= 2:
            x = mods[nz] ** a
            slope, intercept = np.polyfit(x, lp, 1)
            values["fit_slope"] = float(slope)
            values["fit_intercept"] = float(intercept)
            order_idx = np.argsort(mods[nz])
            values["monotone"] = bool(np.all(np.diff(lp[order_idx]) >= 0))
    values["sandwich_holds"] = holds
    report = ResidualReport(
        "gevrey_bound",
        rel_tail if holds else math.inf,
        {},
        {"s": k.s, "l": k.l, "trunc": k.trunc, "points": pts},
        tol,
        values=values,
    )
    return report
