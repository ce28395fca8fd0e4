"""Analytic convolution kernels on [0, inf).

Every sampleable kernel knows how to integrate itself against smooth
functions cell by cell (``cell_rule``).  That rule is what the product
quadrature in :mod:`convsemi.kernel_algebra.quadrature` is built on: the
kernel is integrated exactly (to Gauss accuracy), only the other factor is
interpolated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any

import numpy as np
from scipy import special

from .grid import Grid, SampledFn

#: Gauss-Legendre points per half cell
GAUSS_POINTS = 8


@lru_cache(maxsize=None)
def _legendre01(q: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = special.roots_legendre(q)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=None)
def _jacobi01(q: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    # int_0^1 xi^beta g(xi) dxi = sum w_i g(xi_i)
    x, w = special.roots_jacobi(q, 0.0, beta)
    return (x + 1) / 2, w * 2.0 ** (-beta - 1)


@dataclass(frozen=True, eq=False)
class CellRule:
    """Per-cell quadrature ``int_cell k(u) phi(u) du ~ sum_q w[c,q] phi((c + xi[c,q]) dt)``.

    The kernel values are folded into the weights.
    """

    xi: np.ndarray
    w: np.ndarray

    @property
    def lower(self) -> np.ndarray:
        """Moments against the hat attached to the left node of each cell."""
        return np.sum(self.w * (1 - self.xi), axis=1)

    @property
    def upper(self) -> np.ndarray:
        """Moments against the hat attached to the right node of each cell."""
        return np.sum(self.w * self.xi, axis=1)

    @property
    def total(self) -> np.ndarray:
        return np.sum(self.w, axis=1)


class Kernel:
    """Base class for analytic kernels.

    Subclasses override ``__call__``, and whichever of ``laplace``,
    ``power``, ``growth`` they can provide in closed form.
    """

    #: exponent ``beta`` with ``k(u) ~ u**beta`` near 0 when non-smooth there
    singular_exponent: float = 0.0
    breakpoints: tuple[float, ...] = ()
    support_end: float | None = None
    #: abscissa of |k|; Laplace integrals converge absolutely for Re > abs_k
    abs_k: float = 0.0
    sampleable: bool = True

    def __call__(self, t: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def regular_part(self, u: np.ndarray) -> np.ndarray:
        """``k(u) / u**singular_exponent``, smooth up to u = 0."""
        u = np.asarray(u, dtype=float)
        return self(u) / u**self.singular_exponent

    def laplace(self, lam: complex) -> complex | None:
        return None

    def laplace_valid(self, lam: complex) -> bool:
        return complex(lam).real > self.abs_k

    def power(self, n: int) -> "Kernel | None":
        return self if n == 1 else None

    def growth(self) -> tuple[float, float] | None:
        return None

    @property
    def fractional_order(self) -> float | None:
        """``alpha`` when the kernel is ``j_alpha``."""
        return None

    @property
    def is_singular(self) -> bool:
        return self.singular_exponent < 0

    def _needs_jacobi(self) -> bool:
        b = self.singular_exponent
        return b != 0 and not (b > 0 and float(b).is_integer())

    # -- quadrature ---------------------------------------------------

    def cell_rule(self, grid: Grid) -> CellRule:
        return _cell_rule(self, grid)

    def sample(self, grid: Grid) -> SampledFn:
        if not self.sampleable:
            raise TypeError(f"{self!r} is defined on the Laplace side only")
        vals = np.asarray(self(grid.t), dtype=complex if self._complex else float)
        if self.is_singular:
            # point value at 0 is infinite: use the exact first cell average
            vals[0] = self.cell_rule(grid).total[0] / grid.dt
        b = self.support_end
        if b is not None and b > grid.horizon:
            b = None
        g = self.growth()
        return SampledFn(grid, vals, b, kernel=self, growth=g)

    @property
    def _complex(self) -> bool:
        return False


@lru_cache(maxsize=16)
def _cell_rule(kernel: Kernel, grid: Grid) -> CellRule:
    if not kernel.sampleable:
        raise TypeError(f"{kernel!r} is defined on the Laplace side only")
    n_cells = grid.n_points - 1
    dt = grid.dt
    x, w = _legendre01(GAUSS_POINTS)
    split = np.full(n_cells, 0.5)
    for bp in kernel.breakpoints:
        c = int(math.floor(bp / dt))
        frac = bp / dt - c
        if 0 <= c < n_cells and 1e-12 < frac < 1 - 1e-12:
            split[c] = frac
    s = split[:, None]
    xi = np.concatenate([s * x, s + (1 - s) * x], axis=1)
    wx = np.concatenate([s * w, (1 - s) * w], axis=1) * dt
    u = (np.arange(n_cells)[:, None] + xi) * dt
    wts = wx * kernel(u)
    if kernel._needs_jacobi():
        beta = kernel.singular_exponent
        xj, wj = _jacobi01(2 * GAUSS_POINTS, float(beta))
        xi[0] = xj
        wts[0] = dt ** (beta + 1) * wj * kernel.regular_part(dt * xj)
    return CellRule(xi, wts)


@dataclass(frozen=True)
class FractionalJ(Kernel):
    """``j_alpha(t) = t**(alpha-1) / Gamma(alpha)``."""

    alpha: float

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def singular_exponent(self) -> float:  # type: ignore[override]
        return self.alpha - 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(t > 0, np.abs(t) ** (self.alpha - 1), 0.0) / special.gamma(self.alpha)
        if self.alpha == 1:
            out = np.where(t >= 0, 1.0, 0.0)
        elif self.alpha < 1:
            out = np.where(t == 0, np.inf, out)
        return out

    def regular_part(self, u):
        return np.full(np.shape(u), 1.0 / special.gamma(self.alpha))

    def laplace(self, lam):
        return complex(lam) ** (-self.alpha)

    def power(self, n):
        return FractionalJ(n * self.alpha)

    def growth(self):
        return (1.0, 0.0) if self.alpha == 1 else None

    @property
    def fractional_order(self):
        return self.alpha


@dataclass(frozen=True)
class Heaviside(Kernel):
    """``chi(t) = 1``."""

    def __call__(self, t):
        return np.where(np.asarray(t, dtype=float) >= 0, 1.0, 0.0)

    def laplace(self, lam):
        return 1.0 / complex(lam)

    def power(self, n):
        return self if n == 1 else FractionalJ(float(n))

    def growth(self):
        return (1.0, 0.0)

    @property
    def fractional_order(self):
        return 1.0


@dataclass(frozen=True)
class ExpWeighted(Kernel):
    """``e_z(t) * inner(t)`` with ``e_z(t) = exp(z t)``."""

    z: complex
    inner: Kernel

    @property
    def singular_exponent(self):  # type: ignore[override]
        return self.inner.singular_exponent

    @property
    def breakpoints(self):  # type: ignore[override]
        return self.inner.breakpoints

    @property
    def support_end(self):  # type: ignore[override]
        return self.inner.support_end

    @property
    def abs_k(self):  # type: ignore[override]
        return self.inner.abs_k + complex(self.z).real

    @property
    def _complex(self):
        return complex(self.z).imag != 0 or self.inner._complex

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        e = np.exp(self.z * t)
        if not self._complex:
            e = e.real
        with np.errstate(invalid="ignore"):
            out = e * self.inner(t)
        return out

    def regular_part(self, u):
        e = np.exp(self.z * np.asarray(u, dtype=float))
        return (e if self._complex else e.real) * self.inner.regular_part(u)

    def laplace(self, lam):
        return self.inner.laplace(complex(lam) - self.z)

    def power(self, n):
        p = self.inner.power(n)
        return None if p is None else ExpWeighted(self.z, p)

    def growth(self):
        g = self.inner.growth()
        return None if g is None else (g[0], g[1] + complex(self.z).real)


@dataclass(frozen=True)
class Indicator01(Kernel):
    """Indicator of ``(0, 1)``."""

    breakpoints = (1.0,)
    support_end = 1.0
    abs_k = -math.inf

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= 0) & (t < 1), 1.0, np.where(t == 1, 0.5, 0.0))

    def laplace(self, lam):
        lam = complex(lam)
        if lam == 0:
            return 1.0 + 0j
        return (1 - np.exp(-lam)) / lam

    def growth(self):
        return (1.0, 0.0)


@dataclass(frozen=True)
class HeatBoundary(Kernel):
    """``exp(-a**2 / (4 t)) / (2 sqrt(pi t**3))``; transform ``exp(-a sqrt(lam)) / a``."""

    a: float

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ValueError("a must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            logk = -self.a**2 / (4 * t) - 1.5 * np.log(t) - math.log(2 * math.sqrt(math.pi))
            out = np.where(t > 0, np.exp(logk), 0.0)
        return out

    def laplace(self, lam):
        return complex(np.exp(-self.a * np.sqrt(complex(lam)))) / self.a

    def power(self, n):
        if n == 1:
            return self
        # (exp(-a sqrt(lam))/a)**n = n a**(1-n) * exp(-n a sqrt(lam))/(n a)
        return Scaled(n * self.a ** (1 - n), HeatBoundary(n * self.a))

    def growth(self):
        peak = self.a**2 / 6  # argmax of the kernel
        return (float(self(peak)), 0.0)


@dataclass(frozen=True)
class Scaled(Kernel):
    """``c * inner``."""

    c: complex
    inner: Kernel

    @property
    def singular_exponent(self):  # type: ignore[override]
        return self.inner.singular_exponent

    @property
    def breakpoints(self):  # type: ignore[override]
        return self.inner.breakpoints

    @property
    def support_end(self):  # type: ignore[override]
        return self.inner.support_end

    @property
    def abs_k(self):  # type: ignore[override]
        return self.inner.abs_k

    @property
    def _complex(self):
        return complex(self.c).imag != 0 or self.inner._complex

    def __call__(self, t):
        c = self.c if self._complex else complex(self.c).real
        return c * self.inner(t)

    def regular_part(self, u):
        c = self.c if self._complex else complex(self.c).real
        return c * self.inner.regular_part(u)

    def laplace(self, lam):
        v = self.inner.laplace(lam)
        return None if v is None else self.c * v

    def power(self, n):
        p = self.inner.power(n)
        return None if p is None else Scaled(self.c**n, p)

    def growth(self):
        g = self.inner.growth()
        return None if g is None else (abs(self.c) * g[0], g[1])


@dataclass(frozen=True, eq=False)
class Sampled(Kernel):
    """Kernel known only through samples; trapezoidal cell rule."""

    fn: SampledFn
    abs_k: float = math.nan

    def __post_init__(self) -> None:
        if self.fn.values.ndim != 1:
            raise ValueError("sampled kernels must be scalar")

    @property
    def support_end(self):  # type: ignore[override]
        return self.fn.support_end

    @property
    def _complex(self):
        return np.iscomplexobj(self.fn.values)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.fn.at(np.clip(t, 0, self.fn.grid.horizon))
        return np.where((t >= 0) & (t <= self.fn.grid.horizon), out, 0.0)

    def cell_rule(self, grid):
        if grid != self.fn.grid:
            raise ValueError("sampled kernel used on a different grid")
        return trapezoid_rule(self.fn.values, grid.dt)

    def sample(self, grid):
        if grid != self.fn.grid:
            raise ValueError("sampled kernel used on a different grid")
        return SampledFn(grid, self.fn.values, self.fn.support_end, kernel=self, growth=self.fn.growth)

    def growth(self):
        return self.fn.growth

    def __eq__(self, other):
        return (
            isinstance(other, Sampled)
            and other.fn.grid == self.fn.grid
            and np.array_equal(other.fn.values, self.fn.values)
        )

    def __hash__(self):
        return id(self)


def trapezoid_rule(values: np.ndarray, dt: float) -> CellRule:
    """Cell rule equivalent to the trapezoidal rule on samples."""
    v = np.asarray(values)
    n_cells = v.shape[0] - 1
    xi = np.tile(np.array([0.0, 1.0]), (n_cells, 1))
    w = 0.5 * dt * np.stack([v[:-1], v[1:]], axis=1)
    return CellRule(xi, w)


def kernel_convolve(k: Kernel, l: Kernel) -> Kernel | None:
    """Closed form of ``k * l`` when one is known."""
    ak, al = k.fractional_order, l.fractional_order
    if ak is not None and al is not None:
        return FractionalJ(ak + al)
    if isinstance(k, ExpWeighted) and isinstance(l, ExpWeighted) and k.z == l.z:
        inner = kernel_convolve(k.inner, l.inner)
        return None if inner is None else ExpWeighted(k.z, inner)
    if isinstance(k, HeatBoundary) and isinstance(l, HeatBoundary):
        a, b = k.a, l.a
        return Scaled((a + b) / (a * b), HeatBoundary(a + b))
    if isinstance(k, Scaled):
        inner = kernel_convolve(k.inner, l)
        return None if inner is None else Scaled(k.c, inner)
    if isinstance(l, Scaled):
        inner = kernel_convolve(k, l.inner)
        return None if inner is None else Scaled(l.c, inner)
    return None


def describe(k: Any) -> str:
    """Short tag used in reports."""
    if isinstance(k, FractionalJ):
        return f"j({k.alpha:g})"
    if isinstance(k, Heaviside):
        return "chi"
    if isinstance(k, ExpWeighted):
        return f"exp({k.z:g})*{describe(k.inner)}"
    if isinstance(k, Indicator01):
        return "indicator01"
    if isinstance(k, HeatBoundary):
        return f"heat({k.a:g})"
    if isinstance(k, Scaled):
        return f"{k.c:g}*{describe(k.inner)}"
    if isinstance(k, Sampled):
        return "sampled"
    return type(k).__name__
