"""Bump test functions, the smoothing operator T'_k and its inverse W_k.

``T'_k f(t) = int_t^inf k(s - t) f(s) ds`` and ``W_k`` is the right inverse
on the image of ``T'_k``.  For ``k = j_alpha`` the inverse is the Weyl
fractional derivative, ``W_alpha f = (-1)^m T'_{j_(m-alpha)} f^(m)`` with
``m = ceil(alpha)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize, special

from .kernel_algebra import (
    ExpWeighted,
    FractionalJ,
    Grid,
    Indicator01,
    Kernel,
    ResidualReport,
    SampledFn,
    as_sampled,
    dual_convolve,
    kernel_convolve,
    kernel_laplace_analytic,
    laplace_numeric,
)
from .kernel_algebra.kernels import Sampled, describe
from .kernel_algebra.ops import conv_power, convolve
from .kernel_algebra.quadrature import node_weights, rule_of

#: the first-cell weight below which back-substitution is refused
ILL_POSED_WEIGHT = 1e-8


@lru_cache(maxsize=256)
def _numerators(poly: tuple[float, ...], order: int) -> tuple[Polynomial, ...]:
    """``Q_j`` with ``d^j/dv^j [P(v) e^{h(v)}] = Q_j(v) (1-v^2)^(-2j) e^{h(v)}``, ``h = -1/(1-v^2)``."""
    one_minus = Polynomial([1.0, 0.0, -1.0])
    v = Polynomial([0.0, 1.0])
    out = [Polynomial(poly)]
    for j in range(order):
        q = out[-1]
        out.append(q.deriv() * one_minus**2 + 4 * j * v * q * one_minus - 2 * v * q)
    return tuple(out)


@dataclass(frozen=True)
class TestFunction:
    """``p(t) * exp(-1/(1 - v**2))`` with ``v = (t - center)/half_width``.

    The support is ``[center - half_width, center + half_width]`` intersected
    with ``[0, inf)``; the value and derivatives at 0 need not vanish.
    ``order`` selects a derivative: the object then evaluates
    ``f^(order)``.

    Parameters
    ----------
    center, half_width : float
    poly : tuple of float
        Coefficients of ``p`` in powers of ``t`` (ascending).
    order : int
    scale : float
        Constant factor.
    """

    __test__ = False  # not a pytest class

    center: float
    half_width: float
    poly: tuple[float, ...] = (1.0,)
    order: int = 0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if self.center + self.half_width <= 0:
            raise ValueError("support must meet [0, inf)")
        if self.order < 0:
            raise ValueError("derivative order must be non-negative")
        object.__setattr__(self, "poly", tuple(float(c) for c in self.poly))

    @property
    def support_end(self) -> float:
        return self.center + self.half_width

    @property
    def support_start(self) -> float:
        return max(0.0, self.center - self.half_width)

    def _vpoly(self) -> tuple[float, ...]:
        # p(center + half_width * v) as a polynomial in v
        p = Polynomial(self.poly)(Polynomial([self.center, self.half_width]))
        return tuple(p.coef)

    def derivative(self, k: int = 1) -> "TestFunction":
        return replace(self, order=self.order + k)

    def __call__(self, t) -> np.ndarray:
        return self.eval(t)

    def eval(self, t, extra: int = 0) -> np.ndarray:
        """Values of ``f^(order + extra)`` at ``t``."""
        j = self.order + extra
        t = np.asarray(t, dtype=float)
        v = (t - self.center) / self.half_width
        inside = np.abs(v) < 1
        vi = np.where(inside, v, 0.0)
        ell = 1.0 - vi * vi
        q = _numerators(self._vpoly(), j)[j](vi)
        with np.errstate(over="ignore", under="ignore"):
            expo = -1.0 / ell - 2 * j * np.log(ell)
            val = q * np.exp(np.where(inside, expo, -np.inf))
        return self.scale * np.where(inside, val, 0.0) / self.half_width**j

    def shift(self, u: float) -> "TestFunction":
        """``f_u(t) = f(t + u)``."""
        p = Polynomial(self.poly)(Polynomial([u, 1.0]))
        return replace(self, center=self.center - u, poly=tuple(p.coef))

    def scaled(self, c: float) -> "TestFunction":
        return replace(self, scale=self.scale * c)

    def sample(self, grid: Grid) -> SampledFn:
        b = self.support_end
        return SampledFn(grid, self.eval(grid.t), b if b <= grid.horizon else None)

    # -- text record ------------------------------------------------------

    def to_record(self) -> str:
        poly = ",".join(repr(c) for c in self.poly)
        return (
            f"bump center={self.center!r} half_width={self.half_width!r} "
            f"poly={poly} order={self.order} scale={self.scale!r}"
        )

    @classmethod
    def from_record(cls, text: str) -> "TestFunction":
        parts = text.split()
        if not parts or parts[0] != "bump":
            raise ValueError(f"not a bump record: {text!r}")
        kv = dict(p.split("=", 1) for p in parts[1:])
        return cls(
            center=float(kv["center"]),
            half_width=float(kv["half_width"]),
            poly=tuple(float(c) for c in re.split(",", kv.get("poly", "1.0"))),
            order=int(kv.get("order", 0)),
            scale=float(kv.get("scale", 1.0)),
        )


#: ``exp(-1/(1 - v^2))`` with ``v = t - 1``: the unit bump moved onto ``[0, 2]``
STANDARD_BUMP = TestFunction(1.0, 1.0)


@dataclass(frozen=True)
class Witnessed:
    """``f = T'_kernel(g)``: a function with a known ``W_kernel``-preimage."""

    g: TestFunction
    kernel: Kernel

    @property
    def support_end(self) -> float:
        return self.g.support_end

    def sample(self, grid: Grid) -> SampledFn:
        return apply_Tk(self.kernel, self.g, grid)

    def derivative(self) -> "Witnessed":
        # T'_k commutes with d/dt on compactly supported functions
        return Witnessed(self.g.derivative(), self.kernel)


def _check_inside(b: float, grid: Grid) -> None:
    if b >= grid.horizon - 0.5 * grid.dt:
        raise ValueError(f"support end {b} not strictly inside the grid horizon {grid.horizon}")


def apply_Tk(k: Kernel | SampledFn, f: TestFunction | SampledFn, grid: Grid) -> SampledFn:
    """``T'_k f (t) = int_t^inf k(s - t) f(s) ds`` on ``grid``."""
    fs = f if isinstance(f, SampledFn) else _sample_checked(f, grid)
    return dual_convolve(as_sampled(k, grid), fs)


def _sample_checked(f: TestFunction, grid: Grid) -> SampledFn:
    _check_inside(f.support_end, grid)
    return f.sample(grid)


def weyl_derivative(f: TestFunction, alpha: float, grid: Grid) -> SampledFn:
    """Weyl derivative ``W_alpha f`` sampled on ``grid``.

    Integer orders are exact; fractional orders apply ``T'_{j_(m-alpha)}`` to
    the exact ``m``-th derivative of ``f``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    _check_inside(f.support_end, grid)
    m = math.ceil(alpha - 1e-12)
    sign = -1.0 if m % 2 else 1.0
    dm = f.derivative(m).sample(grid)
    if abs(m - alpha) < 1e-12:
        return SampledFn(grid, sign * dm.values, f.support_end)
    out = apply_Tk(FractionalJ(m - alpha), dm, grid)
    return SampledFn(grid, sign * out.values, f.support_end)


def weyl_iterate(f: TestFunction, alpha: float, times: int, grid: Grid) -> SampledFn:
    """``W_alpha`` applied ``times`` times, one numerical dual product per application.

    Uses ``W_alpha h = (-1)^m T'_{j_(m-alpha)} h^(m)`` and the commutation
    of ``T'`` with differentiation to move all derivatives onto ``f``.
    """
    if times < 1:
        raise ValueError("times must be at least 1")
    _check_inside(f.support_end, grid)
    m = math.ceil(alpha - 1e-12)
    h = f.derivative(m * times).sample(grid)
    if abs(m - alpha) > 1e-12:
        jk = FractionalJ(m - alpha).sample(grid)
        for _ in range(times):
            h = dual_convolve(jk, h)
    sign = (-1.0) ** (m * times)
    return SampledFn(grid, sign * h.values, f.support_end)


def _fd_derivative(values: np.ndarray, dt: float, order: int) -> np.ndarray:
    out = values
    for _ in range(order):
        out = np.gradient(out, dt, edge_order=2)
    return out


def _central_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order central difference; the two nodes at each end are left at zero."""
    out = np.zeros_like(values)
    v = values
    out[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * dt)
    return out


def _support_of(f) -> float:
    b = f.support_end
    if b is None:
        raise ValueError("f needs a known support end")
    return b


def solve_Wk(k: Kernel, f: TestFunction | Witnessed | SampledFn, grid: Grid | None = None) -> SampledFn:
    """Solve ``T'_k w = f`` for ``w = W_k f``.

    Dispatch order:

    1. ``f`` witnessed through the same kernel: return the witness.
    2. ``j_alpha`` kernels (including ``chi``): the Weyl derivative, from
       exact derivatives of a :class:`TestFunction` or from second-order
       finite differences of samples.
    3. ``chi_(0,1)``: ``-sum_n f'(t + n)``.
    4. ``e_z j_alpha``: ``e_z W_alpha (e_{-z} f)`` for test functions.
    5. otherwise back-substitution from the support end downward, refused
       when the first-cell weight of ``k`` is below ``ILL_POSED_WEIGHT``.
    """
    if isinstance(f, Witnessed):
        if _same_kernel(k, f.kernel):
            if grid is None:
                raise ValueError("grid required")
            return _sample_checked(f.g, grid)
        if grid is None:
            raise ValueError("grid required")
        f = f.sample(grid)
    if isinstance(f, TestFunction):
        if grid is None:
            raise ValueError("grid required")
    else:
        grid = f.grid
    b = _support_of(f)
    _check_inside(b, grid)
    alpha = k.fractional_order
    if alpha is not None:
        if isinstance(f, TestFunction):
            return weyl_derivative(f, alpha, grid)
        m = math.ceil(alpha - 1e-12)
        dm = _fd_derivative(f.values, grid.dt, m)
        out = dm if abs(m - alpha) < 1e-12 else apply_Tk(FractionalJ(m - alpha), SampledFn(grid, dm, b), grid).values
        return SampledFn(grid, (-1.0) ** m * out, b)
    if isinstance(k, Indicator01):
        steps = 1.0 / grid.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("the chi_(0,1) series needs 1/dt to be an integer")
        steps = int(round(steps))
        d1 = f.eval(grid.t, 1) if isinstance(f, TestFunction) else _fd_derivative(f.values, grid.dt, 1)
        out = np.zeros_like(d1)
        shift = 0
        while shift < grid.n_points:
            out[: grid.n_points - shift] -= d1[shift:]
            shift += steps
        return SampledFn(grid, out, b)
    if isinstance(k, ExpWeighted) and k.inner.fractional_order is not None and isinstance(f, TestFunction):
        return _exp_weighted_weyl(k, f, grid)
    fs = f.sample(grid) if isinstance(f, TestFunction) else f
    return _back_substitute(k, fs)


def _exp_weighted_weyl(k: ExpWeighted, f: TestFunction, grid: Grid) -> SampledFn:
    # W_{e_z k} f = e_z W_k (e_{-z} f); derivatives of e_{-z} f by Leibniz
    alpha = k.inner.fractional_order
    z = k.z
    m = math.ceil(alpha - 1e-12)
    t = grid.t
    dm = sum(math.comb(m, i) * (-z) ** (m - i) * f.eval(t, i) for i in range(m + 1)) * np.exp(-z * t)
    b = f.support_end
    if abs(m - alpha) > 1e-12:
        dm = apply_Tk(FractionalJ(m - alpha), SampledFn(grid, dm, b), grid).values
    return SampledFn(grid, (-1.0) ** m * np.exp(z * t) * dm, b)


def _back_substitute(k: Kernel, f: SampledFn) -> SampledFn:
    grid = f.grid
    rule = rule_of(as_sampled(k, grid))
    W, _ = node_weights(rule)
    diag = W[0]
    if abs(diag) < ILL_POSED_WEIGHT:
        raise ValueError(
            f"first-kind ill-posed for this kernel ({describe(k)}): first-cell weight {abs(diag):.3g}"
        )
    b = _support_of(f)
    n = grid.n_points
    top = min(n - 1, int(math.floor(b / grid.dt + 1e-9)) + 1)
    w = np.zeros(n, dtype=np.result_type(f.values, W))
    # f_i = sum_{j>=0} W_j w_{i+j}, with w = 0 beyond the support
    for i in range(top, -1, -1):
        hi = min(n, top + 1)
        acc = W[1 : hi - i] @ w[i + 1 : hi] if hi - i > 1 else 0.0
        w[i] = (f.values[i] - acc) / diag
    return SampledFn(grid, w, b)


def _same_kernel(a, b) -> bool:
    if a == b:
        return True
    fa, fb = getattr(a, "fractional_order", None), getattr(b, "fractional_order", None)
    return fa is not None and fa == fb


def dk_norm(k: Kernel, f, beta: float, grid: Grid | None = None) -> float:
    """``int_0^inf |W_k f(t)| e^(beta t) dt``.

    Requires ``beta > max(abs(|k|), 0)``.
    """
    bound = max(k.abs_k, 0.0) if not math.isnan(k.abs_k) else math.inf
    if not beta > bound:
        raise ValueError(
            f"beta={beta} must exceed max(abscissa of |k|, 0) = {bound} for the weighted norm to be defined"
        )
    w = solve_Wk(k, f, grid)
    g = np.abs(w.values) * np.exp(beta * w.grid.t)
    return float(w.grid.dt * (np.sum(g) - 0.5 * (g[0] + g[-1])))


def _ladder_w(K: Kernel, f, grid: Grid) -> SampledFn:
    return solve_Wk(K, f, grid)


def wk_structure_check(
    k: Kernel,
    l: Kernel,
    f: TestFunction | Witnessed,
    grid: Grid,
    n: int = 3,
    m: int = 1,
    tol: float | None = None,
) -> ResidualReport:
    """Residuals of three structural identities for ``W_k``.

    * ``derivative``: ``W_k(f') = (W_k f)'`` (finite differences on the right),
    * ``factorization``: ``W_k f = l o W_{k*l} f``,
    * ``ladder``: ``W_{k^{*m}} f = k^{*(n-m)} o W_{k^{*n}} f``, the right side by
      ``n - m`` successive dual products with ``k``.

    A component whose W-values cannot be formed (ill-posed kernel, no
    witness) is reported as skipped.
    """
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    dt = grid.dt
    comps: dict[str, float] = {}
    skipped: dict[str, str] = {}

    def attempt(name, fn):
        try:
            comps[name] = float(fn())
        except ValueError as exc:
            skipped[name] = str(exc)

    def deriv():
        lhs = solve_Wk(k, f.derivative(), grid).values
        rhs = _central_derivative(solve_Wk(k, f, grid).values, dt)
        return np.max(np.abs(lhs - rhs)[2:-2])

    def factor():
        kl = kernel_convolve(k, l)
        if kl is None:
            kl = Sampled(convolve(as_sampled(k, grid), as_sampled(l, grid)))
        lhs = solve_Wk(k, f, grid).values
        rhs = dual_convolve(as_sampled(l, grid), solve_Wk(kl, f, grid)).values
        return np.max(np.abs(lhs - rhs))

    def ladder():
        km = k.power(m) or Sampled(conv_power(k, m, grid))
        kn = k.power(n) or Sampled(conv_power(k, n, grid))
        lhs = solve_Wk(km, f, grid).values
        h = solve_Wk(kn, f, grid)
        ks = as_sampled(k, grid)
        for _ in range(n - m):
            h = dual_convolve(ks, h)
        return np.max(np.abs(lhs - h.values))

    attempt("derivative", deriv)
    attempt("factorization", factor)
    attempt("ladder", ladder)
    if not comps:
        raise ValueError("no structural identity could be evaluated: " + "; ".join(skipped.values()))
    return ResidualReport(
        "wk_structure",
        max(comps.values()),
        grid.summary(),
        {"k": describe(k), "l": describe(l), "n": n, "m": m},
        tol if tol is not None else 10 * dt**1.5,
        values={**comps, "skipped": skipped},
    )


def laplace_zero_check(
    k: Kernel,
    lam0: complex,
    grid: Grid,
    margin: float | None = None,
    zero_tol: float = 1e-9,
    tol: float | None = None,
) -> ResidualReport:
    """Compare ``k o e_{lam0}`` with ``k_hat(lam0) e_{lam0}``, ``e_lam(t) = exp(-lam t)``.

    ``e_{lam0}`` is truncated at ``b = 0.9 * horizon``; the comparison is made
    on ``[0, b - margin]``, where ``margin`` defaults to the kernel support or
    to a width making the neglected tail below ``1e-12``.
    When ``|k_hat(lam0)| <= zero_tol`` the dual product itself must vanish
    there.
    """
    lam0 = complex(lam0)
    if not lam0.real > (k.abs_k if not math.isnan(k.abs_k) else -math.inf):
        raise ValueError("need Re lam0 > abscissa of k")
    ks = as_sampled(k, grid)
    try:
        khat = kernel_laplace_analytic(k, lam0)
    except ValueError:
        khat = None
    if khat is None:
        khat = laplace_numeric(ks, lam0)
    b_idx = int(0.9 * (grid.n_points - 1))
    b = b_idx * grid.dt
    if margin is None:
        if k.support_end is not None:
            margin = k.support_end
        elif k.fractional_order is not None:
            margin = _fractional_margin(k.fractional_order, lam0.real)
        else:
            g = ks.growth
            if g is None:
                raise ValueError("margin required for kernels without growth bound")
            gap = lam0.real - g[1]
            margin = max(0.0, math.log(max(g[0], 1e-300) / (gap * 1e-12)) / gap)
    interior = grid.t <= b - margin + 1e-12
    if not interior.any():
        raise ValueError("grid too short for the requested margin")
    e = np.where(grid.t <= b, np.exp(-lam0 * grid.t), 0.0)
    dual = dual_convolve(ks, SampledFn(grid, e, b)).values
    is_zero = abs(khat) <= zero_tol
    if is_zero:
        res = np.abs(dual[interior])
    else:
        res = np.abs(dual[interior] - khat * e[interior])
    msg = "zero" if is_zero else "no zero"
    if k.fractional_order is not None:
        msg = "no zero"  # lam^-alpha never vanishes
    return ResidualReport(
        "laplace_zero",
        float(res.max()),
        grid.summary(),
        {"k": describe(k), "lambda0": lam0, "margin": margin},
        tol if tol is not None else 10 * grid.dt**2,
        values={"k_hat": khat, "abs_k_hat": abs(khat), "status": msg, "max_abs_dual": float(np.abs(dual[interior]).max())},
    )


def _fractional_margin(alpha: float, rate: float, eps: float = 1e-12) -> float:
    # int_L^inf j_alpha(u) e^{-rate u} du = rate^-alpha Q(alpha, rate L)
    tail = lambda L: rate**-alpha * special.gammaincc(alpha, rate * L) - eps
    hi = 1.0
    while tail(hi) > 0:
        hi *= 2
    return float(optimize.brentq(tail, 0.0, hi)) if tail(0.0) > 0 else 0.0


def two_step_kernel(grid: Grid) -> Sampled:
    """``sin^2(pi t)`` on ``[0, 1]`` minus ``sin^2(pi (t-1))`` on ``[1, 2]``, as samples."""
    t = grid.t
    v = np.where(t <= 1, np.sin(np.pi * t) ** 2, 0.0) - np.where((t > 1) & (t <= 2), np.sin(np.pi * (t - 1)) ** 2, 0.0)
    return Sampled(SampledFn(grid, v, min(2.0, grid.horizon), growth=(1.0, 0.0)), abs_k=-math.inf)


def find_laplace_zero(k: Kernel, guess: complex, grid: Grid) -> complex:
    """Zero of the numerical transform of ``k`` near ``guess`` (secant iteration)."""
    ks = as_sampled(k, grid)
    return complex(optimize.newton(lambda lam: laplace_numeric(ks, lam), complex(guess), tol=1e-14, maxiter=100))
