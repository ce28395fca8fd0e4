"""Convolution products, powers, running integrals and Laplace transforms."""

from __future__ import annotations

import math

import numpy as np

from .grid import Grid, SampledFn, _same_grid
from .kernels import Kernel, Sampled
from .quadrature import causal_product, dual_product, rule_of


def as_sampled(k: Kernel | SampledFn, grid: Grid) -> SampledFn:
    """Samples of a kernel on ``grid`` (identity on matching samples)."""
    if isinstance(k, SampledFn):
        if k.grid != grid:
            raise ValueError(f"grid mismatch: {k.grid} vs {grid}")
        return k
    return k.sample(grid)


def _rough(f: SampledFn) -> bool:
    # non-smooth at 0 (u**beta with beta not a non-negative integer): interpolation would lose order
    return f.kernel is not None and f.kernel._needs_jacobi()


def _sum_support(f: SampledFn, g: SampledFn) -> float | None:
    if f.support_end is None or g.support_end is None:
        return None
    return min(f.grid.horizon, f.support_end + g.support_end)


def convolve(f: SampledFn, g: SampledFn) -> SampledFn:
    """Causal convolution ``(f*g)(t) = int_0^t f(t-s) g(s) ds``.

    A factor that is non-smooth at 0 (``u**beta``, ``beta`` not a
    non-negative integer) contributes exact cell moments and the other factor
    is interpolated linearly.  Two such factors are split at the midpoint
    ``t/2`` so that each is handled by its own moments; otherwise the two
    orderings are averaged.  The result is symmetric in ``f, g``.
    """
    grid = _same_grid(f, g)
    b = _sum_support(f, g)
    sf, sg = _rough(f), _rough(g)
    if sf and sg:
        out = 0.5 * (_split_convolve(f, g) + _split_convolve(g, f))
    elif sf:
        out = causal_product(rule_of(f), g.values)
    elif sg:
        out = causal_product(rule_of(g), f.values)
    else:
        out = 0.5 * (causal_product(rule_of(f), g.values) + causal_product(rule_of(g), f.values))
    return SampledFn(grid, out, b)


def _split_convolve(f: SampledFn, g: SampledFn) -> np.ndarray:
    # int_0^{t_m} g(s) f(t_p - s) ds + int_0^{t_p - t_m} f(u) g(t_p - u) du, m = p // 2
    rf, rg = rule_of(f), rule_of(g)
    Bf, Af = rf.lower, rf.upper
    Bg, Ag = rg.lower, rg.upper
    fv, gv = f.values, g.values
    n = fv.shape[0]
    out = np.zeros(n, dtype=np.result_type(fv, gv, Bf, Bg))
    for p in range(1, n):
        m = p // 2
        r = p - m
        if m:
            c = np.arange(m)
            out[p] += Bg[c] @ fv[p - c] + Ag[c] @ fv[p - c - 1]
        c = np.arange(r)
        out[p] += Bf[c] @ gv[p - c] + Af[c] @ gv[p - c - 1]
    return out


def dual_convolve(f: SampledFn, g: SampledFn) -> SampledFn:
    """Dual product ``(f o g)(t) = int_t^inf f(s-t) g(s) ds``.

    ``g`` must carry a support end strictly inside the grid, otherwise the
    truncation of the integral at the horizon would be silent.
    """
    grid = _same_grid(f, g)
    b = g.support_end
    if b is None or b >= grid.horizon - 0.5 * grid.dt:
        raise ValueError("horizon truncation unsound: second factor needs support strictly inside the grid")
    out = dual_product(rule_of(f), g.values)
    return SampledFn(grid, out, b)


def conv_power(k: Kernel | SampledFn, n: int, grid: Grid) -> SampledFn:
    """``k^{*n}``, from a closed form when the kernel has one."""
    if n < 1:
        raise ValueError("power must be at least 1")
    if isinstance(k, Kernel) and not isinstance(k, Sampled):
        p = k.power(n)
        if p is not None:
            return p.sample(grid)
    base = as_sampled(k, grid)
    out = base
    for _ in range(n - 1):
        out = convolve(base, out)
    g = base.growth
    if g is not None:
        # |k^{*n}(t)| <= M^n t^{n-1}/(n-1)! e^{w t} <= M^n e^{(w+1) t}
        g = (g[0] ** n, g[1] + 1.0)
    return SampledFn(grid, out.values, out.support_end, kernel=Sampled(out) if n > 1 else base.kernel, growth=g)


def cumulative(f: SampledFn) -> SampledFn:
    """Running integral ``int_0^t f``; exact cell integrals for kernel-backed samples."""
    cells = rule_of(f).total
    v = np.concatenate([np.zeros(1, dtype=cells.dtype), np.cumsum(cells)])
    return SampledFn(f.grid, v)


def laplace_numeric(f: SampledFn, lam: complex) -> complex:
    """``int_0^T exp(-lam t) f(t) dt`` over the grid horizon ``T``.

    Kernel-backed samples integrate the product ``exp(-lam t) k(t)`` with the
    kernel's Gauss cell rule; plain samples use the trapezoidal rule.
    """
    lam = complex(lam)
    grid = f.grid
    if f.kernel is not None and not isinstance(f.kernel, Sampled):
        rule = f.kernel.cell_rule(grid)
        u = (np.arange(grid.n_points - 1)[:, None] + rule.xi) * grid.dt
        return complex(np.sum(rule.w * np.exp(-lam * u)))
    v = f.values * np.exp(-lam * grid.t)
    return complex(grid.dt * (np.sum(v) - 0.5 * (v[0] + v[-1])))


def laplace_tail_bound(f: SampledFn, lam: complex) -> float | None:
    """Bound on ``|int_T^inf exp(-lam t) f(t) dt|``; ``None`` when unknown."""
    T = f.grid.horizon
    if f.support_end is not None and f.support_end <= T:
        return 0.0
    if f.growth is None:
        return None
    M, w = f.growth
    gap = complex(lam).real - w
    if gap <= 0:
        return None
    return M * math.exp(-gap * T) / gap


def kernel_laplace_analytic(k: Kernel, lam: complex) -> complex | None:
    """Closed-form transform of ``k`` at ``lam``; ``None`` when not available."""
    lam = complex(lam)
    if not k.laplace_valid(lam):
        raise ValueError(f"lambda={lam} outside the half-plane of validity of {k!r}")
    v = k.laplace(lam)
    return None if v is None else complex(v)
