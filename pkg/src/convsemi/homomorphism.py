"""The homomorphism ``G_k(f) x = int_0^{n kappa} W_{k^{*n}} f(t) S_{k^{*n}}(t) x dt``.

Test functions enter with a constructive description of their ``W``-values
(:class:`Smooth`, :class:`LadderWitness`, :class:`Convolution`,
:class:`Combination`), so no deconvolution happens inside the checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal

from .convoluted import ConvolutedFamily, _kernel_power, build_convoluted, extend_family
from .kernel_algebra import FractionalJ, Grid, Kernel, ResidualReport, SampledFn
from .kernel_algebra.kernels import describe
from .operators import Generator
from .test_functions import TestFunction, apply_Tk, weyl_derivative

_NO_WITNESS = "no constructive witness"


def _order(k: Kernel) -> float | None:
    return k.fractional_order


def _weyl_sampled(h_m: np.ndarray, m: int, beta: float, b: float, grid: Grid) -> np.ndarray:
    # W_beta h = (-1)^m T'_{j_(m - beta)} h^(m), given samples of h^(m)
    sign = -1.0 if m % 2 else 1.0
    if abs(m - beta) < 1e-12:
        return sign * h_m
    return sign * apply_Tk(FractionalJ(m - beta), SampledFn(grid, h_m, b), grid).values


def _conv_trapezoid(a: np.ndarray, b: np.ndarray, dt: float) -> np.ndarray:
    n = a.shape[0]
    full = signal.fftconvolve(a, b)[:n]
    return dt * (full - 0.5 * (a * b[0] + a[0] * b))


def smooth_convolution(f: TestFunction, g: TestFunction, grid: Grid) -> np.ndarray:
    """``(f * g)`` on ``grid`` from closed-form samples.

    Trapezoidal products on grids refined by 2 and 4, combined by one
    Richardson step (fourth order for smooth factors).
    """
    out = []
    for r in (2, 4):
        t = np.arange((grid.n_points - 1) * r + 1) * (grid.dt / r)
        out.append(_conv_trapezoid(f.eval(t), g.eval(t), grid.dt / r)[::r])
    return (4 * out[1] - out[0]) / 3


class LadderFunction:
    """A function together with a recipe for ``W_{k^{*n}} f``."""

    support_end: float

    def w_samples(self, ctx: "HomomorphismContext", n: int) -> np.ndarray:
        raise NotImplementedError

    def value_at_zero(self, grid: Grid) -> complex:
        raise NotImplementedError

    def samples(self, grid: Grid) -> np.ndarray:
        raise NotImplementedError

    def derivative(self) -> "LadderFunction":
        raise NotImplementedError

    def __add__(self, other: "LadderFunction") -> "Combination":
        return Combination(((1.0, self), (1.0, other)))

    def __rmul__(self, c: complex) -> "Combination":
        return Combination(((c, self),))


@dataclass(frozen=True)
class Smooth(LadderFunction):
    """A bump; lies in every ladder of a fractional kernel (``W`` is a Weyl derivative)."""

    f: TestFunction

    @property
    def support_end(self) -> float:
        return self.f.support_end

    def w_samples(self, ctx, n):
        a = _order(ctx.kernel)
        if a is None:
            raise ValueError(f"{_NO_WITNESS}: bump {self.f.to_record()} in the ladder of {describe(ctx.kernel)}")
        return weyl_derivative(self.f, n * a, ctx.grid).values

    def value_at_zero(self, grid):
        return complex(self.f.eval(0.0))

    def samples(self, grid):
        return self.f.eval(grid.t)

    def derivative(self):
        return Smooth(self.f.derivative())


@dataclass(frozen=True)
class LadderWitness(LadderFunction):
    """``f = T'_{K^{*depth}} g``; then ``W_{K^{*n}} f = T'_{K^{*(depth-n)}} g`` for ``n <= depth``."""

    g: TestFunction
    kernel: Kernel
    depth: int = 1

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError("depth must be at least 1")

    @property
    def support_end(self) -> float:
        return self.g.support_end

    def _total_order(self) -> float | None:
        a = _order(self.kernel)
        return None if a is None else a * self.depth

    def w_samples(self, ctx, n):
        grid = ctx.grid
        if ctx.kernel == self.kernel:
            if n <= self.depth:
                if n == self.depth:
                    return self.g.eval(grid.t)
                return apply_Tk(ctx.power_kernel(self.depth - n), self.g, grid).values
            if _order(self.kernel) is None:
                raise ValueError(f"{_NO_WITNESS}: witness depth {self.depth} < requested level {n}")
        a_ctx, a_own = _order(ctx.kernel), self._total_order()
        if a_ctx is None or a_own is None:
            raise ValueError(
                f"{_NO_WITNESS}: witness built for {describe(self.kernel)}, context kernel {describe(ctx.kernel)}"
            )
        gap = a_own - n * a_ctx
        if gap > 1e-12:
            return apply_Tk(FractionalJ(gap), self.g, grid).values
        if gap < -1e-12:
            return weyl_derivative(self.g, -gap, grid).values
        return self.g.eval(grid.t)

    def samples(self, grid):
        return apply_Tk(_kernel_power(self.kernel, self.depth, grid), self.g, grid).values

    def value_at_zero(self, grid):
        return complex(self.samples(grid)[0])

    def derivative(self):
        return LadderWitness(self.g.derivative(), self.kernel, self.depth)


@dataclass(frozen=True)
class Convolution(LadderFunction):
    """``f * g`` of two bumps, for fractional kernels.

    ``(f*g)^(m) = f^(m) * g + sum_{i<m} f^(i)(0) g^(m-1-i)`` supplies the
    integer derivatives; fractional orders add one dual product.
    """

    f: TestFunction
    g: TestFunction

    @property
    def support_end(self) -> float:
        return self.f.support_end + self.g.support_end

    def derivative_samples(self, m: int, grid: Grid) -> np.ndarray:
        out = smooth_convolution(self.f.derivative(m) if m else self.f, self.g, grid)
        for i in range(m):
            out = out + self.f.eval(0.0, i) * self.g.eval(grid.t, m - 1 - i)
        return out

    def w_samples(self, ctx, n):
        a = _order(ctx.kernel)
        if a is None:
            raise ValueError(f"{_NO_WITNESS}: convolution product in the ladder of {describe(ctx.kernel)}")
        beta = n * a
        m = math.ceil(beta - 1e-12)
        return _weyl_sampled(self.derivative_samples(m, ctx.grid), m, beta, self.support_end, ctx.grid)

    def samples(self, grid):
        return self.derivative_samples(0, grid)

    def value_at_zero(self, grid):
        return 0.0j

    def derivative(self):
        # (f*g)' = f'*g + f(0) g
        return Combination(((1.0, Convolution(self.f.derivative(), self.g)), (float(self.f.eval(0.0)), Smooth(self.g))))


@dataclass(frozen=True)
class Combination(LadderFunction):
    """Finite linear combination ``sum c_i f_i``."""

    terms: tuple = field(default=())

    @property
    def support_end(self) -> float:
        return max((f.support_end for _, f in self.terms), default=0.0)

    def w_samples(self, ctx, n):
        return sum((c * f.w_samples(ctx, n) for c, f in self.terms), np.zeros(ctx.grid.n_points))

    def samples(self, grid):
        return sum((c * f.samples(grid) for c, f in self.terms), np.zeros(grid.n_points))

    def value_at_zero(self, grid):
        return complex(sum(c * f.value_at_zero(grid) for c, f in self.terms))

    def derivative(self):
        return Combination(tuple((c, f.derivative()) for c, f in self.terms))


def as_ladder(f) -> LadderFunction:
    if isinstance(f, LadderFunction):
        return f
    if isinstance(f, TestFunction):
        return Smooth(f)
    raise TypeError(f"cannot use {type(f).__name__} as a ladder function")


# -- context ------------------------------------------------------------------


class HomomorphismContext:
    """Kernel, generator, base family on ``[0, tau]`` and its ladder.

    The ladder is extended on demand; ``kappa`` is one grid cell below
    ``tau``.
    """

    def __init__(self, kernel: Kernel, generator: Generator, tau: float, grid: Grid) -> None:
        self.kernel = kernel
        self.generator = generator
        self.grid = grid
        self.base = build_convoluted(generator, kernel, tau, grid)
        self.tau = self.base.horizon
        self.kappa_index = self.base.n - 2
        if self.kappa_index < 1:
            raise ValueError("tau too short for the grid")
        self.kappa = float(grid.t[self.kappa_index])
        self._top: ConvolutedFamily | None = None

    @property
    def max_depth(self) -> int:
        return (self.grid.n_points - 1) // self.kappa_index

    def power_kernel(self, n: int) -> Kernel:
        return _kernel_power(self.kernel, n, self.grid)

    def level(self, n: int) -> ConvolutedFamily:
        """``S_{k^{*n}}`` on ``[0, n kappa]``."""
        if n < 1:
            raise ValueError("level must be at least 1")
        if n > self.max_depth:
            raise ValueError(f"support exceeds the available ladder: level {n} needs {n * self.kappa:.6g}, grid ends at {self.grid.horizon}")
        if n == 1:
            m = self.kappa_index
            return replace(self.base, horizon=self.grid.t[m], values=self.base.values[: m + 1], kappa=self.kappa)
        if self._top is None or self._top.power < n:
            self._top = extend_family(self.base, n)
        return self._top.level(n)

    def depth_for(self, b: float) -> int:
        """Smallest ``n`` with ``b <= n kappa``."""
        n = max(1, math.ceil(b / self.kappa - 1e-9))
        if n > self.max_depth:
            raise ValueError(f"support exceeds the available ladder: [0, {b}] needs depth {n}, at most {self.max_depth}")
        return n

    def describe(self) -> dict:
        return {
            "kernel": describe(self.kernel),
            "generator": self.generator.describe(),
            "tau": self.tau,
            "kappa": self.kappa,
            "dt": self.grid.dt,
        }


def _as_matrix(gen: Generator, v: np.ndarray) -> np.ndarray:
    return np.diag(v) if gen.is_diagonal else v


def gk_matrix(ctx: HomomorphismContext, f, n: int | None = None) -> np.ndarray:
    """``G_k(f)`` as a dense ``d x d`` matrix (trapezoidal rule in ``t``)."""
    F = as_ladder(f)
    n = ctx.depth_for(F.support_end) if n is None else n
    if F.support_end > n * ctx.kappa + 1e-12:
        raise ValueError(f"support exceeds the ladder level {n}: {F.support_end} > {n * ctx.kappa}")
    fam = ctx.level(n)
    w = F.w_samples(ctx, n)[: fam.n]
    S = fam.values
    wt = np.full(fam.n, ctx.grid.dt)
    wt[[0, -1]] *= 0.5
    v = np.tensordot(w * wt, S, axes=(0, 0))
    return _as_matrix(ctx.generator, v)


def gk_apply(ctx: HomomorphismContext, f, x, n: int | None = None) -> np.ndarray:
    """``G_k(f) x``."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (ctx.generator.dim,):
        raise ValueError(f"dimension mismatch: state of length {x.shape} for dimension {ctx.generator.dim}")
    return gk_matrix(ctx, f, n) @ x


def laplace_oracle(ctx: HomomorphismContext, f) -> np.ndarray:
    """``int_0^inf f(t) e^{tA} dt`` as a matrix.

    Bumps are integrated by composite Gauss-Legendre on their support; other
    ladder functions by the trapezoidal rule on their grid samples.
    """
    F = as_ladder(f)
    A = ctx.generator
    if isinstance(F, Smooth):
        lo, hi = F.f.support_start, F.f.support_end
        x, w = np.polynomial.legendre.leggauss(16)
        edges = np.linspace(lo, hi, 401)
        h = np.diff(edges)[:, None]
        t = (edges[:-1, None] + 0.5 * h * (x + 1)).ravel()
        wt = (0.5 * h * w).ravel()
        vals = F.f.eval(t) * wt
    else:
        t = ctx.grid.t
        wt = np.full(t.shape, ctx.grid.dt)
        wt[[0, -1]] *= 0.5
        vals = F.samples(ctx.grid) * wt
    E = A.expm(t)
    return _as_matrix(A, np.tensordot(vals, E, axes=(0, 0)))


def _report(name, res, ctx, params, tol, **values) -> ResidualReport:
    return ResidualReport(name, float(res), ctx.grid.summary(), {**ctx.describe(), **params}, tol, values=values)


def gk_oracle_residual(ctx: HomomorphismContext, f, tol: float = 1e-6) -> ResidualReport:
    """``|G_k(f) - int f e^{tA} dt|``, valid whenever ``A`` generates ``e^{tA}``."""
    G = gk_matrix(ctx, f)
    O = laplace_oracle(ctx, f)
    return _report("gk_oracle", np.abs(G - O).max(), ctx, {}, tol, gk=G, oracle=O)


def gk_multiplicativity_residual(ctx: HomomorphismContext, f, g, x=None, tol: float = 1e-6) -> ResidualReport:
    """``|G(f*g) x - G(f) G(g) x|``; ``f, g`` bumps, ``f*g`` taken at its own depth."""
    if not (isinstance(as_ladder(f), Smooth) and isinstance(as_ladder(g), Smooth)):
        raise ValueError(f"{_NO_WITNESS}: multiplicativity needs two bumps")
    ff, gg = as_ladder(f).f, as_ladder(g).f
    fg = Convolution(ff, gg)
    lhs = gk_matrix(ctx, fg)
    rhs = gk_matrix(ctx, ff) @ gk_matrix(ctx, gg)
    if x is not None:
        x = np.asarray(x, dtype=complex)
        lhs, rhs = lhs @ x, rhs @ x
    return _report(
        "gk_multiplicativity",
        np.abs(lhs - rhs).max(),
        ctx,
        {"f": ff.to_record(), "g": gg.to_record(), "depth_fg": ctx.depth_for(fg.support_end)},
        tol,
        lhs=lhs,
        rhs=rhs,
    )


def gk_generator_action_residual(ctx: HomomorphismContext, f, x=None, tol: float = 1e-6) -> ResidualReport:
    """``|A G(f) x + G(f') x + f(0) x|``."""
    F = as_ladder(f)
    A = ctx.generator.matrix()
    G = gk_matrix(ctx, F)
    Gd = gk_matrix(ctx, F.derivative(), ctx.depth_for(F.support_end))
    r = A @ G + Gd + F.value_at_zero(ctx.grid) * np.eye(ctx.generator.dim)
    if x is not None:
        r = r @ np.asarray(x, dtype=complex)
    return _report("gk_generator_action", np.abs(r).max(), ctx, {}, tol, f0=F.value_at_zero(ctx.grid))


def gk_depth_gap(ctx: HomomorphismContext, f, tol: float = 1e-6) -> ResidualReport:
    """``|G(f)`` at the smallest depth minus ``G(f)`` one level deeper``|``."""
    F = as_ladder(f)
    n = ctx.depth_for(F.support_end)
    a, b = gk_matrix(ctx, F, n), gk_matrix(ctx, F, n + 1)
    return _report("gk_depth_gap", np.abs(a - b).max(), ctx, {"n": n}, tol)


def kl_consistency_residual(ctx_k: HomomorphismContext, ctx_kl: HomomorphismContext, f, x=None, tol: float = 1e-5) -> ResidualReport:
    """``|G_{k*l}(f) - G_k(f)|`` for ``f`` in both ladders."""
    if ctx_k.generator != ctx_kl.generator:
        raise ValueError("mismatched generators")
    if ctx_k.grid != ctx_kl.grid:
        raise ValueError("contexts on different grids")
    a, b = gk_matrix(ctx_kl, f), gk_matrix(ctx_k, f)
    if x is not None:
        xv = np.asarray(x, dtype=complex)
        a, b = a @ xv, b @ xv
    return _report(
        "kl_consistency", np.abs(a - b).max(), ctx_k, {"kernel_kl": describe(ctx_kl.kernel)}, tol, g_kl=a, g_k=b
    )


def kds_nondegeneracy_check(ctx: HomomorphismContext, probes, tol: float = 1e8) -> ResidualReport:
    """Smallest singular value of the stacked ``G(theta_i)``.

    The residual is ``1 / sigma_min``, so the check passes when the joint
    kernel of the probes is trivial up to ``1/tol``.
    """
    probes = list(probes)
    if not probes:
        raise ValueError("empty probe list")
    stack = np.vstack([gk_matrix(ctx, p) for p in probes])
    sv = np.linalg.svd(stack, compute_uv=False)
    smin = float(sv[-1])
    rank = int(np.sum(sv > sv[0] * 1e-12)) if sv[0] > 0 else 0
    return _report(
        "kds_nondegeneracy", 1.0 / smin if smin > 0 else math.inf, ctx, {"n_probes": len(probes)}, tol,
        sigma_min=smin, sigma_max=float(sv[0]), rank=rank,
    )


def boundedness_witness(ctx: HomomorphismContext, f, x) -> ResidualReport:
    """``|G(f) x| <= (int |W f|) max_t |S(t) x|``; the residual is the excess over the bound."""
    F = as_ladder(f)
    n = ctx.depth_for(F.support_end)
    fam = ctx.level(n)
    x = np.asarray(x, dtype=complex)
    w = np.abs(F.w_samples(ctx, n)[: fam.n])
    wt = np.full(fam.n, ctx.grid.dt)
    wt[[0, -1]] *= 0.5
    bound = float(np.sum(w * wt)) * float(np.abs(fam.apply(x)).max())
    val = float(np.abs(gk_apply(ctx, F, x, n)).max())
    return _report("gk_boundedness", max(0.0, val - bound), ctx, {"n": n}, 0.0, norm=val, bound=bound)
