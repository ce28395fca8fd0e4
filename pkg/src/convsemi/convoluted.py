"""Local k-convoluted semigroups: construction, sharp extension and residual checks.

A family is stored densely at grid nodes: ``(n, d, d)`` operator samples for
dense generators, ``(n, M)`` diagonals for diagonal ones.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal

from .kernel_algebra import Grid, Kernel, ResidualReport, SampledFn, as_sampled
from .kernel_algebra.identities import canonical_sides  # noqa: F401  (re-exported)
from .kernel_algebra.kernels import CellRule, Sampled, describe, trapezoid_rule
from .kernel_algebra.ops import conv_power, cumulative
from .kernel_algebra.quadrature import (
    causal_product,
    quadratic_moments,
    rule_of,
    window_sum_quadratic,
)
from .operators import Generator

#: lattice resolution for composition and splitting residuals
LATTICE = 20


@dataclass(frozen=True, eq=False)
class ConvolutedFamily:
    """Samples of ``S_K(t)``, ``K = k^{*power}``, on ``[0, horizon]``.

    Parameters
    ----------
    kernel : Kernel
        The kernel the family is convoluted by (``k^{*power}``).
    base_kernel : Kernel
        ``k``.
    power : int
    generator : Generator
    horizon : float
        Last grid time at which the family is defined.
    grid : Grid
        Shared grid; may extend past ``horizon``.
    values : ndarray
        ``(n, d, d)`` or ``(n, M)`` with ``n = grid.index(horizon) + 1``.
    kappa : float, optional
        Step used by the extension that produced the family.
    ladder : tuple of ConvolutedFamily
        Lower levels ``1 .. power - 1`` when built by :func:`extend_family`.
    seam_gaps : tuple of float
        Gap between the two branches at each seam ``j kappa``.
    """

    kernel: Kernel
    base_kernel: Kernel
    power: int
    generator: Generator
    horizon: float
    grid: Grid
    values: np.ndarray
    kappa: float | None = None
    ladder: tuple = field(default=(), repr=False)
    seam_gaps: tuple = field(default=(), repr=False)

    def __post_init__(self) -> None:
        n = self.grid.index(self.horizon) + 1
        if self.values.shape[0] != n:
            raise ValueError(f"family has {self.values.shape[0]} samples, horizon needs {n}")

    @property
    def diagonal(self) -> bool:
        return self.generator.is_diagonal

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def t(self) -> np.ndarray:
        return self.grid.t[: self.n]

    def at_index(self, i: int) -> np.ndarray:
        return self.values[i]

    def apply(self, x) -> np.ndarray:
        """``S(t_i) x`` for all nodes, shape ``(n, d)``."""
        x = np.asarray(x, dtype=complex)
        return self.values * x if self.diagonal else self.values @ x

    def full(self) -> np.ndarray:
        """Operator samples as ``(n, d, d)`` matrices."""
        if not self.diagonal:
            return self.values
        n, m = self.values.shape
        out = np.zeros((n, m, m), dtype=self.values.dtype)
        out[:, np.arange(m), np.arange(m)] = self.values
        return out

    def level(self, n: int) -> "ConvolutedFamily":
        """Ladder level ``n`` (``1 <= n <= power``)."""
        if n == self.power:
            return self
        if not 1 <= n < self.power or len(self.ladder) < n:
            raise ValueError(f"ladder level {n} not available (power {self.power}, ladder depth {len(self.ladder)})")
        return self.ladder[n - 1]

    def summary(self) -> dict:
        v = self.values
        jumps = np.abs(np.diff(v, axis=0)).reshape(v.shape[0] - 1, -1).max(axis=1) if v.shape[0] > 1 else np.zeros(1)
        return {
            "kernel": describe(self.kernel),
            "base_kernel": describe(self.base_kernel),
            "power": self.power,
            "generator": self.generator.describe(),
            "horizon": self.horizon,
            "kappa": self.kappa,
            "n_samples": self.n,
            "dt": self.grid.dt,
            "max_abs_value": float(np.abs(v).max()),
            "max_step_jump": float(jumps.max()),
        }

    def to_csv(self, path=None) -> str:
        """``t`` then real and imaginary parts of each stored entry, 17 significant digits."""
        flat = self.values.reshape(self.n, -1)
        if self.diagonal:
            names = [f"m{i + 1}" for i in range(flat.shape[1])]
        else:
            d = self.values.shape[1]
            names = [f"s{i}{j}" for i in range(d) for j in range(d)]
        header = ",".join(["t"] + [f"{nm}_{p}" for nm in names for p in ("re", "im")])
        cols = np.empty((self.n, 1 + 2 * flat.shape[1]))
        cols[:, 0] = self.t
        cols[:, 1::2] = flat.real
        cols[:, 2::2] = flat.imag
        buf = io.StringIO()
        np.savetxt(buf, cols, fmt="%.17g", delimiter=",", header=header, comments="", newline="\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def _compose(a: np.ndarray, b: np.ndarray, diagonal: bool) -> np.ndarray:
    return a * b if diagonal else np.matmul(a, b)


def _identity_like(gen: Generator) -> np.ndarray:
    return np.ones(gen.dim, dtype=complex) if gen.is_diagonal else np.eye(gen.dim, dtype=complex)


def _kernel_power(k: Kernel, n: int, grid: Grid) -> Kernel:
    if n == 1:
        return k
    p = k.power(n) if not isinstance(k, Sampled) else None
    return p if p is not None else Sampled(conv_power(k, n, grid))


# -- construction ------------------------------------------------------------


def _diagonal_recurrence(a: np.ndarray, rule: CellRule, dt: float, n: int) -> np.ndarray:
    # S(t_{p+1}) = e^{a dt} (S(t_p) + sum_q w_pq e^{-a xi_pq dt})
    xi, w = rule.xi[: n - 1], rule.w[: n - 1]
    out = np.zeros((n, a.shape[0]), dtype=complex)
    for m, am in enumerate(a):
        step = np.exp(am * dt)
        g = step * np.sum(w * np.exp(-am * xi * dt), axis=1)
        out[1:, m] = signal.lfilter([1.0], [1.0, -step], g)
    return out


def build_convoluted(A: Generator, k: Kernel, tau: float, grid: Grid) -> ConvolutedFamily:
    """``S_k(t) = int_0^t k(t-s) e^{sA} ds`` on ``[0, tau]``.

    Dense generators use product quadrature against samples of ``e^{sA}``;
    diagonal generators use the exact one-step recurrence per mode, so the
    only error is the cell rule of ``k``.
    """
    if not 0 < tau <= grid.horizon + 1e-12:
        raise ValueError(f"tau={tau} must lie in (0, {grid.horizon}]")
    n = grid.index(tau) + 1
    ks = as_sampled(k, grid)
    rule = rule_of(ks)
    if A.is_diagonal:
        vals = _diagonal_recurrence(A.eigenvalues(), rule, grid.dt, n)
    else:
        vals = causal_product(rule, A.expm(grid.t[:n]))
    return ConvolutedFamily(k, k, 1, A, grid.t[n - 1], grid, vals)


def ivp_residual(family: ConvolutedFamily, x, t_min: float = 0.0, tol: float | None = None) -> ResidualReport:
    """Check the Duhamel problem ``v' = A v + K(t) x`` with ``K = int_0^t k``.

    ``v(t) = int_0^t e^{(t-s)A} K(s) x ds`` is rebuilt from ``e^{tA}`` and the
    running integral of the kernel alone.  Reported: the larger of
    ``|v' - A v - K x|`` and ``|S(t) x - v'|`` over ``t >= t_min``, with ``v'``
    by second-order differences.
    """
    A, grid, n = family.generator, family.grid, family.n
    x = np.asarray(x, dtype=complex)
    Kfn = cumulative(as_sampled(family.kernel, grid))
    Kv = Kfn.values[:n]
    E = A.expm(grid.t[:n])
    ex = E * x if A.is_diagonal else E @ x
    v = causal_product(trapezoid_rule(Kv, grid.dt), ex)
    dv = np.gradient(v, grid.dt, axis=0, edge_order=2)
    Av = v * A.eigenvalues() if A.is_diagonal else v @ A.matrix().T
    r1 = np.abs(dv - Av - Kv[:, None] * x).max(axis=1)
    r2 = np.abs(family.apply(x) - dv).max(axis=1)
    mask = family.t >= t_min - 1e-12
    trace = np.full(grid.n_points, np.nan)
    trace[:n] = np.where(mask, np.maximum(r1, r2), np.nan)
    res = float(np.max(np.maximum(r1, r2)[mask])) if mask.any() else 0.0
    if tol is None:
        tol = 10 * grid.dt ** (1.5 if family.kernel.is_singular else 2.0)
    return ResidualReport(
        "ivp",
        res,
        grid.summary(),
        {"x": x.tolist(), "t_min": t_min, "kernel": describe(family.kernel)},
        tol,
        values={"ode_residual": float(r1[mask].max()) if mask.any() else 0.0,
                "family_vs_derivative": float(r2[mask].max()) if mask.any() else 0.0},
        trace=trace,
    )


# -- canonical scalar family ------------------------------------------------------


@dataclass(frozen=True)
class CanonicalFamily:
    """``k_t(s) = k(t - s) chi_[0,t](s)`` for grid times ``t <= tau``."""

    kernel: Kernel
    tau: float
    grid: Grid

    def member(self, t: float) -> SampledFn:
        i = self.grid.index(t, snap=True)
        if self.grid.t[i] > self.tau + 1e-12:
            raise ValueError(f"t={t} beyond tau={self.tau}")
        ks = as_sampled(self.kernel, self.grid).values
        out = np.zeros(self.grid.n_points, dtype=ks.dtype)
        out[: i + 1] = ks[: i + 1][::-1]
        return SampledFn(self.grid, out, self.grid.t[i])


def canonical_family(k: Kernel, tau: float, grid: Grid) -> CanonicalFamily:
    if not 0 < tau <= grid.horizon + 1e-12:
        raise ValueError(f"tau={tau} must lie in (0, {grid.horizon}]")
    return CanonicalFamily(k, tau, grid)


# -- sharp extension -------------------------------------------------------------


def _zeroed_head(rule: CellRule, cells: int) -> CellRule:
    w = rule.w.copy()
    w[:cells] = 0.0
    return CellRule(rule.xi, w)


def _split(
    s_j: np.ndarray, s_r: np.ndarray, jm: int, rule_a: CellRule, rule_b: CellRule, diagonal: bool
) -> tuple[np.ndarray, float]:
    """Level ``n`` from levels ``j`` (on ``[0, t_jm]``) and ``r = n - j``.

    ``rule_a`` is the cell rule of ``k^{*r}``, ``rule_b`` that of ``k^{*j}``.
    Returns the samples on ``[0, t_jm + t_rm]`` and the gap between the two
    branches at the seam ``t_jm``.
    """
    n_out = jm + s_r.shape[0]
    trail = (1,) * (s_j.ndim - 1)
    pad = np.zeros((n_out,) + s_j.shape[1:], dtype=complex)
    pad[: jm + 1] = s_j[: jm + 1]
    conv = causal_product(rule_a, pad)
    out = np.empty_like(conv)
    out[: jm + 1] = conv[: jm + 1]
    ip = np.arange(1, n_out - jm)
    sj_end = s_j[jm]
    t1 = _compose(sj_end, s_r[ip], diagonal)
    t2 = conv[jm + ip] - rule_a.upper[ip - 1].reshape((-1,) + trail) * sj_end
    rpad = np.zeros_like(pad)
    rpad[: s_r.shape[0]] = s_r
    t3 = causal_product(_zeroed_head(rule_b, jm), rpad)[jm + ip]
    out[jm + 1 :] = t1 + t2 + t3
    # three-term branch at the seam itself: S_r(0) = 0, no cells in either window
    seam = _compose(sj_end, s_r[0], diagonal) + conv[jm]
    gap = float(np.abs(seam - conv[jm]).max())
    return out, gap


def extend_family(family: ConvolutedFamily, n_target: int, kappa: float | None = None) -> ConvolutedFamily:
    """Ladder ``S_{k^{*2}}, ..., S_{k^{*n_target}}`` from a ``k``-family on ``[0, tau]``.

    ``kappa`` defaults to one grid cell below the family horizon.  Level
    ``n + 1`` lives on ``[0, (n + 1) kappa]``: the convolution branch on
    ``[0, n kappa]`` and the three-term branch beyond.  The returned family
    carries the lower levels in ``ladder``.
    """
    if family.power != 1:
        raise ValueError("extension starts from a k-family (power 1)")
    if n_target < 2:
        raise ValueError("n_target must be at least 2")
    grid = family.grid
    if kappa is None:
        m = family.n - 2
    else:
        m = grid.index(kappa, snap=True)
        if m >= family.n - 1:
            raise ValueError(f"kappa={kappa} must be strictly below the family horizon {family.horizon}")
    if m < 1:
        raise ValueError("family horizon too short for an extension step")
    if n_target * m > grid.n_points - 1:
        raise ValueError(
            f"insufficient grid horizon: depth {n_target} needs {n_target * grid.t[m]:.6g}, grid ends at {grid.horizon}"
        )
    k = family.kernel
    rule_k = rule_of(as_sampled(k, grid))
    base = replace(family, horizon=grid.t[m], values=family.values[: m + 1], kappa=grid.t[m])
    levels = [base]
    gaps = []
    for n in range(1, n_target):
        kn = levels[-1].kernel
        rule_n = rule_of(as_sampled(kn, grid))
        vals, gap = _split(levels[-1].values, base.values, n * m, rule_k, rule_n, family.diagonal)
        gaps.append(gap)
        levels.append(
            ConvolutedFamily(
                _kernel_power(k, n + 1, grid), k, n + 1, family.generator, grid.t[(n + 1) * m], grid, vals, grid.t[m]
            )
        )
    return replace(levels[-1], ladder=tuple(levels[:-1]), seam_gaps=tuple(gaps))


def extend_family_mid(ladder: ConvolutedFamily, j: int, n: int | None = None, tol: float | None = None) -> ResidualReport:
    """Rebuild level ``n`` through the split at level ``j`` and compare with the ladder."""
    n = ladder.power if n is None else n
    if not 1 <= j <= n - 1:
        raise ValueError(f"need 1 <= j <= n - 1, got j={j}, n={n}")
    if n > ladder.power:
        raise ValueError(f"level {n} beyond the ladder depth {ladder.power}")
    grid = ladder.grid
    target = ladder.level(n)
    sj, sr = ladder.level(j), ladder.level(n - j)
    m = grid.index(ladder.kappa)
    rule_a = rule_of(as_sampled(sr.kernel, grid))
    rule_b = rule_of(as_sampled(sj.kernel, grid))
    vals, _ = _split(sj.values, sr.values, j * m, rule_a, rule_b, ladder.diagonal)
    diff = np.abs(vals - target.values).reshape(target.n, -1).max(axis=1)
    trace = np.full(grid.n_points, np.nan)
    trace[: target.n] = diff
    return ResidualReport(
        "extension_split",
        float(diff.max()),
        grid.summary(),
        {"j": j, "n": n, "kappa": ladder.kappa},
        tol if tol is not None else 10 * grid.dt**2,
        values={"split_family": vals},
        trace=trace,
    )


def split_gap(ladder: ConvolutedFamily, j1: int, j2: int, n: int | None = None, tol: float | None = None) -> ResidualReport:
    """Gap between the level-``n`` constructions through splits ``j1`` and ``j2``."""
    a = extend_family_mid(ladder, j1, n)
    b = extend_family_mid(ladder, j2, n)
    va, vb = a.values["split_family"], b.values["split_family"]
    diff = np.abs(va - vb).reshape(va.shape[0], -1).max(axis=1)
    grid = ladder.grid
    trace = np.full(grid.n_points, np.nan)
    trace[: diff.shape[0]] = diff
    return ResidualReport(
        "split_gap",
        float(diff.max()),
        grid.summary(),
        {"j1": j1, "j2": j2, "n": ladder.power if n is None else n},
        tol if tol is not None else 10 * grid.dt**2,
        trace=trace,
    )


# -- defining identities -------------------------------------------------------


def _lattice(n_last: int, size: int = LATTICE) -> list[tuple[int, int]]:
    """Grid-index pairs ``(i, j)`` on a ``size x size`` lattice with ``i + j <= n_last``."""
    pts = sorted({int(round(n_last * a / size)) for a in range(size + 1)})
    return [(i, j) for i in pts for j in pts if i + j <= n_last]


def _qmom(kernel: Kernel, grid: Grid):
    return quadratic_moments(rule_of(as_sampled(kernel, grid)))


def _pair_indices(family: ConvolutedFamily, t, s, n_last: int):
    grid = family.grid
    if t is None and s is None:
        return _lattice(n_last)
    it, is_ = grid.index(t, snap=True), grid.index(s, snap=True)
    if it < 0 or is_ < 0 or it + is_ > n_last:
        raise ValueError(f"need 0 <= s, t and t + s within the family domain, got t={t}, s={s}")
    return [(it, is_)]


def composition_residual(
    family: ConvolutedFamily, t: float | None = None, s: float | None = None, tol: float | None = None
) -> ResidualReport:
    """``S(t)S(s) = int_t^{t+s} K(t+s-r) S(r) dr - int_0^s K(t+s-r) S(r) dr``.

    Both integrals use the kernel's cell moments against piecewise quadratic
    interpolation of ``S``.  Without ``t, s`` the check runs over a
    deterministic lattice in ``{t + s <= horizon}``.
    """
    grid = family.grid
    qm = _qmom(family.kernel, grid)
    S = family.values
    res = 0.0
    trace = np.full(grid.n_points, np.nan)
    for it, is_ in _pair_indices(family, t, s, family.n - 1):
        q = it + is_
        lhs = _compose(S[it], S[is_], family.diagonal)
        rhs = window_sum_quadratic(qm, S, q, 0, is_) - window_sum_quadratic(qm, S, q, it, q)
        r = float(np.abs(lhs - rhs).max())
        res = max(res, r)
        trace[q] = r if np.isnan(trace[q]) else max(trace[q], r)
    return ResidualReport(
        "composition",
        res,
        grid.summary(),
        {"t": t, "s": s, "power": family.power, "kernel": describe(family.kernel)},
        tol if tol is not None else 10 * grid.dt**2,
        trace=trace,
    )


def splitting_residual(
    ladder: ConvolutedFamily, t: float | None = None, s: float | None = None, tol: float | None = None
) -> ResidualReport:
    """``S_{k*k}(t+s) = S_k(t)S_k(s) + (int_0^t + int_0^s) k(t+s-u) S_k(u) du`` for ``t, s < kappa``."""
    s2 = ladder.level(2)
    s1 = ladder.level(1)
    grid = ladder.grid
    qm = _qmom(s1.kernel, grid)
    S = s1.values
    m = s1.n - 1
    res = 0.0
    trace = np.full(grid.n_points, np.nan)
    if t is None and s is None:
        pts = sorted({int(round((m - 1) * a / LATTICE)) for a in range(LATTICE + 1)})
        pairs = [(i, j) for i in pts for j in pts]
    else:
        pairs = [(grid.index(t, snap=True), grid.index(s, snap=True))]
        if not all(0 <= p < m for p in pairs[0]):
            raise ValueError(f"t and s must lie in [0, kappa), kappa={ladder.kappa}")
    for it, is_ in pairs:
        q = it + is_
        lhs = s2.values[q]
        rhs = (
            _compose(S[it], S[is_], ladder.diagonal)
            + window_sum_quadratic(qm, S, q, is_, q)
            + window_sum_quadratic(qm, S, q, it, q)
        )
        r = float(np.abs(lhs - rhs).max())
        res = max(res, r)
        trace[q] = r if np.isnan(trace[q]) else max(trace[q], r)
    if tol is None:
        tol = 10 * grid.dt ** (1.5 if s1.kernel.is_singular else 2.0)
    return ResidualReport(
        "splitting",
        res,
        grid.summary(),
        {"t": t, "s": s, "kappa": ladder.kappa},
        tol,
        trace=trace,
    )


def _running_integral(values: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid running integral with the Euler-Maclaurin end correction (exact for quadratics)."""
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * dt * (values[1:] + values[:-1]), axis=0)
    if values.shape[0] >= 3:
        d = np.gradient(values, dt, axis=0, edge_order=2)
        out -= dt**2 / 12 * (d - d[0])
    return out


def generator_residual(
    family: ConvolutedFamily, x=None, t: float | None = None, tol: float | None = None
) -> ResidualReport:
    """``A int_0^t S(r) x dr - S(t) x + (int_0^t K) x`` on the family domain.

    ``x = None`` checks every basis vector; ``t = None`` every grid time.
    """
    grid = family.grid
    A = family.generator
    S = family.values
    cum = _running_integral(S, grid.dt)
    Kc = cumulative(as_sampled(family.kernel, grid)).values[: family.n]
    ident = _identity_like(A)
    if A.is_diagonal:
        r = A.eigenvalues() * cum - S + Kc[:, None] * ident
    else:
        r = np.matmul(A.matrix(), cum) - S + Kc[:, None, None] * ident
    if x is not None:
        xv = np.asarray(x, dtype=complex)
        r = r * xv if A.is_diagonal else r @ xv
    per_t = np.abs(r).reshape(family.n, -1).max(axis=1)
    if t is not None:
        i = grid.index(t, snap=True)
        if i >= family.n:
            raise ValueError(f"t={t} beyond the family horizon {family.horizon}")
        res = float(per_t[i])
    else:
        res = float(per_t.max())
    trace = np.full(grid.n_points, np.nan)
    trace[: family.n] = per_t
    if tol is None:
        tol = 10 * grid.dt ** (1.5 if family.kernel.is_singular else 2.0)
    return ResidualReport(
        "generator",
        res,
        grid.summary(),
        {"t": t, "power": family.power, "kernel": describe(family.kernel)},
        tol,
        trace=trace,
    )


def nondegeneracy_check(family: ConvolutedFamily, n_samples: int = 20, tol: float = 1e12) -> ResidualReport:
    """Condition number of the stacked operators ``[S(t_1); ...; S(t_J)]``.

    Full column rank on the sampled times means ``S(t) x = 0`` for all ``t``
    forces ``x = 0``; the check passes when the condition number is below
    ``tol``.
    """
    idx = np.unique(np.linspace(1, family.n - 1, n_samples).round().astype(int))
    stack = family.full()[idx].reshape(-1, family.generator.dim)
    sv = np.linalg.svd(stack, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    return ResidualReport(
        "nondegeneracy",
        cond,
        family.grid.summary(),
        {"n_samples": int(idx.size)},
        tol,
        values={"sigma_min": float(sv[-1]), "sigma_max": float(sv[0]), "rank": int(np.sum(sv > sv[0] * 1e-12))},
    )
