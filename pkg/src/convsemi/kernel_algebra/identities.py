"""Residual checks for the scalar convolution identities.

Every check evaluates both sides of an identity on grid nodes and reports
the largest absolute difference.  Integrals over sub-ranges are read off
partial-convolution tables (:func:`~.quadrature.partial_table`), so a whole
lattice of parameters costs one O(N^2) table.

Identity ids
------------
``lemma21``
    ``int_0^{t-tau} f(t-s)(chi*g)(s) ds + int_0^tau g(t-s)(chi*f)(s) ds
    = (g*(chi*f))(t) - (chi*g)(t-tau)(chi*f)(tau)``.
``coro22``
    the same with ``f = g = j_alpha``, against the closed form
    ``t**(2a)/Gamma(2a+1) - (t-tau)**a tau**a / Gamma(a+1)**2``.
``coro23``
    ``(int_0^{s+u} - int_0^s - int_0^u) f(u+s-r) f(r) dr = 0``.
``thm25``
    ``k_t * k_s (x) = int_t^{t+s} k(t+s-r) k_r(x) dr - int_0^s k(t+s-r) k_r(x) dr``
    with ``k_t(r) = k(t-r)`` on ``[0, t]``.
``kunstmann``
    ``I^n_t * I^n_s`` with ``I^n_t(r) = (t-r)^n/n!`` on ``[0, t]``, compared
    against brute-force quadrature; the closed form displayed in the
    literature is reported alongside, not trusted.
"""

from __future__ import annotations

import math
from typing import Any, Callable

import numpy as np
from scipy import integrate, special

from .grid import Grid, ResidualReport, SampledFn
from .kernels import ExpWeighted, FractionalJ, Heaviside, Kernel, describe
from .ops import as_sampled, convolve, cumulative
from .quadrature import partial_table, rule_of

LATTICE = 20


def _smooth_default() -> Kernel:
    return ExpWeighted(-1.0, FractionalJ(2.0))  # t e^{-t}


def _snap(grid: Grid, t: float) -> int:
    return grid.index(t, snap=True)


def _trimmed(grid: Grid, n: int) -> Grid:
    return Grid(grid.dt, min(grid.n_points, max(n, 3)))


def _pairs_t_tau(params: dict, grid: Grid, reach: float) -> list[tuple[int, int]]:
    """``(t, tau)`` index pairs with ``0 <= tau <= t``."""
    if "t" in params:
        t, tau = float(params["t"]), float(params.get("tau", 0.0))
        if not 0 <= tau <= t:
            raise ValueError(f"need 0 <= tau <= t, got t={t}, tau={tau}")
        return [(_snap(grid, t), _snap(grid, tau))]
    span = min(reach, grid.horizon)
    out = []
    for i in range(1, LATTICE + 1):
        t = span * i / LATTICE
        for j in range(1, LATTICE + 1):
            out.append((_snap(grid, t), _snap(grid, t * j / LATTICE)))
    return out


def _pairs_square(params: dict, grid: Grid, keys: tuple[str, str], reach: float) -> list[tuple[int, int]]:
    a, b = keys
    if a in params:
        x, y = float(params[a]), float(params[b])
        if x < 0 or y < 0:
            raise ValueError(f"{a} and {b} must be non-negative")
        return [(_snap(grid, x), _snap(grid, y))]
    span = min(reach, grid.horizon / 2)
    return [
        (_snap(grid, span * i / LATTICE), _snap(grid, span * j / LATTICE))
        for i in range(1, LATTICE + 1)
        for j in range(1, LATTICE + 1)
    ]


def _trace(grid: Grid, q: np.ndarray, res: np.ndarray) -> np.ndarray:
    tr = np.full(grid.n_points, np.nan)
    for qi, r in zip(q, res):
        if qi < grid.n_points and not (tr[qi] >= r):
            tr[qi] = r
    return tr


def _beta_piece(x: float, t: float, p: float, q: float) -> float:
    """``int_0^x (t-s)^(p-1) s^q ds`` for ``0 <= x <= t``."""
    if x <= 0:
        return 0.0
    return t ** (p + q) * special.beta(q + 1, p) * special.betainc(q + 1, p, min(x / t, 1.0))


# -- Lemma: integration by parts for chi-convolutions -------------------------


def _lemma21(params: dict, grid: Grid) -> ResidualReport:
    f: Kernel = params.get("f", _smooth_default())
    g: Kernel = params.get("g", ExpWeighted(-0.5, Heaviside()))
    pairs = _pairs_t_tau(params, grid, 0.8)
    mode = params.get("mode", "auto")
    fa, ga = getattr(f, "fractional_order", None), getattr(g, "fractional_order", None)
    if mode == "auto":
        mode = "analytic" if (fa is not None and ga is not None) else "grid"
    dt = grid.dt
    if mode == "analytic":
        if fa is None or ga is None:
            raise ValueError("analytic mode needs fractional kernels f and g")
        a, b = fa, ga
        res, lhs_v, rhs_v = [], [], []
        for q, i in pairs:
            t, tau = q * dt, i * dt
            lhs = _beta_piece(t - tau, t, a, b) / (special.gamma(a) * special.gamma(b + 1)) + _beta_piece(
                tau, t, b, a
            ) / (special.gamma(b) * special.gamma(a + 1))
            rhs = t ** (a + b) / special.gamma(a + b + 1) - (t - tau) ** b * tau**a / (
                special.gamma(b + 1) * special.gamma(a + 1)
            )
            lhs_v.append(lhs)
            rhs_v.append(rhs)
            res.append(abs(lhs - rhs))
        tol = params.get("tol", 1e-12)
    else:
        n = max(q for q, _ in pairs) + 1
        sub = _trimmed(grid, n)
        fs, gs = as_sampled(f, sub), as_sampled(g, sub)
        F, G = cumulative(fs).values, cumulative(gs).values
        Tf = partial_table(rule_of(fs), G)
        Tg = partial_table(rule_of(gs), F)
        q = np.array([p[0] for p in pairs])
        i = np.array([p[1] for p in pairs])
        lhs = (Tf[q, q] - Tf[q, i]) + (Tg[q, q] - Tg[q, q - i])
        rhs = Tg[q, q] - G[q - i] * F[i]
        lhs_v, rhs_v = lhs.tolist(), rhs.tolist()
        res = np.abs(lhs - rhs).tolist()
        tol = params.get("tol", 10 * dt**2)
    values = {"mode": mode, "pairs": len(pairs)}
    if len(pairs) == 1:
        values.update(lhs=float(np.real(lhs_v[0])), rhs=float(np.real(rhs_v[0])))
    report = ResidualReport(
        "lemma21",
        max(res),
        grid.summary(),
        {"f": describe(f), "g": describe(g), **_scalar_params(params)},
        tol,
        values=values,
    )
    report.trace = _trace(grid, np.array([p[0] for p in pairs]), np.array(res))
    return report


# -- Corollary: f = g = j_alpha -------------------------------------------------


def _coro22(params: dict, grid: Grid) -> ResidualReport:
    a = float(params.get("alpha", 2.0))
    pairs = _pairs_t_tau(params, grid, 0.8)
    dt = grid.dt
    mode = params.get("mode", "grid")
    q = np.array([p[0] for p in pairs])
    i = np.array([p[1] for p in pairs])
    t, tau = q * dt, i * dt
    rhs = t ** (2 * a) / special.gamma(2 * a + 1) - (t - tau) ** a * tau**a / special.gamma(a + 1) ** 2
    if mode == "analytic":
        c = 1.0 / (special.gamma(a) * special.gamma(a + 1))
        lhs = np.array(
            [c * (_beta_piece(tt - ta, tt, a, a) + _beta_piece(ta, tt, a, a)) for tt, ta in zip(t, tau)]
        )
        tol = params.get("tol", 1e-12)
    else:
        sub = _trimmed(grid, int(q.max()) + 1)
        fs = FractionalJ(a).sample(sub)
        F = cumulative(fs).values
        T = partial_table(rule_of(fs), F)
        lhs = (T[q, q] - T[q, i]) + (T[q, q] - T[q, q - i])
        tol = params.get("tol", 10 * dt**2)
    res = np.abs(lhs - rhs)
    values: dict[str, Any] = {"mode": mode, "pairs": len(pairs)}
    if len(pairs) == 1:
        values.update(lhs=float(lhs[0]), rhs=float(rhs[0]))
    report = ResidualReport("coro22", float(res.max()), grid.summary(), _scalar_params(params), tol, values=values)
    report.trace = _trace(grid, q, res)
    return report


# -- Corollary: splitting of a self-convolution ----------------------------------


def _coro23(params: dict, grid: Grid) -> ResidualReport:
    f: Kernel = params.get("f", _smooth_default())
    pairs = _pairs_square(params, grid, ("s", "u"), 0.8)
    s = np.array([p[0] for p in pairs])
    u = np.array([p[1] for p in pairs])
    C = s + u
    if C.max() >= grid.n_points:
        raise ValueError("s + u exceeds the grid horizon")
    sub = _trimmed(grid, int(C.max()) + 1)
    fs = as_sampled(f, sub)
    T = partial_table(rule_of(fs), fs.values)
    res = np.abs(T[C, C] - T[C, s] - T[C, u])
    report = ResidualReport(
        "coro23",
        float(res.max()),
        grid.summary(),
        {"f": describe(f), **_scalar_params(params)},
        params.get("tol", 10 * grid.dt**2),
        values={"pairs": len(pairs)},
    )
    report.trace = _trace(grid, C, res)
    return report


# -- composition law of the canonical family k_t ------------------------


def canonical_sides(k: Kernel | SampledFn, grid: Grid, qt: int, qs: int, table: np.ndarray | None = None):
    """Both sides of the composition law of ``k_t`` as functions of ``x``.

    Returns ``(lhs, rhs)`` sampled on all grid nodes, where
    ``lhs(x) = (k_t * k_s)(x)`` and ``rhs(x)`` is the difference of the two
    integrals over ``r``.  Every piece is an integral
    ``int k(v) k(C - v) dv`` with ``C = t + s - x``; the ranges are

    * lhs: ``v in [max(s - x, 0), min(s, C)]``,
    * rhs: ``[0, min(s, C)]`` minus ``[t, C]`` when ``x < s``.
    """
    if table is None:
        ks = as_sampled(k, grid)
        table = partial_table(rule_of(ks), ks.values)
    n = grid.n_points
    x = np.arange(n)
    C = qt + qs - x
    live = C > 0
    Cc = np.where(live, C, 0)
    hi = np.minimum(qs, Cc)
    lo = np.clip(qs - x, 0, None)
    lo = np.minimum(lo, hi)
    lhs = np.where(live, table[Cc, hi] - table[Cc, lo], 0.0)
    second = np.where(Cc > qt, table[Cc, Cc] - table[Cc, np.minimum(qt, Cc)], 0.0)
    rhs = np.where(live, table[Cc, hi] - second, 0.0)
    return lhs, rhs


def _thm25(params: dict, grid: Grid) -> ResidualReport:
    k: Kernel = params.get("k", _smooth_default())
    tau = float(params.get("tau", grid.horizon))
    if tau > grid.horizon + 1e-12:
        raise ValueError("tau exceeds the grid horizon")
    n_tau = int(math.floor(tau / grid.dt + 1e-9))
    if "t" in params:
        t, s = float(params["t"]), float(params["s"])
        if t < 0 or s < 0 or t + s >= tau:
            raise ValueError(f"need t, s >= 0 and t + s < tau, got t={t}, s={s}, tau={tau}")
        pairs = [(_snap(grid, t), _snap(grid, s))]
    else:
        span = 0.45 * tau
        pairs = [
            (_snap(grid, span * i / LATTICE), _snap(grid, span * j / LATTICE))
            for i in range(1, LATTICE + 1)
            for j in range(1, LATTICE + 1)
        ]
    sub = _trimmed(grid, n_tau)
    ks = as_sampled(k, sub)
    table = partial_table(rule_of(ks), ks.values)
    worst = 0.0
    trace = np.zeros(grid.n_points)
    trace[sub.n_points :] = np.nan
    for qt, qs in pairs:
        lhs, rhs = canonical_sides(ks, sub, qt, qs, table)
        r = np.abs(lhs - rhs)
        worst = max(worst, float(r.max()))
        trace[: sub.n_points] = np.maximum(trace[: sub.n_points], r)
    report = ResidualReport(
        "thm25",
        worst,
        grid.summary(),
        {"k": describe(k), "tau": tau, **_scalar_params(params)},
        params.get("tol", 10 * grid.dt**2),
        values={"pairs": len(pairs)},
    )
    report.trace = trace
    return report


# -- Kunstmann's scalar identity ------------------------------------------------


def _I(n: int, t: float) -> Callable[[np.ndarray], np.ndarray]:
    def f(r):
        r = np.asarray(r, dtype=float)
        return np.where((r >= 0) & (r <= t), (t - r) ** n / math.factorial(n), 0.0)

    return f


def kunstmann_displayed_rhs(n: int, t: float, s: float, x: float) -> float:
    """Right-hand side as displayed in the literature remark."""
    total = _I(2 * n, s + t)(x)
    for j in range(n):
        total -= s**j / math.factorial(j) * _I(2 * n - j, t)(x) - t**j / math.factorial(j) * _I(2 * n - j, s)(x)
    return float(total)


def _kunstmann(params: dict, grid: Grid) -> ResidualReport:
    n = int(params.get("n", 1))
    t = float(params.get("t", 1.0))
    s = float(params.get("s", 1.0))
    x = float(params.get("x", 1.0))
    if n < 0 or t < 0 or s < 0 or x < 0:
        raise ValueError("n, t, s, x must be non-negative")
    if x > grid.horizon:
        raise ValueError("x exceeds the grid horizon")
    It, Is = _I(n, t), _I(n, s)
    lo, hi = max(0.0, x - t), min(x, s)
    brute = 0.0
    if hi > lo:
        brute = integrate.quad(lambda y: float(It(x - y)) * float(Is(y)), lo, hi, epsabs=1e-14, epsrel=1e-13)[0]
    ft = SampledFn(grid, It(grid.t))
    fs = SampledFn(grid, Is(grid.t))
    conv = convolve(ft, fs)
    on_grid = float(np.real(conv.at(x)))
    displayed = kunstmann_displayed_rhs(n, t, s, x)
    tol = params.get("tol", max(10 * grid.dt**2, 1e-6))
    discrepancy = abs(brute - displayed)
    report = ResidualReport(
        "kunstmann",
        abs(on_grid - brute),
        grid.summary(),
        {"n": n, "t": t, "s": s, "x": x},
        tol,
        values={
            "brute_force_lhs": brute,
            "grid_lhs": on_grid,
            "displayed_rhs": displayed,
            "discrepancy": discrepancy,
            "discrepancy_flagged": bool(discrepancy > tol),
        },
    )
    trace = np.full(grid.n_points, np.nan)
    trace[grid.index(x, snap=True)] = report.max_abs_residual
    report.trace = trace
    return report


_CHECKS = {
    "lemma21": _lemma21,
    "coro22": _coro22,
    "coro23": _coro23,
    "thm25": _thm25,
    "kunstmann": _kunstmann,
}

IDENTITY_IDS = tuple(_CHECKS)


def _scalar_params(params: dict) -> dict:
    return {k: v for k, v in params.items() if isinstance(v, (int, float, str)) and k != "tol"}


def check_identity(name: str, params: dict | None, grid: Grid) -> ResidualReport:
    """Evaluate both sides of identity ``name`` on ``grid``.

    Parameters
    ----------
    name : str
        One of :data:`IDENTITY_IDS`.
    params : dict
        Free variables of the identity.  Kernels are passed as
        :class:`~.kernels.Kernel` objects; ``tol`` overrides the default
        tolerance (``10 dt**2`` for grid evaluations).  When the scalar
        variables (``t``/``tau``, ``s``/``u``, ``t``/``s``) are omitted a
        deterministic 20 x 20 lattice is used.
    grid : Grid
    """
    try:
        fn = _CHECKS[name]
    except KeyError:
        raise KeyError(f"unknown identity id {name!r}; known: {', '.join(IDENTITY_IDS)}") from None
    return fn(dict(params or {}), grid)
