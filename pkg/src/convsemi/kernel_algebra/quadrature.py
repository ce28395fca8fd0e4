"""Product quadrature on a uniform grid.

A kernel ``k`` enters through its cell moments

    B_c = int_cell_c k(u) (t_{c+1} - u)/dt du,   A_c = int_cell_c k(u) (u - t_c)/dt du,

and the other factor is interpolated linearly between nodes.  For a plain
sampled ``k`` the moments reduce to the trapezoidal weights ``dt/2 k_c``
and ``dt/2 k_{c+1}``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from .grid import SampledFn
from .kernels import CellRule, trapezoid_rule

#: above this many samples the causal sums switch to overlap-add FFT
FFT_THRESHOLD = 4096


def rule_of(f: SampledFn) -> CellRule:
    """Cell rule of ``f``: exact for kernel-backed samples, trapezoid otherwise."""
    if f.kernel is not None:
        return f.kernel.cell_rule(f.grid)
    return trapezoid_rule(f.values, f.grid.dt)


def node_weights(rule: CellRule) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(W, Bpad)`` with ``W_0 = B_0``, ``W_c = B_c + A_{c-1}``."""
    B = np.append(rule.lower, 0.0)
    A = np.concatenate([[0.0], rule.upper])
    return B + A, B


def _conv_head(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """First ``len(x)`` entries of ``conv(w, x)`` along axis 0."""
    n = x.shape[0]
    x2 = x.reshape(n, -1)
    dtype = np.result_type(w, x2)
    out = np.empty((n, x2.shape[1]), dtype=dtype)
    if n <= FFT_THRESHOLD:
        for j in range(x2.shape[1]):
            out[:, j] = np.convolve(w[:n], x2[:, j])[:n]
    else:
        out[:] = signal.oaconvolve(w[:n, None], x2, axes=0)[:n]
    return out.reshape(x.shape)


def causal_product(rule: CellRule, x: np.ndarray) -> np.ndarray:
    """``Y_p = sum_{c<p} B_c x_{p-c} + A_c x_{p-c-1}``, i.e. ``int_0^{t_p} k(u) x(t_p-u) du``."""
    x = np.asarray(x)
    W, Bp = node_weights(rule)
    n = x.shape[0]
    if W.shape[0] < n:
        raise ValueError("kernel rule shorter than the sampled factor")
    y = _conv_head(W, x)
    return y - Bp[:n].reshape((n,) + (1,) * (x.ndim - 1)) * x[0]


def dual_product(rule: CellRule, x: np.ndarray) -> np.ndarray:
    """``Z_n = int_0^{T - t_n} k(u) x(t_n + u) du`` over the whole grid."""
    x = np.asarray(x)
    W, Bp = node_weights(rule)
    n = x.shape[0]
    y = _conv_head(W, x[::-1])[::-1]
    corr = Bp[:n][::-1].reshape((n,) + (1,) * (x.ndim - 1)) * x[-1]
    return y - corr


def partial_table(rule: CellRule, x: np.ndarray) -> np.ndarray:
    """Table ``T[q, j] = int_0^{t_j} k(u) x(t_q - u) du`` for ``j <= q``.

    Entries with ``j > q`` treat ``x`` as zero at negative times.
    """
    x = np.asarray(x)
    n = x.shape[0]
    B, A = rule.lower[: n - 1], rule.upper[: n - 1]
    xpad = np.concatenate([np.zeros(n, dtype=x.dtype), x])
    # X[q, c] = x[q - c], X1[q, c] = x[q - c - 1]
    win = sliding_window_view(xpad, n + 1)[:, ::-1]  # win[q, j] = x[q - j]
    X = win[:, : n - 1]
    X1 = win[:, 1:n]
    cells = B * X + A * X1
    out = np.zeros((n, n), dtype=np.result_type(B, x))
    np.cumsum(cells, axis=1, out=out[:, 1:])
    return out


def window_sum(rule: CellRule, x: np.ndarray, q: int, a: int, b: int) -> np.ndarray:
    """``int_{t_a}^{t_b} k(u) x(t_q - u) du`` with linear interpolation of ``x``."""
    if b <= a:
        return np.zeros(x.shape[1:], dtype=np.result_type(rule.w, x))
    B = rule.lower[a:b]
    A = rule.upper[a:b]
    x0 = x[q - b + 1 : q - a + 1][::-1]
    x1 = x[q - b : q - a][::-1]
    return np.tensordot(B, x0, axes=(0, 0)) + np.tensordot(A, x1, axes=(0, 0))


def quadratic_moments(rule: CellRule) -> tuple[np.ndarray, np.ndarray]:
    """Moments of the kernel against quadratic Lagrange bases per cell.

    For cell ``c`` the other factor is interpolated through its values at
    local offsets ``{0, 1, 2}`` (forward stencil) or ``{-1, 0, 1}``
    (backward stencil), where offset ``j`` means ``u = t_c + j dt``.
    Returns arrays of shape ``(n_cells, 3)`` for both stencils.
    """
    xi, w = rule.xi, rule.w

    def moments(nodes):
        out = []
        for i, ni in enumerate(nodes):
            ell = np.ones_like(xi)
            for j, nj in enumerate(nodes):
                if j != i:
                    ell = ell * (xi - nj) / (ni - nj)
            out.append(np.sum(w * ell, axis=1))
        return np.stack(out, axis=1)

    return moments((0.0, 1.0, 2.0)), moments((-1.0, 0.0, 1.0))


def window_sum_quadratic(
    qmom: tuple[np.ndarray, np.ndarray], x: np.ndarray, q: int, a: int, b: int
) -> np.ndarray:
    """``int_{t_a}^{t_b} k(u) x(t_q - u) du`` with piecewise quadratic ``x``.

    ``x`` must be available on indices ``0..q``; exact when ``x`` is a
    quadratic polynomial.
    """
    fwd, bwd = qmom
    if b <= a:
        return np.zeros(x.shape[1:], dtype=np.result_type(fwd, x))
    c = np.arange(a, b)
    # offset j at cell c samples x at index q - c - j
    use_fwd = q - c - 2 >= 0
    total = 0
    for stencil, mask, offsets in ((fwd, use_fwd, (0, 1, 2)), (bwd, ~use_fwd, (-1, 0, 1))):
        if not mask.any():
            continue
        cm = c[mask]
        for i, off in enumerate(offsets):
            idx = q - cm - off
            if np.any(idx < 0) or np.any(idx >= x.shape[0]):
                raise ValueError("quadratic stencil leaves the sampled range")
            total = total + np.tensordot(stencil[cm, i], x[idx], axes=(0, 0))
    return total
