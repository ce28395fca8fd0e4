"""Uniform grids, sampled functions and residual reports."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

#: relative slack used when snapping a time onto a grid node
NODE_SLACK = 1e-9


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``t_i = i * dt`` for ``i = 0, ..., n_points - 1``."""

    dt: float
    n_points: int

    def __post_init__(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"grid step must be positive, got {self.dt}")
        if self.n_points < 2:
            raise ValueError(f"grid needs at least 2 points, got {self.n_points}")

    @classmethod
    def from_horizon(cls, dt: float, horizon: float) -> "Grid":
        n = int(round(horizon / dt))
        if abs(n * dt - horizon) > NODE_SLACK * max(1.0, horizon):
            raise ValueError(f"horizon {horizon} is not a multiple of dt={dt}")
        return cls(float(dt), n + 1)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dt

    @property
    def horizon(self) -> float:
        return (self.n_points - 1) * self.dt

    def index(self, t: float, *, snap: bool = False) -> int:
        """Index of the node at time ``t``.

        With ``snap=False`` the time must coincide with a node.
        """
        i = int(round(t / self.dt))
        if not snap and abs(i * self.dt - t) > NODE_SLACK * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a grid node (dt={self.dt})")
        if i < 0 or i >= self.n_points:
            raise ValueError(f"t={t} lies outside the grid [0, {self.horizon}]")
        return i

    def summary(self) -> dict[str, Any]:
        return {"dt": self.dt, "n": self.n_points}


@dataclass(frozen=True, eq=False)
class SampledFn:
    """Function sampled on a grid.

    Parameters
    ----------
    grid : Grid
    values : ndarray
        Samples, shape ``(n_points,)`` or ``(n_points, ...)``.
    support_end : float, optional
        ``b`` such that the function vanishes for ``t > b``.
    kernel : Kernel, optional
        Analytic origin of the samples. When present the exact cell
        moments of the kernel are used by the product quadrature instead of
        trapezoidal weights.
    growth : (M, omega), optional
        Bound ``|f(t)| <= M exp(omega t)`` used for Laplace tail bounds.
    """

    grid: Grid
    values: np.ndarray
    support_end: float | None = None
    kernel: Any = None
    growth: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.values)
        if v.shape[:1] != (self.grid.n_points,):
            raise ValueError(
                f"values have {v.shape[0] if v.ndim else 0} samples, grid has {self.grid.n_points}"
            )
        object.__setattr__(self, "values", v)
        b = self.support_end
        if b is not None and not (0 <= b <= self.grid.horizon + NODE_SLACK):
            raise ValueError(f"support end {b} outside [0, {self.grid.horizon}]")

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    def at(self, t: float | np.ndarray) -> np.ndarray:
        """Linear interpolation between nodes (1-D samples only)."""
        t = np.asarray(t, dtype=float)
        x = t / self.grid.dt
        i = np.clip(np.floor(x).astype(int), 0, self.grid.n_points - 2)
        w = x - i
        v = self.values
        return (1 - w) * v[i] + w * v[i + 1]

    def zero_scan(self, b: float | None = None) -> float:
        """Largest magnitude at nodes strictly beyond ``b``."""
        b = self.support_end if b is None else b
        if b is None:
            return math.inf
        mask = self.t > b + NODE_SLACK * max(1.0, b)
        if not mask.any():
            return 0.0
        return float(np.max(np.abs(self.values[mask])))

    def shifted(self, steps: int) -> "SampledFn":
        """Samples of ``f(t + steps*dt)``, zero-filled at the right end."""
        if steps < 0:
            raise ValueError("only left shifts are supported")
        v = np.zeros_like(self.values)
        v[: self.grid.n_points - steps] = self.values[steps:]
        b = None if self.support_end is None else max(0.0, self.support_end - steps * self.grid.dt)
        return SampledFn(self.grid, v, b)

    def with_values(self, values: np.ndarray, support_end: float | None = None) -> "SampledFn":
        return SampledFn(self.grid, values, support_end)

    def __add__(self, other: "SampledFn") -> "SampledFn":
        _same_grid(self, other)
        b = None
        if self.support_end is not None and other.support_end is not None:
            b = max(self.support_end, other.support_end)
        return SampledFn(self.grid, self.values + other.values, b)

    def __sub__(self, other: "SampledFn") -> "SampledFn":
        return self + (-1.0) * other

    def __mul__(self, c: complex) -> "SampledFn":
        return SampledFn(self.grid, c * self.values, self.support_end)

    __rmul__ = __mul__

    def to_csv(self) -> str:
        """CSV text with columns ``t, re, im`` at full double precision."""
        buf = io.StringIO()
        buf.write("t,re,im\n")
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1:
            raise ValueError("only scalar samples serialize to t,re,im")
        for ti, vi in zip(self.t, v):
            buf.write(f"{ti:.17g},{vi.real:.17g},{vi.imag:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, support_end: float | None = None) -> "SampledFn":
        rows = [line.split(",") for line in text.strip().splitlines()[1:]]
        arr = np.array(rows, dtype=float)
        t = arr[:, 0]
        dt = t[1] - t[0]
        grid = Grid(float(dt), len(t))
        return cls(grid, arr[:, 1] + 1j * arr[:, 2], support_end)


def _same_grid(f: SampledFn, g: SampledFn) -> Grid:
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: {f.grid} vs {g.grid}")
    return f.grid


@dataclass
class ResidualReport:
    """Outcome of one residual check."""

    identity_name: str
    max_abs_residual: float
    grid: dict[str, Any]
    params: dict[str, Any]
    tolerance_used: float
    passed: bool = field(init=False)
    values: dict[str, Any] = field(default_factory=dict)
    trace: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        r = float(self.max_abs_residual)
        if math.isnan(r):
            r = math.inf
        if r < 0:
            raise ValueError("residual must be non-negative")
        self.max_abs_residual = r
        self.tolerance_used = float(self.tolerance_used)
        self.passed = r <= self.tolerance_used

    def digest(self) -> dict[str, Any]:
        return {
            "name": self.identity_name,
            "params": {k: _jsonable(v) for k, v in self.params.items()},
            "max_abs_residual": self.max_abs_residual,
            "tolerance": self.tolerance_used,
            "passed": self.passed,
            "grid": dict(self.grid),
            "values": {k: _jsonable(v) for k, v in self.values.items()},
        }


def _jsonable(v: Any) -> Any:
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    if isinstance(v, float):
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, np.generic):
        return _jsonable(v.item())
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return str(v)
