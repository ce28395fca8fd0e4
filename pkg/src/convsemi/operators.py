"""Finite-dimensional generators ``A`` and their classical semigroups ``e^{tA}``."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg


def _as_state(x, dim: int) -> np.ndarray:
    v = np.asarray(x, dtype=complex)
    if v.shape[0] != dim:
        raise ValueError(f"dimension mismatch: state of length {v.shape[0]} for a generator of dimension {dim}")
    return v


class Generator:
    """A linear operator on ``C^dim`` together with its exponential."""

    dim: int

    @property
    def is_diagonal(self) -> bool:
        return False

    def matrix(self) -> np.ndarray:
        raise NotImplementedError

    def eigenvalues(self) -> np.ndarray:
        raise NotImplementedError

    def apply(self, x) -> np.ndarray:
        return self.matrix() @ _as_state(x, self.dim)

    def expm(self, t) -> np.ndarray:
        """``e^{tA}`` for scalar ``t`` (matrix) or an array of ``t`` (stack)."""
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class DenseMatrix(Generator):
    """A general complex ``d x d`` matrix."""

    a: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.a, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"generator must be a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("generator entries must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def matrix(self) -> np.ndarray:
        return self.a

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.a)

    def expm(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return linalg.expm(float(t) * self.a)
        return linalg.expm(t[:, None, None] * self.a[None])

    def describe(self) -> str:
        return f"dense({self.dim})"

    def __eq__(self, other) -> bool:
        return isinstance(other, DenseMatrix) and np.array_equal(self.a, other.a)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DiagonalSequence(Generator):
    """``A = diag(a_1, ..., a_M)``; semigroup and products act componentwise."""

    a: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.a, dtype=complex).reshape(-1)
        if a.size == 0:
            raise ValueError("need at least one mode")
        if not np.all(np.isfinite(a)):
            raise ValueError("eigenvalues must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return True

    def matrix(self) -> np.ndarray:
        return np.diag(self.a)

    def eigenvalues(self) -> np.ndarray:
        return self.a

    def apply(self, x) -> np.ndarray:
        return self.a * _as_state(x, self.dim)

    def expm(self, t) -> np.ndarray:
        """Diagonal of ``e^{tA}``: shape ``(M,)`` or ``(len(t), M)``."""
        t = np.asarray(t, dtype=float)
        return np.exp(np.multiply.outer(t, self.a))

    def describe(self) -> str:
        return f"diag({self.dim})"

    def __eq__(self, other) -> bool:
        return type(other) is type(self) and np.array_equal(self.a, other.a)

    __hash__ = None


class DirichletLaplacianSpectral(DiagonalSequence):
    """Spectral truncation with eigenvalues ``sign * m**2``, ``m = 1..M``.

    ``sign = +1`` is ``-Laplacian`` on ``L^2[0, pi]`` with Dirichlet conditions
    (the ill-posed backward direction), ``sign = -1`` the heat generator.
    """

    def __init__(self, M: int, sign: int = 1) -> None:
        if M < 1:
            raise ValueError("need at least one mode")
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        object.__setattr__(self, "M", int(M))
        object.__setattr__(self, "sign", int(sign))
        super().__init__(sign * np.arange(1, M + 1, dtype=float) ** 2)

    def describe(self) -> str:
        return f"dirichlet(M={self.M}, sign={self.sign:+d})"


def lsquare_eigenvalue(m: int, T: float) -> complex:
    """``a_m = m/T + i sqrt((e^m/m)^2 - (m/T)^2)``."""
    lhs = (math.exp(m) / m) ** 2
    rhs = (m / T) ** 2
    if lhs < rhs:
        raise ValueError(f"(e^m/m)^2 < (m/T)^2 for m={m}, T={T}")
    return complex(m / T, math.sqrt(lhs - rhs))


def build_lsquare_sequence(T: float, M: int) -> DiagonalSequence:
    """Diagonal generator on truncated ``l^2`` whose ``alpha``-times integrated
    semigroup lives only on ``[0, alpha T)`` in the untruncated limit."""
    if not T > 0:
        raise ValueError("T must be positive")
    if M < 1:
        raise ValueError("need at least one mode")
    return DiagonalSequence(np.array([lsquare_eigenvalue(m, T) for m in range(1, M + 1)]))


def semigroup_apply(A: Generator, t: float, x) -> np.ndarray:
    """``e^{tA} x``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    x = _as_state(x, A.dim)
    e = A.expm(t)
    return e * x if A.is_diagonal else e @ x


def generator_apply(A: Generator, x) -> np.ndarray:
    """``A x``."""
    return A.apply(x)


# -- text descriptors ------------------------------------------------------


def parse_matrix(text: str) -> np.ndarray:
    """Row-major JSON matrix; an entry is a number or a ``[re, im]`` pair."""
    try:
        rows = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"matrix is not valid JSON: {exc}") from None

    def entry(v):
        if isinstance(v, list):
            if len(v) != 2:
                raise ValueError(f"complex entry must be [re, im], got {v}")
            return complex(float(v[0]), float(v[1]))
        return complex(float(v))

    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ValueError("matrix must be a non-empty list of rows")
    return np.array([[entry(v) for v in r] for r in rows], dtype=complex)


def generator_from_spec(spec: dict) -> Generator:
    """Build a generator from config keys.

    ``type = dense`` with ``matrix``; ``type = diag`` with ``values``;
    ``type = lsquare`` with ``T`` and ``M``; ``type = dirichlet`` with ``M``
    and ``sign``.  Keys are case-insensitive.
    """
    spec = {k.lower(): v for k, v in spec.items()}
    kind = str(spec.get("type", "dense")).strip().lower()
    if kind == "dense":
        if "matrix" not in spec:
            raise ValueError("dense generator needs key 'matrix'")
        return DenseMatrix(parse_matrix(spec["matrix"]))
    if kind == "diag":
        if "values" not in spec:
            raise ValueError("diag generator needs key 'values'")
        vals = parse_matrix("[[" + spec["values"] + "]]")[0]
        return DiagonalSequence(vals)
    if kind == "lsquare":
        return build_lsquare_sequence(float(spec.get("t", 1.0)), int(spec.get("m", 8)))
    if kind == "dirichlet":
        return DirichletLaplacianSpectral(int(spec.get("m", 8)), int(spec.get("sign", 1)))
    raise ValueError(f"unknown generator type {kind!r}")
