"""Containers and shared numerical primitives for matrix time series.

Conventions used throughout the package:

* a series is stored time-major as an ``(n, p, q)`` array;
* ``vec`` stacks columns, so entry ``(i, j)`` of a ``p x q`` matrix sits at
  position ``j * p + i`` of its vectorisation;
* covariance grids are ``(q, q, p, p)`` arrays whose ``[j, k]`` block is the
  ``p x p`` cross covariance between column ``j`` at time ``t`` and column
  ``k`` at time ``t`` (lag 0) or ``t - 1`` (lag 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateInputError,
    DimensionError,
    InvertibilityError,
    NonStationaryError,
)

COND_LIMIT = 1e12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorisation."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.asarray(v).reshape((rows, cols), order="F")


@dataclass(frozen=True)
class MatrixTimeSeries:
    """A length-``n`` sequence of ``p x q`` observation matrices."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 3:
            raise DimensionError(f"series data must be 3-d (n, p, q), got shape {data.shape}")
        n, p, q = data.shape
        if n < 2:
            raise DimensionError(f"series needs n >= 2 observations, got {n}")
        if p < 1 or q < 1:
            raise DimensionError(f"row and column dimensions must be positive, got {(p, q)}")
        if not np.all(np.isfinite(data)):
            raise DimensionError("series contains non-finite entries")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    @property
    def q(self) -> int:
        return self.data.shape[2]

    def vectorized(self) -> np.ndarray:
        """Return the ``(n, p*q)`` matrix whose rows are ``vec(X_t)``."""
        return self.data.transpose(0, 2, 1).reshape(self.n, self.p * self.q)


@dataclass(frozen=True)
class LagCovariances:
    sigma0: np.ndarray  # (q, q, p, p)
    sigma1: np.ndarray  # (q, q, p, p)
    full0: np.ndarray  # (pq, pq)
    full1: np.ndarray  # (pq, pq)

    @property
    def p(self) -> int:
        return self.sigma0.shape[2]

    @property
    def q(self) -> int:
        return self.sigma0.shape[0]

    @classmethod
    def from_full(cls, full0: np.ndarray, full1: np.ndarray, p: int, q: int) -> "LagCovariances":
        """Build the block grids from stacked ``pq x pq`` covariances."""
        full0 = np.asarray(full0, dtype=float)
        full1 = np.asarray(full1, dtype=float)
        if full0.shape != (p * q, p * q) or full1.shape != (p * q, p * q):
            raise DimensionError(f"full covariances must be {(p * q, p * q)}")
        return cls(
            sigma0=_frozen(_blocks(full0, p, q)),
            sigma1=_frozen(_blocks(full1, p, q)),
            full0=_frozen(full0),
            full1=_frozen(full1),
        )


def _blocks(full: np.ndarray, p: int, q: int) -> np.ndarray:
    # full[j*p + a, k*p + b] -> grid[j, k, a, b]
    return full.reshape(q, p, q, p).transpose(0, 2, 1, 3)


@dataclass(frozen=True)
class TransitionForm:
    """Reduced-form VAR(1): ``vec(X_t) = psi vec(X_{t-1}) + innov_transform vec(E_t)``."""

    psi: np.ndarray
    innov_transform: np.ndarray
    innov_cov: np.ndarray

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.psi)))) if self.psi.size else 0.0


def lag_covariances(series: MatrixTimeSeries) -> LagCovariances:
    """Sample lag-0 and lag-1 covariances, both with divisor ``n``.

    The lag-0 sum runs over all ``n`` observations and the lag-1 sum over
    ``t = 2..n``.
    """
    if series.n < 2:
        raise DimensionError("lag covariances need n >= 2")
    z = series.vectorized()
    n = series.n
    full0 = z.T @ z / n
    full0 = 0.5 * (full0 + full0.T)
    full1 = z[1:].T @ z[:-1] / n
    return LagCovariances.from_full(full0, full1, series.p, series.q)


def kron(b: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Kronecker product ``b ⊗ a``."""
    return np.kron(np.asarray(b, dtype=float), np.asarray(a, dtype=float))


def kron_inner(b1: np.ndarray, a1: np.ndarray, b2: np.ndarray, a2: np.ndarray) -> float:
    """Frobenius inner product ``<b1⊗a1, b2⊗a2> = <b1,b2><a1,a2>`` without forming either product."""
    return float(np.vdot(b1, b2) * np.vdot(a1, a2))


def kron_distance(b1, a1, b2, a2) -> float:
    """``||b1⊗a1 - b2⊗a2||_F`` computed through inner products."""
    sq = kron_inner(b1, a1, b1, a1) + kron_inner(b2, a2, b2, a2) - 2.0 * kron_inner(b1, a1, b2, a2)
    scale = kron_inner(b1, a1, b1, a1) + kron_inner(b2, a2, b2, a2)
    # cancellation below ~1e-13 relative is noise; fall back to the dense product there
    if sq <= 1e-10 * scale and np.size(b1) * np.size(a1) <= 1_000_000:
        return float(np.linalg.norm(kron(b1, a1) - kron(b2, a2)))
    return float(np.sqrt(max(sq, 0.0)))


def rearrangement_index(p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices into a ``pq x pq`` matrix for each entry of its ``p² x q²`` rearrangement.

    Entry ``(r*p + v, s*p + w)`` of ``B ⊗ A`` equals ``B[r, s] * A[v, w]`` and is
    sent to position ``(w*p + v, s*q + r)``, i.e. to ``vec(A)[w*p+v] * vec(B)[s*q+r]``.
    """
    w, v, s, r = np.meshgrid(np.arange(p), np.arange(p), np.arange(q), np.arange(q), indexing="ij")
    rows = (r * p + v).reshape(p * p, q * q)
    cols = (s * p + w).reshape(p * p, q * q)
    return rows, cols


def rearrange(c: np.ndarray, p: int, q: int) -> np.ndarray:
    """Map ``B ⊗ A`` to ``vec(A) vec(B)'`` (a pure entry permutation)."""
    c = np.asarray(c, dtype=float)
    if c.shape != (p * q, p * q):
        raise DimensionError(f"expected a {(p * q, p * q)} matrix, got {c.shape}")
    # c[r*p+v, s*p+w] viewed as [r, v, s, w] -> [w, v, s, r]
    return c.reshape(q, p, q, p).transpose(3, 1, 2, 0).reshape(p * p, q * q)


def unrearrange(r: np.ndarray, p: int, q: int) -> np.ndarray:
    """Inverse of :func:`rearrange`."""
    r = np.asarray(r, dtype=float)
    if r.shape != (p * p, q * q):
        raise DimensionError(f"expected a {(p * p, q * q)} matrix, got {r.shape}")
    return r.reshape(p, p, q, q).transpose(3, 1, 2, 0).reshape(p * q, p * q)


def _fix_sign(unit: np.ndarray, other: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flat = unit.ravel()
    if flat[np.argmax(np.abs(flat))] < 0:
        return -unit, -other
    return unit, other


def nearest_kronecker(
    c: np.ndarray,
    p: int,
    q: int,
    norm_side: Literal["A_unit_frobenius", "B_unit_frobenius"] = "A_unit_frobenius",
) -> tuple[np.ndarray, np.ndarray]:
    """Best Frobenius approximation ``c ≈ B ⊗ A`` with ``A`` p×p and ``B`` q×q.

    Solved by the leading singular pair of the rearranged matrix. The factor
    named by ``norm_side`` has unit Frobenius norm and its largest-magnitude
    entry is positive.
    """
    if norm_side not in ("A_unit_frobenius", "B_unit_frobenius"):
        raise ValueError(f"unknown norm_side {norm_side!r}")
    r = rearrange(c, p, q)
    if not np.any(r):
        raise DegenerateInputError("cannot approximate an all-zero matrix by a Kronecker product")
    u, d, vt = np.linalg.svd(r, full_matrices=False)
    a_vec, b_vec = u[:, 0], vt[0]
    if norm_side == "A_unit_frobenius":
        a, b = unvec(a_vec, p, p), d[0] * unvec(b_vec, q, q)
        a, b = _fix_sign(a, b)
    else:
        a, b = d[0] * unvec(a_vec, p, p), unvec(b_vec, q, q)
        b, a = _fix_sign(b, a)
    return a, b


def population_covariances(
    form: TransitionForm, tol: float = 1e-12, max_iter: int = 100_000
) -> tuple[np.ndarray, np.ndarray]:
    """Stationary lag-0 and lag-1 covariances of ``vec(X_t)``.

    Iterates ``S <- psi S psi' + G Sigma_E G'`` to a relative tolerance.
    """
    psi = np.asarray(form.psi, dtype=float)
    if form.spectral_radius >= 1.0:
        raise NonStationaryError(f"spectral radius {form.spectral_radius:.6g} >= 1")
    g = np.asarray(form.innov_transform, dtype=float)
    q_mat = g @ np.asarray(form.innov_cov, dtype=float) @ g.T
    sigma = q_mat.copy()
    for _ in range(max_iter):
        new = psi @ sigma @ psi.T + q_mat
        new = 0.5 * (new + new.T)
        diff = np.linalg.norm(new - sigma)
        sigma = new
        if diff <= tol * max(np.linalg.norm(sigma), 1e-300):
            break
    else:
        raise ConvergenceError(f"Lyapunov iteration did not converge in {max_iter} steps")
    return sigma, psi @ sigma


def stationarity_check(c0: np.ndarray, c1: np.ndarray, innov_cov: np.ndarray | None = None) -> TransitionForm:
    """Assemble the reduced form and verify invertibility and stability."""
    c0 = np.asarray(c0, dtype=float)
    c1 = np.asarray(c1, dtype=float)
    if c0.shape != c1.shape or c0.ndim != 2 or c0.shape[0] != c0.shape[1]:
        raise DimensionError(f"C0 and C1 must be equal square matrices, got {c0.shape} and {c1.shape}")
    m = c0.shape[0]
    lhs = np.eye(m) - c0
    cond = np.linalg.cond(lhs)
    if not np.isfinite(cond) or cond >= COND_LIMIT:
        raise InvertibilityError(f"I - C0 is singular (condition number {cond:.3g})")
    g = np.linalg.inv(lhs)
    psi = g @ c1
    form = TransitionForm(
        psi=_frozen(psi),
        innov_transform=_frozen(g),
        innov_cov=_frozen(np.eye(m) if innov_cov is None else innov_cov),
    )
    radius = form.spectral_radius
    if radius >= 1.0:
        raise NonStationaryError(f"spectral radius of the transition matrix is {radius:.6g} >= 1")
    return form


def population_lag_covariances(form: TransitionForm, p: int, q: int) -> LagCovariances:
    """Population analogue of :func:`lag_covariances`."""
    s0, s1 = population_covariances(form)
    return LagCovariances.from_full(s0, s1, p, q)


def one_step_forecast(c0: np.ndarray, c1: np.ndarray, x_last: np.ndarray) -> np.ndarray:
    """``(I - C0)^{-1} C1 vec(x_last)``, reshaped to the shape of ``x_last``."""
    x_last = np.asarray(x_last, dtype=float)
    p, q = x_last.shape
    lhs = np.eye(p * q) - c0
    cond = np.linalg.cond(lhs)
    if not np.isfinite(cond) or cond >= COND_LIMIT:
        raise InvertibilityError(f"I - C0 is singular (condition number {cond:.3g})")
    return unvec(np.linalg.solve(lhs, c1 @ vec(x_last)), p, q)
