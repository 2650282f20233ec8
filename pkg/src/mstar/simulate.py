"""Data-generating processes and the Monte-Carlo harness."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import DimensionError, GenerationError, MstarError, ValidationError
from .star_banded import (
    BandedStarModel,
    band_mask,
    estimate_c_covariances,
    fit_banded_covariances,
    nkp_init,
    select_bandwidths_covariances,
)
from .star_diag import DiagStarModel, FitConfig, band_weights, fit_diag_covariances
from .tensor_core import MatrixTimeSeries, kron_distance, lag_covariances, stationarity_check

log = logging.getLogger(__name__)

MAX_DRAWS = 1000


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def simulation_weights(p: int, q: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Weights of the diagonal-coefficient design: ones on the two nearest off-diagonals
    (plus the main diagonal for ``V0``), and 0.5 on the same band including the diagonal for lag 1."""
    W0 = band_weights(p, 2, 1.0, diagonal=0.0)
    V0 = band_weights(q, 2, 1.0, diagonal=1.0)
    W1 = band_weights(p, 2, 0.5, diagonal=0.5)
    V1 = band_weights(q, 2, 0.5, diagonal=0.5)
    return W0, W1, V0, V1


def gen_model_diag(p: int, q: int, seed=None) -> DiagStarModel:
    """Random stationary diagonal-coefficient model; coefficients iid U[-0.5, 0.5]."""
    if p < 1 or q < 1:
        raise DimensionError("p and q must be positive")
    rng = _rng(seed)
    W0, W1, V0, V1 = simulation_weights(p, q)
    for _ in range(MAX_DRAWS):
        a0, a1 = rng.uniform(-0.5, 0.5, p), rng.uniform(-0.5, 0.5, p)
        b0, b1 = rng.uniform(-0.5, 0.5, q), rng.uniform(-0.5, 0.5, q)
        try:
            return DiagStarModel(W0, W1, V0, V1, a0, a1, b0, b1)
        except MstarError:
            continue
    raise GenerationError(f"no stationary diagonal model in {MAX_DRAWS} draws")


def gen_model_banded(p: int, q: int, kA: int, kB: int, seed=None) -> BandedStarModel:
    """Random stationary banded model; in-band entries iid U(-0.5, 0.5), ``||A_k||_F = 1``."""
    if not (0 <= kA < p) or not (0 <= kB < q):
        raise ValidationError("bandwidths must satisfy 0 <= kA < p, 0 <= kB < q")
    rng = _rng(seed)
    masks = (
        band_mask(p, kA, zero_diagonal=True),
        band_mask(p, kA),
        band_mask(q, kB),
        band_mask(q, kB),
    )
    for _ in range(MAX_DRAWS):
        A0, A1, B0, B1 = (np.where(m, rng.uniform(-0.5, 0.5, m.shape), 0.0) for m in masks)
        try:
            model = BandedStarModel(A0, A1, B0, B1, kA, kB)
        except MstarError:
            continue
        return model.normalized()
    raise GenerationError(f"no stationary banded model in {MAX_DRAWS} draws")


def simulate_series(
    model: DiagStarModel | BandedStarModel,
    n: int,
    burn_in: int = 500,
    seed=None,
    innovation_scale: float = 1.0,
) -> MatrixTimeSeries:
    """Simulate ``n`` observations of the reduced-form recursion from ``X_0 = 0``.

    Innovations are iid ``N(0, innovation_scale**2)``; the first ``burn_in``
    steps are discarded.
    """
    if n < 2:
        raise DimensionError("n must be >= 2")
    if burn_in < 0:
        raise ValidationError("burn_in must be >= 0")
    form = stationarity_check(*model.coefficient_matrices())
    p, q = model.p, model.q
    rng = _rng(seed)
    total = n + burn_in
    shocks = rng.standard_normal((total, p * q)) * innovation_scale
    drive = shocks @ form.innov_transform.T
    psi = form.psi
    x = np.zeros(p * q)
    out = np.empty((n, p * q))
    for t in range(total):
        x = psi @ x + drive[t]
        if t >= burn_in:
            out[t - burn_in] = x
    data = out.reshape(n, q, p).transpose(0, 2, 1)
    return MatrixTimeSeries(data)


def kron_error(est_left, est_right, true_left, true_right) -> float:
    """``||est_right ⊗ est_left - true_right ⊗ true_left||_F``.

    Vectors are read as diagonal matrices, so the diagonal-model error is
    ``kron_error(alpha_hat, beta_hat, alpha, beta)``.
    """
    el, er, tl, tr = (np.asarray(m, dtype=float) for m in (est_left, est_right, true_left, true_right))
    if el.ndim == 1:
        el, tl = np.diag(el), np.diag(tl)
    if er.ndim == 1:
        er, tr = np.diag(er), np.diag(tr)
    if el.shape != tl.shape or er.shape != tr.shape:
        raise DimensionError("estimated and true factors must have matching shapes")
    return kron_distance(er, el, tr, tl)


# -- Monte Carlo --------------------------------------------------------------


@dataclass(frozen=True)
class SimDesign:
    kind: Literal["diag", "banded", "bandwidth", "banded_unknown"] = "diag"
    p: int = 10
    q: int = 10
    n: int = 2000
    replications: int = 50
    kA: int = 2
    kB: int = 2
    K: int = 4
    omega_factor: float = 0.1
    seed: int = 0
    burn_in: int = 500
    tolerance: float = 1e-6
    max_iterations: int = 200

    def __post_init__(self) -> None:
        if self.kind not in ("diag", "banded", "bandwidth", "banded_unknown"):
            raise ValidationError(f"unknown design kind {self.kind!r}")
        if self.replications < 1:
            raise ValidationError("replications must be >= 1")
        if self.burn_in < 0:
            raise ValidationError("burn_in must be >= 0")
        if self.n < 2 or self.p < 1 or self.q < 1:
            raise ValidationError("need n >= 2 and p, q >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MonteCarloReport:
    design: SimDesign
    metrics: dict[str, list[float]] = field(default_factory=dict)
    failures: int = 0
    failure_messages: list[str] = field(default_factory=list)

    def summary(self) -> dict[str, dict[str, float]]:
        out = {}
        for name, values in self.metrics.items():
            arr = np.asarray(values, dtype=float)
            out[name] = {
                "mean": float(arr.mean()) if arr.size else float("nan"),
                "sd": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
                "count": int(arr.size),
            }
        return out

    def mean(self, name: str) -> float:
        return self.summary()[name]["mean"]

    def sd(self, name: str) -> float:
        return self.summary()[name]["sd"]

    def to_dict(self) -> dict:
        return {
            "design": self.design.to_dict(),
            "summary": self.summary(),
            "failures": self.failures,
            "failure_messages": self.failure_messages,
        }

    def csv_rows(self) -> list[dict]:
        d = self.design
        row = {"kind": d.kind, "p": d.p, "q": d.q, "n": d.n, "replications": d.replications}
        for name, stats in self.summary().items():
            row[f"{name}_mean"] = stats["mean"]
            row[f"{name}_sd"] = stats["sd"]
        row["failures"] = self.failures
        return [row]


def replication_seeds(seed: int, replications: int) -> list[np.random.SeedSequence]:
    """Independent per-replication seed sequences (counter-based spawn)."""
    return np.random.SeedSequence(seed).spawn(replications)


def run_replication(design: SimDesign, seq: np.random.SeedSequence) -> dict[str, float]:
    """One generate → simulate → estimate → score cycle."""
    model_seq, data_seq, init_seq = seq.spawn(3)
    cfg = FitConfig(
        tolerance=design.tolerance,
        max_iterations=design.max_iterations,
        seed=int(init_seq.generate_state(1)[0]),
    )
    if design.kind == "diag":
        truth = gen_model_diag(design.p, design.q, np.random.default_rng(model_seq))
    else:
        truth = gen_model_banded(design.p, design.q, design.kA, design.kB, np.random.default_rng(model_seq))
    series = simulate_series(truth, design.n, design.burn_in, np.random.default_rng(data_seq))
    covs = lag_covariances(series)

    if design.kind == "diag":
        fit = fit_diag_covariances(covs, truth.W0, truth.W1, truth.V0, truth.V1, cfg)
        m = fit.model
        return {
            "err0": kron_error(m.alpha0, m.beta0, truth.alpha0, truth.beta0),
            "err1": kron_error(m.alpha1, m.beta1, truth.alpha1, truth.beta1),
            "iterations": float(fit.iterations),
        }

    out: dict[str, float] = {}
    kA, kB = design.kA, design.kB
    if design.kind in ("bandwidth", "banded_unknown"):
        sel = select_bandwidths_covariances(covs, design.n, design.K, design.omega_factor)
        out["kA_correct"] = float(sel.kA_hat == design.kA)
        out["kB_correct"] = float(sel.kB_hat == design.kB)
        out["kA_hat"] = float(sel.kA_hat)
        out["kB_hat"] = float(sel.kB_hat)
        if design.kind == "bandwidth":
            return out
        kA, kB = min(sel.kA_hat, design.p - 1), min(sel.kB_hat, design.q - 1)

    init = nkp_init(*estimate_c_covariances(covs, kA, kB, strict=False), design.p, design.q, kA, kB)
    fit = fit_banded_covariances(covs, kA, kB, cfg, init=init)
    A0, B0, A1, B1 = init
    m = fit.model
    out.update(
        err0=kron_error(m.A0, m.B0, truth.A0, truth.B0),
        err1=kron_error(m.A1, m.B1, truth.A1, truth.B1),
        nkp_err0=kron_error(A0, B0, truth.A0, truth.B0),
        nkp_err1=kron_error(A1, B1, truth.A1, truth.B1),
        iterations=float(fit.iterations),
    )
    return out


def _safe_replication(args) -> tuple[dict[str, float] | None, str | None]:
    design, seq = args
    try:
        return run_replication(design, seq), None
    except MstarError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def monte_carlo(design: SimDesign, workers: int = 1) -> MonteCarloReport:
    """Run all replications of a design and aggregate mean / sd / frequencies.

    Failed replications are excluded and counted. Results do not depend on
    ``workers``.
    """
    jobs = [(design, s) for s in replication_seeds(design.seed, design.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_safe_replication, jobs))
    else:
        results = [_safe_replication(j) for j in jobs]

    report = MonteCarloReport(design=design)
    for res, err in results:
        if res is None:
            report.failures += 1
            report.failure_messages.append(err)
            continue
        for k, v in res.items():
            report.metrics.setdefault(k, []).append(v)
    if report.failures:
        log.warning("%d of %d replications failed", report.failures, design.replications)
    return report


def monte_carlo_grid(base: SimDesign, ns: Sequence[int], workers: int = 1) -> list[MonteCarloReport]:
    """Run ``base`` at several sample sizes (one report per cell)."""
    return [monte_carlo(SimDesign(**{**base.to_dict(), "n": n}), workers) for n in ns]
