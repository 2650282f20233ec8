"""Intraday volume forecasting and a percentage-of-volume execution backtest.

A panel holds ``n`` trading days, ``p`` intraday buckets and ``q`` assets;
each day is one ``p x q`` observation of the matrix models.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import pandas as pd

from .errors import (
    DimensionError,
    FormatError,
    IngestionError,
    InsufficientHistoryError,
    MstarError,
    ValidationError,
)
from .star_banded import fit_banded_covariances, predict_banded, select_bandwidths_covariances
from .star_diag import FitConfig, band_weights, fit_diag_covariances, predict_diag
from .tensor_core import MatrixTimeSeries, lag_covariances

log = logging.getLogger(__name__)

SESSIONS: dict[str, tuple[str, str]] = {
    "full": ("09:00", "15:00"),
    "morning": ("09:00", "11:30"),
    "afternoon": ("12:30", "15:00"),
    "P1": ("09:00", "10:00"),
    "P2": ("10:00", "11:00"),
    "P3": ("11:00", "13:00"),
    "P4": ("13:00", "14:00"),
    "P5": ("14:00", "15:00"),
}

ALPHA_TARGETS = (0.10, 0.20, 0.40, 0.60)
METHODS = ("sma", "adj_sma", "diag_star", "banded_star")


def clock_minutes(clock: str) -> int:
    """Minutes after midnight of an ``HH:MM`` or ``HH:MM:SS`` string."""
    try:
        parts = [int(x) for x in str(clock).strip().split(":")]
    except ValueError:
        raise FormatError(f"bad clock time {clock!r}") from None
    if len(parts) not in (2, 3) or not (0 <= parts[0] < 24 and 0 <= parts[1] < 60):
        raise FormatError(f"bad clock time {clock!r}")
    return parts[0] * 60 + parts[1]


def _clock(minutes: int) -> str:
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


def trading_buckets(minutes: int = 5, sessions: Sequence[tuple[str, str]] = (("09:00", "11:30"), ("12:30", "15:00"))):
    """Bucket start times covering the given trading sessions."""
    if minutes <= 0:
        raise ValidationError("bucket length must be positive")
    out = []
    for open_, close in sessions:
        start, stop = clock_minutes(open_), clock_minutes(close)
        out.extend(_clock(m) for m in range(start, stop, minutes))
    return tuple(out)


# -- panel ---------------------------------------------------------------------


@dataclass(frozen=True)
class VolumePanel:
    days: tuple[str, ...]
    buckets: tuple[str, ...]
    assets: tuple[str, ...]
    volume: np.ndarray
    price: np.ndarray | None = None
    bucket_minutes: int | None = None

    def __post_init__(self) -> None:
        for name in ("days", "buckets", "assets"):
            object.__setattr__(self, name, tuple(str(x) for x in getattr(self, name)))
        vol = np.array(self.volume, dtype=float)
        shape = (len(self.days), len(self.buckets), len(self.assets))
        if vol.shape != shape:
            raise DimensionError(f"volume must have shape {shape}, got {vol.shape}")
        if not np.all(np.isfinite(vol)) or np.any(vol < 0):
            raise ValidationError("volumes must be finite and nonnegative")
        vol.setflags(write=False)
        object.__setattr__(self, "volume", vol)
        if self.price is not None:
            price = np.array(self.price, dtype=float)
            if price.shape != shape:
                raise DimensionError(f"price must have shape {shape}, got {price.shape}")
            if not np.all(np.isfinite(price)) or np.any(price <= 0):
                raise ValidationError("prices must be finite and positive")
            price.setflags(write=False)
            object.__setattr__(self, "price", price)
        starts = np.array([clock_minutes(b) for b in self.buckets])
        gaps = np.diff(starts)
        if np.any(gaps <= 0):
            raise FormatError("bucket start times must be strictly increasing")
        width = self.bucket_minutes
        if width is None:
            width = int(gaps.min()) if gaps.size else 5
            object.__setattr__(self, "bucket_minutes", width)
        if width <= 0 or (gaps.size and gaps.min() < width):
            raise FormatError("buckets overlap")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.volume.shape

    def bucket_starts(self) -> np.ndarray:
        return np.array([clock_minutes(b) for b in self.buckets])

    def session_mask(self, session: tuple[str, str]) -> np.ndarray:
        """Buckets whose start lies in ``[open, close)``."""
        start = self.bucket_starts()
        return (start >= clock_minutes(session[0])) & (start < clock_minutes(session[1]))

    def to_frame(self) -> pd.DataFrame:
        d, b, a = np.meshgrid(np.arange(len(self.days)), np.arange(len(self.buckets)), np.arange(len(self.assets)), indexing="ij")
        frame = pd.DataFrame(
            {
                "date": np.asarray(self.days, dtype=object)[d.ravel()],
                "bucket_start": np.asarray(self.buckets, dtype=object)[b.ravel()],
                "asset": np.asarray(self.assets, dtype=object)[a.ravel()],
                "volume": self.volume.ravel(),
            }
        )
        if self.price is not None:
            frame["price"] = self.price.ravel()
        return frame


def load_volume_csv(path) -> VolumePanel:
    """Read a dense long-format ``date,bucket_start,asset,volume[,price]`` file.

    Assets keep their order of first appearance; buckets are sorted by clock
    time. Dates must be non-decreasing down the file.
    """
    try:
        frame = pd.read_csv(path, dtype={"date": str, "bucket_start": str, "asset": str}, float_precision="round_trip")
    except FileNotFoundError:
        raise IngestionError(f"no such file: {path}") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    frame.columns = [str(c).strip() for c in frame.columns]
    need = ["date", "bucket_start", "asset", "volume"]
    if any(c not in frame.columns for c in need):
        raise FormatError(f"{path}: header must contain {need}")
    if frame.empty:
        raise IngestionError(f"{path}: no rows")
    keys = ["date", "bucket_start", "asset"]
    if frame.duplicated(keys).any():
        first = frame[frame.duplicated(keys, keep=False)].iloc[0]
        raise FormatError(f"{path}: duplicate row for {tuple(first[keys])}")
    dates = frame["date"].to_numpy()
    if np.any(dates[1:] < dates[:-1]):
        raise FormatError(f"{path}: dates are not in non-decreasing order")

    days = list(dict.fromkeys(dates))
    buckets = sorted(dict.fromkeys(frame["bucket_start"]), key=clock_minutes)
    assets = list(dict.fromkeys(frame["asset"]))
    full = pd.MultiIndex.from_product([days, buckets, assets], names=keys)
    indexed = frame.set_index(keys)
    gaps = full.difference(indexed.index)
    if len(gaps):
        shown = ", ".join(str(g) for g in list(gaps)[:10])
        raise IngestionError(f"{path}: {len(gaps)} missing (date, bucket, asset) cells: {shown}")
    indexed = indexed.reindex(full)
    shape = (len(days), len(buckets), len(assets))
    try:
        volume = indexed["volume"].to_numpy(dtype=float).reshape(shape)
        price = indexed["price"].to_numpy(dtype=float).reshape(shape) if "price" in indexed else None
    except (ValueError, TypeError) as exc:
        raise FormatError(f"{path}: non-numeric values ({exc})") from None
    return VolumePanel(tuple(days), tuple(buckets), tuple(assets), volume, price)


def write_volume_csv(panel: VolumePanel, path) -> None:
    panel.to_frame().to_csv(path, index=False, float_format="%.17g")


# -- transforms ----------------------------------------------------------------


@dataclass(frozen=True)
class PreprocessState:
    log_means: np.ndarray
    epsilon: float = 1.0


def preprocess(panel: VolumePanel, window: slice | Sequence[int] | None = None, epsilon: float = 1.0):
    """Log-demean the volumes of the days in ``window``.

    Zero volumes are floored at ``epsilon`` before the log. Returns the
    transformed series and the state needed by :func:`back_transform`.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    vol = panel.volume if window is None else panel.volume[window]
    if vol.ndim != 3 or vol.shape[0] < 2:
        raise InsufficientHistoryError("preprocessing needs at least two days")
    logs = np.log(np.maximum(vol, epsilon))
    # shifting by the first day first keeps a constant cell exactly at zero
    means = logs[0] + (logs - logs[0]).mean(axis=0)
    return MatrixTimeSeries(logs - means), PreprocessState(log_means=means, epsilon=epsilon)


def back_transform(x: np.ndarray, state: PreprocessState) -> np.ndarray:
    return np.exp(np.asarray(x, dtype=float) + state.log_means)


# -- baselines -----------------------------------------------------------------


def _check_day(panel: VolumePanel, day: int, L: int) -> None:
    if L < 1:
        raise ValidationError("L must be >= 1")
    if not (0 <= day <= panel.shape[0]):
        raise ValidationError(f"day index {day} out of range")
    if day < L:
        raise InsufficientHistoryError(f"day {day} has only {day} days of history, need L={L}")


def sma_forecast(panel: VolumePanel, day: int, bucket: int | None = None, L: int = 22) -> np.ndarray:
    """Mean of the same bucket over the ``L`` days before ``day`` (0-based).

    Returns a ``(q,)`` vector for one bucket or the ``(p, q)`` day forecast.
    ``day`` may equal the number of days, giving the next-day forecast.
    """
    _check_day(panel, day, L)
    out = panel.volume[day - L : day].mean(axis=0)
    return out if bucket is None else out[bucket]


def adj_sma_forecast(
    panel: VolumePanel,
    day: int,
    bucket: int,
    L: int = 22,
    realized_prefix: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """SMA rescaled by the realized-to-forecast volume ratio of the earlier buckets of ``day``.

    Returns ``(forecast, fallback)``; ``fallback`` marks assets where the
    plain SMA was used because the prefix is empty or its forecast is zero.
    """
    sma = sma_forecast(panel, day, None, L)
    if not (0 <= bucket < panel.shape[1]):
        raise ValidationError(f"bucket index {bucket} out of range")
    if realized_prefix is None:
        if day >= panel.shape[0]:
            raise InsufficientHistoryError("realized prefix needed for a day beyond the panel")
        realized_prefix = panel.volume[day, :bucket].sum(axis=0)
    realized_prefix = np.broadcast_to(np.asarray(realized_prefix, dtype=float), sma[bucket].shape)
    predicted = sma[:bucket].sum(axis=0)
    fallback = predicted <= 0 if bucket > 0 else np.ones_like(predicted, dtype=bool)
    ratio = np.divide(realized_prefix, predicted, out=np.ones_like(predicted), where=~fallback)
    return ratio * sma[bucket], fallback


def adj_sma_day(panel: VolumePanel, day: int, L: int = 22) -> tuple[np.ndarray, np.ndarray]:
    """Adjusted-SMA forecasts for every bucket of an observed day."""
    sma = sma_forecast(panel, day, None, L)
    realized = np.cumsum(panel.volume[day], axis=0) - panel.volume[day]
    predicted = np.cumsum(sma, axis=0) - sma
    fallback = predicted <= 0
    fallback[0] = True
    ratio = np.divide(realized, predicted, out=np.ones_like(predicted), where=~fallback)
    return ratio * sma, fallback


# -- rolling forecasts -----------------------------------------------------------


def application_weights(p: int, q: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Unit weights on the two nearest off-diagonals; the lag-1 and column
    weights also carry the main diagonal."""
    return (
        band_weights(p, 2, 1.0, diagonal=0.0),
        band_weights(p, 2, 1.0, diagonal=1.0),
        band_weights(q, 2, 1.0, diagonal=1.0),
        band_weights(q, 2, 1.0, diagonal=1.0),
    )


@dataclass
class ForecastResult:
    method: str
    days: np.ndarray  # evaluated day indices
    forecast: np.ndarray  # (len(days), p, q)
    fallback: np.ndarray  # per day: model fit failed, SMA used
    messages: list[str] = field(default_factory=list)
    bandwidths: list[tuple[int, int]] = field(default_factory=list)

    def to_frame(self, panel: VolumePanel) -> pd.DataFrame:
        n, p, q = self.forecast.shape
        d, b, a = np.meshgrid(np.arange(n), np.arange(p), np.arange(q), indexing="ij")
        return pd.DataFrame(
            {
                "date": np.asarray(panel.days, dtype=object)[self.days[d.ravel()]],
                "bucket_start": np.asarray(panel.buckets, dtype=object)[b.ravel()],
                "asset": np.asarray(panel.assets, dtype=object)[a.ravel()],
                "forecast": self.forecast.ravel(),
            }
        )


def default_eval_days(panel: VolumePanel, method: str, fit_window: int = 60, L: int = 22) -> np.ndarray:
    first = L if method in ("sma", "adj_sma") else max(L, fit_window)
    if first >= panel.shape[0]:
        raise InsufficientHistoryError(f"panel has {panel.shape[0]} days; need more than {first}")
    return np.arange(first, panel.shape[0])


def _model_forecast(panel, day, method, fit_window, config, K, omega_factor, epsilon):
    series, state = preprocess(panel, slice(day - fit_window, day), epsilon)
    covs = lag_covariances(series)
    p, q = series.p, series.q
    if method == "diag_star":
        fit = fit_diag_covariances(covs, *application_weights(p, q), config)
        xhat = predict_diag(fit.model, series.data[-1])
        bands = None
    else:
        k = min(K, p - 1, q - 1)
        if k < 1:
            raise DimensionError("banded model needs p, q >= 2")
        sel = select_bandwidths_covariances(covs, series.n, k, omega_factor)
        fit = fit_banded_covariances(covs, sel.kA_hat, sel.kB_hat, config)
        xhat = predict_banded(fit.model, series.data[-1])
        bands = (sel.kA_hat, sel.kB_hat)
    out = back_transform(xhat, state)
    if not np.all(np.isfinite(out)):
        raise ValidationError("non-finite model forecast")
    return out, bands


def rolling_forecast(
    panel: VolumePanel,
    method: Literal["sma", "adj_sma", "diag_star", "banded_star"],
    eval_days: Sequence[int] | None = None,
    fit_window: int = 60,
    L: int = 22,
    config: FitConfig = FitConfig(),
    K: int = 4,
    omega_factor: float = 0.1,
    epsilon: float = 1.0,
) -> ForecastResult:
    """Day-ahead forecasts of every bucket for each evaluation day.

    Model methods refit on the ``fit_window`` days before each evaluation day
    and predict from the last of them. If a fit fails the day falls back to
    the SMA forecast and is flagged.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; choose from {METHODS}")
    if fit_window < 2:
        raise ValidationError("fit_window must be >= 2")
    days = default_eval_days(panel, method, fit_window, L) if eval_days is None else np.asarray(eval_days, dtype=int)
    n, p, q = panel.shape
    out = np.empty((len(days), p, q))
    fallback = np.zeros(len(days), dtype=bool)
    result = ForecastResult(method, days, out, fallback)
    for k, day in enumerate(days):
        if not (0 <= day < n):
            raise ValidationError(f"evaluation day {day} outside the panel")
        if method == "sma":
            out[k] = sma_forecast(panel, day, None, L)
        elif method == "adj_sma":
            out[k] = adj_sma_day(panel, day, L)[0]
        else:
            if day < fit_window:
                raise InsufficientHistoryError(f"day {day} has fewer than fit_window={fit_window} prior days")
            try:
                out[k], bands = _model_forecast(panel, day, method, fit_window, config, K, omega_factor, epsilon)
                if bands is not None:
                    result.bandwidths.append(bands)
            except MstarError as exc:
                out[k] = sma_forecast(panel, day, None, L)
                fallback[k] = True
                result.messages.append(f"{panel.days[day]}: {type(exc).__name__}: {exc}")
                log.info("day %s fell back to SMA: %s", panel.days[day], exc)
    return result


# -- accuracy reports ----------------------------------------------------------


def _sessions(panel: VolumePanel, sessions):
    for name, window in (SESSIONS if sessions is None else sessions).items():
        mask = panel.session_mask(window)
        if mask.any():
            yield name, mask


def _actual(panel: VolumePanel, days, forecast) -> tuple[np.ndarray, np.ndarray]:
    days = np.asarray(days, dtype=int)
    forecast = np.asarray(forecast, dtype=float)
    if forecast.shape != (len(days),) + panel.shape[1:]:
        raise DimensionError(f"forecast must have shape {(len(days),) + panel.shape[1:]}")
    return panel.volume[days], forecast


def relative_error_report(forecast, panel: VolumePanel, days, sessions=None) -> list[dict]:
    """Mean absolute relative error per asset and session.

    Per day, the error is averaged over the session's buckets; days are then
    averaged. Cells with zero actual volume are skipped and counted.
    """
    actual, forecast = _actual(panel, days, forecast)
    rows = []
    for name, mask in _sessions(panel, sessions):
        a, f = actual[:, mask], forecast[:, mask]
        valid = a > 0
        rel = np.divide(np.abs(f - a), a, out=np.zeros_like(a), where=valid)
        counts = valid.sum(axis=1)
        for j, asset in enumerate(panel.assets):
            used = counts[:, j] > 0
            per_day = rel[used, :, j].sum(axis=1) / counts[used, j]
            rows.append(
                {
                    "asset": asset,
                    "session": name,
                    "error": float(per_day.mean()) if per_day.size else float("nan"),
                    "days": int(used.sum()),
                    "excluded_cells": int((~valid[:, :, j]).sum()),
                }
            )
    return rows


def vwap_error(forecast, panel: VolumePanel, days, sessions=None) -> list[dict]:
    """Distance in basis points between the forecast-weighted and the realized VWAP."""
    if panel.price is None:
        raise ValidationError("panel has no price column")
    actual, forecast = _actual(panel, days, forecast)
    price = panel.price[np.asarray(days, dtype=int)]
    rows = []
    for name, mask in _sessions(panel, sessions):
        a, f, px = actual[:, mask], forecast[:, mask], price[:, mask]
        sa, sf = a.sum(axis=1), f.sum(axis=1)
        ok = (sa > 0) & (sf > 0)
        vwap = np.divide((px * a).sum(axis=1), sa, out=np.ones_like(sa), where=ok)
        vwap_hat = np.divide((px * f).sum(axis=1), sf, out=np.ones_like(sf), where=ok)
        bps = np.abs(vwap_hat - vwap) / vwap * 1e4
        for j, asset in enumerate(panel.assets):
            used = ok[:, j]
            rows.append(
                {
                    "asset": asset,
                    "session": name,
                    "bps": float(bps[used, j].mean()) if used.any() else float("nan"),
                    "days": int(used.sum()),
                }
            )
    return rows


# -- POV backtest ----------------------------------------------------------------


@dataclass(frozen=True)
class PovEpisode:
    day: str
    asset: str
    order_size: float
    target_rate: float
    start_bucket: int
    fills: tuple[float, ...]
    volumes: tuple[float, ...]
    completed: bool
    buckets_used: float  # fractional: the last bucket counts by its filled share
    ideal_buckets: float | None
    impact: float  # percent
    timing: float | None  # percent; None when either run is incomplete
    over_prediction: bool


def _execute(vhat: np.ndarray, v: np.ndarray, alpha: float, Z: float):
    """Run the participation schedule; the last order is cut so fills total ``Z``.

    Only the filled share of the final bucket counts towards elapsed time and
    towards the market volume traded against.
    """
    fills = []
    filled = traded_v = traded_vhat = elapsed = 0.0
    for vh, vv in zip(vhat, v):
        order = alpha * vh
        if order > 0 and filled + order >= Z:
            share = (Z - filled) / order
            fills.append(Z - filled)
            return fills, elapsed + share, traded_v + share * vv, traded_vhat + share * vh, True
        fills.append(order)
        filled += order
        traded_v += vv
        traded_vhat += vh
        elapsed += 1.0
    return fills, elapsed, traded_v, traded_vhat, False


@dataclass
class PovResult:
    episodes: list[PovEpisode]
    skipped: int = 0

    def summary(self) -> list[dict]:
        """Mean impact and timing per asset, target rate and prediction class."""
        rows = []
        keys = sorted({(e.asset, e.target_rate) for e in self.episodes}, key=lambda k: (k[0], k[1]))
        for asset, alpha in keys:
            group = [e for e in self.episodes if e.asset == asset and e.target_rate == alpha]
            for label, members in (
                ("over", [e for e in group if e.over_prediction]),
                ("under", [e for e in group if not e.over_prediction]),
                ("all", group),
            ):
                timed = [e.timing for e in members if e.timing is not None]
                rows.append(
                    {
                        "asset": asset,
                        "alpha_target": alpha,
                        "class": label,
                        "episodes": len(members),
                        "impact_mean": float(np.mean([e.impact for e in members])) if members else float("nan"),
                        "timing_mean": float(np.mean(timed)) if timed else float("nan"),
                        "incomplete": sum(not e.completed for e in members),
                    }
                )
        return rows


def pov_backtest(
    forecast,
    panel: VolumePanel,
    days,
    alpha_targets: Sequence[float] = ALPHA_TARGETS,
    order_frac: float = 0.05,
    start: str = "09:15",
) -> PovResult:
    """Replay a POV execution for every (day, asset, target rate).

    The order is ``order_frac`` of the day's realized volume. Starting at the
    first bucket at or after ``start``, each bucket submits ``alpha`` times the
    forecast volume. Impact is the relative participation error; timing
    compares time to completion with the same schedule run on realized
    volumes.
    """
    if not (0 < order_frac <= 1):
        raise ValidationError("order_frac must lie in (0, 1]")
    if any(not (0 < a <= 1) for a in alpha_targets):
        raise ValidationError("alpha targets must lie in (0, 1]")
    actual, forecast = _actual(panel, days, forecast)
    if np.any(forecast < 0) or not np.all(np.isfinite(forecast)):
        raise ValidationError("forecasts must be finite and nonnegative")
    after = np.flatnonzero(panel.bucket_starts() >= clock_minutes(start))
    if after.size == 0:
        raise ValidationError(f"no bucket starts at or after {start}")
    s0 = int(after[0])
    result = PovResult(episodes=[])
    for k, day in enumerate(np.asarray(days, dtype=int)):
        for j, asset in enumerate(panel.assets):
            v = actual[k, s0:, j]
            vhat = forecast[k, s0:, j]
            Z = order_frac * actual[k, :, j].sum()
            if Z <= 0:
                result.skipped += 1
                continue
            for alpha in alpha_targets:
                fills, t_act, traded_v, traded_vhat, done = _execute(vhat, v, alpha, Z)
                _, t_ideal, _, _, ideal_done = _execute(v, v, alpha, Z)
                rate = sum(fills) / traded_v if traded_v > 0 else np.inf
                timing = (t_act - t_ideal) / t_ideal * 100.0 if done and ideal_done and t_ideal > 0 else None
                result.episodes.append(
                    PovEpisode(
                        day=panel.days[day],
                        asset=asset,
                        order_size=float(Z),
                        target_rate=float(alpha),
                        start_bucket=s0,
                        fills=tuple(float(x) for x in fills),
                        volumes=tuple(float(x) for x in v[: len(fills)]),
                        completed=done,
                        buckets_used=float(t_act),
                        ideal_buckets=float(t_ideal) if ideal_done else None,
                        impact=float((rate - alpha) / alpha * 100.0),
                        timing=None if timing is None else float(timing),
                        over_prediction=bool(traded_vhat > traded_v),
                    )
                )
    return result


# -- synthetic data --------------------------------------------------------------


def synthetic_panel(
    model,
    n_days: int,
    seed=None,
    buckets: Sequence[str] | None = None,
    level: float = 10.0,
    burn_in: int = 100,
    start_date: str = "2024-01-01",
    noise: float = 0.3,
) -> VolumePanel:
    """Panel whose log-volumes follow ``model`` around a U-shaped intraday profile.

    ``model`` is any fitted or generated matrix model with ``p`` buckets and
    ``q`` assets; ``noise`` scales its innovations. Prices follow an
    independent random walk.
    """
    from .simulate import simulate_series

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p, q = model.p, model.q
    buckets = trading_buckets(30)[:p] if buckets is None else tuple(buckets)
    if len(buckets) != p:
        raise DimensionError(f"need {p} bucket labels, got {len(buckets)}")
    series = simulate_series(model, n_days, burn_in, rng, innovation_scale=noise)
    u = np.linspace(-1.0, 1.0, p)
    profile = 0.8 * u**2
    asset_level = rng.uniform(-0.5, 0.5, q)
    volume = np.exp(level + profile[None, :, None] + asset_level[None, None, :] + series.data)
    steps = rng.normal(0.0, 0.002, (n_days, p, q))
    price = 100.0 * np.exp(np.cumsum(steps.reshape(-1, q), axis=0)).reshape(n_days, p, q)
    days = pd.bdate_range(start_date, periods=n_days).strftime("%Y-%m-%d")
    return VolumePanel(tuple(days), buckets, tuple(f"A{j + 1}" for j in range(q)), volume, price)
