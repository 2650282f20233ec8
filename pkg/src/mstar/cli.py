"""Command-line front end.

Every subcommand resolves its settings as defaults < ``--config`` JSON <
explicit flags, writes CSV and JSON artifacts into ``--out``, and records the
resolved configuration and a manifest of file digests next to them.
Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import pandas as pd

from . import forecast_app as app
from .errors import MstarError, NumericError, ValidationError
from .io import read_series_csv, read_weights_csv, write_json
from .simulate import SimDesign, monte_carlo, simulation_weights
from .star_banded import fit_banded, select_bandwidths
from .star_diag import FitConfig, fit_diag

log = logging.getLogger("mstar")

FLOAT_FORMAT = "%.12g"


def _ints(text: str) -> list[int]:
    return [int(x) for x in str(text).split(",") if x.strip()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


# name -> (type, default, help); list-valued options take comma-separated flags
_FIT = {
    "tolerance": (float, 1e-6, "stop threshold on the change of the Kronecker products"),
    "max_iterations": (int, 200, "iteration cap"),
    "seed": (int, 0, "random seed"),
}
_BANDS = {
    "K": (int, 4, "largest bandwidth considered"),
    "omega_factor": (float, 0.1, "ratio regulariser is omega_factor * p * q / n"),
}
_APP = {
    "input": (str, None, "volume CSV: date,bucket_start,asset,volume[,price]"),
    "method": (str, "banded_star", "one of " + ", ".join(app.METHODS)),
    "fit_window": (int, 60, "days per rolling model fit"),
    "L": (int, 22, "SMA lookback in days"),
    "epsilon": (float, 1.0, "floor applied to volumes before the log"),
    "eval_start": (int, None, "first evaluated day index (default: earliest possible)"),
    **_BANDS,
    **_FIT,
}
_POV = {
    "alpha_targets": (_floats, [0.1, 0.2, 0.4, 0.6], "comma-separated participation targets"),
    "order_frac": (float, 0.05, "order size as a fraction of the day's volume"),
    "start": (str, "09:15", "execution start time"),
}

COMMANDS: dict[str, dict] = {
    "simulate": {
        "kind": (str, "diag", "diag, banded, bandwidth or banded_unknown"),
        "p": (int, 10, "rows"),
        "q": (int, 10, "columns"),
        "n": (_ints, [2000], "comma-separated sample sizes"),
        "reps": (int, 50, "replications per sample size"),
        "kA": (int, 2, "true row bandwidth"),
        "kB": (int, 2, "true column bandwidth"),
        "burn_in": (int, 500, "discarded warm-up steps"),
        **_BANDS,
        **_FIT,
    },
    "fit-diag": {
        "input": (str, None, "series CSV: t,i,j,value"),
        "W0": (str, None, "weights CSV (default: unit band of width 2, zero diagonal)"),
        "W1": (str, None, "weights CSV (default: 0.5 band of width 2)"),
        "V0": (str, None, "weights CSV (default: unit band of width 2)"),
        "V1": (str, None, "weights CSV (default: 0.5 band of width 2)"),
        **_FIT,
    },
    "fit-banded": {
        "input": (str, None, "series CSV: t,i,j,value"),
        "kA": (int, None, "row bandwidth (default: selected from data)"),
        "kB": (int, None, "column bandwidth (default: selected from data)"),
        **_BANDS,
        **_FIT,
    },
    "select-bandwidth": {
        "input": (str, None, "series CSV: t,i,j,value"),
        **_BANDS,
    },
    "forecast": dict(_APP),
    "backtest-pov": {**_APP, **_POV},
    "report": {
        **_APP,
        **_POV,
        "methods": (lambda s: [m.strip() for m in str(s).split(",") if m.strip()], list(app.METHODS), "comma-separated methods"),
    },
}
COMMANDS["report"].pop("method")


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(f"{self.format_usage().strip()}\n{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mstar", description="Matrix spatio-temporal autoregression toolkit")
    parser.add_argument("--version", action="store_true", help="print the version and exit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, options in COMMANDS.items():
        p = sub.add_parser(name, help=f"run {name}")
        p.add_argument("--config", help="JSON file of option values")
        p.add_argument("--out", help="run directory (default: runs/<command>)")
        p.add_argument("--threads", type=int, help="worker processes (default: $MSTAR_THREADS or all cores)")
        p.add_argument("-v", "--verbose", action="store_true")
        for key, (kind, default, text) in options.items():
            flag = "--" + key.replace("_", "-")
            aliases = [flag] if key.replace("_", "-") == key else [flag, "--" + key]
            p.add_argument(*aliases, dest=key, type=kind, default=argparse.SUPPRESS, help=f"{text} [default: {default}]")
    return parser


def resolve(command: str, flags: dict, config_path: str | None) -> dict:
    """Merge defaults, the JSON config and explicit flags (in that order)."""
    options = COMMANDS[command]
    resolved = {key: default for key, (_, default, _) in options.items()}
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except FileNotFoundError:
            raise ValidationError(f"config file not found: {config_path}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ValidationError("config must be a JSON object")
        unknown = sorted(set(loaded) - set(options))
        if unknown:
            raise ValidationError(f"unknown config keys for {command}: {unknown}")
        for key, value in loaded.items():
            kind = options[key][0]
            if value is not None and kind in (int, float, str):
                try:
                    value = kind(value)
                except (TypeError, ValueError):
                    raise ValidationError(f"config key {key!r}: cannot read {value!r} as {kind.__name__}") from None
            resolved[key] = value
    resolved.update({k: v for k, v in flags.items() if k in options})
    if "input" in options and not resolved.get("input"):
        raise ValidationError(f"{command} needs --input")
    return resolved


def thread_count(flag: int | None) -> int:
    if flag is None:
        env = os.environ.get("MSTAR_THREADS")
        if env:
            try:
                flag = int(env)
            except ValueError:
                raise ValidationError(f"MSTAR_THREADS must be an integer, got {env!r}") from None
        else:
            flag = os.cpu_count() or 1
    if flag < 1:
        raise ValidationError("thread count must be >= 1")
    return flag


# -- artifacts -----------------------------------------------------------------


class RunDir:
    def __init__(self, path: Path):
        self.path = path
        self.path.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def csv(self, name: str, frame: pd.DataFrame) -> None:
        frame.to_csv(self.path / name, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self.files.append(name)

    def json(self, name: str, obj) -> None:
        write_json(obj, self.path / name)
        self.files.append(name)

    def finish(self, command: str, config: dict) -> None:
        self.json("config.json", config)
        digests = {
            name: hashlib.sha256((self.path / name).read_bytes()).hexdigest() for name in sorted(self.files)
        }
        write_json(
            {"command": command, "version": _version(), "config": config, "files": digests},
            self.path / "manifest.json",
        )


def _version() -> str:
    try:
        return version("mstar")
    except PackageNotFoundError:
        return "unknown"


def _fit_config(cfg: dict) -> FitConfig:
    return FitConfig(tolerance=cfg["tolerance"], max_iterations=cfg["max_iterations"], seed=cfg["seed"])


def _matrix_rows(**named) -> pd.DataFrame:
    rows = []
    for name, m in named.items():
        m = np.atleast_2d(np.asarray(m, dtype=float)) if np.ndim(m) != 1 else np.asarray(m, dtype=float)[:, None]
        for (i, j), value in np.ndenumerate(m):
            rows.append({"name": name, "i": i + 1, "j": j + 1, "value": value})
    return pd.DataFrame(rows, columns=["name", "i", "j", "value"])


# -- subcommands -----------------------------------------------------------------


def cmd_simulate(cfg: dict, run: RunDir, threads: int) -> None:
    reports = []
    for n in cfg["n"]:
        design = SimDesign(
            kind=cfg["kind"],
            p=cfg["p"],
            q=cfg["q"],
            n=n,
            replications=cfg["reps"],
            kA=cfg["kA"],
            kB=cfg["kB"],
            K=cfg["K"],
            omega_factor=cfg["omega_factor"],
            seed=cfg["seed"],
            burn_in=cfg["burn_in"],
            tolerance=cfg["tolerance"],
            max_iterations=cfg["max_iterations"],
        )
        reports.append(monte_carlo(design, workers=threads))
    run.csv("report.csv", pd.DataFrame([row for r in reports for row in r.csv_rows()]))
    run.json("report.json", [r.to_dict() for r in reports])


def cmd_fit_diag(cfg: dict, run: RunDir, threads: int) -> None:
    series = read_series_csv(cfg["input"])
    defaults = dict(zip(("W0", "W1", "V0", "V1"), simulation_weights(series.p, series.q)))
    weights = {k: read_weights_csv(cfg[k]) if cfg[k] else defaults[k] for k in defaults}
    fit = fit_diag(series, weights["W0"], weights["W1"], weights["V0"], weights["V1"], _fit_config(cfg))
    run.json("model.json", fit.to_dict(n=series.n))
    m = fit.model
    run.csv("coefficients.csv", _matrix_rows(alpha0=m.alpha0, alpha1=m.alpha1, beta0=m.beta0, beta1=m.beta1))


def cmd_fit_banded(cfg: dict, run: RunDir, threads: int) -> None:
    series = read_series_csv(cfg["input"])
    kA, kB = cfg["kA"], cfg["kB"]
    if kA is None or kB is None:
        K = min(cfg["K"], series.p - 1, series.q - 1)
        sel = select_bandwidths(series, K, cfg["omega_factor"])
        kA = sel.kA_hat if kA is None else kA
        kB = sel.kB_hat if kB is None else kB
        run.json("selection.json", sel.to_dict())
    fit = fit_banded(series, kA, kB, _fit_config(cfg))
    run.json("model.json", fit.to_dict(n=series.n))
    m = fit.model
    run.csv("coefficients.csv", _matrix_rows(A0=m.A0, A1=m.A1, B0=m.B0, B1=m.B1))


def cmd_select_bandwidth(cfg: dict, run: RunDir, threads: int) -> None:
    series = read_series_csv(cfg["input"])
    sel = select_bandwidths(series, cfg["K"], cfg["omega_factor"])
    out = sel.to_dict()
    out.update(n=series.n, p=series.p, q=series.q)
    run.json("selection.json", out)
    run.csv(
        "row_votes.csv",
        pd.DataFrame({"row": np.arange(1, sel.row_kA.size + 1), "kA": sel.row_kA, "kB": sel.row_kB}),
    )


def _forecasts(cfg: dict, panel, method: str):
    days = None
    if cfg["eval_start"] is not None:
        if not (0 <= cfg["eval_start"] < panel.shape[0]):
            raise ValidationError("eval_start outside the panel")
        days = np.arange(cfg["eval_start"], panel.shape[0])
    return app.rolling_forecast(
        panel,
        method,
        eval_days=days,
        fit_window=cfg["fit_window"],
        L=cfg["L"],
        config=_fit_config(cfg),
        K=cfg["K"],
        omega_factor=cfg["omega_factor"],
        epsilon=cfg["epsilon"],
    )


def _common_days(cfg: dict, panel, methods) -> np.ndarray:
    if cfg["eval_start"] is not None:
        return np.arange(cfg["eval_start"], panel.shape[0])
    first = max(app.default_eval_days(panel, m, cfg["fit_window"], cfg["L"])[0] for m in methods)
    return np.arange(first, panel.shape[0])


def cmd_forecast(cfg: dict, run: RunDir, threads: int) -> None:
    panel = app.load_volume_csv(cfg["input"])
    result = _forecasts(cfg, panel, cfg["method"])
    run.csv("forecast.csv", result.to_frame(panel))
    errors = app.relative_error_report(result.forecast, panel, result.days)
    run.csv("relative_error.csv", pd.DataFrame(errors))
    summary = {
        "method": cfg["method"],
        "eval_days": [panel.days[d] for d in result.days],
        "fallback_days": [panel.days[d] for d, f in zip(result.days, result.fallback) if f],
        "messages": result.messages,
        "relative_error": errors,
    }
    if panel.price is not None:
        vwap = app.vwap_error(result.forecast, panel, result.days)
        run.csv("vwap_error.csv", pd.DataFrame(vwap))
        summary["vwap_error_bps"] = vwap
    run.json("forecast.json", summary)


def _pov_frames(result, panel):
    episodes = pd.DataFrame(
        [
            {
                "date": e.day,
                "asset": e.asset,
                "alpha_target": e.target_rate,
                "order_size": e.order_size,
                "completed": e.completed,
                "buckets_used": e.buckets_used,
                "ideal_buckets": e.ideal_buckets,
                "impact_pct": e.impact,
                "timing_pct": e.timing,
                "over_prediction": e.over_prediction,
            }
            for e in result.episodes
        ]
    )
    return episodes, pd.DataFrame(result.summary())


def cmd_backtest_pov(cfg: dict, run: RunDir, threads: int) -> None:
    panel = app.load_volume_csv(cfg["input"])
    fc = _forecasts(cfg, panel, cfg["method"])
    result = app.pov_backtest(fc.forecast, panel, fc.days, cfg["alpha_targets"], cfg["order_frac"], cfg["start"])
    episodes, summary = _pov_frames(result, panel)
    run.csv("episodes.csv", episodes)
    run.csv("pov_summary.csv", summary)
    run.json(
        "pov.json",
        {"method": cfg["method"], "summary": summary.to_dict(orient="records"), "skipped": result.skipped, "fallback_days": int(fc.fallback.sum())},
    )


def cmd_report(cfg: dict, run: RunDir, threads: int) -> None:
    """Accuracy, VWAP and POV tables with one column block per method."""
    panel = app.load_volume_csv(cfg["input"])
    methods = cfg["methods"]
    bad = [m for m in methods if m not in app.METHODS]
    if bad or not methods:
        raise ValidationError(f"unknown methods {bad}; choose from {app.METHODS}")
    days = _common_days(cfg, panel, methods)
    cfg_days = dict(cfg, eval_start=int(days[0]))
    err_tables, vwap_tables, pov_tables, notes = [], [], [], {}
    for method in methods:
        fc = _forecasts(cfg_days, panel, method)
        notes[method] = {"fallback_days": int(fc.fallback.sum()), "messages": fc.messages}
        err = pd.DataFrame(app.relative_error_report(fc.forecast, panel, fc.days))
        err_tables.append(err.set_index(["asset", "session"])["error"].rename(method))
        if panel.price is not None:
            vw = pd.DataFrame(app.vwap_error(fc.forecast, panel, fc.days))
            vwap_tables.append(vw.set_index(["asset", "session"])["bps"].rename(method))
        pov = app.pov_backtest(fc.forecast, panel, fc.days, cfg["alpha_targets"], cfg["order_frac"], cfg["start"])
        summary = pd.DataFrame(pov.summary())
        summary.insert(0, "method", method)
        pov_tables.append(summary)
    errors = pd.concat(err_tables, axis=1).reset_index()
    run.csv("relative_error.csv", errors)
    out = {"methods": methods, "eval_days": len(days), "notes": notes, "relative_error": errors.to_dict(orient="records")}
    if vwap_tables:
        vwap = pd.concat(vwap_tables, axis=1).reset_index()
        run.csv("vwap_error.csv", vwap)
        out["vwap_error_bps"] = vwap.to_dict(orient="records")
    pov = pd.concat(pov_tables, ignore_index=True)
    run.csv("pov_summary.csv", pov)
    out["pov"] = pov.to_dict(orient="records")
    run.json("report.json", out)


HANDLERS = {
    "simulate": cmd_simulate,
    "fit-diag": cmd_fit_diag,
    "fit-banded": cmd_fit_banded,
    "select-bandwidth": cmd_select_bandwidth,
    "forecast": cmd_forecast,
    "backtest-pov": cmd_backtest_pov,
    "report": cmd_report,
}


def run(argv: list[str] | None = None) -> int:
    """Execute one command line; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        if args.version:
            print(_version())
            return 0
        if not args.command:
            raise UsageError(build_parser().format_usage().strip())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out", "threads", "verbose", "version")}
        cfg = resolve(args.command, flags, args.config)
        threads = thread_count(args.threads)
        run_dir = RunDir(Path(args.out or Path("runs") / args.command))
        HANDLERS[args.command](cfg, run_dir, threads)
        run_dir.finish(args.command, cfg)
        print(run_dir.path)
        return 0
    except NumericError as exc:
        print(f"mstar: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (MstarError, ValueError) as exc:
        print(f"mstar: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mstar: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
