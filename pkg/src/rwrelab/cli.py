"""Batch front door: config, orchestration, deterministic seeding, artifacts.

One JSON config schema with a CLI flag mirroring every field; flags override
the file.  Each experiment writes three artifacts into the output directory:

* ``report.json`` — schema v1: {schema, experiment, config, kappa, grid,
  cells, distances, manifest}; every cell carries {t, h, eta, estimate,
  ci_lo, ci_hi, reference, n, flags}.
* ``rows.csv`` — per-replica (or per-valley / per-environment) rows with a
  sorted union header; the plot-ready columnar data.
* ``manifest.json`` — config hash, master seed, code version, the full
  per-horizon diagnostics constants, and an ``execution`` object (wall
  time, worker count, timestamp).  Everything outside ``execution`` is a
  pure function of (config, master seed): reports rerun with any worker
  count are byte-identical once ``execution`` is dropped.

Exit codes: 0 success; 2 config error (unknown kind, bad grid, missing
seed, lattice law in a limit-law experiment, unreadable/unwritable paths);
3 replica budget exhausted (no valid replica survived the flags); 4 gate
failure when ``--gate`` is set.  Gates mirror the convergence contracts:
aging must sit within 0.10 of its limit at the largest t with errors
nonincreasing in t; localization must exceed 0.85 and increase; the clock
comparison's median TV must fall below 0.25 and shrink from the smallest
to the largest t; renewal needs a decreasing KS distance and a sandwich
frequency above 0.9; the oracle suite needs relative error <= 1e-10.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

import click
import numpy as np

from . import __version__
from .envmodel import EnvSpec, EnvSpecError, sample_environment, validate_spec
from .experiments import (
    REPORT_SCHEMA_VERSION,
    CellResult,
    ExperimentReport,
    arcsine_aging_value,
    clock_model_comparison,
    oracle_battery,
    renewal_test,
    trajectory_batch,
    wilson_interval,
    write_report,
    write_rows,
)
from .potential import (
    DiagnosticsConfig,
    ScanExhaustedError,
    build_potential,
    deep_valleys,
    good_env_diagnostics,
)
from .rng import substream_seed
from .walker import MODES

__all__ = [
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_BUDGET",
    "EXIT_GATE",
    "EXPERIMENT_KINDS",
    "ConfigError",
    "RunConfig",
    "make_config",
    "run",
    "main",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_GATE = 4

EXPERIMENT_KINDS = (
    "env-audit",
    "valleys",
    "aging",
    "localization",
    "clock-compare",
    "renewal",
    "oracle-suite",
)

# experiments whose limit laws assume a non-lattice log rho distribution
_NON_LATTICE_KINDS = frozenset({"aging", "localization", "clock-compare", "renewal"})

_FORMATS = ("json", "csv")

_GATE_AGING_TOL = 0.10
_GATE_LOCALIZATION_FLOOR = 0.85
_GATE_TV_CEIL = 0.25
_GATE_SANDWICH_FLOOR = 0.9
_GATE_ORACLE_TOL = 1e-10


class ConfigError(ValueError):
    """A config that cannot be turned into a runnable experiment."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """One experiment run, fully determined together with the master seed."""

    kind: str
    family: str
    params: dict[str, Any]
    t_grid: tuple[int, ...]
    h: float
    eta: float
    delta: float
    replicas: int
    env_count: int
    walks_per_env: int
    occupation_walks: int
    seed: int
    workers: int
    out_dir: str
    formats: tuple[str, ...]
    mode: str
    gate: bool

    def spec(self) -> EnvSpec:
        try:
            spec = validate_spec(self.family, self.params)
        except EnvSpecError as exc:
            raise ConfigError(f"environment law rejected: {exc}") from exc
        if self.kind in _NON_LATTICE_KINDS and not spec.non_lattice:
            raise ConfigError(
                f"the {self.family} law given is lattice; the {self.kind} "
                "experiment states a non-lattice limit law — refusing to run"
            )
        return spec

    def as_json(self) -> dict[str, Any]:
        # workers, the output directory, and the format list are emission
        # plumbing, not experiment configuration: numeric output must not
        # depend on them, so they live in the manifest's execution object
        # and stay out of the config echo and its hash
        return {
            "kind": self.kind,
            "family": self.family,
            "params": self.params,
            "t": list(self.t_grid),
            "h": self.h,
            "eta": self.eta,
            "delta": self.delta,
            "replicas": self.replicas,
            "env_count": self.env_count,
            "walks_per_env": self.walks_per_env,
            "occupation_walks": self.occupation_walks,
            "seed": self.seed,
            "mode": self.mode,
            "gate": self.gate,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.as_json(), sort_keys=True,
                          separators=(",", ":")).encode()
        return hashlib.blake2b(blob, digest_size=16).hexdigest()


def _parse_t_grid(raw: Any) -> tuple[int, ...]:
    """t values from a comma string or list; scientific notation is floored."""
    if raw is None:
        raise ConfigError("a t grid is required (e.g. --t 1e4,1e5,1e6)")
    items: Sequence[Any]
    items = [s for s in str(raw).split(",") if s.strip()] if isinstance(raw, str) else raw
    if not items:
        raise ConfigError("the t grid is empty")
    out = []
    for item in items:
        try:
            value = float(item)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cannot read t value {item!r}") from exc
        if not math.isfinite(value) or value < 3.0:
            raise ConfigError(f"every t must be finite and >= 3, got {item!r}")
        out.append(int(math.floor(value)))
    return tuple(sorted(set(out)))


def _as_int(data: Mapping[str, Any], key: str, default: int, minimum: int) -> int:
    value = data.get(key, default)
    if value is None:
        value = default
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    try:
        value = int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be an integer, got {value!r}") from exc
    if value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {value}")
    return value


def _as_float(data: Mapping[str, Any], key: str, default: float,
              *, gt: float) -> float:
    value = data.get(key, default)
    if value is None:
        value = default
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a number, got {value!r}") from exc
    if not math.isfinite(value) or not value > gt:
        raise ConfigError(f"{key} must be finite and > {gt}, got {value}")
    return value


_CONFIG_KEYS = frozenset({
    "kind", "family", "params", "t", "h", "eta", "delta", "replicas",
    "env_count", "walks_per_env", "occupation_walks", "seed", "workers",
    "out", "formats", "mode", "gate",
})


def make_config(data: Mapping[str, Any]) -> RunConfig:
    """Validate a merged config mapping into a :class:`RunConfig`."""
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")

    kind = data.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"unknown experiment kind {kind!r}; expected one of {EXPERIMENT_KINDS}"
        )

    family = data.get("family")
    if not family:
        raise ConfigError("an environment family is required (--kappa-family)")
    params = data.get("params") or {}
    if not isinstance(params, Mapping):
        raise ConfigError(f"params must be an object, got {params!r}")

    if data.get("seed") is None:
        raise ConfigError("a master seed is required (no implicit entropy)")
    seed = _as_int(data, "seed", 0, 0)

    formats = data.get("formats", list(_FORMATS))
    if isinstance(formats, str):
        formats = [s for s in formats.split(",") if s.strip()]
    formats = tuple(formats)
    if not formats or any(fmt not in _FORMATS for fmt in formats):
        raise ConfigError(f"formats must be a non-empty subset of {_FORMATS}")

    mode = data.get("mode") or "geometric-hybrid"
    if mode not in MODES:
        raise ConfigError(f"unknown walker mode {mode!r}; expected one of {MODES}")

    gate = data.get("gate", False)
    if not isinstance(gate, bool):
        raise ConfigError(f"gate must be true or false, got {gate!r}")

    t_grid = _parse_t_grid(data.get("t"))
    if kind == "oracle-suite" and min(t_grid) < 8:
        raise ConfigError(
            "oracle-suite reads t as maximum environment length; need >= 8"
        )

    return RunConfig(
        kind=kind,
        family=str(family),
        params=dict(params),
        t_grid=t_grid,
        h=_as_float(data, "h", 2.0, gt=1.0),
        eta=_as_float(data, "eta", 1.0, gt=0.0),
        delta=_as_float(data, "delta", 0.1, gt=0.0),
        replicas=_as_int(data, "replicas", 100, 1),
        env_count=_as_int(data, "env_count", 20, 1),
        walks_per_env=_as_int(data, "walks_per_env", 200, 1),
        occupation_walks=_as_int(data, "occupation_walks", 0, 0),
        seed=seed,
        workers=_as_int(data, "workers", 1, 1),
        out_dir=str(data.get("out") or "rwre-out"),
        formats=formats,
        mode=mode,
        gate=gate,
    )


# ---------------------------------------------------------------------------
# experiment dispatch
# ---------------------------------------------------------------------------


@dataclass
class _Outcome:
    cells: list[CellResult]
    distances: dict[str, Any]
    rows: list[dict[str, Any]]
    gate_ok: bool
    budget_ok: bool


def _err_trend_nonincreasing(errors: Sequence[float]) -> bool:
    return all(a >= b - 1e-12 for a, b in zip(errors, errors[1:]))


def _run_aging_like(spec: EnvSpec, cfg: RunConfig, indicator: str) -> _Outcome:
    reference = (arcsine_aging_value(spec.kappa, cfg.h)
                 if indicator == "aged" else 1.0)
    cells, rows = [], []
    for t in cfg.t_grid:
        batch = trajectory_batch(spec, t, cfg.h, cfg.eta, cfg.replicas,
                                 cfg.seed, mode=cfg.mode, workers=cfg.workers)
        cells.append(batch.cell(indicator, reference))
        rows.extend({"t": t, **row} for row in batch.rows)
    estimates = [c.estimate for c in cells]
    budget_ok = all(e is not None for e in estimates)
    if budget_ok:
        if indicator == "aged":
            errors = [abs(e - reference) for e in estimates]
            gate_ok = errors[-1] <= _GATE_AGING_TOL and _err_trend_nonincreasing(errors)
        else:
            gate_ok = (estimates[-1] > _GATE_LOCALIZATION_FLOOR
                       and all(a < b for a, b in zip(estimates, estimates[1:])))
    else:
        gate_ok = False
    distances = {
        "reference": reference,
        "abs_error": {str(c.t): (None if c.estimate is None
                                 else abs(c.estimate - reference))
                      for c in cells},
    }
    return _Outcome(cells, distances, rows, gate_ok, budget_ok)


def _run_renewal(spec: EnvSpec, cfg: RunConfig) -> _Outcome:
    cells, rows = [], []
    ks_left, ks_right, censored = {}, {}, {}
    sandwich = []
    for t in cfg.t_grid:
        res = renewal_test(spec, t, cfg.replicas, cfg.seed, workers=cfg.workers)
        lo, hi = wilson_interval(round(res.sandwich_freq * res.n_level_pos),
                                 res.n_level_pos)
        cells.append(CellResult(
            t=t, h=None, eta=None, estimate=res.sandwich_freq,
            ci_lo=lo, ci_hi=hi, reference=1.0, n=res.n_level_pos,
            flags=dict(res.excluded),
        ))
        ks_left[str(t)] = res.ks_left
        ks_right[str(t)] = res.ks_right
        censored[str(t)] = res.right_censored
        sandwich.append(res.sandwich_freq)
        rows.extend({"t": t, **row} for row in res.rows)
    lefts = [ks_left[str(t)] for t in cfg.t_grid]
    gate_ok = (all(a > b for a, b in zip(lefts, lefts[1:]))
               and sandwich[-1] > _GATE_SANDWICH_FLOOR)
    distances = {"ks_left": ks_left, "ks_right": ks_right,
                 "right_censored": censored}
    return _Outcome(cells, distances, rows, gate_ok, budget_ok=True)


def _run_clock_compare(spec: EnvSpec, cfg: RunConfig) -> _Outcome:
    cells, rows = [], []
    tv_median, occ_median = {}, {}
    medians = []
    for t in cfg.t_grid:
        res = clock_model_comparison(
            spec, t, cfg.env_count, cfg.walks_per_env, cfg.seed,
            occupation_walks=cfg.occupation_walks, workers=cfg.workers)
        q1, q3 = res.tv_quartiles
        cells.append(CellResult(
            t=t, h=None, eta=None, estimate=res.tv_median,
            ci_lo=q1, ci_hi=q3,  # interquartile range, not a Wilson interval
            reference=0.0, n=res.n_env_valid, flags=dict(res.excluded),
        ))
        tv_median[str(t)] = res.tv_median
        occ_median[str(t)] = res.occ_tv_median
        medians.append(res.tv_median)
        rows.extend({"t": t, **row} for row in res.rows)
    gate_ok = medians[-1] < _GATE_TV_CEIL and (
        len(medians) < 2 or medians[-1] < medians[0])
    distances = {"tv_median": tv_median, "occ_tv_median": occ_median}
    return _Outcome(cells, distances, rows, gate_ok, budget_ok=True)


def _run_env_audit(spec: EnvSpec, cfg: RunConfig) -> _Outcome:
    cells, rows = [], []
    event_rates: dict[str, dict[str, float]] = {}
    for t in cfg.t_grid:
        good = 0
        flags: dict[str, int] = {}
        holds: dict[str, int] = {}
        n_valid = 0
        for i in range(cfg.replicas):
            env = sample_environment(spec, -64, 512,
                                     substream_seed(cfg.seed, "env", i))
            try:
                report = good_env_diagnostics(build_potential(env), float(t))
            except ScanExhaustedError:
                flags["scan_exhausted"] = flags.get("scan_exhausted", 0) + 1
                continue
            n_valid += 1
            good += report.all_good
            row = {"t": t, "replica": i, "K": report.K,
                   "all_core": report.all_core, "all_good": report.all_good}
            for ev in report.events:
                holds[ev.name] = holds.get(ev.name, 0) + ev.holds
                row[f"{ev.name}_holds"] = ev.holds
                row[f"{ev.name}_witness"] = ev.witness
                row[f"{ev.name}_threshold"] = ev.threshold
            rows.append(row)
        if n_valid:
            lo, hi = wilson_interval(good, n_valid)
            cells.append(CellResult(t=t, h=None, eta=None,
                                    estimate=good / n_valid, ci_lo=lo,
                                    ci_hi=hi, reference=1.0, n=n_valid,
                                    flags=flags))
        else:
            cells.append(CellResult(t=t, h=None, eta=None, estimate=None,
                                    ci_lo=None, ci_hi=None, reference=1.0,
                                    n=0, flags=flags))
        event_rates[str(t)] = {name: holds[name] / n_valid
                               for name in sorted(holds)} if n_valid else {}
    distances = {"event_rates": event_rates,
                 "log_rho_mean": spec.log_rho_mean,
                 "kappa_log_moment": spec.kappa_log_moment,
                 "non_lattice": spec.non_lattice}
    budget_ok = all(c.n > 0 for c in cells)
    return _Outcome(cells, distances, rows, gate_ok=True, budget_ok=budget_ok)


def _run_valleys(spec: EnvSpec, cfg: RunConfig) -> _Outcome:
    cells, rows = [], []
    for t in cfg.t_grid:
        counts = []
        flags: dict[str, int] = {}
        for i in range(cfg.replicas):
            env = sample_environment(spec, -64, 512,
                                     substream_seed(cfg.seed, "env", i))
            try:
                valleys = deep_valleys(build_potential(env), float(t))
            except ScanExhaustedError:
                flags["scan_exhausted"] = flags.get("scan_exhausted", 0) + 1
                continue
            counts.append(len(valleys))
            for v in valleys:
                rows.append({"t": t, "replica": i, **v.to_json()})
        if counts:
            mean_k = float(np.mean(counts))
            if len(counts) >= 2 and float(np.std(counts, ddof=1)) > 0.0:
                half = 2.5758 * float(np.std(counts, ddof=1)) / math.sqrt(len(counts))
                lo, hi = mean_k - half, mean_k + half
            else:
                lo = hi = None
            cells.append(CellResult(t=t, h=None, eta=None, estimate=mean_k,
                                    ci_lo=lo, ci_hi=hi, reference=None,
                                    n=len(counts), flags=flags))
        else:
            cells.append(CellResult(t=t, h=None, eta=None, estimate=None,
                                    ci_lo=None, ci_hi=None, reference=None,
                                    n=0, flags=flags))
    budget_ok = all(c.n > 0 for c in cells)
    return _Outcome(cells, {}, rows, gate_ok=True, budget_ok=budget_ok)


def _run_oracle_suite(spec: EnvSpec, cfg: RunConfig) -> _Outcome:
    cells, rows = [], []
    max_rel: dict[str, dict[str, float]] = {}
    gate_ok = True
    for t in cfg.t_grid:  # t doubles as the maximum environment length here
        battery = oracle_battery(spec, cfg.env_count, cfg.seed, max_len=t)
        worst = battery.worst()
        gate_ok = gate_ok and worst <= _GATE_ORACLE_TOL
        cells.append(CellResult(t=t, h=None, eta=None, estimate=worst,
                                ci_lo=None, ci_hi=None, reference=0.0,
                                n=cfg.env_count, flags={}))
        max_rel[str(t)] = dict(sorted(battery.max_rel.items()))
        rows.extend({"t": t, **case} for case in battery.cases)
    return _Outcome(cells, {"max_rel_error": max_rel}, rows, gate_ok,
                    budget_ok=True)


_DISPATCH: dict[str, Callable[[EnvSpec, RunConfig], _Outcome]] = {
    "aging": lambda spec, cfg: _run_aging_like(spec, cfg, "aged"),
    "localization": lambda spec, cfg: _run_aging_like(spec, cfg, "localized_t"),
    "renewal": _run_renewal,
    "clock-compare": _run_clock_compare,
    "env-audit": _run_env_audit,
    "valleys": _run_valleys,
    "oracle-suite": _run_oracle_suite,
}

_GRIDDED_KINDS = frozenset({"aging", "localization"})


def run(config: RunConfig) -> int:
    """Execute one experiment and write its artifacts; returns the exit code."""
    started = time.time()
    t0 = time.monotonic()
    try:
        spec = config.spec()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG

    try:
        outcome = _DISPATCH[config.kind](spec, config)
    except RuntimeError as exc:
        click.echo(f"replica budget exhausted: {exc}", err=True)
        return EXIT_BUDGET

    uses_walk_grid = config.kind in _GRIDDED_KINDS
    grid = [{"t": t,
             "h": config.h if uses_walk_grid else None,
             "eta": config.eta if uses_walk_grid else None}
            for t in config.t_grid]
    manifest: dict[str, Any] = {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "code_version": __version__,
        "schema": REPORT_SCHEMA_VERSION,
        "execution": {
            "workers": config.workers,
            "out": config.out_dir,
            "formats": list(config.formats),
            "wall_time_s": time.monotonic() - t0,
            "written_at_unix": int(started),
        },
    }
    if config.kind != "oracle-suite":
        # every diagnostics constant per horizon, so flagged events A1..A5
        # can be reproduced exactly from the report alone
        manifest["diagnostics"] = {
            str(t): DiagnosticsConfig.defaults(spec, float(t)).as_json()
            for t in config.t_grid
        }
    if config.gate:
        manifest["gate"] = {"checked": True, "passed": outcome.gate_ok}

    report = ExperimentReport(
        experiment=config.kind, config=config.as_json(), kappa=spec.kappa,
        grid=grid, cells=outcome.cells, distances=outcome.distances,
        manifest=manifest,
    )

    try:
        os.makedirs(config.out_dir, exist_ok=True)
        if "json" in config.formats:
            write_report(report, os.path.join(config.out_dir, "report.json"))
        if "csv" in config.formats:
            write_rows(os.path.join(config.out_dir, "rows.csv"), outcome.rows)
        with open(os.path.join(config.out_dir, "manifest.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError as exc:
        click.echo(f"config error: cannot write artifacts: {exc}", err=True)
        return EXIT_CONFIG

    for cell in outcome.cells:
        click.echo(
            f"t={cell.t} estimate="
            + ("n/a" if cell.estimate is None else f"{cell.estimate:.6g}")
            + ("" if cell.reference is None else f" reference={cell.reference:.6g}")
            + f" n={cell.n}"
            + (f" flags={cell.flags}" if cell.flags else "")
        )
    click.echo(f"artifacts written to {config.out_dir}")

    if not outcome.budget_ok:
        click.echo("replica budget exhausted: a cell has no valid replicas",
                   err=True)
        return EXIT_BUDGET
    if config.gate and not outcome.gate_ok:
        click.echo("gate failed: estimates violate the convergence contract",
                   err=True)
        return EXIT_GATE
    return EXIT_OK


# ---------------------------------------------------------------------------
# click wiring
# ---------------------------------------------------------------------------


def _parse_float_list(raw: str) -> list[float]:
    try:
        return [float(s) for s in str(raw).split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {raw!r}") from exc


_OPTIONS = [
    click.option("--config", "config_path", default=None,
                 help="JSON config file; every flag below overrides its field."),
    click.option("--kappa-family", "--family", "family", default=None,
                 help="Environment law family: lognormal | beta | discrete."),
    click.option("--mu", type=float, default=None,
                 help="lognormal: mean of log rho."),
    click.option("--sigma", type=float, default=None,
                 help="lognormal: standard deviation of log rho."),
    click.option("--alpha", type=float, default=None,
                 help="beta: first shape parameter of omega."),
    click.option("--beta", "beta_", type=float, default=None,
                 help="beta: second shape parameter of omega."),
    click.option("--rho", default=None,
                 help="discrete: comma-separated rho atoms."),
    click.option("--p", "p_", default=None,
                 help="discrete: comma-separated atom masses."),
    click.option("--t", "t_grid", default=None,
                 help="Comma-separated horizon grid; scientific notation is "
                      "floored to integers (oracle-suite reads these as "
                      "maximum environment lengths)."),
    click.option("--h", type=float, default=None,
                 help="Aging ratio th/t (> 1)."),
    click.option("--eta", type=float, default=None,
                 help="Localization window multiplier: window = eta log t."),
    click.option("--delta", type=float, default=None,
                 help="Clock-window margin (> 0); recorded in the config."),
    click.option("--replicas", type=float, default=None,
                 help="Replicas per grid cell (aging, localization, renewal, "
                      "env-audit, valleys)."),
    click.option("--env-count", type=float, default=None,
                 help="Environments (clock-compare, oracle-suite)."),
    click.option("--walks-per-env", type=float, default=None,
                 help="Walks and clock draws per environment (clock-compare)."),
    click.option("--occupation-walks", type=float, default=None,
                 help="Position-audit walks per environment (clock-compare)."),
    click.option("--seed", type=float, default=None,
                 help="Master seed (required; no implicit entropy)."),
    click.option("--workers", type=float, default=None,
                 help="Worker processes; never changes numeric output."),
    click.option("--out", "out_dir", default=None,
                 help="Output directory (default rwre-out)."),
    click.option("--formats", default=None,
                 help="Artifact formats, subset of json,csv (default both)."),
    click.option("--mode", default=None,
                 help="Walker mode: direct | geometric-hybrid."),
    click.option("--gate/--no-gate", "gate", default=None,
                 help="Exit 4 when the convergence gate fails."),
]


def _with_options(fn):
    for opt in reversed(_OPTIONS):
        fn = opt(fn)
    return fn


def _merge_config(kind: str | None, kw: dict[str, Any]) -> RunConfig:
    data: dict[str, Any] = {}
    path = kw.pop("config_path", None)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")

    params = dict(data.get("params") or {})
    for name, key in (("mu", "mu"), ("sigma", "sigma"), ("alpha", "alpha"),
                      ("beta_", "beta")):
        if kw.get(name) is not None:
            params[key] = kw[name]
    for name, key in (("rho", "rho"), ("p_", "p")):
        if kw.get(name) is not None:
            params[key] = _parse_float_list(kw[name])
    if params:
        data["params"] = params

    for name, key in (("family", "family"), ("t_grid", "t"), ("h", "h"),
                      ("eta", "eta"), ("delta", "delta"),
                      ("replicas", "replicas"), ("env_count", "env_count"),
                      ("walks_per_env", "walks_per_env"),
                      ("occupation_walks", "occupation_walks"),
                      ("seed", "seed"), ("workers", "workers"),
                      ("out_dir", "out"), ("formats", "formats"),
                      ("mode", "mode"), ("gate", "gate")):
        if kw.get(name) is not None:
            data[key] = kw[name]

    if kind is not None:
        data["kind"] = kind
    return make_config(data)


def _invoke(kind: str | None, kw: dict[str, Any]) -> int:
    try:
        config = _merge_config(kind, kw)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    return run(config)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(version=__version__, prog_name="rwrelab")
def main():
    """Simulation laboratory for transient sub-ballistic random walks in
    random environment: audits, accelerated Monte Carlo, and limit-law
    experiments with deterministic seeding."""


_HELP = {
    "env-audit": "Good-environment diagnostics (events A1..A5) over sampled "
                 "environments at each horizon.",
    "valleys": "Deep-valley anatomy per sampled environment: one CSV row "
               "per valley with all anatomy sites and weights.",
    "aging": "Annealed aging probability vs the generalized arcsine limit.",
    "localization": "Annealed localization rate (limit 1).",
    "clock-compare": "Quenched level law vs the exponential clock surrogate "
                     "(per-environment TV distances).",
    "renewal": "Backward/forward renewal times vs the Dynkin laws plus the "
               "sandwich frequency.",
    "oracle-suite": "Closed forms vs the extended-precision chain solver on "
                    "random environments.",
}


def _register(kind: str):
    @main.command(kind, help=_HELP[kind])
    @_with_options
    def _cmd(**kw):
        sys.exit(_invoke(kind, kw))

    return _cmd


for _kind in EXPERIMENT_KINDS:
    _register(_kind)


@main.command("run", help="Run the experiment named by the config file's "
                          "'kind' field (flags still override).")
@_with_options
def _cmd_run(**kw):
    sys.exit(_invoke(None, kw))


if __name__ == "__main__":
    main()
