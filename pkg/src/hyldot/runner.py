"""Run configuration, records, result cache and the command implementations.

The CLI in :mod:`hyldot.cli` is a thin argparse layer over this module;
everything here is importable and usable from Python directly.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from hyldot.basis import BasisSet
from hyldot.eigensolvers import optimize_mu, solve_state
from hyldot.entanglement import convergence_table, entropy_report
from hyldot.errors import NumericalError
from hyldot.matrix_elements import ModelParams, cache_dir, reduced_operators
from hyldot.one_electron import ionization_threshold
from hyldot.wavefunction import DEFAULT_QUAD, FREE_SPACE_RADIUS, default_radius

log = logging.getLogger(__name__)

MODES = ("scaled_dot", "free_space")
STATES = ("singlet", "triplet")
FORMATS = ("csv", "json")
PRECISIONS = ("double", "extended")

FREE_SPACE_MU = 3.0
TABLE1_REFERENCE = {
    (0, 100): 0.0160148,
    (0, 200): 0.0159268,
    (0, 300): 0.0159221,
    (1, 100): 0.0160100,
    (1, 200): 0.0159220,
    (1, 300): 0.0159172,
}
TABLE1_TOL = 2e-5
RECORD_COLUMNS = (
    "mode", "eta", "gamma", "state", "sz", "omega", "mu", "energy", "S_vN", "L",
    "trunc_defect", "residual", "cond_S", "R", "nmax", "lmax", "Q", "wall_time", "error",
)
_CACHE_VERSION = 2


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""


@dataclass(frozen=True)
class GammaGrid:
    start: float
    stop: float
    count: int
    spacing: str = "log"

    @classmethod
    def parse(cls, text: str) -> "GammaGrid":
        parts = text.split(":")
        if len(parts) not in (3, 4):
            raise ConfigError(f"gamma grid must be start:stop:count[:lin|log], got {text!r}")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"bad gamma grid {text!r}: {exc}") from None
        return cls(start, stop, count, parts[3] if len(parts) == 4 else "log")

    def values(self) -> np.ndarray:
        if self.count < 1:
            raise ConfigError("gamma grid count must be at least 1")
        if self.spacing == "lin":
            return np.linspace(self.start, self.stop, self.count)
        if self.spacing == "log":
            if not 0 < self.start <= self.stop:
                raise ConfigError("log gamma grid needs 0 < start <= stop")
            return np.geomspace(self.start, self.stop, self.count)
        raise ConfigError(f"gamma grid spacing must be lin or log, got {self.spacing!r}")

    def __str__(self) -> str:
        return f"{self.start!r}:{self.stop!r}:{self.count}:{self.spacing}"


DEFAULT_SWEEP = GammaGrid(0.05, 100.0, 40, "log")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one run.

    ``mu=None`` (or ``"scan"``) requests a scan over ``mu_scan``.  In ``free_space`` mode
    ``eta`` is the impurity charge (``-2`` for helium), ``gamma`` is
    ignored and ``mu`` defaults to 3.  ``R=None`` picks the radius from
    :func:`hyldot.wavefunction.default_radius`.
    """

    mode: str = "scaled_dot"
    eta: float = -0.4
    gamma: float = 1.0
    gamma_grid: GammaGrid | None = None
    state: str = "singlet"
    sz: int = 1
    omega: int = 12
    mu: float | None = None
    mu_scan: tuple[float, float] = (0.05, 200.0)
    R: float | None = None
    nmax: int = 300
    lmax: int = 4
    Q: int = DEFAULT_QUAD
    out: str | None = None
    format: str = "csv"
    cache_dir: str | None = None
    precision: str = "double"
    jobs: int = 1

    def __post_init__(self):
        if self.mu == "scan":
            object.__setattr__(self, "mu", None)
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.state not in STATES:
            raise ConfigError(f"state must be one of {STATES}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.precision not in PRECISIONS:
            raise ConfigError(f"precision must be one of {PRECISIONS}")
        if self.sz not in (-1, 0, 1):
            raise ConfigError("sz must be -1, 0 or 1")
        if self.mode == "scaled_dot" and self.gamma < 0:
            raise ConfigError("gamma must be non-negative")
        if self.omega < 1:
            raise ConfigError("omega must be at least 1")
        if self.mu is not None and not self.mu > 0:
            raise ConfigError("mu must be positive")
        lo, hi = self.mu_scan
        if not 0 < lo < hi:
            raise ConfigError("mu scan range must satisfy 0 < lo < hi")
        if self.R is not None and not self.R > 0:
            raise ConfigError("R must be positive")
        if self.nmax < 1 or self.lmax < 0 or self.Q < self.lmax + 1:
            raise ConfigError("need nmax >= 1, lmax >= 0 and Q >= lmax + 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.gamma_grid is not None:
            self.gamma_grid.values()

    @property
    def parity(self) -> str:
        return "even" if self.state == "singlet" else "odd"

    @property
    def params(self) -> ModelParams:
        if self.mode == "free_space":
            return ModelParams.free_space(self.eta)
        return ModelParams.scaled_dot(self.eta, self.gamma)

    def effective_mu(self) -> float | None:
        if self.mu is None and self.mode == "free_space":
            return FREE_SPACE_MU
        return self.mu

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


# --- config files -----------------------------------------------------------

_FIELD_TYPES = {
    "mode": str, "eta": float, "gamma": float, "state": str, "sz": int, "omega": int,
    "R": float, "nmax": int, "lmax": int, "Q": int, "out": str, "format": str,
    "cache_dir": str, "precision": str, "jobs": int,
}
_ALIASES = {"quad": "Q", "s_z": "sz", "n_max": "nmax", "l_max": "lmax", "cache-dir": "cache_dir"}


def coerce_setting(key: str, value: str) -> tuple[str, Any]:
    """Convert one textual ``key = value`` setting to a RunConfig field."""
    key = _ALIASES.get(key, key).replace("-", "_")
    try:
        if key == "gamma_grid":
            return key, GammaGrid.parse(value)
        if key == "mu":
            return key, "scan" if value.strip() == "scan" else float(value)
        if key == "mu_scan":
            lo, hi = value.split(":")
            return key, (float(lo), float(hi))
        if key in _FIELD_TYPES:
            return key, _FIELD_TYPES[key](value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None
    raise ConfigError(f"unknown setting {key!r}")


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        k, v = coerce_setting(key, value)
        out[k] = v
    return out


def load_config_file(path: str | os.PathLike) -> dict[str, Any]:
    try:
        return parse_config_text(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None


def build_config(defaults: dict | None = None, file_settings: dict | None = None, flags: dict | None = None) -> RunConfig:
    """Merge settings with precedence flags > file > defaults."""
    merged: dict[str, Any] = {}
    for layer in (defaults, file_settings, flags):
        merged.update({k: v for k, v in (layer or {}).items() if v is not None})
    try:
        return RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# --- records and the result cache -------------------------------------------

@dataclass
class RunRecord:
    """One computed point; ``None`` marks fields that do not apply."""

    mode: str
    eta: float
    gamma: float
    state: str
    sz: int | None
    omega: int
    mu: float | None = None
    energy: float | None = None
    S_vN: float | None = None
    L: float | None = None
    trunc_defect: float | None = None
    residual: float | None = None
    cond_S: float | None = None
    R: float | None = None
    nmax: int | None = None
    lmax: int | None = None
    Q: int | None = None
    wall_time: float = 0.0
    error: str | None = None
    extras: dict = field(default_factory=dict)

    def row(self) -> dict[str, Any]:
        return {k: getattr(self, k) for k in RECORD_COLUMNS}

    def numeric_fields(self) -> dict[str, Any]:
        """All fields except the wall time."""
        d = self.row()
        d.pop("wall_time")
        return d


_RECORD_TYPES = {
    "mode": str, "state": str, "error": str, "sz": int, "omega": int, "nmax": int, "lmax": int, "Q": int,
}


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records: Sequence[RunRecord]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=RECORD_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow({k: _format_value(v) for k, v in rec.row().items()})
    return buf.getvalue()


def records_from_csv(text: str) -> list[RunRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        values = {}
        for k in RECORD_COLUMNS:
            raw = row[k]
            values[k] = None if raw == "" else _RECORD_TYPES.get(k, float)(raw)
        values["wall_time"] = values["wall_time"] or 0.0
        out.append(RunRecord(**values))
    return out


def records_to_json(records: Sequence[RunRecord]) -> str:
    return json.dumps([rec.row() for rec in records], indent=2)


def records_from_json(text: str) -> list[RunRecord]:
    data = json.loads(text)
    if isinstance(data, dict):
        data = [data]
    return [RunRecord(**{k: d.get(k) for k in RECORD_COLUMNS}) for d in data]


def format_records(records: Sequence[RunRecord], fmt: str) -> str:
    return records_to_csv(records) if fmt == "csv" else records_to_json(records)


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


class ResultCache:
    """Content-addressed store: one JSON record per run key under ``<base>/results``."""

    def __init__(self, base: str | os.PathLike | None = None):
        self.root = (Path(base) if base else cache_dir()) / "results"

    @staticmethod
    def key(kind: str, config: RunConfig) -> str:
        payload = {
            "v": _CACHE_VERSION,
            "kind": kind,
            "mode": config.mode,
            "eta": config.eta,
            "gamma": config.gamma if config.mode == "scaled_dot" else None,
            "state": config.state,
            "sz": config.sz if config.state == "triplet" else None,
            "omega": config.omega,
            "mu": config.effective_mu(),
            "mu_scan": list(config.mu_scan) if config.effective_mu() is None else None,
            "precision": config.precision,
        }
        if kind == "entropy":
            payload.update(R=config.R, nmax=config.nmax, lmax=config.lmax, Q=config.Q)
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> RunRecord | None:
        p = self.path(key)
        if not p.exists():
            return None
        try:
            data = json.loads(p.read_text())
            record = records_from_json(json.dumps(data["record"]))[0]
            record.extras = data["extras"]
            return record
        except (OSError, ValueError, TypeError, KeyError):
            log.warning("ignoring unreadable cache entry %s", p)
            return None

    def put(self, key: str, record: RunRecord) -> None:
        if record.error is None:
            payload = {"record": record.row(), "extras": record.extras}
            atomic_write(self.path(key), json.dumps(payload, indent=2))


# --- commands ---------------------------------------------------------------

def _solve(config: RunConfig):
    mu = config.effective_mu()
    params = config.params
    if mu is None:
        mu = optimize_mu(params, config.omega, config.mu_scan, config.parity).mu
    return solve_state(BasisSet(config.omega, config.parity, mu), params, config.precision)


def _base_record(config: RunConfig) -> RunRecord:
    return RunRecord(
        mode=config.mode,
        eta=config.eta,
        gamma=config.gamma if config.mode == "scaled_dot" else 1.0,
        state=config.state,
        sz=config.sz if config.state == "triplet" else None,
        omega=config.omega,
    )


def run_energy(config: RunConfig) -> RunRecord:
    """Solve one state and record the energy with its diagnostics."""
    start = time.perf_counter()
    state = _solve(config)
    rec = _base_record(config)
    rec.mu = state.basis.mu
    rec.energy = state.energy
    rec.residual = state.residual
    rec.cond_S = state.condition
    rec.wall_time = time.perf_counter() - start
    return rec


def run_entropy(config: RunConfig) -> RunRecord:
    """Solve, expand in partial waves and compute the entropies."""
    start = time.perf_counter()
    state = _solve(config)
    R = config.R if config.R is not None else default_radius(state)
    report = entropy_report(state, R, config.nmax, config.lmax, config.Q, config.sz)
    rec = _base_record(config)
    rec.mu = state.basis.mu
    rec.energy = state.energy
    rec.residual = state.residual
    rec.cond_S = state.condition
    rec.S_vN = report.S_vN
    rec.L = report.L
    rec.trunc_defect = report.spectrum.truncation_defect
    rec.R, rec.nmax, rec.lmax, rec.Q = R, config.nmax, config.lmax, config.Q
    rec.extras["occupancies"] = [lam[:4].tolist() for lam in report.spectrum.per_l]
    rec.wall_time = time.perf_counter() - start
    return rec


_RUNNERS = {"energy": run_energy, "entropy": run_entropy}


def cached_run(kind: str, config: RunConfig, cache: ResultCache | None = None) -> RunRecord:
    """Run through the result cache; a hit returns the stored record."""
    cache = cache or ResultCache(config.cache_dir)
    key = ResultCache.key(kind, config)
    hit = cache.get(key)
    if hit is not None:
        return hit
    rec = _RUNNERS[kind](config)
    try:
        cache.put(key, rec)
    except OSError as exc:
        log.warning("could not write result cache: %s", exc)
    return rec


def _sweep_point(args: tuple[str, RunConfig, bool]) -> RunRecord:
    kind, config, use_cache = args
    try:
        return cached_run(kind, config) if use_cache else _RUNNERS[kind](config)
    except (NumericalError, ArithmeticError, ValueError) as exc:
        rec = _base_record(config)
        rec.error = f"{type(exc).__name__}: {exc}"
        return rec


def run_sweep(config: RunConfig, kind: str = "entropy", use_cache: bool = True) -> list[RunRecord]:
    """One record per gamma grid point, in grid order.

    Points run independently (``config.jobs`` worker processes); a failing
    point yields a record with ``error`` set and the sweep continues.
    """
    grid = config.gamma_grid or DEFAULT_SWEEP
    points = [(kind, config.replace(gamma=float(g), gamma_grid=None), use_cache) for g in grid.values()]
    # warm the operator cache once instead of once per worker
    reduced_operators(config.omega, config.parity)
    if config.jobs == 1 or len(points) == 1:
        return [_sweep_point(p) for p in points]
    with ProcessPoolExecutor(max_workers=config.jobs) as pool:
        return list(pool.map(_sweep_point, points))


def run_table1(omega: int = 14, quad_order: int = DEFAULT_QUAD) -> list[dict]:
    """Linear-entropy convergence grid for free-space helium at mu = 3, R = 7.5.

    Each row carries the reference value and its absolute deviation.
    """
    state = solve_state(BasisSet(omega, "even", FREE_SPACE_MU), ModelParams.free_space(-2.0))
    rows = convergence_table(state, FREE_SPACE_RADIUS, [0, 1], [100, 200, 300], quad_order)
    for row in rows:
        ref = TABLE1_REFERENCE[(row["l_max"], row["n_max"])]
        row["reference"] = ref
        row["deviation"] = abs(row["L_ap"] - ref)
        row["ok"] = row["deviation"] <= TABLE1_TOL
    return rows


@dataclass(frozen=True)
class GammaCRecord:
    eta: float
    omega: int
    gamma_c: float
    bracket_lo: float
    bracket_hi: float
    g_lo: float
    g_hi: float
    tol: float
    iterations: int
    zero_point: bool
    wall_time: float

    def row(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def run_gamma_c(
    eta: float = -2.0,
    omega: int = 8,
    bracket: tuple[float, float] = (0.1, 5.0),
    tol: float = 1e-4,
    zero_point: bool = False,
    mu_scan: tuple[float, float] = (0.05, 200.0),
) -> GammaCRecord:
    """Ionization threshold with the two-electron energy minimized over mu."""
    if not eta < 0:
        raise ConfigError("the ionization threshold needs an attractive impurity (eta < 0)")
    start = time.perf_counter()

    def two_electron(gamma: float) -> float:
        return optimize_mu(ModelParams.scaled_dot(eta, gamma), omega, mu_scan).energy

    res = ionization_threshold(eta, two_electron, bracket, tol, zero_point)
    return GammaCRecord(
        eta, omega, res.gamma_c, res.bracket[0], res.bracket[1], res.g_bracket[0], res.g_bracket[1],
        tol, res.iterations, zero_point, time.perf_counter() - start,
    )


def run_mu_scan(config: RunConfig) -> list[dict]:
    """Energy on the scan grid plus the refined optimum (last row)."""
    scan = optimize_mu(config.params, config.omega, config.mu_scan, config.parity)
    rows = [dict(mu=float(m), energy=float(e), optimum=False) for m, e in zip(scan.grid, scan.grid_energies)]
    rows.append(dict(mu=scan.mu, energy=scan.energy, optimum=True))
    return rows


def rows_to_text(rows: Iterable[dict], fmt: str) -> str:
    rows = list(rows)
    if fmt == "json":
        return json.dumps(rows, indent=2)
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format_value(v) for k, v in row.items()})
    return buf.getvalue()
