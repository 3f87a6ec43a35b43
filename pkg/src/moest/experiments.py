"""Monte Carlo harness: SNR, path-count and rank-mismatch sweeps.

Every trial owns an RNG stream derived from (seed, sweep point, trial), so
runs are bit-reproducible regardless of execution order or worker count.
Rows are sorted canonically before writing.
"""

from __future__ import annotations

import csv
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channel import ArrayGeometry, sample_paths, synthesize_channel
from .errors import ParameterError
from .estimators import alt_ls, mo_est, nmse_cascaded
from .protocol import make_training_setup, synthesize_observations
from .solver import CgMoConfig

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "run_snr_sweep",
    "run_path_sweep",
    "run_mismatch_sweep",
    "write_csv",
    "read_csv",
    "load_config",
    "summarize",
]

ALGORITHMS = ("mo-est", "alt-ls")
CSV_HEADER = (
    "algorithm",
    "snr_db",
    "C",
    "C_hat",
    "trial",
    "nmse",
    "nmse_db",
    "outer_iters",
    "seconds",
)


@dataclass
class ExperimentConfig:
    """Dimensions, noise points and solver settings of one experiment."""

    n_r: int = 16
    n_t: int = 36
    n_i: int = 64
    blocks: int | None = None  # B, defaults to n_i
    pilot_len: int | None = None  # T, defaults to n_t
    paths: tuple[int, ...] = (3,)  # true C (one per sweep point for path sweeps)
    assumed_paths: tuple[int, ...] | None = None  # rank constraints, default C
    snr_db_list: tuple[float, ...] = (0.0, 5.0, 10.0)
    trials: int = 10
    algorithms: tuple[str, ...] = ALGORITHMS
    seed: int = 0
    mode: str = "model"
    restarts: int = 1
    noiseless: bool = False
    epsilon: float = 1e-3
    outer_epsilon: float = 1e-3
    max_iterations: int = 500
    outer_max_iterations: int = 50
    workers: int = 1
    timing: bool = False  # wall-clock seconds break byte-reproducibility

    def __post_init__(self):
        if self.blocks is None:
            self.blocks = self.n_i
        if self.pilot_len is None:
            self.pilot_len = self.n_t
        if self.mode == "end_to_end":
            self.mode = "e2e"
        self.paths = tuple(int(c) for c in self.paths)
        if self.assumed_paths is not None:
            self.assumed_paths = tuple(int(c) for c in self.assumed_paths)
        self.snr_db_list = tuple(float(s) for s in self.snr_db_list)
        self.algorithms = tuple(self.algorithms)
        self.validate()

    def validate(self):
        for name in ("n_r", "n_t", "n_i", "trials", "restarts", "workers"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")
        if self.seed < 0:
            raise ParameterError("seed must be nonnegative")
        if self.blocks > self.n_i:
            raise ParameterError("blocks must not exceed n_i")
        if self.pilot_len < self.n_t:
            raise ParameterError("pilot_len must be at least n_t")
        if not self.snr_db_list:
            raise ParameterError("snr_db_list must be non-empty")
        if not self.algorithms:
            raise ParameterError("algorithms must be non-empty")
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise ParameterError(f"algorithms must be a subset of {ALGORITHMS}")
        if self.mode not in ("model", "e2e"):
            raise ParameterError("mode must be 'model' or 'e2e'")
        max_rank = min(self.n_r, self.n_t, self.n_i)
        for name in ("paths", "assumed_paths"):
            values = getattr(self, name)
            for c in values or ():
                if not 1 <= c <= max_rank:
                    raise ParameterError(
                        f"{name} entry {c} outside the identifiable range "
                        f"[1, {max_rank}]"
                    )
        if self.epsilon <= 0 or self.outer_epsilon <= 0:
            raise ParameterError("epsilon and outer_epsilon must be positive")
        if self.max_iterations < 1 or self.outer_max_iterations < 1:
            raise ParameterError("iteration caps must be >= 1")

    @property
    def solver(self) -> CgMoConfig:
        return CgMoConfig(epsilon=self.epsilon, max_iterations=self.max_iterations)

    def single_paths(self) -> int:
        if len(self.paths) != 1:
            raise ParameterError("paths must be a single value for this sweep")
        return self.paths[0]


@dataclass(frozen=True)
class ResultRow:
    """One (algorithm, sweep point, trial) outcome."""

    algorithm: str
    snr_db: float
    c: int
    c_hat: int
    trial: int
    nmse: float
    nmse_db: float
    outer_iters: int
    seconds: float


def _sigma2(config: ExperimentConfig, snr_db: float) -> float:
    if config.noiseless:
        return 0.0
    return 10.0 ** (-snr_db / 10.0)


def _run_trial(task) -> list[ResultRow]:
    """One Monte Carlo trial: fresh channels, observations, all algorithms."""
    config, c_true, c_hat, snr_db, trial, stream_key = task
    streams = np.random.SeedSequence(stream_key).spawn(4)
    rng_channel, rng_obs, rng_mo, rng_alt = map(np.random.default_rng, streams)

    ue = ArrayGeometry.near_square(config.n_r)
    bs = ArrayGeometry.near_square(config.n_t)
    irs = ArrayGeometry.near_square(config.n_i)
    h_r = synthesize_channel(sample_paths(c_true, rng_channel), rx=ue, tx=irs)
    h_p = synthesize_channel(sample_paths(c_true, rng_channel), rx=irs, tx=bs)
    setup = make_training_setup(config.blocks, config.pilot_len, config.n_i, config.n_t)
    obs = synthesize_observations(
        h_r, h_p, setup, _sigma2(config, snr_db), rng_obs, config.mode
    )

    rows = []
    for algo in config.algorithms:
        start = time.perf_counter()
        if algo == "mo-est":
            report = mo_est(
                obs,
                P=c_hat,
                Q=c_hat,
                cfg=config.solver,
                outer_epsilon=config.outer_epsilon,
                rng=rng_mo,
                restarts=config.restarts,
                max_outer_iterations=config.outer_max_iterations,
            )
        else:
            report = alt_ls(
                obs,
                iterations=config.outer_max_iterations,
                rng=rng_alt,
                epsilon=config.outer_epsilon,
            )
        seconds = time.perf_counter() - start if config.timing else 0.0
        nmse = nmse_cascaded(h_r, h_p, report.hr_hat, report.hp_hat)
        nmse_db = 10.0 * math.log10(nmse) if nmse > 0.0 else float("-inf")
        rows.append(
            ResultRow(
                algorithm=algo,
                snr_db=snr_db,
                c=c_true,
                c_hat=c_hat,
                trial=trial,
                nmse=nmse,
                nmse_db=nmse_db,
                outer_iters=report.outer_iterations,
                seconds=seconds,
            )
        )
    return rows


def _execute(config: ExperimentConfig, tasks: list) -> list[ResultRow]:
    if config.workers > 1 and len(tasks) > 1:
        ctx = multiprocessing.get_context("spawn")
        chunk = max(1, len(tasks) // (config.workers * 4))
        with ProcessPoolExecutor(max_workers=config.workers, mp_context=ctx) as pool:
            batches = list(pool.map(_run_trial, tasks, chunksize=chunk))
    else:
        batches = [_run_trial(t) for t in tasks]
    rows = [row for batch in batches for row in batch]
    rows.sort(key=lambda r: (r.c, r.c_hat, r.snr_db, r.trial, r.algorithm))
    return rows


def _assumed(config: ExperimentConfig) -> int:
    choices = config.assumed_paths
    if choices is None:
        return config.single_paths()
    if len(choices) != 1:
        raise ParameterError("assumed_paths must be a single value for this sweep")
    return choices[0]


def run_snr_sweep(config: ExperimentConfig) -> list[ResultRow]:
    """Fresh channels per (SNR, trial); both algorithms on the same data."""
    c_true = config.single_paths()
    c_hat = _assumed(config)
    tasks = [
        (config, c_true, c_hat, snr, t, (config.seed, 0, si, t))
        for si, snr in enumerate(config.snr_db_list)
        for t in range(config.trials)
    ]
    return _execute(config, tasks)


def run_path_sweep(
    config: ExperimentConfig, c_list: tuple[int, ...] | None = None
) -> list[ResultRow]:
    """Sweep the true path count; the rank constraint follows it."""
    c_list = tuple(c_list) if c_list is not None else config.paths
    probe = replace(config, paths=c_list)  # reuse range validation
    tasks = [
        (config, c, c, snr, t, (config.seed, ci + 1, si, t))
        for ci, c in enumerate(probe.paths)
        for si, snr in enumerate(config.snr_db_list)
        for t in range(config.trials)
    ]
    return _execute(config, tasks)


def run_mismatch_sweep(
    config: ExperimentConfig, c_hat_list: tuple[int, ...] | None = None
) -> list[ResultRow]:
    """Fix the true path count, sweep the assumed one.

    Channels and noise are shared across the assumed values of a trial
    (the stream key ignores c_hat), so algorithms that ignore the rank
    constraint produce identical rows for every assumed value.
    """
    c_true = config.single_paths()
    if c_hat_list is None:
        if config.assumed_paths is None:
            raise ParameterError("assumed_paths required for a mismatch sweep")
        c_hat_list = config.assumed_paths
    probe = replace(config, assumed_paths=tuple(c_hat_list))
    tasks = [
        (config, c_true, c_hat, snr, t, (config.seed, 0, si, t))
        for c_hat in probe.assumed_paths
        for si, snr in enumerate(config.snr_db_list)
        for t in range(config.trials)
    ]
    return _execute(config, tasks)


def write_csv(rows: list[ResultRow], path: str):
    """Write rows with the canonical header; floats keep full precision."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in rows:
                writer.writerow(
                    [
                        r.algorithm,
                        repr(r.snr_db),
                        r.c,
                        r.c_hat,
                        r.trial,
                        repr(r.nmse),
                        repr(r.nmse_db),
                        r.outer_iters,
                        repr(r.seconds),
                    ]
                )
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path: str) -> list[ResultRow]:
    """Parse a file produced by :func:`write_csv`."""
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = tuple(next(reader))
            if header != CSV_HEADER:
                raise ParameterError(f"unexpected CSV header in {path}: {header}")
            return [
                ResultRow(
                    algorithm=rec[0],
                    snr_db=float(rec[1]),
                    c=int(rec[2]),
                    c_hat=int(rec[3]),
                    trial=int(rec[4]),
                    nmse=float(rec[5]),
                    nmse_db=float(rec[6]),
                    outer_iters=int(rec[7]),
                    seconds=float(rec[8]),
                )
                for rec in reader
                if rec
            ]
    except OSError as exc:
        raise OSError(f"cannot read CSV from {path}: {exc}") from exc


def summarize(
    rows: list[ResultRow], x_field: str = "snr_db"
) -> list[tuple[str, float, float, float]]:
    """Mean linear NMSE (and its dB value) per (algorithm, sweep point)."""
    groups: dict[tuple[str, float], list[float]] = {}
    for r in rows:
        groups.setdefault((r.algorithm, getattr(r, x_field)), []).append(r.nmse)
    out = []
    for (algo, x), values in sorted(groups.items()):
        mean = sum(values) / len(values)
        mean_db = 10.0 * math.log10(mean) if mean > 0.0 else float("-inf")
        out.append((algo, x, mean, mean_db))
    return out


# --- config file handling ---------------------------------------------------

def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ParameterError(f"expected a boolean, got {text!r}")


def parse_dims(text: str) -> tuple[int, int, int]:
    """Parse an NrxNtxNi triple such as ``16x36x64``."""
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise ParameterError(f"dims must look like 16x36x64, got {text!r}")
    return tuple(int(p) for p in parts)


def parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in str(text).split(","))


def parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in str(text).split(","))


def parse_algo_list(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in str(text).split(","))


_FILE_PARSERS = {
    "dims": parse_dims,
    "blocks": int,
    "pilot_len": int,
    "paths": parse_int_list,
    "assumed_paths": parse_int_list,
    "snr": parse_float_list,
    "trials": int,
    "algo": parse_algo_list,
    "seed": int,
    "mode": str,
    "restarts": int,
    "noiseless": _parse_bool,
    "epsilon": float,
    "outer_epsilon": float,
    "max_iterations": int,
    "outer_max_iterations": int,
    "workers": int,
    "timing": _parse_bool,
}


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path, encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ParameterError(
                        f"{path}:{lineno}: expected key=value, got {line!r}"
                    )
                key, text = (part.strip() for part in line.split("=", 1))
                if key not in _FILE_PARSERS:
                    raise ParameterError(f"{path}:{lineno}: unknown config key '{key}'")
                values[key] = _FILE_PARSERS[key](text)
    except OSError as exc:
        raise OSError(f"cannot read config file {path}: {exc}") from exc
    return values


def load_config(path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from an optional key=value file plus overrides.

    Override values (typically parsed command-line flags) win over file
    values; both use the flag vocabulary (``dims``, ``snr``, ``algo``, ...).
    """
    values = _read_config_file(path) if path else {}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FILE_PARSERS:
            raise ParameterError(f"unknown config key '{key}'")
        values[key] = value

    kwargs = {}
    if "dims" in values:
        kwargs["n_r"], kwargs["n_t"], kwargs["n_i"] = values.pop("dims")
    renames = {"snr": "snr_db_list", "algo": "algorithms"}
    for key, value in values.items():
        kwargs[renames.get(key, key)] = value
    if kwargs.get("noiseless") and "snr_db_list" not in kwargs:
        kwargs["snr_db_list"] = (float("inf"),)
    return ExperimentConfig(**kwargs)
