"""Right-censored survival datasets: containers, CSV I/O, risk-set
preprocessing, and the synthetic data generator used by the benchmarks.

A dataset holds follow-up times Z_i > 0, event indicators delta_i in {0,1}
and an n x p covariate matrix. The simulator draws failure times from an
exponential hazard exp(beta' x) (baseline hazard fixed at 1) and censoring
times from an exponential whose mean is U * exp(beta' x) with U uniform on
a configurable window.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, CsvParseError, DataError

__all__ = [
    "SurvivalDataset",
    "RiskSetCache",
    "SimulationConfig",
    "Independent",
    "ConstantCorrelation",
    "Autoregressive",
    "ConstantSignal",
    "DecayingSignal",
    "generate_covariates",
    "simulate_dataset",
    "build_risk_cache",
    "censoring_rate",
    "load_csv",
    "save_csv",
]


# ------------------------------------------------------------------ designs

@dataclass(frozen=True)
class Independent:
    name = "independent"


@dataclass(frozen=True)
class ConstantCorrelation:
    rho: float
    name = "constant_correlation"


@dataclass(frozen=True)
class Autoregressive:
    rho: float
    name = "autoregressive"


Design = Union[Independent, ConstantCorrelation, Autoregressive]


@dataclass(frozen=True)
class ConstantSignal:
    value: float


@dataclass(frozen=True)
class DecayingSignal:
    values: tuple

    def __init__(self, values: Sequence[float]):
        object.__setattr__(self, "values", tuple(float(v) for v in values))


Signal = Union[ConstantSignal, DecayingSignal]


def _check_rho(design: Design) -> None:
    if isinstance(design, (ConstantCorrelation, Autoregressive)):
        if not (0.0 <= design.rho < 1.0):
            raise ConfigError(f"correlation rho must lie in [0, 1), got {design.rho}")


# ----------------------------------------------------------------- dataset

class SurvivalDataset:
    """Immutable container of right-censored observations.

    Zero-event datasets are constructible (so censored-only files load);
    fitting code rejects them separately.
    """

    def __init__(self, times, status, covariates):
        times = np.ascontiguousarray(times, dtype=np.float64)
        status = np.ascontiguousarray(status)
        covariates = np.ascontiguousarray(covariates, dtype=np.float64)
        if covariates.ndim != 2:
            raise DataError("covariates must be a 2-d array")
        n = covariates.shape[0]
        if times.shape != (n,) or status.shape != (n,):
            raise DataError(
                f"length mismatch: {times.shape[0]} times, {status.shape[0]} "
                f"status, {n} covariate rows"
            )
        if n == 0:
            raise DataError("empty dataset")
        if not np.all(np.isfinite(times)) or np.any(times <= 0):
            raise DataError("times must be finite and strictly positive")
        status_f = np.asarray(status, dtype=np.float64)
        if not np.all(np.isfinite(status_f)) or not np.all(np.isin(status_f, (0.0, 1.0))):
            raise DataError("status entries must be 0 or 1")
        if not np.all(np.isfinite(covariates)):
            raise DataError("covariates contain non-finite values")
        self.times = times
        self.status = status_f.astype(np.int8)
        self.covariates = covariates
        self.times.setflags(write=False)
        self.status.setflags(write=False)
        self.covariates.setflags(write=False)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.status.sum())

    def subset(self, rows) -> "SurvivalDataset":
        rows = np.asarray(rows, dtype=np.intp)
        return SurvivalDataset(self.times[rows], self.status[rows],
                               self.covariates[rows])

    def __repr__(self):
        return (f"SurvivalDataset(n={self.n}, p={self.p}, "
                f"events={self.n_events})")


@dataclass(frozen=True)
class RiskSetCache:
    """Time-ordered index structure backing the partial-likelihood sums.

    order sorts subjects by descending time, so the risk set of any event
    time is a prefix of order. event_groups lists (time, event indices at
    that exact time) in ascending time; tied events share one group
    (Breslow convention).
    """

    order: np.ndarray                 # permutation, descending times
    event_groups: tuple               # ((time, indices), ...) ascending time
    tie_counts: np.ndarray            # events per group
    risk_sizes: np.ndarray            # |{j : t_j >= group time}| per group


def build_risk_cache(dataset: SurvivalDataset) -> RiskSetCache:
    times = dataset.times
    order = np.argsort(-times, kind="stable").astype(np.intp)
    event_idx = np.flatnonzero(dataset.status == 1)
    groups = []
    if event_idx.size:
        ev_times = times[event_idx]
        asc = np.argsort(ev_times, kind="stable")
        ev_idx_sorted = event_idx[asc]
        ev_times_sorted = ev_times[asc]
        boundaries = np.flatnonzero(np.diff(ev_times_sorted) != 0)
        starts = np.concatenate(([0], boundaries + 1))
        ends = np.concatenate((boundaries + 1, [ev_times_sorted.size]))
        for s, e in zip(starts, ends):
            groups.append((float(ev_times_sorted[s]), ev_idx_sorted[s:e].copy()))
    tie_counts = np.array([len(ix) for _, ix in groups], dtype=np.intp)
    group_times = np.array([t for t, _ in groups], dtype=np.float64)
    # times >= t counted on the ascending-sorted array
    sorted_asc = np.sort(times)
    risk_sizes = dataset.n - np.searchsorted(sorted_asc, group_times, side="left")
    return RiskSetCache(order=order, event_groups=tuple(groups),
                        tie_counts=tie_counts,
                        risk_sizes=risk_sizes.astype(np.intp))


def censoring_rate(dataset: SurvivalDataset) -> float:
    return float(1.0 - dataset.status.mean())


# --------------------------------------------------------------- simulator

@dataclass(frozen=True)
class SimulationConfig:
    n: int
    p: int
    s: int
    signal: Signal = ConstantSignal(0.8)
    design: Design = Independent()
    censoring_low: float = 2.0
    censoring_high: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ConfigError("n and p must be positive")
        if not (1 <= self.s <= self.p):
            raise ConfigError(f"support size s={self.s} must satisfy 1 <= s <= p={self.p}")
        if isinstance(self.signal, DecayingSignal) and len(self.signal.values) != self.s:
            raise ConfigError("decaying signal must supply exactly s values")
        if not self.censoring_low < self.censoring_high:
            raise ConfigError("censoring window must satisfy low < high")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        _check_rho(self.design)

    def true_beta(self) -> np.ndarray:
        beta = np.zeros(self.p)
        if isinstance(self.signal, ConstantSignal):
            beta[: self.s] = self.signal.value
        else:
            beta[: self.s] = self.signal.values
        return beta


def generate_covariates(design: Design, n: int, p: int, seed) -> np.ndarray:
    """Draw n i.i.d. rows from N(0, Sigma) with Sigma set by the design.

    Constant correlation uses the one-factor form x = sqrt(rho) z 1 +
    sqrt(1-rho) eps; autoregressive uses the lag-one recursion
    x_j = rho x_{j-1} + sqrt(1-rho^2) eps_j, so every marginal is exactly
    standard normal.
    """
    if n < 1 or p < 1:
        raise ConfigError("n and p must be positive")
    _check_rho(design)
    rng = np.random.default_rng(seed)
    if isinstance(design, Independent):
        return rng.standard_normal((n, p))
    if isinstance(design, ConstantCorrelation):
        rho = design.rho
        z = rng.standard_normal((n, 1))
        eps = rng.standard_normal((n, p))
        return np.sqrt(rho) * z + np.sqrt(1.0 - rho) * eps
    rho = design.rho
    eps = rng.standard_normal((n, p))
    x = np.empty((n, p))
    x[:, 0] = eps[:, 0]
    scale = np.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        x[:, j] = rho * x[:, j - 1] + scale * eps[:, j]
    return x


def simulate_dataset(config: SimulationConfig):
    """Simulate one dataset; returns (SurvivalDataset, true_beta).

    Failure times are Exponential with rate exp(beta' x); censoring times
    are Exponential with mean U_i exp(beta' x), U_i ~ Uniform[low, high].
    Draw order is fixed (covariates, T, U, C) so a seed pins the bytes.
    """
    beta = config.true_beta()
    x = generate_covariates(config.design, config.n, config.p, config.seed)
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), 1]))
    eta = x @ beta
    t_fail = rng.exponential(scale=np.exp(-eta))
    u = rng.uniform(config.censoring_low, config.censoring_high, size=config.n)
    t_cens = rng.exponential(scale=u * np.exp(eta))
    times = np.minimum(t_fail, t_cens)
    status = (t_fail <= t_cens).astype(np.int8)
    return SurvivalDataset(times, status, x), beta


# ------------------------------------------------------------------ CSV I/O

def _format(v: float) -> str:
    return repr(float(v))


def save_csv(dataset: SurvivalDataset, path, true_beta=None, seed=None) -> None:
    """Write `time,status,x1,...,xp`; optionally a `<stem>.truth.json`
    sidecar holding the generating coefficients and seed."""
    path = str(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("time,status," + ",".join(f"x{j+1}" for j in range(dataset.p)) + "\n")
        for i in range(dataset.n):
            row = [_format(dataset.times[i]), str(int(dataset.status[i]))]
            row.extend(_format(v) for v in dataset.covariates[i])
            fh.write(",".join(row) + "\n")
    if true_beta is not None:
        sidecar = truth_sidecar_path(path)
        payload = {"true_beta": [float(v) for v in true_beta],
                   "seed": None if seed is None else int(seed)}
        with open(sidecar, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
            fh.write("\n")


def truth_sidecar_path(csv_path) -> str:
    csv_path = str(csv_path)
    stem = csv_path[:-4] if csv_path.endswith(".csv") else csv_path
    return stem + ".truth.json"


def load_csv(path) -> SurvivalDataset:
    """Parse `time,status,x1,...,xp`. Errors name the offending data row
    (1-based, excluding the header)."""
    try:
        fh = open(str(path), "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        header = fh.readline()
        if not header:
            raise DataError(f"{path}: empty file")
        cols = [c.strip() for c in header.rstrip("\n").split(",")]
        if cols[:2] != ["time", "status"] or len(cols) < 3:
            raise DataError(f"{path}: header must be time,status,x1,...,xp")
        expected = ["time", "status"] + [f"x{j+1}" for j in range(len(cols) - 2)]
        if cols != expected:
            raise DataError(f"{path}: covariate columns must be x1..x{len(cols)-2} in order")
        p = len(cols) - 2
        times, status, rows = [], [], []
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != p + 2:
                raise CsvParseError(lineno, f"expected {p + 2} fields, got {len(parts)}")
            try:
                vals = [float(v) for v in parts]
            except ValueError:
                raise CsvParseError(lineno, "non-numeric field") from None
            if not all(np.isfinite(v) for v in vals):
                raise CsvParseError(lineno, "non-finite value")
            t, d = vals[0], vals[1]
            if t <= 0:
                raise CsvParseError(lineno, f"time must be > 0, got {t}")
            if d not in (0.0, 1.0):
                raise CsvParseError(lineno, f"status must be 0 or 1, got {d}")
            times.append(t)
            status.append(int(d))
            rows.append(vals[2:])
        if not times:
            raise DataError(f"{path}: no data rows")
    return SurvivalDataset(np.array(times), np.array(status), np.array(rows))
