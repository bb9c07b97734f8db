"""Distributed mean estimation: n clients compress, the server averages.

The server estimate of ``x_avg = mean_c x_c`` is the mean of the decoded
vectors, and a trial reports

* NMSE  ``||x_avg - xhat_avg||^2 / mean_c ||x_c||^2``
* vNMSE ``||x_c - xhat_c||^2 / ||x_c||^2`` for every client.

Trials are simulated in fixed-size chunks so thousands of encodes share one
vectorized call. Every row depends only on its own seeds, so results do not
depend on chunking or on the number of worker threads.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from drive import analytics, rng
from drive.analytics import Distribution
from drive.compressors import Scheme, decode_batch, encode_batch
from drive.quantizers import Algorithm, ScalePolicy
from drive.transforms import Family

MAX_REDRAWS = 10
# float64 words a chunk may hold; fixed so chunk boundaries never depend on the machine
CHUNK_BUDGET = 1 << 23
_VECTOR_TAG = 1 << 40

ALGORITHM_NAMES = {
    Algorithm.DRIVE: "drive",
    Algorithm.DRIVE_PLUS: "drive+",
    Algorithm.HADAMARD_SQ: "hsq",
    Algorithm.TERNGRAD: "terngrad",
}
ROTATION_NAMES = {Family.HADAMARD: "hadamard", Family.UNIFORM: "uniform"}

CSV_COLUMNS = (
    "algorithm",
    "rotation",
    "policy",
    "d",
    "n",
    "distribution",
    "mode",
    "trials",
    "mean_nmse",
    "stderr_nmse",
    "mean_vnmse",
    "stderr_vnmse",
    "encode_ms",
)


class InputMode(enum.Enum):
    SAME = "same"
    INDEPENDENT = "indep"


@dataclass(frozen=True)
class DmeConfig:
    n_clients: int
    dim: int
    algorithm: Algorithm = Algorithm.DRIVE
    rotation: Family | None = Family.HADAMARD
    policy: ScalePolicy | None = ScalePolicy.UNBIASED
    input_mode: InputMode = InputMode.SAME
    distribution: Distribution = Distribution.LOGNORMAL
    trials: int = 1000
    master_seed: int = 0
    scheme: Scheme = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_clients < 1:
            raise ValueError("n_clients must be positive")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        scheme = Scheme(self.algorithm, self.rotation, self.policy)
        object.__setattr__(self, "scheme", scheme)
        object.__setattr__(self, "algorithm", scheme.algorithm)
        object.__setattr__(self, "rotation", scheme.rotation)
        object.__setattr__(self, "policy", scheme.policy)
        object.__setattr__(self, "input_mode", InputMode(self.input_mode))
        object.__setattr__(self, "distribution", Distribution(self.distribution))

    def client_seed(self, trial: int, client: int) -> int:
        return rng.derive_seed(self.master_seed, trial, client)

    def trials_per_chunk(self) -> int:
        per_trial = self.n_clients * self.scheme.cost_per_row(self.dim)
        return max(1, CHUNK_BUDGET // per_trial)


@dataclass(frozen=True)
class TrialReport:
    mean_nmse: float
    stderr_nmse: float
    mean_vnmse: float
    stderr_vnmse: float
    trials: int
    wall_time_per_encode: float


def _vector_seed(cfg: DmeConfig, trial: int, j: int, attempt: int) -> int:
    return rng.derive_seed(cfg.master_seed, trial, _VECTOR_TAG + j, attempt)


def _draw_inputs(cfg: DmeConfig, trials: range) -> np.ndarray:
    """Client inputs for a run of trials, shape ``(T * n, d)``, trial-major.

    SameVector trials draw one vector and hand it to every client. A vector
    that comes out all zero is redrawn from the next attempt's seed.
    """
    k = 1 if cfg.input_mode is InputMode.SAME else cfg.n_clients
    ids = [(t, j) for t in trials for j in range(k)]
    x = analytics.sample_rows(cfg.distribution, [_vector_seed(cfg, t, j, 0) for t, j in ids], cfg.dim)
    for row in np.flatnonzero(~np.any(x, axis=1)):
        t, j = ids[row]
        for attempt in range(1, MAX_REDRAWS + 1):
            v = analytics.sample(cfg.distribution, _vector_seed(cfg, t, j, attempt), cfg.dim)
            if np.any(v):
                x[row] = v
                break
        else:
            raise RuntimeError(f"drew a zero vector {MAX_REDRAWS + 1} times in trial {t}")
    if k == 1:
        x = np.repeat(x, cfg.n_clients, axis=0)
    return x


def _run_chunk(cfg: DmeConfig, trials: range):
    """Per-trial NMSE ``(T,)``, vNMSE ``(T, n)`` and total encode seconds."""
    n, d = cfg.n_clients, cfg.dim
    x = _draw_inputs(cfg, trials)
    seeds = np.array([cfg.client_seed(t, c) for t in trials for c in range(n)], dtype=np.uint64)
    start = time.perf_counter()
    payload = encode_batch(x, cfg.scheme, seeds)
    elapsed = time.perf_counter() - start
    xhat = decode_batch(payload)

    x3 = x.reshape(len(trials), n, d)
    xhat3 = xhat.reshape(len(trials), n, d)
    sq = np.einsum("tcd,tcd->tc", x3, x3)
    diff = x3 - xhat3
    vnmse = np.einsum("tcd,tcd->tc", diff, diff) / sq
    mean_err = x3.mean(axis=1) - xhat3.mean(axis=1)
    nmse = np.einsum("td,td->t", mean_err, mean_err) / sq.mean(axis=1)
    return nmse, vnmse, elapsed


def run_trial(cfg: DmeConfig, trial_index: int) -> tuple[float, np.ndarray]:
    """NMSE of one trial and the vNMSE of each of its clients."""
    nmse, vnmse, _ = _run_chunk(cfg, range(trial_index, trial_index + 1))
    return float(nmse[0]), vnmse[0]


def trial_samples(cfg: DmeConfig, threads: int = 1):
    """All per-trial samples ``(nmse (T,), vnmse (T, n), encode seconds)`` in trial order."""
    step = cfg.trials_per_chunk()
    chunks = [range(s, min(cfg.trials, s + step)) for s in range(0, cfg.trials, step)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda r: _run_chunk(cfg, r), chunks))
    else:
        parts = [_run_chunk(cfg, r) for r in chunks]
    nmse = np.concatenate([p[0] for p in parts])
    vnmse = np.concatenate([p[1] for p in parts])
    return nmse, vnmse, sum(p[2] for p in parts)


def mean_and_stderr(samples) -> tuple[float, float]:
    """Exactly rounded mean and ``std(ddof=1) / sqrt(T)``; the stderr of one sample is 0."""
    v = [float(s) for s in np.ravel(samples)]
    mean = math.fsum(v) / len(v)
    if len(v) == 1:
        return mean, 0.0
    var = math.fsum((s - mean) ** 2 for s in v) / (len(v) - 1)
    return mean, math.sqrt(var / len(v))


def run_experiment(cfg: DmeConfig, threads: int = 1) -> TrialReport:
    nmse, vnmse, seconds = trial_samples(cfg, threads)
    mean_nmse, se_nmse = mean_and_stderr(nmse)
    # clients of one trial can be correlated (shared input), so the stderr uses per-trial means
    mean_vnmse = math.fsum(vnmse.ravel().tolist()) / vnmse.size
    _, se_vnmse = mean_and_stderr(vnmse.mean(axis=1))
    return TrialReport(mean_nmse, se_nmse, mean_vnmse, se_vnmse, cfg.trials, seconds / (cfg.trials * cfg.n_clients))


@dataclass(frozen=True)
class ScalingRow:
    n: int
    nmse: float
    stderr_nmse: float
    vnmse: float
    stderr_vnmse: float

    @property
    def ratio(self) -> float:
        """``nmse * n / vnmse``; 1 when averaging shrinks the error like 1/n."""
        return self.nmse * self.n / self.vnmse

    def within(self, k: float = 3.0) -> bool:
        """Is ``nmse`` within ``k`` combined standard errors of ``vnmse / n``?"""
        se = math.hypot(self.stderr_nmse, self.stderr_vnmse / self.n)
        return abs(self.nmse - self.vnmse / self.n) <= k * se


def nmse_scaling_check(cfg: DmeConfig, n_values, threads: int = 1) -> list[ScalingRow]:
    """Run ``cfg`` once per client count and compare the NMSE with vNMSE / n."""
    rows = []
    for n in n_values:
        rep = run_experiment(replace(cfg, n_clients=n), threads)
        rows.append(ScalingRow(n, rep.mean_nmse, rep.stderr_nmse, rep.mean_vnmse, rep.stderr_vnmse))
    return rows


def csv_row(cfg: DmeConfig, report: TrialReport) -> dict:
    return {
        "algorithm": ALGORITHM_NAMES[cfg.algorithm],
        "rotation": "none" if cfg.rotation is None else ROTATION_NAMES[cfg.rotation],
        "policy": "none" if cfg.policy is None else cfg.policy.value,
        "d": cfg.dim,
        "n": cfg.n_clients,
        "distribution": cfg.distribution.value,
        "mode": cfg.input_mode.value,
        "trials": report.trials,
        "mean_nmse": repr(report.mean_nmse),
        "stderr_nmse": repr(report.stderr_nmse),
        "mean_vnmse": repr(report.mean_vnmse),
        "stderr_vnmse": repr(report.stderr_vnmse),
        "encode_ms": f"{report.wall_time_per_encode * 1e3:.6f}",
    }


def write_csv(rows, out=None) -> str:
    """Write rows (dicts keyed by :data:`CSV_COLUMNS`) to ``out``; returns the text."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as f:
            f.write(text)
    return text
