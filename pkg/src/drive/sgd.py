"""Distributed least-squares gradient descent with compressed gradients.

Client ``c`` holds ``(A_c, b_c)`` and the global objective is the client
average of ``||A_c w - b_c||^2 / (2 m)``. Each round every client sends its
local gradient through a compressor, the server averages the decoded
gradients and takes one step. With error feedback a client adds its residual
before compressing and keeps what the compressor dropped:
``e_c <- (g_c + e_c) - decode(encode(g_c + e_c))``. The residual lives in the
original coordinates; rotation stays inside the compressor.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from drive import rng
from drive.compressors import Scheme, roundtrip_batch

ROWS_PER_CLIENT = 128
DIVERGENCE_FACTOR = 1e6


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class LeastSquaresShard:
    a: np.ndarray
    b: np.ndarray

    def gradient(self, w: np.ndarray) -> np.ndarray:
        return self.a.T @ (self.a @ w - self.b) / self.a.shape[0]

    def loss(self, w: np.ndarray) -> float:
        r = self.a @ w - self.b
        return float(r @ r) / (2.0 * self.a.shape[0])


def make_problem(n_clients: int, p: int, seed: int, m: int = ROWS_PER_CLIENT, noise: float = 0.5):
    """Gaussian design shards ``b = A w_true + noise``; returns ``(shards, w_true)``."""
    if n_clients < 1 or p < 1 or m < 1:
        raise ValueError("n_clients, p and m must be positive")
    if n_clients * m < p:
        raise ValueError("need at least p rows in total for a unique minimizer")
    w_true = rng.normals([rng.derive_seed(seed, 0)], p, rng.TAG_SAMPLE)[0]
    shards = []
    for c in range(n_clients):
        g = rng.normals([rng.derive_seed(seed, 1, c)], m * p + m, rng.TAG_SAMPLE)[0]
        a = g[: m * p].reshape(m, p)
        b = a @ w_true + noise * g[m * p :]
        shards.append(LeastSquaresShard(a, b))
    return shards, w_true


def global_loss(shards, w: np.ndarray) -> float:
    return math.fsum(s.loss(w) for s in shards) / len(shards)


def minimizer(shards) -> np.ndarray:
    """Exact minimizer of the global loss (equal shard sizes make it plain least squares)."""
    a = np.vstack([s.a for s in shards])
    b = np.concatenate([s.b for s in shards])
    w, *_ = np.linalg.lstsq(a, b, rcond=None)
    return w


@dataclass
class TrainingResult:
    losses: np.ndarray  # global loss after each round
    initial_loss: float
    vnmse: np.ndarray  # mean compression vNMSE per round (0 for the identity)
    min_delta: float  # min over samples of 1 - ||v - vhat||^2 / ||v||^2
    w: np.ndarray


def _gradients(shards, w) -> np.ndarray:
    return np.stack([s.gradient(w) for s in shards])


def gradient_descent(shards, rounds: int, learning_rate: float, w0=None) -> np.ndarray:
    """Reference full-precision distributed GD; returns the loss after each round."""
    w = np.zeros(shards[0].a.shape[1]) if w0 is None else np.array(w0, dtype=np.float64)
    losses = np.empty(rounds)
    for r in range(rounds):
        w = w - learning_rate * _gradients(shards, w).mean(axis=0)
        losses[r] = global_loss(shards, w)
    return losses


def run_training(
    shards,
    scheme: Scheme | None,
    rounds: int,
    learning_rate: float,
    ef: bool = False,
    seed: int = 0,
    w0=None,
) -> TrainingResult:
    """Train with ``scheme`` (``None`` sends gradients uncompressed).

    Round ``r`` compresses client ``c``'s vector with seed
    ``derive_seed(seed, r, c)``, so a trajectory is a pure function of its inputs.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    n = len(shards)
    p = shards[0].a.shape[1]
    w = np.zeros(p) if w0 is None else np.array(w0, dtype=np.float64)
    residual = np.zeros((n, p))
    initial = global_loss(shards, w)
    losses = np.empty(rounds)
    vnmse = np.zeros(rounds)
    min_delta = math.inf
    for r in range(rounds):
        v = _gradients(shards, w)
        if ef:
            v = v + residual
        if scheme is None:
            vhat = v
        else:
            seeds = np.array([rng.derive_seed(seed, r, c) for c in range(n)], dtype=np.uint64)
            vhat = roundtrip_batch(v, scheme, seeds)
            sq = np.einsum("ij,ij->i", v, v)
            err = np.einsum("ij,ij->i", v - vhat, v - vhat)
            live = sq > 0
            if live.any():
                ratio = err[live] / sq[live]
                vnmse[r] = ratio.mean()
                min_delta = min(min_delta, float((1.0 - ratio).min()))
        if ef:
            residual = v - vhat
        w = w - learning_rate * vhat.mean(axis=0)
        losses[r] = global_loss(shards, w)
        if not losses[r] <= DIVERGENCE_FACTOR * initial:
            raise DivergenceError(f"loss {losses[r]:.3g} at round {r} exceeds {DIVERGENCE_FACTOR:g}x the initial loss")
    if scheme is None:
        min_delta = 1.0
    return TrainingResult(losses, initial, vnmse, min_delta, w)


def write_csv(result: TrainingResult, out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "loss", "vnmse"])
    for r, (loss, v) in enumerate(zip(result.losses, result.vnmse)):
        w.writerow([r, repr(float(loss)), repr(float(v))])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as f:
            f.write(text)
    return text
