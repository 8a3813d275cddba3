"""
Simulator
Discretized SRBM paths with reflection solved as a linear complementarity
problem, and time-average estimates of the stationary distribution used
as an empirical check of product-form verdicts.

Random numbers come from numpy's Philox counter-based generator seeded
with SimConfig.seed (replication r uses seed + r). Each block of steps
draws its normal variates first and then, when the boundary correction
is on, one uniform per coordinate and step.
"""

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.stats

import matrix_kernel as mk
from config_manager import DEFAULT_TOLERANCES, Tolerances
from exceptions import LcpRayTermination
from performance_monitor import PerformanceMonitor
from srbm_model import SrbmData

MAX_FIXED_POINT_ITERATIONS = 1000


@dataclass(frozen=True)
class SimConfig:
    step: float = 1e-3
    horizon: float = 2e4
    burn_in: float = 2e3
    seed: int = 20240601
    batches: int = 20
    initial_state: Optional[Tuple[float, ...]] = None
    replications: int = 1
    workers: int = 1
    block_steps: int = 65536
    boundary_bridge: bool = True
    max_retries: int = 3
    dump_path: Optional[str] = None
    dump_every: int = 100
    max_memory_mb: float = 2048.0

    def __post_init__(self):
        if not self.step > 0 or not self.horizon > 0:
            raise ValueError("step and horizon must be positive")
        if not 0 <= self.burn_in < self.horizon:
            raise ValueError("burn-in must lie in [0, horizon)")
        if self.step > self.horizon / 1000.0:
            raise ValueError("step must not exceed horizon / 1000")
        if self.batches < 2:
            raise ValueError("batch means need at least two batches")
        if self.replications < 1 or self.workers < 1 or self.block_steps < 1 or self.dump_every < 1:
            raise ValueError("replications, workers, block_steps and dump_every must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be nonnegative")
        if self.n_steps - self.burn_steps < self.batches:
            raise ValueError("too few post burn-in steps for the requested batches")
        if self.initial_state is not None:
            state = tuple(float(v) for v in self.initial_state)
            if any(v < 0 for v in state):
                raise ValueError("initial state must be nonnegative")
            object.__setattr__(self, "initial_state", state)

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))

    @property
    def burn_steps(self) -> int:
        return int(round(self.burn_in / self.step))

    @classmethod
    def from_config(cls, config, **overrides) -> "SimConfig":
        """Build from the 'simulation' and 'performance' sections of a ConfigManager"""
        section = config.get_section("simulation")
        keys = {f for f in cls.__dataclass_fields__ if f not in ("initial_state", "dump_path",
                                                                 "max_memory_mb")}
        values = {k: section[k] for k in keys if k in section}
        values["max_memory_mb"] = config.get_setting("performance", "max_memory_mb", 2048.0)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        doc = asdict(self)
        doc["initial_state"] = list(self.initial_state) if self.initial_state is not None else None
        return doc


@dataclass(frozen=True, eq=False)
class SimEstimate:
    marginal_mean: np.ndarray
    marginal_rate: np.ndarray
    covariance: np.ndarray
    correlation: np.ndarray
    boundary_push: np.ndarray
    ci_halfwidth: np.ndarray
    rate_ci_halfwidth: np.ndarray
    samples: int
    batches: int
    minimum_state: np.ndarray
    retries: int = 0
    replications: int = 1
    resources: Dict[str, Any] = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.marginal_mean.shape[0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "marginal_mean": self.marginal_mean.tolist(),
            "marginal_rate": self.marginal_rate.tolist(),
            "ci_halfwidth": self.ci_halfwidth.tolist(),
            "rate_ci_halfwidth": self.rate_ci_halfwidth.tolist(),
            "covariance": self.covariance.tolist(),
            "correlation": self.correlation.tolist(),
            "boundary_push": self.boundary_push.tolist(),
            "minimum_state": self.minimum_state.tolist(),
            "samples": self.samples,
            "batches": self.batches,
            "replications": self.replications,
            "lcp_retries": self.retries,
            "resources": self.resources,
        }


@dataclass(frozen=True, eq=False)
class EmpiricalVerdict:
    alpha: np.ndarray
    rate_error: np.ndarray
    coordinates: List[bool]
    pairs: Dict[Tuple[int, int], bool]
    correlation_tolerance: float

    @property
    def passed(self) -> bool:
        return all(self.coordinates) and all(self.pairs.values())

    @property
    def failing_pairs(self) -> List[Tuple[int, int]]:
        return [p for p, ok in sorted(self.pairs.items()) if not ok]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "alpha": self.alpha.tolist(),
            "rate_error": self.rate_error.tolist(),
            "coordinates": self.coordinates,
            "failing_pairs": [[i + 1, j + 1] for i, j in self.failing_pairs],
            "correlation_tolerance": self.correlation_tolerance,
        }


# Linear complementarity

def _pivot(tableau: np.ndarray, row: int, col: int):
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])


def lemke(q, m, tol: float = 1e-12, max_pivots: Optional[int] = None) -> np.ndarray:
    """x >= 0 with w = q + M x >= 0 and <x, w> = 0, by Lemke's method with
    covering vector of ones. Ray termination raises LcpRayTermination."""
    q = np.asarray(q, dtype=float)
    m = np.asarray(m, dtype=float)
    d = q.size
    if np.all(q >= 0):
        return np.zeros(d)

    # columns: w (0..d-1), x (d..2d-1), artificial z0 (2d), right-hand side
    tableau = np.hstack([np.eye(d), -m, -np.ones((d, 1)), q[:, None]])
    artificial = 2 * d
    basis = list(range(d))

    row = int(np.argmin(q))
    _pivot(tableau, row, artificial)
    leaving, basis[row] = basis[row], artificial
    entering = leaving + d

    limit = max_pivots if max_pivots is not None else 50 * (d + 1) ** 2
    for _ in range(limit):
        col = tableau[:, entering]
        candidates = np.flatnonzero(col > tol)
        if candidates.size == 0:
            raise LcpRayTermination("Lemke's method ended on a secondary ray", w=q)
        ratios = tableau[candidates, -1] / col[candidates]
        best = ratios.min()
        ties = candidates[ratios <= best + tol * max(1.0, abs(best))]
        exits = [r for r in ties if basis[r] == artificial]
        row = exits[0] if exits else int(ties[0])

        _pivot(tableau, row, entering)
        leaving, basis[row] = basis[row], entering
        if leaving == artificial:
            break
        entering = leaving + d if leaving < d else leaving - d
    else:
        raise LcpRayTermination(f"Lemke's method did not finish in {limit} pivots", w=q)

    values = np.zeros(2 * d + 1)
    values[basis] = tableau[:, -1]
    return values[d:2 * d]


def _projected_gauss_seidel(w: np.ndarray, r: np.ndarray, tol: float,
                            max_sweeps: int = 10000) -> np.ndarray:
    diag = np.diag(r)
    dy = np.zeros(w.size)
    floor = 0.01 * tol * max(1.0, float(np.max(np.abs(w))))
    for _ in range(max_sweeps):
        change = 0.0
        for k in range(w.size):
            rest = w[k] + r[k] @ dy - diag[k] * dy[k]
            new = max(0.0, -rest / diag[k])
            change = max(change, abs(new - dy[k]))
            dy[k] = new
        if change <= floor:
            return dy
    raise LcpRayTermination("projected Gauss-Seidel sweeps did not settle", w=w)


def solve_lcp(w, r, tol: float = DEFAULT_TOLERANCES.lcp,
              m_matrix: Optional[bool] = None) -> Tuple[np.ndarray, np.ndarray]:
    """One reflection step: z = w + R dy with z >= 0, dy >= 0 and <z, dy> = 0"""
    w = np.asarray(w, dtype=float)
    r = mk.as_square_matrix(r, "R")
    if np.all(w >= 0):
        return w.copy(), np.zeros_like(w)
    if m_matrix is None:
        m_matrix = mk.is_m_matrix(r)
    dy = _projected_gauss_seidel(w, r, tol) if m_matrix else lemke(w, r)
    return w + r @ dy, dy


# Path generation

def _bridge_minimum(increment: np.ndarray, spread: np.ndarray) -> np.ndarray:
    """Minimum over one step of a Brownian path conditioned on its increment;
    spread = -2 var log(u) for a uniform u in (0, 1]"""
    return 0.5 * (increment - np.sqrt(increment ** 2 + spread))


def _regulate_block(z0: np.ndarray, dx: np.ndarray, r: np.ndarray, tol: float,
                    variance: Optional[np.ndarray] = None,
                    u: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Reflected states and pushes for a block of increments when R is an M-matrix.

    Each coordinate is the one-dimensional regulator of its own netput, which
    includes the pushes of the other coordinates; the pushes are iterated to
    their fixed point starting from zero.
    """
    diag = np.diag(r)
    off = r - np.diag(diag)
    spread = None if u is None else -2.0 * variance * np.log(u)
    y = np.zeros_like(dx)
    for _ in range(MAX_FIXED_POINT_ITERATIONS):
        dy = np.diff(y, axis=0, prepend=np.zeros((1, dx.shape[1])))
        netput = dx + dy @ off.T
        level = z0 + np.cumsum(netput, axis=0)
        if u is None:
            low = level
        else:
            low = (level - netput) + _bridge_minimum(netput, spread)
        new_y = np.maximum.accumulate(np.maximum(-low, 0.0), axis=0) / diag
        settled = np.max(np.abs(new_y - y)) <= tol * max(1.0, float(np.max(new_y)))
        y = new_y
        if settled:
            break
    else:
        logging.warning("Reflection fixed point did not settle; using the last iterate")

    dy = np.diff(y, axis=0, prepend=np.zeros((1, dx.shape[1])))
    netput = dx + dy @ off.T
    level = z0 + np.cumsum(netput, axis=0)
    return level + y * diag, dy


def _reflect_steps(z0: np.ndarray, dx: np.ndarray, r: np.ndarray,
                   max_retries: int) -> Tuple[np.ndarray, np.ndarray, int]:
    """Step-by-step reflection by Lemke's method for a general completely-S R.

    A step that ends on a ray is retried as 2, 4, ... equal sub-increments.
    """
    n, d = dx.shape
    z = np.empty((n, d))
    pushes = np.empty((n, d))
    state = z0.copy()
    retries = 0
    for k in range(n):
        for attempt in range(max_retries + 1):
            pieces = 2 ** attempt
            try:
                current, total = state, np.zeros(d)
                for _ in range(pieces):
                    w = current + dx[k] / pieces
                    dy = lemke(w, r)
                    current = w + r @ dy
                    total += dy
                break
            except LcpRayTermination:
                if attempt == max_retries:
                    raise
                retries += 1
                logging.warning(f"LCP ray termination at step {k}; retrying as {2 * pieces} sub-steps")
        state = current
        z[k] = state
        pushes[k] = total
    return z, pushes, retries


class _PathRunner:
    def __init__(self, data: SrbmData, config: SimConfig, tol: Tolerances):
        self.data = data
        self.config = config
        self.tol = tol
        self.chol = scipy.linalg.cholesky(data.sigma, lower=True)
        self.m_matrix = mk.is_m_matrix(data.r, tol.minor)
        self.bridge = config.boundary_bridge and self.m_matrix
        if config.boundary_bridge and not self.m_matrix:
            logging.info("Boundary correction needs an M-matrix R; stepping with Lemke's method")
        self.retries = 0

    def blocks(self, seed: int, monitor: Optional[PerformanceMonitor] = None
               ) -> Iterator[Tuple[int, np.ndarray, np.ndarray]]:
        """Yields (index of first step, states, pushes) for consecutive blocks"""
        data, config = self.data, self.config
        d = data.d
        rng = np.random.Generator(np.random.Philox(seed))
        drift = data.mu * config.step
        scale = math.sqrt(config.step)
        variance = np.diag(data.sigma) * config.step
        if config.initial_state is None:
            state = np.zeros(d)
        else:
            state = np.array(config.initial_state, dtype=float)
            if state.shape != (d,):
                raise ValueError(f"initial state must have {d} entries")

        done = 0
        while done < config.n_steps:
            n = min(config.block_steps, config.n_steps - done)
            started = time.perf_counter()
            xi = rng.standard_normal((n, d))
            dx = drift + scale * (xi @ self.chol.T)
            if self.m_matrix:
                u = 1.0 - rng.random((n, d)) if self.bridge else None
                z, dy = _regulate_block(state, dx, data.r, self.tol.lcp, variance, u)
            else:
                z, dy, retries = _reflect_steps(state, dx, data.r, config.max_retries)
                self.retries += retries
            if monitor is not None:
                monitor.update_throughput(n / max(time.perf_counter() - started, 1e-9))
            yield done, z, dy
            state = z[-1].copy()
            done += n


class SampleDump:
    """CSV of thinned path samples; dy columns hold the pushes since the previous row"""

    def __init__(self, path, d: int, step: float, every: int):
        self.path = Path(path)
        self.step = step
        self.every = every
        self.handle = open(self.path, "w", newline="")
        self.writer = csv.writer(self.handle)
        self.writer.writerow(["t"] + [f"z{k + 1}" for k in range(d)] + [f"dy{k + 1}" for k in range(d)])
        self.carry = np.zeros(d)
        self.last = np.zeros(d)

    def write_block(self, start: int, z: np.ndarray, dy: np.ndarray):
        index = start + np.arange(z.shape[0])
        cumulative = self.carry + np.cumsum(dy, axis=0)
        rows = np.flatnonzero((index + 1) % self.every == 0)
        if rows.size:
            picked = cumulative[rows]
            pushes = np.diff(np.vstack([self.last, picked]), axis=0)
            self.last = picked[-1]
            for row, push in zip(rows, pushes):
                t = (index[row] + 1) * self.step
                self.writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in z[row]]
                                     + [f"{v:.17g}" for v in push])
        self.carry = cumulative[-1]

    def close(self):
        self.handle.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False


# Estimation

class StationaryAccumulator:
    """Streaming time averages, second moments, pushes and batch sums"""

    def __init__(self, d: int, batches: int, total_samples: int):
        self.d = d
        self.total_samples = total_samples
        self.count = 0
        self.sums = np.zeros(d)
        self.cross = np.zeros((d, d))
        self.push = np.zeros(d)
        self.minimum = np.full(d, np.inf)
        self.batch_sums = np.zeros((batches, d))
        self.batch_counts = np.zeros(batches)

    def update(self, z, dy=None, first_index: Optional[int] = None):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        n = z.shape[0]
        if n == 0:
            return
        if first_index is None:
            first_index = self.count
        batches = self.batch_sums.shape[0]
        index = first_index + np.arange(n)
        batch = np.minimum(index * batches // max(self.total_samples, 1), batches - 1)
        starts = np.flatnonzero(np.diff(batch, prepend=-1))
        self.batch_sums[batch[starts]] += np.add.reduceat(z, starts, axis=0)
        self.batch_counts[batch[starts]] += np.diff(np.append(starts, n))

        self.count += n
        self.sums += z.sum(axis=0)
        self.cross += z.T @ z
        self.minimum = np.minimum(self.minimum, z.min(axis=0))
        if dy is not None:
            self.push += np.asarray(dy, dtype=float).sum(axis=0)

    def merge(self, other: "StationaryAccumulator") -> "StationaryAccumulator":
        """Pooled accumulator; batches of both runs are kept side by side"""
        merged = StationaryAccumulator(self.d, 1, self.total_samples + other.total_samples)
        merged.count = self.count + other.count
        merged.sums = self.sums + other.sums
        merged.cross = self.cross + other.cross
        merged.push = self.push + other.push
        merged.minimum = np.minimum(self.minimum, other.minimum)
        merged.batch_sums = np.vstack([self.batch_sums, other.batch_sums])
        merged.batch_counts = np.concatenate([self.batch_counts, other.batch_counts])
        return merged

    def finalize(self, step: float, confidence: float = 0.95, **extra) -> SimEstimate:
        if self.count == 0:
            raise ValueError("no samples accumulated")
        mean = self.sums / self.count
        covariance = self.cross / self.count - np.outer(mean, mean)
        covariance = 0.5 * (covariance + covariance.T)
        sd = np.sqrt(np.maximum(np.diag(covariance), 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            correlation = covariance / np.outer(sd, sd)
        np.fill_diagonal(correlation, 1.0)

        filled = self.batch_counts > 0
        batch_means = self.batch_sums[filled] / self.batch_counts[filled, None]
        k = batch_means.shape[0]
        if k >= 2:
            quantile = scipy.stats.t.ppf(0.5 + 0.5 * confidence, k - 1)
            halfwidth = quantile * batch_means.std(axis=0, ddof=1) / math.sqrt(k)
        else:
            halfwidth = np.full(self.d, np.inf)

        if np.any(mean <= 0):
            logging.warning("A marginal mean is not positive; its rate is reported as infinite")
        with np.errstate(divide="ignore"):
            rate = 1.0 / mean
            rate_halfwidth = halfwidth / mean ** 2

        return SimEstimate(
            marginal_mean=mean,
            marginal_rate=rate,
            covariance=covariance,
            correlation=correlation,
            boundary_push=self.push / (self.count * step),
            ci_halfwidth=halfwidth,
            rate_ci_halfwidth=rate_halfwidth,
            samples=self.count,
            batches=k,
            minimum_state=self.minimum.copy(),
            **extra,
        )


def estimate_from_samples(samples, batches: int = 20, step: float = 1.0) -> SimEstimate:
    """Estimate from a sample array, one row per observation"""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    acc = StationaryAccumulator(samples.shape[1], batches, samples.shape[0])
    acc.update(samples)
    return acc.finalize(step)


def _check_stability(data: SrbmData, m_matrix: bool):
    try:
        drift = np.linalg.solve(data.r, data.mu)
    except np.linalg.LinAlgError:
        logging.warning("R is singular; the simulated path has no stationary law")
        return
    if np.any(drift >= 0):
        logging.warning("R^{-1} mu is not negative; the simulated path has no stationary law")
    elif not m_matrix and data.d > 2:
        logging.warning("Only the necessary stability condition is known to hold for this R")


def _run_path(runner: _PathRunner, seed: int, dump: bool,
              monitor: Optional[PerformanceMonitor]) -> StationaryAccumulator:
    config = runner.config
    burn = config.burn_steps
    acc = StationaryAccumulator(runner.data.d, config.batches, config.n_steps - burn)
    writer = (SampleDump(config.dump_path, runner.data.d, config.step, config.dump_every)
              if dump and config.dump_path else None)
    try:
        for start, z, dy in runner.blocks(seed, monitor):
            skip = max(0, burn - start)
            if skip < z.shape[0]:
                acc.update(z[skip:], dy[skip:], first_index=start + skip - burn)
            if writer is not None:
                writer.write_block(start, z, dy)
    finally:
        if writer is not None:
            writer.close()
    return acc


def simulate(data: SrbmData, config: Optional[SimConfig] = None,
             tol: Tolerances = DEFAULT_TOLERANCES,
             progress: Optional[Callable[[Dict[str, Any]], None]] = None) -> SimEstimate:
    """Time-average estimate of the stationary law, pooled over replications.

    progress, when given, receives each reading of the resource monitor
    once per sampling interval.
    """
    config = config or SimConfig()
    logging.info(f"Simulating d={data.d}: step {config.step}, horizon {config.horizon}, "
                 f"{config.replications} replication(s)")

    monitor = PerformanceMonitor(max_memory_mb=config.max_memory_mb)
    if progress is not None:
        monitor.add_performance_callback(progress)
    with monitor:
        runners = [_PathRunner(data, config, tol) for _ in range(config.replications)]
        _check_stability(data, runners[0].m_matrix)
        seeds = [config.seed + r for r in range(config.replications)]
        if config.workers > 1 and config.replications > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                accumulators = list(pool.map(
                    lambda r: _run_path(runners[r], seeds[r], r == 0, monitor),
                    range(config.replications)))
        else:
            accumulators = [_run_path(runners[r], seeds[r], r == 0, monitor)
                            for r in range(config.replications)]

    pooled = accumulators[0]
    for acc in accumulators[1:]:
        pooled = pooled.merge(acc)
    estimate = pooled.finalize(
        config.step,
        retries=sum(r.retries for r in runners),
        replications=config.replications,
        resources=monitor.get_performance_summary(),
    )
    logging.info(f"Estimated marginal rates {np.round(estimate.marginal_rate, 4).tolist()}")
    return estimate


def sample_path(data: SrbmData, config: SimConfig,
                tol: Tolerances = DEFAULT_TOLERANCES) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Times, states and pushes of every step of one path (small runs only)"""
    runner = _PathRunner(data, config, tol)
    parts = list(runner.blocks(config.seed))
    z = np.vstack([p[1] for p in parts])
    dy = np.vstack([p[2] for p in parts])
    times = config.step * np.arange(1, z.shape[0] + 1)
    return times, z, dy


def empirical_product_form_test(est: SimEstimate, alpha, rate_tolerance: float = 0.05,
                                ci_multiplier: float = 3.0,
                                correlation_tolerance: float = 0.05) -> EmpiricalVerdict:
    """Rate i passes within max(rate_tolerance * alpha_i, ci_multiplier * CI_i);
    pair (i, j) passes when |corr_ij| <= correlation_tolerance"""
    alpha = np.asarray(alpha, dtype=float)
    error = np.abs(est.marginal_rate - alpha)
    allowed = np.maximum(rate_tolerance * alpha, ci_multiplier * est.rate_ci_halfwidth)
    coordinates = [bool(e <= a) for e, a in zip(error, allowed)]
    pairs = {}
    for i in range(est.d):
        for j in range(i + 1, est.d):
            pairs[(i, j)] = bool(abs(est.correlation[i, j]) <= correlation_tolerance)
    verdict = EmpiricalVerdict(alpha=alpha, rate_error=error, coordinates=coordinates,
                               pairs=pairs, correlation_tolerance=correlation_tolerance)
    if not verdict.passed:
        logging.info(f"Empirical check failed: coordinates {coordinates}, pairs {verdict.failing_pairs}")
    return verdict
