"""Reproducible ensembles of conditional trajectories and their statistics.

Trajectory ``i`` always uses ``stream_seed(master_seed, i)`` and runs in a
fixed-size chunk, so results do not depend on the number of workers. Chunk
results are reassembled in index order before any reduction.
"""

from __future__ import annotations

import logging
from concurrent.futures import FIRST_EXCEPTION, ProcessPoolExecutor, wait
from dataclasses import dataclass, field

import numpy as np

from . import qmat
from .config import SimConfig
from .errors import BadParam, MissingStates, WgbellError
from .lindblad import DensityMatrix
from .measures import Terminal, classify_state, trace_distance
from .model import WaveguideModel
from .rng import RngStream, mix64_int, stream_seed
from .trajectories import BatchRun, TrajectoryRecord, simulate_batch

log = logging.getLogger(__name__)

CHUNK_SIZE = 250
N_BOOTSTRAP = 200
CONVERGED_CONCURRENCE = 0.95
_BOOTSTRAP_SALT = 0xB5297A4D


@dataclass(frozen=True)
class ConcurrenceSeries:
    times: np.ndarray  # T1 units
    values: np.ndarray
    stderr: np.ndarray


@dataclass
class EnsembleResult:
    n_traj: int
    master_seed: int
    seeds: list[int]
    times: np.ndarray
    concurrence: np.ndarray  # (n_traj, n_rec)
    terminal: list[Terminal]
    final_fidelities: np.ndarray  # (n_traj, 4)
    final_states: np.ndarray  # (n_traj, 4, 4)
    records: dict[int, TrajectoryRecord] = field(default_factory=dict)
    states: np.ndarray | None = None  # (n_traj, n_rec, 4, 4)

    @property
    def mean_concurrence(self) -> ConcurrenceSeries:
        c = self.concurrence
        mean = np.mean(c, axis=0)
        if self.n_traj > 1:
            err = np.std(c, axis=0, ddof=1) / np.sqrt(self.n_traj)
        else:
            err = np.zeros_like(mean)
        return ConcurrenceSeries(times=self.times, values=mean, stderr=err)

    @property
    def terminal_counts(self) -> dict[Terminal, int]:
        counts = {label: 0 for label in Terminal}
        for label in self.terminal:
            counts[label] += 1
        return counts

    def terminal_fraction(self, label: Terminal) -> float:
        return self.terminal_counts[label] / self.n_traj

    def terminal_fraction_ci(self, label: Terminal, level: float = 0.95) -> tuple[float, float]:
        """Percentile bootstrap interval (200 resamples) for a label's fraction."""
        hits = np.array([t is label for t in self.terminal], dtype=float)
        rng = RngStream(mix64_int(self.master_seed ^ _BOOTSTRAP_SALT))
        idx = _bootstrap_indices(rng, self.n_traj, N_BOOTSTRAP)
        fractions = hits[idx].mean(axis=1)
        lo, hi = np.quantile(fractions, [(1 - level) / 2, (1 + level) / 2])
        return float(lo), float(hi)

    @property
    def convergence_times(self) -> np.ndarray:
        return convergence_times(self.times, self.concurrence)

    @property
    def mean_state(self) -> list[DensityMatrix] | None:
        if self.states is None:
            return None
        return mean_state_series(self)


def _bootstrap_indices(rng: RngStream, n: int, n_boot: int) -> np.ndarray:
    u = rng.uniform(n_boot * n).reshape(n_boot, n)
    return np.minimum((u * n).astype(np.int64), n - 1)


def convergence_times(times: np.ndarray, concurrence: np.ndarray, level: float = CONVERGED_CONCURRENCE) -> np.ndarray:
    """Time each trajectory enters [level, 1] for good; NaN if it ends below."""
    conc = np.atleast_2d(concurrence)
    below = conc < level
    out = np.full(conc.shape[0], np.nan)
    for i, row in enumerate(below):
        if row[-1]:
            continue
        hits = np.flatnonzero(row)
        out[i] = times[hits[-1] + 1] if hits.size else times[0]
    return out


def _run_chunk(model, cfg, seeds, start, saved, keep_states) -> BatchRun:
    local = [i - start for i in saved if start <= i < start + len(seeds)]
    try:
        return simulate_batch(model, cfg, seeds, full_records=local, keep_states=keep_states)
    except WgbellError as exc:
        exc.trajectory_index = start + getattr(exc, "batch_index", 0)
        raise


def run_ensemble(
    model: WaveguideModel,
    cfg: SimConfig,
    master_seed: int | None = None,
    n_traj: int | None = None,
    workers: int = 1,
    n_save: int | None = None,
    keep_states: bool = False,
) -> EnsembleResult:
    """Run ``n_traj`` trajectories and aggregate them.

    The first ``n_save`` trajectories also keep full records (with states
    when ``cfg.store_states`` is set). ``keep_states`` additionally keeps
    every trajectory's states, as needed by :func:`mean_state_series`;
    memory grows as ``n_traj * n_rec * 256`` bytes.

    Raises:
        WgbellError: the first trajectory failure, with ``.trajectory_index``
            and ``.time`` attached; remaining work is cancelled.
    """
    master_seed = cfg.master_seed if master_seed is None else int(master_seed)
    n_traj = cfg.n_traj if n_traj is None else int(n_traj)
    n_save = cfg.n_save if n_save is None else int(n_save)
    if n_traj < 1:
        raise BadParam("n_traj must be >= 1")
    if workers < 1:
        raise BadParam("workers must be >= 1")
    seeds = [stream_seed(master_seed, i) for i in range(n_traj)]
    saved = list(range(min(n_save, n_traj)))
    starts = list(range(0, n_traj, CHUNK_SIZE))
    jobs = [(model, cfg, seeds[s : s + CHUNK_SIZE], s, saved, keep_states) for s in starts]

    if workers == 1 or len(jobs) == 1:
        chunks = [_run_chunk(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            futures = [pool.submit(_run_chunk, *job) for job in jobs]
            done, pending = wait(futures, return_when=FIRST_EXCEPTION)
            for fut in futures:
                if fut.done() and fut.exception() is not None:
                    for p in pending:
                        p.cancel()
                    raise fut.exception()
            chunks = [fut.result() for fut in futures]

    conc = np.concatenate([c.concurrence for c in chunks])
    fid = np.concatenate([c.final_fidelities for c in chunks])
    final_states = np.concatenate([c.final_states for c in chunks])
    states = np.concatenate([c.states for c in chunks]) if keep_states else None
    records = {}
    for s, c in zip(starts, chunks):
        for local, rec in c.records.items():
            records[s + local] = rec
    terminal = [
        classify_state(fid[i], conc[i, -1], cfg.classify_threshold, cfg.separable_threshold) for i in range(n_traj)
    ]
    return EnsembleResult(
        n_traj=n_traj,
        master_seed=master_seed,
        seeds=seeds,
        times=chunks[0].times,
        concurrence=conc,
        terminal=terminal,
        final_fidelities=fid,
        final_states=final_states,
        records=records,
        states=states,
    )


def _states_of(results) -> np.ndarray:
    if isinstance(results, EnsembleResult):
        if results.states is None:
            raise MissingStates("ensemble was run without stored states")
        return results.states
    records = list(results)
    if not records or any(r.states is None for r in records):
        raise MissingStates("records carry observables only")
    return np.stack([r.states for r in records])


def mean_state_series(results) -> list[DensityMatrix]:
    """Pointwise average state over an ensemble or a list of records.

    Raises:
        MissingStates: if states were not stored.
    """
    if isinstance(results, EnsembleResult):
        times = results.times
    else:
        results = list(results)
        times = results[0].times if results else None
    mean = qmat.hermitize(np.mean(_states_of(results), axis=0))
    mean = mean / np.real(qmat.trace(mean))[:, None, None]
    return [DensityMatrix(mat=m, time=float(t)) for t, m in zip(times, mean)]


def bootstrap_trace_distance(
    states: np.ndarray, reference: np.ndarray, n_boot: int = N_BOOTSTRAP, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Trace distance of the ensemble mean to ``reference`` and its statistical scale.

    ``states`` is ``(N, T, 4, 4)`` and ``reference`` is ``(T, 4, 4)``.
    Returns ``(distance, sigma)`` per time point. ``sigma`` is the RMS trace
    distance between bootstrap-resampled means and the full-sample mean,
    i.e. the typical size of the sampling error of the mean state.
    """
    states = np.asarray(states)
    n = states.shape[0]
    mean = np.mean(states, axis=0)
    dist = trace_distance(mean, reference)
    idx = _bootstrap_indices(RngStream(mix64_int(seed ^ _BOOTSTRAP_SALT)), n, n_boot)
    sq = np.zeros(np.shape(dist))
    for b in range(n_boot):
        sq += np.asarray(trace_distance(np.mean(states[idx[b]], axis=0), mean)) ** 2
    return np.asarray(dist), np.sqrt(sq / n_boot)
