"""Conditional dynamics: photon-counting jumps and diffusive homodyne records.

Every step function accepts either one state ``(4, 4)`` or a stack
``(B, 4, 4)``; a stack must be paired with an :class:`RngStream` holding B
seeds. Stacked members never mix, and all arithmetic is elementwise, so a
trajectory is bit-identical whether it runs alone or inside a batch.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from . import qmat
from .config import Mode, Scheme, SimConfig
from .errors import BadParam, DtTooLarge, PositivityLost, WgbellError
from .measures import ObservableSet, observables
from .model import WaveguideModel, named_state
from .rng import RngStream

log = logging.getLogger(__name__)

MAX_CLICK_PROB = 0.1
HOMODYNE_POSITIVITY_TOL = 1e-4


class Channel(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


CHANNELS = (Channel.LEFT, Channel.RIGHT)


@dataclass(frozen=True)
class ClickEvent:
    time: float  # T1 units
    channel: Channel


@dataclass(frozen=True)
class CurrentSample:
    time: float  # T1 units, end of the integration step
    channel: Channel
    value: float  # units of sqrt(gamma)


@dataclass
class TrajectoryRecord:
    """Observables on the recorded grid plus the measurement record.

    ``times`` are in units of T1. Row ``k`` of ``click_counts`` holds the
    clicks per channel since row ``k - 1``; row ``k`` of ``current_means``
    holds the mean current per channel over the same interval (NaN in row 0
    and for unmonitored channels). ``click_steps`` lists every click at full
    time resolution as ``(step, channel_index)``.
    """

    mode: Mode
    seed: int
    gamma: float
    dt: float
    times: np.ndarray
    observables: ObservableSet
    states: np.ndarray | None = None
    click_counts: np.ndarray | None = None
    click_steps: np.ndarray | None = None
    current_means: np.ndarray | None = None
    current_samples: np.ndarray | None = None  # (n_steps, 2), full resolution

    @property
    def clicks(self) -> list[ClickEvent]:
        if self.click_steps is None:
            return []
        return [ClickEvent(time=float(n * self.dt), channel=CHANNELS[c]) for n, c in self.click_steps]

    @property
    def currents(self) -> list[CurrentSample]:
        if self.current_samples is None:
            return []
        out = []
        for n, row in enumerate(self.current_samples, start=1):
            for c, value in enumerate(row):
                if np.isfinite(value):
                    out.append(CurrentSample(time=float(n * self.dt), channel=CHANNELS[c], value=float(value)))
        return out

    @property
    def concurrence(self) -> np.ndarray:
        return self.observables.concurrence


def _trace(rho: np.ndarray) -> np.ndarray:
    return np.real(qmat.trace(rho))


def _sandwich(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return qmat.mm(qmat.mm(op, rho), qmat.dag(op))


def _anti(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return qmat.mm(op, rho) + qmat.mm(rho, op)


def _renormalize(rho: np.ndarray) -> np.ndarray:
    rho = qmat.hermitize(rho)
    return rho / _trace(rho)[..., None, None]


# --- photon counting -------------------------------------------------------


def no_click_generator(model: WaveguideModel, rho: np.ndarray) -> np.ndarray:
    """Linear, trace-decreasing part of the counting equation.

    -i[H0, rho] - 1/2 {K, rho} + sum_l (1 - eta_l) gamma J_l rho J_l^dagger
    with K = gamma * sum_l J_l^dagger J_l. Dividing its flow by the trace
    reproduces the nonlinear no-click update exactly.
    """
    out = -1j * (qmat.mm(model.H0, rho) - qmat.mm(rho, model.H0)) - 0.5 * _anti(model.decay_operator, rho)
    for j, eta in zip(model.jump_ops, model.etas):
        if eta < 1.0:
            out = out + (1.0 - eta) * model.gamma * _sandwich(j, rho)
    return out


def _no_click_rk4(model: WaveguideModel, rho: np.ndarray, dt: float) -> np.ndarray:
    k1 = no_click_generator(model, rho)
    k2 = no_click_generator(model, rho + 0.5 * dt * k1)
    k3 = no_click_generator(model, rho + 0.5 * dt * k2)
    k4 = no_click_generator(model, rho + dt * k3)
    return _renormalize(rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))


def click_probabilities(model: WaveguideModel, rho: np.ndarray, dt: float) -> np.ndarray:
    """eta_l * gamma * Tr(J_l^dagger J_l rho) * dt per channel, last axis."""
    probs = []
    for j, eta in zip(model.jump_ops, model.etas):
        jj = qmat.mm(qmat.dag(j), j)
        probs.append(eta * model.gamma * np.real(qmat.expect(jj, rho)) * dt)
    return np.clip(np.stack(probs, axis=-1), 0.0, None)


def apply_click(model: WaveguideModel, rho: np.ndarray, channel: int) -> np.ndarray:
    """J rho J^dagger / Tr(...) for one channel (efficiency cancels)."""
    out = _sandwich(model.jump_ops[channel], rho)
    tr = _trace(out)
    safe = np.where(tr > 0, tr, 1.0)
    return qmat.hermitize(out / safe[..., None, None])


def jump_step(
    model: WaveguideModel, rho: np.ndarray, dt: float, rng: RngStream
) -> tuple[np.ndarray, np.ndarray]:
    """One photon-counting step.

    Draws one uniform per channel. A channel clicks with probability
    ``eta * gamma * Tr(J^dagger J rho) dt``; on a click the state jumps
    (left before right if both fire), otherwise the no-click equation is
    integrated over ``dt`` by RK4 and renormalised.

    Returns ``(rho_next, clicks)`` with ``clicks`` a bool array ``(..., 2)``.

    Raises:
        DtTooLarge: if any click probability reaches 0.1.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    p = click_probabilities(model, rho, dt)
    if np.any(p >= MAX_CLICK_PROB):
        bad = np.argwhere(p >= MAX_CLICK_PROB)[0]
        err = DtTooLarge(f"click probability {p[tuple(bad)]:.3g} >= {MAX_CLICK_PROB} (dt = {dt:g})")
        err.batch_index = int(bad[0]) if p.ndim > 1 else 0
        raise err
    u = rng.uniform(2)
    fired = u < p
    any_fired = fired[..., 0] | fired[..., 1]
    if not np.any(any_fired):
        return _no_click_rk4(model, rho, dt), fired
    jumped = rho
    for c in (0, 1):
        if np.any(fired[..., c]):
            jumped = np.where(fired[..., c, None, None], apply_click(model, jumped, c), jumped)
    if np.all(any_fired):
        return jumped, fired
    return np.where(any_fired[..., None, None], jumped, _no_click_rk4(model, rho, dt)), fired


def no_jump_propagate(model: WaveguideModel, psi0, t: float) -> np.ndarray:
    """exp(-gamma/2 sum_l J_l^dagger J_l t) psi0, renormalised.

    Pure-state no-click conditioning at unit efficiency. The Hamiltonian is
    not included, so ``omega_tilde`` must be zero.
    """
    if model.omega_tilde != 0.0:
        raise BadParam("no-jump propagator assumes omega_tilde = 0")
    if t < 0:
        raise BadParam("t must be >= 0")
    w, v = qmat.herm_eig(model.decay_operator)
    psi = np.asarray(psi0, dtype=complex)
    coeffs = qmat.mv(qmat.dag(v), psi) * np.exp(-0.5 * w * t)
    return qmat.normalize(qmat.mv(v, coeffs))


# --- homodyne --------------------------------------------------------------


def _homodyne_euler(model, rho, dw, dt):
    out = rho - 1j * (qmat.mm(model.H0, rho) - qmat.mm(rho, model.H0)) * dt
    for c, (j, eta) in enumerate(zip(model.jump_ops, model.etas)):
        jd = qmat.dag(j)
        out = out + model.gamma * dt * (_sandwich(j, rho) - 0.5 * _anti(qmat.mm(jd, j), rho))
        if eta > 0:
            h = qmat.mm(j, rho) + qmat.mm(rho, jd)
            h = h - _trace(h)[..., None, None] * rho
            out = out + np.sqrt(eta * model.gamma / 2) * h * dw[..., c, None, None]
    return out


def _homodyne_kraus(model, rho, dw, dt):
    """Positivity-preserving step with the same first-order increments.

    M = 1 - (i H0 + K/2) dt + sum_l sqrt(c_l) J_l dY_l
        + 1/2 sum_{l,m} sqrt(c_l c_m) J_l J_m (dY_l dY_m - delta_lm dt),
    rho' = M rho M^dagger + sum_l (gamma - c_l) dt J_l rho J_l^dagger,
    with c_l = eta_l gamma / 2 and dY_l = sqrt(c_l) <J_l + J_l^dagger> dt + dW_l.
    """
    batch = rho.shape[:-2]
    eye = np.broadcast_to(qmat.I4, batch + (4, 4))
    m = eye - (1j * model.H0 + 0.5 * model.decay_operator) * dt
    ops, dys, rates = [], [], []
    for c, (j, eta) in enumerate(zip(model.jump_ops, model.etas)):
        rate = eta * model.gamma / 2
        if rate > 0:
            mean = np.real(qmat.expect(j + qmat.dag(j), rho))
            dy = np.sqrt(rate) * mean * dt + dw[..., c]
            ops.append(np.sqrt(rate) * j)
            dys.append(dy)
            m = m + ops[-1] * dy[..., None, None]
        rates.append(rate)
    for a in range(len(ops)):
        for b in range(len(ops)):
            prod = dys[a] * dys[b] - (dt if a == b else 0.0)
            m = m + 0.5 * qmat.mm(ops[a], ops[b]) * prod[..., None, None]
    out = _sandwich(m, rho)
    for j, rate in zip(model.jump_ops, rates):
        if model.gamma - rate > 0:
            out = out + (model.gamma - rate) * dt * _sandwich(j, rho)
    return out


def homodyne_update(
    model: WaveguideModel, rho: np.ndarray, dw: np.ndarray, dt: float, scheme: Scheme = Scheme.KRAUS
) -> tuple[np.ndarray, np.ndarray]:
    """Homodyne step for given Wiener increments ``dw`` of shape ``(..., 2)``.

    Returns ``(rho_next, currents)``; ``currents`` is NaN on channels with
    zero efficiency.

    Raises:
        PositivityLost: if the updated state has an eigenvalue below -1e-4.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    dw = np.asarray(dw, dtype=float)
    currents = np.full(dw.shape, np.nan)
    for c, (j, eta) in enumerate(zip(model.jump_ops, model.etas)):
        if eta > 0:
            mean = np.real(qmat.expect(j + qmat.dag(j), rho))
            currents[..., c] = np.sqrt(eta * model.gamma) * mean + dw[..., c] / dt
    if Scheme(scheme) is Scheme.KRAUS:
        out = _homodyne_kraus(model, rho, dw, dt)
    else:
        out = _homodyne_euler(model, rho, dw, dt)
    out = _renormalize(out)
    w, _ = qmat.eigh_unchecked(out)
    low = w[..., -1]
    if np.any(low < -HOMODYNE_POSITIVITY_TOL):
        idx = int(np.argmin(low)) if low.ndim else 0
        err = PositivityLost(f"min eigenvalue {np.min(low):.3e} (dt = {dt:g} too coarse)")
        err.batch_index = idx
        raise err
    return out, currents


def homodyne_step(
    model: WaveguideModel, rho: np.ndarray, dt: float, rng: RngStream, scheme: Scheme = Scheme.KRAUS
) -> tuple[np.ndarray, np.ndarray]:
    """One homodyne step; draws two normals per trajectory (one per channel)."""
    dw = rng.normal(2) * np.sqrt(dt)
    return homodyne_update(model, rho, dw, dt, scheme)


# --- whole trajectories ----------------------------------------------------


@dataclass
class BatchRun:
    """Raw output of :func:`simulate_batch`."""

    times: np.ndarray  # recorded grid, T1 units
    concurrence: np.ndarray  # (B, n_rec)
    final_fidelities: np.ndarray  # (B, 4)
    final_states: np.ndarray  # (B, 4, 4)
    states: np.ndarray | None  # (B, n_rec, 4, 4) when kept
    records: dict  # member index -> TrajectoryRecord


def initial_state(cfg: SimConfig) -> np.ndarray:
    return qmat.outer(named_state(cfg.initial))


def _stack_obs(obs_list: list[ObservableSet], member: int) -> ObservableSet:
    return ObservableSet(
        populations=np.array([o.populations[member] for o in obs_list]),
        rho03=np.array([o.rho03[member] for o in obs_list]),
        rho12=np.array([o.rho12[member] for o in obs_list]),
        concurrence=np.array([o.concurrence[member] for o in obs_list]),
        bell_fidelities=np.array([o.bell_fidelities[member] for o in obs_list]),
    )


def _select_obs(obs: ObservableSet, idx: list) -> ObservableSet:
    return ObservableSet(
        populations=obs.populations[idx],
        rho03=obs.rho03[idx],
        rho12=obs.rho12[idx],
        concurrence=obs.concurrence[idx],
        bell_fidelities=obs.bell_fidelities[idx],
    )


def simulate_batch(
    model: WaveguideModel,
    cfg: SimConfig,
    seeds,
    full_records=(),
    keep_states: bool = False,
) -> BatchRun:
    """Run ``len(seeds)`` trajectories in lockstep.

    Concurrence is kept for every member. Members listed in ``full_records``
    also get a complete :class:`TrajectoryRecord` (with states when
    ``cfg.store_states``). ``keep_states`` keeps every member's states.

    Step errors propagate with ``.time`` (T1 units) and ``.batch_index`` set.
    """
    if cfg.mode not in (Mode.JUMP, Mode.HOMODYNE):
        raise BadParam(f"mode {cfg.mode.value} has no conditional trajectories")
    seeds = [int(s) for s in seeds]
    b = len(seeds)
    rng = RngStream(seeds)
    dt = cfg.dt_phys
    n_steps, stride = cfg.n_steps, cfg.record_every
    n_rec = n_steps // stride + 1
    times = np.arange(n_rec) * (stride * cfg.dt)
    full = sorted(set(int(i) for i in full_records))
    jump = cfg.mode is Mode.JUMP

    rho = np.broadcast_to(initial_state(cfg), (b, 4, 4)).copy()
    conc = np.empty((b, n_rec))
    states = np.empty((b, n_rec, 4, 4), dtype=np.complex128) if keep_states else None
    full_obs: list[ObservableSet] = []
    full_states = np.empty((len(full), n_rec, 4, 4), dtype=np.complex128) if full and cfg.store_states else None
    click_counts = np.zeros((b, n_rec, 2), dtype=np.int64) if jump else None
    click_steps: dict[int, list] = {i: [] for i in full}
    cur_sum = np.zeros((b, 2)) if not jump else None
    cur_means = np.full((len(full), n_rec, 2), np.nan) if not jump else None
    cur_samples = np.full((len(full), n_steps, 2), np.nan) if not jump else None

    def record(k: int) -> None:
        obs = observables(rho)
        conc[:, k] = obs.concurrence
        if keep_states:
            states[:, k] = rho
        if full:
            full_obs.append(_select_obs(obs, full))
            if full_states is not None:
                full_states[:, k] = rho[full]

    record(0)
    for n in range(1, n_steps + 1):
        try:
            if jump:
                rho, fired = jump_step(model, rho, dt, rng)
                if np.any(fired):
                    click_counts[:, -(-n // stride)] += fired
                    for i in full:
                        for c in (0, 1):
                            if fired[i, c]:
                                click_steps[i].append((n, c))
            else:
                rho, currents = homodyne_step(model, rho, dt, rng, cfg.homodyne_scheme)
                cur_sum += currents
                if full:
                    cur_samples[:, n - 1] = currents[full]
        except WgbellError as exc:
            exc.time = n * cfg.dt
            if not hasattr(exc, "batch_index"):
                exc.batch_index = 0
            raise
        if n % stride == 0:
            k = n // stride
            record(k)
            if not jump:
                if full:
                    cur_means[:, k] = cur_sum[full] / stride
                cur_sum[:] = 0.0

    final_fid = observables(rho).bell_fidelities
    records = {}
    for slot, i in enumerate(full):
        steps = np.array(click_steps[i], dtype=np.int64).reshape(-1, 2) if jump else None
        records[i] = TrajectoryRecord(
            mode=cfg.mode,
            seed=seeds[i],
            gamma=model.gamma,
            dt=cfg.dt,
            times=times,
            observables=_stack_obs(full_obs, slot),
            states=full_states[slot] if full_states is not None else None,
            click_counts=click_counts[i] if jump else None,
            click_steps=steps,
            current_means=cur_means[slot] if not jump else None,
            current_samples=cur_samples[slot] if not jump else None,
        )
    return BatchRun(
        times=times,
        concurrence=conc,
        final_fidelities=np.asarray(final_fid),
        final_states=rho,
        states=states,
        records=records,
    )


def simulate_trajectory(model: WaveguideModel, cfg: SimConfig, seed: int) -> TrajectoryRecord:
    """Full record of one trajectory; a deterministic function of its inputs.

    ``model`` supplies the physics; ``cfg`` supplies mode, step, duration,
    initial state and storage options.
    """
    return simulate_batch(model, cfg, [seed], full_records=[0]).records[0]
