"""Unconditional master equation: Liouvillian, RK4 evolution, stationarity."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import qmat
from .errors import PositivityLost, StepTooLarge
from .model import WaveguideModel

log = logging.getLogger(__name__)

MAX_DT = 1.0 / 100  # in units of T1
POSITIVITY_TOL = 1e-6


@dataclass(frozen=True)
class DensityMatrix:
    mat: np.ndarray
    time: float


def dissipator(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """D[O]rho = O rho O^dagger - {O^dagger O, rho} / 2."""
    od = qmat.dag(op)
    odo = qmat.mm(od, op)
    return qmat.mm(qmat.mm(op, rho), od) - 0.5 * (qmat.mm(odo, rho) + qmat.mm(rho, odo))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return qmat.mm(a, b) - qmat.mm(b, a)


def liouvillian_apply(model: WaveguideModel, rho) -> np.ndarray:
    """-i[H0, rho] + gamma * sum over both ports of D[J] rho."""
    rho = np.asarray(rho, dtype=np.complex128)
    out = -1j * commutator(model.H0, rho)
    for j in model.jump_ops:
        out = out + model.gamma * dissipator(j, rho)
    return out


def steady_state_residual(model: WaveguideModel, rho) -> float:
    return float(np.max(np.abs(liouvillian_apply(model, rho))))


def rk4_step(model: WaveguideModel, rho: np.ndarray, dt: float) -> np.ndarray:
    k1 = liouvillian_apply(model, rho)
    k2 = liouvillian_apply(model, rho + 0.5 * dt * k1)
    k3 = liouvillian_apply(model, rho + 0.5 * dt * k2)
    k4 = liouvillian_apply(model, rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _check_dt(model: WaveguideModel, dt: float) -> None:
    if not dt > 0 or dt * model.gamma > MAX_DT * (1 + 1e-12):
        raise StepTooLarge(f"dt = {dt:g} exceeds T1/100 = {MAX_DT / model.gamma:g}")


def time_grid(dt: float, t_max: float) -> np.ndarray:
    n = int(round(t_max / dt))
    if abs(n * dt - t_max) > 1e-9 * max(1.0, t_max):
        raise ValueError(f"t_max = {t_max:g} is not a whole number of steps of {dt:g}")
    return np.arange(n + 1) * dt


def evolve_array(model: WaveguideModel, rho0, dt: float, t_max: float) -> tuple[np.ndarray, np.ndarray]:
    """RK4 integration returning ``(times, states)`` as arrays."""
    _check_dt(model, dt)
    times = time_grid(dt, t_max)
    rho = qmat.hermitize(np.asarray(rho0, dtype=np.complex128))
    states = np.empty((len(times), 4, 4), dtype=np.complex128)
    states[0] = rho
    worst = 0.0
    for n in range(1, len(times)):
        rho = qmat.hermitize(rk4_step(model, rho, dt))
        tr = qmat.trace(rho).real
        worst = max(worst, abs(tr - 1.0))
        rho = rho / tr
        w, _ = qmat.eigh_unchecked(rho)
        if w[-1] < -POSITIVITY_TOL:
            raise PositivityLost(f"min eigenvalue {w[-1]:.3e} at t = {times[n]:g}")
        states[n] = rho
    log.debug("lindblad evolve: max trace correction %.3e over %d steps", worst, len(times) - 1)
    return times, states


def evolve(model: WaveguideModel, rho0, dt: float, t_max: float) -> list[DensityMatrix]:
    """Integrate the master equation with fixed-step RK4.

    Each step is re-symmetrised and divided by its trace. ``dt`` must not
    exceed T1/100.
    """
    times, states = evolve_array(model, rho0, dt, t_max)
    return [DensityMatrix(mat=s, time=float(t)) for t, s in zip(times, states)]
