"""Closed-form reference results used as ground truth by tests and the CLI."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import qmat
from .errors import BadParam, KernelState
from .lindblad import DensityMatrix
from .model import KdParity, StateLabel, named_state, parse_label, parse_parity

L = StateLabel

# image of each state under J1 +/- J2, up to normalisation and global phase
_JUMP_TABLE = {
    KdParity.EVEN: {
        L.GG: L.PHI_PLUS,
        L.GE: L.PSI_PLUS,
        L.EG: L.PSI_PLUS,
        L.EE: L.PHI_PLUS,
        L.PHI_PLUS: L.PSI_PLUS,
        L.PSI_PLUS: L.PHI_PLUS,
        L.PSI_MINUS: None,
        L.PHI_MINUS: None,
    },
    KdParity.ODD: {
        L.GG: L.PHI_MINUS,
        L.GE: L.PSI_MINUS,
        L.EG: L.PSI_MINUS,
        L.EE: L.PHI_MINUS,
        L.PHI_MINUS: L.PSI_MINUS,
        L.PSI_MINUS: L.PHI_MINUS,
        L.PSI_PLUS: None,
        L.PHI_PLUS: None,
    },
}


class Formula(enum.Enum):
    NO_JUMP_CONCURRENCE = "no_jump_concurrence"
    HOMODYNE_MEAN = "homodyne_mean_concurrence"


@dataclass(frozen=True)
class OracleCurve:
    times: np.ndarray
    values: np.ndarray
    formula: Formula


def no_jump_state(gamma: float, t: float) -> np.ndarray:
    """Conditional state from |g1 g2> when no photon is counted up to ``t``."""
    if t < 0:
        raise BadParam("t must be >= 0")
    a = np.exp(-2 * gamma * t)
    norm = np.sqrt(2 * (1 + a * a))
    return np.array([(1 + a) / norm, 0, 0, -(1 - a) / norm], dtype=complex)


def no_jump_concurrence(gamma: float, t):
    x = np.exp(-4 * gamma * np.asarray(t, dtype=float))
    out = (1 - x) / (1 + x)
    return float(out) if out.ndim == 0 else out


def _check_homodyne_scope(initial, eta_l, eta_r, kd_parity) -> None:
    if parse_label(initial) is not L.GG:
        raise BadParam("closed form only holds for the |g1 g2> initial state")
    if parse_parity(kd_parity) is not KdParity.EVEN:
        raise BadParam("closed form only holds for even kd parity")
    if eta_r != 1.0 or eta_l != 0.0:
        raise BadParam("closed form only holds for eta_r = 1 with the left port unmonitored")


def mean_homodyne_concurrence(
    gamma: float,
    t,
    *,
    initial: str | StateLabel = L.GG,
    eta_l: float = 0.0,
    eta_r: float = 1.0,
    kd_parity: str | KdParity = KdParity.EVEN,
):
    """Quoted closed-form ensemble-average concurrence under right-port homodyning.

    1/2 - exp(-3 gamma t)/5 - 3 exp(-8 gamma t)/10, stated only for |g1 g2>,
    eta_r = 1, eta_l = 0 and even parity; other configurations are refused.
    """
    _check_homodyne_scope(initial, eta_l, eta_r, kd_parity)
    gt = gamma * np.asarray(t, dtype=float)
    out = 0.5 - 0.2 * np.exp(-3 * gt) - 0.3 * np.exp(-8 * gt)
    return float(out) if out.ndim == 0 else out


def mean_homodyne_concurrence_qnd(gamma: float, t, eta_l: float = 0.0, eta_r: float = 1.0):
    """Exact ensemble-mean concurrence of the homodyne equation from |g1 g2>.

    J is Hermitian, so the monitored ports perform a QND measurement of J.
    The state stays in span{|phi+>, |phi->, |Psi->} (J = +sqrt2, -sqrt2, 0)
    with prior weights 1/4, 1/4, 1/2. With measurement strength
    k = sum_lambda eta_lambda * gamma / 2 and record Y, the unnormalised
    posterior weights are w_pm = exp(+-2 sqrt(2k) Y - 4 k t) / 4 and
    w_0 = 1/2, and the concurrence is (w_0 - 2 sqrt(w_+ w_-)) / sum(w).
    Averaging over the record density sum(w) * N(0, t) cancels the
    normaliser, leaving 1/2 (1 - exp(-4 k t)).
    """
    k = (eta_l + eta_r) * gamma / 2
    out = 0.5 * (1 - np.exp(-4 * k * np.asarray(t, dtype=float)))
    return float(out) if out.ndim == 0 else out


def oracle_curve(formula: Formula, gamma: float, times) -> OracleCurve:
    times = np.asarray(times, dtype=float)
    if formula is Formula.NO_JUMP_CONCURRENCE:
        values = no_jump_concurrence(gamma, times)
    else:
        values = mean_homodyne_concurrence(gamma, times)
    return OracleCurve(times=times, values=np.asarray(values), formula=formula)


def jump_map(parity: str | KdParity, label: str | StateLabel) -> StateLabel:
    """Label of the (normalised) state reached by one photon count.

    Raises:
        KernelState: if the collective operator annihilates the state.
    """
    parity = parse_parity(parity)
    label = parse_label(label)
    table = _JUMP_TABLE[parity]
    if label not in table:
        raise BadParam(f"no jump entry for {label.name}")
    image = table[label]
    if image is None:
        raise KernelState(f"{label.name} is dark for {parity.name.lower()} parity")
    return image


def steady_state_rho() -> DensityMatrix:
    """1/2 |Psi-><Psi-| + 1/4 (|phi+><phi+| + |phi-><phi-|)."""
    mat = 0.5 * qmat.outer(named_state(L.PSI_MINUS)) + 0.25 * (
        qmat.outer(named_state(L.SEP_PLUS)) + qmat.outer(named_state(L.SEP_MINUS))
    )
    return DensityMatrix(mat=mat, time=np.inf)
