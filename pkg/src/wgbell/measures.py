"""Entanglement and observable extraction for two-qubit density matrices."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import qmat
from .errors import NotPSD, RecordTooShort
from .model import BELL_LABELS, named_state

# sigma_y (x) sigma_y is real in the computational basis
SPIN_FLIP = qmat.kron(qmat.SIGMA_Y, qmat.SIGMA_Y)

_BELL_VECTORS = np.array([named_state(lbl) for lbl in BELL_LABELS])
FIDELITY_NAMES = ("psi_plus", "psi_minus", "phi_plus", "phi_minus")


class Terminal(enum.Enum):
    PSI_MINUS_LIKE = "PsiMinusLike"
    PHI_MINUS_LIKE = "PhiMinusLike"
    PSI_PLUS_LIKE = "PsiPlusLike"
    PHI_PLUS_LIKE = "PhiPlusLike"
    SEPARABLE = "Separable"
    UNCONVERGED = "Unconverged"


# fidelity column index -> terminal label, in FIDELITY_NAMES order
_BELL_TERMINALS = (
    Terminal.PSI_PLUS_LIKE,
    Terminal.PSI_MINUS_LIKE,
    Terminal.PHI_PLUS_LIKE,
    Terminal.PHI_MINUS_LIKE,
)


def wootters_lambdas(rho: np.ndarray) -> np.ndarray:
    """Square roots of the spectrum of rho (sy x sy) rho* (sy x sy), descending.

    With rho = W W^dagger (W = V sqrt(diag(w))), these equal the singular
    values of the complex-symmetric tau = W^T (sy x sy) W. Computing them by
    one-sided Jacobi avoids square roots of near-zero eigenvalues, which would
    otherwise inject ~1e-8 noise for rank-deficient states.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    w, v = qmat.eigh_unchecked(rho)
    if np.any(w[..., -1] < -qmat.PSD_CLAMP):
        raise NotPSD(f"min eigenvalue {np.min(w[..., -1]):.3e}")
    W = v * np.sqrt(np.clip(w, 0.0, None))[..., None, :]
    tau = qmat.mm(np.swapaxes(W, -1, -2), qmat.mm(SPIN_FLIP, W))
    return qmat.singular_values(tau)


def concurrence(rho) -> float | np.ndarray:
    """Wootters concurrence, clamped to [0, 1]. Accepts a stack of states."""
    lam = wootters_lambdas(rho)
    c = lam[..., 0] - lam[..., 1] - lam[..., 2] - lam[..., 3]
    c = np.clip(c, 0.0, 1.0)
    return float(c) if c.ndim == 0 else c


def concurrence_pure(psi) -> float | np.ndarray:
    """2 |a0 a3 - a1 a2| for a normalized pure state."""
    psi = np.asarray(psi, dtype=np.complex128)
    c = 2 * np.abs(psi[..., 0] * psi[..., 3] - psi[..., 1] * psi[..., 2])
    return float(c) if c.ndim == 0 else c


def bell_fidelities(rho: np.ndarray) -> np.ndarray:
    """<B|rho|B> for B in (Psi+, Psi-, Phi+, Phi-), last axis."""
    rho = np.asarray(rho, dtype=np.complex128)
    vals = []
    for b in _BELL_VECTORS:
        rb = qmat.mv(rho, b) * np.conj(b)
        vals.append(np.real(rb[..., 0] + rb[..., 1] + rb[..., 2] + rb[..., 3]))
    return np.stack(vals, axis=-1)


@dataclass(frozen=True)
class ObservableSet:
    populations: np.ndarray  # (..., 4) real
    rho03: np.ndarray  # (...) complex
    rho12: np.ndarray
    concurrence: np.ndarray
    bell_fidelities: np.ndarray  # (..., 4) in FIDELITY_NAMES order

    def fidelity(self, name: str) -> np.ndarray:
        return self.bell_fidelities[..., FIDELITY_NAMES.index(name)]


def observables(rho) -> ObservableSet:
    rho = np.asarray(rho, dtype=np.complex128)
    pops = np.real(np.diagonal(rho, axis1=-2, axis2=-1)).copy()
    return ObservableSet(
        populations=pops,
        rho03=rho[..., 0, 3].copy(),
        rho12=rho[..., 1, 2].copy(),
        concurrence=np.asarray(concurrence(rho)),
        bell_fidelities=bell_fidelities(rho),
    )


def classify_state(
    fidelities: np.ndarray,
    conc: float,
    threshold: float = 0.98,
    separable_threshold: float = 0.02,
) -> Terminal:
    k = int(np.argmax(fidelities))
    if fidelities[k] >= threshold:
        return _BELL_TERMINALS[k]
    if conc <= separable_threshold:
        return Terminal.SEPARABLE
    return Terminal.UNCONVERGED


MIN_TERMINAL_TIME = 10.0  # in units of T1 = 1/gamma


def classify_terminal(
    record,
    threshold: float = 0.98,
    separable_threshold: float = 0.02,
) -> Terminal:
    """Label the final state of a trajectory record.

    A Bell label wins if the terminal fidelity to that Bell state reaches
    ``threshold``; otherwise the state is Separable when its concurrence is
    at most ``separable_threshold`` and Unconverged if not.

    Raises:
        RecordTooShort: if the record ends before 10 T1.
    """
    t_end = record.times[-1] * record.gamma
    if t_end < MIN_TERMINAL_TIME - 1e-9:
        raise RecordTooShort(f"record ends at {t_end:g} T1, need >= {MIN_TERMINAL_TIME:g}")
    obs = record.observables
    return classify_state(
        obs.bell_fidelities[-1],
        float(obs.concurrence[-1]),
        threshold,
        separable_threshold,
    )


def trace_distance(a, b) -> float | np.ndarray:
    """0.5 * trace norm of (a - b) for Hermitian inputs."""
    d = qmat.hermitize(np.asarray(a, dtype=complex) - np.asarray(b, dtype=complex))
    w, _ = qmat.eigh_unchecked(d)
    out = 0.5 * np.sum(np.abs(w), axis=-1)
    return float(out) if np.ndim(out) == 0 else out
