"""Effective two-qubit waveguide model.

Basis ordering is fixed throughout the package::

    |0> = |g1 g2>,  |1> = |g1 e2>,  |2> = |e1 g2>,  |3> = |e1 e2>

Qubit 1 is the left Kronecker factor, and each qubit uses (|g>, |e>).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import qmat
from .errors import BadParam


class KdParity(enum.Enum):
    EVEN = "even"  # kd = 2 n pi  -> J1 + J2
    ODD = "odd"  # kd = (2n + 1) pi -> J1 - J2


class StateLabel(enum.Enum):
    GG = "gg"
    GE = "ge"
    EG = "eg"
    EE = "ee"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    # the separable J eigenstates |phi+->, written lower-case in the literature
    SEP_PLUS = "sep+"
    SEP_MINUS = "sep-"


# case-sensitive: "PhiPlus" is the Bell state, "phiPlus" the separable one
_LABEL_NAMES = {
    "GG": StateLabel.GG,
    "GE": StateLabel.GE,
    "EG": StateLabel.EG,
    "EE": StateLabel.EE,
    "PsiPlus": StateLabel.PSI_PLUS,
    "PsiMinus": StateLabel.PSI_MINUS,
    "PhiPlus": StateLabel.PHI_PLUS,
    "PhiMinus": StateLabel.PHI_MINUS,
    "phiPlus": StateLabel.SEP_PLUS,
    "phiMinus": StateLabel.SEP_MINUS,
}

BELL_LABELS = (
    StateLabel.PSI_PLUS,
    StateLabel.PSI_MINUS,
    StateLabel.PHI_PLUS,
    StateLabel.PHI_MINUS,
)


def parse_label(text: str | StateLabel) -> StateLabel:
    if isinstance(text, StateLabel):
        return text
    key = text.strip()
    if key in _LABEL_NAMES:
        return _LABEL_NAMES[key]
    try:
        return StateLabel(key.lower())
    except ValueError:
        raise BadParam(f"unknown state label {text!r}") from None


def parse_parity(text: str | KdParity) -> KdParity:
    if isinstance(text, KdParity):
        return text
    try:
        return KdParity(text.strip().lower())
    except ValueError:
        raise BadParam(f"unknown kd parity {text!r}") from None


_R2 = 1 / np.sqrt(2)
_AMPLITUDES = {
    StateLabel.GG: (1, 0, 0, 0),
    StateLabel.GE: (0, 1, 0, 0),
    StateLabel.EG: (0, 0, 1, 0),
    StateLabel.EE: (0, 0, 0, 1),
    StateLabel.PSI_PLUS: (_R2, 0, 0, _R2),
    StateLabel.PSI_MINUS: (_R2, 0, 0, -_R2),
    StateLabel.PHI_PLUS: (0, _R2, _R2, 0),
    StateLabel.PHI_MINUS: (0, _R2, -_R2, 0),
    StateLabel.SEP_PLUS: (0.5, 0.5, 0.5, 0.5),
    StateLabel.SEP_MINUS: (0.5, -0.5, -0.5, 0.5),
}


def named_state(label: str | StateLabel) -> np.ndarray:
    """State vector for a basis, Bell or separable-eigenstate label."""
    return np.array(_AMPLITUDES[parse_label(label)], dtype=complex)


def lowering(qubit: int) -> np.ndarray:
    """sigma_j for qubit 1 or 2 embedded in the two-qubit space."""
    if qubit == 1:
        return qmat.kron(qmat.SIGMA_MINUS, qmat.I2)
    if qubit == 2:
        return qmat.kron(qmat.I2, qmat.SIGMA_MINUS)
    raise BadParam(f"qubit must be 1 or 2, got {qubit}")


def quadrature(qubit: int) -> np.ndarray:
    """J_j = (sigma_j + sigma_j^dagger) / sqrt(2)."""
    s = lowering(qubit)
    return (s + qmat.dag(s)) / np.sqrt(2)


def collective_operator(parity: KdParity) -> np.ndarray:
    j1, j2 = quadrature(1), quadrature(2)
    return j1 + j2 if parity is KdParity.EVEN else j1 - j2


@dataclass(frozen=True)
class WaveguideModel:
    gamma: float
    omega_tilde: float
    kd_parity: KdParity
    eta_l: float
    eta_r: float
    J_l: np.ndarray = field(repr=False, compare=False)
    J_r: np.ndarray = field(repr=False, compare=False)
    H0: np.ndarray = field(repr=False, compare=False)

    @property
    def etas(self) -> tuple[float, float]:
        return (self.eta_l, self.eta_r)

    @property
    def jump_ops(self) -> tuple[np.ndarray, np.ndarray]:
        return (self.J_l, self.J_r)

    @cached_property
    def decay_operator(self) -> np.ndarray:
        """gamma * sum_lambda J^dagger J  (twice the no-jump exponent rate)."""
        return self.gamma * sum(qmat.mm(qmat.dag(j), j) for j in self.jump_ops)


def build_model(
    gamma: float = 1.0,
    omega_tilde: float = 0.0,
    kd_parity: str | KdParity = KdParity.EVEN,
    eta_l: float = 1.0,
    eta_r: float = 1.0,
) -> WaveguideModel:
    parity = parse_parity(kd_parity)
    if not np.isfinite(gamma) or gamma <= 0:
        raise BadParam(f"gamma must be > 0, got {gamma}")
    if not np.isfinite(omega_tilde):
        raise BadParam(f"omega_tilde must be finite, got {omega_tilde}")
    for name, eta in (("eta_l", eta_l), ("eta_r", eta_r)):
        if not 0.0 <= eta <= 1.0:
            raise BadParam(f"{name} must lie in [0, 1], got {eta}")
    j = collective_operator(parity)
    sz = qmat.kron(qmat.SIGMA_Z, qmat.I2) + qmat.kron(qmat.I2, qmat.SIGMA_Z)
    h0 = 0.5 * omega_tilde * sz
    for arr in (j, h0):
        arr.setflags(write=False)
    return WaveguideModel(
        gamma=float(gamma),
        omega_tilde=float(omega_tilde),
        kd_parity=parity,
        eta_l=float(eta_l),
        eta_r=float(eta_r),
        J_l=j,
        J_r=j,
        H0=h0,
    )


def jump_operator_set(model: WaveguideModel) -> list[tuple[np.ndarray, float]]:
    """(operator, efficiency) per output port, left first.

    Unmonitored ports (efficiency 0) are still listed: they keep dissipating.
    """
    return [(model.J_l, model.eta_l), (model.J_r, model.eta_r)]
