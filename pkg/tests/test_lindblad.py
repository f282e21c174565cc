import numpy as np
import pytest

from wgbell import qmat
from wgbell.errors import StepTooLarge
from wgbell.lindblad import evolve, evolve_array, liouvillian_apply, steady_state_residual
from wgbell.measures import concurrence, trace_distance
from wgbell.model import KdParity, build_model, named_state
from wgbell.oracles import steady_state_rho

GG = qmat.outer(named_state("gg"))


def test_dark_state_is_stationary():
    rho = qmat.outer(named_state("PsiMinus"))
    assert np.max(np.abs(liouvillian_apply(build_model(), rho))) < 1e-14


def test_steady_state_residual_zero():
    assert steady_state_residual(build_model(), steady_state_rho().mat) < 1e-12


def test_ground_state_not_stationary():
    assert steady_state_residual(build_model(), GG) > 0.1


@pytest.mark.parametrize("parity", list(KdParity))
def test_generator_traceless_and_hermitian(parity):
    out = liouvillian_apply(build_model(kd_parity=parity, omega_tilde=0.3), np.eye(4) / 4)
    assert abs(np.trace(out)) < 1e-14
    assert np.allclose(out, out.conj().T)


def test_dark_state_trajectory_constant():
    rho0 = qmat.outer(named_state("PsiMinus"))
    for s in evolve(build_model(), rho0, 0.01, 2.0):
        assert trace_distance(s.mat, rho0) < 1e-9


def test_relaxes_to_steady_state():
    _, states = evolve_array(build_model(), GG, 0.005, 15.0)
    ss = steady_state_rho().mat
    assert trace_distance(states[-1], ss) < 1e-4
    assert abs(concurrence(states[-1]) - concurrence(ss)) < 1e-4


def test_invariants_each_step():
    _, states = evolve_array(build_model(omega_tilde=0.5), GG, 0.01, 3.0)
    assert np.max(np.abs(np.trace(states, axis1=1, axis2=2) - 1)) < 1e-12
    assert np.max(qmat.hermitian_deviation(states)) < 1e-12
    assert np.min(np.linalg.eigvalsh(states)) > -1e-9


def test_rk4_fourth_order():
    m = build_model(omega_tilde=0.7)
    t_max = 1.0
    _, ref = evolve_array(m, GG, 0.01 / 8, t_max)
    errs = []
    for dt in (0.01, 0.005):
        _, s = evolve_array(m, GG, dt, t_max)
        errs.append(np.max(np.abs(s[-1] - ref[-1])))
    assert 12 < errs[0] / errs[1] < 20


def test_step_too_large():
    with pytest.raises(StepTooLarge):
        evolve(build_model(), GG, 0.02, 1.0)
    with pytest.raises(StepTooLarge):
        evolve(build_model(gamma=2.0), GG, 0.01, 1.0)
