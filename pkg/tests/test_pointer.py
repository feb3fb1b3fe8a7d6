import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from histweak import linalg as la
from histweak.errors import GridTooCoarse, PostSelectionImpossible, ValidationError
from histweak.histories import SegmentedEvolution
from histweak.pointer import (
    CouplingSpec,
    GaussianMeter,
    JointState,
    MeterState,
    PointerInstance,
    apply_system,
    correlator_predictions,
    evolve_impulsive,
    extract_sequential_wv,
    extract_single_wv,
    initial_meter,
    joint_initial,
    meter_moments,
    postselect,
    scaling_study,
    simulate,
)
from histweak.randomized import random_pointer_instance, random_state, random_unitary

seeds = st.integers(0, 2**32 - 1)
KET0 = np.array([1.0, 0.0])
PLUS = np.array([1.0, 1.0]) / np.sqrt(2)
SMALL = GaussianMeter(1.0, 256, 16.0)


def _moments_1d(m, psi):
    dx = m.dx
    p = np.abs(psi) ** 2 * dx
    spec = np.abs(np.fft.fft(psi)) ** 2
    spec /= spec.sum()
    return p, spec


@pytest.mark.parametrize("sigma,var_k", [(1.0, 0.25), (0.5, 1.0)])
def test_initial_meter(sigma, var_k):
    m = GaussianMeter(sigma, 1024, 16 * sigma)
    phi = initial_meter(m)
    p, pk = _moments_1d(m, phi)
    assert abs(p.sum() - 1) < 1e-12
    assert abs(m.x @ p) < 1e-12
    assert abs((m.x**2 @ p) / sigma**2 - 1) < 1e-6
    assert abs(m.k @ pk) < 1e-12
    assert abs((m.k**2 @ pk) / var_k - 1) < 1e-6


def test_meter_validation():
    with pytest.raises(GridTooCoarse):
        GaussianMeter(1.0, 256, 64.0)
    with pytest.raises(ValidationError):
        GaussianMeter(1.0, 1000, 16.0)
    with pytest.raises(ValidationError):
        GaussianMeter(1.0, 1024, 4.0)
    with pytest.raises(ValidationError):
        GaussianMeter(1.0, 128, 8.0)


def test_identity_coupling_translates():
    m = GaussianMeter()
    js = joint_initial(KET0, m)
    out = evolve_impulsive(js, CouplingSpec(0.3, np.eye(2)))
    state, prob = postselect(out, KET0)
    assert prob == pytest.approx(1, abs=1e-12)
    assert abs(meter_moments(state).mean_x[0] - 0.3) < 1e-12
    # system untouched: all weight stays on |0>
    assert np.abs(out.amplitudes[1]).max() == 0


def test_eigenstate_shift():
    m = GaussianMeter()
    js = evolve_impulsive(joint_initial(KET0, m), CouplingSpec(0.5, np.diag([1.0, -1.0])))
    shifted = (2 * np.pi) ** -0.25 * np.exp(-((m.x - 0.5) ** 2) / 4) * np.sqrt(m.dx)
    assert np.abs(js.amplitudes[0] - shifted).max() < 1e-12


def test_zero_coupling_is_bitwise_identity():
    js = joint_initial(PLUS, GaussianMeter())
    out = evolve_impulsive(js, CouplingSpec(0.0, np.diag([1.0, -1.0])))
    assert np.array_equal(out.amplitudes, js.amplitudes)


def test_shift_limit():
    js = joint_initial(KET0, GaussianMeter())
    with pytest.raises(ValidationError):
        evolve_impulsive(js, CouplingSpec(5.0, np.eye(2)))


def test_non_hermitian_coupling():
    with pytest.raises(ValidationError):
        CouplingSpec(0.1, np.array([[0, 1], [0, 0]]))


def test_postselect_orthogonal():
    js = joint_initial(KET0, GaussianMeter())
    with pytest.raises(PostSelectionImpossible):
        postselect(js, [0.0, 1.0])


def test_postselect_uncoupled():
    js = joint_initial(PLUS, GaussianMeter())
    state, prob = postselect(js, PLUS)
    assert prob == pytest.approx(1, abs=1e-12)
    assert np.abs(state.wavefunction() - initial_meter(js.meter)).max() < 1e-12


def _overlap_oracle(pre, post, a, g, sigma):
    """Closed-form pointer state sum_l c_l phi(x - g l) for H = 0: probability, <x>, <k>."""
    dec = la.spectral_decompose(a)
    lam = np.array(dec.eigenvalues)
    c = np.array([np.vdot(post, p.op @ pre) for p in dec.projectors])
    d = g * (lam[:, None] - lam[None, :])
    ov = np.exp(-d**2 / (8 * sigma**2))
    cc = np.conj(c)[:, None] * c[None, :]
    prob = np.sum(cc * ov).real
    mean_x = np.sum(cc * ov * g * (lam[:, None] + lam[None, :]) / 2).real / prob
    mean_k = np.sum(cc * ov * 1j * d / (4 * sigma**2)).real / prob
    return prob, mean_x, mean_k


@pytest.mark.parametrize("seed", range(5))
def test_single_pointer_matches_gaussian_overlaps(seed):
    rng = np.random.default_rng(seed)
    pre, post = random_state(3, rng), random_state(3, rng)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    a = (a + a.conj().T) / 2
    m = GaussianMeter(0.8, 1024, 16.0)
    state, prob = simulate(pre, post, SegmentedEvolution.identity(3, 1), [CouplingSpec(0.3, a)], m)
    mom = meter_moments(state)
    p0, x0, k0 = _overlap_oracle(pre, post, a, 0.3, 0.8)
    assert abs(prob - p0) < 1e-12
    assert abs(mom.mean_x[0] - x0) < 1e-9
    assert abs(mom.mean_k[0] - k0) < 1e-9


def test_postselect_probability_dense_oracle(rng):
    inst = random_pointer_instance(rng)
    m = SMALL
    state, prob = simulate(inst.pre, inst.post, inst.evolution, inst.couplings(0.2), m)
    # dense oracle: build exp(-i g A (x) p) as a full matrix on system (x) grid
    n, M = 2, m.grid_points
    a = inst.observables[0][1]
    w, v = np.linalg.eigh(a)
    f = np.fft.fft(np.eye(M), axis=0)
    finv = np.fft.ifft(np.eye(M), axis=0)
    big = sum(np.kron(np.outer(v[:, j], v[:, j].conj()), finv @ np.diag(np.exp(-0.2j * w[j] * m.k)) @ f) for j in range(n))
    u0, u1 = inst.evolution.segments
    psi = np.kron(u0 @ inst.pre, initial_meter(m) * np.sqrt(m.dx))
    psi = np.kron(u1, np.eye(M)) @ (big @ psi)
    meter = np.kron(inst.post.conj()[None, :], np.eye(M)) @ psi
    assert abs(prob - np.vdot(meter, meter).real) < 1e-12
    assert np.abs(state.amplitudes * np.sqrt(prob) - meter).max() < 1e-12


def test_moments_uncoupled():
    m = GaussianMeter(1.0, 256, 16.0)
    mom = meter_moments(postselect(joint_initial(KET0, m, 2), KET0)[0])
    assert max(abs(v) for v in (*mom.mean_x, *mom.mean_k, mom.xx, mom.kk, mom.xk, mom.kx)) < 1e-12


def test_moments_translation_and_ramp():
    m = GaussianMeter()
    d, k0 = 1.7, 0.9
    phi = (2 * np.pi) ** -0.25 * np.exp(-((m.x - d) ** 2) / 4)
    mom = meter_moments(MeterState(phi * np.sqrt(m.dx) + 0j, m))
    assert abs(mom.mean_x[0] - d) < 1e-9
    ramp = initial_meter(m) * np.exp(1j * k0 * m.x)
    mom = meter_moments(MeterState(ramp * np.sqrt(m.dx), m))
    assert abs(mom.mean_k[0] - k0) < 1e-6


def test_extract_identity_exact():
    inst = PointerInstance(KET0, PLUS, SegmentedEvolution.identity(2, 1), ((1, np.eye(2)),))
    for g in (0.01, 0.1, 0.3):
        mom, _ = inst.run(g, GaussianMeter())
        assert abs(extract_single_wv(mom, g, 1.0) - 1) < 1e-11


def test_extract_zero_weak_value():
    inst = PointerInstance(KET0, PLUS, SegmentedEvolution.identity(2, 1), ((1, np.diag([0.0, 1.0])),))
    assert inst.single_weak_values()[0] == 0
    # the |1> eigenspace carries no amplitude here, so the pointer never moves
    for g in (0.08, 0.04, 0.02, 0.01):
        mom, _ = inst.run(g, GaussianMeter())
        assert abs(extract_single_wv(mom, g, 1.0)) < 10 * g**2


def test_extract_random_instance(rng):
    inst = random_pointer_instance(rng)
    g = 1e-2
    mom, _ = inst.run(g, GaussianMeter())
    assert abs(extract_single_wv(mom, g, 1.0) - inst.single_weak_values()[0]) < 10 * g**2


def test_sequential_identities():
    inst = PointerInstance(KET0, PLUS, SegmentedEvolution.identity(2, 2), ((1, np.eye(2)), (2, np.eye(2))))
    g = 0.1
    mom, _ = inst.run(g, SMALL)
    assert abs(mom.xx - g * g) < 1e-12
    assert max(abs(mom.kk), abs(mom.xk), abs(mom.kx)) < 1e-12
    pred = correlator_predictions(1, 1, 1, g, 1.0)
    assert pred == pytest.approx({"xx": g * g, "kk": 0, "xk": 0, "kx": 0})
    est = extract_sequential_wv(mom, (1, 1), g, 1.0)
    assert abs(est.correlator - 1) < 1e-10
    assert abs(est.subtraction - 1) < 1e-10


def test_sequential_zero_coupling():
    inst = PointerInstance(KET0, PLUS, SegmentedEvolution.identity(2, 2), ((1, np.diag([1.0, -1.0])), (2, np.eye(2))))
    mom, _ = inst.run(0.0, SMALL)
    assert max(abs(mom.xx), abs(mom.kk), abs(mom.xk), abs(mom.kx)) < 1e-14


def test_sequential_plus_then_zero():
    inst = PointerInstance(KET0, PLUS, SegmentedEvolution.identity(2, 2), ((1, la.ket_bra(PLUS)), (2, np.diag([1.0, 0.0]))))
    target = inst.sequential_weak_value()
    # <+|0><0|+><+|0> / <+|0> = 1/2
    assert target == pytest.approx(0.5)
    errs = []
    for g in (0.08, 0.04, 0.02):
        mom, _ = inst.run(g, SMALL)
        errs.append(abs(extract_sequential_wv(mom, inst.single_weak_values(), g, 1.0).correlator - target))
    assert errs == sorted(errs, reverse=True)
    assert errs[-1] < 50 * 0.02


def test_scaling_identity_zero():
    inst = PointerInstance(KET0, PLUS, SegmentedEvolution.identity(2, 1), ((1, np.eye(2)),))
    study = scaling_study(inst, [0.16, 0.08, 0.04], GaussianMeter())
    assert all(r.residual < 1e-12 and r.error < 1e-11 for r in study.rows)
    assert study.slope is None


def test_scaling_single_slope(rng):
    inst = random_pointer_instance(rng)
    study = scaling_study(inst, [0.16, 0.08, 0.04, 0.02], GaussianMeter())
    assert study.slope >= 2.7


def test_scaling_sequential_leading_order(rng):
    inst = random_pointer_instance(rng, sequential=True, free=True)
    study = scaling_study(inst, [0.1, 0.05, 0.02], SMALL)
    res = [r.residual for r in study.rows]
    assert res == sorted(res, reverse=True)
    assert res[-1] < 1e-2 * max(1, abs(study.target))
    assert study.slope == pytest.approx(2, abs=0.1)


def test_scaling_rejects_bad_grid(rng):
    inst = random_pointer_instance(rng)
    with pytest.raises(ValidationError):
        scaling_study(inst, [0.02, 0.04], GaussianMeter())
    with pytest.raises(ValidationError):
        scaling_study(inst, [0.5], GaussianMeter())


@settings(max_examples=20, deadline=None)
@given(seed=seeds, g=st.floats(0.0, 0.5))
def test_norm_preserved(seed, g):
    rng = np.random.default_rng(seed)
    m = SMALL
    js = joint_initial(random_state(3, rng), m, 2)
    a = rng.normal(size=(3, 3))
    a = (a + a.T) / np.abs(np.linalg.eigvalsh(a + a.T)).max()
    for i in (0, 1):
        js = apply_system(js, random_unitary(3, rng))
        js = evolve_impulsive(js, CouplingSpec(g, a, meter_index=i, at=i + 1))
    assert isinstance(js, JointState)
    assert abs(js.norm() - 1) < 1e-12


@settings(max_examples=12, deadline=None)
@given(seed=seeds, g=st.sampled_from([0.01, 0.02, 0.05]))
def test_correlator_identity_suite(seed, g):
    inst = random_pointer_instance(np.random.default_rng(seed), sequential=True, free=True)
    a1, a2 = inst.single_weak_values()
    a21 = inst.sequential_weak_value()
    mom, _ = inst.run(g, SMALL)
    pred = correlator_predictions(a1, a2, a21, g, 1.0)
    tol = max(1e-8, 50 * g**3)
    for key in ("xx", "kk", "xk", "kx"):
        assert abs(getattr(mom, key) - pred[key]) < tol, key


@settings(max_examples=12, deadline=None)
@given(seed=seeds, g=st.sampled_from([0.01, 0.02]))
def test_recovery_methods_agree(seed, g):
    inst = random_pointer_instance(np.random.default_rng(seed), sequential=True, free=True)
    target = inst.sequential_weak_value()
    mom, _ = inst.run(g, SMALL)
    est = extract_sequential_wv(mom, inst.single_weak_values(), g, 1.0)
    scale = max(abs(est.correlator), abs(est.subtraction), 1e-300)
    assert abs(est.correlator - est.subtraction) / scale < max(1e-8, 50 * g)
    assert abs(est.correlator - target) < 50 * g
    assert abs(est.subtraction - target) < 50 * g


@settings(max_examples=20, deadline=None)
@given(g=st.floats(0.0, 4.0))
def test_identity_translation_any_g(g):
    m = GaussianMeter()
    state, _ = postselect(evolve_impulsive(joint_initial(KET0, m), CouplingSpec(g, np.eye(2))), KET0)
    assert abs(meter_moments(state).mean_x[0] - g) < 1e-10
