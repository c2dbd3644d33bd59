import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg

from roughregen.path_lift import decomposition_defect, level2_stratonovich
from roughregen.regen import (
    DelayedRandomWalk,
    FiniteLaw,
    LinearDrift,
    MarkovAdditive,
    MarkovChainSpec,
    PeriodicEnvWalk,
    RegenTrajectory,
    Rotor,
    assumption_report,
    block_stats,
    excursion_expectation,
    gen_delayed_rw,
    gen_markov_additive,
    gen_periodic_env_rw,
    gen_rotor,
    kappa,
    simple_walk_law,
    skeleton_walk,
)

J = np.array([[0.0, 1.0], [-1.0, 0.0]])


def three_state_chain():
    P = np.array([[0.2, 0.5, 0.3], [0.4, 0.1, 0.5], [0.6, 0.3, 0.1]])
    f = np.array([[1.0, 0.0], [0.0, 2.0], [-1.0, 1.0]])
    return MarkovChainSpec(P, f, anchor=0)


def two_coordinate_profile():
    right = FiniteLaw([[1, 1], [-1, 0]], [0.7, 0.3])
    left = FiniteLaw([[1, 0], [-1, -1]], [0.3, 0.7])
    return (right, left)


GENERATORS = {
    "rw": DelayedRandomWalk(simple_walk_law(2), FiniteLaw([[3.0, 0.0]], [1.0])),
    "markov": MarkovAdditive(three_state_chain()),
    "rotor": Rotor(0.75, True),
    "rotor_excursion": Rotor(0.3, False, excursion=2),
    "periodic": PeriodicEnvWalk(two_coordinate_profile()),
}


# -- laws -----------------------------------------------------------------------------


def test_finite_law_validation():
    with pytest.raises(ValueError):
        FiniteLaw([[1.0], [-1.0]], [0.5, 0.6])
    with pytest.raises(ValueError):
        FiniteLaw([[1.0], [-1.0]], [1.5, -0.5])
    law = simple_walk_law(2)
    np.testing.assert_allclose(law.second_moment(), 0.5 * np.eye(2))
    assert not law.mean().any()


def test_non_centered_step_rejected():
    with pytest.raises(ValueError, match="centered"):
        DelayedRandomWalk(FiniteLaw([[1.0], [-1.0]], [0.6, 0.4]))


# -- delayed walk ----------------------------------------------------------------------------


def test_walk_blocks_are_single_steps():
    traj = gen_delayed_rw(simple_walk_law(2), 200, seed=4)
    b = block_stats(traj)
    assert np.all(b.T == 1)
    assert not b.A.any()
    np.testing.assert_array_equal(b.Xi, np.abs(b.Y))
    np.testing.assert_array_equal(traj.tau, np.arange(201))


def test_walk_delay_law():
    traj = gen_delayed_rw(simple_walk_law(2), 50, seed=1, delay_law=FiniteLaw([[3.0, 0.0]], [1.0]))
    b = block_stats(traj)
    np.testing.assert_array_equal(b.Y[0], [3.0, 0.0])
    assert np.all(np.abs(b.Y[1:]).sum(axis=1) == 1)


def test_seed_determinism():
    for gen in GENERATORS.values():
        a = gen.sample(300, 17)
        b = gen.sample(300, 17)
        np.testing.assert_array_equal(a.path, b.path)
        np.testing.assert_array_equal(a.tau, b.tau)


# -- rotor -------------------------------------------------------------------------------------


def test_rotor_deterministic_blocks():
    traj = gen_rotor(1.0, False, 40, seed=0)
    b = block_stats(traj)
    assert np.all(b.T == 4)
    np.testing.assert_array_equal(b.A, np.broadcast_to(J, b.A.shape))
    np.testing.assert_array_equal(b.Xi, np.ones_like(b.Xi))
    assert not skeleton_walk(traj).any()


def test_rotor_extra_step_moments():
    traj = gen_rotor(0.5, True, 500_000, seed=2)
    b = block_stats(traj)
    assert np.all(b.T == 5)
    outer = (b.Y[:, :, None] * b.Y[:, None, :]).mean(axis=0)
    np.testing.assert_allclose(outer, 0.5 * np.eye(2), atol=0.01)
    # symmetric orientation: mean area is zero within noise
    assert abs(b.A[:, 0, 1].mean()) < 4 / np.sqrt(len(b))
    exact = Rotor(0.5, True).exact_limits()
    np.testing.assert_allclose(exact.sigma, 0.1 * np.eye(2))
    assert exact.mean_T == 5


def test_rotor_kappa():
    traj = gen_rotor(0.3, False, 400, seed=5)
    m = np.arange(50)
    for r in (0.0, 1.0, 2.5, 3.999):
        np.testing.assert_array_equal(kappa(traj, 4 * m + r), m)


# -- Markov chain --------------------------------------------------------------------------------


def test_return_time_matches_kac():
    spec = three_state_chain()
    P = spec.transition
    w, v = linalg.eig(P.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1))])
    pi /= pi.sum()
    for x in range(3):
        assert excursion_expectation(P, x, np.ones(3)) == pytest.approx(1 / pi[x], rel=1e-12)


def test_markov_centering_makes_blocks_mean_zero():
    spec = three_state_chain()
    traj = gen_markov_additive(spec, 200_000, seed=9)
    b = block_stats(traj).generic()
    se = b.Y.std(axis=0, ddof=1) / np.sqrt(len(b))
    assert np.all(np.abs(b.Y.mean(axis=0)) < 4 * se)
    # the exact block mean vanishes: E[D] - E[T] c = 0
    assert np.allclose(spec.expected_excursion_sum() - spec.expected_return_time() * spec.centering(), 0, atol=1e-12)


def test_markov_constant_functional():
    spec = MarkovChainSpec(np.array([[0.3, 0.7], [0.6, 0.4]]), np.array([[2.0], [2.0]]))
    traj = gen_markov_additive(spec, 500, seed=1)
    # X_0 = f(x) and every centered step is zero
    np.testing.assert_allclose(traj.path, 2.0, atol=1e-12)
    np.testing.assert_allclose(block_stats(traj).Y, 0, atol=1e-12)


def test_markov_triangle_cycle():
    P = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)
    f = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    spec = MarkovChainSpec(P, f)
    traj = gen_markov_additive(spec, 30, seed=0)
    b = block_stats(traj)
    assert np.all(b.T == 3)
    np.testing.assert_allclose(b.Y, 0, atol=1e-12)
    # triangle (0,0) -> (1,0) -> (1,1) -> (0,0) relative to the block start
    np.testing.assert_allclose(b.A, np.broadcast_to(0.5 * J, b.A.shape), atol=1e-12)


def test_reducible_chain_rejected():
    with pytest.raises(ValueError, match="reducible"):
        MarkovChainSpec(np.array([[1.0, 0.0], [0.5, 0.5]]), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        MarkovChainSpec(np.array([[0.5, 0.4], [0.5, 0.5]]), np.zeros((2, 1)))


def test_zero_functional_flags():
    spec = MarkovChainSpec(np.array([[0.3, 0.7], [0.6, 0.4]]), np.zeros((2, 2)))
    rep = assumption_report(block_stats(gen_markov_additive(spec, 2000, seed=3)))
    assert rep["zero_flags"] == [0, 1]


# -- periodic environment -------------------------------------------------------------------------


def test_period_one_is_a_random_walk():
    law = simple_walk_law(2)
    a = gen_periodic_env_rw([law], 300, seed=8)
    b = DelayedRandomWalk(law).sample(300, 8)
    np.testing.assert_array_equal(a.path, b.path)
    np.testing.assert_array_equal(a.tau, b.tau)


def test_mirrored_profile_has_zero_drift():
    right = FiniteLaw([[1.0], [-1.0]], [0.8, 0.2])
    left = FiniteLaw([[1.0], [-1.0]], [0.2, 0.8])
    walk = PeriodicEnvWalk((right, left))
    np.testing.assert_allclose(walk.drift(), 0, atol=1e-12)
    b = block_stats(walk.sample(100_000, 4)).generic()
    assert abs(b.Y.mean()) < 4 * b.Y.std(ddof=1) / np.sqrt(len(b))


def test_asymmetric_profile_centered():
    profile = (
        FiniteLaw([[1.0, 0.0], [-1.0, 1.0]], [0.6, 0.4]),
        FiniteLaw([[1.0, -1.0], [-1.0, 0.0]], [0.3, 0.7]),
        FiniteLaw([[2.0, 0.0], [-1.0, 0.5]], [0.5, 0.5]),
    )
    walk = PeriodicEnvWalk(profile)
    assert np.abs(walk.drift()).max() > 0.01
    b = block_stats(walk.sample(200_000, 6)).generic()
    se = b.Y.std(axis=0, ddof=1) / np.sqrt(len(b))
    assert np.all(np.abs(b.Y.mean(axis=0)) < 3.5 * se)


def test_periodic_profile_validation():
    with pytest.raises(ValueError, match="integer"):
        PeriodicEnvWalk((FiniteLaw([[0.5], [-0.5]], [0.5, 0.5]),))
    with pytest.raises(ValueError, match="reducible"):
        PeriodicEnvWalk((FiniteLaw([[2.0], [-2.0]], [0.5, 0.5]), simple_walk_law(1)))


# -- generic block invariants ------------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(GENERATORS))
def test_block_invariants(name):
    traj = GENERATORS[name].sample(3000, 11)
    b = block_stats(traj)
    assert np.all(b.T >= 1)
    assert np.all(np.abs(b.Y) <= b.Xi + 1e-12)
    np.testing.assert_array_equal(b.A, -np.swapaxes(b.A, 1, 2))
    bound = 4 * b.Xi[:, :, None] * b.Xi[:, None, :] * b.T[:, None, None]
    assert np.all(np.abs(b.A) <= bound + 1e-12)
    Z = skeleton_walk(traj)
    assert not Z[0].any()
    np.testing.assert_allclose(np.diff(Z, axis=0), b.Y, atol=1e-12)
    np.testing.assert_allclose(Z[-1], traj.path[traj.tau[-1]] - traj.path[0], atol=1e-12)
    # kappa inverts tau
    np.testing.assert_array_equal(kappa(traj, traj.tau[:-1]), np.arange(traj.complete_blocks))


@pytest.mark.parametrize("name", sorted(GENERATORS))
def test_block_area_matches_lift(name):
    traj = GENERATORS[name].sample(400, 2)
    b = block_stats(traj)
    for k in range(min(10, len(b))):
        I = level2_stratonovich(traj.path, int(traj.tau[k]), int(traj.tau[k + 1]))
        np.testing.assert_allclose(b.A[k], 0.5 * (I - I.T), atol=1e-10)


@pytest.mark.parametrize("name", sorted(GENERATORS))
def test_generic_blocks_exchangeable(name):
    b = block_stats(GENERATORS[name].sample(100_000, 21)).generic()
    half = len(b) // 2
    stat = b.Xi[:, 0] ** 2
    m1, m2 = stat[:half].mean(), stat[half : 2 * half].mean()
    se = stat.std(ddof=1) * np.sqrt(2 / half)
    assert abs(m1 - m2) < 4 * se + 1e-12


def test_partial_tail_excluded():
    traj = gen_rotor(1.0, False, 10, seed=0)
    b = block_stats(traj)
    assert len(b) == 2 and traj.tau[-1] == 8


@pytest.mark.parametrize("name", sorted(GENERATORS))
@given(data=st.data())
@settings(max_examples=10, deadline=None)
def test_decomposition_identity(name, data):
    traj = GENERATORS[name].sample(300, data.draw(st.integers(0, 10**6)))
    K = traj.complete_blocks
    ell = data.draw(st.integers(0, K - 1))
    k = data.draw(st.integers(ell + 1, K))
    assert np.max(np.abs(decomposition_defect(traj, ell, k))) <= 1e-10 * max(1.0, np.abs(traj.path).max() ** 2)


def test_decomposition_examples():
    traj = gen_rotor(0.6, False, 20, seed=3)
    assert np.max(np.abs(decomposition_defect(traj, 0, 5))) < 1e-10
    traj = gen_delayed_rw(simple_walk_law(2), 20, seed=3)
    assert np.max(np.abs(decomposition_defect(traj, 2, 9))) < 1e-12
    with pytest.raises(IndexError):
        decomposition_defect(traj, 3, 3)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        RegenTrajectory(np.zeros((5, 1)), [1, 2])
    with pytest.raises(ValueError):
        RegenTrajectory(np.zeros((5, 1)), [0, 2, 2])
    with pytest.raises(ValueError):
        RegenTrajectory(np.zeros((5, 1)), [0, 7])
    traj = RegenTrajectory(np.zeros((5, 1)), [0, 2, 4])
    with pytest.raises(IndexError):
        kappa(traj, 4)
    assert kappa(traj, 2) == 1 and kappa(traj, 2.5) == 1


def test_assumption_report_simple_walk():
    rep = assumption_report(block_stats(gen_delayed_rw(simple_walk_law(2), 100_000, seed=12)))
    np.testing.assert_allclose(rep["generic"]["p2"], [0.5, 0.5], atol=0.01)
    np.testing.assert_allclose(rep["generic"]["p0"], [1.0, 1.0])
    rot = assumption_report(block_stats(gen_rotor(1.0, False, 400, seed=0)))
    np.testing.assert_array_equal(rot["generic"]["p0"], [4.0, 4.0])
    assert rot["zero_flags"] == []


def test_linear_drift_control():
    traj = LinearDrift((1.0, 0.0)).sample(5)
    np.testing.assert_array_equal(traj.path[:, 0], np.arange(6))
