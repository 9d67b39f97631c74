import json
from fractions import Fraction

import numpy as np
import pytest

from statecloak.distributions import (
    AnalyticGaussianPrior,
    EmpiricalGridPrior,
    RandomWalkPrior,
    empirical_from_corpus,
    gaussian_trajectory_prior,
    load_corpus,
    save_corpus,
    symmetry_check,
)
from statecloak.dynamics import (
    GaussianSpec,
    LinearSystem,
    Trajectory,
    simulate,
    stacked_matrices,
)
from statecloak.errors import ConfigurationError
from statecloak.mirroring import AffineMirror, MirrorSchedule


def scalar_chain(a=2.0, b=1.0):
    return LinearSystem(A=[[a]], B=[[b]])


def test_gaussian_prior_scalar_chain_density():
    stacked = stacked_matrices(scalar_chain(), T=2)
    prior = gaussian_trajectory_prior(stacked, GaussianSpec([1.0], [[1.0]]), [3.0])
    assert prior.times == 1 and prior.dim == 1
    assert prior.density([7.0]) == pytest.approx(1.0 / np.sqrt(2.0 * np.pi), rel=1e-12)


def test_gaussian_prior_zero_mean_symmetric(rng):
    stacked = stacked_matrices(scalar_chain(), T=4)
    prior = gaussian_trajectory_prior(
        stacked, GaussianSpec(np.zeros(3), np.eye(3)), [0.0])
    for x in prior.sample_many(rng, 20):
        assert prior.density(x) == pytest.approx(prior.density(-x), rel=1e-9)


def test_gaussian_prior_sampling_moments(rng):
    stacked = stacked_matrices(scalar_chain(), T=4)
    prior = gaussian_trajectory_prior(
        stacked, GaussianSpec([0.5, -0.2, 0.1], np.diag([1.0, 2.0, 0.5])), [1.0])
    X = prior.sample_many(rng, 100_000)
    emp_cov = np.cov(X.T)
    assert np.abs(X.mean(axis=0) - prior.spec.mean).max() <= 0.02 * max(
        1.0, np.abs(prior.spec.mean).max())
    assert np.abs(emp_cov - prior.spec.cov).max() <= 0.02 * np.abs(prior.spec.cov).max()


def test_gaussian_prior_degenerate_support(rng, double_integrator):
    # one input pushed through two states: rank-1 covariance at T=2
    stacked = stacked_matrices(double_integrator, T=2)
    prior = gaussian_trajectory_prior(stacked, GaussianSpec([0.0], [[1.0]]),
                                      [0.0, 0.0])
    assert prior._rank == 1
    on = prior.sample(rng)
    assert prior.density(on) > 0.0
    off = on + np.array([1.0, -0.5])  # leave span(B)
    assert prior.density(off) == 0.0


def test_gaussian_prior_random_start_blocks():
    stacked = stacked_matrices(scalar_chain(a=2.0), T=2)
    x1 = GaussianSpec([1.0], [[4.0]])
    prior = gaussian_trajectory_prior(stacked, GaussianSpec([0.0], [[1.0]]), x1)
    assert prior.times == 2
    moments = prior.per_time_moments()
    np.testing.assert_allclose(moments[0][0], [1.0])
    np.testing.assert_allclose(moments[0][1], [[4.0]])
    np.testing.assert_allclose(moments[1][0], [2.0])
    # var(2 X1 + U) = 4*4 + 1, cov(X1, X2) = 2*4
    np.testing.assert_allclose(moments[1][1], [[17.0]])
    np.testing.assert_allclose(prior.spec.cov[0, 1], 8.0)


def test_random_walk_initial_uniform():
    prior = RandomWalkPrior(a=1, T=1)
    for x in (-1, 0, 1):
        assert prior.exact_mass([x]) == Fraction(1, 3)
    assert prior.exact_mass([2]) == 0


def test_random_walk_two_step_mass():
    prior = RandomWalkPrior(a=1, T=2)
    total = sum(mass for path, mass in prior.exact_support() if path[1] == 0)
    assert total == Fraction(1, 3) * (Fraction(1, 2) + Fraction(1, 3) + Fraction(1, 2))


@pytest.mark.parametrize("a,T", [(1, 1), (1, 4), (2, 3), (3, 5)])
def test_random_walk_masses_sum_to_one(a, T):
    prior = RandomWalkPrior(a=a, T=T)
    assert sum(mass for _, mass in prior.exact_support()) == Fraction(1)
    for table in prior.per_time_marginals():
        assert sum(table.values()) == Fraction(1)


def test_random_walk_markov_symmetry():
    # initial and transition masses invariant under negation, on all support
    prior = RandomWalkPrior(a=2, T=2)
    for s in range(-2, 3):
        assert prior.exact_mass([s]) == prior.exact_mass([-s])
        for v in (s - 1, s, s + 1):
            if abs(v) <= 2:
                assert prior._step_mass(s, v) == prior._step_mass(-s, -v)


def test_random_walk_density_off_grid():
    prior = RandomWalkPrior(a=1, T=2)
    assert prior.density([0.5, 0.0]) == 0.0
    assert prior.density([0.0, 1.0]) == pytest.approx(float(Fraction(1, 9)))
    assert prior.density([1.0, -1.0]) == 0.0  # two-step jump


def test_random_walk_budget():
    with pytest.raises(ConfigurationError):
        RandomWalkPrior(a=2, T=14)


def test_random_walk_moments_match_sampling(rng):
    prior = RandomWalkPrior(a=2, T=3)
    X = prior.sample_many(rng, 100_000)
    for t, (mean, cov) in enumerate(prior.per_time_moments()):
        assert abs(X[:, t].mean() - mean[0]) <= 0.02 * max(1.0, abs(mean[0]))
        assert abs(X[:, t].var() - cov[0, 0]) <= 0.02 * cov[0, 0]


def test_empirical_single_and_pair():
    t1 = Trajectory(states=[[0.1, 0.1], [0.3, 0.5]], inputs=[[0.0]])
    prior = empirical_from_corpus([t1], bin_width=0.2)
    assert prior.mass(t1.states.reshape(-1)) == 1.0
    t2 = Trajectory(states=[[1.1, 0.1], [0.3, 0.5]], inputs=[[0.0]])
    prior2 = empirical_from_corpus([t1, t2], bin_width=0.2)
    assert prior2.mass(t1.states.reshape(-1)) == 0.5
    assert prior2.mass(t2.states.reshape(-1)) == 0.5
    assert prior2.mass(np.zeros(4) + 9.0) == 0.0


def test_empirical_bin_round_trip(rng):
    prior = empirical_from_corpus(
        [Trajectory(states=rng.uniform(-3, 3, size=(4, 3)), inputs=np.zeros((3, 1)))],
        bin_width=0.2)
    pts = rng.uniform(-3, 3, size=(50, 12))
    for x in pts:
        centers = prior.bin_centers(prior.bin_indices(x)).reshape(-1)
        assert np.abs(centers - x).max() <= 0.1 + 1e-12


def test_empirical_projection_and_moments():
    states_a = np.array([[0.1, 5.0], [0.5, 6.0]])
    states_b = np.array([[0.3, 7.0], [0.9, 8.0]])
    corpus = [Trajectory(states=s, inputs=np.zeros((1, 1)))
              for s in (states_a, states_b)]
    prior = empirical_from_corpus(corpus, bin_width=0.2, projection=[0])
    assert prior.dim == 1 and prior.times == 2
    moments = prior.per_time_moments()
    assert moments[0][0][0] == pytest.approx(0.2)   # centers 0.1 and 0.3
    assert moments[0][1][0, 0] == pytest.approx(0.01)
    total = sum(mass for _, mass in prior.support())
    assert total == pytest.approx(1.0, abs=1e-12)


def test_empirical_grid_csv_export(tmp_path):
    corpus = [Trajectory(states=[[0.1], [0.5]], inputs=[[0.0]]),
              Trajectory(states=[[0.1], [0.9]], inputs=[[0.0]])]
    prior = empirical_from_corpus(corpus, bin_width=0.2)
    out = tmp_path / "grid.csv"
    prior.export_csv(out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "t,i_1,count"
    assert "1,0,2" in lines
    rows = [line.split(",") for line in lines[1:]]
    assert sum(int(r[2]) for r in rows if r[0] == "2") == 2


def test_empirical_empty_corpus():
    with pytest.raises(ConfigurationError):
        empirical_from_corpus([], bin_width=0.2)


def test_corpus_ndjson_round_trip(tmp_path, rng, double_integrator):
    corpus = [simulate(double_integrator, rng.normal(size=2),
                       rng.normal(size=(3, 1))) for _ in range(4)]
    path = tmp_path / "corpus.ndjson"
    save_corpus(path, corpus)
    loaded = load_corpus(path)
    assert len(loaded) == 4
    for a, b in zip(corpus, loaded):
        np.testing.assert_allclose(a.states, b.states)
        np.testing.assert_allclose(a.inputs, b.inputs)
    assert len(path.read_text().strip().splitlines()) == 4


def test_symmetry_check_gaussian_point_mirror():
    stacked = stacked_matrices(scalar_chain(), T=3)
    prior = gaussian_trajectory_prior(
        stacked, GaussianSpec(np.zeros(2), np.eye(2)), [0.0])
    schedule = MirrorSchedule.constant(AffineMirror(S=[[1.0]], b=[0.0]), 2)
    assert symmetry_check(prior, schedule, sample_count=200) <= 1e-9


def test_symmetry_check_random_walk_exact():
    prior = RandomWalkPrior(a=2, T=3)
    schedule = MirrorSchedule.constant(AffineMirror(S=[[1.0]], b=[0.0]), 3)
    assert symmetry_check(prior, schedule) == 0.0


def test_symmetry_check_detects_asymmetry():
    prior = RandomWalkPrior(a=2, T=2)
    shifted = MirrorSchedule.constant(AffineMirror(S=[[1.0]], b=[1.0]), 2)
    assert symmetry_check(prior, shifted) == pytest.approx(1.0)
