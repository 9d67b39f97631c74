"""Acceptance gate: one test per headline requirement, stated tolerances.

Run with ``pytest -v tests/test_acceptance.py`` to get one pass/fail line
per criterion.  Each test is self-contained and uses only public package
APIs, so this module doubles as an executable summary of what the package
guarantees.
"""

import time

import numpy as np
import pytest

from statecloak.distributions import (RandomWalkPrior,
                                      gaussian_trajectory_prior)
from statecloak.dynamics import GaussianSpec, LinearSystem, simulate, stacked_matrices
from statecloak.harness import (IdentityScheme, MirroringScheme,
                                NoTransmissionScheme, evaluate_scheme,
                                run_quadrotor, run_random_walk)
from statecloak.mirroring import AffineMirror, MirrorSchedule, eve_posterior
from statecloak.worstcase import (ShiftMirrorCodec, decode_scalar,
                                  decode_trajectory, decode_vector,
                                  encode_scalar, encode_trajectory,
                                  encode_vector, optimize_theta,
                                  posterior_variance, preimages,
                                  standard_normal_pdf, trajectory_distortion,
                                  worst_case_distortion)

RNG = np.random.default_rng(20240817)


def test_criterion_01_one_bit_codec_worst_case_value():
    started = time.monotonic()
    dw = worst_case_distortion(ShiftMirrorCodec(k=1, theta=1.76))
    elapsed = time.monotonic() - started
    assert dw == pytest.approx(0.4477, abs=5e-4)
    assert elapsed < 10.0


def test_criterion_02_one_bit_optimizer():
    theta_star, dw_star = optimize_theta(1)
    assert 1.71 <= theta_star <= 1.81
    assert dw_star == pytest.approx(0.4477, abs=1e-3)


def test_criterion_03_three_bit_codec_and_optimizer():
    started = time.monotonic()
    dw = worst_case_distortion(ShiftMirrorCodec(k=3, theta=4.84))
    assert dw == pytest.approx(0.9998, abs=5e-4)
    theta_star, _ = optimize_theta(3)
    assert theta_star == pytest.approx(4.84, abs=0.1)
    assert time.monotonic() - started < 120.0


def test_criterion_04_worst_case_improves_with_key_bits():
    dw1 = optimize_theta(1)[1]
    dw2 = optimize_theta(2)[1]
    dw3 = optimize_theta(3)[1]
    # two-bit value frozen after first computation
    assert dw2 == pytest.approx(0.951155, abs=1e-3)
    assert dw1 < dw2 < dw3


def test_criterion_05_random_walk_attains_ceiling_exactly():
    started = time.monotonic()
    report = run_random_walk(a=2, T=3)
    elapsed = time.monotonic() - started
    assert report.method == "exact"
    assert report.D_E == pytest.approx(report.D_E_max, abs=1e-12)
    assert elapsed < 1.0


def test_criterion_06_gaussian_mirroring_monte_carlo():
    system = LinearSystem(A=np.array([[1.0]]), B=np.array([[1.0]]))
    T = 5
    prior = gaussian_trajectory_prior(
        stacked_matrices(system, T),
        GaussianSpec(mean=np.full(T - 1, 0.3), cov=np.eye(T - 1)),
        GaussianSpec(mean=np.zeros(1), cov=np.eye(1)))
    mirrors = [AffineMirror(S=np.eye(1), b=mu)
               for mu, _ in prior.per_time_moments()]
    report = evaluate_scheme(prior, MirroringScheme(MirrorSchedule(mirrors)),
                             mode="mc", samples=100_000, seed=20240817)
    se = report.standard_errors["D_E"]
    assert abs(report.D_E - report.D_E_max) <= 3.0 * se


def test_criterion_07_quadrotor_scenario():
    started = time.monotonic()
    plane = run_quadrotor(corpus_size=50_000, seed=0)
    assert plane.D_E / plane.D_E_max >= 0.98
    assert plane.metadata["corpus_mean_norm"] <= 0.05

    point_schedule = MirrorSchedule.constant(
        AffineMirror(S=np.eye(3), b=np.zeros(3)), 10)
    point = run_quadrotor(corpus_size=50_000, seed=0,
                          schedule=point_schedule)
    assert point.D_E <= 0.02 * point.D_E_max
    assert time.monotonic() - started < 600.0


def test_criterion_08_trajectory_codec_exactness_and_monotone_distortion():
    codec = ShiftMirrorCodec(k=3, theta=4.84)
    angle = 0.3
    cases = [
        (LinearSystem(A=np.array([[2.0]]), B=np.array([[1.0]])),
         GaussianSpec(mean=np.zeros(1), cov=np.array([[1.7]]))),
        (LinearSystem(A=1.25 * np.array([[np.cos(angle), -np.sin(angle)],
                                         [np.sin(angle), np.cos(angle)]]),
                      B=np.array([[0.0], [1.0]])),
         GaussianSpec(mean=np.array([0.2, -0.1]), cov=np.diag([1.0, 0.25]))),
    ]
    for system, init_prior in cases:
        sv = np.linalg.svd(system.A, compute_uv=False)
        assert sv.min() >= 1.0

        # legitimate receiver: exact over a long horizon
        inputs = RNG.standard_normal((19, system.m))
        x1 = init_prior.mean + np.sqrt(np.diag(init_prior.cov)) \
            * RNG.standard_normal(system.n)
        traj = simulate(system, x1, inputs)
        keys = RNG.integers(0, codec.key_count, size=system.n)
        Z = encode_trajectory(system, traj.states, keys, init_prior, codec)
        back = decode_trajectory(Z, keys, system, init_prior, codec)
        scale = max(1.0, np.abs(traj.states).max())
        assert np.abs(back - traj.states).max() <= 1e-8 * scale

        # eavesdropper: near-total initial loss, never recovering
        est = trajectory_distortion(system, init_prior, codec, T=8,
                                    sample_count=4000,
                                    rng=np.random.default_rng(5))
        trace = float(np.trace(init_prior.cov))
        assert est.mean[0] == pytest.approx(0.9998 * trace, rel=0.01)
        for t in range(7):
            assert est.mean[t + 1] >= est.mean[t] - 3.0 * est.standard_error[t]
        assert not est.sigma_min_warning


def test_criterion_09_property_suites():
    # --- codec round trips, >= 10^6 random cases across all codecs ---
    total_cases = 0
    for k in (1, 2, 3, 4):
        codec = ShiftMirrorCodec(k=k, theta=1.76 if k == 1 else 1.2 * k)
        x = RNG.normal(0.0, 2.5, size=250_000)
        keys = RNG.integers(0, codec.key_count, size=x.size)
        back = decode_scalar(encode_scalar(x, keys, codec), keys, codec)
        assert np.abs(back - x).max() <= 1e-9 * max(1.0, np.abs(x).max())
        total_cases += x.size

    mirror = AffineMirror(S=[[0.6, 0.8], [0.8, -0.6]], b=[0.3, -0.2])
    schedule = MirrorSchedule.constant(AffineMirror(S=[[1.0, 0.0]], b=[0.5]), 4)
    X = RNG.standard_normal((100_000, 8))
    twice = schedule.mirror_stacked_many(schedule.mirror_stacked_many(X))
    assert np.abs(twice - X).max() <= 1e-10
    total_cases += X.shape[0]

    gauss = GaussianSpec(mean=np.array([0.3, -0.2]), cov=np.diag([1.0, 0.25]))
    codec = ShiftMirrorCodec(k=3, theta=4.84)
    for _ in range(2000):
        x = gauss.mean + np.sqrt(np.diag(gauss.cov)) * RNG.standard_normal(2)
        key = RNG.integers(0, 8, size=2)
        z = encode_vector(x, key, gauss, codec)
        assert decode_vector(z, key, gauss, codec) == pytest.approx(x, abs=1e-9)
    total_cases += 2000

    system = LinearSystem(A=np.array([[1.0, 0.3], [0.0, 1.0]]),
                          B=np.array([[0.0], [1.0]]))
    for _ in range(500):
        traj = simulate(system, RNG.standard_normal(2),
                        RNG.standard_normal((9, 1)))
        key = RNG.integers(0, 8, size=2)
        Z = encode_trajectory(system, traj.states, key, gauss, codec)
        back = decode_trajectory(Z, key, system, gauss, codec)
        assert np.abs(back - traj.states).max() <= 1e-8
    total_cases += 500
    assert total_cases >= 1_000_000

    # --- involution of mirrors ---
    Y = RNG.standard_normal((100_000, 2))
    assert np.abs(mirror.mirror(mirror.mirror(Y)) - Y).max() <= 1e-10

    # --- two-point posterior equivalence to 1e-12 ---
    # mirrored-pair distance identity: (z - z~)^2 = 4 (z - b)^2
    m1 = AffineMirror(S=[[1.0]], b=[0.25])
    z = RNG.normal(0.0, 3.0, size=10_000)[:, None]
    gap = z - m1.mirror(z)
    assert np.abs(gap * gap - 4.0 * (z - 0.25) ** 2).max() <= 1e-12 * 100
    # posterior variance outside the codec window equals the mirror law
    shifted = lambda v: standard_normal_pdf(np.asarray(v) - 0.3)
    c1 = ShiftMirrorCodec(k=1, theta=1.76)
    for zz in (2.0, -2.5, 4.0, 3.3):
        p = shifted(zz) / (shifted(zz) + shifted(-zz))
        assert posterior_variance(zz, c1, prior=shifted) == pytest.approx(
            4.0 * p * (1.0 - p) * zz * zz, abs=1e-12)

    # --- Jensen bounds on every evaluated configuration ---
    walk = RandomWalkPrior(a=2, T=3)
    point = MirrorSchedule.constant(AffineMirror(S=[[1.0]], b=[0.0]), 3)
    shifted_sched = MirrorSchedule.constant(AffineMirror(S=[[1.0]], b=[1.0]), 3)
    reports = [
        evaluate_scheme(walk, IdentityScheme(), mode="exact"),
        evaluate_scheme(walk, NoTransmissionScheme(), mode="exact"),
        evaluate_scheme(walk, MirroringScheme(point), mode="exact"),
        evaluate_scheme(walk, MirroringScheme(shifted_sched), mode="exact"),
        evaluate_scheme(walk, MirroringScheme(shifted_sched), mode="mc",
                        samples=20_000, seed=2),
        run_random_walk(a=1, T=4),
        run_quadrotor(corpus_size=2_000, seed=1),
    ]
    for report in reports:
        slack = 3.0 * report.standard_errors.get("D_E", 0.0) + 1e-9
        assert 0.0 <= report.D_W <= report.D_E + 1e-12
        assert report.D_E <= report.D_E_max + slack
        if report.method == "exact":
            assert report.D_W <= report.D_W_max + 1e-9

    # --- posterior weights sum to one ---
    for zz in RNG.normal(0.0, 3.0, size=200):
        pre = preimages(float(zz), ShiftMirrorCodec(k=3, theta=2.0))
        assert pre.weights.sum() == pytest.approx(1.0, abs=1e-12)
    p, _ = eve_posterior(np.array([1.0, 1.0, 1.0]), walk, point)
    pm, _ = eve_posterior(np.array([-1.0, -1.0, -1.0]), walk, point)
    assert p + pm == pytest.approx(1.0, abs=1e-12)


def test_criterion_10_reports_are_byte_deterministic():
    first = run_quadrotor(corpus_size=5_000, seed=42).to_json()
    second = run_quadrotor(corpus_size=5_000, seed=42).to_json()
    assert first == second

    walk_a = run_random_walk(a=2, T=3).to_json()
    walk_b = run_random_walk(a=2, T=3).to_json()
    assert walk_a == walk_b

    prior = RandomWalkPrior(a=2, T=3)
    sched = MirrorSchedule.constant(AffineMirror(S=[[1.0]], b=[1.0]), 3)
    mc_a = evaluate_scheme(prior, MirroringScheme(sched), mode="mc",
                           samples=5_000, seed=9).to_json()
    mc_b = evaluate_scheme(prior, MirroringScheme(sched), mode="mc",
                           samples=5_000, seed=9).to_json()
    assert mc_a == mc_b
