"""Block-system covariance algebra vs one-step recursive oracles."""

import numpy as np
import pytest

from covtraj.covsteer import (
    FeedbackPolicy,
    build_block_system,
    control_cov_sqrt,
    convert_gain,
    dispersion_sqrt,
    kalman_precompute,
    state_mean,
)
from oracles import (
    random_observations,
    random_policy,
    random_segments,
    recursive_covariances,
    recursive_filter,
    simulate_closed_loop_paths,
)


def test_kalman_matches_textbook_recursion():
    rng = np.random.default_rng(0)
    for _ in range(5):
        n = 8
        segs = random_segments(rng, n)
        obs = random_observations(rng, n + 1)
        P0 = 0.5 * np.eye(6)
        sched = kalman_precompute(segs, obs, P0)
        Pm, Pp, gains, innov = recursive_filter(segs, obs, P0)
        np.testing.assert_allclose(sched.P_prior, Pm, rtol=0, atol=1e-12)
        np.testing.assert_allclose(sched.P_post, Pp, rtol=0, atol=1e-12)
        for k in range(n + 1):
            if gains[k] is None:
                assert sched.gains[k] is None
            else:
                np.testing.assert_allclose(sched.gains[k], gains[k], atol=1e-12)
                S = sched.innov_sqrt[k] @ sched.innov_sqrt[k].T
                np.testing.assert_allclose(S, innov[k], atol=1e-12)


def test_kalman_posterior_never_exceeds_prior():
    rng = np.random.default_rng(1)
    n = 10
    segs = random_segments(rng, n)
    obs = random_observations(rng, n + 1)
    sched = kalman_precompute(segs, obs, np.eye(6))
    for k in range(n + 1):
        gap = sched.P_prior[k] - sched.P_post[k]
        eigs = np.linalg.eigvalsh(0.5 * (gap + gap.T))
        assert eigs.min() > -1e-10
        # posterior itself stays PSD
        assert np.linalg.eigvalsh(sched.P_post[k]).min() > -1e-10


def test_state_mean_matches_recursion():
    rng = np.random.default_rng(2)
    n = 7
    segs = random_segments(rng, n)
    obs = random_observations(rng, n + 1)
    sched = kalman_precompute(segs, obs, np.eye(6))
    blocks = build_block_system(segs, sched, 0.1 * np.eye(6))
    x0 = rng.standard_normal(6)
    U = rng.standard_normal((n, 3))
    mean = state_mean(blocks, x0, U)
    x = x0.copy()
    np.testing.assert_allclose(mean[0], x, atol=1e-13)
    for k, s in enumerate(segs):
        x = s.A @ x + s.B @ U[k] + s.c
        np.testing.assert_allclose(mean[k + 1], x, atol=1e-11)


def test_uncontrolled_rows_match_innovation_state_covariance():
    # Gram of S_sqrt block row k must equal the oracle Cov(z_k, z_k)
    rng = np.random.default_rng(3)
    n = 6
    segs = random_segments(rng, n)
    obs = random_observations(rng, n + 1)
    P_hat0 = 0.3 * np.eye(6)
    P_til0 = 0.8 * np.eye(6)
    sched = kalman_precompute(segs, obs, P_til0)
    blocks = build_block_system(segs, sched, P_hat0)
    P_hat_oracle, _ = recursive_covariances(
        segs, obs, P_hat0, P_til0, FeedbackPolicy.zeros(n)
    )
    for k in range(n + 1):
        row = blocks.s_row(k)
        np.testing.assert_allclose(row @ row.T, P_hat_oracle[k], atol=1e-11)


def test_block_covariances_match_recursive_oracle():
    rng = np.random.default_rng(4)
    for trial in range(10):
        n = int(rng.integers(3, 9))
        segs = random_segments(rng, n)
        obs = random_observations(rng, n + 1)
        A0 = rng.standard_normal((6, 6))
        P_hat0 = 0.2 * (A0 @ A0.T)
        A1 = rng.standard_normal((6, 6))
        P_til0 = 0.5 * (A1 @ A1.T)
        policy = random_policy(rng, n)

        sched = kalman_precompute(segs, obs, P_til0)
        blocks = build_block_system(segs, sched, P_hat0)
        u_sq = control_cov_sqrt(blocks, policy)
        x_sq = dispersion_sqrt(blocks, policy, u_sq)

        P_hat_o, P_u_o = recursive_covariances(segs, obs, P_hat0, P_til0, policy)
        scale_x = max(np.max(np.abs(P_hat_o)), 1e-12)
        scale_u = max(np.max(np.abs(P_u_o)), 1e-12)
        for k in range(n + 1):
            np.testing.assert_allclose(
                x_sq[k] @ x_sq[k].T, P_hat_o[k], atol=1e-10 * scale_x
            )
        for k in range(n):
            np.testing.assert_allclose(
                u_sq[k] @ u_sq[k].T, P_u_o[k], atol=1e-10 * scale_u
            )


def test_policy_validation():
    with pytest.raises(ValueError):
        FeedbackPolicy(np.zeros((3, 3, 3, 6)))  # wrong second axis
    bad = np.zeros((3, 4, 3, 6))
    bad[0, 2] = 1.0  # anti-causal block
    with pytest.raises(ValueError):
        FeedbackPolicy(bad)
    p = FeedbackPolicy.zeros(4)
    assert p.is_zero and p.n_segments == 4


def test_dense_assemblies_round_trip():
    rng = np.random.default_rng(5)
    n = 5
    segs = random_segments(rng, n)
    obs = random_observations(rng, n + 1)
    sched = kalman_precompute(segs, obs, np.eye(6))
    blocks = build_block_system(segs, sched, np.eye(6))
    Bd = blocks.dense_B()
    assert Bd.shape == ((n + 1) * 6, n * 3)
    # column block i of the dense map equals Bblk[:, i]
    for i in range(n):
        for k in range(n + 1):
            np.testing.assert_array_equal(
                Bd[6 * k : 6 * k + 6, 3 * i : 3 * i + 3], blocks.Bblk[k, i]
            )
    policy = random_policy(rng, n)
    Kd = policy.dense()
    assert Kd.shape == (n * 3, (n + 1) * 6)
    assert np.any(Kd)


def test_convert_gain_identity_relation():
    # (I + BB K)(I - BB Khat) = I must hold exactly in the stacked algebra
    rng = np.random.default_rng(6)
    for _ in range(10):
        n = int(rng.integers(3, 8))
        segs = random_segments(rng, n)
        obs = random_observations(rng, n + 1)
        sched = kalman_precompute(segs, obs, np.eye(6))
        blocks = build_block_system(segs, sched, np.eye(6))
        policy = random_policy(rng, n)
        policy_hat = convert_gain(blocks, policy)
        Bd = blocks.dense_B()
        lhs = (np.eye(Bd.shape[0]) + Bd @ policy.dense()) @ (
            np.eye(Bd.shape[0]) - Bd @ policy_hat.dense()
        )
        np.testing.assert_allclose(lhs, np.eye(Bd.shape[0]), atol=1e-10)


def test_policy_forms_produce_identical_sample_paths():
    # innovation-state gains and converted estimate-deviation gains command
    # the same control on every sample path
    rng = np.random.default_rng(7)
    for trial in range(5):
        n = int(rng.integers(3, 7))
        segs = random_segments(rng, n)
        obs = random_observations(rng, n + 1)
        A0 = rng.standard_normal((6, 6))
        P_hat0 = 0.2 * (A0 @ A0.T) + 0.01 * np.eye(6)
        A1 = rng.standard_normal((6, 6))
        P_til0 = 0.5 * (A1 @ A1.T) + 0.01 * np.eye(6)
        policy = random_policy(rng, n)
        sched = kalman_precompute(segs, obs, P_til0)
        blocks = build_block_system(segs, sched, P_hat0)
        policy_hat = convert_gain(blocks, policy)
        x0 = rng.standard_normal(6)
        U = rng.standard_normal((n, 3))
        Xi, Ui, Xh, Uh = simulate_closed_loop_paths(
            segs, obs, x0, U, policy, policy_hat, P_hat0, P_til0, seed=100 + trial
        )
        np.testing.assert_allclose(Uh, Ui, atol=1e-9 * max(1.0, np.max(np.abs(Ui))))
        np.testing.assert_allclose(Xh, Xi, atol=1e-9 * max(1.0, np.max(np.abs(Xi))))


def test_ga_segment_breaks_no_machinery():
    # zero-duration noiseless segments (flyby slots) flow through the stack
    rng = np.random.default_rng(8)
    segs = random_segments(rng, 5)
    ga = segs[2]
    object.__setattr__(ga, "G_exe", np.zeros((6, 3)))
    object.__setattr__(ga, "G_proc", np.zeros((6, 0)))
    flags = [True, True, False, True, True, True]
    noises = [np.eye(6) * 0.3 if f else None for f in flags]
    from covtraj.uncertainty import ObservationModel

    obs = ObservationModel(has_measurement=tuple(flags), sqrt_noise=tuple(noises))
    sched = kalman_precompute(segs, obs, np.eye(6))
    # GA node: posterior equals prior
    np.testing.assert_array_equal(sched.P_prior[2], sched.P_post[2])
    blocks = build_block_system(segs, sched, np.eye(6))
    policy = random_policy(rng, 5)
    P_hat_o, P_u_o = recursive_covariances(segs, obs, np.eye(6), np.eye(6), policy)
    x_sq = dispersion_sqrt(blocks, policy)
    for k in range(6):
        np.testing.assert_allclose(
            x_sq[k] @ x_sq[k].T, P_hat_o[k], atol=1e-9 * np.max(np.abs(P_hat_o))
        )
