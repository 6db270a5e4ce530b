import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socialcf.radio import (
    RadioConfig,
    RankDeficiencyWarning,
    allocate_power,
    build_precoders,
    check_clustering,
    is_feasible,
    mr_direction,
    noise_power,
    rate,
    sinr,
    zf_directions,
)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def test_noise_power():
    # -174 dBm/Hz: 10^-17.4 mW in 1 Hz, 10^-9.4 mW (-94 dBm) in 100 MHz
    assert noise_power(1.0) * 1e3 == pytest.approx(10 ** -17.4, rel=1e-12, abs=0)
    assert noise_power(100e6) * 1e3 == pytest.approx(10 ** -9.4, rel=1e-12, abs=0)
    assert noise_power(100e6) == pytest.approx(3.98e-13, rel=1e-3, abs=0)
    with pytest.raises(ValueError):
        noise_power(0.0)


def test_allocation_examples():
    C = np.array([[1, 1, 0], [0, 1, 0]])
    alloc = allocate_power(C, [100e6, 300e6], 0.25)
    assert alloc[0, 0] == pytest.approx(0.25)
    np.testing.assert_allclose(alloc[:, 1], [0.0625, 0.1875])
    np.testing.assert_array_equal(alloc[:, 2], 0.0)


def test_allocation_rejects_nonpositive_requests():
    with pytest.raises(ValueError):
        allocate_power(np.ones((2, 1)), [1.0, 0.0], 0.25)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_allocation_uses_full_budget(K, M, seed):
    rng = np.random.default_rng(seed)
    C = rng.integers(0, 2, (K, M))
    alloc = allocate_power(C, rng.uniform(1, 500, K), 0.25)
    served = C.any(axis=0)
    np.testing.assert_allclose(alloc.sum(axis=0)[served], 0.25, rtol=1e-12)
    assert np.all(alloc[C == 0] == 0)


def test_mr_direction():
    np.testing.assert_array_equal(mr_direction([1, 0]), [1, 0])
    np.testing.assert_array_equal(mr_direction([1j, 1]), [1j, 1])
    with pytest.raises(ValueError):
        mr_direction([0, 0])


def test_zf_single_column_is_pseudo_inverse():
    h = np.array([[1 + 1j], [2.0], [-1j]])
    v = zf_directions(h)
    np.testing.assert_allclose(v, h / np.linalg.norm(h) ** 2)


def test_zf_orthonormal_columns_unchanged(rng):
    Q, _ = np.linalg.qr(crandn(rng, 6, 3))
    np.testing.assert_allclose(zf_directions(Q), Q, atol=1e-12)


def test_zf_residual(rng):
    H = crandn(rng, 8, 4)
    V = zf_directions(H)
    cross = np.abs(H.conj().T @ V)
    scale = np.linalg.norm(H, axis=0)[:, None] * np.linalg.norm(V, axis=0)[None, :]
    off = ~np.eye(4, dtype=bool)
    assert np.all(cross[off] < 1e-8 * scale[off])


def test_zf_rank_deficiency_warns(rng):
    h = crandn(rng, 4, 1)
    with pytest.warns(RankDeficiencyWarning):
        V = zf_directions(np.hstack([h, h]))
    assert np.all(np.isfinite(V))


def test_mr_single_link_precoder(rng):
    h = crandn(rng, 1, 1, 4)
    C = np.ones((1, 1))
    alloc = allocate_power(C, [1.0], 0.25)
    W = build_precoders(C, h, alloc, RadioConfig(precoder="mr"))
    np.testing.assert_allclose(W[0, 0], np.sqrt(0.25) * h[0, 0] / np.linalg.norm(h[0, 0]))


def test_lpzf_falls_back_to_mr_beyond_capacity(rng):
    k_max, N = 3, 8
    S = k_max + 2
    h = crandn(rng, S, 1, N) * np.arange(1, S + 1)[:, None, None]
    C = np.ones((S, 1))
    alloc = allocate_power(C, np.ones(S), 0.25)
    W = build_precoders(C, h, alloc, RadioConfig(k_max=k_max))
    strongest = np.argsort(-np.linalg.norm(h[:, 0], axis=1))[:k_max]
    weakest = np.setdiff1d(np.arange(S), strongest)
    for i in weakest:  # MR: collinear with own channel
        cos = abs(np.vdot(h[i, 0], W[i, 0])) / (np.linalg.norm(h[i, 0]) * np.linalg.norm(W[i, 0]))
        assert cos == pytest.approx(1.0, abs=1e-12)
    for i in strongest:  # ZF among the strongest
        for j in strongest:
            if i != j:
                assert abs(np.vdot(h[j, 0], W[i, 0])) < 1e-8 * np.linalg.norm(h[j, 0]) * np.linalg.norm(W[i, 0])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(1, 4), st.sampled_from(["lpzf", "mr"]),
       st.integers(0, 2**32 - 1))
def test_precoder_power_matches_allocation(K, M, precoder, seed):
    rng = np.random.default_rng(seed)
    h = crandn(rng, K, M, 4)
    C = rng.integers(0, 2, (K, M))
    alloc = allocate_power(C, rng.uniform(1, 5, K), 0.25)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficiencyWarning)
        W = build_precoders(C, h, alloc, RadioConfig(k_max=3, precoder=precoder))
    power = np.sum(np.abs(W) ** 2, axis=-1)
    np.testing.assert_allclose(power, alloc, rtol=1e-9, atol=1e-300)


def test_sinr_empty_cluster_is_zero(rng):
    h = crandn(rng, 2, 1, 4)
    C = np.array([[1], [0]])
    alloc = allocate_power(C, [1.0, 1.0], 0.25)
    W = build_precoders(C, h, alloc, RadioConfig())
    assert sinr(W, h, 1e-10)[1] == 0.0


def test_sinr_single_link_closed_form(rng):
    h = crandn(rng, 1, 1, 4) * 1e-4
    C = np.ones((1, 1))
    W = build_precoders(C, h, allocate_power(C, [1.0], 0.25), RadioConfig(precoder="mr"))
    sigma2 = noise_power(100e6)
    expected = 0.25 * np.linalg.norm(h) ** 2 / sigma2
    assert sinr(W, h, sigma2)[0] == pytest.approx(expected, rel=1e-12)


def test_two_ues_same_ap_zf_cancels_interference(rng):
    h = crandn(rng, 2, 1, 8)
    C = np.ones((2, 1))
    W = build_precoders(C, h, allocate_power(C, [1.0, 2.0], 0.25), RadioConfig())
    G = np.abs(h[:, 0].conj() @ W[:, 0].T) ** 2
    assert G[0, 1] < 1e-10 * G[0, 0]
    assert G[1, 0] < 1e-10 * G[1, 1]


@pytest.mark.parametrize("s, expected", [(0.0, 0.0), (1.0, 100e6), (3.0, 200e6)])
def test_rate(s, expected):
    assert rate(s, 100e6) == pytest.approx(expected, rel=1e-12, abs=0)


def test_clustering_validation():
    with pytest.raises(ValueError):
        check_clustering([[0, 2]])
    with pytest.raises(ValueError):
        check_clustering([1, 0])
    with pytest.raises(ValueError):
        check_clustering(np.ones((2, 2)), shape=(2, 3))
    assert is_feasible(np.ones((2, 2)), 2, 2)
    assert not is_feasible(np.ones((3, 2)), 2, 2)


def test_radio_config_validation():
    with pytest.raises(ValueError):
        RadioConfig(precoder="mmse")
    with pytest.raises(ValueError):
        RadioConfig(k_max=0)
