"""Power allocation, distributed precoding, SINR and rate."""

import warnings
from dataclasses import dataclass

import numpy as np

PRECODERS = ("lpzf", "mr")


class RankDeficiencyWarning(RuntimeWarning):
    """Emitted when a ZF Gram matrix needs ridge regularization."""


@dataclass(frozen=True)
class RadioConfig:
    bandwidth: float = 100e6
    noise_psd_dbm: float = -174.0
    p_max: float = 0.25
    k_max: int = 12
    m_max: int = 6
    precoder: str = "lpzf"

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.k_max < 1 or self.m_max < 1:
            raise ValueError("k_max and m_max must be >= 1")
        if self.precoder not in PRECODERS:
            raise ValueError(f"precoder must be one of {PRECODERS}")

    @property
    def noise_power(self):
        return noise_power(self.bandwidth, self.noise_psd_dbm)


def check_clustering(C, shape=None):
    """Validate a binary clustering matrix and return it as an int8 array."""
    C = np.asarray(C)
    if C.ndim != 2:
        raise ValueError("clustering matrix must be 2-D (K, M)")
    if shape is not None and C.shape != tuple(shape):
        raise ValueError(f"clustering matrix shape {C.shape} != {tuple(shape)}")
    if not np.isin(C, (0, 1)).all():
        raise ValueError("clustering matrix entries must be 0 or 1")
    return C.astype(np.int8, copy=False)


def is_feasible(C, k_max, m_max):
    """True when per-AP load <= k_max and per-UE cluster size <= m_max."""
    C = check_clustering(C)
    return bool(C.sum(axis=0).max(initial=0) <= k_max and C.sum(axis=1).max(initial=0) <= m_max)


def noise_power(bandwidth, noise_psd_dbm=-174.0):
    """Thermal noise power in watts over ``bandwidth`` Hz."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return 10.0 ** ((noise_psd_dbm + 10.0 * np.log10(bandwidth)) / 10.0) / 1000.0


def allocate_power(C, requests, p_max):
    """Split each AP's budget among its UEs in proportion to their requests."""
    C = check_clustering(C)
    requests = np.asarray(requests, dtype=float)
    if np.any(requests <= 0):
        raise ValueError("traffic requests must be positive")
    weighted = C * requests[:, None]
    load = weighted.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        share = np.where(load > 0, weighted / load, 0.0)
    return share * p_max


def mr_direction(h):
    h = np.asarray(h, dtype=complex)
    if not np.any(h):
        raise ValueError("MR direction undefined for a zero channel")
    return h.copy()


def zf_directions(H):
    """Columns of ``H (H^H H)^-1`` for an N x S matrix of served-UE channels.

    The Gram matrix is formed from unit-norm columns, which leaves the result
    unchanged but keeps path-loss spread out of its condition number.
    """
    H = np.asarray(H, dtype=complex)
    S = H.shape[1]
    norms = np.linalg.norm(H, axis=0)
    if np.any(norms == 0):
        raise ValueError("ZF undefined for a zero channel")
    Hn = H / norms
    gram = Hn.conj().T @ Hn
    if S > H.shape[0] or np.linalg.cond(gram) > 1e12:
        warnings.warn(
            f"ZF Gram matrix ill-conditioned for {S} UEs; using ridge regularization",
            RankDeficiencyWarning,
            stacklevel=2,
        )
        gram = gram + 1e-10 * np.eye(S)
    return Hn @ np.linalg.inv(gram) / norms


def ap_precoders(served, csi, powers, config):
    """Precoders of one AP: ``served`` UE indices, ``csi`` (S, N), ``powers`` (S,).

    With LP-ZF, at most ``min(k_max, N)`` strongest-norm UEs are zero-forced
    and any others fall back to MR.
    """
    S, N = csi.shape
    V = np.empty((S, N), dtype=complex)
    if config.precoder == "mr":
        zf_set = np.array([], dtype=int)
    else:
        cap = min(config.k_max, N)
        if S <= cap:
            zf_set = np.arange(S)
        else:
            norms = np.linalg.norm(csi, axis=1)
            zf_set = np.sort(np.argsort(-norms, kind="stable")[:cap])
    mr_set = np.setdiff1d(np.arange(S), zf_set)
    if len(zf_set):
        V[zf_set] = zf_directions(csi[zf_set].T).T
    for i in mr_set:
        V[i] = mr_direction(csi[i])
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    return V * np.sqrt(powers)[:, None]


def build_precoders(C, csi_channels, alloc, config):
    """Precoding tensor W (K, M, N); zero wherever ``C`` is zero."""
    C = check_clustering(C)
    K, M, N = csi_channels.shape
    W = np.zeros((K, M, N), dtype=complex)
    for m in range(M):
        served = np.flatnonzero(C[:, m])
        if len(served):
            W[served, m] = ap_precoders(served, csi_channels[served, m], alloc[served, m], config)
    return W


def sinr(W, true_channels, noise):
    """Per-UE SINR from the precoding tensor and the true channels.

    Precoders of every AP leak onto every UE, served or not.
    """
    K = W.shape[0]
    G = true_channels.reshape(K, -1).conj() @ W.reshape(K, -1).T  # G[k, j] = sum_m h_km^H w_jm
    P = np.abs(G) ** 2
    desired = np.diag(P).copy()
    interference = P.sum(axis=1) - desired
    return desired / (interference + noise)


def rate(sinr_value, bandwidth):
    sinr_value = np.asarray(sinr_value, dtype=float)
    if np.any(sinr_value < 0):
        raise ValueError("SINR must be non-negative")
    r = bandwidth * np.log2(1.0 + sinr_value)
    return float(r) if r.ndim == 0 else r
