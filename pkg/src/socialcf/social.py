"""Social utilities, the 2K-dimensional objective and Pareto tools.

Each UE mixes its own QoS satisfaction with the mean satisfaction of the
other UEs through a social factor ``alpha``; each AP cluster mixes its own
energy efficiency with the others' through ``beta``. Factor 1 is selfish,
0 altruistic, and 1/K egalitarian.
"""

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import power as pw
from .radio import (
    RadioConfig,
    allocate_power,
    ap_precoders,
    check_clustering,
    is_feasible,
    rate,
    sinr,
)

PRESETS = ("selfish", "egalitarian", "altruistic")

GAMMA_ATOL = 1e-12
EE_RTOL = 1e-9

MAX_BRUTEFORCE_LINKS = 12


class InstanceTooLarge(ValueError):
    pass


def resolve_factor(value, K):
    """Map a preset name or number to a social factor for ``K`` UEs."""
    if K == 1:
        return 1.0
    if isinstance(value, str):
        name = value.lower()
        if name == "selfish":
            return 1.0
        if name == "egalitarian":
            return 1.0 / K
        if name == "altruistic":
            return 0.0
        raise ValueError(f"unknown sociality preset {value!r}; expected one of {PRESETS}")
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError("social factors must lie in [0, 1]")
    return value


@dataclass(frozen=True)
class SocialityConfig:
    """UE factor ``alpha`` and cluster factor ``beta``; numbers or preset names."""

    alpha: object = "egalitarian"
    beta: object = "egalitarian"

    def __post_init__(self):
        # validate eagerly; K=2 is arbitrary, names are K-independent
        resolve_factor(self.alpha, 2)
        resolve_factor(self.beta, 2)

    def resolve(self, K):
        return resolve_factor(self.alpha, K), resolve_factor(self.beta, K)


@dataclass(frozen=True, eq=False)
class UtilityVector:
    gamma: np.ndarray
    cluster_util: np.ndarray

    def as_array(self):
        return np.concatenate([self.gamma, self.cluster_util])

    def __len__(self):
        return 2 * len(self.gamma)


def qos_satisfaction(rates, requests):
    requests = np.asarray(requests, dtype=float)
    if np.any(requests <= 0):
        raise ValueError("requests must be positive")
    q = np.minimum(1.0, np.asarray(rates, dtype=float) / requests)
    return float(q) if q.ndim == 0 else q


def _social_mix(values, factor):
    values = np.asarray(values, dtype=float)
    K = len(values)
    if K == 1:
        if factor != 1.0:
            raise ValueError("a single UE has no others to weigh; factor must be 1")
        return values.copy()
    others = (1.0 - np.eye(K)) @ values  # exact, unlike sum() - values
    return factor * values + (1.0 - factor) / (K - 1) * others


def ue_utility(rho, alpha):
    """Social QoS utility of every UE."""
    return _social_mix(rho, alpha)


def cluster_utility(ee, beta):
    """Social energy-efficiency utility of every cluster."""
    return _social_mix(ee, beta)


def total_qos(rho):
    return float(np.sum(rho))


def total_cluster_ee(ee):
    return float(np.sum(ee))


def dominates(a, b):
    """Strict Pareto dominance of utility vector ``a`` over ``b``."""
    x, y = a.as_array(), b.as_array()
    if x.shape != y.shape:
        raise ValueError("utility vectors of different size")
    return bool(np.all(x >= y) and np.any(x > y))


def social_improvement(new, old):
    """Weak improvement of all 2K utilities with a strict gain somewhere.

    Uses an absolute tolerance on the QoS utilities and a relative one on the
    energy-efficiency utilities so floating-point noise cannot create gains.
    """
    g_tol = GAMMA_ATOL
    e_tol = EE_RTOL * np.abs(old.cluster_util) + GAMMA_ATOL
    dg = new.gamma - old.gamma
    de = new.cluster_util - old.cluster_util
    if np.any(dg < -g_tol) or np.any(de < -e_tol):
        return False
    return bool(np.any(dg > g_tol) or np.any(de > e_tol))


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Everything the pipeline derives from one clustering matrix."""

    clustering: np.ndarray
    alloc: np.ndarray
    sinr: np.ndarray
    rates: np.ndarray
    rho: np.ndarray
    cluster_power: np.ndarray
    ee: np.ndarray
    utility: UtilityVector
    precoders: np.ndarray = None

    @property
    def associated(self):
        return self.clustering.any(axis=1)


class UtilityOracle:
    """Evaluates the social utility vector of any clustering matrix.

    Precoders are built from the CSI side of ``channels`` and SINR from the
    true side. Per-AP precoders are memoized on the set of served UEs; the
    memo is a pure cache and leaves results bit-identical.
    """

    def __init__(
        self,
        channels,
        requests,
        radio=RadioConfig(),
        power=pw.PowerModelParams(),
        sociality=SocialityConfig(),
        cache_size=4096,
    ):
        self.channels = channels
        self.requests = np.asarray(requests, dtype=float)
        K, M, N = channels.shape
        if self.requests.shape != (K,):
            raise ValueError(f"expected {K} requests, got {self.requests.shape}")
        if np.any(self.requests <= 0):
            raise ValueError("requests must be positive")
        self.radio = radio
        self.power = power
        self.sociality = sociality
        self.alpha, self.beta = sociality.resolve(K)
        self.noise = radio.noise_power
        self.n_calls = 0
        self._cache = {}
        self._cache_size = cache_size

    @property
    def shape(self):
        return self.channels.shape[:2]

    def _ap_precoders(self, m, served, alloc_col):
        key = (m, served.tobytes())
        W = self._cache.get(key)
        if W is None:
            W = ap_precoders(
                served, self.channels.csi_channels[served, m], alloc_col[served], self.radio
            )
            if len(self._cache) >= self._cache_size:
                self._cache.clear()
            self._cache[key] = W
        return W

    def precoders(self, C, alloc):
        K, M, N = self.channels.shape
        W = np.zeros((K, M, N), dtype=complex)
        for m in range(M):
            served = np.flatnonzero(C[:, m])
            if len(served):
                W[served, m] = self._ap_precoders(m, served, alloc[:, m])
        return W

    def evaluate(self, C, keep_precoders=False):
        C = check_clustering(C, self.shape)
        self.n_calls += 1
        alloc = allocate_power(C, self.requests, self.radio.p_max)
        W = self.precoders(C, alloc)
        s = sinr(W, self.channels.true_channels, self.noise)
        rates = rate(s, self.radio.bandwidth)
        rho = qos_satisfaction(rates, self.requests)
        cp = pw.cluster_powers(C, alloc, rates, self.power)
        ee = pw.cluster_ee(rates, cp)
        util = UtilityVector(ue_utility(rho, self.alpha), cluster_utility(ee, self.beta))
        return Evaluation(
            clustering=C,
            alloc=alloc,
            sinr=s,
            rates=rates,
            rho=rho,
            cluster_power=cp,
            ee=ee,
            utility=util,
            precoders=W if keep_precoders else None,
        )

    def __call__(self, C):
        return self.evaluate(C).utility


def utility_vector(C, oracle):
    return oracle(C)


def enumerate_feasible(K, M, k_max, m_max):
    """Yield every feasible K x M clustering matrix (brute force)."""
    if K * M > MAX_BRUTEFORCE_LINKS:
        raise InstanceTooLarge(
            f"K*M={K * M} exceeds the brute-force budget of {MAX_BRUTEFORCE_LINKS} links"
        )
    for bits in itertools.product((0, 1), repeat=K * M):
        C = np.array(bits, dtype=np.int8).reshape(K, M)
        if is_feasible(C, k_max, m_max):
            yield C


class ParetoPoint(NamedTuple):
    clustering: np.ndarray
    utility: UtilityVector


def pareto_front_bruteforce(oracle, k_max, m_max):
    """Non-dominated feasible clusterings of a tiny instance."""
    K, M = oracle.shape
    points = [ParetoPoint(C, oracle(C)) for C in enumerate_feasible(K, M, k_max, m_max)]
    return [
        p for p in points if not any(dominates(q.utility, p.utility) for q in points)
    ]
