"""Scikit-learn style clusterers wrapping the association algorithms.

Every clusterer follows the same contract::

    est = EarlyAcceptanceClusterer(k_max=12, m_max=6, alpha="egalitarian")
    C = est.fit_predict(channels, requests)

``X`` is a :class:`~socialcf.channel.ChannelRealization` or a complex
(K, M, N) array of channel estimates; ``y`` holds the per-UE traffic
requests in bits/s. Utility-driven clusterers build a
:class:`~socialcf.social.UtilityOracle` from ``(X, y)`` unless one is
passed explicitly through ``oracle=``. After fitting, ``clustering_`` holds
the K x M association matrix.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import baselines, matching
from .channel import ChannelRealization
from .radio import RadioConfig, is_feasible
from .social import SocialityConfig, UtilityOracle


def check_channels(X):
    """Return ``(realization, csi)`` for a realization or a (K, M, N) array."""
    if isinstance(X, ChannelRealization):
        realization = X
    else:
        arr = np.asarray(X)
        if arr.ndim != 3:
            raise ValueError(f"expected a (K, M, N) channel array, got shape {arr.shape}")
        realization = ChannelRealization(true_channels=arr)
    csi = realization.csi_channels
    if 0 in csi.shape:
        raise ValueError("channel array has an empty dimension")
    if not np.all(np.isfinite(csi)):
        raise ValueError("channel array contains NaN or inf")
    return realization, csi


def _check_quotas(k_max, m_max):
    if int(k_max) < 1 or int(m_max) < 1:
        raise ValueError("k_max and m_max must be >= 1")


class BaseClusterer(BaseEstimator):
    uses_oracle = False

    def _make_oracle(self, realization, y):
        if y is None:
            raise ValueError(f"{type(self).__name__} needs traffic requests y or an oracle")
        radio = RadioConfig(
            k_max=self.k_max, m_max=self.m_max, precoder=getattr(self, "precoder", "lpzf")
        )
        sociality = SocialityConfig(
            getattr(self, "alpha", "egalitarian"), getattr(self, "beta", "egalitarian")
        )
        return UtilityOracle(realization, y, radio=radio, sociality=sociality)

    def fit(self, X, y=None, oracle=None):
        realization, csi = check_channels(X)
        if self.uses_oracle and oracle is None:
            oracle = self._make_oracle(realization, y)
        if oracle is not None and tuple(oracle.shape) != csi.shape[:2]:
            raise ValueError("oracle and channels disagree on (K, M)")
        C, matching_, trace = self._cluster(csi, oracle)
        self.clustering_ = np.asarray(C, dtype=np.int8)
        self.matching_ = matching_
        self.trace_ = trace
        self.n_associations_ = int(self.clustering_.sum())
        return self

    def fit_predict(self, X, y=None, oracle=None):
        return self.fit(X, y, oracle=oracle).clustering_

    def feasible(self, k_max=None, m_max=None):
        check_is_fitted(self, "clustering_")
        k_max = k_max if k_max is not None else getattr(self, "k_max", None)
        m_max = m_max if m_max is not None else getattr(self, "m_max", None)
        if k_max is None or m_max is None:
            raise ValueError(f"{type(self).__name__} has no quotas; pass k_max and m_max")
        return is_feasible(self.clustering_, k_max, m_max)


class BestChannelClusterer(BaseClusterer):
    def _cluster(self, csi, oracle):
        return baselines.best_channel(np.linalg.norm(csi, axis=-1)), None, None


class CanonicalClusterer(BaseClusterer):
    def _cluster(self, csi, oracle):
        return baselines.canonical(*csi.shape[:2]), None, None


class MatchedDecisionClusterer(BaseClusterer):
    def __init__(self, k_max=12, m_max=6):
        self.k_max = k_max
        self.m_max = m_max

    def _cluster(self, csi, oracle):
        _check_quotas(self.k_max, self.m_max)
        metric = np.linalg.norm(csi, axis=-1)
        return baselines.matched_decision(metric, self.k_max, self.m_max), None, None


class EarlyAcceptanceClusterer(BaseClusterer):
    """Early-acceptance first matching plus social cluster evolution."""

    uses_oracle = True

    def __init__(
        self, k_max=12, m_max=6, alpha="egalitarian", beta="egalitarian", precoder="lpzf",
        evolve=True, record=False,
    ):
        self.k_max = k_max
        self.m_max = m_max
        self.alpha = alpha
        self.beta = beta
        self.precoder = precoder
        self.evolve = evolve
        self.record = record

    def _cluster(self, csi, oracle):
        _check_quotas(self.k_max, self.m_max)
        prefs = matching.build_preferences(csi)
        trace = matching.MatchingTrace(record=self.record)
        mt, trace = matching.run_ea(
            prefs, oracle, self.k_max, self.m_max, evolve=self.evolve, trace=trace
        )
        return mt.to_matrix(), mt, trace


class DeferredAcceptanceClusterer(BaseClusterer):
    """Deferred-acceptance game with optional social swap-matching.

    ``swap=None`` enables swapping only for fewer than 20 UEs.
    """

    uses_oracle = True

    def __init__(
        self, k_max=12, m_max=6, alpha="egalitarian", beta="egalitarian", precoder="lpzf",
        swap=None, record=False,
    ):
        self.k_max = k_max
        self.m_max = m_max
        self.alpha = alpha
        self.beta = beta
        self.precoder = precoder
        self.swap = swap
        self.record = record

    def _cluster(self, csi, oracle):
        _check_quotas(self.k_max, self.m_max)
        prefs = matching.build_preferences(csi)
        trace = matching.MatchingTrace(record=self.record)
        mt, trace = matching.run_da(
            prefs, oracle, self.k_max, self.m_max, enable_swap=self.swap, trace=trace
        )
        return mt.to_matrix(), mt, trace


class WhaleClusterer(BaseClusterer):
    """Binary whale optimization maximizing QoS plus target-normalized cluster EE."""

    uses_oracle = True

    def __init__(
        self, k_max=12, m_max=6, population=50, epochs=100, ee_target=35e6, spiral=1.0,
        feedback=True, precoder="lpzf", random_state=None,
    ):
        self.k_max = k_max
        self.m_max = m_max
        self.population = population
        self.epochs = epochs
        self.ee_target = ee_target
        self.spiral = spiral
        self.feedback = feedback
        self.precoder = precoder
        self.random_state = random_state

    def _cluster(self, csi, oracle):
        _check_quotas(self.k_max, self.m_max)
        config = baselines.WoaConfig(
            population=self.population, epochs=self.epochs, ee_target=self.ee_target,
            spiral=self.spiral, feedback=self.feedback,
        )
        rng = np.random.default_rng(self.random_state)
        C, history = baselines.woa(
            oracle, config, np.linalg.norm(csi, axis=-1), self.k_max, self.m_max, rng
        )
        self.fitness_history_ = history
        return C, None, None


ALGORITHMS = {
    "EA": EarlyAcceptanceClusterer,
    "DA": DeferredAcceptanceClusterer,
    "BC": BestChannelClusterer,
    "CS": CanonicalClusterer,
    "MD": MatchedDecisionClusterer,
    "WOA": WhaleClusterer,
}


def make_clusterer(name, **params):
    """Instantiate a registered clusterer, ignoring params it does not take."""
    try:
        cls = ALGORITHMS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}") from None
    accepted = cls._get_param_names()
    return cls(**{k: v for k, v in params.items() if k in accepted})
