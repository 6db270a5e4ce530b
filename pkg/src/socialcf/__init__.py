"""Socially-aware user-centric clustering for cell-free massive MIMO."""

__version__ = "0.1.0"

from .channel import ChannelParams, ChannelRealization, NetworkGeometry  # noqa: E402
from .config import ConfigError, SimulationConfig  # noqa: E402
from .estimators import (  # noqa: E402
    ALGORITHMS,
    BestChannelClusterer,
    CanonicalClusterer,
    DeferredAcceptanceClusterer,
    EarlyAcceptanceClusterer,
    MatchedDecisionClusterer,
    WhaleClusterer,
    make_clusterer,
)
from .radio import RadioConfig  # noqa: E402
from .social import SocialityConfig, UtilityOracle  # noqa: E402

__all__ = [
    "ALGORITHMS",
    "BestChannelClusterer",
    "CanonicalClusterer",
    "ChannelParams",
    "ChannelRealization",
    "ConfigError",
    "DeferredAcceptanceClusterer",
    "EarlyAcceptanceClusterer",
    "MatchedDecisionClusterer",
    "NetworkGeometry",
    "RadioConfig",
    "SimulationConfig",
    "SocialityConfig",
    "UtilityOracle",
    "WhaleClusterer",
    "make_clusterer",
]
