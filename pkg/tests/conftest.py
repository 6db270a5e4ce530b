import numpy as np
import pytest

from socialcf.config import SimulationConfig
from socialcf.harness import realize
from socialcf.radio import RadioConfig
from socialcf.social import SocialityConfig, UtilityOracle


def tiny_config(K=2, M=3, k_max=2, m_max=2, **kw):
    """Small random deployment: M APs spread across the floor, K UEs."""
    xs = np.linspace(10.0, 87.0, M)
    ys = np.linspace(8.0, 28.0, M)
    positions = "; ".join(f"{x} {y}" for x, y in zip(xs, ys))
    base = dict(n_ues=K, n_aps=M, k_max=k_max, m_max=m_max, ap_positions=positions,
                mc_deployments=1, runs_per_deployment=1)
    base.update(kw)
    return SimulationConfig(**base)


def make_oracle(config, deployment=0, run=0):
    channels, requests = realize(config, deployment, run)
    return UtilityOracle(
        channels, requests, config.radio_config(), config.power_params(), config.sociality()
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def desk_config():
    return SimulationConfig(mc_deployments=1, runs_per_deployment=1)


def orthogonal_oracle(K, M, N, requests, gains=None, precoder="lpzf", k_max=None, m_max=None,
                      alpha="egalitarian", beta="egalitarian"):
    """Channels where every (UE, AP) pair uses its own antenna: no interference at all."""
    from socialcf.channel import ChannelRealization

    assert N >= K
    h = np.zeros((K, M, N), dtype=complex)
    gains = np.full((K, M), 1e-9) if gains is None else np.asarray(gains, dtype=float)
    for k in range(K):
        h[k, :, k] = np.sqrt(gains[k])
    radio = RadioConfig(k_max=k_max or K, m_max=m_max or M, precoder=precoder)
    return UtilityOracle(ChannelRealization(true_channels=h), np.asarray(requests, dtype=float),
                         radio=radio, sociality=SocialityConfig(alpha, beta))


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
