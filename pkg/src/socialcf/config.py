"""Simulation configuration and its ``key = value`` text format."""

import dataclasses
import typing
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .baselines import WoaConfig
from .channel import ChannelParams
from .power import PowerModelParams
from .radio import RadioConfig
from .social import SocialityConfig, resolve_factor


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    # radio and deployment defaults
    carrier_frequency: float = 3.5e9
    bandwidth: float = 100e6
    n_aps: int = 15
    n_ues: int = 30
    k_max: int = 12
    m_max: int = 6
    n_antennas: int = 16
    p_max: float = 0.25
    noise_psd_dbm: float = -174.0
    precoder: str = "lpzf"
    # power model
    pa_efficiency: float = 0.4
    p_aau_fix: float = 40.0
    p_fh_fix: float = 0.825
    p_fh_prec: float = 0.01
    p_cpu_fix: float = 5.0
    p_cpu_enc_w_per_gbps: float = 0.1
    shutdown_fraction: float = 0.3
    # propagation
    fading_model: str = "rician"
    d_max_los: float = 30.0
    multipath_clusters: int = 6
    antenna_spacing_wavelengths: float = 0.5
    asd_deg: float = 10.0
    aoa_spread_deg: float = 40.0
    shadowing_sigma_los: float = 4.0
    shadowing_sigma_nlos: float = 10.0
    area_width: float = 97.0
    area_height: float = 36.0
    ap_positions: Optional[str] = None  # "x y; x y; ..." overrides the grid
    ap_broadside_deg: float = 0.0
    channel_file: Optional[str] = None
    nmse_db: Optional[float] = None  # None = perfect CSI
    # traffic, in Mb/s
    request_intensities: tuple = (100.0, 300.0, 500.0)
    # algorithms
    algorithm: str = "EA"
    alpha: str = "egalitarian"
    beta: str = "egalitarian"
    da_swap: Optional[bool] = None  # None = on only below 20 UEs
    woa_population: int = 50
    woa_epochs: int = 100
    woa_ee_target_mbpj: float = 35.0
    woa_feedback: bool = True
    # Monte Carlo
    mc_deployments: int = 20
    runs_per_deployment: int = 5
    seed: int = 0

    def __post_init__(self):
        positive = ("bandwidth", "n_aps", "n_ues", "k_max", "m_max", "n_antennas", "p_max",
                    "mc_deployments", "runs_per_deployment", "area_width", "area_height")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not self.request_intensities or min(self.request_intensities) <= 0:
            raise ConfigError("request_intensities must be positive")
        try:
            SocialityConfig(_maybe_number(self.alpha), _maybe_number(self.beta))
            self.channel_params()
            self.radio_config()
            self.power_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def full_scale(self):
        return dataclasses.replace(self, mc_deployments=100, runs_per_deployment=100)

    def channel_params(self):
        wavelength = 299_792_458.0 / self.carrier_frequency
        return ChannelParams(
            carrier_frequency=self.carrier_frequency,
            antennas_per_ap=self.n_antennas,
            antenna_spacing=self.antenna_spacing_wavelengths * wavelength,
            multipath_clusters=self.multipath_clusters,
            asd=np.deg2rad(self.asd_deg),
            aoa_spread=np.deg2rad(self.aoa_spread_deg),
            d_max_los=self.d_max_los,
            shadowing_sigma_los=self.shadowing_sigma_los,
            shadowing_sigma_nlos=self.shadowing_sigma_nlos,
            fading_model=self.fading_model,
        )

    def radio_config(self):
        return RadioConfig(
            bandwidth=self.bandwidth, noise_psd_dbm=self.noise_psd_dbm, p_max=self.p_max,
            k_max=self.k_max, m_max=self.m_max, precoder=self.precoder,
        )

    def power_params(self):
        return PowerModelParams.from_gbps(
            self.p_cpu_enc_w_per_gbps, p_aau_fix=self.p_aau_fix, p_fh_fix=self.p_fh_fix,
            p_fh_prec=self.p_fh_prec, p_cpu_fix=self.p_cpu_fix,
            pa_efficiency=self.pa_efficiency, shutdown_fraction=self.shutdown_fraction,
        )

    def sociality(self):
        return SocialityConfig(_maybe_number(self.alpha), _maybe_number(self.beta))

    def resolved_factors(self, K=None):
        K = self.n_ues if K is None else K
        return (resolve_factor(_maybe_number(self.alpha), K),
                resolve_factor(_maybe_number(self.beta), K))

    def woa_config(self):
        return WoaConfig(
            population=self.woa_population, epochs=self.woa_epochs,
            ee_target=self.woa_ee_target_mbpj * 1e6, feedback=self.woa_feedback,
        )

    def explicit_ap_positions(self):
        if not self.ap_positions:
            return None
        try:
            pts = [[float(v) for v in p.split()] for p in self.ap_positions.split(";") if p.strip()]
            return np.array(pts, dtype=float).reshape(-1, 2)
        except ValueError as exc:
            raise ConfigError(f"ap_positions: {exc}") from exc


def _maybe_number(value):
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def _parse(name, hint, text):
    text = text.strip()
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        if text.lower() in ("none", "null", "", "perfect", "auto"):
            return None
        inner = [a for a in typing.get_args(hint) if a is not type(None)][0]
        return _parse(name, inner, text)
    if hint is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {text!r}")
    if hint is tuple:
        try:
            return tuple(float(v) for v in text.replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"{name}: expected numbers, got {text!r}") from None
    if hint in (int, float):
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, got {text!r}") from None
        if hint is int:
            if value != int(value):
                raise ConfigError(f"{name}: expected an integer, got {text!r}")
            return int(value)
        return value
    return text


def parse_overrides(pairs, base=None):
    """Apply ``key=value`` strings to ``base`` (defaults if None)."""
    base = base if base is not None else SimulationConfig()
    hints = typing.get_type_hints(SimulationConfig)
    updates = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"expected key=value, got {pair!r}")
        key, value = (s.strip() for s in pair.split("=", 1))
        if key not in hints:
            raise ConfigError(f"unknown config key {key!r}")
        updates[key] = _parse(key, hints[key], value)
    return dataclasses.replace(base, **updates)


def load_config(path, base=None):
    """Read a ``key = value`` file; ``#`` starts a comment."""
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            pairs.append(line)
    return parse_overrides(pairs, base)


def dump_config(config):
    """Render a config in the ``key = value`` format accepted by :func:`load_config`."""
    lines = []
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if value is None:
            text = "none"
        elif isinstance(value, tuple):
            text = " ".join(repr(v) for v in value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"
