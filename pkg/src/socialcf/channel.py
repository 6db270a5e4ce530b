"""Stochastic channel generation for distributed multi-antenna APs.

Channels follow a spatially correlated Rician model: a deterministic
line-of-sight array response plus a correlated scattered component, scaled
by a distance-dependent large-scale gain. Large-scale quantities (LoS state,
shadowing, nominal cluster angles) are drawn once per deployment through
:func:`draw_large_scale`; small-scale fading is redrawn with
:func:`draw_small_scale`.
"""

from dataclasses import dataclass, replace

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

FADING_MODELS = ("rician", "rayleigh", "external")


class ChannelFormatError(ValueError):
    """Raised when a channel-import file cannot be parsed."""


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class NetworkGeometry:
    """AP and UE positions (meters) on a rectangular floor plan."""

    ap_positions: np.ndarray
    ue_positions: np.ndarray
    ap_broadside_angles: np.ndarray = None
    area: tuple = (97.0, 36.0)

    def __post_init__(self):
        ap = np.asarray(self.ap_positions, dtype=float).reshape(-1, 2)
        ue = np.asarray(self.ue_positions, dtype=float).reshape(-1, 2)
        if len(ap) < 1 or len(ue) < 1:
            raise ValueError("geometry needs at least one AP and one UE")
        if self.ap_broadside_angles is None:
            broadside = np.zeros(len(ap))
        else:
            broadside = np.asarray(self.ap_broadside_angles, dtype=float).reshape(-1)
        if broadside.shape != (len(ap),):
            raise ValueError("one broadside angle per AP is required")
        width, height = self.area
        for name, pts in (("AP", ap), ("UE", ue)):
            if np.any(pts < 0) or np.any(pts[:, 0] > width) or np.any(pts[:, 1] > height):
                raise ValueError(f"{name} position outside the {width}x{height} area")
        object.__setattr__(self, "ap_positions", _readonly(ap))
        object.__setattr__(self, "ue_positions", _readonly(ue))
        object.__setattr__(self, "ap_broadside_angles", _readonly(broadside))
        object.__setattr__(self, "area", (float(width), float(height)))

    @property
    def n_aps(self):
        return len(self.ap_positions)

    @property
    def n_ues(self):
        return len(self.ue_positions)

    def distances(self):
        """(K, M) UE-AP distances."""
        diff = self.ue_positions[:, None, :] - self.ap_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def angles(self):
        """(K, M) azimuth of each UE seen from each AP, relative to broadside."""
        diff = self.ue_positions[:, None, :] - self.ap_positions[None, :, :]
        return np.arctan2(diff[..., 1], diff[..., 0]) - self.ap_broadside_angles[None, :]


@dataclass(frozen=True)
class ChannelParams:
    carrier_frequency: float = 3.5e9
    antennas_per_ap: int = 16
    antenna_spacing: float = None  # defaults to half a wavelength
    multipath_clusters: int = 6
    asd: float = np.deg2rad(10.0)
    aoa_spread: float = np.deg2rad(40.0)
    d_max_los: float = 30.0
    shadowing_sigma_los: float = 4.0
    shadowing_sigma_nlos: float = 10.0
    fading_model: str = "rician"

    def __post_init__(self):
        if self.antenna_spacing is None:
            object.__setattr__(self, "antenna_spacing", self.wavelength / 2)
        if self.antenna_spacing <= 0:
            raise ValueError("antenna_spacing must be positive")
        if self.antennas_per_ap < 1 or self.multipath_clusters < 1:
            raise ValueError("antennas_per_ap and multipath_clusters must be >= 1")
        if self.asd < 0 or self.d_max_los <= 0:
            raise ValueError("asd must be >= 0 and d_max_los > 0")
        if self.fading_model not in FADING_MODELS:
            raise ValueError(f"fading_model must be one of {FADING_MODELS}")

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def spacing_ratio(self):
        return self.antenna_spacing / self.wavelength


@dataclass(frozen=True)
class LargeScaleState:
    """Per-deployment link statistics; arrays are indexed ``[k, m]``."""

    pathloss: np.ndarray  # linear gain g
    rician_factors: np.ndarray  # linear kappa
    los: np.ndarray
    steering: np.ndarray  # (K, M, N)
    covariance_sqrt: np.ndarray  # (K, M, N, N)


@dataclass(frozen=True)
class ChannelRealization:
    """True and estimated channels, each shaped (K, M, N).

    ``rician_factors`` and ``pathloss`` hold NaN when unknown (imported data).
    """

    true_channels: np.ndarray
    csi_channels: np.ndarray = None
    rician_factors: np.ndarray = None
    pathloss: np.ndarray = None

    def __post_init__(self):
        h = np.asarray(self.true_channels, dtype=complex)
        if h.ndim != 3:
            raise ValueError("channels must be shaped (K, M, N)")
        csi = h if self.csi_channels is None else np.asarray(self.csi_channels, dtype=complex)
        if csi.shape != h.shape:
            raise ValueError("csi_channels must match true_channels in shape")
        nan = np.full(h.shape[:2], np.nan)
        kappa = nan if self.rician_factors is None else np.asarray(self.rician_factors, float)
        g = nan if self.pathloss is None else np.asarray(self.pathloss, float)
        true = _readonly(h)
        object.__setattr__(self, "true_channels", true)
        object.__setattr__(self, "csi_channels", true if csi is h else _readonly(csi))
        object.__setattr__(self, "rician_factors", _readonly(kappa))
        object.__setattr__(self, "pathloss", _readonly(g))

    @property
    def shape(self):
        return self.true_channels.shape

    @property
    def perfect_csi(self):
        return self.csi_channels is self.true_channels or np.array_equal(
            self.csi_channels, self.true_channels
        )


def los_probability(d, d_max_los):
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    p = np.where(d <= d_max_los, (d_max_los - d) / d_max_los, 0.0)
    return float(p) if p.ndim == 0 else p


def pathloss_db(d, los, shadowing=0.0):
    """Large-scale gain in dB for LoS (-30.18 - 26 log d) or NLoS (-34.53 - 38 log d)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    logd = np.log10(d)
    g = np.where(los, -30.18 - 26.0 * logd, -34.53 - 38.0 * logd) + shadowing
    return float(g) if g.ndim == 0 else g


def rician_factor_db(d):
    return 13.0 - 0.03 * np.asarray(d, dtype=float)


def los_steering_vector(phi, n_antennas, spacing_ratio=0.5):
    n = np.arange(n_antennas)
    return np.exp(1j * 2 * np.pi * spacing_ratio * n * np.sin(phi))


def covariance_matrix(nominal_aoas, asd, n_antennas, spacing_ratio=0.5):
    """Local-scattering covariance averaged over ``len(nominal_aoas)`` clusters.

    Accepts a trailing cluster axis: input (..., Np) gives output (..., N, N).
    """
    aoas = np.asarray(nominal_aoas, dtype=float)
    if aoas.ndim == 0 or aoas.shape[-1] == 0:
        raise ValueError("at least one nominal AoA is required")
    lag = np.arange(n_antennas)[:, None] - np.arange(n_antennas)[None, :]
    phase = 2 * np.pi * spacing_ratio * lag  # (N, N)
    a = aoas[..., None, None]
    terms = np.exp(1j * phase * np.sin(a)) * np.exp(
        -0.5 * asd**2 * (phase * np.cos(a)) ** 2
    )
    return terms.mean(axis=-3)


def psd_sqrt(R):
    """Hermitian square root with negative eigenvalues clipped to zero."""
    vals, vecs = np.linalg.eigh(R)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)[..., None, :]) @ np.conj(np.swapaxes(vecs, -1, -2))


def draw_large_scale(params, geometry, rng):
    """Draw LoS states, shadowing and spatial covariances for one deployment."""
    d = geometry.distances()
    if np.any(d <= 0):
        raise ValueError("an AP and a UE are co-located (zero distance)")
    phi = geometry.angles()
    K, M = d.shape
    N = params.antennas_per_ap

    if params.fading_model == "rayleigh":
        los = np.zeros((K, M), dtype=bool)
    else:
        los = rng.random((K, M)) < los_probability(d, params.d_max_los)
    sigma = np.where(los, params.shadowing_sigma_los, params.shadowing_sigma_nlos)
    shadow = rng.standard_normal((K, M)) * sigma
    g = 10.0 ** (pathloss_db(d, los, shadow) / 10.0)
    kappa = np.where(los, 10.0 ** (rician_factor_db(d) / 10.0), 0.0)

    spread = rng.uniform(-params.aoa_spread, params.aoa_spread, (K, M, params.multipath_clusters))
    R = covariance_matrix(phi[..., None] + spread, params.asd, N, params.spacing_ratio)
    steering = los_steering_vector(phi[..., None], N, params.spacing_ratio)
    return LargeScaleState(
        pathloss=g,
        rician_factors=kappa,
        los=los,
        steering=steering,
        covariance_sqrt=psd_sqrt(R),
    )


def draw_small_scale(state, rng):
    """Draw one fading realization around the given large-scale state."""
    K, M, N = state.steering.shape
    z = (rng.standard_normal((K, M, N)) + 1j * rng.standard_normal((K, M, N))) / np.sqrt(2)
    scattered = np.einsum("kmij,kmj->kmi", state.covariance_sqrt, z)
    kappa = state.rician_factors[..., None]
    scale = np.sqrt(state.pathloss[..., None] / (kappa + 1.0))
    h = scale * (np.sqrt(kappa) * state.steering + scattered)
    return ChannelRealization(
        true_channels=h, rician_factors=state.rician_factors, pathloss=state.pathloss
    )


def draw_channel(params, geometry, rng):
    if params.fading_model == "external":
        raise ValueError("external channels are loaded, not drawn")
    return draw_small_scale(draw_large_scale(params, geometry, rng), rng)


def perturb_csi(channels, nmse_db, rng):
    """Return a copy whose ``csi_channels`` carry estimation error of the given NMSE.

    ``nmse_db=None`` (or ``-inf``) means perfect CSI.
    """
    if nmse_db is None or nmse_db == -np.inf:
        return replace(channels, csi_channels=None)
    if not np.isfinite(nmse_db):
        raise ValueError("nmse_db must be finite or None")
    h = channels.true_channels
    N = h.shape[-1]
    power = float(10.0 ** (nmse_db / 10.0)) * np.sum(np.abs(h) ** 2, axis=-1, keepdims=True) / N
    e = (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)) * np.sqrt(power / 2)
    return replace(channels, csi_channels=h + e)


def export_channels(channels, path, which="true"):
    """Write channels as ``K,M,N`` header plus ``k,m,re,im,...`` records."""
    h = channels.true_channels if which == "true" else channels.csi_channels
    K, M, N = h.shape
    with open(path, "w") as fh:
        fh.write(f"{K},{M},{N}\n")
        for k in range(K):
            for m in range(M):
                vals = np.empty(2 * N)
                vals[0::2] = h[k, m].real
                vals[1::2] = h[k, m].imag
                fh.write(f"{k},{m}," + ",".join(repr(float(v)) for v in vals) + "\n")


def load_external_channels(path, n_antennas=None, n_ues=None, n_aps=None):
    """Parse a channel-import file; declared dimensions are checked when given."""
    with open(path) as fh:
        lines = [(i, ln.strip()) for i, ln in enumerate(fh, start=1)]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ChannelFormatError(f"{path}: empty channel file")
    lineno, header = lines[0]
    try:
        K, M, N = (int(x) for x in header.split(","))
    except ValueError:
        raise ChannelFormatError(f"{path}:{lineno}: header must be 'K,M,N'") from None
    for name, declared, got in (("N", n_antennas, N), ("K", n_ues, K), ("M", n_aps, M)):
        if declared is not None and declared != got:
            raise ChannelFormatError(f"{path}:{lineno}: {name}={got}, expected {declared}")

    h = np.zeros((K, M, N), dtype=complex)
    seen = np.zeros((K, M), dtype=bool)
    for lineno, ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 2 + 2 * N:
            raise ChannelFormatError(
                f"{path}:{lineno}: expected {2 + 2 * N} fields, got {len(parts)}"
            )
        try:
            k, m = int(parts[0]), int(parts[1])
            vals = np.array([float(x) for x in parts[2:]])
        except ValueError:
            raise ChannelFormatError(f"{path}:{lineno}: malformed number") from None
        if not (0 <= k < K and 0 <= m < M):
            raise ChannelFormatError(f"{path}:{lineno}: pair ({k},{m}) out of range")
        if seen[k, m]:
            raise ChannelFormatError(f"{path}:{lineno}: duplicate pair ({k},{m})")
        h[k, m] = vals[0::2] + 1j * vals[1::2]
        seen[k, m] = True
    if not seen.all():
        k, m = np.argwhere(~seen)[0]
        raise ChannelFormatError(f"{path}: missing record for pair ({k},{m})")
    return ChannelRealization(true_channels=h)
