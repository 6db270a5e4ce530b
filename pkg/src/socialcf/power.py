"""Network power consumption and energy-efficiency metrics.

Per-cluster power attributes the CPU fixed power equally to associated UEs
and each engaged AP's fixed power equally to the UEs it serves, so that
cluster powers plus idle-AP fixed power add up to the network total.
"""

from dataclasses import dataclass

import numpy as np

from .radio import check_clustering


@dataclass(frozen=True)
class PowerModelParams:
    p_aau_fix: float = 40.0
    p_fh_fix: float = 0.825
    p_fh_prec: float = 0.01
    p_cpu_fix: float = 5.0
    p_cpu_enc: float = 0.1e-9  # W per bit/s (0.1 W per Gb/s)
    pa_efficiency: float = 0.4
    shutdown_fraction: float = 0.30

    def __post_init__(self):
        for name in ("p_aau_fix", "p_fh_fix", "p_fh_prec", "p_cpu_fix", "p_cpu_enc"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 < self.pa_efficiency <= 1:
            raise ValueError("pa_efficiency must lie in (0, 1]")
        if not 0 <= self.shutdown_fraction <= 1:
            raise ValueError("shutdown_fraction must lie in [0, 1]")

    @classmethod
    def from_gbps(cls, p_cpu_enc_w_per_gbps=0.1, **kwargs):
        """Build with the encoding cost given in W per Gb/s."""
        return cls(p_cpu_enc=p_cpu_enc_w_per_gbps * 1e-9, **kwargs)

    @property
    def ap_fixed(self):
        return self.p_aau_fix + self.p_fh_fix


@dataclass(frozen=True)
class PowerBreakdown:
    per_ap: np.ndarray
    cpu: float
    total: float
    per_cluster: np.ndarray
    effective_total: float
    idle_aps: int


def ap_powers(C, alloc, params):
    """(M,) power drawn by every AP."""
    C = check_clustering(C)
    dynamic = C * (alloc / params.pa_efficiency + params.p_fh_prec)
    return params.ap_fixed + dynamic.sum(axis=0)


def ap_power(m, C, alloc, params):
    return float(ap_powers(C, alloc, params)[m])


def cpu_power(rates, params):
    return params.p_cpu_fix + float(np.sum(rates)) * params.p_cpu_enc


def total_power(C, alloc, rates, params):
    return float(ap_powers(C, alloc, params).sum()) + cpu_power(rates, params)


def network_ee(rates, total):
    """Network energy efficiency (bits/J) of a single realization."""
    return float(np.sum(rates)) / total


def cluster_powers(C, alloc, rates, params):
    """(K,) power attributed to each UE's serving cluster; 0 for unassociated UEs."""
    C = check_clustering(C)
    rates = np.asarray(rates, dtype=float)
    associated = C.any(axis=1)
    n_assoc = int(associated.sum())
    if n_assoc == 0:
        return np.zeros(C.shape[0])
    load = C.sum(axis=0)
    fixed_share = np.divide(params.ap_fixed, load, out=np.zeros(load.shape), where=load > 0)
    per_link = C * (fixed_share[None, :] + alloc / params.pa_efficiency + params.p_fh_prec)
    cpu_share = params.p_cpu_fix / n_assoc + rates * params.p_cpu_enc
    return np.where(associated, cpu_share + per_link.sum(axis=1), 0.0)


def cluster_power(k, C, alloc, rates, params):
    return float(cluster_powers(C, alloc, rates, params)[k])


def cluster_ee(rates, powers):
    """(K,) rate over cluster power, defined as 0 where no cluster exists."""
    rates = np.asarray(rates, dtype=float)
    powers = np.asarray(powers, dtype=float)
    return np.divide(rates, powers, out=np.zeros(rates.shape), where=powers > 0)


def effective_power(C, total, params):
    """Total power after symbol shutdown at APs that serve nobody."""
    C = check_clustering(C)
    idle = int(C.shape[1] - np.count_nonzero(C.any(axis=0)))
    return total - params.shutdown_fraction * params.p_aau_fix * idle


def power_breakdown(C, alloc, rates, params):
    C = check_clustering(C)
    per_ap = ap_powers(C, alloc, params)
    cpu = cpu_power(rates, params)
    total = float(per_ap.sum()) + cpu
    return PowerBreakdown(
        per_ap=per_ap,
        cpu=cpu,
        total=total,
        per_cluster=cluster_powers(C, alloc, rates, params),
        effective_total=effective_power(C, total, params),
        idle_aps=int(C.shape[1] - np.count_nonzero(C.any(axis=0))),
    )
