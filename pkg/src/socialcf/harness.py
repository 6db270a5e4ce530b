"""Deployment sampling, Monte Carlo orchestration, sweeps and result files.

Seeding
-------
Every random stream is a ``numpy.random.SeedSequence`` built from integer
words, so the mapping is stable across versions and independent of worker
count or completion order:

* deployment streams ``[seed, 0, d]`` (UE positions) and ``[seed, 0, d, 1]``
  (LoS states, shadowing, angular spreads);
* run stream ``[seed, 1, d, r]`` draws traffic requests and small-scale fading;
* CSI-error stream ``[seed, 2, d, r]`` draws estimation noise, so the true
  channels of a run do not depend on the NMSE setting;
* algorithm stream ``[seed, 3, d, r, crc32(name)]`` feeds stochastic
  clusterers (WOA).

Output columns
--------------
Sweep tables hold one row per grid point. For each metric below the row has
the Monte Carlo mean under the metric name and the standard deviation under
``<name>_std``. Units are SI: bit/s, W, bit/J.

``qos_mean`` mean per-UE QoS satisfaction; ``qos_total`` its sum over UEs;
``ee_cluster_mean`` / ``ee_cluster_sum`` per-UE cluster energy efficiency;
``network_ee`` and ``effective_ee`` network EE before and after symbol
shutdown; ``total_power`` / ``effective_power``; ``n_associations`` AP-UE
links; ``n_unassociated`` UEs without any AP; ``idle_aps``.
"""

import csv
import dataclasses
import json
import os
import subprocess
import sys
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .channel import (
    NetworkGeometry,
    draw_large_scale,
    draw_small_scale,
    load_external_channels,
    perturb_csi,
)
from .config import ConfigError
from .estimators import ALGORITHMS, make_clusterer
from .power import power_breakdown
from .social import UtilityOracle

SCHEMA_VERSION = 1
WORKERS_ENV = "SOCIALCF_WORKERS"

SCALAR_METRICS = (
    "qos_mean",
    "qos_total",
    "ee_cluster_mean",
    "ee_cluster_sum",
    "network_ee",
    "effective_ee",
    "total_power",
    "effective_power",
    "n_associations",
    "n_unassociated",
    "idle_aps",
    "budget_error",
    "wall_time",
)

_DEPLOYMENT, _RUN, _CSI, _ALGORITHM = range(4)


def algorithm_id(name):
    return zlib.crc32(name.upper().encode())


def stream(seed, *words):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, words)]))


def grid_ap_positions(n_aps, width, height):
    """Cell centers of the least wasteful grid whose aspect best fits the area."""
    best = None
    for rows in range(1, n_aps + 1):
        cols = -(-n_aps // rows)
        score = (rows * cols - n_aps, abs(np.log(cols / rows) - np.log(width / height)))
        if best is None or score < best[0]:
            best = (score, rows, cols)
    _, rows, cols = best
    xs = (np.arange(cols) + 0.5) * width / cols
    ys = (np.arange(rows) + 0.5) * height / rows
    pts = np.array([(x, y) for y in ys for x in xs])
    return pts[:n_aps]


def ap_layout(config):
    explicit = config.explicit_ap_positions()
    if explicit is not None:
        if len(explicit) != config.n_aps:
            raise ConfigError(f"ap_positions lists {len(explicit)} APs, n_aps={config.n_aps}")
        return explicit
    return grid_ap_positions(config.n_aps, config.area_width, config.area_height)


def sample_geometry(config, rng):
    ue = rng.uniform((0.0, 0.0), (config.area_width, config.area_height), (config.n_ues, 2))
    return NetworkGeometry(
        ap_positions=ap_layout(config),
        ue_positions=ue,
        ap_broadside_angles=np.full(config.n_aps, np.deg2rad(config.ap_broadside_deg)),
        area=(config.area_width, config.area_height),
    )


def sample_requests(config, rng, size=None):
    """Poisson requests in Mb/s around a per-UE intensity; zeros are redrawn."""
    size = config.n_ues if size is None else size
    lam = rng.choice(np.asarray(config.request_intensities, dtype=float), size=size)
    req = rng.poisson(lam).astype(float)
    while np.any(req == 0):
        zero = req == 0
        req[zero] = rng.poisson(lam[zero])
    return req * 1e6


def sample_deployment(config, rng):
    """Return ``(geometry, requests)`` with requests in bits/s."""
    geometry = sample_geometry(config, rng)
    return geometry, sample_requests(config, rng)


@dataclass
class RunResult:
    algorithm: str
    deployment: int
    run: int
    n_ues: int = 0
    rho: np.ndarray = None
    rates: np.ndarray = None
    ee: np.ndarray = None
    cluster_power: np.ndarray = None
    qos_mean: float = np.nan
    qos_total: float = np.nan
    ee_cluster_mean: float = np.nan
    ee_cluster_sum: float = np.nan
    network_ee: float = np.nan
    effective_ee: float = np.nan
    total_power: float = np.nan
    effective_power: float = np.nan
    n_associations: int = 0
    n_unassociated: int = 0
    idle_aps: int = 0
    budget_error: float = np.nan
    feasible: bool = False
    clustering: np.ndarray = None
    trace: dict = None
    wall_time: float = 0.0
    error: str = None

    @property
    def ok(self):
        return self.error is None


def realize(config, deployment, run):
    """Channels (with CSI error applied) and requests for one deployment/run."""
    large = None
    if config.channel_file:
        channels = load_external_channels(
            config.channel_file, n_antennas=config.n_antennas, n_aps=config.n_aps
        )
    else:
        geometry = sample_geometry(config, stream(config.seed, _DEPLOYMENT, deployment))
        large = draw_large_scale(
            config.channel_params(), geometry, stream(config.seed, _DEPLOYMENT, deployment, 1)
        )
    rng = stream(config.seed, _RUN, deployment, run)
    K = config.n_ues if large is not None else channels.shape[0]
    requests = sample_requests(config, rng, K)
    if large is not None:
        channels = draw_small_scale(large, rng)
    channels = perturb_csi(channels, config.nmse_db, stream(config.seed, _CSI, deployment, run))
    return channels, requests


def _budget_error(C, W, p_max):
    per_ap = np.sum(np.abs(W) ** 2, axis=(0, 2))
    serving = C.any(axis=0)
    if not serving.any():
        return 0.0
    return float(np.max(np.abs(per_ap[serving] - p_max)) / p_max)


def run_once(config, algorithm, deployment=0, run=0):
    """One deployment/run through channels, clustering and evaluation.

    Exceptions are caught and stored in ``error``; metrics stay unset then.
    """
    start = time.perf_counter()
    try:
        channels, requests = realize(config, deployment, run)
        oracle = UtilityOracle(
            channels, requests, config.radio_config(), config.power_params(), config.sociality()
        )
        algo_rng = stream(config.seed, _ALGORITHM, deployment, run, algorithm_id(algorithm))
        est = make_clusterer(
            algorithm,
            k_max=config.k_max,
            m_max=config.m_max,
            alpha=config.sociality().alpha,
            beta=config.sociality().beta,
            precoder=config.precoder,
            swap=config.da_swap,
            population=config.woa_population,
            epochs=config.woa_epochs,
            ee_target=config.woa_ee_target_mbpj * 1e6,
            feedback=config.woa_feedback,
            random_state=algo_rng,
        )
        C = est.fit_predict(channels, requests, oracle=oracle)
        ev = oracle.evaluate(C, keep_precoders=True)
        br = power_breakdown(C, ev.alloc, ev.rates, config.power_params())
        total_rate = float(ev.rates.sum())
        trace = est.trace_.as_dict() if getattr(est, "trace_", None) is not None else {}
        return RunResult(
            algorithm=algorithm,
            deployment=deployment,
            run=run,
            n_ues=len(requests),
            rho=ev.rho,
            rates=ev.rates,
            ee=ev.ee,
            cluster_power=ev.cluster_power,
            qos_mean=float(ev.rho.mean()),
            qos_total=float(ev.rho.sum()),
            ee_cluster_mean=float(ev.ee.mean()),
            ee_cluster_sum=float(ev.ee.sum()),
            network_ee=total_rate / br.total,
            effective_ee=total_rate / br.effective_total,
            total_power=br.total,
            effective_power=br.effective_total,
            n_associations=int(C.sum()),
            n_unassociated=int(np.count_nonzero(~C.any(axis=1))),
            idle_aps=br.idle_aps,
            budget_error=_budget_error(C, ev.precoders, config.p_max),
            feasible=bool(est.feasible(config.k_max, config.m_max)),
            clustering=C,
            trace=trace,
            wall_time=time.perf_counter() - start,
        )
    except Exception as exc:  # recorded, never half-filled
        return RunResult(
            algorithm=algorithm, deployment=deployment, run=run,
            error=f"{type(exc).__name__}: {exc}", wall_time=time.perf_counter() - start,
        )


@dataclass
class AggregateMetrics:
    algorithm: str
    runs: list
    samples: dict = field(default_factory=dict)

    @classmethod
    def from_runs(cls, algorithm, runs):
        good = [r for r in runs if r.ok]
        samples = {m: np.array([getattr(r, m) for r in good], dtype=float) for m in SCALAR_METRICS}
        samples["ue_qos"] = np.concatenate([r.rho for r in good]) if good else np.empty(0)
        samples["ue_ee"] = np.concatenate([r.ee for r in good]) if good else np.empty(0)
        return cls(algorithm=algorithm, runs=list(runs), samples=samples)

    @property
    def n_samples(self):
        return len(self.samples["qos_mean"])

    @property
    def n_errors(self):
        return sum(not r.ok for r in self.runs)

    @property
    def errors(self):
        return [r.error for r in self.runs if not r.ok]

    @property
    def mean(self):
        return {m: float(np.mean(v)) if len(v) else np.nan for m, v in self.samples.items()}

    @property
    def std(self):
        return {m: float(np.std(v)) if len(v) else np.nan for m, v in self.samples.items()}

    def cdf(self, metric):
        """Sorted support and cumulative probabilities of ``metric``."""
        x = np.sort(self.samples[metric])
        return x, np.arange(1, len(x) + 1) / max(len(x), 1)


def default_workers():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return n


def _task(args):
    return run_once(*args)


def monte_carlo(config, algorithms, workers=None):
    """Run every algorithm over deployments x runs; results ordered by index."""
    algorithms = list(algorithms)
    if not algorithms:
        raise ConfigError("at least one algorithm is required")
    for name in algorithms:
        if name.upper() not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}")
    workers = default_workers() if workers is None else int(workers)
    tasks = [
        (config, name, d, r)
        for name in algorithms
        for d in range(config.mc_deployments)
        for r in range(config.runs_per_deployment)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_task(t) for t in tasks]
    per_algo = len(tasks) // len(algorithms)
    return {
        name: AggregateMetrics.from_runs(name, results[i * per_algo:(i + 1) * per_algo])
        for i, name in enumerate(algorithms)
    }


def metric_row(agg, metrics=SCALAR_METRICS):
    mean, std = agg.mean, agg.std
    row = {}
    for m in metrics:
        row[m] = mean[m]
        row[f"{m}_std"] = std[m]
    row["n_samples"] = agg.n_samples
    row["n_errors"] = agg.n_errors
    return row


def sweep_social(config, alphas, betas, workers=None):
    """EA over an (alpha, beta) grid; one row per cell."""
    rows = []
    for a in alphas:
        for b in betas:
            cfg = dataclasses.replace(config, alpha=str(a), beta=str(b))
            agg = monte_carlo(cfg, ["EA"], workers)["EA"]
            ra, rb = cfg.resolved_factors()
            rows.append({"alpha_label": str(a), "beta_label": str(b), "alpha": ra, "beta": rb,
                         **metric_row(agg)})
    return rows


def sweep_load(config, n_ues_values, algorithms, workers=None):
    rows = []
    for K in n_ues_values:
        cfg = dataclasses.replace(config, n_ues=int(K))
        for name, agg in monte_carlo(cfg, algorithms, workers).items():
            rows.append({"n_ues": int(K), "algorithm": name, **metric_row(agg)})
    return rows


def sweep_nmse(config, nmse_values, n_ues_values=None, algorithm="EA", workers=None):
    """``None`` in ``nmse_values`` is perfect CSI."""
    rows = []
    for K in n_ues_values or (config.n_ues,):
        for nmse in nmse_values:
            cfg = dataclasses.replace(config, n_ues=int(K), nmse_db=nmse)
            agg = monte_carlo(cfg, [algorithm], workers)[algorithm]
            rows.append({"n_ues": int(K), "nmse_db": "perfect" if nmse is None else float(nmse),
                         "algorithm": algorithm, **metric_row(agg)})
    return rows


def shutdown_analysis(config, n_ues_values, algorithm="EA", workers=None):
    metrics = ("total_power", "effective_power", "network_ee", "effective_ee", "idle_aps")
    rows = []
    for K in n_ues_values:
        cfg = dataclasses.replace(config, n_ues=int(K))
        agg = monte_carlo(cfg, [algorithm], workers)[algorithm]
        rows.append({"n_ues": int(K), "algorithm": algorithm, **metric_row(agg, metrics)})
    return rows


def version_string():
    """``git describe`` of the source checkout, else the package version."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=here, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def _write_csv(fh, rows):
    columns = list(dict.fromkeys(k for row in rows for k in row))
    writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\r\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def emit_results(tables, fmt, path, config=None):
    """Write ``{name: rows}`` as CSV (one file per table) or one JSON document.

    CSV with several tables goes to ``<stem>_<table>.csv``. ``path="-"``
    writes to stdout. Returns the written paths.
    """
    fmt = fmt.lower()
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown output format {fmt!r}; expected 'csv' or 'json'")
    if fmt == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "version": version_string(),
            "config": {f.name: _plain(getattr(config, f.name)) for f in
                       dataclasses.fields(config)} if config is not None else None,
            "tables": {name: [{k: _plain(v) for k, v in row.items()} for row in rows]
                       for name, rows in tables.items()},
        }
        if path == "-":
            json.dump(doc, sys.stdout, indent=2, default=list)
            sys.stdout.write("\n")
        else:
            with open(path, "w") as fh:
                json.dump(doc, fh, indent=2, default=list)
        return [path]

    if path == "-":
        for i, (name, rows) in enumerate(tables.items()):
            if len(tables) > 1:
                sys.stdout.write(("\n" if i else "") + f"# {name}\n")
            _write_csv(sys.stdout, rows)
        return [path]
    written = []
    stem, ext = os.path.splitext(path)
    for name, rows in tables.items():
        target = path if len(tables) == 1 else f"{stem}_{name}{ext or '.csv'}"
        with open(target, "w", newline="") as fh:
            _write_csv(fh, rows)
        written.append(target)
    return written
