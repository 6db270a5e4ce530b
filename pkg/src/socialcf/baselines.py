"""Reference clustering schemes: best channel, canonical, matched decision, WOA."""

from dataclasses import dataclass

import numpy as np

from .radio import is_feasible


def best_channel(metric):
    """Each UE takes only its strongest AP (ties to the lower index)."""
    metric = np.asarray(metric)
    C = np.zeros(metric.shape, dtype=np.int8)
    C[np.arange(metric.shape[0]), np.argmax(metric, axis=1)] = 1
    return C


def canonical(n_ues, n_aps):
    """Every UE is served by every AP."""
    return np.ones((n_ues, n_aps), dtype=np.int8)


def matched_decision(metric, k_max, m_max):
    """Best-AP association followed by expansion onto unsaturated APs.

    Phase 1 links each UE to its strongest AP with spare capacity. Phase 2
    lets UEs, in index order, append unsaturated APs from strongest to
    weakest until they hold ``m_max`` APs.
    """
    metric = np.asarray(metric)
    K, M = metric.shape
    C = np.zeros((K, M), dtype=np.int8)
    load = np.zeros(M, dtype=int)
    order = [np.argsort(-metric[k], kind="stable") for k in range(K)]
    for k in range(K):
        for m in order[k]:
            if load[m] < k_max:
                C[k, m] = 1
                load[m] += 1
                break
    for k in range(K):
        for m in order[k]:
            if C[k].sum() >= m_max:
                break
            if C[k, m] == 0 and load[m] < k_max:
                C[k, m] = 1
                load[m] += 1
    return C


@dataclass(frozen=True)
class WoaConfig:
    population: int = 50
    epochs: int = 100
    ee_target: float = 35e6  # bits/J
    spiral: float = 1.0
    feedback: bool = True
    stagnation: int = 10

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.ee_target <= 0:
            raise ValueError("ee_target must be positive")


def woa_fitness(evaluation, ee_target):
    """Total QoS satisfaction plus total EE normalized by a target, each capped at 1."""
    return float(np.sum(evaluation.rho) + np.sum(np.minimum(1.0, evaluation.ee / ee_target)))


def repair(C, position, metric, k_max, m_max):
    """Make a binary matrix feasible, keeping the highest-position entries.

    UEs left empty receive their strongest AP that still has capacity.
    """
    C = C.copy()
    K, M = C.shape
    for k in range(K):
        links = np.flatnonzero(C[k])
        if len(links) > m_max:
            drop = links[np.argsort(position[k, links], kind="stable")[: len(links) - m_max]]
            C[k, drop] = 0
    for m in range(M):
        links = np.flatnonzero(C[:, m])
        if len(links) > k_max:
            drop = links[np.argsort(position[links, m], kind="stable")[: len(links) - k_max]]
            C[drop, m] = 0
    load = C.sum(axis=0)
    for k in range(K):
        if C[k].any():
            continue
        for m in np.argsort(-metric[k], kind="stable"):
            if load[m] < k_max:
                C[k, m] = 1
                load[m] += 1
                break
    return C


def _initial_whale(metric, k_max, m_max, rng):
    K, M = metric.shape
    C = np.zeros((K, M), dtype=np.int8)
    load = np.zeros(M, dtype=int)
    for k in range(K):
        available = [m for m in np.argsort(-metric[k], kind="stable") if load[m] < k_max]
        size = min(int(rng.integers(1, m_max + 1)), len(available))
        for m in available[:size]:
            C[k, m] = 1
            load[m] += 1
    return C


class _FitnessCache:
    def __init__(self, oracle, ee_target):
        self.oracle = oracle
        self.ee_target = ee_target
        self.store = {}

    def __call__(self, C):
        key = C.tobytes()
        if key not in self.store:
            self.store[key] = woa_fitness(self.oracle.evaluate(C), self.ee_target)
        return self.store[key]


def woa(oracle, config, metric, k_max, m_max, rng):
    """Binary whale optimization over clustering matrices.

    Positions live in [0, 1]^(K x M); a position is turned into a clustering
    by thresholding at 0.5 and repairing to feasibility. The best matrix found
    so far is kept (elitism). With ``config.feedback``, the worst tenth of the
    population is re-seeded after ``config.stagnation`` epochs without
    improvement.

    Returns ``(best_matrix, history)`` where ``history[e]`` is the best
    fitness after epoch ``e`` (index 0 is the initial population).
    """
    metric = np.asarray(metric)
    K, M = metric.shape
    fitness = _FitnessCache(oracle, config.ee_target)
    n = config.population

    binaries = [_initial_whale(metric, k_max, m_max, rng) for _ in range(n)]
    positions = np.array([b.astype(float) for b in binaries])
    scores = np.array([fitness(b) for b in binaries])
    best_i = int(np.argmax(scores))
    best_pos, best_C, best_fit = positions[best_i].copy(), binaries[best_i], scores[best_i]
    history = [best_fit]
    stale = 0

    for epoch in range(config.epochs):
        a = 2.0 - 2.0 * epoch / config.epochs
        for i in range(n):
            r1, r2, p = rng.random(3)
            A = 2.0 * a * r1 - a
            Cc = 2.0 * r2
            x = positions[i]
            if p < 0.5:
                if abs(A) < 1:
                    target = best_pos
                else:
                    target = positions[rng.integers(n)]
                x_new = target - A * np.abs(Cc * target - x)
            else:
                ell = rng.uniform(-1.0, 1.0)
                x_new = (
                    np.abs(best_pos - x) * np.exp(config.spiral * ell) * np.cos(2 * np.pi * ell)
                    + best_pos
                )
            positions[i] = np.clip(x_new, 0.0, 1.0)
            binaries[i] = repair(
                (positions[i] > 0.5).astype(np.int8), positions[i], metric, k_max, m_max
            )
            scores[i] = fitness(binaries[i])

        i = int(np.argmax(scores))
        if scores[i] > best_fit:
            best_pos, best_C, best_fit = positions[i].copy(), binaries[i], scores[i]
            stale = 0
        else:
            stale += 1
        if config.feedback and stale >= config.stagnation:
            n_reset = max(1, n // 10)
            for j in np.argsort(scores, kind="stable")[:n_reset]:
                positions[j] = rng.random((K, M))
                binaries[j] = repair(
                    (positions[j] > 0.5).astype(np.int8), positions[j], metric, k_max, m_max
                )
                scores[j] = fitness(binaries[j])
            stale = 0
            i = int(np.argmax(scores))
            if scores[i] > best_fit:
                best_pos, best_C, best_fit = positions[i].copy(), binaries[i], scores[i]
        history.append(best_fit)

    assert is_feasible(best_C, k_max, m_max)
    return best_C.copy(), np.array(history)
