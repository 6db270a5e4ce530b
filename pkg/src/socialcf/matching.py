"""Many-to-many UE/AP matching games with social acceptance rules.

Two games are provided:

* deferred acceptance (:func:`run_da`): UEs propose down their preference
  lists, APs hold revocable waiting lists, and links are fixed only when no
  UE can propose any more. An optional social swap phase follows.
* early acceptance (:func:`run_ea`): APs accept or reject at once, every UE
  first gets a single AP, then clusters grow through social
  favorable-association pairs checked by the utility oracle.

Every loop scans indices in ascending order so that runs are reproducible.
"""

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .social import social_improvement

SWAP_AUTO_LIMIT = 20


class MatchingError(RuntimeError):
    """A matching operation was called with its preconditions violated."""


@dataclass
class PreferenceList:
    ue_prefs: list
    ap_prefs: list
    metric: np.ndarray

    @property
    def shape(self):
        return self.metric.shape


def build_preferences(csi_channels):
    """Rank APs for each UE and UEs for each AP by channel norm, ties to lower index."""
    metric = np.linalg.norm(np.asarray(csi_channels), axis=-1)
    ue_prefs = [np.argsort(-metric[k], kind="stable").tolist() for k in range(metric.shape[0])]
    ap_prefs = [np.argsort(-metric[:, m], kind="stable").tolist() for m in range(metric.shape[1])]
    return PreferenceList(ue_prefs, ap_prefs, metric)


class Matching:
    """Symmetric UE/AP association with quota bookkeeping."""

    def __init__(self, n_ues, n_aps, k_max, m_max):
        self.n_ues = n_ues
        self.n_aps = n_aps
        self.k_max = k_max
        self.m_max = m_max
        self.ue_to_aps = [set() for _ in range(n_ues)]
        self.ap_to_ues = [set() for _ in range(n_aps)]
        self.associated = set()
        self.unassociated = set()
        self.rejected = set()

    @classmethod
    def from_matrix(cls, C, k_max, m_max):
        C = np.asarray(C)
        mt = cls(C.shape[0], C.shape[1], k_max, m_max)
        for k, m in zip(*np.nonzero(C)):
            mt.ue_to_aps[k].add(int(m))
            mt.ap_to_ues[m].add(int(k))
        mt.associated = {k for k in range(mt.n_ues) if mt.ue_to_aps[k]}
        mt.unassociated = set(range(mt.n_ues)) - mt.associated
        return mt

    def copy(self):
        new = Matching(self.n_ues, self.n_aps, self.k_max, self.m_max)
        new.ue_to_aps = [set(s) for s in self.ue_to_aps]
        new.ap_to_ues = [set(s) for s in self.ap_to_ues]
        new.associated = set(self.associated)
        new.unassociated = set(self.unassociated)
        new.rejected = set(self.rejected)
        return new

    def ue_quota(self, k):
        return self.m_max - len(self.ue_to_aps[k])

    def ap_quota(self, m):
        return self.k_max - len(self.ap_to_ues[m])

    def link(self, k, m):
        self.ue_to_aps[k].add(m)
        self.ap_to_ues[m].add(k)

    def unlink(self, k, m):
        self.ue_to_aps[k].discard(m)
        self.ap_to_ues[m].discard(k)

    def to_matrix(self):
        C = np.zeros((self.n_ues, self.n_aps), dtype=np.int8)
        for k, aps in enumerate(self.ue_to_aps):
            C[k, list(aps)] = 1
        return C

    @property
    def n_associations(self):
        return sum(len(s) for s in self.ue_to_aps)

    def check(self):
        """Raise :class:`MatchingError` unless quotas, symmetry and set partitions hold."""
        for k, aps in enumerate(self.ue_to_aps):
            if len(aps) > self.m_max:
                raise MatchingError(f"UE {k} has {len(aps)} APs > m_max={self.m_max}")
            for m in aps:
                if k not in self.ap_to_ues[m]:
                    raise MatchingError(f"asymmetric link: AP {m} in UE {k} but not back")
        for m, ues in enumerate(self.ap_to_ues):
            if len(ues) > self.k_max:
                raise MatchingError(f"AP {m} serves {len(ues)} UEs > k_max={self.k_max}")
            for k in ues:
                if m not in self.ue_to_aps[k]:
                    raise MatchingError(f"asymmetric link: UE {k} in AP {m} but not back")
        sets = (self.associated, self.unassociated, self.rejected)
        if any(a & b for i, a in enumerate(sets) for b in sets[i + 1 :]):
            raise MatchingError("associated/unassociated/rejected sets overlap")
        for k in self.unassociated | self.rejected:
            if self.ue_to_aps[k]:
                raise MatchingError(f"UE {k} is linked but not marked associated")

    def __repr__(self):
        return (
            f"Matching(K={self.n_ues}, M={self.n_aps}, associations={self.n_associations}, "
            f"A+={len(self.associated)}, A-={len(self.unassociated)})"
        )


@dataclass
class MatchingTrace:
    """Counters for iterations, messages and oracle use.

    With ``record=True`` the games append ``(matching snapshot, utility)`` to
    ``history`` after every state change (utility is None where not computed).
    """

    iterations: int = 0
    swap_iterations: int = 0
    evolution_iterations: int = 0
    messages: Counter = field(default_factory=Counter)
    accepted_swaps: int = 0
    accepted_evolutions: int = 0
    oracle_calls: int = 0
    flags: list = field(default_factory=list)
    record: bool = False
    history: list = field(default_factory=list)

    def snapshot(self, matching, utility=None):
        if self.record:
            self.history.append((matching.copy(), utility))

    def as_dict(self):
        out = {
            "iterations": self.iterations,
            "swap_iterations": self.swap_iterations,
            "evolution_iterations": self.evolution_iterations,
            "accepted_swaps": self.accepted_swaps,
            "accepted_evolutions": self.accepted_evolutions,
            "oracle_calls": self.oracle_calls,
        }
        for kind in ("request", "rejection", "broadcast", "evaluation"):
            out[f"msg_{kind}"] = self.messages[kind]
        return out


@dataclass
class AssociationState:
    """A matching together with the players' updated preference lists."""

    matching: Matching
    ue_prefs: list
    ap_prefs: list
    metric: np.ndarray

    @classmethod
    def start(cls, prefs, k_max, m_max):
        K, M = prefs.shape
        return cls(
            Matching(K, M, k_max, m_max),
            [list(p) for p in prefs.ue_prefs],
            [list(p) for p in prefs.ap_prefs],
            prefs.metric,
        )

    def in_top_quota(self, m, k):
        q = self.matching.ap_quota(m)
        return q > 0 and k in self.ap_prefs[m][:q]


def _remove(seq, item):
    try:
        seq.remove(item)
    except ValueError:
        pass


def associate(m, k, state, trace=None):
    """Link AP ``m`` and UE ``k``, update lists and quotas, broadcast saturation."""
    mt = state.matching
    if mt.ap_quota(m) <= 0 or mt.ue_quota(k) <= 0 or m in mt.ue_to_aps[k]:
        raise MatchingError(f"cannot associate AP {m} with UE {k}")
    mt.link(k, m)
    _remove(state.ap_prefs[m], k)
    _remove(state.ue_prefs[k], m)
    if mt.ap_quota(m) == 0:
        for other in range(mt.n_ues):
            if other not in mt.ap_to_ues[m]:
                _remove(state.ue_prefs[other], m)
        if trace is not None:
            trace.messages["broadcast"] += 1
    if mt.ue_quota(k) == 0:
        for other in range(mt.n_aps):
            if other not in mt.ue_to_aps[k]:
                _remove(state.ap_prefs[other], k)
        if trace is not None:
            trace.messages["broadcast"] += 1
    return state


# -- deferred acceptance ----------------------------------------------------


def da_game(prefs, k_max, m_max, trace=None):
    """UE-proposing deferred acceptance with AP waiting lists of size ``k_max``."""
    trace = trace if trace is not None else MatchingTrace()
    K, M = prefs.shape
    metric = prefs.metric
    remaining = [list(p) for p in prefs.ue_prefs]
    held_by = [set() for _ in range(K)]
    waiting = [[] for _ in range(M)]
    tentative = Matching(K, M, k_max, m_max)

    while True:
        applicants = [[] for _ in range(M)]
        for k in range(K):
            if len(held_by[k]) < m_max and remaining[k]:
                applicants[remaining[k].pop(0)].append(k)
                trace.messages["request"] += 1
        if not any(applicants):
            break
        trace.iterations += 1
        for m in range(M):
            if not applicants[m]:
                continue
            pool = sorted(waiting[m] + applicants[m], key=lambda k: (-metric[k, m], k))
            waiting[m] = pool[:k_max]
            for k in pool[k_max:]:
                held_by[k].discard(m)
                tentative.unlink(k, m)
                trace.messages["rejection"] += 1
            for k in waiting[m]:
                held_by[k].add(m)
                tentative.link(k, m)
        trace.snapshot(tentative)

    final = Matching(K, M, k_max, m_max)
    for m, ues in enumerate(waiting):
        for k in ues:
            final.link(k, m)
    final.associated = {k for k in range(K) if final.ue_to_aps[k]}
    final.unassociated = set(range(K)) - final.associated
    if trace.iterations > M:
        trace.flags.append(f"da_iterations={trace.iterations} exceeds M={M}")
    return final, trace


def _swap_candidates(mt):
    ues = sorted(mt.associated)
    for k in ues:
        for k2 in ues:
            if k2 == k:
                continue
            yield k, k2


def _swapped(C, k, m, k2, m2):
    cand = C.copy()
    cand[k, m] = 0
    cand[k, m2] = 1
    cand[k2, m2] = 0
    cand[k2, m] = 1
    return cand


def social_swap_matching(matching, oracle, trace=None):
    """Apply social swaps until no swap-blocking pair remains.

    A swap hands AP ``m`` of UE ``k`` to ``k2`` and AP ``m2`` of ``k2`` to
    ``k``; it is accepted when the oracle's utility vector weakly improves
    everywhere and strictly somewhere. Swaps touching an AP already linked to
    the other UE are skipped. Previously visited matrices are never revisited.
    """
    trace = trace if trace is not None else MatchingTrace()
    mt = matching.copy()
    C = mt.to_matrix()
    current = oracle(C)
    trace.oracle_calls += 1
    visited = {C.tobytes()}
    trace.snapshot(mt, current)

    improved = True
    while improved:
        improved = False
        trace.swap_iterations += 1
        for k, k2 in _swap_candidates(mt):
            done = False
            for m in sorted(mt.ue_to_aps[k]):
                for m2 in sorted(mt.ue_to_aps[k2]):
                    if m == m2 or m2 in mt.ue_to_aps[k] or m in mt.ue_to_aps[k2]:
                        continue
                    cand = _swapped(C, k, m, k2, m2)
                    key = cand.tobytes()
                    if key in visited:
                        continue
                    u = oracle(cand)
                    trace.oracle_calls += 1
                    trace.messages["evaluation"] += 1
                    if social_improvement(u, current):
                        mt.unlink(k, m)
                        mt.unlink(k2, m2)
                        mt.link(k, m2)
                        mt.link(k2, m)
                        C, current = cand, u
                        visited.add(key)
                        trace.accepted_swaps += 1
                        trace.snapshot(mt, current)
                        improved = done = True
                        break
                if done:
                    break
    if trace.swap_iterations - 1 > mt.m_max:
        trace.flags.append(f"swap_iterations={trace.swap_iterations} exceeds m_max={mt.m_max}")
    return mt, trace


def find_swap_blocking_pair(matching, oracle):
    """Exhaustively search for a social swap-blocking pair; None if there is none."""
    C = matching.to_matrix()
    current = oracle(C)
    for k, k2 in _swap_candidates(matching):
        for m in sorted(matching.ue_to_aps[k]):
            for m2 in sorted(matching.ue_to_aps[k2]):
                if m == m2 or m2 in matching.ue_to_aps[k] or m in matching.ue_to_aps[k2]:
                    continue
                if social_improvement(oracle(_swapped(C, k, m, k2, m2)), current):
                    return (k, m, k2, m2)
    return None


def classical_blocking_pairs(matching, metric):
    """Pairs (k, m) that both would rather be linked, judged by channel norm.

    UE ``k`` wants ``m`` if it has spare quota or holds an AP it ranks below
    ``m``; AP ``m`` wants ``k`` likewise. Used to audit the DA outcome.
    """

    def rank_key_ue(k, m):
        return (-metric[k, m], m)

    def rank_key_ap(m, k):
        return (-metric[k, m], k)

    pairs = []
    for k in range(matching.n_ues):
        for m in range(matching.n_aps):
            if m in matching.ue_to_aps[k]:
                continue
            ue_wants = matching.ue_quota(k) > 0 or any(
                rank_key_ue(k, m) < rank_key_ue(k, m2) for m2 in matching.ue_to_aps[k]
            )
            ap_wants = matching.ap_quota(m) > 0 or any(
                rank_key_ap(m, k) < rank_key_ap(m, k2) for k2 in matching.ap_to_ues[m]
            )
            if ue_wants and ap_wants:
                pairs.append((k, m))
    return pairs


def run_da(prefs, oracle, k_max, m_max, enable_swap=None, trace=None):
    """DA game followed by social swap-matching.

    ``enable_swap=None`` turns swapping on only below ``SWAP_AUTO_LIMIT`` UEs.
    """
    trace = trace if trace is not None else MatchingTrace()
    matching, trace = da_game(prefs, k_max, m_max, trace)
    if enable_swap is None:
        enable_swap = prefs.shape[0] < SWAP_AUTO_LIMIT
    if enable_swap and matching.associated:
        matching, trace = social_swap_matching(matching, oracle, trace)
    return matching, trace


# -- early acceptance -------------------------------------------------------


def ea_first_matching(prefs, k_max, m_max, trace=None):
    """Give every UE at most one AP with immediate accept/reject decisions.

    A UE applies to the first AP of its updated list it has not yet tried and
    is accepted iff it is in that AP's top-quota UEs. UEs left over are forced
    onto the first AP of their list that still has quota.
    """
    trace = trace if trace is not None else MatchingTrace()
    state = AssociationState.start(prefs, k_max, m_max)
    mt = state.matching
    K = mt.n_ues
    rejected = list(range(K))
    tried = [set() for _ in range(K)]

    def untried(k):
        return [m for m in state.ue_prefs[k] if m not in tried[k]]

    while any(untried(k) for k in rejected):
        trace.iterations += 1
        for k in list(rejected):
            if not state.ue_prefs[k]:
                rejected.remove(k)
                mt.unassociated.add(k)
                continue
            options = untried(k)
            if not options:
                continue
            m = options[0]
            trace.messages["request"] += 1
            if state.in_top_quota(m, k):
                associate(m, k, state, trace)
                rejected.remove(k)
                mt.associated.add(k)
                trace.snapshot(mt)
            else:
                tried[k].add(m)
                trace.messages["rejection"] += 1

    for k in list(rejected):
        target = next((m for m in state.ue_prefs[k] if mt.ap_quota(m) > 0), None)
        rejected.remove(k)
        if target is None:
            mt.unassociated.add(k)
            continue
        trace.messages["request"] += 1
        associate(target, k, state, trace)
        mt.associated.add(k)
        trace.snapshot(mt)
    mt.rejected = set(rejected)
    return state, trace


def cluster_evolution(state, oracle, trace=None):
    """Grow clusters through social favorable-association pairs.

    Each pass lets every associated UE with spare quota walk its updated list
    from the top; the first AP that ranks it within its remaining quota and
    whose association socially improves the utility vector accepts it. Passes
    repeat until one accepts nothing.
    """
    trace = trace if trace is not None else MatchingTrace()
    mt = state.matching
    C = mt.to_matrix()
    current = oracle(C)
    trace.oracle_calls += 1
    trace.snapshot(mt, current)

    while True:
        trace.evolution_iterations += 1
        accepted = False
        for k in sorted(mt.associated):
            if not state.ue_prefs[k] or mt.ue_quota(k) == 0:
                continue
            for m in list(state.ue_prefs[k]):
                trace.messages["request"] += 1
                if not state.in_top_quota(m, k):
                    trace.messages["rejection"] += 1
                    continue
                cand = C.copy()
                cand[k, m] = 1
                u = oracle(cand)
                trace.oracle_calls += 1
                trace.messages["evaluation"] += 1
                if social_improvement(u, current):
                    associate(m, k, state, trace)
                    C, current = cand, u
                    trace.accepted_evolutions += 1
                    trace.snapshot(mt, current)
                    accepted = True
                    break
                trace.messages["rejection"] += 1
        if not accepted:
            break
    if trace.evolution_iterations - 1 > mt.k_max:
        trace.flags.append(
            f"evolution_iterations={trace.evolution_iterations} exceeds k_max={mt.k_max}"
        )
    return state, trace


def find_favorable_pair(matching, metric, oracle):
    """Exhaustively search for a social favorable-association pair (m, k).

    Preference lists are rebuilt from ``metric`` and the matching alone, so
    the check does not depend on the game's internal bookkeeping.
    """
    C = matching.to_matrix()
    current = oracle(C)
    K, M = C.shape
    for k in sorted(matching.associated):
        if matching.ue_quota(k) <= 0:
            continue
        for m in range(M):
            q = matching.ap_quota(m)
            if q <= 0 or m in matching.ue_to_aps[k]:
                continue
            eligible = [
                j
                for j in np.argsort(-metric[:, m], kind="stable")
                if j not in matching.ap_to_ues[m] and matching.ue_quota(j) > 0
            ]
            if k not in eligible[:q]:
                continue
            cand = C.copy()
            cand[k, m] = 1
            if social_improvement(oracle(cand), current):
                return (m, k)
    return None


def run_ea(prefs, oracle, k_max, m_max, evolve=True, trace=None):
    trace = trace if trace is not None else MatchingTrace()
    state, trace = ea_first_matching(prefs, k_max, m_max, trace)
    if evolve and state.matching.associated:
        state, trace = cluster_evolution(state, oracle, trace)
    return state.matching, trace


def export_matching(matching, trace=None):
    """Text export: one ``k: m1 m2 ...`` line per UE, then a summary block."""
    lines = [
        f"{k}: " + " ".join(str(m) for m in sorted(aps)) for k, aps in enumerate(matching.ue_to_aps)
    ]
    lines.append("")
    lines.append(f"associated = {len(matching.associated)}")
    lines.append(f"unassociated = {len(matching.unassociated)}")
    lines.append(f"associations = {matching.n_associations}")
    if trace is not None:
        counters = trace.as_dict() if hasattr(trace, "as_dict") else trace
        for key, value in counters.items():
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
