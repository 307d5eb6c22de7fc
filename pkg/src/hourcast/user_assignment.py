"""Turn predicted hourly counts into predicted user-to-user graphs.

Each simulated hour samples active old users from a trailing window of
interaction history, synthesizes fresh new users from attribute templates
("archetypes") copied off recent old users, hands out the predicted number of
actions and draws a parent for every action. The new graph then joins the
history window before the next hour is simulated.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .events import TemporalGraph, UserLedger, hour_to_iso, write_graphs_jsonl

logger = logging.getLogger(__name__)

# stands in for the template user's own id inside an archetype parent list
SELF = "<self>"


class HistoryRecord(NamedTuple):
    hour: int
    child: str
    parent: str
    weight: int
    child_is_new: bool
    parent_is_new: bool


@dataclass
class HistoryTable:
    records: list[HistoryRecord]
    span: range

    def __len__(self) -> int:
        return len(self.records)

    @property
    def children(self) -> list[str]:
        return sorted({r.child for r in self.records})


def build_history(graphs: Sequence[TemporalGraph], first_seen: Mapping[str, int],
                  lookback: int = 24, end: int | None = None) -> HistoryTable:
    """One record per (hour, child, parent) over the ``lookback`` hours ending at ``end``.

    ``end`` defaults to the latest graph. A user is flagged new in a record
    when ``first_seen`` places their first appearance in that very hour.
    """
    if lookback < 1:
        raise ValueError("lookback must be >= 1")
    if end is None:
        end = max((g.bin_start for g in graphs), default=0)
    span = range(end - lookback + 1, end + 1)
    records = []
    for g in sorted((g for g in graphs if g.bin_start in span), key=lambda g: g.bin_start):
        for (c, p), w in sorted(g.edges.items()):
            if w < 1:
                continue
            records.append(HistoryRecord(g.bin_start, c, p, int(w),
                                         first_seen.get(c) == g.bin_start,
                                         first_seen.get(p) == g.bin_start))
    return HistoryTable(records, span)


@dataclass
class UserAttributes:
    activity_prob: float
    influence_prob: float
    parent_list: list[str]
    parent_probs: np.ndarray

    def copy(self) -> "UserAttributes":
        return UserAttributes(self.activity_prob, self.influence_prob,
                              list(self.parent_list), self.parent_probs.copy())


def derive_attributes(history: HistoryTable) -> dict[str, UserAttributes]:
    """Attributes of every user in the table, keyed by id in sorted order.

    Users that only ever appear as parents get ``activity_prob`` 0 and an
    empty parent list.
    """
    if not len(history):
        raise ValueError("cannot derive attributes from an empty history")
    acted: Counter = Counter()
    received: Counter = Counter()
    pairs: dict[str, Counter] = {}
    for r in history.records:
        acted[r.child] += r.weight
        pairs.setdefault(r.child, Counter())[r.parent] += r.weight
        if r.child != r.parent:
            received[r.parent] += r.weight
    total_acts = sum(acted.values())
    total_recv = sum(received.values())
    users = sorted(set(acted) | {r.parent for r in history.records})
    out = {}
    for u in users:
        parents = sorted(pairs.get(u, {}))
        w = np.array([pairs[u][p] for p in parents], dtype=float) if parents else np.zeros(0)
        out[u] = UserAttributes(
            activity_prob=acted[u] / total_acts,
            influence_prob=received[u] / total_recv if total_recv else 0.0,
            parent_list=parents,
            parent_probs=w / w.sum() if parents else w,
        )
    return out


@dataclass
class ArchetypeTable:
    rows: list[UserAttributes]
    sources: list[str]
    capacity: int

    def __len__(self) -> int:
        return len(self.rows)


def _archetype_sources(history: HistoryTable) -> list[str]:
    old = sorted({r.child for r in history.records if not r.child_is_new})
    return old or history.children


def build_archetypes(history: HistoryTable, capacity: int, rng: np.random.Generator,
                     attributes: Mapping[str, UserAttributes] | None = None) -> ArchetypeTable:
    """Draw ``capacity`` templates, with replacement, from users seen acting as
    old users, weighting each by its activity probability. When the window
    holds only brand-new users, all acting users are eligible."""
    if not len(history):
        raise ValueError("cannot build archetypes from an empty history")
    if capacity < 0:
        raise ValueError("capacity must be >= 0")
    attrs = derive_attributes(history) if attributes is None else attributes
    sources = _archetype_sources(history)
    if capacity == 0:
        return ArchetypeTable([], [], 0)
    w = np.array([attrs[u].activity_prob for u in sources])
    picks = rng.choice(len(sources), size=capacity, replace=True, p=w / w.sum())
    rows, srcs = [], []
    for i in picks:
        u = sources[i]
        row = attrs[u].copy()
        row.parent_list = [SELF if p == u else p for p in row.parent_list]
        rows.append(row)
        srcs.append(u)
    return ArchetypeTable(rows, srcs, capacity)


@dataclass
class HourOutcome:
    graph: TemporalGraph
    old_users: list[str]
    new_users: list[str]
    trimmed: int = 0
    unassigned: int = 0


def assign_hour(history: HistoryTable, counts: tuple[int, int, int], arch: ArchetypeTable,
                rng: np.random.Generator, hour: int = 0, id_prefix: str = "sim:0",
                attributes: Mapping[str, UserAttributes] | None = None, id_tag: str = "") -> HourOutcome:
    """Sample one hour's graph for ``counts = (activities, old, new)``.

    New users are named ``f"{id_prefix}:{hour}:{id_tag}{i}"``.
    """
    n_a, n_o, n_n = (int(c) for c in counts)
    if min(n_a, n_o, n_n) < 0:
        raise ValueError(f"counts must be non-negative, got {counts}")
    if n_a == n_o == n_n == 0:
        return HourOutcome(TemporalGraph(hour, {}), [], [])
    if len(history):
        attrs = derive_attributes(history) if attributes is None else attributes
    elif n_o > 0:
        raise ValueError("no old-user pool: history is empty")
    else:
        attrs = {}

    pool = history.children if len(history) else []
    k_old = min(n_o, len(pool))
    if k_old:
        w = np.array([attrs[u].activity_prob for u in pool])
        idx = rng.choice(len(pool), size=k_old, replace=False, p=w / w.sum())
        old = [pool[i] for i in idx]
    else:
        old = []

    new = [f"{id_prefix}:{hour}:{id_tag}{i}" for i in range(n_n)]
    templates: dict[str, UserAttributes] = {}
    if n_n:
        if len(arch):
            for u, i in zip(new, rng.integers(len(arch), size=n_n)):
                templates[u] = arch.rows[i]
        else:
            parents = sorted({r.parent for r in history.records})
            fallback = UserAttributes(
                activity_prob=1.0 / max(len(pool), 1),
                influence_prob=0.0,
                parent_list=parents or [SELF],
                parent_probs=np.full(max(len(parents), 1), 1.0 / max(len(parents), 1)),
            )
            templates = {u: fallback for u in new}

    users = old + new
    probs = np.array([attrs[u].activity_prob for u in old] + [templates[u].activity_prob for u in new])
    trimmed = 0
    if not users:
        logger.warning("hour %d: %d actions but no active users", hour, n_a)
        return HourOutcome(TemporalGraph(hour, {}), [], [], unassigned=n_a)
    if n_a >= len(users):
        actions = np.ones(len(users), dtype=np.int64)
        rest = n_a - len(users)
        if rest:
            actions += rng.multinomial(rest, probs / probs.sum())
    else:
        # more active users than actions: keep the most active ones
        trimmed = len(users) - n_a
        keep = np.argsort(-probs, kind="stable")[:n_a]
        actions = np.zeros(len(users), dtype=np.int64)
        actions[keep] = 1
        logger.info("hour %d: %d actions for %d active users; trimmed %d", hour, n_a, len(users), trimmed)

    edges: Counter = Counter()
    nodes = set()
    for u, k in zip(users, actions):
        if k == 0:
            continue
        a = templates[u] if u in templates else attrs[u]
        plist = [u if p == SELF else p for p in a.parent_list]
        draws = rng.choice(len(plist), size=int(k), p=a.parent_probs)
        for j, c in zip(*np.unique(draws, return_counts=True)):
            edges[(u, plist[j])] += int(c)
        nodes.add(u)
    graph = TemporalGraph(hour, dict(sorted(edges.items())), frozenset(nodes))
    active_new = [u for u, k in zip(users, actions) if k and u in templates]
    active_old = [u for u, k in zip(users, actions) if k and u not in templates]
    return HourOutcome(graph, active_old, active_new, trimmed)


@dataclass
class SimulatedGraphSequence:
    graphs: list[TemporalGraph]
    new_users: list[list[str]]
    old_users: list[list[str]]
    trial: int
    seed: int
    counts: list[tuple[int, int, int]] = field(default_factory=list)
    discrepancies: list[dict] = field(default_factory=list)

    def manifest(self) -> dict:
        return {
            "trial": self.trial,
            "seed": self.seed,
            "hours": [hour_to_iso(g.bin_start) for g in self.graphs],
            "counts_consumed": [list(c) for c in self.counts],
            "discrepancies": self.discrepancies,
        }

    def save(self, directory, stem: str) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        write_graphs_jsonl(self.graphs, directory / f"{stem}.jsonl")
        (directory / f"{stem}.manifest.json").write_text(json.dumps(self.manifest(), indent=2))


def trial_seed(seed: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, trial])


def reconcile_counts(Y) -> tuple[np.ndarray, int]:
    """Raise each hour's activities to at least old + new users.

    Every active user acts at least once, so observed counts always satisfy
    this; independently predicted rows need not. Hours with activity but no
    users get one old user first. Returns the adjusted matrix
    (rows: activities, new users, old users) and the number of hours changed.
    """
    Y = np.array(Y, dtype=np.int64)
    # activity with nobody to perform it gets one old user
    idle = (Y[0] > 0) & (Y[1] + Y[2] == 0)
    Y[2] = np.where(idle, 1, Y[2])
    floor = Y[1] + Y[2]
    low = Y[0] < floor
    Y[0] = np.where(low, floor, Y[0])
    return Y, int((low | idle).sum())


def simulate(Y, recent: Sequence[TemporalGraph], first_seen: Mapping[str, int], seed: int,
             trial: int = 0, lookback: int = 24, capacity: int = 1000,
             id_tag: str = "") -> SimulatedGraphSequence:
    """Simulate ``Y.shape[1]`` hours following the last graph in ``recent``.

    ``Y`` rows are (activities, new users, old users). Each step rebuilds the
    history window, which slides over previously simulated hours too.
    ``id_tag`` keeps new-user ids apart when several streams share a trial.
    """
    Y = np.asarray(Y)
    if Y.ndim != 2 or Y.shape[0] != 3:
        raise ValueError(f"expected a 3 x horizon count matrix, got shape {Y.shape}")
    if np.any(Y < 0):
        raise ValueError("counts must be non-negative")
    recent = sorted(recent, key=lambda g: g.bin_start)
    if not recent:
        raise ValueError("simulation needs recent graphs to anchor the first hour")
    rng = np.random.default_rng(trial_seed(seed, trial))
    seen = dict(first_seen)
    window = list(recent[-lookback:])
    start = recent[-1].bin_start + 1
    prefix = f"sim:{trial}"
    out = SimulatedGraphSequence([], [], [], trial, seed)
    for t in range(Y.shape[1]):
        hour = start + t
        n_a, n_n, n_o = (int(v) for v in Y[:, t])
        history = build_history(window, seen, lookback, end=hour - 1)
        if len(history):
            attrs = derive_attributes(history)
            arch = build_archetypes(history, capacity, rng, attrs)
        else:
            attrs, arch = {}, ArchetypeTable([], [], capacity)
        res = assign_hour(history, (n_a, n_o, n_n), arch, rng, hour, prefix, attrs, id_tag)
        for u in res.new_users:
            seen[u] = hour
        out.graphs.append(res.graph)
        out.new_users.append(res.new_users)
        out.old_users.append(res.old_users)
        out.counts.append((n_a, n_o, n_n))
        pool = len(history.children)
        if res.trimmed or res.unassigned or n_o > pool:
            out.discrepancies.append({"hour": hour_to_iso(hour), "trimmed": res.trimmed,
                                      "unassigned": res.unassigned,
                                      "old_requested": n_o, "old_pool": pool})
        window = (window + [res.graph])[-lookback:]
    return out


class UserAssigner(BaseEstimator):
    """Estimator wrapper around :func:`simulate`.

    ``fit`` memorizes the trailing graphs and the first-seen ledger;
    ``predict`` turns a (3, horizon) count matrix into one simulated trial.

    Parameters
    ----------
    lookback : int, default=24
        Hours of interaction history used for sampling.
    capacity : int, default=1000
        Archetype rows rebuilt each simulated hour.
    platform : str, default="twitter"
    random_state : int, default=0
    """

    def __init__(self, lookback=24, capacity=1000, platform="twitter", random_state=0):
        self.lookback = lookback
        self.capacity = capacity
        self.platform = platform
        self.random_state = random_state

    def fit(self, graphs: Sequence[TemporalGraph], ledger: UserLedger | Mapping[str, int]):
        if self.lookback < 1:
            raise ValueError("lookback must be >= 1")
        if self.capacity < 0:
            raise ValueError("capacity must be >= 0")
        graphs = sorted(graphs, key=lambda g: g.bin_start)
        if not graphs:
            raise ValueError("fit needs at least one graph")
        hours = [g.bin_start for g in graphs[-self.lookback:]]
        if hours != list(range(hours[0], hours[0] + len(hours))):
            raise ValueError("recent graphs must cover consecutive hours")
        self.recent_ = graphs[-self.lookback:]
        self.first_seen_ = dict(ledger.platform(self.platform) if isinstance(ledger, UserLedger) else ledger)
        return self

    def predict(self, Y, trial: int = 0) -> SimulatedGraphSequence:
        if not hasattr(self, "recent_"):
            raise ValueError("UserAssigner is not fitted")
        return simulate(Y, self.recent_, self.first_seen_, self.random_state, trial,
                        self.lookback, self.capacity)
