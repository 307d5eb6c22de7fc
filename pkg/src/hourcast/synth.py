"""Seeded synthetic social-activity corpus for desk-scale runs."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timedelta, timezone

import numpy as np

from .events import ALL_TOPICS, ActivityEvent, EventLog, hour_of, parse_timestamp
from .exceptions import ConfigError

_REPLY_MIX = (("repost", 0.6), ("reply", 0.25), ("quote", 0.15))
_PLATFORM_PREFIX = {"twitter": "tw", "youtube": "yt", "reddit": "rd"}


@dataclass(frozen=True)
class SynthConfig:
    """Knobs of the generator.

    Per topic-hour the event count is Poisson with a daily sinusoidal rate.
    Topic ``k`` runs at ``base_rate * (1 + topic_spread * k)`` with its own
    phase. Children come from a Zipf-weighted pool that grows by
    ``new_user_fraction`` of events. Parents are picked in proportion to an
    exponentially decaying tally of past received (and posted) weight, so
    influential accounts rise and fade over ``influence_halflife`` hours.
    """

    topics: int = 2
    days: int = 60
    base_rate: float = 20.0
    amplitude: float = 0.6
    zipf_exponent: float = 1.1
    new_user_fraction: float = 0.15
    root_prob: float = 0.25
    influence_halflife: float = 48.0
    initial_users: int = 200
    warmup_hours: int = 24
    topic_spread: float = 0.5
    platforms: tuple = ("twitter",)
    start: str = "2020-04-02T00:00:00Z"
    seed: int = 0

    def __post_init__(self):
        if self.topics < 1 or self.days < 1:
            raise ConfigError("topics and days must be >= 1")
        if self.base_rate <= 0:
            raise ConfigError("base_rate must be > 0")
        if not 0 <= self.amplitude <= 1:
            raise ConfigError("amplitude must lie in [0, 1]")
        if not 0 <= self.new_user_fraction <= 1:
            raise ConfigError("new_user_fraction must lie in [0, 1]")
        if not 0 <= self.root_prob <= 1:
            raise ConfigError("root_prob must lie in [0, 1]")
        if self.zipf_exponent < 0 or self.influence_halflife <= 0:
            raise ConfigError("zipf_exponent must be >= 0 and influence_halflife > 0")
        if self.initial_users < 1 or self.warmup_hours < 0:
            raise ConfigError("initial_users must be >= 1 and warmup_hours >= 0")
        object.__setattr__(self, "platforms", tuple(self.platforms))
        unknown = set(self.platforms) - set(_PLATFORM_PREFIX)
        if unknown or "twitter" not in self.platforms:
            raise ConfigError(f"platforms must include twitter and be known, got {self.platforms}")

    @property
    def topic_names(self) -> list[str]:
        return [f"topic{k:02d}" for k in range(self.topics)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["platforms"] = list(self.platforms)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        names = {f.name for f in fields(cls)}
        extra = set(d) - names
        if extra:
            raise ConfigError(f"unknown synth keys: {sorted(extra)}")
        return cls(**d)


class _Population:
    """Platform-wide user pool with Zipf popularity by join order."""

    def __init__(self, prefix: str, cfg: SynthConfig):
        self.prefix = prefix
        self.cfg = cfg
        self.ids: list[str] = []
        self.seen = np.zeros(0, dtype=bool)
        self.weight = np.zeros(0)
        self._grow(cfg.initial_users)

    def _grow(self, k: int) -> list[int]:
        start = len(self.ids)
        self.ids += [f"{self.prefix}{i:06d}" for i in range(start, start + k)]
        self.seen = np.r_[self.seen, np.zeros(k, dtype=bool)]
        self.weight = np.r_[self.weight, (np.arange(start, start + k) + 1.0) ** -self.cfg.zipf_exponent]
        return list(range(start, start + k))

    def draw_children(self, rng: np.random.Generator, k: int, warm: bool) -> np.ndarray:
        if warm:
            return rng.integers(self.cfg.initial_users, size=k)
        eligible = np.flatnonzero(self.seen)
        fresh = rng.random(k) < self.cfg.new_user_fraction
        out = np.empty(k, dtype=np.int64)
        n_old = int((~fresh).sum())
        if n_old:
            w = self.weight[eligible]
            out[~fresh] = eligible[rng.choice(len(eligible), size=n_old, p=w / w.sum())]
        if fresh.any():
            out[fresh] = self._grow(int(fresh.sum()))
        return out


def _rate(cfg: SynthConfig, topic_idx: int, hour_of_day: int, scale: float) -> float:
    phase = 2 * math.pi * topic_idx / max(cfg.topics, 1) / 4
    base = cfg.base_rate * (1 + cfg.topic_spread * topic_idx) * scale
    return base * (1 + cfg.amplitude * math.sin(2 * math.pi * hour_of_day / 24 + phase))


def synth_generate(cfg: SynthConfig) -> EventLog:
    """Generate the corpus described by ``cfg``; identical output for identical configs."""
    rng = np.random.default_rng(cfg.seed)
    t0 = parse_timestamp(cfg.start).replace(minute=0, second=0, microsecond=0)
    h0 = hour_of(t0)
    n_hours = cfg.days * 24
    decay = 0.5 ** (1.0 / cfg.influence_halflife)
    events: list[ActivityEvent] = []

    for platform in cfg.platforms:
        pop = _Population(_PLATFORM_PREFIX[platform] + "u", cfg)
        scale = 1.0 if platform == "twitter" else 0.5
        streams = cfg.topic_names if platform != "reddit" else [ALL_TOPICS]
        scores = {t: np.zeros(len(pop.ids)) for t in streams}
        for h in range(n_hours):
            warm = h < cfg.warmup_hours
            if h == cfg.warmup_hours:
                # initial users never seen during warmup leave the pool for good
                pop.weight[~pop.seen] = 0.0
            hour_start = t0 + timedelta(hours=h)
            for k, topic in enumerate(streams):
                n = int(rng.poisson(_rate(cfg, k, (h0 + h) % 24, scale)))
                if n == 0:
                    continue
                children = pop.draw_children(rng, n, warm)
                sc = scores[topic]
                if len(sc) < len(pop.ids):
                    for t in scores:
                        scores[t] = np.r_[scores[t], np.zeros(len(pop.ids) - len(scores[t]))]
                    sc = scores[topic]
                total = sc.sum()
                roots = rng.random(n) < cfg.root_prob
                if total > 0:
                    cdf = np.cumsum(sc)
                    parents = np.searchsorted(cdf, rng.random(n) * total, side="right")
                    parents = np.minimum(parents, len(sc) - 1)
                else:
                    parents = children.copy()
                roots |= parents == children
                kinds = rng.choice(len(_REPLY_MIX), size=n, p=[p for _, p in _REPLY_MIX])
                seconds = np.sort(rng.integers(3600, size=n))
                for i in range(n):
                    c = int(children[i])
                    p = c if roots[i] else int(parents[i])
                    action = "post" if roots[i] else _REPLY_MIX[kinds[i]][0]
                    events.append(ActivityEvent(hour_start + timedelta(seconds=int(seconds[i])),
                                                topic, pop.ids[c], pop.ids[p], platform, action))
                    pop.seen[c] = True
                # tallies update after the hour: parents are chosen by past weight only
                np.add.at(sc, children[roots], 1.0)
                np.add.at(sc, parents[~roots], 1.0)
            for t in scores:
                scores[t] *= decay
    return EventLog.from_events(events)


def synth_window(cfg: SynthConfig) -> range:
    h0 = hour_of(parse_timestamp(cfg.start).replace(minute=0, second=0, microsecond=0))
    return range(h0, h0 + cfg.days * 24)


__all__ = ["SynthConfig", "synth_generate", "synth_window"]
