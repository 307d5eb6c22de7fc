"""Fixed-width window features over banked hourly series."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .events import ALL_TOPICS, EventLog, UserLedger, VolumeTriple, bin_hourly

OUTPUT_TYPES = ("activities", "new_users", "old_users")

PLATFORM_CODES = {"T": "twitter", "Y": "youtube", "R": "reddit"}

# series index -> (platform code, scope, quantity); order is the canonical layout
SERIES = {
    1: ("T", "topic", "new_users"),
    2: ("T", "topic", "old_users"),
    3: ("T", "topic", "activities"),
    4: ("Y", "topic", "new_users"),
    5: ("Y", "topic", "old_users"),
    6: ("Y", "topic", "activities"),
    7: ("T", "all", "activities"),
    8: ("T", "all", "new_users"),
    9: ("T", "all", "old_users"),
    10: ("Y", "all", "activities"),
    11: ("Y", "all", "new_users"),
    12: ("Y", "all", "old_users"),
    13: ("R", "all", "activities"),
}

TOPIC_INDICATOR = "topic_indicator"


def series_label(sid: int) -> str:
    code, scope, quantity = SERIES[sid]
    where = "all topics" if scope == "all" else "topic"
    if code == "R":
        return "reddit activities"
    return f"{PLATFORM_CODES[code]} {quantity} ({where})"


@dataclass(frozen=True)
class FeatureConfig:
    platforms: tuple[str, ...] = ("T", "R")
    lookback: int = 72
    horizon: int = 24
    topics: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "platforms", tuple(sorted(set(self.platforms), key="TRY".index)))
        object.__setattr__(self, "topics", tuple(self.topics))
        if not self.platforms:
            raise ValueError("at least one platform is required")
        unknown = set(self.platforms) - set(PLATFORM_CODES)
        if unknown:
            raise ValueError(f"unknown platform codes {sorted(unknown)}")
        if self.lookback < 1 or self.horizon < 1:
            raise ValueError("lookback and horizon must be >= 1")
        if not self.topics:
            raise ValueError("topics must be non-empty")
        if len(set(self.topics)) != len(self.topics):
            raise ValueError("topics must be unique")

    @property
    def tag(self) -> str:
        return f"{''.join(self.platforms)}-{self.lookback}"

    @property
    def width(self) -> int:
        return len(series_roster(self)) * self.lookback + len(self.topics)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(tuple(d["platforms"]), int(d["lookback"]), int(d["horizon"]), tuple(d["topics"]))


def series_roster(config: FeatureConfig) -> list[int]:
    """Series indices fed to the model, in canonical order."""
    if not config.platforms:
        raise ValueError("empty platform set")
    return [sid for sid, (code, _, _) in SERIES.items() if code in config.platforms]


def feature_groups(config: FeatureConfig) -> list[str]:
    """Category label of every feature column (one-hot columns share one label)."""
    groups = []
    for sid in series_roster(config):
        groups.extend([series_label(sid)] * config.lookback)
    groups.extend([TOPIC_INDICATOR] * len(config.topics))
    return groups


@dataclass
class SeriesBank:
    """All hourly series needed to featurize any topic over ``window``."""

    window: range
    topic_triples: dict[tuple[str, str], VolumeTriple]
    aggregates: dict[str, VolumeTriple]
    reddit: np.ndarray

    @classmethod
    def from_log(cls, log: EventLog, topics, window: range | None = None,
                 ledger: UserLedger | None = None) -> "SeriesBank":
        window = log.window if window is None else window
        ledger = UserLedger.from_log(log) if ledger is None else ledger
        triples = {}
        aggregates = {}
        for platform in ("twitter", "youtube"):
            for topic in topics:
                triples[(platform, topic)] = bin_hourly(log, topic, platform, window, ledger)
            aggregates[platform] = bin_hourly(log, None, platform, window, ledger)
        reddit = bin_hourly(log, ALL_TOPICS, "reddit", window, ledger).activities
        return cls(window, triples, aggregates, reddit)

    def series(self, sid: int, topic: str) -> np.ndarray:
        code, scope, quantity = SERIES[sid]
        if code == "R":
            return self.reddit
        platform = PLATFORM_CODES[code]
        if scope == "all":
            triple = self.aggregates[platform]
        else:
            triple = self.topic_triples.get((platform, topic))
            if triple is None:
                return np.zeros(len(self.window), dtype=np.int64)
        return getattr(triple, quantity)

    def targets(self, topic: str, quantity: str) -> np.ndarray:
        return getattr(self.topic_triples[("twitter", topic)], quantity)


def earliest_anchor(bank: SeriesBank, config: FeatureConfig) -> int:
    return bank.window.start + config.lookback - 1


def build_feature_vector(bank: SeriesBank, topic: str, anchor: int, config: FeatureConfig) -> np.ndarray:
    """Trailing ``lookback`` values of every roster series, then the topic one-hot."""
    first = earliest_anchor(bank, config)
    if anchor < first:
        raise ValueError(f"anchor {anchor} too early for lookback {config.lookback}; "
                         f"earliest valid anchor is {first}")
    if anchor >= bank.window.stop:
        raise ValueError(f"anchor {anchor} beyond banked window ending {bank.window.stop - 1}")
    if topic not in config.topics:
        raise ValueError(f"topic {topic!r} not in feature config")
    end = anchor - bank.window.start + 1
    parts = [bank.series(sid, topic)[end - config.lookback:end] for sid in series_roster(config)]
    onehot = np.zeros(len(config.topics))
    onehot[config.topics.index(topic)] = 1.0
    parts.append(onehot)
    return np.concatenate(parts).astype(float)


def target_block(bank: SeriesBank, topic: str, anchor: int, horizon: int) -> np.ndarray:
    """Raw 3 x horizon ground truth for hours anchor+1 .. anchor+horizon."""
    lo = anchor + 1 - bank.window.start
    return np.stack([bank.targets(topic, q)[lo:lo + horizon] for q in OUTPUT_TYPES]).astype(float)


@dataclass
class SampleMatrix:
    X: np.ndarray
    Y: np.ndarray
    meta: list[tuple[str, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.X)

    def save(self, path, config: FeatureConfig) -> None:
        path = Path(path)
        np.savez(path.with_suffix(".npz"), X=self.X, Y=self.Y)
        sidecar = {
            "feature_config": config.to_dict(),
            "roster": series_roster(config),
            "topic_order": list(config.topics),
            "meta": [[t, int(a)] for t, a in self.meta],
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))

    @classmethod
    def load(cls, path) -> tuple["SampleMatrix", FeatureConfig]:
        path = Path(path)
        arrays = np.load(path.with_suffix(".npz"))
        sidecar = json.loads(path.with_suffix(".json").read_text())
        config = FeatureConfig.from_dict(sidecar["feature_config"])
        meta = [(t, a) for t, a in sidecar["meta"]]
        return cls(arrays["X"], arrays["Y"], meta), config


def admissible_anchors(bank: SeriesBank, config: FeatureConfig, period: range, stride: int) -> list[int]:
    """Anchors whose targets fall inside ``period`` and whose lookback fits the bank."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    lo = max(period.start - 1, earliest_anchor(bank, config))
    hi = min(period.stop - 1, bank.window.stop - 1) - config.horizon
    return list(range(lo, hi + 1, stride))


def generate_samples(bank: SeriesBank, config: FeatureConfig, period: range, stride: int = 1) -> SampleMatrix:
    anchors = admissible_anchors(bank, config, period, stride)
    if not anchors:
        raise ValueError(f"no admissible anchors in hours [{period.start}, {period.stop})")
    X, Y, meta = [], [], []
    for anchor in anchors:
        for topic in config.topics:
            X.append(build_feature_vector(bank, topic, anchor, config))
            Y.append(target_block(bank, topic, anchor, config.horizon).ravel())
            meta.append((topic, anchor))
    return SampleMatrix(np.asarray(X), np.asarray(Y), meta)


def log_transform(v):
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("log_transform expects non-negative counts")
    out = np.log1p(v)
    return float(out) if out.ndim == 0 else out


def inverse_log_transform(v):
    out = np.rint(np.maximum(0.0, np.expm1(np.asarray(v, dtype=float)))).astype(np.int64)
    return int(out) if out.ndim == 0 else out
