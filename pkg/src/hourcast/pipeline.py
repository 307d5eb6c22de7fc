"""Run configuration and the staged end-to-end pipeline.

Every stage reads and writes artifacts under ``RunConfig.output_dir`` so the
CLI can run stages one at a time:

    data/events.jsonl              normalized event log
    features/{train,val,test}.*    sample matrices
    model/                         volume model bundle
    forecasts/test.json            volume forecasts of all models on test days
    simulations/<topic>/...        simulated graph sequences per trial
    reports/                       rank table, per-topic CSVs, network reports
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import yaml
from joblib import Parallel, delayed

from .baselines import BASELINE_ORDERS, ArimaOrder, arima_forecast, persistence_forecast, persistence_network
from .events import (
    EventLog,
    TemporalGraph,
    UserLedger,
    aggregate_graphs,
    build_temporal_graphs,
    hour_of,
    hour_to_iso,
    ingest_events,
    parse_timestamp,
    read_graphs_jsonl,
    write_events_jsonl,
)
from .exceptions import ConfigError, DataError, HourcastError, StageError
from .features import OUTPUT_TYPES, FeatureConfig, SampleMatrix, SeriesBank, generate_samples
from .net_metrics import ccdh, emd_1d, influence_vector, pagerank, relative_hausdorff, weighted_jaccard
from .synth import SynthConfig, synth_generate
from .ts_metrics import METRICS, MetricRow, mean_rows, onme_table, per_topic_normalized, score_series
from .user_assignment import reconcile_counts, simulate
from .volume import ParamGrid, VolumeForecaster

logger = logging.getLogger(__name__)

# fixed by the method; a config may restate them but not change them
PINNED = {"subsample": 1.0, "gamma": 0.0, "l1_alpha": 0.0, "loss": "squared_error", "target_transform": "log1p"}

PERSISTENCE = "Persistence"


def _default_config() -> dict:
    return {
        "seed": None,
        "events": None,
        "events_format": None,
        "synth": None,
        "output_dir": "run",
        "topics": None,
        "features": {"platforms": ["T", "R"], "lookback": 72, "horizon": 24},
        "splits": {"train_days": 40, "val_days": 6, "test_days": 14},
        "gbt": {"grid": ParamGrid().to_dict(), "search": "per_cell", "n_jobs": 1, "pinned": dict(PINNED)},
        "baselines": {k: [o.p, o.d, o.q] for k, o in BASELINE_ORDERS.items()},
        "simulation": {"trials": 5, "lookback": 24, "capacity": 1000, "trial_jobs": 1},
    }


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path}{k!r}")
        if isinstance(base[k], dict) and k not in ("grid", "baselines", "splits") and v is not None:
            if not isinstance(v, dict):
                raise ConfigError(f"config key {path}{k!r} must be a mapping")
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class RunConfig:
    raw: dict = field(default_factory=_default_config)

    @classmethod
    def from_dict(cls, d: dict | None) -> "RunConfig":
        cfg = cls(_merge(_default_config(), d or {}))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping")
        return cls.from_dict(data)

    def with_overrides(self, **kw) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        for key, value in kw.items():
            if value is None:
                continue
            node = raw
            *parents, leaf = key.split(".")
            for p in parents:
                node = node[p]
            node[leaf] = value
        return RunConfig.from_dict(raw)

    def validate(self) -> None:
        r = self.raw
        if r["seed"] is not None and not isinstance(r["seed"], int):
            raise ConfigError("seed must be an integer")
        pinned = r["gbt"]["pinned"]
        for k, v in pinned.items():
            if k not in PINNED:
                raise ConfigError(f"unknown pinned key {k!r}")
            if v != PINNED[k]:
                raise ConfigError(f"gbt.pinned.{k} is fixed at {PINNED[k]!r}")
        if r["gbt"]["search"] not in ("per_cell", "global"):
            raise ConfigError("gbt.search must be 'per_cell' or 'global'")
        sim = r["simulation"]
        if sim["trials"] < 1:
            raise ConfigError("simulation.trials must be >= 1")
        if sim["lookback"] < 1 or sim["capacity"] < 0:
            raise ConfigError("simulation.lookback must be >= 1 and capacity >= 0")
        try:
            self.param_grid.points()
            self.baseline_orders
            FeatureConfig(tuple(r["features"]["platforms"]), r["features"]["lookback"], r["features"]["horizon"],
                          ("placeholder",))
            if r["synth"] is not None:
                self.synth_config
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        splits = r["splits"]
        if set(splits) == {"train_days", "val_days", "test_days"}:
            if min(splits.values()) < 1:
                raise ConfigError("split lengths must be >= 1 day")
        elif set(splits) != {"train", "val", "test"}:
            raise ConfigError("splits needs train_days/val_days/test_days or train/val/test ranges")

    @property
    def seed(self) -> int | None:
        return self.raw["seed"]

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output_dir"])

    @property
    def param_grid(self) -> ParamGrid:
        return ParamGrid(**{k: tuple(v) for k, v in self.raw["gbt"]["grid"].items()})

    @property
    def baseline_orders(self) -> dict[str, ArimaOrder]:
        return {k: ArimaOrder(*v) for k, v in self.raw["baselines"].items()}

    @property
    def synth_config(self) -> SynthConfig:
        d = dict(self.raw["synth"])
        d.setdefault("seed", self.seed if self.seed is not None else 0)
        return SynthConfig.from_dict(d)

    def splits(self, window: range) -> tuple[range, range, range]:
        s = self.raw["splits"]
        if "train_days" in s:
            a = window.start
            b = a + 24 * s["train_days"]
            c = b + 24 * s["val_days"]
            d = c + 24 * s["test_days"]
            out = (range(a, b), range(b, c), range(c, d))
        else:
            out = tuple(range(hour_of(parse_timestamp(s[k][0])), hour_of(parse_timestamp(s[k][1])))
                        for k in ("train", "val", "test"))
        tr, va, te = out
        if not (len(tr) and len(va) and len(te)):
            raise ConfigError("every split must be non-empty")
        if not (tr.stop <= va.start and va.stop <= te.start):
            raise ConfigError("splits must be disjoint and ordered train < val < test")
        if te.stop > window.stop:
            raise ConfigError(f"test split ends at {hour_to_iso(te.stop)}, after the corpus "
                              f"({hour_to_iso(window.stop)})")
        return out

    def echo(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True)


def _stage(name):
    """Wrap unexpected failures in :class:`StageError` naming the stage."""
    def wrap(fn):
        def run(*args, **kwargs):
            logger.info("stage %s", name)
            try:
                return fn(*args, **kwargs)
            except HourcastError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


class Workspace:
    """Artifact paths plus lazily loaded shared state for one run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.root = cfg.output_dir

    def path(self, *parts) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    @property
    def events_path(self) -> Path:
        return self.path("data", "events.jsonl")

    @cached_property
    def log(self) -> EventLog:
        if not self.events_path.exists():
            raise DataError(f"no ingested events at {self.events_path}; run 'ingest' first")
        return ingest_events(self.events_path)

    @cached_property
    def ledger(self) -> UserLedger:
        return UserLedger.from_log(self.log)

    @cached_property
    def window(self) -> range:
        return self.log.window

    @cached_property
    def topics(self) -> list[str]:
        topics = self.cfg.raw["topics"] or self.log.topics("twitter")
        missing = set(topics) - set(self.log.topics("twitter"))
        if missing:
            raise DataError(f"topics without twitter events: {sorted(missing)}")
        if not topics:
            raise DataError("corpus has no twitter topics")
        return sorted(topics)

    @cached_property
    def feature_config(self) -> FeatureConfig:
        f = self.cfg.raw["features"]
        return FeatureConfig(tuple(f["platforms"]), f["lookback"], f["horizon"], tuple(self.topics))

    @cached_property
    def periods(self) -> tuple[range, range, range]:
        return self.cfg.splits(self.window)

    @cached_property
    def bank(self) -> SeriesBank:
        return SeriesBank.from_log(self.log, self.topics, self.window, self.ledger)

    @cached_property
    def graphs(self) -> dict[str, list[TemporalGraph]]:
        return {t: build_temporal_graphs(self.log, t, self.window) for t in self.topics}

    @property
    def model_label(self) -> str:
        return f"GBT-{self.feature_config.tag}"


def _require_seed(cfg: RunConfig, stage: str) -> int:
    if cfg.seed is None:
        raise ConfigError(f"stage '{stage}' needs a master seed")
    return cfg.seed


@_stage("ingest")
def stage_ingest(ws: Workspace) -> Path:
    """Load the configured events (or synthesize them) and write the normalized log."""
    cfg = ws.cfg
    if cfg.raw["events"] is None and cfg.raw["synth"] is None:
        raise ConfigError("either 'events' or 'synth' must be configured")
    if cfg.raw["events"] is not None:
        src = Path(cfg.raw["events"])
        if not src.exists():
            raise DataError(f"events file not found: {src}")
        log = ingest_events(src, cfg.raw["events_format"])
    else:
        log = synth_generate(cfg.synth_config)
    if not len(log):
        raise DataError("event log is empty")
    write_events_jsonl(log, ws.events_path)
    for key in ("log", "ledger", "window", "topics", "bank", "graphs", "feature_config", "periods"):
        ws.__dict__.pop(key, None)
    return ws.events_path


@_stage("featurize")
def stage_featurize(ws: Workspace) -> dict[str, SampleMatrix]:
    tr, va, te = ws.periods
    fc = ws.feature_config
    out = {
        "train": generate_samples(ws.bank, fc, tr, stride=1),
        "val": generate_samples(ws.bank, fc, va, stride=1),
        "test": generate_samples(ws.bank, fc, te, stride=fc.horizon),
    }
    for name, sm in out.items():
        sm.save(ws.path("features", name), fc)
    return out


def _load_samples(ws: Workspace, name: str) -> SampleMatrix:
    p = ws.root / "features" / f"{name}.npz"
    if not p.exists():
        raise DataError(f"missing feature matrix {p}; run 'featurize' first")
    sm, _ = SampleMatrix.load(p)
    return sm


@_stage("train")
def stage_train(ws: Workspace) -> VolumeForecaster:
    seed = _require_seed(ws.cfg, "train")
    tr, va = _load_samples(ws, "train"), _load_samples(ws, "val")
    g = ws.cfg.raw["gbt"]
    model = VolumeForecaster(horizon=ws.feature_config.horizon, param_grid=ws.cfg.param_grid,
                             feature_config=ws.feature_config, search=g["search"],
                             random_state=seed, n_jobs=g["n_jobs"])
    model.fit(tr.X, tr.Y, eval_set=(va.X, va.Y))
    model.save(ws.path("model", "manifest.json").parent)
    return model


@_stage("forecast")
def stage_forecast(ws: Workspace) -> dict:
    """Forecasts of the trained model and every baseline for each test (topic, day)."""
    manifest = ws.root / "model" / "manifest.json"
    if not manifest.exists():
        raise DataError(f"no model bundle at {manifest.parent}; run 'train' first")
    model = VolumeForecaster.load(manifest.parent)
    te = _load_samples(ws, "test")
    S = model.horizon
    pred = model.predict(te.X)
    label = ws.model_label
    records = []
    for i, (topic, anchor) in enumerate(te.meta):
        end = anchor - ws.window.start + 1
        models: dict[str, dict[str, list[int]]] = {label: {}, PERSISTENCE: {}}
        models.update({name: {} for name in ws.cfg.baseline_orders})
        truth = {}
        for k, o in enumerate(OUTPUT_TYPES):
            hist = ws.bank.targets(topic, o)[:end]
            truth[o] = te.Y[i][k * S:(k + 1) * S].astype(int).tolist()
            models[label][o] = pred[i, k].tolist()
            models[PERSISTENCE][o] = persistence_forecast(hist, S).astype(int).tolist()
            for name, order in ws.cfg.baseline_orders.items():
                models[name][o] = arima_forecast(hist, order, S).tolist()
        records.append({"topic": topic, "anchor": hour_to_iso(anchor), "truth": truth, "models": models})
    out = {"model": label, "horizon": S, "records": records}
    ws.path("forecasts", "test.json").write_text(json.dumps(out, indent=1))
    return out


def _load_forecasts(ws: Workspace) -> dict:
    p = ws.root / "forecasts" / "test.json"
    if not p.exists():
        raise DataError(f"missing forecasts {p}; run 'forecast' first")
    return json.loads(p.read_text())


def _sim_stem(topic: str, anchor: int, trial: int) -> tuple[str, str]:
    return topic.replace("/", "_"), f"{hour_to_iso(anchor)[:13]}_trial{trial}"


def _run_trial(Y, recent, first_seen, seed, trial, lookback, capacity, topic):
    t0 = time.perf_counter()
    seq = simulate(Y, recent, first_seen, seed, trial, lookback, capacity, id_tag=f"{topic}-")
    return seq, time.perf_counter() - t0


@_stage("simulate")
def stage_simulate(ws: Workspace) -> dict:
    """Simulate every test (topic, day) from the model's forecasts, ``trials`` times."""
    seed = _require_seed(ws.cfg, "simulate")
    fc = _load_forecasts(ws)
    sim = ws.cfg.raw["simulation"]
    first_seen = ws.ledger.platform("twitter")
    label = fc["model"]
    summary = {"seed": seed, "trials": sim["trials"], "runs": []}
    timings = []
    for rec in fc["records"]:
        topic, anchor = rec["topic"], hour_of(parse_timestamp(rec["anchor"]))
        k = anchor - ws.window.start
        recent = ws.graphs[topic][max(0, k - sim["lookback"] + 1):k + 1]
        Y = np.array([rec["models"][label][o] for o in OUTPUT_TYPES])
        Y, adjusted = reconcile_counts(Y)
        jobs = [delayed(_run_trial)(Y, recent, first_seen, seed, t, sim["lookback"], sim["capacity"], topic)
                for t in range(sim["trials"])]
        if sim["trial_jobs"] in (None, 1):
            results = [fn(*a, **kw) for fn, a, kw in jobs]
        else:
            results = Parallel(n_jobs=sim["trial_jobs"])(jobs)
        for seq, secs in results:
            d, stem = _sim_stem(topic, anchor, seq.trial)
            seq.save(ws.path("simulations", d, "x").parent, stem)
            timings.append(secs)
        summary["runs"].append({"topic": topic, "anchor": rec["anchor"], "reconciled_hours": adjusted,
                                "counts": Y.tolist()})
    mean_secs = float(np.mean(timings)) if timings else 0.0
    logger.info("simulated %d trial-days, %.3f s per trial-day", len(timings), mean_secs)
    ws.path("simulations", "index.json").write_text(json.dumps(summary, indent=1))
    _write_runtime(ws, "simulate_seconds_per_trial_day", mean_secs)
    return summary


def _write_runtime(ws: Workspace, key: str, value: float) -> None:
    p = ws.path("reports", "runtime.json")
    data = json.loads(p.read_text()) if p.exists() else {}
    data[key] = value
    p.write_text(json.dumps(data, indent=2, sort_keys=True))


def _score_forecasts(fc: dict) -> tuple[dict[str, list[MetricRow]], dict[str, dict[str, list[MetricRow]]]]:
    """Per-model score rows over every (topic, day, output type), plus the same split by topic."""
    overall: dict[str, list[MetricRow]] = {}
    by_topic: dict[str, dict[str, list[MetricRow]]] = {}
    for rec in fc["records"]:
        for name, series in rec["models"].items():
            for o in OUTPUT_TYPES:
                row = score_series(name, series[o], rec["truth"][o])
                overall.setdefault(name, []).append(row)
                by_topic.setdefault(rec["topic"], {}).setdefault(name, []).append(row)
    return overall, by_topic


def _fmt(v):
    return None if v is None else round(float(v), 10)


def _network_scores(pred: list[TemporalGraph], actual: list[TemporalGraph], known: set) -> dict:
    wjs = float(np.mean([weighted_jaccard(influence_vector(p, known), influence_vector(a, known))
                         for p, a in zip(pred, actual)]))
    P, A = aggregate_graphs(pred), aggregate_graphs(actual)
    emd = rhd = None
    if P.nodes and A.nodes:
        emd = emd_1d(pagerank(P).scores.values(), pagerank(A).scores.values())
    hp, ha = ccdh(P), ccdh(A)
    if hp and ha:
        rhd = relative_hausdorff(hp, ha)
    return {"wjs": _fmt(wjs), "emd": _fmt(emd), "rhd": _fmt(rhd)}


def _pifb(model, base, higher_is_better):
    if model is None or base is None or base == 0:
        return None
    return _fmt(100.0 * ((model - base) if higher_is_better else (base - model)) / base)


@_stage("evaluate")
def stage_evaluate(ws: Workspace) -> dict:
    """Rank table over volume forecasts, per-topic CSVs and network reports."""
    fc = _load_forecasts(ws)
    overall, by_topic = _score_forecasts(fc)
    names = list(overall)
    baselines = {n for n in names if n != fc["model"]}
    rows = [mean_rows(n, overall[n], n in baselines) for n in names]
    table = onme_table(rows)
    table.to_csv(ws.path("reports", "rank_table.csv"))
    ws.path("reports", "rank_table.json").write_text(table.to_json())

    topic_means = {}
    for topic, per_model in sorted(by_topic.items()):
        topic_means[topic] = {n: mean_rows(n, per_model[n], n in baselines) for n in names}
        with ws.path("reports", "per_topic", f"{topic.replace('/', '_')}.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", *METRICS])
            for n in names:
                w.writerow([n, *(f"{v:.6f}" for v in topic_means[topic][n].values())])
    with ws.path("reports", "per_topic_normalized.csv").open("w", newline="") as fh:
        shares = per_topic_normalized(topic_means, names)
        w = csv.DictWriter(fh, fieldnames=["topic", "metric", *names], lineterminator="\n")
        w.writeheader()
        for row in shares:
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})

    network = _evaluate_network(ws) if (ws.root / "simulations" / "index.json").exists() else None
    return {"rank_table": table, "network": network}


def _evaluate_network(ws: Workspace) -> dict:
    index = json.loads((ws.root / "simulations" / "index.json").read_text())
    trials = index["trials"]
    S = ws.feature_config.horizon
    per_trial: dict[tuple[str, int], list[dict]] = {}
    days = []
    for run in index["runs"]:
        topic, anchor = run["topic"], hour_of(parse_timestamp(run["anchor"]))
        k = anchor - ws.window.start
        G = ws.graphs[topic]
        actual = G[k + 1:k + 1 + S]
        known = ws.ledger.known_at("twitter", anchor)
        base = _network_scores(persistence_network(G[k + 1 - S:k + 1]), actual, known)
        model_scores = []
        for t in range(trials):
            d, stem = _sim_stem(topic, anchor, t)
            pred = read_graphs_jsonl(ws.root / "simulations" / d / f"{stem}.jsonl")
            s = _network_scores(pred, actual, known)
            model_scores.append(s)
            per_trial.setdefault((topic, t), []).append({"day": run["anchor"], **s, "persistence": base})
        mean_wjs = float(np.mean([s["wjs"] for s in model_scores]))
        days.append({"topic": topic, "day": run["anchor"], "wjs_model": _fmt(mean_wjs),
                     "wjs_persistence": base["wjs"], "model_wins": bool(mean_wjs > base["wjs"])})

    def mean_of(items, key):
        vals = [x[key] for x in items if x[key] is not None]
        return _fmt(np.mean(vals)) if vals else None

    topic_trial_means: dict[str, list[dict]] = {}
    for (topic, t), items in sorted(per_trial.items()):
        report = {
            "topic": topic, "trial": t,
            "days": items,
            "mean": {m: mean_of(items, m) for m in ("wjs", "emd", "rhd")},
            "persistence": {m: mean_of([x["persistence"] for x in items], m) for m in ("wjs", "emd", "rhd")},
        }
        report["pifb"] = {
            "wjs": _pifb(report["mean"]["wjs"], report["persistence"]["wjs"], True),
            "emd": _pifb(report["mean"]["emd"], report["persistence"]["emd"], False),
            "rhd": _pifb(report["mean"]["rhd"], report["persistence"]["rhd"], False),
        }
        ws.path("reports", "network", f"{topic.replace('/', '_')}_trial{t}.json").write_text(
            json.dumps(report, indent=1))
        topic_trial_means.setdefault(topic, []).append(report)

    summary = {"topics": {}, "days": days,
               "wins": sum(d["model_wins"] for d in days), "n_days": len(days)}
    for topic, reports in topic_trial_means.items():
        entry = {}
        for m in ("wjs", "emd", "rhd"):
            vals = np.array([r["mean"][m] for r in reports if r["mean"][m] is not None], dtype=float)
            base = reports[0]["persistence"][m]
            if len(vals):
                mu, sd = float(vals.mean()), float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
                entry[m] = {"mean": _fmt(mu), "std": _fmt(sd), "cv": _fmt(sd / mu) if mu else None,
                            "persistence": base, "pifb": _pifb(mu, base, m == "wjs")}
            else:
                entry[m] = None
        summary["topics"][topic] = entry
    ws.path("reports", "network_summary.json").write_text(json.dumps(summary, indent=1))
    return summary


@_stage("report")
def stage_report(ws: Workspace) -> Path:
    """Plain-text digest of the evaluation artifacts."""
    rt = ws.root / "reports" / "rank_table.json"
    if not rt.exists():
        raise DataError(f"missing {rt}; run 'evaluate' first")
    table = json.loads(rt.read_text())
    lines = ["# Run report", "", "## Volume forecasts (mean over topic, day and output type)", "",
             "| rank | model | ONME | PIFBB % |", "|---|---|---|---|"]
    for r in table["rows"]:
        lines.append(f"| {r['rank']} | {r['model']} | {r['onme']:.4f} | {r['pifbb']:.2f} |")
    lines.append(f"\nBest baseline: {table['best_baseline']}")
    ns = ws.root / "reports" / "network_summary.json"
    if ns.exists():
        net = json.loads(ns.read_text())
        lines += ["", "## Simulated networks (trial mean vs persistence)", "",
                  "| topic | metric | mean | std | persistence | PIFB % |", "|---|---|---|---|---|---|"]
        for topic, entry in net["topics"].items():
            for m, v in entry.items():
                if v is None:
                    continue
                pifb = "n/a" if v["pifb"] is None else f"{v['pifb']:.2f}"
                lines.append(f"| {topic} | {m} | {v['mean']:.4f} | {v['std']:.4f} | {v['persistence']:.4f} | {pifb} |")
        lines.append(f"\nWeighted Jaccard wins over persistence: {net['wins']} of {net['n_days']} topic-days")
    manifest = ws.root / "model" / "manifest.json"
    if manifest.exists():
        model = VolumeForecaster.load(manifest.parent)
        lines += ["", "## Feature importance (activities)", ""]
        for g, v in sorted(model.importance_report("activities").items(), key=lambda kv: -kv[1]):
            lines.append(f"- {g}: {v:.3f}")
    out = ws.path("reports", "report.md")
    out.write_text("\n".join(lines) + "\n")
    return out


@dataclass
class RunResult:
    workspace: Workspace
    rank_table: object
    network: dict | None
    seconds: dict[str, float]


def run_pipeline(cfg: RunConfig) -> RunResult:
    """Every stage in order; artifacts land in ``cfg.output_dir``."""
    _require_seed(cfg, "run")
    ws = Workspace(cfg)
    ws.path("config.echo.json").write_text(cfg.echo())
    seconds = {}
    result = {}
    for name, fn in [("ingest", stage_ingest), ("featurize", stage_featurize), ("train", stage_train),
                     ("forecast", stage_forecast), ("simulate", stage_simulate),
                     ("evaluate", stage_evaluate), ("report", stage_report)]:
        t0 = time.perf_counter()
        result[name] = fn(ws)
        seconds[name] = time.perf_counter() - t0
        _write_runtime(ws, f"{name}_seconds", seconds[name])
    ev = result["evaluate"]
    return RunResult(ws, ev["rank_table"], ev["network"], seconds)

