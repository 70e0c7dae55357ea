"""End-to-end explanation of one prediction: sample, label, train, encode,
enumerate, score."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from typing import Sequence

from .encoder import NEGATIVE, POSITIVE, build_pmaxsat, encode_forest, encode_instance
from .enumeration import DEFAULT_TIMEOUT, EnumerationBudget, EnumerationResult, Engine
from .errors import ConfigError
from .formula import Cnf
from .solver import BACKENDS, have_pysat
from .scoring import (
    CF,
    SR,
    Explanation,
    NeighborEntry,
    NeighborhoodExplanations,
    ScoredReport,
    build_report,
)
from .surrogate import (
    DEFAULT_DEPTH,
    DEFAULT_SAMPLES,
    DEFAULT_TREES,
    Dataset,
    Instance,
    NeighborhoodSet,
    Oracle,
    RandomForest,
    fidelity,
    hamming,
    label,
    sample_neighborhood,
    train_on_neighborhood,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FIDELITY_WARNING = 0.9
DEFAULT_NEIGHBOR_CAP = 50


@dataclass
class InstanceExplanations:
    values: tuple[int, ...]
    prediction: int
    explanations: dict[str, list[Explanation]]
    results: dict[str, EnumerationResult]


def _explain_with_engine(engine: Engine, var_map, values, prediction, target, budget, kinds,
                         verify: bool = False) -> InstanceExplanations:
    """Enumerate CFs (MCSes) then SRs (MUSes by duality) for one instance."""
    if prediction == target:
        # Σ_f ∪ Σ_x is satisfiable: nothing to explain for this polarity
        empty = {k: EnumerationResult() for k in kinds}
        return InstanceExplanations(tuple(values), prediction, {k: [] for k in kinds}, empty)
    soft = encode_instance(values, var_map)
    index = [(i, v) for i, v in enumerate(values)]
    mcs = engine.mcs(soft, budget, verify=verify)
    results = {CF: mcs}
    if SR in kinds:
        results[SR] = engine.mus(soft, budget, verify=verify, mcs_result=mcs)
    expl = {
        k: [Explanation.from_soft(k, s, index) for s in results[k].sets]
        for k in kinds
    }
    return InstanceExplanations(tuple(values), prediction, expl, {k: results[k] for k in kinds})


def explain_instance(rf: RandomForest, x: Sequence[int], polarity: str = NEGATIVE,
                     budget: EnumerationBudget = EnumerationBudget(), feature_names=None,
                     kinds=(SR, CF), solver: str = "auto") -> InstanceExplanations:
    cm = encode_forest(rf, polarity, feature_names=feature_names)
    build_pmaxsat(cm, encode_instance(x, cm.var_map))  # raises HardUnsat
    engine = Engine(cm.cnf, solver)
    return _explain_with_engine(engine, cm.var_map, tuple(x), rf.predict(x), cm.target_class, budget, kinds)


def _neighbor_worker(args):
    clauses, num_vars, var_map, items, target, budget, solver = args
    engine = Engine(Cnf(clauses, num_vars), solver)
    out = []
    for values, prediction in items:
        ie = _explain_with_engine(engine, var_map, values, prediction, target, budget, (SR, CF))
        out.append((ie.explanations, {k: r.complete for k, r in ie.results.items()}))
    return out


def neighborhood_explanations(rf: RandomForest, ns: NeighborhoodSet, polarity: str = NEGATIVE,
                              budget: EnumerationBudget = EnumerationBudget(), cap: int = DEFAULT_NEIGHBOR_CAP,
                              jobs: int = 1, center: InstanceExplanations | None = None,
                              solver: str = "auto") -> NeighborhoodExplanations:
    """Explanation sets for the ``cap`` nearest neighbors (the center included).

    Only neighbors predicted like the center get explanations; the others
    still count in the neighborhood size.
    """
    x = ns.center.values
    order = sorted(range(len(ns.members)), key=lambda i: (hamming(ns.members[i].values, x), i))
    chosen = [ns.members[i].values for i in order[:max(1, cap)]]
    if chosen[0] != x:
        chosen = [x] + [v for v in chosen if v != x][:max(0, cap - 1)]
    cm = encode_forest(rf, polarity)
    preds = [rf.predict(v) for v in chosen]
    px = preds[0]
    entries = [NeighborEntry(v, p) for v, p in zip(chosen, preds)]
    todo = [i for i, p in enumerate(preds) if p == px]
    if center is not None and todo and todo[0] == 0:
        entries[0].explanations = center.explanations
        entries[0].complete = {k: r.complete for k, r in center.results.items()}
        todo = todo[1:]
    if todo:
        items = [(chosen[i], preds[i]) for i in todo]
        payload = (cm.cnf.clauses, cm.cnf.num_vars, cm.var_map)
        jobs = max(1, min(jobs, len(items)))
        if jobs == 1:
            results = _neighbor_worker(payload + (items, cm.target_class, budget, solver))
        else:
            chunks = [items[j::jobs] for j in range(jobs)]
            with ProcessPoolExecutor(jobs) as pool:
                parts = list(pool.map(_neighbor_worker, [payload + (c, cm.target_class, budget, solver) for c in chunks]))
            # undo the round-robin split
            results = [None] * len(items)
            for j, part in enumerate(parts):
                for k, r in enumerate(part):
                    results[j + k * jobs] = r
        for i, (expl, complete) in zip(todo, results):
            entries[i].explanations = expl
            entries[i].complete = complete
    return NeighborhoodExplanations(x, ns.radius, entries, sampled=len(ns.members))


# --- full run ---------------------------------------------------------------


@dataclass
class RunConfig:
    dataset: Dataset | None = None
    instance: tuple[int, ...] | None = None
    oracle: Oracle | None = None
    forest: RandomForest | None = None
    feature_names: list[str] | None = None
    radius: int | None = None  # None: no radius limit
    sampler: str = "auto"  # auto | dataset | perturb
    samples: int = DEFAULT_SAMPLES
    nb_trees: int = DEFAULT_TREES
    max_depth: int = DEFAULT_DEPTH
    seed: int = 0
    polarity: str = NEGATIVE
    timeout: float | None = DEFAULT_TIMEOUT
    max_explanations: int | None = None
    neighbor_cap: int = DEFAULT_NEIGHBOR_CAP
    jobs: int = 1
    solver: str = "auto"  # auto | python | pysat

    def validate(self) -> None:
        if self.instance is None:
            raise ConfigError("no instance to explain")
        if self.polarity not in (NEGATIVE, POSITIVE):
            raise ConfigError(f"polarity must be neg or pos, got {self.polarity!r}")
        if self.solver not in BACKENDS:
            raise ConfigError(f"unknown solver backend {self.solver!r}")
        if self.solver == "pysat" and not have_pysat():
            raise ConfigError("solver backend pysat needs the python-sat package")
        if self.sampler not in ("auto", "dataset", "perturb"):
            raise ConfigError(f"unknown sampler {self.sampler!r}")
        if self.radius is not None and self.radius < 0:
            raise ConfigError("radius must be >= 0")
        if self.samples < 0:
            raise ConfigError("samples must be >= 0")
        if self.nb_trees < 1 or self.max_depth < 0:
            raise ConfigError("need nb_trees >= 1 and max_depth >= 0")
        if self.neighbor_cap < 1:
            raise ConfigError("neighbor cap must be >= 1")
        if self.timeout is not None and self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.max_explanations is not None and self.max_explanations < 1:
            raise ConfigError("max explanations must be >= 1")
        if self.forest is None and self.oracle is None:
            raise ConfigError("training a surrogate needs an oracle (--oracle-cmd or --labels-col)")
        if self.sampler == "dataset" and self.dataset is None:
            raise ConfigError("dataset sampler needs --data")
        n = self.n_features
        if len(self.instance) != n:
            raise ConfigError(f"instance has {len(self.instance)} values, expected {n}")
        if self.forest is not None and self.forest.n_features != n:
            raise ConfigError(f"forest has {self.forest.n_features} features, expected {n}")
        if len(self.names) != n:
            raise ConfigError("feature names do not match the feature count")

    @property
    def n_features(self) -> int:
        if self.dataset is not None:
            return self.dataset.n_features
        if self.forest is not None:
            return self.forest.n_features
        return len(self.instance or ())

    @property
    def names(self) -> list[str]:
        if self.dataset is not None:
            return list(self.dataset.feature_names)
        if self.feature_names is not None:
            return list(self.feature_names)
        return [f"X{i + 1}" for i in range(self.n_features)]

    @property
    def budget(self) -> EnumerationBudget:
        return EnumerationBudget(self.max_explanations, self.timeout)


@dataclass
class RunResult:
    config: RunConfig
    forest: RandomForest
    neighborhood: NeighborhoodSet
    fidelity: float | None
    explained: InstanceExplanations
    ne: NeighborhoodExplanations
    report: ScoredReport
    note: str | None
    timings: dict[str, float] = field(default_factory=dict)


def run(cfg: RunConfig) -> RunResult:
    cfg.validate()
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    x = Instance(cfg.instance)
    n = cfg.n_features
    r = n if cfg.radius is None else cfg.radius
    sampler = cfg.sampler
    if sampler == "auto":
        sampler = "dataset" if cfg.dataset is not None else "perturb"
    if sampler == "dataset":
        ns = sample_neighborhood(x, r, dataset=cfg.dataset, samples=0, seed=cfg.seed)
    else:
        ns = sample_neighborhood(x, r, samples=cfg.samples, seed=cfg.seed)
    timings["sample"] = time.perf_counter() - t0

    t = time.perf_counter()
    fid = None
    if cfg.oracle is not None:
        ns = label(ns, cfg.oracle)
    timings["label"] = time.perf_counter() - t

    t = time.perf_counter()
    if cfg.forest is not None:
        rf = cfg.forest
    else:
        rf = train_on_neighborhood(ns, nb_trees=cfg.nb_trees, max_depth=cfg.max_depth, seed=cfg.seed)
    if ns.labeled:
        fid = fidelity(rf, ns)
        if fid < FIDELITY_WARNING:
            log.warning("surrogate fidelity %.3f is below %.2f; explanations may not reflect the black box",
                        fid, FIDELITY_WARNING)
    timings["train"] = time.perf_counter() - t

    t = time.perf_counter()
    cm = encode_forest(rf, cfg.polarity, feature_names=cfg.names)
    build_pmaxsat(cm, encode_instance(x, cm.var_map))
    timings["encode"] = time.perf_counter() - t

    t = time.perf_counter()
    engine = Engine(cm.cnf, cfg.solver)
    pred = rf.predict(x)
    explained = _explain_with_engine(engine, cm.var_map, x.values, pred, cm.target_class, cfg.budget, (SR, CF))
    timings["enumerate"] = time.perf_counter() - t

    note = None
    if pred == cm.target_class:
        already = "positive" if pred == 1 else "negative"
        note = f"instance already predicted {already}; zero explanations of kind SR/CF"

    t = time.perf_counter()
    if note is None:
        ne = neighborhood_explanations(rf, ns, cfg.polarity, cfg.budget, cfg.neighbor_cap, cfg.jobs, center=explained,
                                        solver=cfg.solver)
    else:
        ne = NeighborhoodExplanations(x.values, r, [NeighborEntry(x.values, pred, explained.explanations)],
                                      sampled=len(ns.members))
    report = build_report(n, explained.explanations, ne)
    timings["score"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t0
    return RunResult(cfg, rf, ns, fid, explained, ne, report, note, timings)


# --- serialization ----------------------------------------------------------


def _exact(v: Fraction | None):
    return None if v is None else str(v)


def _float(v: Fraction | None):
    return None if v is None else float(v)


def report_dict(res: RunResult) -> dict:
    names = res.config.names
    cfg = res.config
    out = {
        "schema_version": SCHEMA_VERSION,
        "instance": {
            "values": list(res.explained.values),
            "prediction": res.explained.prediction,
            "polarity": cfg.polarity,
        },
        "surrogate": {
            "trees": len(res.forest.trees),
            "threshold": res.forest.threshold,
            "max_depth": cfg.max_depth,
            "seed": cfg.seed,
            "fidelity": res.fidelity,
            "neighborhood_size": len(res.neighborhood),
            "radius": res.ne.radius,
        },
        "note": res.note,
        "explanations": {},
        "feature_scores": {},
        "neighborhood": res.ne.coverage(),
    }
    for kind in (SR, CF):
        result = res.explained.results[kind]
        items = []
        for se in res.report.explanations[kind]:
            e = se.explanation
            items.append({
                "items": [{"feature": names[f], "index": f, "value": v} for f, v in sorted(e.items)],
                "size": e.size,
                "scores": {k: _float(v) for k, v in se.scores.items()},
                "exact": {k: _exact(v) for k, v in se.scores.items()},
            })
        out["explanations"][kind] = {"complete": result.complete, "stopped": result.reason, "list": items}
        out["feature_scores"][kind] = [
            {"feature": names[fs.feature], "index": fs.feature,
             **{k: _float(v) for k, v in fs.scores.items()},
             "exact": {k: _exact(v) for k, v in fs.scores.items()}}
            for fs in res.report.features[kind]
        ]
    out["timings"] = {k: round(v, 6) for k, v in res.timings.items()}
    return out


def ne_to_dict(ne: NeighborhoodExplanations, names: Sequence[str]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "feature_names": list(names),
        "center": list(ne.center),
        "radius": ne.radius,
        "sampled": ne.sampled,
        "entries": [
            {
                "values": list(v.values),
                "prediction": v.prediction,
                "explanations": {k: [sorted([f, val] for f, val in e.items) for e in es]
                                 for k, es in v.explanations.items()},
                "complete": dict(v.complete),
            }
            for v in ne.entries
        ],
    }


def ne_from_dict(d: dict) -> NeighborhoodExplanations | None:
    entries = []
    for i, raw in enumerate(d.get("entries", [])):
        expl = {k: [Explanation(k, frozenset((int(f), int(v)) for f, v in items), i) for items in lists]
                for k, lists in raw.get("explanations", {}).items()}
        entries.append(NeighborEntry(tuple(raw["values"]), int(raw["prediction"]), expl, dict(raw.get("complete", {}))))
    if not entries:
        return None
    return NeighborhoodExplanations(tuple(d["center"]), int(d.get("radius", 0)), entries, int(d.get("sampled", 0)))


def explanations_from_report(d: dict) -> dict[str, list[Explanation]]:
    out = {}
    for kind in (SR, CF):
        block = d.get("explanations", {}).get(kind, {})
        out[kind] = [Explanation(kind, frozenset((it["index"], it["value"]) for it in e["items"]))
                     for e in block.get("list", [])]
    return out


def default_jobs() -> int:
    return os.cpu_count() or 1
