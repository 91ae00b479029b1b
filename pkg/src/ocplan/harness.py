"""Experiment harness: the scalability benchmark and the grounding studies.

Emits schema-tagged CSV/JSON (the schema string is the first header field).
Benchmark runs are deterministic per seed and may execute in parallel across
seeds; grounding sequences are sequential inside, parallel across sequences.
Wall-time records cover grounding + search only (no parsing, no file I/O).
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .domains import DomainStyle, build_domain, check_consistency, encode_scenario, parse_style
from .grounding import (
    EstimatorParams,
    PredicateModel,
    ScenarioStats,
    abstraction_step,
    classify,
    default_params,
    update,
)
from .model import make_sample
from .planner import ground, solve, validate_plan, execute
from .simworld import GeometryConfig, generate_scenario, label_oracle, evaluated_predicates

BENCH_SCHEMA = "ocplan-bench/1"
TRAIN_SCHEMA = "ocplan-ground-train/1"
EVAL_SCHEMA = "ocplan-ground-eval/1"

DEFAULT_GOAL = ("a", "b", "c", "d", "tabler")


# ---------------------------------------------------------------------------
# planning benchmark (consistency + scalability experiments)

@dataclass
class BenchmarkRecord:
    style: str
    seed: int
    status: str
    plan_length: int
    ground_actions: int
    expanded: int
    time_ms: float
    consistent: bool
    valid: bool
    binding_space: float

    def row(self):
        return [
            BENCH_SCHEMA, self.style, self.seed, self.status, self.plan_length,
            self.ground_actions, self.expanded, f"{self.time_ms:.3f}",
            int(self.consistent), int(self.valid), f"{self.binding_space:.3e}",
        ]


BENCH_HEADER = [
    BENCH_SCHEMA, "style", "seed", "status", "plan_length", "ground_actions",
    "expanded", "time_ms", "consistent", "valid", "binding_space",
]


def bench_one(seed: int, styles=("object_centered", "hybrid_observer_object"),
              goal=DEFAULT_GOAL, algo: str = "astar_goalcount", weight: float = 8.0,
              max_expansions: int = 2_000_000, max_seconds: float = 120.0,
              pattern: str | None = None) -> list[BenchmarkRecord]:
    """One seeded scenario, solved and checked in every requested style."""
    sc = generate_scenario("blocks", seed=seed, pattern=pattern)
    records = []
    for style_token in styles:
        style = parse_style(style_token)
        domain = build_domain(style)
        enc = encode_scenario(sc, style, goal_stack=goal)
        problem = enc.to_problem(f"bench-{seed}")
        t0 = time.perf_counter()
        task = ground(domain, problem)
        res = solve(task, algo, max_expansions=max_expansions,
                    max_seconds=max_seconds, weight=weight)
        elapsed_ms = 1e3 * (time.perf_counter() - t0)
        valid = consistent = False
        if res.ok:
            valid = validate_plan(task, res.plan).valid
            trace, _ = execute(task, res.plan)
            consistent = check_consistency(trace, style).ok
        records.append(BenchmarkRecord(
            style=style.value,
            seed=seed,
            status=res.status,
            plan_length=res.stats.plan_length,
            ground_actions=len(task),
            expanded=res.stats.expanded,
            time_ms=elapsed_ms,
            consistent=consistent,
            valid=valid,
            binding_space=float(task.binding_space),
        ))
    return records


def _bench_worker(args):
    seed, kwargs = args
    try:
        return bench_one(seed, **kwargs)
    except Exception as e:  # per-run failures are recorded, the run continues
        return [BenchmarkRecord(
            style=str(kwargs.get("styles", ("?",))[0]), seed=seed, status=f"error:{e}",
            plan_length=-1, ground_actions=0, expanded=0, time_ms=0.0,
            consistent=False, valid=False, binding_space=0.0,
        )]


def run_benchmark(runs: int, seed0: int = 0, jobs: int = 1, **kwargs) -> list[BenchmarkRecord]:
    seeds = list(range(seed0, seed0 + runs))
    records: list[BenchmarkRecord] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for batch in pool.map(_bench_worker, [(s, kwargs) for s in seeds], chunksize=8):
                records.extend(batch)
    else:
        for s in seeds:
            records.extend(_bench_worker((s, kwargs)))
    records.sort(key=lambda r: (r.seed, r.style))
    return records


def write_bench_csv(records: list[BenchmarkRecord], path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(BENCH_HEADER)
        for r in records:
            w.writerow(r.row())


def read_bench_csv(path) -> list[BenchmarkRecord]:
    out = []
    with open(path) as f:
        rows = csv.reader(f)
        header = next(rows)
        if header[0] != BENCH_SCHEMA:
            raise ValueError(f"unexpected schema {header[0]!r}")
        for row in rows:
            out.append(BenchmarkRecord(
                style=row[1], seed=int(row[2]), status=row[3], plan_length=int(row[4]),
                ground_actions=int(row[5]), expanded=int(row[6]), time_ms=float(row[7]),
                consistent=bool(int(row[8])), valid=bool(int(row[9])),
                binding_space=float(row[10]),
            ))
    return out


# ---------------------------------------------------------------------------
# online grounding study (learning curves)

TRAIN_HEADER = [
    TRAIN_SCHEMA, "sequence", "position", "scenario_id", "model",
    "performance_index", "instruction_ratio", "misclassification_ratio",
    "inference_time_us", "n_evaluated", "corrects", "misclassified", "instructed",
]


def make_scenarios(n: int, seed0: int = 1000, cfg: GeometryConfig | None = None,
                   roster: str = "tabletop"):
    return [
        generate_scenario(roster, seed=seed0 + i, cfg=cfg, scenario_id=i)
        for i in range(n)
    ]


def fresh_models(params: EstimatorParams, kind: str) -> dict[str, PredicateModel]:
    return {p: PredicateModel.fresh(p, params, kind=kind) for p in ("on", "under", "in")}


def run_sequence(scenarios, kind: str, params: EstimatorParams, order) -> list[ScenarioStats]:
    """One pass of the online abstraction loop over a scenario ordering."""
    models = fresh_models(params, kind)
    stats: list[ScenarioStats] = []
    for position, idx in enumerate(order):
        abstraction_step(
            models, scenarios[idx], oracle=label_oracle,
            record=stats.append, scenario_index=position,
        )
    return stats


def _sequence_worker(args):
    n_scenarios, scen_seed0, kind, params_dict, order = args
    params = EstimatorParams.from_dict(params_dict)
    scenarios = make_scenarios(n_scenarios, seed0=scen_seed0)
    return run_sequence(scenarios, kind, params, order)


def run_ground_training(
    n_scenarios: int = 150,
    n_sequences: int = 10,
    kind: str = "gmm",
    seed: int = 0,
    scen_seed0: int = 1000,
    params: EstimatorParams | None = None,
    jobs: int = 1,
) -> list[list[ScenarioStats]]:
    """The paper-style study: averaged random orderings of one scenario set."""
    if params is None:
        params = default_params()
    rng = np.random.default_rng(seed)
    orders = [list(map(int, rng.permutation(n_scenarios))) for _ in range(n_sequences)]
    args = [(n_scenarios, scen_seed0, kind, params.to_dict(), order) for order in orders]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sequence_worker, args))
    return [_sequence_worker(a) for a in args]


def write_train_csv(per_sequence: list[list[ScenarioStats]], kind: str, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRAIN_HEADER)
        for s_idx, stats in enumerate(per_sequence):
            for st in stats:
                w.writerow([
                    TRAIN_SCHEMA, s_idx, st.scenario_index, st.scenario_index, kind,
                    f"{st.performance_index:.6f}", f"{st.instruction_ratio:.6f}",
                    f"{st.misclassification_ratio:.6f}", f"{st.inference_time_us:.3f}",
                    st.n_evaluated, st.corrects, st.misclassified, st.instructed,
                ])
            w.writerow([
                TRAIN_SCHEMA, s_idx, -1, -1, kind,
                f"{np.mean([x.performance_index for x in stats]):.6f}",
                f"{np.mean([x.instruction_ratio for x in stats]):.6f}",
                f"{np.mean([x.misclassification_ratio for x in stats]):.6f}",
                f"{np.mean([x.inference_time_us for x in stats]):.3f}",
                sum(x.n_evaluated for x in stats),
                sum(x.corrects for x in stats),
                sum(x.misclassified for x in stats),
                sum(x.instructed for x in stats),
            ])


# ---------------------------------------------------------------------------
# offline split evaluation (confusion matrices)

def collect_samples(scenarios, predicates=("on", "under")):
    """(pred, z, label) triples for every evaluated instance of the scenarios."""
    samples = []
    for sc in scenarios:
        for pred, o1, o2 in evaluated_predicates(sc):
            if pred not in predicates:
                continue
            z = make_sample(sc.objects[o1], sc.objects[o2])
            samples.append((pred, z, label_oracle(pred, o1, o2, sc)))
    return samples


def run_ground_eval(
    n_scenarios: int = 150,
    train_fraction: float = 0.9,
    p_thr: float = 0.8,
    predicates=("on", "under"),
    kinds=("gmm", "kde"),
    seed: int = 0,
    scen_seed0: int = 1000,
    params: EstimatorParams | None = None,
) -> dict:
    """Train on a random split, report per-predicate confusion matrices."""
    if not (0.0 < train_fraction < 1.0):
        raise ValueError("train_fraction must be in (0, 1)")
    if params is None:
        params = default_params()
    scenarios = make_scenarios(n_scenarios, seed0=scen_seed0)
    samples = collect_samples(scenarios, predicates)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(samples))
    n_train = int(round(train_fraction * len(samples)))
    train_idx, test_idx = perm[:n_train], perm[n_train:]

    result = {
        "schema": EVAL_SCHEMA,
        "train_fraction": train_fraction,
        "p_thr": p_thr,
        "n_samples": len(samples),
        "n_train": int(n_train),
        "n_test": int(len(test_idx)),
        "models": {},
    }
    for kind in kinds:
        models = {p: PredicateModel.fresh(p, params, kind=kind) for p in predicates}
        for i in train_idx:
            pred, z, label = samples[i]
            update(models[pred], z, label)
        per_pred = {}
        for p in predicates:
            per_pred[p] = {
                "tp": 0, "fn": 0, "unclassified_pos": 0,
                "tn": 0, "fp": 0, "unclassified_neg": 0,
            }
        for i in test_idx:
            pred, z, label = samples[i]
            decision, _ = classify(models[pred], z, p_thr)
            cell = per_pred[pred]
            if label:
                if decision is True:
                    cell["tp"] += 1
                elif decision is False:
                    cell["fn"] += 1
                else:
                    cell["unclassified_pos"] += 1
            else:
                if decision is False:
                    cell["tn"] += 1
                elif decision is True:
                    cell["fp"] += 1
                else:
                    cell["unclassified_neg"] += 1
        for p, cell in per_pred.items():
            pos_total = cell["tp"] + cell["fn"] + cell["unclassified_pos"]
            neg_total = cell["tn"] + cell["fp"] + cell["unclassified_neg"]
            cell["performance_pos"] = cell["tp"] / pos_total if pos_total else 0.0
            cell["performance_neg"] = cell["tn"] / neg_total if neg_total else 0.0
            cell["unclassified"] = cell["unclassified_pos"] + cell["unclassified_neg"]
        result["models"][kind] = per_pred
    return result
