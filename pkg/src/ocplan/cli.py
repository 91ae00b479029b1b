"""Command-line entry point.

Commands: gen-domain, gen-problem, plan, validate, bench,
ground train, ground eval, scenario gen.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import domains, harness, pddl, planner, simworld


def _style(token: str):
    try:
        return domains.parse_style(token)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _styles(tokens: str):
    return tuple(_style(t).value for t in tokens.split(","))


def cmd_gen_domain(args) -> int:
    text = pddl.print_domain(domains.build_domain(args.style))
    Path(args.out).write_text(text)
    print(f"wrote {args.out}")
    return 0


def cmd_gen_problem(args) -> int:
    sc = simworld.generate_scenario("blocks", seed=args.seed, pattern=args.pattern)
    goal = tuple(args.goal.split(",")) if args.goal else harness.DEFAULT_GOAL
    enc = domains.encode_scenario(sc, args.style, goal_stack=goal)
    text = pddl.print_problem(enc.to_problem(f"blocks-{args.seed}"))
    Path(args.out).write_text(text)
    print(f"wrote {args.out}")
    return 0


def _load_task(args):
    domain = pddl.parse_domain(Path(args.domain).read_text())
    problem = pddl.parse_problem(Path(args.problem).read_text(), domain)
    return planner.ground(domain, problem)


def cmd_plan(args) -> int:
    task = _load_task(args)
    res = planner.solve(
        task, args.algo, max_expansions=args.max_expansions,
        max_seconds=args.max_seconds, weight=args.weight,
    )
    stats = {
        "status": res.status,
        "plan_length": res.stats.plan_length,
        "expanded": res.stats.expanded,
        "generated": res.stats.generated,
        "wall_time_s": round(res.stats.wall_time_s, 6),
        "ground_actions": len(task),
    }
    if res.ok:
        text = res.plan.to_text()
        if args.out:
            Path(args.out).write_text(text + "\n")
        else:
            print(text)
    if args.json:
        payload = dict(stats)
        if res.ok:
            payload["plan"] = [[a.name, *a.binding] for a in res.plan]
        print(json.dumps(payload, indent=1))
    else:
        print("; " + " ".join(f"{k}={v}" for k, v in stats.items()))
    return 0 if res.ok else 1


def cmd_validate(args) -> int:
    task = _load_task(args)
    plan = planner.parse_plan_text(task, Path(args.plan).read_text())
    report = planner.validate_plan(task, plan)
    print(report)
    if report.valid and args.consistency:
        trace, _ = planner.execute(task, plan)
        style = (
            domains.DomainStyle.OBJECT_CENTERED
            if "object-centered" in task.domain.name
            else domains.DomainStyle.HYBRID
        )
        consistency = domains.check_consistency(trace, style)
        print(consistency.to_json())
        return 0 if consistency.ok else 1
    return 0 if report.valid else 1


def cmd_bench(args) -> int:
    if args.runs < 1:
        raise ValueError("--runs must be >= 1")
    records = harness.run_benchmark(
        runs=args.runs, seed0=args.seed, jobs=args.jobs,
        styles=args.styles, weight=args.weight,
        max_expansions=args.max_expansions, max_seconds=args.max_seconds,
    )
    harness.write_bench_csv(records, args.out)
    ok = sum(1 for r in records if r.consistent and r.valid)
    print(f"wrote {args.out}: {len(records)} records, {ok} consistent")
    return 0


def cmd_ground_train(args) -> int:
    per_sequence = harness.run_ground_training(
        n_scenarios=args.scenarios, n_sequences=args.sequences, kind=args.model,
        seed=args.seed, scen_seed0=args.scenario_seed, jobs=args.jobs,
    )
    harness.write_train_csv(per_sequence, args.model, args.out)
    last = [s[-1].performance_index for s in per_sequence]
    print(f"wrote {args.out}: {args.sequences} sequences, "
          f"final performance mean {sum(last) / len(last):.3f}")
    return 0


def cmd_ground_eval(args) -> int:
    result = harness.run_ground_eval(
        n_scenarios=args.scenarios,
        train_fraction=args.train_fraction,
        p_thr=args.p_thr,
        predicates=tuple(args.predicates.split(",")),
        seed=args.seed,
        scen_seed0=args.scenario_seed,
    )
    Path(args.out).write_text(json.dumps(result, indent=1) + "\n")
    print(f"wrote {args.out}")
    return 0


def cmd_scenario_gen(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        sc = simworld.generate_scenario(
            args.roster, seed=args.seed + i, scenario_id=i, pattern=args.pattern,
        )
        (outdir / f"scenario_{i:04d}.json").write_text(sc.to_json() + "\n")
    print(f"wrote {args.count} scenarios to {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ocplan")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-domain", help="write a pick/place domain file")
    g.add_argument("--style", type=_style, required=True, help="oc or hybrid")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_domain)

    g = sub.add_parser("gen-problem", help="write a seeded blocks problem file")
    g.add_argument("--style", type=_style, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--goal", help="comma-separated stack, top first")
    g.add_argument("--pattern", choices=["two_towers"], default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_problem)

    g = sub.add_parser("plan", help="ground and solve a domain/problem pair")
    g.add_argument("--domain", required=True)
    g.add_argument("--problem", required=True)
    g.add_argument("--algo", choices=["astar_goalcount", "bfs"], default="astar_goalcount")
    g.add_argument("--weight", type=float, default=1.0)
    g.add_argument("--max-expansions", type=int, default=2_000_000)
    g.add_argument("--max-seconds", type=float, default=600.0)
    g.add_argument("--out")
    g.add_argument("--json", action="store_true")
    g.set_defaults(func=cmd_plan)

    g = sub.add_parser("validate", help="check a plan file against a task")
    g.add_argument("--domain", required=True)
    g.add_argument("--problem", required=True)
    g.add_argument("--plan", required=True)
    g.add_argument("--consistency", action="store_true",
                   help="also run the geometric/force consistency rules")
    g.set_defaults(func=cmd_validate)

    g = sub.add_parser("bench", help="seeded planning benchmark over both styles")
    g.add_argument("--runs", type=int, required=True)
    g.add_argument("--styles", type=_styles,
                   default=("object_centered", "hybrid_observer_object"))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--weight", type=float, default=8.0)
    g.add_argument("--max-expansions", type=int, default=2_000_000)
    g.add_argument("--max-seconds", type=float, default=120.0)
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_bench)

    g = sub.add_parser("ground", help="signal-to-symbol experiments")
    gsub = g.add_subparsers(dest="ground_command", required=True)

    t = gsub.add_parser("train", help="online abstraction learning curves")
    t.add_argument("--scenarios", type=int, default=150)
    t.add_argument("--sequences", type=int, default=10)
    t.add_argument("--model", choices=["gmm", "kde"], default="gmm")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--scenario-seed", type=int, default=1000)
    t.add_argument("--jobs", type=int, default=1)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_ground_train)

    e = gsub.add_parser("eval", help="train/test split confusion matrices")
    e.add_argument("--scenarios", type=int, default=150)
    e.add_argument("--train-fraction", type=float, default=0.9)
    e.add_argument("--p-thr", type=float, default=0.8)
    e.add_argument("--predicates", default="on,under")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--scenario-seed", type=int, default=1000)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_ground_eval)

    g = sub.add_parser("scenario", help="synthetic scenario tools")
    ssub = g.add_subparsers(dest="scenario_command", required=True)
    s = ssub.add_parser("gen", help="write scenario JSON files")
    s.add_argument("--roster", choices=["blocks", "tabletop"], default="blocks")
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--pattern", choices=["two_towers"], default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scenario_gen)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
