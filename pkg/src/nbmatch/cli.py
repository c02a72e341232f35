"""Command-line front end: ``nbmatch solve`` and ``nbmatch bench``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import certify as cert
from .cgd import fw_solve
from .instance import (
    InfeasibleInstanceError,
    InstanceError,
    Kind,
    MarketInstance,
    feasibility_gap,
    gen_common_value,
    gen_random,
    load_instance,
    normalize,
    validate,
)
from .mwu import solve_liad, solve_sad
from .rounding import bvn_decompose, sample_matching

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_CAP = 0, 1, 2, 3
MWU_KINDS = (Kind.ONE_SIDED_LINEAR, Kind.ONE_SIDED_SPLC)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    solver: str = "cgd"
    eps: float = 1e-3
    max_iters: int | None = None
    seed: int = 0
    trace: str | None = None
    certify: bool = False
    round: bool = False
    delta: float | None = None
    out: str | None = None
    step: str = "line_search"

    def check(self) -> None:
        if self.solver not in ("mwu", "cgd"):
            raise UsageError(f"--solver must be 'mwu' or 'cgd', got {self.solver!r}")
        if not 0 < self.eps < 1:
            raise UsageError("--eps must lie in (0, 1)")
        if self.max_iters is not None and self.max_iters < 1:
            raise UsageError("--max-iters must be positive")
        if self.delta is not None and not self.delta > 0:
            raise UsageError("--delta must be positive")


def _plain(obj):
    """JSON-ready copy: numpy to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=1, allow_nan=False)


@dataclass
class Outcome:
    code: int
    result: dict
    lottery: list | None = None
    trace: object = None


def _field_of(violation: str, instance: MarketInstance) -> str:
    """JSON field holding the data behind a validation message."""
    if "job" in violation:
        return "job_utilities"
    if violation.endswith(" in c") or " in c at" in violation:
        return "c"
    if violation.endswith(" in d") or " in d at" in violation:
        return "d"
    return "segments" if instance.is_splc else "utilities"


def solve_instance(instance: MarketInstance, cfg: RunConfig) -> Outcome:
    """Run one configured solve; raises InfeasibleInstanceError and UsageError."""
    cfg.check()
    report = validate(instance)
    if not report.ok:
        raise InstanceError("invalid instance: " + "; ".join(report.violations), _field_of(report.violations[0], instance))
    if cfg.solver == "mwu" and instance.kind not in MWU_KINDS:
        raise UsageError(f"mwu unsupported for kind {instance.kind.value}")
    if cfg.solver == "cgd" and instance.kind is Kind.NON_BIPARTITE_LINEAR and instance.has_endowments:
        raise UsageError("cgd supports non-bipartite instances only with zero disagreement utilities")

    inst, scaling = normalize(instance)
    delta = cfg.delta
    if inst.has_endowments and delta is None:
        delta, _ = feasibility_gap(inst)
    result: dict = {"kind": inst.kind.value, "solver": cfg.solver, "eps": cfg.eps}
    duals = None
    if cfg.solver == "mwu":
        solve = solve_liad if inst.kind is Kind.ONE_SIDED_LINEAR else solve_sad
        res = solve(inst, cfg.eps, cfg.max_iters, check_feasible=False)
        x = res.x
        duals = res.duals
        ok = res.overload <= 3 * cfg.eps and bool(np.all(res.cp <= res.utilities + 1e-9))
        result.update(
            iterations=res.iterations,
            converged=ok,
            overload=res.overload,
            segment_overload=res.segment_overload,
            duals=duals.to_dict(),
        )
        wall, trace = res.wall_time, res.trace
        scaling_dict = dict(scaling.to_dict(), delta=delta)
        solver_cert = {"overload": res.overload, "max_cp_minus_utility": float(np.max(res.cp - res.utilities))}
    else:
        x, rep = fw_solve(inst, cfg.eps, cfg.max_iters, step=cfg.step, delta=delta)
        ok = rep.converged
        result.update(iterations=rep.iterations, converged=ok, fw_gap=rep.gap, step=cfg.step)
        wall, trace = rep.wall_time, rep.trace
        scaling_dict = rep.scaling.to_dict()
        solver_cert = {"fw_gap": rep.gap, "iteration_cap": rep.max_iters}

    lengths = inst.lengths if inst.is_splc else None
    feas = cert.approx_feasibility(x, 1e-9, lengths)
    if not feas.ok:
        raise RuntimeError(f"refusing to write an infeasible allocation (overload {feas.overload:.3g})")

    certificate = {
        "objective": cert.nash_objective(x, instance),
        "normalized_objective": cert.nash_objective(x, inst),
        "max_overload": feas.overload,
        **solver_cert,
    }
    if cfg.certify:
        kkt = cert.kkt_residual(
            x if cfg.solver == "cgd" else res.x_bar,
            duals,
            inst,
            fw_gap=result.get("fw_gap"),
        )
        certificate["kkt"] = kkt.to_dict()
        if not (inst.kind is Kind.NON_BIPARTITE_LINEAR and inst.has_endowments):
            prop = cert.proportionality_check(x, inst, delta, scaling.kappa)
            certificate["proportionality"] = {
                "margins": prop.margins,
                "job_margins": prop.job_margins,
                "min_margin": prop.min_margin,
                "ok": prop.ok(1e-6),
            }
        dev = cert.best_response_gain(x, inst, duals)
        certificate["best_response_gain"] = {
            "feasible_deviation": dev.max_feasible_gain,
            "price_based": dev.max_price_gain,
        }

    result.update(
        allocation=x,
        utilities=instance.agent_utilities(x),
        certificate=certificate,
        scaling=scaling_dict,
        wall_time=wall,
    )
    lottery = None
    if cfg.round:
        if inst.kind is Kind.NON_BIPARTITE_LINEAR:
            result["lottery_skipped"] = "lottery rounding covers bipartite markets only"
        else:
            dec = bvn_decompose(x)
            lottery = dec.to_json()
            result["sampled_matching"] = sample_matching(dec, cfg.seed)
    return Outcome(EXIT_OK if ok else EXIT_CAP, result, lottery, trace)


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text + "\n")
    else:
        Path(path).write_text(text + "\n")


def lottery_path(out: str) -> Path:
    p = Path(out)
    return p.with_name(p.stem + ".lottery.json")


def run_solve(cfg: RunConfig, instance_path: str) -> int:
    try:
        instance = load_instance(instance_path)
        outcome = solve_instance(instance, cfg)
    except FileNotFoundError:
        print(f"error: instance file not found: {instance_path}", file=sys.stderr)
        return EXIT_INPUT
    except InstanceError as exc:
        where = f" (field '{exc.field}')" if exc.field else ""
        print(f"error{where}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    result = outcome.result
    if outcome.lottery is not None:
        if cfg.out is None:
            result["lottery"] = outcome.lottery
        else:
            lottery_path(cfg.out).write_text(dumps(outcome.lottery) + "\n")
    if cfg.trace:
        outcome.trace.to_csv(cfg.trace)
    _write(cfg.out, dumps(result))
    if outcome.code == EXIT_CAP:
        print("iteration cap reached without meeting the tolerance", file=sys.stderr)
    return outcome.code


BENCH_COLUMNS = ["n", "seed", "solver", "eps", "iterations", "wall_time", "final_gap", "overload"]


def bench_rows(spec: dict, cfg: RunConfig) -> list[dict]:
    """One row per (instance, solver, eps), ordered by (n, seed, solver, eps).

    ``spec`` keys: sizes, seeds, kind, generator ("random" or "common"),
    sparsity, endowment_delta, solvers, eps, step. Missing sizes means no rows.
    """
    sizes = spec.get("sizes") or []
    seeds = spec.get("seeds", [cfg.seed])
    kind = Kind(spec.get("kind", Kind.ONE_SIDED_LINEAR.value))
    generator = spec.get("generator", "random")
    solvers = spec.get("solvers", [cfg.solver])
    eps_list = spec.get("eps", [cfg.eps])
    step = spec.get("step", "standard")
    rows = []
    for n in sorted(sizes):
        for seed in sorted(seeds):
            if generator == "common":
                inst = gen_common_value(n, seed, spec.get("noise", 0.1))
            else:
                inst = gen_random(
                    n, kind, seed, spec.get("sparsity", 0.0), endowment_delta=spec.get("endowment_delta")
                )
            for solver in sorted(solvers):
                for eps in sorted(eps_list, reverse=True):
                    run = RunConfig(solver=solver, eps=eps, max_iters=cfg.max_iters, seed=seed, step=step, delta=cfg.delta)
                    outcome = solve_instance(inst, run)
                    r = outcome.result
                    rows.append(
                        {
                            "n": n,
                            "seed": seed,
                            "solver": solver,
                            "eps": eps,
                            "iterations": r["iterations"],
                            "wall_time": r["wall_time"],
                            "final_gap": r.get("fw_gap", ""),
                            "overload": r.get("overload", ""),
                        }
                    )
    return rows


def run_bench(cfg: RunConfig, spec_path: str | None) -> int:
    try:
        spec = json.loads(Path(spec_path).read_text()) if spec_path else {}
        if not isinstance(spec, dict):
            raise UsageError("generator spec must be a JSON object")
        rows = bench_rows(spec, cfg)
    except (OSError, json.JSONDecodeError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    wr.writeheader()
    for row in rows:
        wr.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    text = buf.getvalue()
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        Path(cfg.out).write_text(text)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _ArgError()


class _ArgError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nbmatch", description="Nash-bargaining solutions for matching markets.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, target, help_text in (
        ("solve", "instance", "solve one instance JSON file"),
        ("bench", "spec", "run a generated benchmark described by a JSON spec (omit for an empty run)"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument(target, nargs=None if name == "solve" else "?")
        p.add_argument("--solver", choices=["mwu", "cgd"], default="cgd")
        p.add_argument("--eps", type=float, default=None)
        p.add_argument("--max-iters", type=int, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trace", default=None, help="write a per-iteration CSV trace here")
        p.add_argument("--certify", action="store_true", help="add KKT, proportionality and deviation certificates")
        p.add_argument("--round", action="store_true", help="decompose the allocation into a lottery over matchings")
        p.add_argument("--delta", type=float, default=None, help="known feasibility gap; skips its LP")
        p.add_argument("--out", default=None, help="result path (default: stdout)")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _ArgError:
        return EXIT_INPUT
    eps = args.eps if args.eps is not None else (0.1 if args.solver == "mwu" else 1e-4)
    cfg = RunConfig(
        solver=args.solver,
        eps=eps,
        max_iters=args.max_iters,
        seed=args.seed,
        trace=args.trace,
        certify=args.certify,
        round=args.round,
        delta=args.delta,
        out=args.out,
    )
    try:
        cfg.check()
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "solve":
        return run_solve(cfg, args.instance)
    return run_bench(cfg, args.spec)


if __name__ == "__main__":
    sys.exit(main())
