"""Command line entry point: ``ftrl-steer {analyze,simulate,reach,steer,witness,brackets}``.

Exit codes: 0 controllable or a sufficient condition met (or the command
succeeded), 2 not controllable, 3 inconclusive or a heuristic that did not
reach its goal, 1 for errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np
import yaml

from . import artifacts as art
from .controllability import (
    CAVEAT,
    ControllabilityReport,
    VerdictOptions,
    lie_rank_sample,
    sample_interior,
    verdict,
)
from .dynamics import ControlSchedule, DynamicsError, simulate
from .game import FiniteGame, GameError
from .mirror import RegularizerBundle
from .reachability import (
    attainable_cloud,
    coverage,
    halfspace_violation,
    monotone_witness,
    witness_increments,
)
from .specfile import AnalysisDefaults, SpecError, parse_spec
from .steering import greedy_steer_multi, plan_two_player, verify_plan

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONTROLLABLE, EXIT_INCONCLUSIVE = 0, 1, 2, 3
VERDICT_EXIT = {
    "controllable": EXIT_OK,
    "sufficient_condition_met": EXIT_OK,
    "not_controllable": EXIT_NOT_CONTROLLABLE,
    "inconclusive": EXIT_INCONCLUSIVE,
}


class CliError(RuntimeError):
    pass


# -- argument handling ------------------------------------------------------------------


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(";", ",").split(",") if v.strip()])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", required=True, help="game spec file (YAML)")
    common.add_argument("--seed", type=int, help="seed for every random draw (default 42)")
    common.add_argument("--dt", type=float, help="RK4 step size")
    common.add_argument("--out", default="ftrl_out", help="output directory")
    common.add_argument(
        "--regularizer",
        choices=["neg_entropy", "squared_norm", "both"],
        help="override the spec's regularizers (both: reach only)",
    )

    p = argparse.ArgumentParser(prog="ftrl-steer", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="controllability verdict")
    a.add_argument("--depth", type=int, help="maximum Lie bracket depth")
    a.add_argument("--samples", type=int, help="interior sample points")

    s = sub.add_parser("simulate", parents=[common], help="integrate a control schedule")
    s.add_argument("--schedule", help="YAML list of {u: [...], duration: t}")
    s.add_argument("--x0", type=_floats, help="initial profile, flat comma list (default uniform)")
    s.add_argument("--horizon", type=float, help="duration of the uniform control without --schedule")
    s.add_argument("--dual", action="store_true", help="also write dual coordinates")
    s.add_argument("--record-every", type=int, help="record every k-th step")

    r = sub.add_parser("reach", parents=[common], help="constant-control attainable-set sweep")
    r.add_argument("--lattice", type=int, help="control lattice density D")
    r.add_argument("--horizon", type=float, help="largest horizon T")
    r.add_argument("--horizon-count", type=int, help="number of horizons K")
    r.add_argument("--starts", type=int, help="number of seeded random starts")
    r.add_argument("--x0", type=_floats, help="single start instead of random ones")
    r.add_argument("--grid", type=int, help="coverage grid resolution")
    r.add_argument("--no-svg", action="store_true", help="skip the ternary plots")

    st = sub.add_parser("steer", parents=[common], help="plan a schedule to a target profile")
    st.add_argument("--target", type=_floats, required=True, help="target profile, flat comma list")
    st.add_argument("--x0", type=_floats, help="initial profile (default uniform)")
    st.add_argument("--margin", type=float, help="safety margin in (0, 1)")
    st.add_argument("--lattice", type=int, help="control lattice density for the heuristic")
    st.add_argument("--tau", type=float, help="segment length for the heuristic")

    w = sub.add_parser("witness", parents=[common], help="monotone separation witness")
    w.add_argument("--trials", type=int, help="random trajectories for the monotonicity check")

    b = sub.add_parser("brackets", parents=[common], help="sampled Lie rank")
    b.add_argument("--depth", type=int, help="bracket depth")
    b.add_argument("--samples", type=int, help="interior sample points")
    b.add_argument("--drift", action="store_true", help="include the drift field")
    return p


def _defaults(args, base: AnalysisDefaults) -> AnalysisDefaults:
    over = {}
    for f in dataclasses.fields(AnalysisDefaults):
        v = getattr(args, f.name, None)
        if v is not None:
            over[f.name] = v
    return dataclasses.replace(base, **over)


def _bundles(args, game: FiniteGame, bundle: RegularizerBundle) -> list[RegularizerBundle]:
    if args.regularizer is None:
        return [bundle]
    kinds = ["neg_entropy", "squared_norm"] if args.regularizer == "both" else [args.regularizer]
    return [RegularizerBundle.uniform(game, k) for k in kinds]


def _one_bundle(args, game, bundle) -> RegularizerBundle:
    if args.regularizer == "both":
        raise CliError("--regularizer both is only supported by reach")
    return _bundles(args, game, bundle)[0]


def _profile(game: FiniteGame, vals, label: str) -> np.ndarray:
    if vals is None:
        return np.concatenate([np.full(n, 1.0 / n) for n in game.learner_actions])
    if vals.shape != (game.dim,):
        raise CliError(f"{label} needs {game.dim} coordinates, got {vals.size}")
    return vals


def _bundle_tag(bundle: RegularizerBundle) -> str:
    kinds = set(bundle.kinds)
    return kinds.pop() if len(kinds) == 1 else "mixed"


# -- report documents ---------------------------------------------------------------------


def report_dict(game: FiniteGame, bundle: RegularizerBundle, rep: ControllabilityReport) -> dict:
    doc = {
        "game": game.name,
        "regularizers": list(bundle.kinds),
        "verdict": rep.verdict,
        "theorem": rep.theorem,
    }
    if rep.neutralizer is not None:
        c = rep.neutralizer
        doc["neutralizer"] = {"u0": c.u0, "k": c.k, "interiority": c.interiority, "residual": c.residual}
    else:
        doc["neutralizer"] = None
    if rep.projected_rank is not None:
        doc["rank"] = rep.projected_rank
        doc["singular_values"] = rep.singular_values
        doc["projected_matrix"] = rep.projected_matrix
    if rep.witness is not None:
        doc["witness"] = {"w": rep.witness.w, "slacks": rep.witness.slacks, "degenerate": rep.witness.degenerate}
    if rep.lie_rank is not None:
        lr = rep.lie_rank
        doc["lie_rank"] = {
            "depth": lr.depth,
            "target_rank": lr.target_rank,
            "points": len(lr.ranks),
            "full_rank_points": int(np.sum(lr.ranks == lr.target_rank)),
            "min_rank": int(lr.ranks.min()),
            "min_retained_singular_value": float(lr.smallest_singular.min()),
            "fields": lr.brackets,
        }
    if rep.periodicity is not None:
        pe = rep.periodicity
        doc["periodicity"] = {
            "points": len(pe.min_return),
            "horizon": pe.horizon,
            "t_min": pe.t_min,
            "tol": pe.tol,
            "max_min_return": float(np.max(pe.min_return)),
            "periodic_evidence": pe.periodic,
            "failures": len(pe.failures),
        }
    if rep.caveat:
        doc["caveat"] = rep.caveat
    if rep.notes:
        doc["notes"] = rep.notes
    return doc


# -- commands ---------------------------------------------------------------------------------


def cmd_analyze(args, game, bundle, d: AnalysisDefaults) -> int:
    bundle = _one_bundle(args, game, bundle)
    opts = VerdictOptions(d.samples, d.depth, d.seed, d.probe_points, d.probe_horizon, d.dt)
    rep = verdict(game, bundle, opts)
    out = Path(args.out)
    art.write_text(out / "report.yaml", art.dump_report(report_dict(game, bundle, rep)))
    print(f"verdict: {rep.verdict} ({rep.theorem})")
    if rep.projected_rank is not None:
        print(f"rank(P_H A) = {rep.projected_rank}")
    if rep.neutralizer is not None:
        print(f"neutralizer: {np.array2string(rep.neutralizer.u0, precision=6)}")
    if rep.witness is not None:
        print(f"witness: {np.array2string(rep.witness.w, precision=6)}")
    if rep.caveat:
        print(f"caveat: {rep.caveat}")
    return VERDICT_EXIT[rep.verdict]


def _load_schedule(path, m: int) -> ControlSchedule:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise CliError(f"cannot read schedule {path}: {exc}") from None
    if isinstance(raw, dict) and "segments" in raw:
        raw = raw["segments"]
    if not isinstance(raw, list):
        raise CliError("a schedule is a list of {u, duration} entries")
    segs = []
    for j, s in enumerate(raw):
        if not isinstance(s, dict) or set(s) != {"u", "duration"}:
            raise CliError(f"schedule entry {j} must have exactly the keys u and duration")
        u = np.array([float(v) for v in s["u"]])
        if u.shape != (m,):
            raise CliError(f"schedule entry {j}: u needs {m} entries")
        segs.append((u, float(s["duration"])))
    return ControlSchedule(tuple(segs))


def cmd_simulate(args, game, bundle, d: AnalysisDefaults) -> int:
    bundle = _one_bundle(args, game, bundle)
    m = game.controller_actions
    if args.schedule:
        sched = _load_schedule(args.schedule, m)
    else:
        sched = ControlSchedule.constant(np.full(m, 1.0 / m), args.horizon if args.horizon is not None else 1.0)
    x0 = _profile(game, args.x0, "--x0")
    traj = simulate(game, bundle, x0, sched, d.dt, d.record_every, keep_dual=args.dual)
    path = art.write_text(Path(args.out) / "trajectory.csv", art.trajectory_csv(traj, args.dual))
    print(f"wrote {len(traj)} samples to {path}")
    print(f"endpoint: {np.array2string(traj.endpoint, precision=6)}")
    return EXIT_OK


def cmd_reach(args, game, bundle, d: AnalysisDefaults) -> int:
    out = Path(args.out)
    if args.x0 is not None:
        starts = _profile(game, args.x0, "--x0")[None]
    else:
        starts = sample_interior(game, d.starts, np.random.default_rng(d.seed))
    witness = monotone_witness(game) if game.num_learners == 1 else None
    summary = {"game": game.name, "lattice": d.lattice, "horizon": d.horizon,
               "horizon_count": d.horizon_count, "dt": d.dt, "seed": d.seed,
               "starts": starts, "variants": []}
    for b in _bundles(args, game, bundle):
        tag = _bundle_tag(b)
        cloud = attainable_cloud(game, b, starts, d.lattice, d.horizon, d.horizon_count, d.dt)
        csv_path = art.write_text(out / f"cloud_{tag}.csv", art.cloud_csv(cloud))
        entry = {"regularizer": tag, "points": len(cloud), "guard_failures": len(cloud.failures),
                 "coverage": coverage(cloud, d.grid), "grid": d.grid, "csv": csv_path.name}
        if witness is not None and not witness.degenerate:
            entry["witness_violation"] = halfspace_violation(b, cloud, witness)
        if not args.no_svg:
            start = 0
            for i, n in enumerate(game.learner_actions):
                if n == 3:
                    svg = art.ternary_svg(cloud.points[:, start : start + 3], starts[:, start : start + 3],
                                          f"{game.name} {tag} learner {i + 1}")
                    art.write_text(out / f"cloud_{tag}_learner{i + 1}.svg", svg)
                start += n
        summary["variants"].append(entry)
        print(f"{tag}: {len(cloud)} points, coverage(g={d.grid}) = {entry['coverage']:.4f}")
    art.write_text(out / "reach.yaml", art.dump_report(summary))
    return EXIT_OK


def cmd_steer(args, game, bundle, d: AnalysisDefaults) -> int:
    bundle = _one_bundle(args, game, bundle)
    x0 = _profile(game, args.x0, "--x0")
    xt = _profile(game, args.target, "--target")
    exact = False
    if game.num_learners == 1:
        rep = verdict(game, bundle)
        exact = rep.verdict == "controllable"
    if exact:
        plan = plan_two_player(game, bundle, x0, xt, d.margin)
    else:
        density = args.lattice if args.lattice is not None else d.steer_lattice
        plan = greedy_steer_multi(game, bundle, x0, xt, d.tau, density, d.max_segments, d.dt)
    err = verify_plan(game, bundle, x0, plan, d.dt)
    target_err = float(np.max(np.abs(plan.predicted - xt)))
    doc = {
        "game": game.name,
        "regularizers": list(bundle.kinds),
        "method": "exact_single_segment" if exact else "greedy_receding_horizon (heuristic)",
        "status": plan.status,
        "x0": x0,
        "target": xt,
        "predicted_endpoint": plan.predicted,
        "target_error": target_err,
        "verification_error": err,
        "dual_displacement": plan.displacement,
        "duration": plan.duration,
        "schedule": plan.schedule,
    }
    if exact:
        doc.update(u0=plan.u0, w=plan.w, margin=plan.margin)
    else:
        doc.update(dual_distance=plan.distance, history=plan.history, heuristic=True)
    out = Path(args.out)
    art.write_text(out / "plan.yaml", art.dump_report(doc))
    traj = simulate(game, bundle, x0, plan.schedule, d.dt, d.record_every)
    art.write_text(out / "trajectory.csv", art.trajectory_csv(traj))
    print(f"status: {plan.status}; duration {plan.duration:.6g}")
    print(f"verification error: {err:.3e}")
    print(f"distance to target: {target_err:.3e}")
    return EXIT_OK if plan.status in ("exact", "reached") else EXIT_INCONCLUSIVE


def cmd_witness(args, game, bundle, d: AnalysisDefaults) -> int:
    bundle = _one_bundle(args, game, bundle)
    if game.num_learners != 1:
        raise CliError("the witness LP needs a single learner")
    wit = monotone_witness(game)
    out = Path(args.out)
    doc = {"game": game.name, "witness": None}
    code = EXIT_OK
    if wit is not None:
        inc = witness_increments(game, bundle, wit, d.trials, d.dt, d.seed, d.record_every)
        ok = inc[np.isfinite(inc)]
        worst = float(ok.min()) if ok.size else 0.0
        doc["witness"] = {"w": wit.w, "slacks": wit.slacks, "degenerate": wit.degenerate}
        doc["monotonicity"] = {"trials": d.trials, "completed": int(ok.size), "max_negative_increment": worst,
                               "certified": worst >= -1e-7}
        idx = np.arange(len(inc))
        art.write_text(out / "witness_trials.csv", art.csv_text(["trial", "min_increment"], [idx, inc]))
        print(f"witness: {np.array2string(wit.w, precision=6)}; slacks {np.array2string(wit.slacks, precision=6)}")
        print(f"most negative increment over {d.trials} trials: {worst:.3e}")
        code = EXIT_NOT_CONTROLLABLE
    else:
        print("no witness: the game is controllable")
    art.write_text(out / "witness.yaml", art.dump_report(doc))
    return code


def cmd_brackets(args, game, bundle, d: AnalysisDefaults) -> int:
    bundle = _one_bundle(args, game, bundle)
    rep = lie_rank_sample(game, bundle, d.samples, d.depth, args.drift, d.seed)
    out = Path(args.out)
    header = ["point"] + art.coord_names(game.learner_actions) + ["rank", "smallest_singular"]
    cols = [np.arange(len(rep.ranks))] + [rep.points[:, j] for j in range(game.dim)]
    cols += [rep.ranks, rep.smallest_singular]
    art.write_text(out / "brackets.csv", art.csv_text(header, cols))
    doc = {"game": game.name, "depth": rep.depth, "include_drift": rep.include_drift,
           "target_rank": rep.target_rank, "full_rank": rep.full_rank,
           "min_rank": int(rep.ranks.min()), "fields": rep.brackets, "caveat": CAVEAT}
    art.write_text(out / "brackets.yaml", art.dump_report(doc))
    print(f"rank {int(rep.ranks.min())}..{int(rep.ranks.max())} of {rep.target_rank} at {len(rep.ranks)} points")
    return EXIT_OK if rep.full_rank else EXIT_INCONCLUSIVE


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "reach": cmd_reach,
    "steer": cmd_steer,
    "witness": cmd_witness,
    "brackets": cmd_brackets,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        game, bundle, base = parse_spec(args.spec)
        d = _defaults(args, base)
        return COMMANDS[args.command](args, game, bundle, d)
    except (SpecError, CliError, GameError, DynamicsError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
