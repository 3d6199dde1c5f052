"""Batch front end: solve a scenario, verify recorded strategies in
simulation, and render report plots.

    assetguard solve <scenario.toml> [--out DIR] [--n-ibr N] [--n-scp N]
    assetguard verify <run-dir> [--laws pn,apn] [--ratios 3,4,5] [--closed-loop]
    assetguard report <run-dir>

Exit codes: 0 success, 2 validation error, 3 numerical failure. A solve
interrupted mid-run resumes from the last completed iteration when pointed
at the same run directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import ibr, runio, simulation, transcription
from .runio import MissingArtifact
from .scenario import Scenario, ScenarioError, parse_scenario, serialize_scenario  # noqa: F401  (re-exported)

__all__ = ["parse_scenario", "serialize_scenario", "cmd_solve", "cmd_verify",
           "cmd_report", "main"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def cmd_solve(scenario_path, out_dir=None, n_ibr=None, n_scp=None, verbose=False) -> Path:
    """Run the best-response loop and serialize the full record."""
    scenario = parse_scenario(scenario_path)
    if n_ibr is not None:
        scenario.n_ibr = int(n_ibr)
    if n_scp is not None:
        scenario.n_scp = int(n_scp)
    run_dir = Path(out_dir or scenario.output_dir or f"runs/{scenario.name}")
    atmo = scenario.atmosphere()

    done, seed = [], None
    if (run_dir / "run_log.json").exists():
        prior, done, recorded = runio.load_run_state(run_dir)
        seed = ibr.IbrRecord(recorded=recorded,
                             frobenius_deltas=list(prior.get("frobenius_deltas", [])),
                             notes=list(prior.get("notes", [])))
    runio.init_run_dir(run_dir, scenario)

    if done:
        last_idx, e_curr, p_map, _ = done[-1]
        if last_idx >= scenario.n_ibr:
            print(f"{run_dir}: already complete ({last_idx} iterations)")
            return run_dir
        print(f"{run_dir}: resuming after iteration {last_idx}")
        e0 = e_curr
        p0 = [p_map[p.name] for p in scenario.pursuers]
        start = last_idx
    else:
        e0, p0 = ibr.default_guesses(scenario)
        start, seed = 0, None

    def hook(iteration, record):
        runio.save_iteration(run_dir, scenario, iteration, record, atmo)

    record = ibr.ibr_run(scenario, e0, p0, n_ibr=scenario.n_ibr - start,
                         verbose=verbose, iteration_hook=hook,
                         first_iteration=start + 1, record=seed)
    runio.save_summary(run_dir, scenario, record, atmo, complete=True)
    winner = record.winner
    if winner is None:
        print(f"{scenario.name}: no winner recorded in {len(record.iterations)} iterations")
    else:
        print(f"{scenario.name}: recorded {winner.player} from iteration "
              f"{winner.iteration} (T = {winner.trajectory.final_time:.2f} s)")
    return run_dir


def _parse_laws(text):
    laws = tuple(s.strip().lower() for s in text.split(",") if s.strip())
    for law in laws:
        if law not in ("pn", "apn"):
            raise ScenarioError(f"unknown guidance law {law!r}")
    return laws


def cmd_verify(run_dir, laws="pn,apn", ratios="3,4,5", closed_loop=False,
               dt=simulation.DEFAULT_DT) -> dict:
    """Replay every recorded evader against guided pursuer instances."""
    run_dir = Path(run_dir)
    summary, _, recorded = runio.load_run_state(run_dir)
    scenario = parse_scenario(run_dir / "scenario.toml")
    atmo = scenario.atmosphere()
    law_kinds = _parse_laws(laws)
    ratio_vals = tuple(float(r) for r in str(ratios).split(","))

    evaders = [r for r in recorded if r.player == "evader"]
    if not evaders:
        raise MissingArtifact(f"{run_dir}: no recorded evader strategy to verify")
    ver_dir = run_dir / "verify"
    ver_dir.mkdir(exist_ok=True)

    results = {}
    rec = evaders[-1]
    res = simulation.verify_open_loop(
        rec.trajectory, scenario.evader, scenario.pursuers, atmo,
        scenario.asset_position, scenario.params.r_capture,
        laws=law_kinds, ratios=ratio_vals, t_max=scenario.params.t_hi, dt=dt)

    with open(ver_dir / "engagements.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pursuer", "law", "nav_ratio", "min_separation_ft",
                         "t_closest_s", "outcome"])
        for inst, sep, tca in zip(res.instances, res.min_separation, res.t_closest):
            writer.writerow([inst.name, inst.law.kind, f"{inst.law.nav_ratio:g}",
                             f"{sep:.6g}", f"{tca:.6g}", res.outcome])
    runio.write_trajectory_csv(ver_dir / "evader_sim.csv", res.times,
                               res.evader_states, res.evader_inputs, atmo)
    for i, inst in enumerate(res.instances):
        runio.write_trajectory_csv(
            ver_dir / f"pursuer_{inst.name}_{inst.law.kind}{inst.law.nav_ratio:g}.csv",
            res.times, res.pursuer_states[i], np.zeros((len(res.times), 3)), atmo)
    results["open_loop"] = {
        "evader_iteration": rec.iteration,
        "outcome": res.outcome,
        "outcome_time_s": res.outcome_time,
        "asset_miss_ft": res.asset_miss,
        "min_separation_ft": float(res.min_separation.min()) if len(res.instances) else None,
        "instances": len(res.instances),
    }

    if closed_loop:
        scales_spec = scenario.evader
        ltv = transcription.discretize_foh(rec.trajectory, scales_spec, atmo)
        cl = simulation.simulate_closed_loop(
            rec.trajectory, ltv, scenario.evader, scenario.pursuers, atmo,
            scenario.asset_position, scenario.params.r_capture,
            laws=law_kinds, ratios=ratio_vals, t_max=scenario.params.t_hi, dt=dt)
        runio.write_trajectory_csv(ver_dir / "evader_closedloop.csv", cl.times,
                                   cl.evader_states, cl.evader_inputs, atmo)
        results["closed_loop"] = {
            "outcome": cl.outcome,
            "outcome_time_s": cl.outcome_time,
            "asset_miss_ft": cl.asset_miss,
            "min_separation_ft": float(cl.min_separation.min()) if len(cl.instances) else None,
            "max_input_g": float(np.abs(cl.evader_inputs).max() / 32.174),
        }

    (ver_dir / "summary.json").write_text(json.dumps(results, indent=1))
    ol = results["open_loop"]
    print(f"verify: {ol['outcome']} (asset miss {ol['asset_miss_ft']:.1f} ft, "
          f"min separation {ol['min_separation_ft'] if ol['min_separation_ft'] is not None else 'n/a'} ft)")
    return results


def cmd_report(run_dir) -> Path:
    from . import report

    out = report.generate_report(run_dir)
    print(f"report: wrote plots to {out}")
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="assetguard", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run the best-response solve loop")
    p_solve.add_argument("scenario", help="scenario TOML file")
    p_solve.add_argument("--out", default=None, help="run directory")
    p_solve.add_argument("--n-ibr", type=int, default=None)
    p_solve.add_argument("--n-scp", type=int, default=None)
    p_solve.add_argument("--verbose", action="store_true")

    p_verify = sub.add_parser("verify", help="simulate recorded strategies")
    p_verify.add_argument("run_dir")
    p_verify.add_argument("--laws", default="pn,apn")
    p_verify.add_argument("--ratios", default="3,4,5")
    p_verify.add_argument("--closed-loop", action="store_true")
    p_verify.add_argument("--dt", type=float, default=simulation.DEFAULT_DT)

    p_report = sub.add_parser("report", help="render plots from a run directory")
    p_report.add_argument("run_dir")

    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            cmd_solve(args.scenario, args.out, args.n_ibr, args.n_scp, args.verbose)
        elif args.command == "verify":
            cmd_verify(args.run_dir, args.laws, args.ratios, args.closed_loop, args.dt)
        elif args.command == "report":
            cmd_report(args.run_dir)
    except (ScenarioError, MissingArtifact, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
