"""Command-line front end for simulating and auditing the protocols.

Five subcommands share one scenario-document format. ``simulate`` runs
a single closed loop and writes a run directory; ``verify`` audits a
scenario's gains and graph without simulating; ``synthesize`` prints
gains designed from the model alone; ``reproduce`` runs a bundled
preset over both demonstration networks and judges it against the
convergence tolerance; ``sweep`` re-runs a scenario across loop gains
or network sizes.

A run directory always holds exactly the resolved scenario echo(es),
``summary.json``, the trajectory file(s), and ``manifest.json``. The
manifest's ``run`` section is deterministic -- identical invocations
produce identical content, with wall-clock timing kept outside it --
and trajectory and summary files are byte-identical across reruns.
Convergence is data in the report, not an exit status, except for
``reproduce`` which fails when a preset does not converge. Agent
indices in all user-facing output are 1-based.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .analysis import (
    RunRecord,
    export_report,
    gain_margin_runs,
    scale_free_runs,
    sync_metrics,
)
from .errors import IntegrationError, SynthesisError, ValidationError
from .gains import synthesize_gains, verify_gains
from .graphs import check_rootset
from .presets import GRAPH_A, GRAPH_B, preset_names, preset_scenario
from .protocols import build_protocol, compatible_classes
from .scenario import build_scenario, parse_scenario_doc, scenario_echo
from .simulation import simulate

_SWEEP_RECORD_EVERY = 100

_REALIZATION_FIELDS = (
    "a_c",
    "b_c",
    "c_c",
    "d_c",
    "f_c",
    "h_c",
    "root_state",
    "root_input",
    "u_gain",
)


def _controller_digest(realization):
    digest = hashlib.sha256()
    for name in _REALIZATION_FIELDS:
        mat = np.ascontiguousarray(getattr(realization, name), dtype=float)
        digest.update(name.encode())
        digest.update(str(mat.shape).encode())
        digest.update(mat.tobytes())
    return digest.hexdigest()


def _overrides(args):
    paths = {
        "dt": "sim.dt",
        "horizon": "sim.horizon",
        "seed": "sim.seed",
        "record_every": "sim.record_every",
    }
    overrides = {}
    for attr, path in paths.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[path] = value
    # sweep reuses the --rho spelling for its comma-separated list; only the
    # scalar form is a scenario override
    rho = getattr(args, "rho", None)
    if isinstance(rho, float):
        overrides["protocol.rho"] = rho
    return overrides


def _load_parts(args):
    path = args.scenario
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read scenario {path}: {exc}") from None
    return parse_scenario_doc(data, base_dir=os.path.dirname(os.path.abspath(path)), overrides=_overrides(args))


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return path


def _checks_doc(report):
    return [
        {
            "name": check.name,
            "passed": check.passed,
            "margin": check.margin,
            "detail": check.detail,
        }
        for check in report.checks
    ]


def _write_manifest(out_dir, run_section, wall_clock):
    doc = {
        "format": "satsync-manifest",
        "version": 1,
        "artifact_version": __version__,
        "run": run_section,
        "wall_clock_s": wall_clock,
    }
    path = os.path.join(out_dir, "manifest.json")
    tmp = path + ".tmp"
    _write_json(tmp, doc)
    os.replace(tmp, path)
    return path


def _result_doc(report):
    return {
        "converged": report.converged,
        "convergence_time": report.convergence_time,
        "final_max_error": float(report.max_error[-1]),
    }


def _print_checks(report, rootset_ok):
    state = "pass" if rootset_ok else "FAIL"
    print(f"[{state}] rootset_reachable: every node reachable from the root set"
          if rootset_ok else f"[{state}] rootset_reachable: root set does not reach every node")
    for check in report.checks:
        state = "pass" if check.passed else "FAIL"
        print(f"[{state}] {check.name}: margin={check.margin:.6g} ({check.detail})")


def _print_outcome(name, report):
    if report.converged:
        print(f"{name}: converged at t={report.convergence_time:g} s "
              f"(tol {report.tol:g}, window {report.window:g} s)")
    else:
        print(f"{name}: NOT converged within the horizon "
              f"(final max error {report.max_error[-1]:.4g}, tol {report.tol:g})")


def cmd_simulate(args):
    parts = _load_parts(args)
    scenario = build_scenario(parts)
    started = time.perf_counter()
    record = simulate(scenario)
    wall = time.perf_counter() - started
    report = sync_metrics(record, tol=scenario.tol, window=scenario.window)
    gain_report = verify_gains(scenario.model, scenario.protocol.gains, kind=scenario.protocol.kind)
    os.makedirs(args.out, exist_ok=True)
    run = RunRecord(name=scenario.name, report=report, gain_report=gain_report, trajectory=record)
    paths = export_report([run], args.out)
    echo = scenario_echo(scenario)
    paths.append(_write_json(os.path.join(args.out, "scenario.json"), echo))
    outputs = sorted(os.path.basename(p) for p in paths)
    _write_manifest(
        args.out,
        {
            "scenario": echo,
            "gain_checks": _checks_doc(gain_report),
            "outputs": outputs,
            "results": {scenario.name: _result_doc(report)},
        },
        wall,
    )
    _print_outcome(scenario.name, report)
    print(f"run directory: {args.out}")
    return 0


def cmd_verify(args):
    parts = _load_parts(args)
    model_class = parts.model.classification.model_class
    print(f"model class: {model_class.value}")
    compatible = model_class in compatible_classes(parts.kind)
    rootset_ok = check_rootset(parts.graph)
    report = verify_gains(parts.model, parts.gains, kind=parts.kind)
    _print_checks(report, rootset_ok)
    state = "pass" if compatible else "FAIL"
    accepted = "/".join(c.value for c in compatible_classes(parts.kind))
    print(f"[{state}] kind_compatible: {parts.kind} accepts {accepted}")
    ok = rootset_ok and compatible and report.passed
    print("verification " + ("passed" if ok else "FAILED"))
    return 0 if ok else 1


def cmd_synthesize(args):
    parts = _load_parts(args)
    gains = synthesize_gains(parts.model, parts.kind, rho=parts.gains.rho)
    print(f"gains for kind {parts.kind} (rho={gains.rho:g}):")
    for name in ("p", "f", "k", "p_d", "gamma_x"):
        value = getattr(gains, name)
        if value is None:
            continue
        print(f"{name} =")
        for row in np.atleast_2d(value):
            print("  [" + ", ".join(f"{v:.10g}" for v in row) + "]")
    report = verify_gains(parts.model, gains, kind=parts.kind)
    _print_checks(report, check_rootset(parts.graph))
    return 0 if report.passed else 1


def cmd_reproduce(args):
    overrides = _overrides(args)
    os.makedirs(args.out, exist_ok=True)
    runs = []
    echoes = {}
    results = {}
    gain_checks = None
    started = time.perf_counter()
    for label, graph_doc in (("net3", GRAPH_A), ("net10", GRAPH_B)):
        doc = preset_scenario(args.preset)
        doc["graph"] = graph_doc
        doc["name"] = f"{args.preset}-{label}"
        scenario = build_scenario(parse_scenario_doc(doc, overrides=overrides))
        record = simulate(scenario)
        report = sync_metrics(record, tol=scenario.tol, window=scenario.window)
        gain_report = verify_gains(scenario.model, scenario.protocol.gains, kind=scenario.protocol.kind)
        if gain_checks is None:
            gain_checks = _checks_doc(gain_report)
        runs.append(RunRecord(name=scenario.name, report=report, gain_report=gain_report, trajectory=record))
        echoes[f"{scenario.name}-scenario.json"] = scenario_echo(scenario)
        results[scenario.name] = _result_doc(report)
        _print_outcome(scenario.name, report)
    wall = time.perf_counter() - started
    paths = export_report(runs, args.out)
    for file_name, echo in echoes.items():
        paths.append(_write_json(os.path.join(args.out, file_name), echo))
    outputs = sorted(os.path.basename(p) for p in paths)
    _write_manifest(
        args.out,
        {"scenario": list(echoes.values()), "gain_checks": gain_checks, "outputs": outputs, "results": results},
        wall,
    )
    print(f"run directory: {args.out}")
    all_converged = all(run.report.converged for run in runs)
    if not all_converged:
        print("reproduction FAILED: not every run converged", file=sys.stderr)
    return 0 if all_converged else 1


def _parse_float_list(text, flag):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"{flag}: expected a comma-separated number list, got {text!r}") from None
    if not values:
        raise ValidationError(f"{flag}: empty list")
    return values


def cmd_sweep(args):
    parts = _load_parts(args)
    scenario = build_scenario(parts)
    if args.record_every is None:
        # sweeps thin their trajectories by default; full runs stay opt-in
        scenario = replace(scenario, record_every=_SWEEP_RECORD_EVERY)
    os.makedirs(args.out, exist_ok=True)
    started = time.perf_counter()
    if args.rho is not None:
        values = _parse_float_list(args.rho, "--rho")
        runs = gain_margin_runs(scenario, values, jobs=args.jobs)
        labels = [f"rho={v:g}" for v in values]
        digests = [
            _controller_digest(
                build_protocol(scenario.protocol.kind, scenario.model, replace(scenario.protocol.gains, rho=v))
            )
            for v in values
        ]
    else:
        sizes = [int(v) for v in _parse_float_list(args.n, "--n")]
        seed = args.seed if args.seed is not None else (scenario.seed or 0)
        cases = scale_free_runs(
            scenario.model,
            scenario.protocol.kind,
            scenario.protocol.gains,
            sizes,
            seed,
            dt=scenario.dt,
            horizon=scenario.horizon,
            tol=scenario.tol,
            window=scenario.window,
            record_every=scenario.record_every,
            jobs=args.jobs,
        )
        labels = [f"n={case.n_agents}" for case in cases]
        digests = [_controller_digest(case.realization) for case in cases]
        runs = [
            RunRecord(
                name=f"{scenario.name}-n{case.n_agents}",
                report=case.report,
                gain_report=verify_gains(scenario.model, scenario.protocol.gains, kind=scenario.protocol.kind),
                trajectory=case.trajectory,
            )
            for case in cases
        ]
    wall = time.perf_counter() - started

    print(f"{'case':>12}  {'converged':>9}  {'t_conv':>10}  controller")
    results = {}
    for label, run, digest in zip(labels, runs, digests):
        report = run.report
        t_conv = f"{report.convergence_time:g}" if report.converged else "-"
        print(f"{label:>12}  {str(report.converged):>9}  {t_conv:>10}  {digest[:12]}")
        results[run.name] = _result_doc(report)
    paths = export_report(runs, args.out)
    echo = scenario_echo(scenario)
    paths.append(_write_json(os.path.join(args.out, "scenario.json"), echo))
    outputs = sorted(os.path.basename(p) for p in paths)
    _write_manifest(
        args.out,
        {
            "scenario": echo,
            "sweep": {label: digest for label, digest in zip(labels, digests)},
            "outputs": outputs,
            "results": results,
        },
        wall,
    )
    print(f"run directory: {args.out}")
    return 0


def _add_scenario_flags(parser, with_rho=True):
    parser.add_argument("--scenario", required=True, help="path to the scenario document")
    parser.add_argument("--dt", type=float, help="override the integration step")
    parser.add_argument("--horizon", type=float, help="override the simulated horizon (s)")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument("--record-every", dest="record_every", type=int,
                        help="record every k-th step")
    if with_rho:
        parser.add_argument("--rho", type=float, help="override the loop gain")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="satsync",
        description="Synthesize, simulate, and audit saturated synchronization protocols.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario and write a run directory")
    _add_scenario_flags(p)
    p.add_argument("--out", required=True, help="run directory to write")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="audit a scenario's graph and gains without simulating")
    _add_scenario_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("synthesize", help="design and print gains for a scenario's model")
    _add_scenario_flags(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("reproduce", help="run a bundled preset over both demonstration networks")
    p.add_argument("preset", choices=preset_names())
    p.add_argument("--out", required=True, help="run directory to write")
    _add_scenario_flags_reproduce(p)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("sweep", help="re-run a scenario across loop gains or network sizes")
    _add_scenario_flags(p, with_rho=False)
    p.add_argument("--out", required=True, help="run directory to write")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--rho", help="comma-separated loop gains, e.g. 1,10,100")
    group.add_argument("--n", help="comma-separated network sizes, e.g. 3,10,25")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for the sweep")
    p.set_defaults(func=cmd_sweep)
    return parser


def _add_scenario_flags_reproduce(parser):
    parser.add_argument("--dt", type=float, help="override the integration step")
    parser.add_argument("--horizon", type=float, help="override the simulated horizon (s)")
    parser.add_argument("--seed", type=int, help="override the preset seed")
    parser.add_argument("--record-every", dest="record_every", type=int,
                        help="record every k-th step")


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, SynthesisError, IntegrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
