"""Trajectory diagnostics: error metrics, energy certificates, sweeps.

This module answers the questions a simulation run raises. Did the
agents actually synchronize, and when? Does the closed loop admit a
decreasing energy function along the recorded trajectory, computed from
the same matrices the synthesis produced? Does the same controller keep
working when the loop gain is scaled, or when the network is swapped
for a bigger one? Reports are plain data and round-trip through a JSON
summary so downstream tooling never has to re-run a simulation to read
the verdict.

Energy certificates exist for the two families where the function is an
explicit quadratic (plus an input potential for the chained
integrators). The mixed family is deliberately left without one: its
energy argument needs auxiliary solves on a transformed state that the
toolkit does not carry, so mixed runs are judged by metrics and gain
checks alone.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from .agents import ModelClass
from .errors import ValidationError
from .gains import GainCheck, GainReport, design_K_double, solve_P_neutral, verify_gains
from .graphs import CommGraph, check_rootset, generate_graph, laplacian
from .linalg import kron, solve_lyapunov
from .protocols import ProtocolRealization, build_protocol
from .simulation import (
    DEFAULT_DT,
    DEFAULT_HORIZON,
    Scenario,
    TrajectoryRecord,
    export_trajectory,
    simulate,
)

__all__ = [
    "SyncReport",
    "LyapunovCertificate",
    "RunRecord",
    "ScaleFreeCase",
    "sync_metrics",
    "v_trace_violation",
    "lyapunov_certificate_P1",
    "lyapunov_trace_P3",
    "gain_margin_sweep",
    "gain_margin_runs",
    "scale_free_sweep",
    "scale_free_runs",
    "export_report",
    "parse_report",
]


@dataclass(eq=False)
class SyncReport:
    """Per-sample synchronization errors plus the terminal-window verdict.

    ``max_error[k]`` is the worst agent-to-reference distance at sample
    k, ``pairwise_error[k]`` the worst agent-to-agent distance; the
    triangle inequality keeps the latter within twice the former.
    ``converged`` means ``max_error`` stayed strictly below ``tol`` for
    the entire final ``window`` seconds, and ``convergence_time`` is the
    first sample of the maximal all-below suffix (None when not
    converged).
    """

    times: np.ndarray
    max_error: np.ndarray
    pairwise_error: np.ndarray
    converged: bool
    convergence_time: float | None
    tol: float
    window: float

    def __eq__(self, other):
        if not isinstance(other, SyncReport):
            return NotImplemented
        if (self.convergence_time is None) != (other.convergence_time is None):
            return False
        if self.convergence_time is not None and self.convergence_time != other.convergence_time:
            return False
        return (
            self.converged == other.converged
            and self.tol == other.tol
            and self.window == other.window
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.max_error, other.max_error)
            and np.array_equal(self.pairwise_error, other.pairwise_error)
        )


@dataclass(eq=False)
class LyapunovCertificate:
    """Numerically solved energy certificate for the static full-state loop.

    ``p`` weights the agent deviations, ``p_bar`` the tracking-error
    block; ``gamma_term`` is the scalar driving the ``p_bar`` equation
    and ``residual`` the largest eigenvalue of that equation's defect
    (certificate is valid when residual <= 1e-8 * gamma_term).
    ``v_trace`` is the energy sampled along a trajectory, or None when
    no trajectory was supplied.
    """

    p: np.ndarray
    p_bar: np.ndarray
    gamma_term: float
    residual: float
    v_trace: np.ndarray | None


def sync_metrics(traj, tol=1e-2, window=None):
    """Score a trajectory against a tolerance and a terminal window.

    Parameters
    ----------
    traj : TrajectoryRecord
        Recorded closed-loop run.
    tol : float
        Error level that counts as synchronized.
    window : float, optional
        Length of the terminal band (seconds) that must sit strictly
        below ``tol`` for the run to count as converged. Defaults to
        5 s, clipped to the recorded span.

    Returns
    -------
    SyncReport
    """
    times = np.asarray(traj.times, dtype=float)
    if times.size == 0:
        raise ValidationError("trajectory is empty")
    duration = float(times[-1] - times[0])
    if window is None:
        window = min(5.0, duration)
    else:
        window = float(window)
        if not window > 0.0:
            raise ValidationError(f"window must be positive, got {window:g}")
        if window > duration + 1e-12:
            raise ValidationError(
                f"window {window:g} s exceeds the recorded span of {duration:g} s"
            )
    tol = float(tol)
    if not tol > 0.0:
        raise ValidationError(f"tolerance must be positive, got {tol:g}")

    deviation = traj.x - traj.x_r[:, None, :]
    max_error = np.linalg.norm(deviation, axis=-1).max(axis=1)
    pairwise = np.zeros_like(max_error)
    for i, j in combinations(range(traj.x.shape[1]), 2):
        np.maximum(
            pairwise,
            np.linalg.norm(traj.x[:, i, :] - traj.x[:, j, :], axis=-1),
            out=pairwise,
        )

    below = max_error < tol
    in_band = times >= times[-1] - window - 1e-12
    converged = bool(below[in_band].all())
    convergence_time = None
    if converged:
        above = np.nonzero(~below)[0]
        first = 0 if above.size == 0 else int(above[-1]) + 1
        convergence_time = float(times[first])
    return SyncReport(
        times=times,
        max_error=max_error,
        pairwise_error=pairwise,
        converged=converged,
        convergence_time=convergence_time,
        tol=tol,
        window=window,
    )


def v_trace_violation(v_trace, slack=1e-9):
    """Worst step-to-step energy growth beyond the integration allowance.

    Returns max_k of V[k+1] - V[k] - slack*(1 + V[k]); a nonpositive
    value means the trace is nonincreasing up to the allowance. Traces
    with fewer than two samples trivially return 0.0.
    """
    v = np.asarray(v_trace, dtype=float)
    if v.size < 2:
        return 0.0
    growth = v[1:] - v[:-1] - slack * (1.0 + v[:-1])
    return float(growth.max())


def _require_certificate_setup(model, graph, rho, wanted, label):
    if model.classification.model_class is not wanted:
        raise ValidationError(f"certificate requires a {label} model")
    if model.coupling != "full":
        raise ValidationError("certificate requires full-state coupling")
    if not rho > 0.0:
        raise ValidationError(f"rho must be positive, got {rho:g}")
    if not check_rootset(graph):
        raise ValidationError("every node must be reachable from the root set")


def _tracking_block(model, graph):
    """The stable matrix governing the stacked tracking error."""
    eye_n = np.eye(model.n)
    return kron(np.eye(graph.n), model.a) - kron(laplacian(graph).Lbar, eye_n)


def lyapunov_certificate_P1(model, graph, rho, traj=None):
    """Energy certificate for the static protocol on neutrally stable agents.

    Solves the tracking-error weight ``p_bar`` from the stacked-error
    equation with right-hand side -(1 + rho*||b' p||^2) I — an equality
    version of the inequality the stability argument needs, valid
    because the stacked error matrix is Hurwitz whenever the root set
    reaches every node. When ``traj`` is given, the energy

        V = sum_i (x_i - x_r)' p (x_i - x_r)  +  e' p_bar e

    is sampled at every recorded time.
    """
    rho = float(rho)
    _require_certificate_setup(
        model, graph, rho, ModelClass.NEUTRALLY_STABLE, "neutrally stable"
    )
    p = solve_P_neutral(model.a)
    gamma = 1.0 + rho * np.linalg.norm(model.b.T @ p, 2) ** 2
    m_mat = _tracking_block(model, graph)
    total = m_mat.shape[0]
    p_bar = solve_lyapunov(m_mat, gamma * np.eye(total))
    defect = m_mat.T @ p_bar + p_bar @ m_mat + gamma * np.eye(total)
    residual = float(np.linalg.eigvalsh(0.5 * (defect + defect.T)).max())
    v_trace = None
    if traj is not None:
        dev = traj.x - traj.x_r[:, None, :]
        agent_term = np.einsum("tia,ab,tib->t", dev, p, dev)
        e_flat = traj.e.reshape(traj.e.shape[0], -1)
        error_term = np.einsum("ta,ab,tb->t", e_flat, p_bar, e_flat)
        v_trace = agent_term + error_term
    return LyapunovCertificate(
        p=p,
        p_bar=p_bar,
        gamma_term=float(gamma),
        residual=residual,
        v_trace=v_trace,
    )


def _chain_split(a, b):
    """Index the integrator chains: vel[j] is driven by input j, pos[j] by vel[j].

    Only meaningful after the model classified as a chained-integrator
    structure, where b columns and the coupling columns of a are exact
    unit vectors.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    vel = np.array([int(np.argmax(b[:, j])) for j in range(b.shape[1])])
    pos = np.array([int(np.argmax(a[:, v])) for v in vel])
    return pos, vel


def lyapunov_trace_P3(model, graph, rho, traj, k=None):
    """Energy trace for the static protocol on chained integrators.

    The energy combines a velocity-weighted quadratic, a tracking-error
    quadratic, and the stored saturation potential of the inputs:

        V = rho * sum_i v_i' p_d v_i  +  e' p_D e  +  2 sum int_0^u sat

    with p_d read off the position block of ``k`` and p_D solved from
    the stacked-error equation. ``k`` defaults to the canonical
    (-I  -I) feedback; pass the gain actually used by the run when it
    differs. Returns the sampled energy as an array aligned with
    ``traj.times``.
    """
    rho = float(rho)
    _require_certificate_setup(
        model, graph, rho, ModelClass.DOUBLE_INTEGRATOR, "chained-integrator"
    )
    m = model.m
    if k is None:
        k = design_K_double(m)
    k = np.asarray(k, dtype=float)
    if k.shape != (m, 2 * m):
        raise ValidationError(f"gain must have shape {(m, 2 * m)}, got {k.shape}")

    pos, vel = _chain_split(model.a, model.b)
    k_pos = k[:, pos]
    k_vel = k[:, vel]
    p_d = -k_pos
    if np.linalg.eigvalsh(0.5 * (p_d + p_d.T)).min() <= 0.0:
        raise ValidationError("position-block gain must be negative definite")
    eps = -float(np.linalg.eigvalsh(k_vel + k_vel.T).max()) / 2.0
    if eps <= 0.0:
        raise ValidationError("velocity-block gain must be negative definite")

    m_mat = _tracking_block(model, graph)
    gamma = 1.0 + rho / eps * np.linalg.norm(k, 2) ** 2 * np.linalg.norm(m_mat, 2) ** 2
    p_big = solve_lyapunov(m_mat, gamma * np.eye(m_mat.shape[0]))

    dev = traj.x - traj.x_r[:, None, :]
    vel_dev = dev[:, :, vel]
    agent_term = rho * np.einsum("tia,ab,tib->t", vel_dev, p_d, vel_dev)
    e_flat = traj.e.reshape(traj.e.shape[0], -1)
    error_term = np.einsum("ta,ab,tb->t", e_flat, p_big, e_flat)
    # batched form of saturation_potential, one scalar per sample
    mag = np.abs(traj.u)
    psi = np.where(mag <= 1.0, 0.5 * mag * mag, mag - 0.5)
    input_term = 2.0 * psi.sum(axis=(1, 2))
    return agent_term + error_term + input_term


def _gain_margin_case(item):
    scenario, rho, keep_trajectory = item
    realization = scenario.protocol
    gains = replace(realization.gains, rho=rho)
    protocol = build_protocol(realization.kind, scenario.model, gains)
    case = replace(scenario, name=f"{scenario.name}-rho{rho:g}", protocol=protocol)
    record = simulate(case)
    return RunRecord(
        name=case.name,
        report=sync_metrics(record, tol=scenario.tol, window=scenario.window),
        gain_report=verify_gains(scenario.model, gains, kind=realization.kind),
        trajectory=record if keep_trajectory else None,
    )


def gain_margin_runs(scenario, rhos, jobs=1, keep_trajectories=True):
    """Re-run one scenario across loop gains, keeping the full records.

    Every other ingredient — graph, initial conditions, step size — is
    held fixed; only the scalar gain changes, which re-synthesizes the
    realization and re-verifies the gains per run. Records come back in
    the input order regardless of ``jobs``.
    """
    rhos = [float(r) for r in rhos]
    for r in rhos:
        if not r > 0.0:
            raise ValidationError(f"rho must be positive, got {r:g}")
    items = [(scenario, r, keep_trajectories) for r in rhos]
    return _pmap(_gain_margin_case, items, jobs)


def gain_margin_sweep(scenario, rhos, jobs=1):
    """Report-only variant of :func:`gain_margin_runs`: one SyncReport per gain."""
    return [run.report for run in gain_margin_runs(scenario, rhos, jobs, keep_trajectories=False)]


@dataclass(eq=False)
class ScaleFreeCase:
    """One network size of a scale-free sweep: graph, controller, verdict."""

    n_agents: int
    graph: CommGraph
    realization: ProtocolRealization
    report: SyncReport
    trajectory: TrajectoryRecord | None = None


def _scale_free_case(item):
    (
        model,
        kind,
        gains,
        size,
        seed,
        index,
        dt,
        horizon,
        x_r0,
        ic_scale,
        tol,
        window,
        record_every,
        keep_trajectory,
    ) = item
    realization = build_protocol(kind, model, gains)
    graph = generate_graph("random", size, roots=[1], seed=seed + index)
    rng = np.random.default_rng([seed, index, 1])
    x0 = rng.uniform(-ic_scale, ic_scale, size=(size, model.n))
    reference = np.zeros(model.n) if x_r0 is None else np.asarray(x_r0, dtype=float)
    scenario = Scenario(
        name=f"scale-free-n{size}",
        model=model,
        graph=graph,
        protocol=realization,
        x_r0=reference,
        x0=x0,
        dt=dt,
        horizon=horizon,
        record_every=record_every,
        tol=tol,
        window=window,
    )
    record = simulate(scenario)
    return ScaleFreeCase(
        n_agents=size,
        graph=graph,
        realization=realization,
        report=sync_metrics(record, tol=tol, window=window),
        trajectory=record if keep_trajectory else None,
    )


def scale_free_runs(
    model,
    kind,
    gains,
    sizes,
    seed,
    *,
    dt=DEFAULT_DT,
    horizon=DEFAULT_HORIZON,
    x_r0=None,
    ic_scale=1.0,
    tol=1e-2,
    window=None,
    record_every=1,
    jobs=1,
    keep_trajectories=True,
):
    """Run one protocol, synthesized once, over networks of growing size.

    For each entry of ``sizes`` a random rooted graph is generated from
    ``seed`` (offset by position, so the list is reproducible
    element-wise) along with uniform initial conditions in
    [-ic_scale, ic_scale]. The realization is rebuilt per case from the
    same model and gains, which makes the build determinism checkable:
    the controller matrices must come out bit-identical for every size.
    Cases come back in input order.
    """
    sizes = [int(n) for n in sizes]
    for n in sizes:
        if n < 1:
            raise ValidationError(f"network size must be at least 1, got {n}")
    seed = int(seed)
    items = [
        (
            model,
            kind,
            gains,
            n,
            seed,
            idx,
            dt,
            horizon,
            x_r0,
            ic_scale,
            tol,
            window,
            record_every,
            keep_trajectories,
        )
        for idx, n in enumerate(sizes)
    ]
    return _pmap(_scale_free_case, items, jobs)


def scale_free_sweep(
    model,
    kind,
    gains,
    sizes,
    seed,
    *,
    dt=DEFAULT_DT,
    horizon=DEFAULT_HORIZON,
    x_r0=None,
    ic_scale=1.0,
    tol=1e-2,
    window=None,
    jobs=1,
):
    """Trajectory-free variant of :func:`scale_free_runs` for verdicts only."""
    return scale_free_runs(
        model,
        kind,
        gains,
        sizes,
        seed,
        dt=dt,
        horizon=horizon,
        x_r0=x_r0,
        ic_scale=ic_scale,
        tol=tol,
        window=window,
        jobs=jobs,
        keep_trajectories=False,
    )


def _pmap(fn, items, jobs):
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


@dataclass(eq=False)
class RunRecord:
    """One named run bundled for export: verdict, gain audit, trajectory."""

    name: str
    report: SyncReport
    gain_report: GainReport | None = None
    trajectory: TrajectoryRecord | None = None

    def __eq__(self, other):
        # trajectory content lives in its own file; equality covers the summary
        if not isinstance(other, RunRecord):
            return NotImplemented
        return (
            self.name == other.name
            and self.report == other.report
            and self.gain_report == other.gain_report
        )


def _safe_name(name):
    safe = "".join(ch if ch.isalnum() or ch in "._-" else "-" for ch in name)
    return safe or "run"


def export_report(records, path):
    """Write a machine-readable summary plus per-run trajectory files.

    ``path`` is a directory (created if missing). The summary lands in
    ``summary.json``; every record carrying a trajectory additionally
    writes ``<name>.csv`` next to it. Returns the written paths, summary
    first. Floats survive the JSON round trip exactly.
    """
    names = [record.name for record in records]
    if len(set(names)) != len(names):
        raise ValidationError(f"duplicate run names in export: {sorted(names)}")
    os.makedirs(path, exist_ok=True)
    written = []
    runs = []
    for record in records:
        report = record.report
        entry = {
            "name": record.name,
            "tolerance": report.tol,
            "window": report.window,
            "converged": report.converged,
            "convergence_time": report.convergence_time,
            "final_max_error": float(report.max_error[-1]),
            "final_pairwise_error": float(report.pairwise_error[-1]),
            "times": [float(v) for v in report.times],
            "max_error": [float(v) for v in report.max_error],
            "pairwise_error": [float(v) for v in report.pairwise_error],
            "gain_checks": None,
            "trajectory_file": None,
        }
        if record.gain_report is not None:
            entry["gain_checks"] = [
                {
                    "name": check.name,
                    "passed": check.passed,
                    "margin": check.margin,
                    "detail": check.detail,
                }
                for check in record.gain_report.checks
            ]
        if record.trajectory is not None:
            file_name = _safe_name(record.name) + ".csv"
            file_path = os.path.join(path, file_name)
            export_trajectory(record.trajectory, file_path)
            entry["trajectory_file"] = file_name
            written.append(file_path)
        runs.append(entry)
    doc = {"format": "satsync-report", "version": 1, "runs": runs}
    summary_path = os.path.join(path, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return [summary_path] + written


def parse_report(path):
    """Read back an exported summary; trajectories stay on disk.

    ``path`` may be the summary file itself or the directory holding it.
    Returns the list of RunRecord (without trajectories) in file order.
    """
    summary_path = path
    if not str(path).endswith(".json"):
        summary_path = os.path.join(path, "summary.json")
    with open(summary_path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{summary_path}: invalid summary: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != "satsync-report":
        raise ValidationError(f"{summary_path}: not a report summary")
    records = []
    for entry in doc.get("runs", []):
        report = SyncReport(
            times=np.asarray(entry["times"], dtype=float),
            max_error=np.asarray(entry["max_error"], dtype=float),
            pairwise_error=np.asarray(entry["pairwise_error"], dtype=float),
            converged=bool(entry["converged"]),
            convergence_time=entry["convergence_time"],
            tol=float(entry["tolerance"]),
            window=float(entry["window"]),
        )
        gain_report = None
        if entry.get("gain_checks") is not None:
            gain_report = GainReport(
                tuple(
                    GainCheck(
                        name=check["name"],
                        passed=bool(check["passed"]),
                        margin=float(check["margin"]),
                        detail=check["detail"],
                    )
                    for check in entry["gain_checks"]
                )
            )
        records.append(
            RunRecord(name=entry["name"], report=report, gain_report=gain_report)
        )
    return records
