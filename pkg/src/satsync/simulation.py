"""Stacked closed-loop assembly and fixed-step integration.

The full network state is one vector

    z = (x_r | x_1 .. x_N | xc_1 .. xc_N)

holding the reference exosystem, the agent states, and the controller
states. Everything the agents exchange is diffusive, so the closed loop
factors exactly as

    dz/dt = M z + G sat(U z)

with M, G, U assembled once from Kronecker products of the Laplacians
with the realization matrices. ``sat`` is applied componentwise to the
stacked inputs inside every integrator stage -- the model is continuous
time and the saturation lives inside the plant, so there is no
zero-order hold anywhere.

Integration is classical fixed-step RK4. No adaptivity: the right-hand
side is globally Lipschitz (saturation only flattens it), determinism
and bitwise reproducibility matter more here than step-size cleverness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agents import saturate
from .errors import IntegrationError, ValidationError
from .graphs import check_rootset, laplacian
from .protocols import FULL_STATE_KINDS

__all__ = [
    "Scenario",
    "ClosedLoop",
    "TrajectoryRecord",
    "assemble",
    "rk4",
    "integrate",
    "simulate",
    "exosystem_reference",
    "export_trajectory",
    "read_trajectory",
    "DEFAULT_DT",
    "DEFAULT_HORIZON",
    "MAX_STEPS",
]

DEFAULT_DT = 1e-3
DEFAULT_HORIZON = 30.0
# Fixed-step integration; dt above 0.1 would be meaningless for the
# oscillatory dynamics here, and the step count is capped outright.
MAX_DT = 0.1
MAX_STEPS = 10_000_000


@dataclass
class Scenario:
    """One fully resolved simulation: who, over what graph, from where.

    ``x0`` rows are per-agent initial states; ``controller0`` rows are
    per-agent controller initial states (zeros when omitted -- the
    synchronization claim holds for every controller start, zero is
    merely the neutral choice). ``seed`` records how random initial
    conditions were drawn by whoever built the scenario; it is carried
    for the record and not consumed here.
    """

    name: str
    model: object
    graph: object
    protocol: object
    x_r0: np.ndarray
    x0: np.ndarray
    controller0: np.ndarray | None = None
    dt: float = DEFAULT_DT
    horizon: float = DEFAULT_HORIZON
    seed: int | None = None
    record_every: int = 1
    tol: float = 1e-2
    window: float | None = None  # defaults to min(5 s, horizon)

    def __post_init__(self):
        n, n_c = self.model.n, self.protocol.controller_state_dim
        N = self.graph.n
        if not check_rootset(self.graph):
            raise ValidationError(
                "graph fails the root-set reachability condition"
            )
        if not 0 < self.dt <= MAX_DT:
            raise ValidationError(f"dt must be in (0, {MAX_DT}], got {self.dt}")
        if self.horizon < self.dt:
            raise ValidationError(
                f"horizon {self.horizon} shorter than one step {self.dt}"
            )
        if self.horizon / self.dt > MAX_STEPS:
            raise ValidationError(
                f"horizon/dt = {self.horizon / self.dt:.3g} exceeds {MAX_STEPS} steps"
            )
        if self.record_every < 1:
            raise ValidationError(f"record_every must be >= 1, got {self.record_every}")
        if self.window is None:
            self.window = min(5.0, self.horizon)
        if not 0 < self.window <= self.horizon:
            raise ValidationError(
                f"window must be in (0, horizon], got {self.window}"
            )
        self.x_r0 = np.asarray(self.x_r0, dtype=float).reshape(-1)
        if self.x_r0.shape != (n,):
            raise ValidationError(f"x_r0 must have length {n}, got {self.x_r0.shape}")
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.shape != (N, n):
            raise ValidationError(f"x0 must be {N}x{n}, got {self.x0.shape}")
        if self.controller0 is None:
            self.controller0 = np.zeros((N, n_c))
        self.controller0 = np.asarray(self.controller0, dtype=float)
        if self.controller0.shape != (N, n_c):
            raise ValidationError(
                f"controller0 must be {N}x{n_c}, got {self.controller0.shape}"
            )
        for nm in ("x_r0", "x0", "controller0"):
            if not np.all(np.isfinite(getattr(self, nm))):
                raise ValidationError(f"{nm} has non-finite entries")

    @property
    def steps(self):
        return int(round(self.horizon / self.dt))


@dataclass
class ClosedLoop:
    """The factored vector field dz/dt = m_mat z + g_mat sat(u_mat z)."""

    scenario: Scenario
    m_mat: np.ndarray
    g_mat: np.ndarray
    u_mat: np.ndarray

    def vector_field(self, t, z):
        return self.m_mat @ z + self.g_mat @ saturate(self.u_mat @ z)

    def initial_state(self):
        sc = self.scenario
        return np.concatenate(
            [sc.x_r0, sc.x0.reshape(-1), sc.controller0.reshape(-1)]
        )

    def split(self, z):
        """z -> (x_r, agent states N x n, controller states N x n_c)."""
        sc = self.scenario
        n, N = sc.model.n, sc.graph.n
        n_c = sc.protocol.controller_state_dim
        x_r = z[:n]
        x = z[n: n + N * n].reshape(N, n)
        xc = z[n + N * n:].reshape(N, n_c)
        return x_r, x, xc


def assemble(scenario):
    """Build the stacked closed loop for a scenario.

    Block rows of M/G: the exosystem runs open loop; agent rows carry
    the shared dynamics plus input injection; controller rows combine
    the realization matrices with the graph Laplacians -- the expanded
    Laplacian against output errors, the plain one against the
    exchanged signals, and each agent's root flag against the
    root-only terms.
    """
    sc = scenario
    model, graph, proto = sc.model, sc.graph, sc.protocol
    n, m, N = model.n, model.m, graph.n
    n_c = proto.controller_state_dim
    pair = laplacian(graph)
    iota = graph.root_flags.astype(float).reshape(N, 1)

    dim = n + N * n + N * n_c
    r = slice(0, n)
    x = slice(n, n + N * n)
    c = slice(n + N * n, dim)
    eye_n = np.eye(N)

    m_mat = np.zeros((dim, dim))
    m_mat[r, r] = model.a
    m_mat[x, x] = np.kron(eye_n, model.a)

    # zeta_bar = Lbar (x) C applied to agent states minus iota (x) C x_r.
    cc_c = proto.c_c @ model.c
    m_mat[c, x] = np.kron(pair.Lbar, cc_c)
    m_mat[c, r] = -np.kron(iota, cc_c)

    # Controller self-coupling: local dynamics, root leak, and the
    # state part of zeta_hat (exchanged xi is h_c xc plus, for
    # partial-state kinds, the saturated input handled under G).
    d_state = proto.d_c[:, : proto.h_c.shape[0]]
    d_input = proto.d_c[:, proto.h_c.shape[0]:]
    m_mat[c, c] = (
        np.kron(eye_n, proto.a_c)
        - np.kron(np.diagflat(iota), proto.root_state)
        + np.kron(pair.L, d_state @ proto.h_c)
    )

    g_mat = np.zeros((dim, N * m))
    g_mat[x, :] = np.kron(eye_n, model.b)
    g_mat[c, :] = np.kron(eye_n, proto.b_c) + np.kron(
        np.diagflat(iota), proto.root_input
    )
    if d_input.size:
        g_mat[c, :] += np.kron(pair.L, d_input)

    u_mat = np.zeros((N * m, dim))
    u_mat[:, c] = np.kron(eye_n, proto.f_c)

    return ClosedLoop(scenario=sc, m_mat=m_mat, g_mat=g_mat, u_mat=u_mat)


def rk4(f, z0, dt, steps, record_every=1):
    """Classical 4th-order fixed-step integration of dz/dt = f(t, z).

    Returns (times, states) with states[k] the state at times[k]; the
    initial and final states are always recorded, intermediates every
    ``record_every`` steps. Aborts with the offending time if the state
    stops being finite.
    """
    if not 0 < dt <= MAX_DT:
        raise ValidationError(f"dt must be in (0, {MAX_DT}], got {dt}")
    if steps > MAX_STEPS:
        raise ValidationError(f"{steps} steps exceed the {MAX_STEPS} cap")
    z = np.asarray(z0, dtype=float).copy()
    rec_idx = list(range(0, steps + 1, record_every))
    if rec_idx[-1] != steps:
        rec_idx.append(steps)
    times = np.array([k * dt for k in rec_idx])
    states = np.empty((len(rec_idx), z.size))
    states[0] = z
    out = 1
    half = 0.5 * dt
    sixth = dt / 6.0
    for k in range(steps):
        t = k * dt
        k1 = f(t, z)
        k2 = f(t + half, z + half * k1)
        k3 = f(t + half, z + half * k2)
        k4 = f(t + dt, z + dt * k3)
        z = z + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise IntegrationError(
                f"state became non-finite at t = {(k + 1) * dt:.6g}", t=(k + 1) * dt
            )
        if k + 1 == rec_idx[out]:
            states[out] = z
            out += 1
    return times, states


@dataclass
class TrajectoryRecord:
    """Everything recorded along one run, plus the proof coordinates.

    Arrays are indexed [time, agent, component] (x_r: [time,
    component]). ``e`` is the per-agent controller error x_i - x_r -
    chi_i; ``ebar`` (partial-state kinds only) is the observer error in
    network coordinates, the expanded-Laplacian mix of state errors
    minus xhat.
    """

    kind: str
    times: np.ndarray
    x_r: np.ndarray
    x: np.ndarray
    chi: np.ndarray
    xhat: np.ndarray | None
    u: np.ndarray
    sat_u: np.ndarray
    e: np.ndarray
    ebar: np.ndarray | None

    @property
    def n_agents(self):
        return self.x.shape[1]


def integrate(loop, record_every=None):
    """Run a closed loop over its scenario horizon; unpack the record."""
    sc = loop.scenario
    if record_every is None:
        record_every = sc.record_every
    times, states = rk4(
        loop.vector_field, loop.initial_state(), sc.dt, sc.steps, record_every
    )
    n, m, N = sc.model.n, sc.model.m, sc.graph.n
    proto = sc.protocol
    T = len(times)
    x_r = states[:, :n]
    x = states[:, n: n + N * n].reshape(T, N, n)
    xc = states[:, n + N * n:].reshape(T, N, proto.controller_state_dim)
    chi = np.einsum("kj,tij->tik", proto.h_c, xc) if proto.uses_observer else xc
    xhat = xc[:, :, :n] if proto.uses_observer else None
    u = np.einsum("kj,tij->tik", proto.f_c, xc)
    sat_u = saturate(u)
    xtilde = x - x_r[:, None, :]
    e = xtilde - chi
    ebar = None
    if proto.uses_observer:
        lbar = laplacian(sc.graph).Lbar
        ebar = np.einsum("ij,tjk->tik", lbar, xtilde) - xhat
    return TrajectoryRecord(
        kind=proto.kind,
        times=times,
        x_r=x_r,
        x=x,
        chi=chi,
        xhat=xhat,
        u=u,
        sat_u=sat_u,
        e=e,
        ebar=ebar,
    )


def simulate(scenario, record_every=None):
    """assemble + integrate in one call."""
    return integrate(assemble(scenario), record_every=record_every)


def exosystem_reference(a, x_r0, times):
    """Reference trajectory on the same grid the stacked run uses.

    The exosystem inside the stack is autonomous, so integrating it
    alone with the same scheme and steps reproduces the stacked x_r
    column; this is the standalone oracle for it.
    """
    a = np.asarray(a, dtype=float)
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        return np.tile(np.asarray(x_r0, dtype=float), (len(times), 1))
    dt = times[1] - times[0]
    _, states = rk4(lambda t, z: a @ z, x_r0, dt, len(times) - 1)
    return states


def export_trajectory(record, path):
    """Write one row per (time, agent): t, agent, x, chi, xhat?, u,
    sat_u, xr -- comma separated, header first, 17 significant digits.
    """
    T, N, n = record.x.shape
    m = record.u.shape[2]
    cols = ["t", "agent"]
    cols += [f"x{j}" for j in range(n)]
    cols += [f"chi{j}" for j in range(n)]
    if record.xhat is not None:
        cols += [f"xhat{j}" for j in range(n)]
    cols += [f"u{j}" for j in range(m)]
    cols += [f"sat_u{j}" for j in range(m)]
    cols += [f"xr{j}" for j in range(n)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for k in range(T):
            t_txt = _fmt(record.times[k])
            xr_txt = [_fmt(v) for v in record.x_r[k]]
            for i in range(N):
                row = [t_txt, str(i + 1)]
                row += [_fmt(v) for v in record.x[k, i]]
                row += [_fmt(v) for v in record.chi[k, i]]
                if record.xhat is not None:
                    row += [_fmt(v) for v in record.xhat[k, i]]
                row += [_fmt(v) for v in record.u[k, i]]
                row += [_fmt(v) for v in record.sat_u[k, i]]
                row += xr_txt
                fh.write(",".join(row) + "\n")


def read_trajectory(path):
    """Read an exported trajectory back as {column name: 1-D array}."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(header):
        raise ValidationError(
            f"{path}: {len(header)} columns in header, {data.shape[1]} in data"
        )
    return {name: data[:, j] for j, name in enumerate(header)}


def _fmt(v):
    return format(float(v), ".17g")
