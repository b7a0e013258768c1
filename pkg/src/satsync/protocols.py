"""Per-agent controller realizations for the six protocol kinds, and the
two network signals every agent consumes.

The kinds pair one controller structure with one agent class:

========  ==================  ==========  =======================
kind      agent class         coupling    controller state
========  ==================  ==========  =======================
P1        neutrally stable    full        chi (n)
P2        neutrally stable    partial     (xhat, chi) (2n)
P3        double integrator   full        chi (n)
P4        double integrator   partial     (xhat, chi) (2n)
P5        mixed               full        chi (n)
P6        mixed               partial     (xhat, chi) (2n)
========  ==================  ==========  =======================

``chi`` is a local synchronizer state, ``xhat`` a local observer for
the network output error. Agents exchange ``xi = chi`` (full-state
kinds) or ``xi = (chi, sat(u))`` (partial-state kinds) and consume two
diffusive signals: ``zeta_bar``, the expanded-Laplacian combination of
output errors relative to the reference, and ``zeta_hat``, the plain
Laplacian combination of the exchanged xi.

A realization is built from the agent triple and gains alone -- no
graph data enters, which is what makes one controller serve any number
of agents. The root-flag terms in the dynamics (an extra ``-chi`` leak
and a ``+B sat(u)`` feed on agents that also see the reference) are
stored as separate couplings scaled by each agent's flag at simulation
time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agents import ModelClass, mixed_decompose
from .errors import SynthesisError, ValidationError
from .gains import verify_gains
from .graphs import laplacian

__all__ = [
    "KINDS",
    "FULL_STATE_KINDS",
    "PARTIAL_STATE_KINDS",
    "ProtocolRealization",
    "NetworkSignals",
    "build_protocol",
    "compatible_classes",
    "compute_network_signals",
]

KINDS = ("P1", "P2", "P3", "P4", "P5", "P6")
FULL_STATE_KINDS = ("P1", "P3", "P5")
PARTIAL_STATE_KINDS = ("P2", "P4", "P6")

_COMPATIBLE = {
    "P1": (ModelClass.NEUTRALLY_STABLE,),
    "P2": (ModelClass.NEUTRALLY_STABLE,),
    "P3": (ModelClass.DOUBLE_INTEGRATOR,),
    "P4": (ModelClass.DOUBLE_INTEGRATOR,),
    # The double-integrator class has the mixed structure (every chain
    # has length two), so the mixed-case kinds accept it as well.
    "P5": (ModelClass.MIXED, ModelClass.DOUBLE_INTEGRATOR),
    "P6": (ModelClass.MIXED, ModelClass.DOUBLE_INTEGRATOR),
}


def compatible_classes(kind):
    """The model classes a protocol kind accepts."""
    if kind not in _COMPATIBLE:
        raise ValidationError(f"unknown protocol kind {kind!r}")
    return _COMPATIBLE[kind]


@dataclass(frozen=True)
class ProtocolRealization:
    """One agent's controller, in the standard observer-protocol form:

        d/dt x_c = a_c x_c + b_c sat(u) + c_c zeta_bar + d_c zeta_hat
                   + iota * (root_input @ sat(u) - root_state @ x_c)
        u        = f_c x_c
        xi       = h_c x_c            (full-state kinds)
                   (h_c x_c, sat(u))  (partial-state kinds)

    where iota is the agent's root flag. ``u_gain`` repeats f_c's
    active block (the feedback applied to chi) for diagnostics, and
    ``gains`` retains what the realization was built from.
    """

    kind: str
    rho: float
    state_dim: int
    input_dim: int
    output_dim: int
    controller_state_dim: int
    xi_dim: int
    a_c: np.ndarray
    b_c: np.ndarray
    c_c: np.ndarray
    d_c: np.ndarray
    f_c: np.ndarray
    h_c: np.ndarray
    root_state: np.ndarray
    root_input: np.ndarray
    u_gain: np.ndarray
    gains: object

    @property
    def uses_observer(self):
        return self.kind in PARTIAL_STATE_KINDS


@dataclass(frozen=True)
class NetworkSignals:
    """Stacked diffusive signals, one row per agent.

    ``zeta_hat_1``/``zeta_hat_2`` are the state/input components of
    zeta_hat for partial-state kinds; full-state kinds put the whole
    signal in ``zeta_hat_1`` and leave ``zeta_hat_2`` as None.
    """

    zeta_bar: np.ndarray
    zeta_hat_1: np.ndarray
    zeta_hat_2: np.ndarray | None

    def zeta_hat(self):
        if self.zeta_hat_2 is None:
            return self.zeta_hat_1
        return np.hstack([self.zeta_hat_1, self.zeta_hat_2])


def build_protocol(kind, model, gains, decomp=None):
    """Instantiate one protocol kind for an agent model and gain set.

    Verifies the gains first and refuses incompatible pairings; the
    result depends only on (kind, model, gains), never on the graph.
    """
    if kind not in KINDS:
        raise ValidationError(f"unknown protocol kind {kind!r}")
    if model.model_class not in _COMPATIBLE[kind]:
        names = "/".join(m.value for m in _COMPATIBLE[kind])
        raise ValidationError(
            f"kind {kind} needs a {names} model, got {model.model_class.value!r}"
        )
    if kind in FULL_STATE_KINDS and model.coupling != "full":
        raise ValidationError(f"kind {kind} needs full-state coupling")
    if kind in ("P5", "P6") and decomp is None:
        decomp = mixed_decompose(model.a, model.b, model.c, gamma_x=gains.gamma_x)
    report = verify_gains(model, gains, kind=kind, decomp=decomp)
    if not report.passed:
        failed = "; ".join(f"{c.name}: {c.detail}" for c in report.failures())
        raise SynthesisError(f"gains fail verification for {kind}: {failed}")

    n, m, q_out = model.n, model.m, model.q_out
    if kind in ("P1", "P2"):
        u_gain = -gains.rho * model.b.T @ gains.p
    elif kind in ("P3", "P4"):
        u_gain = gains.rho * gains.k
    else:
        u_gain = gains.rho * gains.k @ decomp.gamma_x

    if kind in FULL_STATE_KINDS:
        a_c = model.a.copy()
        b_c = model.b.copy()
        c_c = np.eye(n)
        d_c = -np.eye(n)
        f_c = u_gain
        h_c = np.eye(n)
        root_state = np.eye(n)
        root_input = np.zeros((n, m))
        n_c, xi_dim = n, n
    else:
        a_c = np.zeros((2 * n, 2 * n))
        a_c[:n, :n] = model.a - gains.f @ model.c
        a_c[n:, :n] = np.eye(n)
        a_c[n:, n:] = model.a
        b_c = np.zeros((2 * n, m))
        b_c[n:, :] = model.b
        c_c = np.zeros((2 * n, q_out))
        c_c[:n, :] = gains.f
        d_c = np.zeros((2 * n, n + m))
        d_c[:n, n:] = model.b
        d_c[n:, :n] = -np.eye(n)
        f_c = np.zeros((m, 2 * n))
        f_c[:, n:] = u_gain
        h_c = np.zeros((n, 2 * n))
        h_c[:, n:] = np.eye(n)
        root_state = np.zeros((2 * n, 2 * n))
        root_state[n:, n:] = np.eye(n)
        root_input = np.zeros((2 * n, m))
        root_input[:n, :] = model.b
        n_c, xi_dim = 2 * n, n + m

    return ProtocolRealization(
        kind=kind,
        rho=gains.rho,
        state_dim=n,
        input_dim=m,
        output_dim=q_out,
        controller_state_dim=n_c,
        xi_dim=xi_dim,
        a_c=a_c,
        b_c=b_c,
        c_c=c_c,
        d_c=d_c,
        f_c=f_c,
        h_c=h_c,
        root_state=root_state,
        root_input=root_input,
        u_gain=u_gain,
        gains=gains,
    )


def compute_network_signals(kind, graph, y, y_r, xi, state_dim=None):
    """Evaluate the two diffusive signals for a stacked network snapshot.

    ``y`` is (N, q_out) stacked agent outputs, ``y_r`` the reference
    output, ``xi`` the (N, xi_dim) stacked exchanged values. For
    partial-state kinds ``state_dim`` (the agent state dimension n)
    locates the split of zeta_hat into its state and input components.

    zeta_bar row i is the expanded-Laplacian weighting of the output
    errors, sum_j lbar_ij (y_j - y_r) -- identical to the neighbor-sum
    form sum_j a_ij (y_i - y_j) + iota_i (y_i - y_r). zeta_hat row i is
    the plain-Laplacian weighting sum_j a_ij (xi_i - xi_j).
    """
    if kind not in KINDS:
        raise ValidationError(f"unknown protocol kind {kind!r}")
    y = np.atleast_2d(np.asarray(y, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    y_r = np.asarray(y_r, dtype=float).reshape(-1)
    if y.shape[0] != graph.n or xi.shape[0] != graph.n:
        raise ValidationError(
            f"need one row per agent: y has {y.shape[0]}, xi has {xi.shape[0]}, "
            f"graph has {graph.n}"
        )
    if y.shape[1] != y_r.shape[0]:
        raise ValidationError(
            f"y rows have length {y.shape[1]} but y_r has length {y_r.shape[0]}"
        )
    pair = laplacian(graph)
    zeta_bar = pair.Lbar @ (y - y_r)
    zeta_hat = pair.L @ xi
    if kind in FULL_STATE_KINDS:
        return NetworkSignals(zeta_bar=zeta_bar, zeta_hat_1=zeta_hat, zeta_hat_2=None)
    if state_dim is None:
        raise ValidationError("partial-state kinds need state_dim to split zeta_hat")
    if not 0 < state_dim < xi.shape[1]:
        raise ValidationError(
            f"state_dim {state_dim} does not split xi of width {xi.shape[1]}"
        )
    return NetworkSignals(
        zeta_bar=zeta_bar,
        zeta_hat_1=zeta_hat[:, :state_dim],
        zeta_hat_2=zeta_hat[:, state_dim:],
    )
