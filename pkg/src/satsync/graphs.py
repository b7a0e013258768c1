"""Directed communication graphs, their Laplacians, and the root-set
condition that makes the expanded Laplacian invertible.

Conventions used throughout:

* ``weights[i, j] > 0`` means an edge from node j to node i: information
  flows j -> i, and agent i uses agent j's signals.
* The Laplacian has ``L[i, i] = sum_k weights[i, k]`` and
  ``L[i, j] = -weights[i, j]`` off the diagonal, so every row sums to 0.
* ``root_flags[i] = 1`` marks an agent that additionally measures its own
  output error relative to the reference exosystem. The expanded
  Laplacian is ``Lbar = L + diag(root_flags)``.
* Node indices are 0-based in memory and 1-based in files, matching the
  rest of the package's user-facing output.

A graph is admissible when every node can be reached from some root over
directed edges. That reachability condition is exactly what puts every
eigenvalue of ``Lbar`` in the open right half plane.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .linalg import EIG_TOL

__all__ = [
    "CommGraph",
    "LaplacianPair",
    "laplacian",
    "check_rootset",
    "expanded_spectrum_check",
    "generate_graph",
    "parse_graph",
    "serialize_graph",
    "load_graph",
    "save_graph",
]


@dataclass
class CommGraph:
    """Weighted directed graph plus the set of root agents."""

    n: int
    weights: np.ndarray
    root_flags: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.root_flags = np.asarray(self.root_flags, dtype=int)
        if self.n < 1:
            raise ValidationError(f"graph needs at least one node, got n={self.n}")
        if self.weights.shape != (self.n, self.n):
            raise ValidationError(
                f"weights must be {self.n}x{self.n}, got {self.weights.shape}"
            )
        if not np.all(np.isfinite(self.weights)):
            raise ValidationError("weights has non-finite entries")
        if np.any(self.weights < 0):
            raise ValidationError("edge weights must be nonnegative")
        if np.any(np.diag(self.weights) != 0):
            raise ValidationError("self-loops are not allowed (nonzero diagonal)")
        if self.root_flags.shape != (self.n,):
            raise ValidationError(
                f"root_flags must have length {self.n}, got {self.root_flags.shape}"
            )
        if not np.all(np.isin(self.root_flags, (0, 1))):
            raise ValidationError("root_flags entries must be 0 or 1")

    def roots(self):
        """1-based indices of the root agents."""
        return [int(i) + 1 for i in np.flatnonzero(self.root_flags)]

    def __eq__(self, other):
        if not isinstance(other, CommGraph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.root_flags, other.root_flags)
        )


@dataclass(frozen=True)
class LaplacianPair:
    """Laplacian L and expanded Laplacian Lbar = L + diag(root_flags)."""

    L: np.ndarray
    Lbar: np.ndarray


def laplacian(graph):
    """Build the (row-sum-zero) Laplacian and its expanded variant."""
    w = graph.weights
    L = np.diag(w.sum(axis=1)) - w
    Lbar = L + np.diag(graph.root_flags.astype(float))
    return LaplacianPair(L=L, Lbar=Lbar)


def check_rootset(graph):
    """True iff every node is reachable from some root along directed edges.

    Equivalently: the nodes can be partitioned into directed trees whose
    roots all carry a root flag. Computed by breadth-first search from
    the root set; edge j -> i exists when ``weights[i, j] > 0``.
    """
    reached = graph.root_flags.astype(bool).copy()
    queue = deque(np.flatnonzero(reached))
    w = graph.weights
    while queue:
        j = queue.popleft()
        for i in np.flatnonzero(w[:, j] > 0):
            if not reached[i]:
                reached[i] = True
                queue.append(i)
    return bool(reached.all())


def expanded_spectrum_check(graph, tol=EIG_TOL):
    """True iff every eigenvalue of the expanded Laplacian has Re > tol."""
    pair = laplacian(graph)
    vals = np.linalg.eigvals(pair.Lbar)
    return bool(vals.real.min() > tol)


# Random edge weights are drawn from this dyadic grid in [0.5, 2]: bounded
# away from zero (keeps Lbar well conditioned) and exactly representable,
# so Laplacian row sums cancel to exactly 0 in floating point.
_WEIGHT_GRID = np.arange(8, 33) / 16.0


def generate_graph(kind, n, roots, seed=0, extra_edge_prob=0.2):
    """Generate a named graph family member, deterministically from ``seed``.

    Parameters
    ----------
    kind : str
        ``"path"`` (1 -> 2 -> ... -> n), ``"star"`` (1 -> i for all i), or
        ``"random"`` (random directed trees rooted in the root set, plus
        extra random edges, with random dyadic weights in [0.5, 2]).
    n : int
        Number of nodes.
    roots : iterable of int
        1-based root indices.
    seed : int
        Seed for the random family; ignored by path and star.

    Raises
    ------
    ValidationError
        If the parameters cannot produce an admissible graph (for
        example a path whose root set misses node 1).
    """
    roots = sorted(set(int(r) for r in roots))
    if n < 1:
        raise ValidationError(f"graph needs at least one node, got n={n}")
    if not roots:
        raise ValidationError("root set must not be empty")
    for r in roots:
        if not 1 <= r <= n:
            raise ValidationError(f"root index {r} outside 1..{n}")
    flags = np.zeros(n, dtype=int)
    for r in roots:
        flags[r - 1] = 1
    weights = np.zeros((n, n))
    if kind == "path":
        for i in range(1, n):
            weights[i, i - 1] = 1.0
    elif kind == "star":
        for i in range(1, n):
            weights[i, 0] = 1.0
    elif kind == "random":
        rng = np.random.default_rng(seed)
        attached = set(r - 1 for r in roots)
        for i in range(n):
            if i in attached:
                continue
            parent = int(rng.choice(sorted(attached)))
            weights[i, parent] = float(rng.choice(_WEIGHT_GRID))
            attached.add(i)
        # Sprinkle extra edges; reachability is already guaranteed.
        for i in range(n):
            for j in range(n):
                if i == j or weights[i, j] > 0:
                    continue
                if rng.random() < extra_edge_prob:
                    weights[i, j] = float(rng.choice(_WEIGHT_GRID))
    else:
        raise ValidationError(f"unknown graph kind {kind!r}")
    graph = CommGraph(n=n, weights=weights, root_flags=flags)
    if not check_rootset(graph):
        raise ValidationError(
            f"{kind} graph with roots {roots} leaves unreachable nodes"
        )
    return graph


def parse_graph(data, context="graph"):
    """Build a CommGraph from the dict form used in files and scenarios.

    Expected shape::

        {"n": 3, "edges": [{"from": 1, "to": 2, "weight": 1.0}, ...],
         "roots": [1]}

    Indices are 1-based; ``"from"`` is the information source. ``weight``
    defaults to 1. Unknown keys are rejected with their field path.
    """
    if not isinstance(data, dict):
        raise ValidationError(f"{context}: expected a mapping, got {type(data).__name__}")
    allowed = {"n", "edges", "roots"}
    unknown = set(data) - allowed
    if unknown:
        raise ValidationError(f"{context}: unknown keys {sorted(unknown)}")
    for key in ("n", "edges", "roots"):
        if key not in data:
            raise ValidationError(f"{context}.{key}: missing")
    n = data["n"]
    if not isinstance(n, int) or n < 1:
        raise ValidationError(f"{context}.n: must be a positive integer, got {n!r}")
    weights = np.zeros((n, n))
    if not isinstance(data["edges"], list):
        raise ValidationError(f"{context}.edges: must be a list")
    for k, edge in enumerate(data["edges"]):
        where = f"{context}.edges[{k}]"
        if not isinstance(edge, dict):
            raise ValidationError(f"{where}: expected a mapping")
        unknown = set(edge) - {"from", "to", "weight"}
        if unknown:
            raise ValidationError(f"{where}: unknown keys {sorted(unknown)}")
        try:
            src = int(edge["from"])
            dst = int(edge["to"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{where}: needs integer 'from' and 'to'") from exc
        weight = edge.get("weight", 1.0)
        if not isinstance(weight, (int, float)) or not np.isfinite(weight) or weight <= 0:
            raise ValidationError(f"{where}.weight: must be a positive number, got {weight!r}")
        for name, idx in (("from", src), ("to", dst)):
            if not 1 <= idx <= n:
                raise ValidationError(f"{where}.{name}: index {idx} outside 1..{n}")
        if src == dst:
            raise ValidationError(f"{where}: self-loop on node {src}")
        weights[dst - 1, src - 1] = float(weight)
    if not isinstance(data["roots"], list):
        raise ValidationError(f"{context}.roots: must be a list")
    flags = np.zeros(n, dtype=int)
    for k, r in enumerate(data["roots"]):
        if not isinstance(r, int) or not 1 <= r <= n:
            raise ValidationError(f"{context}.roots[{k}]: index {r!r} outside 1..{n}")
        flags[r - 1] = 1
    return CommGraph(n=n, weights=weights, root_flags=flags)


def serialize_graph(graph):
    """Dict form of a graph; inverse of :func:`parse_graph`.

    Edges are listed in sorted (from, to) order so serialization is
    canonical and round-trips exactly.
    """
    edges = []
    for src in range(graph.n):
        for dst in range(graph.n):
            w = graph.weights[dst, src]
            if w > 0:
                edges.append({"from": src + 1, "to": dst + 1, "weight": float(w)})
    edges.sort(key=lambda e: (e["from"], e["to"]))
    return {"n": graph.n, "edges": edges, "roots": graph.roots()}


def load_graph(path):
    """Read a graph from a JSON file; parse errors carry file context."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_graph(data, context=str(path))


def save_graph(graph, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(serialize_graph(graph), fh, indent=2)
        fh.write("\n")
