# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT

"""Matrix-weighted signed networks.

Edges carry symmetric d×d weights that must be positive/negative (semi-)definite. A
network is structurally balanced when a ±1 gauge exists that makes every weight
positive (semi-)definite, and the Laplacian helpers below build the dn×dn matrices
that the control laws and the analysis work with.

Nodes are 0-based throughout this module. Error messages name them 1-based, to match
scenario files.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Iterator, Mapping, Sequence
from typing import Any

import networkx as nx
import numpy as np
import scipy.linalg
from strenum import StrEnum

from matrix_consensus.core.utils import all_or_none
from matrix_consensus.log_utils import logger


DEFAULT_WEIGHT_TOL = 1e-6
DEFAULT_NULLSPACE_TOL = 1e-8

EdgeKey = tuple[int, int]


class IndefiniteWeightError(Exception):
    pass


class StructurallyImbalancedError(Exception):
    pass


class Definiteness(StrEnum):
    pos_def = "pos_def"
    pos_semi_def = "pos_semi_def"
    neg_def = "neg_def"
    neg_semi_def = "neg_semi_def"
    zero = "zero"

    @property
    def sign(self) -> int:
        cls = self.__class__
        if self in [cls.pos_def, cls.pos_semi_def]:
            return 1
        if self in [cls.neg_def, cls.neg_semi_def]:
            return -1
        return 0


def classify_definiteness(M: Any, tol: float = DEFAULT_WEIGHT_TOL) -> Definiteness:
    """Classify a symmetric matrix by the signs of its eigenvalues.

    `tol` is relative: eigenvalues within `tol * max(spectral_radius, 1)` of zero count
    as zero.

    Raises:
        `IndefiniteWeightError`: if the spectrum has both signs beyond the threshold.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"`M` must be a square matrix; got shape {M.shape}.")
    if tol < 0:
        raise ValueError("`tol` must be nonnegative.")

    eig = scipy.linalg.eigvalsh(M)
    threshold = tol * max(float(np.max(np.abs(eig), initial=0.0)), 1.0)
    lo, hi = eig[0], eig[-1]

    if np.all(np.abs(eig) <= threshold):
        return Definiteness.zero
    if lo > threshold:
        return Definiteness.pos_def
    if lo >= -threshold:
        return Definiteness.pos_semi_def
    if hi < -threshold:
        return Definiteness.neg_def
    if hi <= threshold:
        return Definiteness.neg_semi_def

    raise IndefiniteWeightError(
        f"Matrix is indefinite: eigenvalues range over [{lo:.6g}, {hi:.6g}] with "
        f"threshold {threshold:.3g}."
    )


@dataclasses.dataclass(frozen=True, eq=False)
class WeightMatrix:
    entries: np.ndarray
    definiteness: Definiteness
    tol: float = DEFAULT_WEIGHT_TOL

    @classmethod
    def from_entries(
        cls, entries: Any, tol: float = DEFAULT_WEIGHT_TOL
    ) -> WeightMatrix:
        M = np.array(entries, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"`entries` must be a square matrix; got shape {M.shape}.")
        scale = float(np.max(np.abs(M), initial=0.0))
        if np.max(np.abs(M - M.T), initial=0.0) > 1e-12 * scale:
            raise ValueError("`entries` must be symmetric.")

        definiteness = classify_definiteness(M, tol)
        M.setflags(write=False)
        return cls(M, definiteness, tol)

    @classmethod
    def scalar(cls, a: float, d: int, tol: float = DEFAULT_WEIGHT_TOL) -> WeightMatrix:
        """A scalar-weighted edge `a·I_d`."""
        return cls.from_entries(a * np.eye(d), tol)

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def sign(self) -> int:
        return self.definiteness.sign

    def is_scalar(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries[0, 0] * np.eye(self.d)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightMatrix):
            return NotImplemented
        return (
            self.definiteness == other.definiteness
            and self.tol == other.tol
            and np.array_equal(self.entries, other.entries)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"WeightMatrix({self.definiteness}, d={self.d})"


def abs_weight(W: WeightMatrix) -> np.ndarray:
    """|W|: the entries flipped to the positive (semi-)definite side."""
    if W.sign == 0:
        return np.zeros_like(W.entries)
    return W.sign * W.entries


def lambda_max_abs(W: WeightMatrix) -> float:
    """Largest eigenvalue of |W|."""
    if W.sign == 0:
        return 0.0
    if W.is_scalar():
        return abs(float(W.entries[0, 0]))

    lam = max(float(scipy.linalg.eigvalsh(abs_weight(W))[-1]), 0.0)

    # For a symmetric matrix the spectral norm is the spectral radius.
    radius = float(np.linalg.norm(W.entries, 2))
    if abs(lam - radius) > 1e-10 * max(radius, 1.0):
        logger.warning(
            f"Eigen cross-check disagreement for {W!r}: eigvalsh={lam!r}, "
            f"norm={radius!r}"
        )
    return lam


class MatrixWeightedNetwork:
    """`n` agents with states in R^d, coupled by matrix-weighted undirected edges.

    Optionally carries leader edges `(node, input_index) -> B_il` and the input
    vectors `w_l`. Inputs must be homogeneous, ie. all `w_l` are equal.

    Zero-class weights are dropped, they are not edges.
    """

    def __init__(
        self,
        n: int,
        d: int,
        edges: Mapping[EdgeKey, WeightMatrix],
        leader_edges: Mapping[EdgeKey, WeightMatrix] | None = None,
        inputs: Sequence[Sequence[float]] | np.ndarray | None = None,
    ):
        if n < 1 or d < 1:
            raise ValueError("`n` and `d` must both be positive.")
        all_or_none(leader_edges, inputs, err_hint="`leader_edges` and `inputs`")

        self._n = n
        self._d = d
        self._edges: dict[EdgeKey, WeightMatrix] = {}
        self._adjacency: dict[int, list[int]] = {i: [] for i in range(n)}

        for (i, j), W in sorted(edges.items()):
            self._check_node(i)
            self._check_node(j)
            if i == j:
                raise ValueError(f"Self-loop on node {i + 1} is not allowed.")
            self._check_dim(W, f"edge ({i + 1}, {j + 1})")
            key = (min(i, j), max(i, j))
            if key in self._edges:
                raise ValueError(f"Duplicate edge ({key[0] + 1}, {key[1] + 1}).")
            if W.definiteness == Definiteness.zero:
                logger.debug(f"Dropping zero-class edge ({i + 1}, {j + 1})")
                continue
            self._edges[key] = W

        for i, j in self._edges:
            self._adjacency[i].append(j)
            self._adjacency[j].append(i)
        for nbrs in self._adjacency.values():
            nbrs.sort()

        self._inputs: np.ndarray | None = None
        self._leader_edges: dict[EdgeKey, WeightMatrix] | None = None
        if inputs is not None and leader_edges is not None:
            self._init_leaders(leader_edges, inputs)

    @property
    def n(self) -> int:
        return self._n

    @property
    def d(self) -> int:
        return self._d

    @property
    def edges(self) -> dict[EdgeKey, WeightMatrix]:
        return dict(self._edges)

    @property
    def leader_edges(self) -> dict[EdgeKey, WeightMatrix]:
        return dict(self._leader_edges or {})

    @property
    def inputs(self) -> np.ndarray | None:
        return None if self._inputs is None else self._inputs.copy()

    @property
    def has_leaders(self) -> bool:
        return self._leader_edges is not None

    @property
    def m(self) -> int:
        return 0 if self._inputs is None else self._inputs.shape[0]

    @property
    def w0(self) -> np.ndarray:
        """The common input vector. Only valid when leaders are configured."""
        if self._inputs is None:
            raise ValueError("Network has no leader inputs.")
        return self._inputs[0].copy()

    def neighbors(self, i: int) -> list[int]:
        return list(self._adjacency[i])

    def edge(self, i: int, j: int) -> WeightMatrix | None:
        return self._edges.get((min(i, j), max(i, j)))

    def iter_edges(self) -> Iterator[tuple[int, int, WeightMatrix]]:
        for (i, j), W in self._edges.items():
            yield i, j, W

    def leader_edges_of(self, i: int) -> list[tuple[int, WeightMatrix]]:
        leader_edges = self._leader_edges or {}
        return [(inp, W) for (k, inp), W in leader_edges.items() if k == i]

    def without_leaders(self) -> MatrixWeightedNetwork:
        return MatrixWeightedNetwork(self._n, self._d, self._edges)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self._n))
        for i, j, W in self.iter_edges():
            graph.add_edge(i, j, sign=W.sign, weight=W.entries)
        return graph

    def as_dict(self) -> dict:
        state: dict[str, Any] = {
            "n": self._n,
            "d": self._d,
            "edges": [
                {
                    "i": i,
                    "j": j,
                    "matrix": W.entries.tolist(),
                    "definiteness": str(W.definiteness),
                }
                for i, j, W in self.iter_edges()
            ],
        }
        if self._leader_edges is not None and self._inputs is not None:
            state["inputs"] = self._inputs.tolist()
            state["leader_edges"] = [
                {
                    "node": i,
                    "input": inp,
                    "matrix": W.entries.tolist(),
                    "definiteness": str(W.definiteness),
                }
                for (i, inp), W in self._leader_edges.items()
            ]
        return state

    def __repr__(self) -> str:
        return (
            f"MatrixWeightedNetwork(n={self._n}, d={self._d}, "
            f"edges={len(self._edges)}, inputs={self.m})"
        )

    def _init_leaders(
        self,
        leader_edges: Mapping[EdgeKey, WeightMatrix],
        inputs: Sequence[Sequence[float]] | np.ndarray,
    ):
        w = np.array(inputs, dtype=float)
        if w.ndim != 2 or w.shape[1] != self._d or w.shape[0] < 1:
            raise ValueError(
                f"`inputs` must be a non-empty list of length-{self._d} vectors."
            )
        if not np.all(w == w[0]):
            raise ValueError("Leader inputs must be homogeneous (all `w_l` equal).")
        w.setflags(write=False)
        self._inputs = w

        self._leader_edges = {}
        for (i, inp), B in sorted(leader_edges.items()):
            self._check_node(i)
            if not (0 <= inp < w.shape[0]):
                raise ValueError(
                    f"Leader edge on node {i + 1} names unknown input {inp + 1}."
                )
            self._check_dim(B, f"leader edge ({i + 1}, w{inp + 1})")
            if B.definiteness == Definiteness.zero:
                logger.debug(f"Dropping zero-class leader edge ({i + 1}, w{inp + 1})")
                continue
            self._leader_edges[(i, inp)] = B

    def _check_node(self, i: int):
        if not (0 <= i < self._n):
            raise ValueError(f"Node index {i + 1} is out of range 1..{self._n}.")

    def _check_dim(self, W: WeightMatrix, label: str):
        if W.d != self._d:
            raise ValueError(
                f"Weight on {label} is {W.d}×{W.d}; expected d={self._d}."
            )


@dataclasses.dataclass(frozen=True)
class Gauge:
    signs: tuple[int, ...]

    def __post_init__(self):
        if any(s not in (1, -1) for s in self.signs):
            raise ValueError("Gauge `signs` must all be +1 or -1.")

    @property
    def n(self) -> int:
        return len(self.signs)

    def as_array(self) -> np.ndarray:
        return np.array(self.signs, dtype=float)

    def partition(self) -> tuple[list[int], list[int]]:
        positive = [i for i, s in enumerate(self.signs) if s == 1]
        negative = [i for i, s in enumerate(self.signs) if s == -1]
        return (positive, negative)

    def flipped(self) -> Gauge:
        return Gauge(tuple(-s for s in self.signs))

    def certifies(self, G: MatrixWeightedNetwork) -> bool:
        if self.n != G.n:
            return False
        return all(
            self.signs[i] * self.signs[j] == W.sign for i, j, W in G.iter_edges()
        )


def gauge_matrix(gauge: Gauge, d: int) -> np.ndarray:
    """D*: block-diagonal with ±I_d blocks."""
    return np.kron(np.diag(gauge.as_array()), np.eye(d))


def degree_matrix(G: MatrixWeightedNetwork) -> np.ndarray:
    blocks = [np.zeros((G.d, G.d)) for _ in range(G.n)]
    for i, j, W in G.iter_edges():
        absW = abs_weight(W)
        blocks[i] += absW
        blocks[j] += absW
    return scipy.linalg.block_diag(*blocks)


def adjacency_matrix(G: MatrixWeightedNetwork) -> np.ndarray:
    d = G.d
    A = np.zeros((G.n * d, G.n * d))
    for i, j, W in G.iter_edges():
        A[i * d : (i + 1) * d, j * d : (j + 1) * d] = W.entries
        A[j * d : (j + 1) * d, i * d : (i + 1) * d] = W.entries
    return A


def laplacian(G: MatrixWeightedNetwork) -> np.ndarray:
    """L = D - A."""
    return degree_matrix(G) - adjacency_matrix(G)


def leader_degree_blocks(G: MatrixWeightedNetwork) -> list[np.ndarray]:
    blocks = [np.zeros((G.d, G.d)) for _ in range(G.n)]
    for (i, _), B in G.leader_edges.items():
        blocks[i] += abs_weight(B)
    return blocks


def leader_laplacian(G: MatrixWeightedNetwork) -> np.ndarray:
    """L_B = L + blkdiag(sum_l |B_il|). Equals L when there are no leader edges."""
    return laplacian(G) + scipy.linalg.block_diag(*leader_degree_blocks(G))


def leader_input_matrix(G: MatrixWeightedNetwork) -> np.ndarray:
    """The nd×md matrix with blocks B_il, so that the stacked leader-follower control
    is `-L_B x + B w`.
    """
    d = G.d
    B = np.zeros((G.n * d, max(G.m, 0) * d))
    for (i, inp), W in G.leader_edges.items():
        B[i * d : (i + 1) * d, inp * d : (inp + 1) * d] = W.entries
    return B


def _two_color(graph: nx.Graph, roots: list[Any]) -> dict[Any, int]:
    signs: dict[Any, int] = {}
    for root in roots:
        if root in signs:
            continue
        signs[root] = 1
        for u, v in nx.bfs_edges(graph, root):
            signs[v] = signs[u] * graph.edges[u, v]["sign"]

    for u, v, sign in graph.edges(data="sign"):
        if signs[u] * signs[v] != sign:
            raise StructurallyImbalancedError(
                f"Sign-inconsistent cycle through edge ({_label(u)}, {_label(v)})."
            )
    return signs


def _label(node: Any) -> str:
    return str(node + 1) if isinstance(node, int) else str(node)


def find_gauge(G: MatrixWeightedNetwork) -> Gauge:
    """2-color each connected component by edge signs, rooting every component at its
    lowest-index node with sign +1.

    Raises:
        `StructurallyImbalancedError`: if no bipartition agrees with all edge signs.
    """
    graph = G.to_networkx()
    roots = sorted(min(c) for c in nx.connected_components(graph))
    signs = _two_color(graph, roots)
    return Gauge(tuple(signs[i] for i in range(G.n)))


def find_leader_gauge(G: MatrixWeightedNetwork) -> Gauge:
    """Like `find_gauge()`, but on the augmented graph where the (homogeneous) inputs
    are merged into a single extra node `w0` of sign +1. The result satisfies
    `sgn(B_il) = signs[i]` for every leader edge, so agent `i` tracks `signs[i]·w0`.
    """
    if not G.has_leaders:
        raise ValueError("`G` has no leader edges or inputs.")

    graph = G.to_networkx()
    w0_node = "w0"
    graph.add_node(w0_node)
    for (i, inp), B in G.leader_edges.items():
        if graph.has_edge(i, w0_node) and graph.edges[i, w0_node]["sign"] != B.sign:
            raise StructurallyImbalancedError(
                f"Leader edges on node {i + 1} disagree in sign (input {inp + 1})."
            )
        graph.add_edge(i, w0_node, sign=B.sign)

    roots: list[Any] = [w0_node]
    roots += sorted(min(c) for c in nx.connected_components(graph) if w0_node not in c)
    signs = _two_color(graph, roots)
    return Gauge(tuple(signs[i] for i in range(G.n)))


def check_assumption1(
    G: MatrixWeightedNetwork, gauge: Gauge, tol: float = DEFAULT_NULLSPACE_TOL
) -> bool:
    """Whether null(D* L D*) is exactly range(1_n ⊗ I_d).

    Checked numerically: D* L D* must be PSD, have exactly `d` near-zero eigenvalues,
    and the span of their eigenvectors must coincide with range(1_n ⊗ I_d) up to
    principal angles of `tol`. Near-zero is relative to the largest eigenvalue.
    """
    if not gauge.certifies(G):
        raise ValueError("`gauge` does not certify structural balance of `G`.")

    Dg = gauge_matrix(gauge, G.d)
    M = Dg @ laplacian(G) @ Dg
    eig, vecs = scipy.linalg.eigh(M)
    threshold = tol * max(float(np.max(np.abs(eig))), 1.0)

    if eig[0] < -threshold:
        logger.info(f"Gauged Laplacian is not PSD: λ_min={eig[0]:.3g}")
        return False

    null_mask = np.abs(eig) <= threshold
    null_dim = int(np.count_nonzero(null_mask))
    if null_dim != G.d:
        logger.info(f"Gauged Laplacian null space has dimension {null_dim}, not {G.d}")
        return False

    consensus_space = np.kron(np.ones((G.n, 1)), np.eye(G.d))
    angles = scipy.linalg.subspace_angles(vecs[:, null_mask], consensus_space)
    return bool(np.max(angles) <= max(tol, 1e-10))


def check_assumption2(
    G: MatrixWeightedNetwork, tol: float = DEFAULT_WEIGHT_TOL
) -> bool:
    """Whether the augmented graph (inputs as an extra node) is structurally balanced
    and sum_i sum_l |B_il| is positive definite.
    """
    if not G.has_leaders:
        raise ValueError("`G` has no leader edges or inputs.")

    try:
        find_leader_gauge(G)
    except StructurallyImbalancedError as err:
        logger.info(f"Augmented leader graph is imbalanced: {err}")
        return False

    total = np.zeros((G.d, G.d))
    for B in G.leader_edges.values():
        total += abs_weight(B)
    try:
        definiteness = classify_definiteness(total, tol)
    except IndefiniteWeightError:
        return False
    return definiteness == Definiteness.pos_def
