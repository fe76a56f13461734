"""Lazy infinite binary tree with seeded Bernoulli labels and a query ledger.

Every vertex carries a 64-bit state derived from its parent's state by a
splitmix-style mixer, so labels of arbitrary vertices can be produced on
demand without materialising the tree.  The ledger records which vertices
have been *charged*, and its count is the search time used everywhere else.
"""
from __future__ import annotations

import math
from array import array
from dataclasses import dataclass
from typing import Iterator

import numpy as np

MASK64 = (1 << 64) - 1
MIX_MUL1 = 0xBF58476D1CE4E5B9
MIX_MUL2 = 0x94D049BB133111EB
CHILD_SALT = (0x9E3779B97F4A7C15, 0xD1B54A32D192ED03)
GOLDEN = 0x9E3779B97F4A7C15
DEPTH_CAP = 1 << 16

CHARGED = "charged"
AUDIT = "audit"
_MODES = (CHARGED, AUDIT)


class DepthCapExceeded(ValueError):
    pass


def mix64(x: int) -> int:
    x &= MASK64
    x ^= x >> 30
    x = (x * MIX_MUL1) & MASK64
    x ^= x >> 27
    x = (x * MIX_MUL2) & MASK64
    x ^= x >> 31
    return x


def child_state(state: int, bit: int) -> int:
    return mix64(state ^ CHILD_SALT[bit])


def label_threshold(p: float) -> int:
    """Integer cut-off T with ``(state >> 11) < T`` iff ``u(state) < p``.

    ``p * 2**53`` is exact in binary floating point, so the comparison against
    the 53-bit integer is exact as well.
    """
    return math.ceil(p * 9007199254740992.0)


def uniform(state: int) -> float:
    return (state >> 11) / 9007199254740992.0


# -- vectorised twins (numpy uint64 arithmetic wraps modulo 2**64) ---------

_U30, _U27, _U31, _U11 = (np.uint64(k) for k in (30, 27, 31, 11))
_UM1, _UM2 = np.uint64(MIX_MUL1), np.uint64(MIX_MUL2)
_USALT = np.array(CHILD_SALT, dtype=np.uint64)


def mix64_array(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64)
    x = x ^ (x >> _U30)
    x = x * _UM1
    x = x ^ (x >> _U27)
    x = x * _UM2
    return x ^ (x >> _U31)


def child_state_array(states: np.ndarray, bits) -> np.ndarray:
    return mix64_array(np.asarray(states, dtype=np.uint64) ^ _USALT[np.asarray(bits, dtype=np.intp)])


def labels_from_states(states: np.ndarray, p: float) -> np.ndarray:
    thr = label_threshold(p)
    if thr >= 1 << 53:
        return np.ones(np.shape(states), dtype=np.int8)
    return ((np.asarray(states, dtype=np.uint64) >> _U11) < np.uint64(thr)).astype(np.int8)


@dataclass(frozen=True)
class VertexId:
    """A vertex of T: its depth and the child choices packed most-significant first."""

    depth: int
    bits: int = 0

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        if self.depth > DEPTH_CAP:
            raise DepthCapExceeded(f"depth {self.depth} exceeds cap {DEPTH_CAP}")
        if self.bits < 0 or self.bits >> self.depth:
            raise ValueError(f"bits {self.bits:#x} do not fit depth {self.depth}")

    @classmethod
    def root(cls) -> VertexId:
        return cls(0, 0)

    @classmethod
    def from_str(cls, path: str) -> VertexId:
        if path and set(path) - {"0", "1"}:
            raise ValueError(f"not a bit path: {path!r}")
        return cls(len(path), int(path, 2) if path else 0)

    def __str__(self) -> str:
        return format(self.bits, f"0{self.depth}b") if self.depth else ""

    def __repr__(self) -> str:
        return f"VertexId({str(self)!r})"

    def child(self, bit: int) -> VertexId:
        if bit not in (0, 1):
            raise ValueError("bit must be 0 or 1")
        if self.depth >= DEPTH_CAP:
            raise DepthCapExceeded(f"cannot descend below depth {DEPTH_CAP}")
        return VertexId(self.depth + 1, (self.bits << 1) | bit)

    def bit(self, k: int) -> int:
        """Child choice made at step ``k`` (0-based from the root)."""
        if not 0 <= k < self.depth:
            raise IndexError(k)
        return (self.bits >> (self.depth - 1 - k)) & 1

    def path_bits(self) -> list[int]:
        return [(self.bits >> (self.depth - 1 - k)) & 1 for k in range(self.depth)]

    def ancestor(self, j: int) -> VertexId:
        """The ancestor ``j`` generations up (``j = 0`` is the vertex itself)."""
        if not 0 <= j <= self.depth:
            raise ValueError(f"no ancestor {j} generations above depth {self.depth}")
        return VertexId(self.depth - j, self.bits >> j)

    def parent(self) -> VertexId:
        return self.ancestor(1)

    def is_ancestor_of(self, other: VertexId) -> bool:
        return other.depth >= self.depth and other.bits >> (other.depth - self.depth) == self.bits

    def extend(self, rel_bits: list[int] | tuple[int, ...]) -> VertexId:
        bits = self.bits
        for b in rel_bits:
            bits = (bits << 1) | b
        return VertexId(self.depth + len(rel_bits), bits)


def lex_compare(a: VertexId, b: VertexId) -> int:
    """Lexicographic order of the bit strings; a proper prefix sorts first."""
    m = min(a.depth, b.depth)
    pa = a.bits >> (a.depth - m)
    pb = b.bits >> (b.depth - m)
    if pa != pb:
        return -1 if pa < pb else 1
    return (a.depth > b.depth) - (a.depth < b.depth)


class QueryLedger:
    """Charged-vertex set stored as a binary trie over the tree.

    Node 0 is the root.  Interior trie nodes may exist uncharged (a vertex can
    be charged without its ancestors); ``count`` tracks charged nodes only.
    """

    def __init__(self):
        self._left = array("q", [-1])
        self._right = array("q", [-1])
        self._charged = bytearray(1)
        self.count = 0

    def __len__(self) -> int:
        return self.count

    def child_node(self, node: int, bit: int) -> int:
        side = self._right if bit else self._left
        idx = side[node]
        if idx < 0:
            idx = len(self._charged)
            side[node] = idx
            self._left.append(-1)
            self._right.append(-1)
            self._charged.append(0)
        return idx

    def find_child(self, node: int, bit: int) -> int:
        return (self._right if bit else self._left)[node]

    def find(self, v: VertexId) -> int:
        node = 0
        for k in range(v.depth - 1, -1, -1):
            side = self._right if (v.bits >> k) & 1 else self._left
            node = side[node]
            if node < 0:
                return -1
        return node

    def node_for(self, v: VertexId) -> int:
        node = 0
        for k in range(v.depth - 1, -1, -1):
            node = self.child_node(node, (v.bits >> k) & 1)
        return node

    def charge_node(self, node: int) -> bool:
        if self._charged[node]:
            return False
        self._charged[node] = 1
        self.count += 1
        return True

    def node_charged(self, node: int) -> bool:
        return bool(self._charged[node])

    def charge(self, v: VertexId) -> bool:
        """Charge ``v``; returns False when it was already charged."""
        return self.charge_node(self.node_for(v))

    def __contains__(self, v: VertexId) -> bool:
        node = self.find(v)
        return node >= 0 and bool(self._charged[node])

    def charged_vertices(self) -> list[VertexId]:
        """All charged vertices ordered by (depth, bits)."""
        out = []
        stack = [(0, 0, 0)]
        while stack:
            node, depth, bits = stack.pop()
            if self._charged[node]:
                out.append(VertexId(depth, bits))
            for bit, side in ((0, self._left), (1, self._right)):
                nxt = side[node]
                if nxt >= 0:
                    stack.append((nxt, depth + 1, (bits << 1) | bit))
        out.sort(key=lambda v: (v.depth, v.bits))
        return out


class LabelOracle:
    """Deterministic Bernoulli(p) labels X(v) keyed on a seed, plus a ledger.

    ``p`` is meant to lie in (0, 1); the endpoints are accepted for test
    oracles that force all labels to 0 or 1.
    """

    def __init__(self, seed: int, p: float, ledger: QueryLedger | None = None):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p}")
        self.seed = seed & MASK64
        self.p = float(p)
        self.ledger = ledger if ledger is not None else QueryLedger()
        self.root_state = mix64(self.seed)
        self.threshold = label_threshold(self.p)

    def __repr__(self) -> str:
        return f"LabelOracle(seed={self.seed:#x}, p={self.p!r}, charged={self.ledger.count})"

    def label_of_state(self, state: int) -> int:
        return 1 if (state >> 11) < self.threshold else 0

    def state(self, v: VertexId) -> int:
        s = self.root_state
        for k in range(v.depth - 1, -1, -1):
            s = mix64(s ^ CHILD_SALT[(v.bits >> k) & 1])
        return s

    def path_states(self, v: VertexId) -> list[int]:
        """States of the root-to-``v`` path, root first."""
        s = self.root_state
        out = [s]
        for k in range(v.depth - 1, -1, -1):
            s = mix64(s ^ CHILD_SALT[(v.bits >> k) & 1])
            out.append(s)
        return out

    def uniform(self, v: VertexId) -> float:
        return uniform(self.state(v))

    def label(self, v: VertexId, mode: str = CHARGED) -> int:
        _check_mode(mode)
        if mode == CHARGED:
            self.ledger.charge(v)
        return self.label_of_state(self.state(v))

    def path_labels(self, v: VertexId, mode: str = CHARGED) -> list[int]:
        """Labels X(v_1), ..., X(v_depth) along the path to ``v`` (root excluded)."""
        _check_mode(mode)
        thr = self.threshold
        labels = [1 if (s >> 11) < thr else 0 for s in self.path_states(v)[1:]]
        if mode == CHARGED:
            led = self.ledger
            node = 0
            for k in range(v.depth - 1, -1, -1):
                node = led.child_node(node, (v.bits >> k) & 1)
                led.charge_node(node)
        return labels

    def path_sum(self, v: VertexId, mode: str = CHARGED) -> int:
        """S(v); the root's own label never enters the sum."""
        return sum(self.path_labels(v, mode))


def _check_mode(mode: str) -> None:
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")


def trial_seed(master_seed: int, trial_index: int) -> int:
    return (master_seed + trial_index * GOLDEN) & MASK64


def derive_trial_oracle(master_seed: int, trial_index: int, p: float) -> LabelOracle:
    """Oracle for Monte Carlo trial ``trial_index``; trial 0 is the master tree itself."""
    return LabelOracle(trial_seed(master_seed, trial_index), p)


def sub_seed(seed: int, *tags: int) -> int:
    """Derive an independent stream seed from ``seed`` and integer tags."""
    s = mix64(seed)
    for t in tags:
        s = mix64(s ^ ((t * GOLDEN) & MASK64))
    return s


def labels_at_depth(oracle: LabelOracle, depth: int, indices) -> np.ndarray:
    """Audit-mode labels of the depth-``depth`` vertices whose bit strings are ``indices``."""
    if not 0 <= depth <= 63:
        raise ValueError("vectorised lookup supports depth <= 63")
    idx = np.asarray(indices, dtype=np.uint64)
    states = np.full(idx.shape, oracle.root_state, dtype=np.uint64)
    one = np.uint64(1)
    for k in range(depth - 1, -1, -1):
        bits = ((idx >> np.uint64(k)) & one).astype(np.intp)
        states = child_state_array(states, bits)
    return labels_from_states(states, oracle.p)


def leftmost_path_labels(master_seed: int, p: float, trial_indices) -> Iterator[np.ndarray]:
    """Yield, level by level, labels along the all-zeros branch of each trial tree.

    Each trial tree is the one produced by :func:`derive_trial_oracle`, so the
    stream for trial ``k`` is IID Bernoulli(p) and reproducible.
    """
    states = trial_root_states(master_seed, trial_indices)
    while True:
        states = advance_leftmost(states)
        yield labels_from_states(states, p)


def trial_root_states(master_seed: int, trial_indices) -> np.ndarray:
    k = np.asarray(trial_indices, dtype=np.uint64)
    return mix64_array(np.uint64(master_seed & MASK64) + k * np.uint64(GOLDEN))


def advance_leftmost(states: np.ndarray) -> np.ndarray:
    return mix64_array(states ^ _USALT[0])
