"""Experience storage: uniform ring buffer, prioritized buffer with a
protected demonstration region, n-step bookkeeping and the demo file format."""
from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .env import EnvState
from .errors import ConfigError, ContractViolation, NotReady, VersionMismatch

DEMO_FORMAT_VERSION = 1


def _index(state) -> int:
    return state.encode() if isinstance(state, EnvState) else int(state)


@dataclass(frozen=True)
class Transition:
    """One step of experience plus its n-step summary.

    States are stored by their encoded index. ``n_step_state`` is the state
    reached after ``n_step_horizon`` steps; ``n_step_done`` marks a true
    terminal inside the horizon, in which case nothing is bootstrapped.
    """

    state: int
    action: int
    reward: float
    next_state: int
    terminal: bool = False
    is_demo: bool = False
    n_step_return: float = 0.0
    n_step_state: int = 0
    n_step_horizon: int = 1
    n_step_done: bool = False

    def __post_init__(self):
        object.__setattr__(self, "state", _index(self.state))
        object.__setattr__(self, "next_state", _index(self.next_state))
        object.__setattr__(self, "n_step_state", _index(self.n_step_state))


_COLUMNS = [f.name for f in fields(Transition)]
_DTYPES = {
    "state": np.int64, "action": np.int64, "reward": float, "next_state": np.int64,
    "terminal": bool, "is_demo": bool, "n_step_return": float, "n_step_state": np.int64,
    "n_step_horizon": np.int64, "n_step_done": bool,
}


@dataclass
class Batch:
    """Column view of sampled transitions."""

    state: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_state: np.ndarray
    terminal: np.ndarray
    is_demo: np.ndarray
    n_step_return: np.ndarray
    n_step_state: np.ndarray
    n_step_horizon: np.ndarray
    n_step_done: np.ndarray
    indices: np.ndarray
    probs: np.ndarray
    generations: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None  # importance weights, largest = 1

    def __len__(self):
        return len(self.indices)

    def transitions(self) -> list[Transition]:
        return [Transition(*(getattr(self, c)[k].item() for c in _COLUMNS))
                for k in range(len(self))]


class _Storage:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("buffer capacity must be positive")
        self.capacity = capacity
        self.cols = {c: np.zeros(capacity, dtype=_DTYPES[c]) for c in _COLUMNS}
        self.generation = np.zeros(capacity, dtype=np.int64)

    def write(self, slot: int, tr: Transition) -> None:
        for c in _COLUMNS:
            self.cols[c][slot] = getattr(tr, c)
        self.generation[slot] += 1

    def get(self, slot: int) -> Transition:
        return Transition(*(self.cols[c][slot].item() for c in _COLUMNS))

    def gather(self, idx, probs) -> Batch:
        return Batch(**{c: self.cols[c][idx] for c in _COLUMNS}, indices=idx, probs=probs,
                     generations=self.generation[idx].copy())


class ReplayBuffer:
    """Fixed-capacity ring buffer sampled uniformly with replacement."""

    def __init__(self, capacity: int):
        self._store = _Storage(capacity)
        self.capacity = capacity
        self.size = 0
        self._cursor = 0

    def __len__(self):
        return self.size

    def push(self, tr: Transition) -> None:
        self._store.write(self._cursor, tr)
        self._cursor = (self._cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def __getitem__(self, slot: int) -> Transition:
        if not 0 <= slot < self.size:
            raise IndexError(slot)
        return self._store.get(slot)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self.size < batch_size:
            raise NotReady(f"{self.size} stored, batch needs {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        batch = self._store.gather(idx, np.full(batch_size, 1.0 / self.size))
        batch.weights = np.ones(batch_size)
        return batch


class SumTree:
    """Binary tree of partial sums over a power-of-two number of leaves.

    Internal nodes are recomputed from their children on every update, so
    the root never drifts from the sum of the leaves.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("sum tree capacity must be positive")
        self.capacity = capacity
        self._leaves = 1
        while self._leaves < capacity:
            self._leaves *= 2
        self.depth = self._leaves.bit_length() - 1
        self.tree = np.zeros(2 * self._leaves)

    @property
    def total(self) -> float:
        return float(self.tree[1])

    def leaf_values(self, n: Optional[int] = None) -> np.ndarray:
        n = self.capacity if n is None else n
        return self.tree[self._leaves:self._leaves + n]

    def __getitem__(self, idx):
        return self.tree[self._leaves + np.asarray(idx)]

    def update(self, idx, values) -> None:
        node = self._leaves + np.atleast_1d(np.asarray(idx, dtype=np.int64))
        self.tree[node] = values
        for _ in range(self.depth):
            # duplicate parents just write the same sum twice
            node >>= 1
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1]

    def find(self, mass: np.ndarray) -> np.ndarray:
        """Leaf index holding each prefix-sum position in ``mass``.

        A position equal to a prefix sum goes right, so zero-valued leaves are
        skipped.
        """
        mass = np.array(mass, dtype=float)
        node = np.ones(len(mass), dtype=np.int64)
        for _ in range(self.depth):
            left = self.tree[2 * node]
            right = mass >= left
            mass -= left * right
            node = 2 * node + right
        return node - self._leaves


def importance_weight(prob: float, buffer_size: int, beta: float) -> float:
    """Unnormalised importance-sampling weight ``(1 / (size * P))**beta``."""
    if not 0.0 < prob <= 1.0 or buffer_size < 1 or not 0.0 <= beta <= 1.0:
        raise ContractViolation("need P in (0, 1], size >= 1, beta in [0, 1]")
    return (1.0 / (buffer_size * prob)) ** beta


def importance_weights(probs: np.ndarray, buffer_size: int, beta: float) -> np.ndarray:
    """Batch weights scaled so the largest equals one."""
    w = (1.0 / (buffer_size * np.asarray(probs))) ** beta
    return w / w.max()


class LinearSchedule:
    def __init__(self, start: float, end: float, steps: int):
        self.start, self.end, self.steps = start, end, max(int(steps), 1)

    def __call__(self, t: int) -> float:
        frac = min(max(t, 0) / self.steps, 1.0)
        return self.start + frac * (self.end - self.start)


class PrioritizedBuffer:
    """Proportional prioritized replay with permanently kept demonstrations.

    Slots ``[0, n_demo)`` hold demonstrations and are never overwritten;
    self-generated transitions cycle through the remaining slots. A new
    transition enters at the largest priority seen so far (``eps`` if none).
    """

    def __init__(self, capacity: int, alpha: float = 0.4, eps: float = 1e-3,
                 demo_bonus: float = 1.0):
        if eps <= 0:
            raise ConfigError("priority floor eps must be positive")
        if alpha < 0:
            raise ConfigError("alpha must be non-negative")
        self.capacity = capacity
        self.alpha = alpha
        self.eps = eps
        self.demo_bonus = demo_bonus
        self._store = _Storage(capacity)
        self.tree = SumTree(capacity)
        self.priorities = np.zeros(capacity)
        self.max_priority = 0.0
        self.n_demo = 0
        self.n_self = 0
        self._cursor = 0
        self._sealed = False
        self.stale_updates = 0

    def __len__(self):
        return self.n_demo + self.n_self

    @property
    def size(self) -> int:
        return len(self)

    def load_demonstrations(self, transitions) -> None:
        if self._sealed:
            raise ContractViolation("demonstrations must be loaded before any other push")
        transitions = list(transitions)
        if len(transitions) >= self.capacity:
            raise ConfigError("demonstration set must leave room for self-generated data")
        start = self.n_demo
        for k, tr in enumerate(transitions):
            if not tr.is_demo:
                raise ContractViolation("demonstration transitions must carry is_demo=True")
            self._store.write(start + k, tr)
        idx = np.arange(start, start + len(transitions))
        self._set_priority(idx, np.full(len(idx), self.eps + self.demo_bonus))
        self.n_demo += len(transitions)
        self._cursor = self.n_demo

    def push(self, tr: Transition) -> None:
        if tr.is_demo:
            raise ContractViolation("demo-flagged transitions only enter via load_demonstrations")
        self._sealed = True
        slot = self._cursor
        self._store.write(slot, tr)
        self._set_priority(np.array([slot]), np.array([self.max_priority or self.eps]))
        self._cursor += 1
        if self._cursor == self.capacity:
            self._cursor = self.n_demo
        self.n_self = min(self.n_self + 1, self.capacity - self.n_demo)

    def __getitem__(self, slot: int) -> Transition:
        if not 0 <= slot < len(self):
            raise IndexError(slot)
        return self._store.get(slot)

    def _set_priority(self, idx, prio):
        if len(idx) == 0:
            return
        self.priorities[idx] = prio
        self.tree.update(idx, prio ** self.alpha)
        self.max_priority = max(self.max_priority, float(np.max(prio)))

    def probabilities(self) -> np.ndarray:
        """Sampling probability of every stored slot."""
        leaves = self.tree.leaf_values(len(self))
        return leaves / leaves.sum()

    def sample(self, batch_size: int, rng: np.random.Generator, beta: float = 0.0) -> Batch:
        """Stratified draw with replacement; ``batch.weights`` holds the IS weights."""
        n = len(self)
        if n < batch_size or n == 0:
            raise NotReady(f"{n} stored, batch needs {batch_size}")
        total = self.tree.total
        mass = (np.arange(batch_size) + rng.random(batch_size)) * (total / batch_size)
        idx = np.minimum(self.tree.find(mass), n - 1)
        probs = self.tree[idx] / total
        batch = self._store.gather(idx, probs)
        batch.weights = importance_weights(probs, n, beta)
        return batch

    def update_priorities(self, indices, td_errors, generations=None) -> None:
        indices = np.asarray(indices, dtype=np.int64)
        prio = np.abs(np.asarray(td_errors, dtype=float)) + self.eps
        keep = indices < len(self)
        if generations is not None:
            keep &= self._store.generation[indices] == np.asarray(generations)
        self.stale_updates += int(np.count_nonzero(~keep))
        indices, prio = indices[keep], prio[keep]
        if len(indices) == 0:
            return
        prio = prio + self.demo_bonus * self._store.cols["is_demo"][indices]
        # duplicates in one batch: the last write wins, as in a sequential loop
        _, last = np.unique(indices[::-1], return_index=True)
        last = len(indices) - 1 - last
        self._set_priority(indices[last], prio[last])


def n_step_return(rewards, gamma: float) -> float:
    rewards = list(rewards)
    if not rewards:
        raise ContractViolation("n-step return needs at least one reward")
    total, disc = 0.0, 1.0
    for r in rewards:
        total += disc * r
        disc *= gamma
    return total


class NStepAccumulator:
    """Turns a stream of one-step transitions into transitions carrying
    n-step summaries, emitted ``n - 1`` steps late.

    At an episode cut the pending transitions are flushed with shortened
    horizons and still bootstrap from the last state reached; a true
    terminal stops both the return and the bootstrap.
    """

    def __init__(self, n: int, gamma: float, is_demo: bool = False):
        if n < 1:
            raise ConfigError("n-step horizon must be at least 1")
        self.n, self.gamma, self.is_demo = n, gamma, is_demo
        self._pending: deque = deque()

    def add(self, state, action, reward, next_state, terminal=False) -> list[Transition]:
        self._pending.append((_index(state), int(action), float(reward), _index(next_state),
                              bool(terminal)))
        if terminal:
            return self.flush()
        if len(self._pending) == self.n:
            return [self._emit()]
        return []

    def flush(self) -> list[Transition]:
        out = []
        while self._pending:
            out.append(self._emit())
        return out

    def _emit(self) -> Transition:
        s, a, r, s1, term = self._pending[0]
        window = list(self._pending)
        done = window[-1][4]
        tr = Transition(
            state=s, action=a, reward=r, next_state=s1, terminal=term, is_demo=self.is_demo,
            n_step_return=n_step_return([w[2] for w in window], self.gamma),
            n_step_state=window[-1][3], n_step_horizon=len(window), n_step_done=done,
        )
        self._pending.popleft()
        return tr


@dataclass
class DemoDataset:
    transitions: list
    n: int
    gamma: float

    def __len__(self):
        return len(self.transitions)


def save_demos(dataset: DemoDataset, path) -> None:
    doc = {
        "format_version": DEMO_FORMAT_VERSION,
        "count": len(dataset),
        "n": dataset.n,
        "gamma": dataset.gamma,
        "columns": _COLUMNS,
        "transitions": [[getattr(t, c) for c in _COLUMNS] for t in dataset.transitions],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_demos(path) -> DemoDataset:
    if not os.path.exists(path):
        raise ConfigError(f"no demonstration file at {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise VersionMismatch(f"{path} is not a demonstration file: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format_version") != DEMO_FORMAT_VERSION:
        raise VersionMismatch(f"{path}: expected format_version {DEMO_FORMAT_VERSION}")
    if doc.get("columns") != _COLUMNS:
        raise VersionMismatch(f"{path}: unexpected column layout")
    rows = doc["transitions"]
    if len(rows) != doc["count"]:
        raise ConfigError(f"{path}: header count {doc['count']} but {len(rows)} records")
    return DemoDataset([Transition(*row) for row in rows], n=int(doc["n"]),
                       gamma=float(doc["gamma"]))
