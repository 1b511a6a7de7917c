"""Compile an optimal coefficient vector into a switched GHZ-like schedule.

Each half of the superposition visits the labels of one sign class of ``a``
(positive labels on the plus branch, negative ones on the minus branch),
dwelling 2 t |a_x| / ||a||_1 on label x.  Both halves dwell for exactly t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSolution, NoDistinguishingQubit
from .l1 import L1Solution
from .pauli import DiagonalHamiltonian

PLUS, MINUS = "+", "-"
_TIME_TOL = 1e-12


@dataclass(frozen=True)
class SwitchEvent:
    time: float
    branch: str
    src: int
    dst: int


@dataclass(frozen=True)
class Gate:
    """CNOT (control_value=1) or CNOT0 (control_value=0) on qubit indices."""

    control: int
    control_value: int
    target: int

    def apply(self, label: int) -> int:
        if (label >> self.control & 1) == self.control_value:
            return label ^ (1 << self.target)
        return label


@dataclass(frozen=True)
class SwitchDecomposition:
    gates: tuple[Gate, ...]

    def apply(self, label: int) -> int:
        for g in self.gates:
            label = g.apply(label)
        return label

    def permutation(self, n: int) -> np.ndarray:
        """perm[b] is the image of basis label b."""
        labels = np.arange(1 << n)
        for g in self.gates:
            hit = (labels >> g.control & 1) == g.control_value
            labels = np.where(hit, labels ^ (1 << g.target), labels)
        return labels

    def __len__(self):
        return len(self.gates)


@dataclass(frozen=True)
class Protocol:
    n: int
    t: float
    l1: float
    init: tuple[int, int]
    events: tuple[SwitchEvent, ...]
    final: tuple[int, int]

    @property
    def rounds(self) -> int:
        """Number of distinct labels visited, i.e. ||a||_0."""
        return len(self.events) + 2

    def schedule(self, branch: str) -> list[tuple[int, float]]:
        """(label, dwell time) pairs for one branch in visiting order."""
        idx = 0 if branch == PLUS else 1
        label, start, out = self.init[idx], 0.0, []
        for ev in self.events:
            if ev.branch != branch:
                continue
            out.append((label, ev.time - start))
            label, start = ev.dst, ev.time
        out.append((label, self.t - start))
        return out

    def weights(self) -> dict[int, float]:
        """Recover the coefficient vector a from the dwell times."""
        scale = self.l1 / (2 * self.t)
        w = {x: scale * dt for x, dt in self.schedule(PLUS)}
        w.update({y: -scale * dt for y, dt in self.schedule(MINUS)})
        return w

    def switch_times(self) -> list[float]:
        return sorted({ev.time for ev in self.events})


def _enumerate(items: list[tuple[int, float]]) -> list[tuple[int, float]]:
    return sorted(items, key=lambda kv: (-abs(kv[1]), kv[0]))


def compile_protocol(sol: L1Solution, n: int, t: float | None = None) -> Protocol:
    """Build the switching schedule for solution ``sol`` on ``n`` qubits."""
    t = sol.t if t is None else float(t)
    if sol.l1 <= 0 or not sol.support:
        raise DegenerateSolution("a = 0 has no protocol")
    plus = _enumerate([(x, v) for x, v in sol.items() if v > 0])
    minus = _enumerate([(x, v) for x, v in sol.items() if v < 0])
    if not plus or not minus:
        raise DegenerateSolution("both sign classes of a must be nonempty")
    if max(x for x, _ in sol.items()) >= 1 << n:
        raise ValueError(f"labels do not fit in {n} qubits")

    events: list[SwitchEvent] = []
    for branch, seq in ((PLUS, plus), (MINUS, minus)):
        elapsed = 0.0
        for (src, v), (dst, _) in zip(seq, seq[1:]):
            elapsed += 2 * t * abs(v) / sol.l1
            events.append(SwitchEvent(elapsed, branch, src, dst))

    # coincident plus/minus switches share one time stamp; plus goes first
    times = sorted(ev.time for ev in events)
    canon: list[float] = []
    for tm in times:
        if not canon or tm - canon[-1] > _TIME_TOL * t:
            canon.append(tm)
    snapped = []
    for ev in events:
        tm = min(canon, key=lambda c: abs(c - ev.time))
        snapped.append(SwitchEvent(tm, ev.branch, ev.src, ev.dst))
    snapped.sort(key=lambda ev: (ev.time, ev.branch != PLUS))
    return Protocol(n, t, sol.l1, (plus[0][0], minus[0][0]), tuple(snapped),
                    (plus[-1][0], minus[-1][0]))


def predict_phase(proto: Protocol, h_diag: DiagonalHamiltonian) -> float:
    """Relative phase (2 t / ||a||_1) sum_x a_x E(x) for diagonal energies E."""
    energies = h_diag.energies()
    w = proto.weights()
    return 2 * proto.t / proto.l1 * sum(a * energies[x] for x, a in w.items())


def phase_from_q(proto: Protocol, q: float) -> float:
    return 2 * proto.t * q / proto.l1


def decompose_switch(src: int, dst: int, other: int, n: int) -> SwitchDecomposition:
    """CNOT/CNOT0 gates mapping ``src`` to ``dst`` while fixing ``other``.

    Every gate is conditioned on a qubit where the acting branch and the
    other branch currently differ.
    """
    if src == dst:
        return SwitchDecomposition(())
    if src == other or dst == other:
        raise NoDistinguishingQubit("switch would merge the two branches")
    flips = src ^ dst
    distinct = [q for q in range(n) if (src ^ other) >> q & 1]
    if not distinct:
        raise NoDistinguishingQubit("branches share a label")
    stable = [q for q in distinct if not flips >> q & 1]
    if stable:
        c = stable[0]
        return SwitchDecomposition(tuple(
            Gate(c, src >> c & 1, q) for q in range(n) if flips >> q & 1))
    # every distinguishing qubit flips: move the rest first, then flip c
    c = distinct[0]
    gates = [Gate(c, src >> c & 1, q) for q in range(n) if flips >> q & 1 and q != c]
    d = next((q for q in range(n) if q != c and (dst ^ other) >> q & 1), None)
    if d is None:
        raise NoDistinguishingQubit("no qubit left to condition the final flip")
    gates.append(Gate(d, dst >> d & 1, c))
    return SwitchDecomposition(tuple(gates))


@dataclass(frozen=True)
class ParityObservable:
    """O = -i(|x><y| - |y><x|) on the final label pair."""

    plus_label: int
    minus_label: int
    n: int

    def expectation(self, state: np.ndarray) -> float:
        cx, cy = state[self.plus_label], state[self.minus_label]
        return float(2 * np.imag(np.conj(cx) * cy))

    def outcome_probabilities(self, state: np.ndarray) -> tuple[float, float, float]:
        """P(+1), P(-1), P(0); the last is leakage out of span{x, y}."""
        cx, cy = state[self.plus_label], state[self.minus_label]
        p_plus = abs(cx - 1j * cy) ** 2 / 2
        p_minus = abs(cx + 1j * cy) ** 2 / 2
        rest = max(0.0, 1.0 - p_plus - p_minus)
        return p_plus, p_minus, rest

    def dense(self) -> np.ndarray:
        dim = 1 << self.n
        o = np.zeros((dim, dim), dtype=complex)
        o[self.plus_label, self.minus_label] = -1j
        o[self.minus_label, self.plus_label] = 1j
        return o

    @staticmethod
    def probabilities(phase: float) -> tuple[float, float]:
        s = math.sin(phase)
        return (1 + s) / 2, (1 - s) / 2

    @staticmethod
    def mean_and_variance(phase: float) -> tuple[float, float]:
        return math.sin(phase), math.cos(phase) ** 2


def measurement_observable(proto: Protocol) -> ParityObservable:
    return ParityObservable(proto.final[0], proto.final[1], proto.n)


def phase_sensitivity(proto: Protocol, q: float) -> float:
    """Var(O) / |d<O>/dq|^2 for the ideal final state."""
    phi = phase_from_q(proto, q)
    slope = math.cos(phi) * 2 * proto.t / proto.l1
    return math.cos(phi) ** 2 / slope ** 2


def protocol_to_json(proto: Protocol) -> dict:
    return {
        "n": proto.n,
        "t": proto.t,
        "l1": proto.l1,
        "init": list(proto.init),
        "events": [{"time": ev.time, "branch": ev.branch, "from": ev.src, "to": ev.dst}
                   for ev in proto.events],
        "final": list(proto.final),
    }


def protocol_from_json(doc: dict) -> Protocol:
    events = tuple(SwitchEvent(float(e["time"]), e["branch"], int(e["from"]), int(e["to"]))
                   for e in doc["events"])
    return Protocol(int(doc["n"]), float(doc["t"]), float(doc["l1"]),
                    tuple(doc["init"]), events, tuple(doc["final"]))


def ghz_solution(n: int, t: float = 1.0) -> L1Solution:
    """a = (1/2)|0...0> - (1/2)|1...1>, the GHZ protocol for alpha = 1^n."""
    full = (1 << n) - 1
    return L1Solution((0, full), (0.5, -0.5), 1.0, t)

