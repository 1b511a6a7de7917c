"""Simulation back-ends: branch phase tracking, dense evolution and
randomised stabilizer-conjugated Trotterization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import LabelCollision, SizeExceeded, StepTooCoarse
from .pauli import (DENSE_LIMIT, DiagonalHamiltonian, InteractingHamiltonian, check_dense,
                    dense_matrix, hadamard, project_effective)
from .protocol import MINUS, PLUS, Protocol, SwitchEvent, decompose_switch, predict_phase

AVERAGE_LIMIT = 6


@dataclass(frozen=True)
class BranchState:
    plus_label: int
    minus_label: int
    plus_phase: float
    minus_phase: float

    @property
    def relative_phase(self) -> float:
        return self.minus_phase - self.plus_phase

    def statevector(self, n: int) -> np.ndarray:
        psi = np.zeros(1 << n, dtype=complex)
        psi[self.plus_label] = np.exp(1j * self.plus_phase) / np.sqrt(2)
        psi[self.minus_label] = np.exp(1j * self.minus_phase) / np.sqrt(2)
        return psi


def _grouped_events(proto: Protocol) -> list[tuple[float, list[SwitchEvent]]]:
    groups: list[tuple[float, list[SwitchEvent]]] = []
    for ev in proto.events:
        if groups and groups[-1][0] == ev.time:
            groups[-1][1].append(ev)
        else:
            groups.append((ev.time, [ev]))
    return groups


def run_branch(proto: Protocol, h_diag: DiagonalHamiltonian) -> BranchState:
    """Track both branch labels and their eigenphases through the schedule."""
    energy = h_diag.energies() if h_diag.n <= 20 else None

    def e(x: int) -> float:
        return float(energy[x]) if energy is not None else h_diag.energy(x)

    xp, xm = proto.init
    pp = pm = 0.0
    now = 0.0
    for time, evs in _grouped_events(proto) + [(proto.t, [])]:
        dt = time - now
        pp -= e(xp) * dt
        pm -= e(xm) * dt
        now = time
        for ev in evs:
            cur = xp if ev.branch == PLUS else xm
            if cur != ev.src:
                raise LabelCollision(f"event expects label {ev.src} but branch holds {cur}")
            if ev.branch == PLUS:
                xp = ev.dst
            else:
                xm = ev.dst
            if xp == xm:
                raise LabelCollision(f"branches merged on label {xp}")
    return BranchState(xp, xm, pp, pm)


class Propagator:
    """exp(-i H tau) for a fixed Hermitian H via one eigendecomposition."""

    def __init__(self, h: np.ndarray):
        self.h = h
        self.diagonal = np.allclose(h, np.diag(np.diag(h)), atol=0.0)
        if self.diagonal:
            self.w = np.real(np.diag(h))
            self.v = None
        else:
            self.w, self.v = np.linalg.eigh(h)

    def matrix(self, tau: float) -> np.ndarray:
        phases = np.exp(-1j * self.w * tau)
        if self.v is None:
            return np.diag(phases)
        return (self.v * phases) @ self.v.conj().T

    def apply(self, state: np.ndarray, tau: float) -> np.ndarray:
        phases = np.exp(-1j * self.w * tau)
        if self.v is None:
            return phases * state if state.ndim == 1 else phases[:, None] * state
        coeff = self.v.conj().T @ state
        coeff = phases * coeff if state.ndim == 1 else phases[:, None] * coeff
        return self.v @ coeff


def initial_state(proto: Protocol) -> np.ndarray:
    psi = np.zeros(1 << proto.n, dtype=complex)
    psi[list(proto.init)] = 1 / np.sqrt(2)
    return psi


def _switch_perms(proto: Protocol) -> list[np.ndarray]:
    """One composite permutation per event group (labels follow the ideal schedule)."""
    xp, xm = proto.init
    perms = []
    groups = _grouped_events(proto)
    for _, evs in groups:
        perm = np.arange(1 << proto.n)
        for ev in evs:
            other = xm if ev.branch == PLUS else xp
            step = decompose_switch(ev.src, ev.dst, other, proto.n).permutation(proto.n)
            perm = step[perm]
            if ev.branch == PLUS:
                xp = ev.dst
            else:
                xm = ev.dst
        perms.append(perm)
    return perms


def _permute(state: np.ndarray, perm: np.ndarray) -> np.ndarray:
    out = np.empty_like(state)
    out[perm] = state
    return out


def run_dense(proto: Protocol, h, limit: int = DENSE_LIMIT) -> np.ndarray:
    """Exact statevector after the protocol under ``h``."""
    check_dense(proto.n, limit)
    prop = Propagator(dense_matrix(h, limit))
    groups = _grouped_events(proto)
    perms = _switch_perms(proto)
    psi = initial_state(proto)
    now = 0.0
    for (time, _), perm in zip(groups, perms):
        psi = prop.apply(psi, time - now)
        psi = _permute(psi, perm)
        now = time
    return prop.apply(psi, proto.t - now)


def spectral_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


def hamiltonian_norms(h0: InteractingHamiltonian) -> tuple[float, float]:
    """(exact spectral norm, triangle bound sum |coefficients|)."""
    exact = spectral_norm(dense_matrix(h0))
    tri = sum(abs(v) for v in h0.theta) + sum(abs(g) for _, g in h0.interactions)
    return exact, tri


def zstring_signs(n: int) -> np.ndarray:
    """Row ``mask`` holds the diagonal of the Z-string ``mask``."""
    check_dense(n)
    return hadamard(n)


def trotter_step_unitary(h0, dt: float, s: int, limit: int = DENSE_LIMIT) -> np.ndarray:
    """s exp(-i H0 dt) s for the Z-string with mask ``s``."""
    check_dense(h0.n, limit)
    u = Propagator(dense_matrix(h0, limit)).matrix(dt)
    sign = zstring_signs(h0.n)[s]
    return u * np.outer(sign, sign)


def expected_step_map(h0, dt: float) -> np.ndarray:
    """Average of s exp(-i H0 dt) s over the full stabilizer group."""
    if h0.n > AVERAGE_LIMIT:
        raise SizeExceeded(f"averaging over 2^{h0.n} stabilizers exceeds n <= {AVERAGE_LIMIT}")
    u = Propagator(dense_matrix(h0)).matrix(dt)
    signs = zstring_signs(h0.n)
    acc = np.zeros_like(u)
    for sign in signs:
        acc += u * np.outer(sign, sign)
    return acc / len(signs)


def ideal_unitary(h0: InteractingHamiltonian, t: float) -> np.ndarray:
    return Propagator(dense_matrix(project_effective(h0))).matrix(t)


def bias_norm(h0: InteractingHamiltonian, t: float, L: int) -> float:
    """||exp(-i H_eff t) - E[V]^L|| in spectral norm."""
    ev = expected_step_map(h0, t / L)
    return spectral_norm(ideal_unitary(h0, t) - np.linalg.matrix_power(ev, L))


def sample_trajectory(seed: int, L: int, n: int, stream: int = 0, start: int = 0) -> np.ndarray:
    """Z-string masks for steps ``start .. start+L-1`` of one trajectory.

    Step k is the low n bits of the k-th raw word of a Philox stream keyed by
    (seed, stream), so any window of any trajectory is reproducible on its own.
    """
    if not 0 <= seed < 1 << 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    bitgen = np.random.Philox(key=int(seed) | (int(stream) << 64))
    blocks, offset = divmod(int(start), 4)  # Philox emits four words per counter value
    if blocks:
        bitgen.advance(blocks)
    raw = bitgen.random_raw(L + offset)[offset:]
    return (raw & np.uint64((1 << n) - 1)).astype(np.int64)


@dataclass(frozen=True)
class TrotterRun:
    h0: InteractingHamiltonian
    t: float
    L: int
    seed: int
    stream: int = 0
    sampled: np.ndarray = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.sampled is None:
            object.__setattr__(self, "sampled", sample_trajectory(self.seed, self.L, self.h0.n, self.stream))
        if len(self.sampled) != self.L:
            raise ValueError("trajectory length must equal L")


def trajectory_products(h0: InteractingHamiltonian, dt: float, masks: np.ndarray) -> np.ndarray:
    """V_L ... V_1 for each row of ``masks`` (shape trials x L)."""
    masks = np.atleast_2d(masks)
    u = Propagator(dense_matrix(h0)).matrix(dt)
    signs = zstring_signs(h0.n)
    conj = u[None] * signs[:, :, None] * signs[:, None, :]
    dim = u.shape[0]
    prod = np.broadcast_to(np.eye(dim, dtype=complex), (masks.shape[0], dim, dim)).copy()
    for k in range(masks.shape[1]):
        prod = conj[masks[:, k]] @ prod
    return prod


@dataclass
class ReshapeBenchResult:
    n: int
    lam: float
    lam_triangle: float
    t: float
    L: list[int]
    bias_norm: list[float]
    traj_errors: list[np.ndarray]
    mean_slope: float = float("nan")
    var_slope: float = float("nan")

    @property
    def mean_X(self) -> list[float]:
        return [float(np.mean(x)) for x in self.traj_errors]

    @property
    def var_X(self) -> list[float]:
        return [float(np.var(x, ddof=1)) for x in self.traj_errors]

    def bias_bound(self) -> list[float]:
        return [2 * self.lam ** 2 * self.t ** 2 / L for L in self.L]

    def trial_rows(self) -> list[tuple]:
        return [(self.n, self.lam, self.t, L, i, float(x))
                for L, xs in zip(self.L, self.traj_errors) for i, x in enumerate(xs)]

    def summary_rows(self) -> list[tuple]:
        return list(zip(self.L, self.bias_norm, self.mean_X, self.var_X, self.bias_bound()))


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def bench_reshaping(h0: InteractingHamiltonian, t: float, L_grid: Sequence[int], trials: int,
                    seed: int) -> ReshapeBenchResult:
    """Deterministic bias and sampled trajectory error X for each L."""
    if h0.n > AVERAGE_LIMIT:
        raise SizeExceeded(f"bench limited to n <= {AVERAGE_LIMIT}")
    if trials < 30:
        raise ValueError("need at least 30 trials per L")
    if not L_grid:
        raise ValueError("empty L grid")
    lam, tri = hamiltonian_norms(h0)
    target = ideal_unitary(h0, t)
    biases, errors = [], []
    for L in L_grid:
        ev = np.linalg.matrix_power(expected_step_map(h0, t / L), L)
        biases.append(spectral_norm(target - ev))
        masks = np.stack([sample_trajectory(seed, L, h0.n, stream=(L << 20) + i) for i in range(trials)])
        prods = trajectory_products(h0, t / L, masks)
        errors.append(np.linalg.norm(prods - ev[None], ord=2, axis=(1, 2)))
    res = ReshapeBenchResult(h0.n, lam, tri, t, list(L_grid), biases, errors)
    if len(L_grid) > 1:
        res.mean_slope = loglog_slope(res.L, res.mean_X)
        res.var_slope = loglog_slope(res.L, res.var_X)
    return res


@dataclass(frozen=True)
class ReshapedRun:
    states: np.ndarray
    protocol: Protocol
    max_time_shift: float
    phase_shift: float


def snap_protocol(proto: Protocol, L: int) -> tuple[Protocol, float]:
    """Round every switch time to the nearest multiple of t/L."""
    dt = proto.t / L
    bounds = [0.0] + proto.switch_times() + [proto.t]
    if min(b - a for a, b in zip(bounds, bounds[1:])) < dt * (1 - 1e-12):
        raise StepTooCoarse(f"a segment is shorter than t/L = {dt:g}")
    events = tuple(SwitchEvent(round(ev.time / dt) * dt, ev.branch, ev.src, ev.dst)
                   for ev in proto.events)
    shift = max((abs(a.time - b.time) for a, b in zip(events, proto.events)), default=0.0)
    return Protocol(proto.n, proto.t, proto.l1, proto.init, events, proto.final), shift


def run_reshaped(proto: Protocol, h0: InteractingHamiltonian, L: int, seed: int,
                 trajectories: int = 1, first_stream: int = 0,
                 limit: int = DENSE_LIMIT) -> ReshapedRun:
    """Final states (dim x trajectories) under the randomised product formula.

    Trajectory j uses stream ``first_stream + j``; switch gates are applied
    between steps at the snapped event times.
    """
    check_dense(proto.n, limit)
    snapped, shift = snap_protocol(proto, L)
    dt = proto.t / L
    prop = Propagator(dense_matrix(h0, limit))
    u = prop.matrix(dt)
    signs = zstring_signs(proto.n)
    groups = _grouped_events(snapped)
    perms = _switch_perms(snapped)
    at_step = {int(round(time / dt)): perm for (time, _), perm in zip(groups, perms)}
    masks = np.stack([sample_trajectory(seed, L, proto.n, stream=first_stream + j)
                      for j in range(trajectories)])
    psi = np.repeat(initial_state(proto)[:, None], trajectories, axis=1)
    for k in range(L):
        if k in at_step:
            psi = psi[np.argsort(at_step[k])]
        s = signs[masks[:, k]].T
        psi = s * (u @ (s * psi))
    h_eff = project_effective(h0)
    dphi = predict_phase(snapped, h_eff) - predict_phase(proto, h_eff)
    return ReshapedRun(psi, snapped, shift, dphi)


def protocol_unitaries(proto: Protocol, h0: InteractingHamiltonian, L: int, seed: int,
                       stream: int = 0) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Ideal U1, reshaped U2 and the per-segment errors for one trajectory."""
    snapped, _ = snap_protocol(proto, L)
    dt = proto.t / L
    dim = 1 << proto.n
    eff = Propagator(dense_matrix(project_effective(h0)))
    groups = _grouped_events(snapped)
    perms = _switch_perms(snapped)
    masks = sample_trajectory(seed, L, proto.n, stream=stream)
    bounds = [0] + [int(round(g[0] / dt)) for g in groups] + [L]
    u1 = np.eye(dim, dtype=complex)
    u2 = np.eye(dim, dtype=complex)
    errs = []
    for r, (a, b) in enumerate(zip(bounds, bounds[1:])):
        if r > 0:
            p = np.eye(dim)[perms[r - 1]].T
            u1, u2 = p @ u1, p @ u2
        seg_ideal = eff.matrix((b - a) * dt)
        seg = trajectory_products(h0, dt, masks[None, a:b])[0]
        errs.append(spectral_norm(seg_ideal - seg))
        u1, u2 = seg_ideal @ u1, seg @ u2
    return u1, u2, errs
