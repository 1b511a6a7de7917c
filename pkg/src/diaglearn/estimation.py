"""Monte Carlo readout of q and comparison with the Cramer-Rao bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import hamiltonian_norms, run_branch, run_reshaped
from .errors import SignalOutOfRange
from .pauli import DiagonalHamiltonian, InteractingHamiltonian, check_dense, hadamard, project_effective
from .protocol import Protocol, measurement_observable

CLAMP = 1 - 1e-12
DEFAULT_MARGIN = 0.2
IDEAL = "ideal"
RESHAPED = "reshaped"


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


@dataclass
class RunningStats:
    """Mergeable (count, mean, M2) accumulator."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push(self, x: float) -> None:
        self.count += 1
        d = x - self.mean
        self.mean += d / self.count
        self.m2 += d * (x - self.mean)

    def extend(self, xs) -> "RunningStats":
        for x in xs:
            self.push(float(x))
        return self

    def merge(self, other: "RunningStats") -> "RunningStats":
        n = self.count + other.count
        if n == 0:
            return RunningStats()
        d = other.mean - self.mean
        mean = self.mean + d * other.count / n
        m2 = self.m2 + other.m2 + d * d * self.count * other.count / n
        return RunningStats(n, mean, m2)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else float("nan")


@dataclass(frozen=True)
class EstimationRun:
    protocol: Protocol
    hamiltonian: DiagonalHamiltonian | InteractingHamiltonian
    q_true: float
    nu: int
    seed: int
    mode: str = IDEAL
    L: int = 0
    repetitions: int = 1
    margin: float = DEFAULT_MARGIN


@dataclass(frozen=True)
class EstimationResult:
    q_est: float
    se: float
    var: float
    mse: float
    crb: float
    q_true: float
    samples: np.ndarray = field(repr=False, compare=False)

    @property
    def ratio(self) -> float:
        return self.mse / self.crb

    @property
    def var_ratio(self) -> float:
        return self.var / self.crb


def crb(proto: Protocol, nu: int) -> float:
    return proto.l1 ** 2 / (4 * nu * proto.t ** 2)


def invert_mean(proto: Protocol, mean: np.ndarray) -> np.ndarray:
    """q from the sample mean of the +-1 outcomes (asin readout)."""
    clamped = np.clip(mean, -CLAMP, CLAMP)
    if np.any(np.abs(clamped) >= CLAMP):
        raise SignalOutOfRange("sample mean saturated at +-1; phase is ambiguous")
    return proto.l1 / (2 * proto.t) * np.arcsin(clamped)


def _outcome_means(probs: np.ndarray, nu: int, rng: np.random.Generator) -> np.ndarray:
    """Sample mean of nu outcomes per row of (P(+1), P(-1), P(0)).

    Shots are drawn by inversion from one uniform per shot, so runs sharing a
    stream are coupled monotonically across different probabilities.
    """
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum(axis=1, keepdims=True)
    out = np.empty(len(probs))
    for j, (pp, pm, _) in enumerate(probs):
        u = rng.random(nu)
        out[j] = (np.count_nonzero(u < pp) - np.count_nonzero((u >= pp) & (u < pp + pm))) / nu
    return out


def estimate(run: EstimationRun) -> EstimationResult:
    """Repeat the protocol ``run.repetitions`` times with ``run.nu`` shots each."""
    proto = run.protocol
    obs = measurement_observable(proto)
    if run.mode == IDEAL:
        h = run.hamiltonian
        h_diag = project_effective(h) if isinstance(h, InteractingHamiltonian) else h
        phi = run_branch(proto, h_diag).relative_phase
        if abs(phi) >= math.pi / 2 - run.margin:
            raise SignalOutOfRange(f"phase {phi:.4f} is outside the small-signal window")
        p_plus, p_minus = obs.probabilities(phi)
        probs = np.tile([p_plus, p_minus, 0.0], (run.repetitions, 1))
    elif run.mode == RESHAPED:
        res = run_reshaped(proto, run.hamiltonian, run.L, run.seed, trajectories=run.repetitions)
        probs = np.array([obs.outcome_probabilities(res.states[:, j]) for j in range(run.repetitions)])
    else:
        raise ValueError(f"unknown mode {run.mode!r}")
    # one shot stream per seed for every mode, so mode/L comparisons share sampling noise
    q = invert_mean(proto, _outcome_means(probs, run.nu, _rng(run.seed, 0)))
    stats = RunningStats().extend(q)
    var = stats.variance if run.repetitions > 1 else 0.0
    mse = float(np.mean((q - run.q_true) ** 2))
    se = math.sqrt(var / run.repetitions) if run.repetitions > 1 else float("nan")
    return EstimationResult(stats.mean, se, var, mse, crb(proto, run.nu), run.q_true, q)


@dataclass
class MSETable:
    L: list[int]
    results: list[EstimationResult]
    ideal: EstimationResult
    lam: float
    n: int
    l0: int
    t: float

    @property
    def excess(self) -> list[float]:
        """MSE above the ideal-mode MSE (same shot stream) for each L."""
        return [r.mse - self.ideal.mse for r in self.results]

    def excess_slope(self) -> float:
        pts = [(L, e) for L, e in zip(self.L, self.excess) if e > 0]
        if len(pts) < 2:
            return float("nan")
        x, y = zip(*pts)
        return float(np.polyfit(np.log(x), np.log(y), 1)[0])

    def l_star(self, fraction: float = 0.2) -> int | None:
        """Smallest L on the grid after which the excess stays below ``fraction`` of the bound."""
        best = None
        for L, e, r in reversed(list(zip(self.L, self.excess, self.results))):
            if e < fraction * r.crb:
                best = L
            else:
                break
        return best

    def fitted_prefactor(self) -> float:
        """C' in excess ~ crb * C' n ||a||_0 lam^2 t^2 / L (median over the grid)."""
        scale = self.n * self.l0 * self.lam ** 2 * self.t ** 2
        vals = [e * L / (r.crb * scale) for L, e, r in zip(self.L, self.excess, self.results)]
        return float(np.median(vals))

    def rows(self) -> list[tuple]:
        out = [(IDEAL, 0, self.ideal)]
        out += [(RESHAPED, L, r) for L, r in zip(self.L, self.results)]
        return out


def mse_vs_L(proto: Protocol, h0: InteractingHamiltonian, q_true: float, L_grid: Sequence[int],
             nu: int, repetitions: int, seed: int) -> MSETable:
    base = dict(protocol=proto, hamiltonian=h0, q_true=q_true, nu=nu, seed=seed, repetitions=repetitions)
    ideal = estimate(EstimationRun(mode=IDEAL, **base))
    results = [estimate(EstimationRun(mode=RESHAPED, L=L, **base)) for L in L_grid]
    lam, _ = hamiltonian_norms(h0)
    return MSETable(list(L_grid), results, ideal, lam, proto.n, proto.rounds, proto.t)


@dataclass(frozen=True)
class BaselineReport:
    var_local: float
    var_entangled_meas: float
    Q1: float
    Q2: float
    var_optimal: float

    @property
    def ordered(self) -> bool:
        return self.var_optimal <= self.var_entangled_meas * (1 + 1e-12) <= self.var_local * (1 + 1e-12)


def baselines(alpha: Sequence[float], n: int, t: float, nu: int, l1: float) -> BaselineReport:
    """Product-state alternatives relative to the optimal protocol."""
    a2 = float(np.dot(alpha, alpha))
    return BaselineReport(
        var_local=n ** 2 * a2 / (4 * nu * t ** 2),
        var_entangled_meas=a2 / (4 * nu * t ** 2),
        Q1=n ** 2 * a2 / l1 ** 2,
        Q2=a2 / l1 ** 2,
        var_optimal=l1 ** 2 / (4 * nu * t ** 2),
    )


def product_state(theta: Sequence[float], t: float) -> np.ndarray:
    """exp(-i t sum_i theta_i Z_i)|+>^n."""
    n = len(theta)
    check_dense(n)
    signs = hadamard(n)[[1 << i for i in range(n)]]
    energy = np.asarray(theta, float) @ signs
    return np.exp(-1j * energy * t) / math.sqrt(1 << n)


def projector_state(alpha: Sequence[float]) -> np.ndarray:
    """(1/||alpha||) sum_i alpha_i Z_i |+>^n."""
    n = len(alpha)
    signs = hadamard(n)[[1 << i for i in range(n)]]
    alpha = np.asarray(alpha, float)
    return (alpha @ signs) / (np.linalg.norm(alpha) * math.sqrt(1 << n))


@dataclass(frozen=True)
class Baseline2Result:
    variance: float
    predicted: float
    q_mean: float
    q_true: float

    @property
    def ratio(self) -> float:
        return self.variance / self.predicted


def verify_baseline2(alpha: Sequence[float], theta: Sequence[float], t: float, nu: int, seed: int,
                     repetitions: int = 1000) -> Baseline2Result:
    """Estimate q from the two-outcome projective measurement on |phi>.

    P(outcome 1) ~ (t q / ||alpha||)^2 near q = 0, so q is read out as
    sign(q) ||alpha|| sqrt(p) / t; the sign is assumed known.
    """
    alpha = np.asarray(alpha, float)
    q = float(alpha @ np.asarray(theta, float))
    psi = product_state(theta, t)
    p1 = abs(np.vdot(projector_state(alpha), psi)) ** 2
    counts = _rng(seed, 2).binomial(nu, p1, size=repetitions)
    sign = 1.0 if q >= 0 else -1.0
    est = sign * np.linalg.norm(alpha) * np.sqrt(counts / nu) / t
    stats = RunningStats().extend(est)
    predicted = float(alpha @ alpha) / (4 * nu * t ** 2)
    return Baseline2Result(stats.variance, predicted, stats.mean, q)


def fisher_matrix(theta: Sequence[float], t: float, step: float = 1e-6) -> np.ndarray:
    """Quantum Fisher matrix of the evolved product state by central differences."""
    theta = np.asarray(theta, float)
    n = len(theta)
    psi = product_state(theta, t)
    derivs = []
    for i in range(n):
        d = np.zeros(n)
        d[i] = step
        derivs.append((product_state(theta + d, t) - product_state(theta - d, t)) / (2 * step))
    F = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            inner = np.vdot(derivs[i], derivs[j]) - np.vdot(derivs[i], psi) * np.vdot(psi, derivs[j])
            F[i, j] = 4 * inner.real
    return F
