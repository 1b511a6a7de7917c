import json

import numpy as np
import pytest

from diaglearn.dynamics import run_branch
from diaglearn.errors import DegenerateSolution, NoDistinguishingQubit
from diaglearn.l1 import L1Problem, L1Solution, solve_l1
from diaglearn.pauli import DiagonalHamiltonian, GeneratorSet
from diaglearn.protocol import (MINUS, PLUS, ParityObservable, compile_protocol, decompose_switch,
                                ghz_solution, measurement_observable, phase_from_q, phase_sensitivity,
                                predict_phase, protocol_from_json, protocol_to_json)


def solved(masks, n, alpha, t=1.0):
    gens = GeneratorSet.from_masks(masks, n)
    return gens, solve_l1(L1Problem.from_generators(gens, alpha, t))


def test_ghz_protocol_has_no_switches():
    proto = compile_protocol(ghz_solution(3), 3)
    assert proto.init == (0, 7) and proto.final == (0, 7)
    assert proto.events == ()
    assert proto.rounds == 2


def test_dwell_times_and_weights():
    sol = L1Solution((0, 1, 2, 3), (0.75, -0.25, -0.25, -0.25), 1.5, 1.0)
    proto = compile_protocol(sol, 2)
    assert proto.schedule(PLUS) == [(0, pytest.approx(1.0))]
    minus = proto.schedule(MINUS)
    assert [x for x, _ in minus] == [1, 2, 3]
    assert [dt for _, dt in minus] == pytest.approx([1 / 3] * 3)
    assert proto.weights() == pytest.approx(sol.as_dict())
    assert proto.rounds == sol.l0


def test_ordering_by_weight_then_label():
    sol = L1Solution((1, 2, 4, 7), (0.1, 0.3, -0.2, -0.2), 0.8, 1.0)
    proto = compile_protocol(sol, 3)
    assert [x for x, _ in proto.schedule(PLUS)] == [2, 1]
    assert [x for x, _ in proto.schedule(MINUS)] == [4, 7]


def test_coincident_switches_share_time_plus_first():
    sol = L1Solution((0, 3, 5, 6), (0.25, 0.25, -0.25, -0.25), 1.0, 1.0)
    proto = compile_protocol(sol, 3)
    assert len(proto.events) == 2
    assert proto.events[0].time == proto.events[1].time == pytest.approx(0.5)
    assert [ev.branch for ev in proto.events] == [PLUS, MINUS]
    assert proto.switch_times() == [proto.events[0].time]


def test_phase_worked_example():
    gens, sol = solved([1, 2, 3], 2, [1.0, 1.0, 1.0])
    theta = (0.1, 0.2, -0.05)
    proto = compile_protocol(sol, 2)
    h = DiagonalHamiltonian.from_generators(gens, theta)
    assert predict_phase(proto, h) == pytest.approx(2 * 0.25 / 1.5)
    assert run_branch(proto, h).relative_phase == pytest.approx(1 / 3)


def test_phase_equals_q_over_l1_on_random_instances():
    rng = np.random.default_rng(9)
    for _ in range(30):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(1, (1 << n)))
        masks = sorted(rng.choice(np.arange(1, 1 << n), m, replace=False))
        alpha = rng.uniform(-1, 1, m)
        theta = rng.uniform(-0.3, 0.3, m)
        t = float(rng.uniform(0.5, 2))
        gens, sol = solved(masks, n, alpha, t)
        proto = compile_protocol(sol, n)
        h = DiagonalHamiltonian.from_generators(gens, theta)
        assert predict_phase(proto, h) == pytest.approx(phase_from_q(proto, alpha @ theta), abs=1e-12)


def test_degenerate_solutions_rejected():
    with pytest.raises(DegenerateSolution):
        compile_protocol(L1Solution((), (), 0.0, 1.0), 2)
    with pytest.raises(DegenerateSolution):
        compile_protocol(L1Solution((1,), (1.0,), 1.0, 1.0), 2)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_switch_decomposition_exhaustive(n):
    dim = 1 << n
    for src in range(dim):
        for dst in range(dim):
            for other in range(dim):
                if len({src, dst, other}) < 3:
                    continue
                dec = decompose_switch(src, dst, other, n)
                assert dec.apply(src) == dst
                assert dec.apply(other) == other
                perm = dec.permutation(n)
                assert sorted(perm) == list(range(dim))
                assert perm[src] == dst and perm[other] == other


def test_switch_gates_conditioned_on_distinguishing_qubit():
    dec = decompose_switch(0b001, 0b110, 0b011, 3)
    label, other = 0b001, 0b011
    for g in dec.gates:
        assert (label >> g.control & 1) != (other >> g.control & 1)
        label = g.apply(label)
    assert label == 0b110


def test_switch_cannot_merge_branches():
    with pytest.raises(NoDistinguishingQubit):
        decompose_switch(1, 2, 2, 2)


def test_parity_observable():
    obs = ParityObservable(0, 3, 2)
    phi = 0.3
    psi = np.zeros(4, complex)
    psi[0], psi[3] = 1 / np.sqrt(2), np.exp(1j * phi) / np.sqrt(2)
    O = obs.dense()
    assert np.allclose(O, O.conj().T)
    assert obs.expectation(psi) == pytest.approx(np.sin(phi))
    assert np.vdot(psi, O @ psi).real == pytest.approx(np.sin(phi))
    pp, pm, p0 = obs.outcome_probabilities(psi)
    assert (pp, pm) == pytest.approx(ParityObservable.probabilities(phi))
    assert p0 == pytest.approx(0, abs=1e-15)
    mean, var = ParityObservable.mean_and_variance(phi)
    assert pp - pm == pytest.approx(mean) and var == pytest.approx(1 - mean ** 2)


def test_leakage_is_zero_outcome():
    obs = ParityObservable(0, 3, 2)
    psi = np.array([0.5, 0.5j, 0.5, 0.5])
    pp, pm, p0 = obs.outcome_probabilities(psi)
    assert pp + pm == pytest.approx(0.5) and p0 == pytest.approx(0.5)


def test_phase_sensitivity_is_crb_per_shot():
    _, sol = solved([1, 2, 3], 2, [1.0, 1.0, 1.0], t=0.7)
    proto = compile_protocol(sol, 2)
    for q in (0.0, 0.2):
        assert phase_sensitivity(proto, q) == pytest.approx(sol.l1 ** 2 / (4 * 0.7 ** 2))
    assert measurement_observable(proto).plus_label == proto.final[0]


def test_json_round_trip():
    _, sol = solved([1, 2, 3, 5], 3, [1.0, -0.5, 0.3, 0.8])
    proto = compile_protocol(sol, 3)
    doc = json.loads(json.dumps(protocol_to_json(proto)))
    assert protocol_from_json(doc) == proto
