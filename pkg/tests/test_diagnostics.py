import numpy as np
import pytest

from icr.core import IcrOptions, IcrTrace, icr_run
from icr.diagnostics import (
    TraceTooShort,
    freezing_monitor,
    monotone_step_check,
    quasi_cauchy_check,
)
from icr.synth import generate_instance


def trace_with_f(f_values, p=2):
    """Synthetic trace carrying only the surrogate values."""
    n = len(f_values)
    return IcrTrace(
        mu0=np.ones(p),
        xs=[np.zeros(p) for _ in range(n)],
        mus=[np.zeros(p) for _ in range(n)],
        f_values=list(map(float, f_values)),
        inner_iters=[0] * n,
        frozen_sets=[frozenset()] * n,
    )


class TestQuasiCauchyCheck:
    def test_constant_sequence_passes(self):
        rep = quasi_cauchy_check(trace_with_f([2.0] * 20), burn_in_fraction=0.0)
        assert rep.passed
        assert rep.c_prime == 0.0
        assert rep.max_violation == 0.0

    def test_one_over_n_decay_passes(self):
        # |delta_n| = 1/n exactly: the scaled sequence is constant 1
        f = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, 40))])
        rep = quasi_cauchy_check(trace_with_f(f), burn_in_fraction=0.0)
        assert rep.passed
        assert rep.c_prime == pytest.approx(1.0, rel=1e-9)

    def test_constant_deltas_fail(self):
        # |delta_n| = 0.1 for every n: scaled differences grow linearly
        f = 0.1 * np.arange(40)
        rep = quasi_cauchy_check(trace_with_f(f), burn_in_fraction=0.0)
        assert not rep.passed
        assert rep.max_violation > 0.0

    def test_shift_invariance(self):
        rng = np.random.default_rng(0)
        f = np.cumsum(rng.uniform(-0.1, 0.1, 30) / np.arange(1, 31))
        r1 = quasi_cauchy_check(trace_with_f(f), burn_in_fraction=0.2)
        r2 = quasi_cauchy_check(trace_with_f(f + 123.456), burn_in_fraction=0.2)
        assert r1.passed == r2.passed
        assert r1.c_prime == pytest.approx(r2.c_prime, rel=1e-9)
        assert np.allclose(r1.scaled, r2.scaled)

    def test_burn_in_excludes_early_spikes(self):
        # large early differences, clean 1/n tail
        f = np.concatenate([[50.0, 10.0, 30.0],
                            5.0 + np.cumsum(1.0 / np.arange(1, 30))])
        rep = quasi_cauchy_check(trace_with_f(f), burn_in_fraction=0.3)
        assert rep.burn_in == 10
        assert rep.passed

    def test_too_short_raises(self):
        with pytest.raises(TraceTooShort):
            quasi_cauchy_check(trace_with_f([1.0, 2.0, 3.0, 4.0]))

    def test_bad_fraction_rejected(self):
        with pytest.raises(ValueError):
            quasi_cauchy_check(trace_with_f([0.0] * 10), burn_in_fraction=1.0)

    def test_report_serializes(self):
        rep = quasi_cauchy_check(trace_with_f([2.0] * 10))
        doc = rep.to_dict()
        assert doc["passed"] is True
        assert len(doc["deltas"]) == 9

    def test_deterministic(self):
        f = np.cumsum(1.0 / np.arange(1, 25) ** 1.5)
        r1 = quasi_cauchy_check(trace_with_f(f))
        r2 = quasi_cauchy_check(trace_with_f(f))
        assert r1.passed == r2.passed and r1.c_prime == r2.c_prime


class TestFreezingMonitor:
    def test_real_run_is_clean(self):
        synth = generate_instance(24, 12, 4, 0.01, seed=31)
        res = icr_run(synth.inst)
        rep = freezing_monitor(res.trace, synth.inst)
        assert rep.clean
        assert rep.checked > 0  # freezing actually happened on this instance

    def test_injected_violation_detected(self):
        synth = generate_instance(6, 4, 2, 0.01, seed=32)
        inst = synth.inst
        alpha = 1.0 / (2.0 * (inst.q + inst.p))
        below = 0.5 * alpha * inst.rho[0]
        trace = IcrTrace(
            mu0=np.full(6, 1.0),
            xs=[np.ones(6), np.array([0.7, 1, 1, 1, 1, 1.0])],
            mus=[np.full(6, below), np.ones(6)],
            f_values=[1.0, 0.9],
            inner_iters=[1, 1],
            frozen_sets=[frozenset(), frozenset()],
        )
        rep = freezing_monitor(trace, inst)
        assert not rep.clean
        v = rep.violations[0]
        assert (v.coord, v.mean_iter, v.iterate) == (0, 1, 2)
        assert v.value == pytest.approx(0.7)

    def test_vacuous_when_no_mean_dips(self):
        synth = generate_instance(6, 4, 2, 0.01, seed=33)
        trace = IcrTrace(
            mu0=np.ones(6),
            xs=[np.ones(6)] * 3,
            mus=[np.ones(6)] * 3,
            f_values=[1.0] * 3,
            inner_iters=[0] * 3,
            frozen_sets=[frozenset()] * 3,
        )
        rep = freezing_monitor(trace, synth.inst)
        assert rep.clean
        assert rep.checked == 0

    def test_seed_mean_participates(self):
        # a sub-threshold seed entry forbids any later nonzero at that coordinate
        synth = generate_instance(6, 4, 2, 0.01, seed=34)
        inst = synth.inst
        mu0 = np.ones(6)
        mu0[2] = 0.0
        trace = IcrTrace(
            mu0=mu0,
            xs=[np.eye(6)[2] * 0.5],
            mus=[np.eye(6)[2] * 0.5],
            f_values=[1.0],
            inner_iters=[0],
            frozen_sets=[frozenset()],
        )
        rep = freezing_monitor(trace, inst)
        assert not rep.clean


class TestMonotoneStepCheck:
    def test_real_runs_ok(self):
        for seed in (41, 42, 43):
            synth = generate_instance(20, 10, 3, 0.01, seed=seed)
            res = icr_run(synth.inst)
            rep = monotone_step_check(res.trace, synth.inst, 1e-8)
            assert rep.ok, f"seed {seed}: excess {rep.max_excess}"

    def test_detects_fabricated_regression(self):
        synth = generate_instance(6, 4, 2, 0.01, seed=44)
        res = icr_run(synth.inst)
        trace = res.trace
        assert trace.n_iters >= 2
        trace.f_values[-1] = trace.f_values[-2] + 1.0  # fake an increase
        rep = monotone_step_check(trace, synth.inst, 1e-8)
        assert not rep.ok
