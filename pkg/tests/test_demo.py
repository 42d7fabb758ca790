import pytest

from qlink.demo import (BUDGET_EXHAUSTED, DemoRunner, default_devices, demo_source, run_demo, run_exhaustive,
                        single_error_cases)
from qlink.devices import DecoderDevice
from qlink.errors import KernelError, ParameterError
from qlink.vppu import assemble

from oracles import syndrome_history, true_logical_effect
from reference_device import ReferenceVppu


def test_noiseless_run():
    report = run_demo(5)
    assert report.logical_outcome == 0
    assert report.verdict == "no flip"
    assert report.syndromes == [[0, 0]] * 5
    assert not report.correction_applied and report.attempts_used == 1


@pytest.fixture(scope="module")
def runner():
    with DemoRunner(5) as r:
        yield r


@pytest.mark.parametrize("case", single_error_cases(5), ids=lambda c: f"r{c[0]}q{c[1]}")
def test_single_error_corrected_on_both_paths(runner, case):
    packed = runner.run([case])
    sim = runner.run([case], sim_mode=True)
    assert packed.logical_outcome == 0 and sim.logical_outcome == 0
    assert (packed.verdict, packed.raw_logical) == (sim.verdict, sim.raw_logical)
    assert packed.verdict == ("flip" if true_logical_effect([case]) else "no flip")
    assert packed.syndromes == [list(s) for s in syndrome_history([case], 5)]
    assert sim.syndromes == packed.syndromes


def test_decoder_state_does_not_leak_between_runs(runner):
    runner.run([(0, 0)])
    assert runner.run([]).verdict == "no flip"


def test_uncorrectable_error_triggers_correction_branch(runner):
    # two flips on qubits 0 and 1 look like one flip on qubit 2: decoding fails, outcome 1
    report = runner.run([(0, 0), (0, 1)])
    assert report.logical_outcome == 1 and report.correction_applied


def test_exhaustive_rows():
    rows = run_exhaustive(5)
    assert len(rows) == 15
    assert all(r["agree"] and r["packed"]["logical_outcome"] == 0 for r in rows)


def test_runs_on_reference_interpreter_device():
    devices = [("vppu0", ReferenceVppu(seed=0)), ("decoder", DecoderDevice())]
    with DemoRunner(5, devices) as r:
        for case in single_error_cases(5):
            assert r.run([case]).logical_outcome == 0
        assert r.vppu.impl.triggers == 15


def test_reference_and_builtin_vppu_traces_match():
    ref = ReferenceVppu(seed=3)
    with DemoRunner(5, [("vppu0", ref), ("decoder", DecoderDevice())]) as a:
        a.run([(2, 1)])
        ref_trace = ref.last_state.trace_bytes()
    with DemoRunner(5, seed=3) as b:
        b.run([(2, 1)])
        ours = b.vppu.impl.last_state.trace_bytes()
    assert ours == ref_trace


def test_attempt_budget_exhausted():
    with pytest.raises(KernelError, match="budget"):
        run_demo(3, devices=default_devices(p_rus_fail=1.0), attempts=4)
    with pytest.raises(KernelError, match="budget"):
        run_demo(3, devices=default_devices(p_rus_fail=1.0), attempts=4, sim_mode=True)


def test_rus_loop_retries_until_success():
    report = run_demo(3, devices=default_devices(p_rus_fail=0.5, seed=1), attempts=64)
    assert report.attempts_used >= 1 and report.logical_outcome == 0


def test_noisy_runs_agree_across_paths():
    for seed in range(10):
        devices = default_devices(p_flip=0.05, seed=seed)
        with DemoRunner(5, devices) as r:
            a, b = r.run(), r.run(sim_mode=True)
        assert (a.verdict, a.logical_outcome, a.syndromes) == (b.verdict, b.logical_outcome, b.syndromes)


def test_source_assembles_and_validates():
    text = demo_source(2, {"enqueue_syndromes_ui64": 1, "decode": 3, "reset": 4}, rounds=2, attempts=2)
    assert f"LOADI r0, {BUDGET_EXHAUSTED}" in text
    body = "\n".join(line for line in text.splitlines() if not line.startswith("."))
    assert len(assemble(body)) % 8 == 0
    with pytest.raises(ParameterError):
        demo_source(2, {}, rounds=0)


def test_bad_configurations():
    with pytest.raises(ParameterError):
        DemoRunner(5, [("decoder", DecoderDevice())])
    with DemoRunner(5) as r:
        with pytest.raises(ParameterError):
            r.run([(5, 0)])
