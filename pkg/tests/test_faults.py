import io

import numpy as np
import pytest

from safsim.datapath import PipelineState, SaConfig, total_ff_bits
from safsim.faults import (FaultSpec, FfSpace, Outcome, OutcomeKind,
                           RegisterAddress, classify, enumerate_ffs,
                           execute_with_faults, run_faulty, validate_fault)
from safsim.scheduler import compile_model, execute, run_golden

from conftest import make_fc_model


def test_register_address_validation():
    with pytest.raises(ValueError):
        RegisterAddress("weight-reg", 0, 0)
    with pytest.raises(ValueError):
        RegisterAddress("accum-reg", 0, 32)
    RegisterAddress("accum-reg", 0, 31)  # in range


def test_enumerate_ffs_counts():
    for dims in ((1, 1), (2, 2), (3, 5)):
        sa = SaConfig(*dims)
        assert len(enumerate_ffs(sa)) == total_ff_bits(sa)


def test_enumerate_ffs_2x2_is_344():
    assert len(enumerate_ffs(SaConfig(2, 2))) == 344


def test_ffspace_roundtrip():
    sa = SaConfig(2, 3)
    space = FfSpace(sa)
    addrs = enumerate_ffs(sa)
    assert space.total_bits == len(addrs)
    for i, addr in enumerate(addrs):
        assert space.address_of(i) == addr
    with pytest.raises(IndexError):
        space.address_of(space.total_bits)


def test_zero_faults_equal_golden(fc3_fixture, sa22):
    model, images = fc3_fixture
    program = compile_model(model, sa22)
    golden = execute(program, images[0].pixels)
    assert np.array_equal(execute_with_faults(program, images[0].pixels, []),
                          golden)


def test_double_flip_same_cycle_is_identity(fc3_fixture, sa22):
    """XOR involution: flipping a bit twice at the same edge restores golden."""
    model, images = fc3_fixture
    program = compile_model(model, sa22)
    golden = execute(program, images[0].pixels)
    addr = RegisterAddress("accum-reg", 0, 30)
    for cycle in (17, 500, 2000):
        pair = [FaultSpec(addr, cycle), FaultSpec(addr, cycle)]
        assert np.array_equal(execute_with_faults(program, images[0].pixels,
                                                  pair), golden)


def test_fault_changes_exactly_one_register_at_injection(sa22):
    """Trace diff at the fault cycle shows exactly one flipped bit."""
    model = make_fc_model(4, 4, np.arange(16).reshape(4, 4) - 8,
                          [100, -100, 0, 50], 2)
    program = compile_model(model, sa22)
    image = np.array([3, -1, 4, -1], dtype=np.int8)
    fault = FaultSpec(RegisterAddress("sa-v-reg", 1, 13), 9)

    def registers_at(faults, cycle):
        state = PipelineState(sa22)
        from safsim.scheduler import new_amem
        amem = new_amem(program, image)
        t = 0
        for f in faults:
            state.run(program, amem, t, f.cycle + 1)
            state.inject(f.address.group, f.address.instance, f.address.bit)
            t = f.cycle + 1
        state.run(program, amem, t, cycle)
        return list(state.registers())

    clean = registers_at([], fault.cycle + 1)
    dirty = registers_at([fault], fault.cycle + 1)
    diffs = [(c, d) for c, d in zip(clean, dirty) if c != d]
    assert len(diffs) == 1
    (g, i, v0), (_, _, v1) = diffs[0]
    assert (g, i) == ("sa-v-reg", 1)
    assert v0 ^ v1 == 1 << 13


def test_validate_fault_ranges(sa22):
    model = make_fc_model(2, 2, np.ones((2, 2)), np.zeros(2), 0)
    program = compile_model(model, sa22)
    with pytest.raises(IndexError):
        validate_fault(FaultSpec(RegisterAddress("accum-reg", 5, 0), 0),
                       program)
    with pytest.raises(IndexError):
        validate_fault(FaultSpec(RegisterAddress("accum-reg", 0, 0),
                                 program.total_cycles), program)


def test_run_faulty_matches_execute_with_faults(fc3_fixture, sa22):
    model, images = fc3_fixture
    program = compile_model(model, sa22)
    fault = FaultSpec(RegisterAddress("round-reg", 0, 3), 1234)
    a = run_faulty(model, images[1].pixels, sa22, fault)
    b = execute_with_faults(program, images[1].pixels, [fault])
    assert np.array_equal(a, b)


def test_classify_masked():
    out = classify(np.array([1, 2, 3]), np.array([1, 2, 3]))
    assert out == Outcome(OutcomeKind.MASKED, 0)


def test_classify_noncritical():
    out = classify(np.array([10, 2, 3]), np.array([10, 5, 3]))
    assert out.kind is OutcomeKind.NON_CRITICAL
    assert out.logit_delta == 3


def test_classify_critical():
    out = classify(np.array([10, 2, 3]), np.array([10, 90, 3]))
    assert out.kind is OutcomeKind.CRITICAL
    assert out.logit_delta == 88


def test_classify_argmax_tie_breaks_low():
    # equal maxima resolve to the lowest index in both vectors
    out = classify(np.array([7, 7, 0]), np.array([7, 7, 1]))
    assert out.kind is OutcomeKind.NON_CRITICAL
    out = classify(np.array([7, 7, 0]), np.array([6, 7, 0]))
    assert out.kind is OutcomeKind.CRITICAL


def test_classify_shape_mismatch():
    with pytest.raises(ValueError):
        classify(np.array([1, 2]), np.array([1, 2, 3]))


def test_fault_persists_until_next_write(sa22):
    """A flip in a register that is never rewritten keeps its value."""
    model = make_fc_model(2, 2, np.ones((2, 2)), np.zeros(2), 0)
    program = compile_model(model, sa22)
    image = np.array([1, 1], dtype=np.int8)
    # pool-reg is never written by a model without pooling layers
    state = PipelineState(sa22)
    from safsim.scheduler import new_amem
    amem = new_amem(program, image)
    state.run(program, amem, 0, 3)
    state.inject("pool-reg", 0, 5)
    state.run(program, amem, 3, program.total_cycles)
    assert state.read_register("pool-reg", 0) == 1 << 5


def test_faulty_logits_eventually_differ(fc3_fixture, sa22):
    """A high accumulator bit flipped mid-computation must be visible."""
    model, images = fc3_fixture
    program = compile_model(model, sa22)
    golden = execute(program, images[0].pixels)
    hits = 0
    for cycle in range(100, 2000, 200):
        faulty = execute_with_faults(
            program, images[0].pixels,
            [FaultSpec(RegisterAddress("accum-reg", 0, 30), cycle)])
        hits += int(not np.array_equal(golden, faulty))
    assert hits > 0
