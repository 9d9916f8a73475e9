"""Single-bit fault injection and outcome classification.

The fault model is a transient upset latched in a flip-flop: immediately
after the clock-edge update of the chosen cycle, one bit of one register is
XOR-flipped.  The corrupted value is observed by downstream logic from the
next cycle on and persists until the register's next normal write.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .datapath import GROUP_ORDER, GROUP_WIDTHS, PipelineState, SaConfig, \
    group_count
from .modelio import ModelSpec
from .scheduler import CycleProgram, compile_model, new_amem, read_logits


@dataclass(frozen=True)
class RegisterAddress:
    """One flip-flop bit: (group, instance within group, bit index).

    Canonical instance ordering is row-major (chains: by row/column, then
    position from the entry side), matching PipelineState.registers().
    """

    group: str
    instance: int
    bit: int

    def __post_init__(self):
        if self.group not in GROUP_WIDTHS:
            raise ValueError(f"unknown register group {self.group!r}")
        if not 0 <= self.bit < GROUP_WIDTHS[self.group]:
            raise ValueError(
                f"bit {self.bit} out of range for {self.group} "
                f"({GROUP_WIDTHS[self.group]}-bit)")


@dataclass(frozen=True)
class FaultSpec:
    address: RegisterAddress
    cycle: int


class OutcomeKind(enum.Enum):
    MASKED = "masked"
    NON_CRITICAL = "noncrit"
    CRITICAL = "crit"


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    logit_delta: int


def enumerate_ffs(sa: SaConfig) -> list:
    """Every injectable flip-flop bit, in canonical order."""
    out = []
    for group in GROUP_ORDER:
        width = GROUP_WIDTHS[group]
        for inst in range(group_count(group, sa)):
            for bit in range(width):
                out.append(RegisterAddress(group, inst, bit))
    return out


class FfSpace:
    """Bit-index <-> RegisterAddress mapping for one array size."""

    def __init__(self, sa: SaConfig):
        self.sa = sa
        self._groups = []
        base = 0
        for group in GROUP_ORDER:
            bits = group_count(group, sa) * GROUP_WIDTHS[group]
            self._groups.append((group, base, bits))
            base += bits
        self.total_bits = base

    def address_of(self, index: int) -> RegisterAddress:
        if not 0 <= index < self.total_bits:
            raise IndexError(f"FF bit index {index} out of range")
        for group, base, bits in self._groups:
            if index < base + bits:
                width = GROUP_WIDTHS[group]
                inst, bit = divmod(index - base, width)
                return RegisterAddress(group, inst, bit)
        raise AssertionError("unreachable")

    def group_bits(self, group: str) -> int:
        for g, _, bits in self._groups:
            if g == group:
                return bits
        raise KeyError(group)


def inject(state: PipelineState, address: RegisterAddress) -> None:
    """Flip the addressed bit in the current state."""
    state.inject(address.group, address.instance, address.bit)


def validate_fault(fault: FaultSpec, program: CycleProgram) -> None:
    sa = program.sa
    if fault.address.instance >= group_count(fault.address.group, sa):
        raise IndexError(
            f"{fault.address.group} has no instance {fault.address.instance} "
            f"on a {sa} array")
    if not 0 <= fault.cycle < program.total_cycles:
        raise IndexError(
            f"fault cycle {fault.cycle} outside [0, {program.total_cycles})")


def execute_with_faults(program: CycleProgram, image: np.ndarray,
                        faults) -> np.ndarray:
    """Run one inference injecting the given faults at their cycles."""
    for f in faults:
        validate_fault(f, program)
    state = PipelineState(program.sa)
    amem = new_amem(program, image)
    t = 0
    for f in sorted(faults, key=lambda f: f.cycle):
        state.run(program, amem, t, f.cycle + 1)
        inject(state, f.address)
        t = f.cycle + 1
    state.run(program, amem, t, program.total_cycles)
    return read_logits(program, amem)


def run_faulty(model: ModelSpec, image: np.ndarray, sa: SaConfig,
               fault: FaultSpec) -> np.ndarray:
    """Identical to the golden run except for the single injection."""
    return execute_with_faults(compile_model(model, sa), image, [fault])


def classify(golden: np.ndarray, faulty: np.ndarray) -> Outcome:
    """Compare a faulty inference against the golden reference.

    Equal vectors are masked; an argmax change is critical (ties break to
    the lowest index in both vectors); any other difference is non-critical.
    """
    golden = np.asarray(golden)
    faulty = np.asarray(faulty)
    if golden.shape != faulty.shape:
        raise ValueError(f"logit shapes differ: {golden.shape} vs {faulty.shape}")
    delta = int(np.max(np.abs(golden.astype(np.int64) - faulty.astype(np.int64)),
                       initial=0))
    if delta == 0:
        return Outcome(OutcomeKind.MASKED, 0)
    if int(np.argmax(golden)) != int(np.argmax(faulty)):
        return Outcome(OutcomeKind.CRITICAL, delta)
    return Outcome(OutcomeKind.NON_CRITICAL, delta)
