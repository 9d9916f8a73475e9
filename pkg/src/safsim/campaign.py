"""Monte-Carlo fault-injection campaigns.

Per image: one golden run, then N injected runs at seeded pseudo-random
(flip-flop, cycle) targets.  Each injection is classified against the
golden logits and logged; per-register-group rates F_noncrit and F_crit
are aggregated with 95% Wilson score intervals.

Per-injection PRNG streams depend only on (campaign seed, image id,
iteration), so record logs are byte-identical regardless of execution
order or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .datapath import GROUP_ORDER, GROUP_WIDTHS, PipelineState, SaConfig, \
    group_count
from .faults import FaultSpec, FfSpace, RegisterAddress, classify, inject
from .modelio import ModelSpec
from .rng import SplitMix64, stream_seed
from .scheduler import CycleProgram, compile_model, new_amem, read_logits

# the four-group rollup used to discuss results: 8-bit array registers,
# 32-bit array registers, the 32-bit accumulators, and post-processing
GROUP_ROLLUP = {
    "w-reg": "8bit-sa-regs",
    "sa-ffchain-h-reg": "8bit-sa-regs",
    "sa-h-reg": "8bit-sa-regs",
    "sa-v-reg": "32bit-sa-regs",
    "sa-ffchain-v-reg": "32bit-sa-regs",
    "accum-reg": "accum-regs",
    "round-reg": "post-proc-regs",
    "nlf-reg": "post-proc-regs",
    "pool-reg": "post-proc-regs",
}
ROLLUP_ORDER = ("8bit-sa-regs", "32bit-sa-regs", "accum-regs", "post-proc-regs")

_Z95 = 1.959963984540054


def wilson_interval(successes: int, n: int, z: float = _Z95) -> tuple:
    """95% Wilson score interval for a binomial rate (safe near 0 and 1)."""
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    denom = 1.0 + z * z / n
    center = p + z * z / (2 * n)
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n))
    # roundoff can push the bounds a hair outside [0, 1]
    return (max(0.0, (center - half) / denom),
            min(1.0, (center + half) / denom))


@dataclass
class GroupStats:
    n: int = 0
    masked: int = 0
    noncrit: int = 0
    crit: int = 0

    @property
    def f_noncrit(self) -> float:
        return self.noncrit / self.n if self.n else 0.0

    @property
    def f_crit(self) -> float:
        return self.crit / self.n if self.n else 0.0

    def noncrit_interval(self) -> tuple:
        return wilson_interval(self.noncrit, self.n)

    def crit_interval(self) -> tuple:
        return wilson_interval(self.crit, self.n)


@dataclass
class CampaignStats:
    """Per-register-group and four-group-rollup outcome counts."""

    groups: dict = field(default_factory=dict)

    def rows(self):
        """(name, GroupStats) in canonical order, registers then rollups."""
        for name in list(GROUP_ORDER) + list(ROLLUP_ORDER):
            if name in self.groups:
                yield name, self.groups[name]


@dataclass(frozen=True)
class CampaignRecord:
    image: int
    iteration: int
    cycle: int
    group: str
    instance: int
    bit: int
    outcome: str            # "masked" | "noncrit" | "crit"
    logit_delta: int


@dataclass(frozen=True)
class GoldenRecord:
    image: int
    model_cycles: int
    golden: tuple


@dataclass
class CampaignConfig:
    model: ModelSpec
    images: list                 # list of ImageSample
    sa: SaConfig
    iterations: int
    seed: int
    stratified: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


@dataclass
class CampaignResult:
    golden: list                 # GoldenRecord per image
    records: list                # CampaignRecord per injection
    stats: CampaignStats


def sample_fault(space: FfSpace, total_cycles: int, seed: int, image_id: int,
                 iteration: int, stratified: bool) -> FaultSpec:
    """Deterministic (FF, cycle) draw for one injection."""
    rng = SplitMix64(stream_seed(seed, image_id, iteration))
    if stratified:
        groups = [g for g in GROUP_ORDER if group_count(g, space.sa) > 0]
        group = groups[iteration % len(groups)]
        inst, bit = divmod(rng.below(space.group_bits(group)),
                           GROUP_WIDTHS[group])
        address = RegisterAddress(group, inst, bit)
    else:
        address = space.address_of(rng.below(space.total_bits))
    return FaultSpec(address, rng.below(total_cycles))


class Injector:
    """Fault-run engine for one (program, image) pair.

    The golden run is checkpointed so each injected run only replays from
    the checkpoint preceding its fault cycle.
    """

    def __init__(self, program: CycleProgram, image: np.ndarray,
                 ckpt_interval: int | None = None):
        self.program = program
        total = program.total_cycles
        self.interval = ckpt_interval or max(64, total // 128)
        state = PipelineState(program.sa)
        amem = new_amem(program, image)
        self._ckpts = []
        t = 0
        while t < total:
            self._ckpts.append((state.snapshot(), amem.copy()))
            nxt = min(t + self.interval, total)
            state.run(program, amem, t, nxt)
            t = nxt
        self.golden_logits = read_logits(program, amem)
        self._state = state  # reused as working state

    def run_fault(self, fault: FaultSpec) -> np.ndarray:
        program = self.program
        idx = fault.cycle // self.interval
        snap, amem = self._ckpts[idx]
        amem = amem.copy()
        state = self._state
        state.restore(snap)
        t = idx * self.interval
        state.run(program, amem, t, fault.cycle + 1)
        inject(state, fault.address)
        state.run(program, amem, fault.cycle + 1, program.total_cycles)
        return read_logits(program, amem)


def campaign_image(program: CycleProgram, space: FfSpace, image: np.ndarray,
                   image_id: int, iterations: int, seed: int,
                   stratified: bool) -> tuple:
    """Golden record plus all injection records for one image."""
    injector = Injector(program, image)
    golden = GoldenRecord(image=image_id, model_cycles=program.total_cycles,
                          golden=tuple(int(v) for v in injector.golden_logits))
    records = []
    for it in range(iterations):
        fault = sample_fault(space, program.total_cycles, seed, image_id, it,
                             stratified)
        faulty = injector.run_fault(fault)
        outcome = classify(injector.golden_logits, faulty)
        records.append(CampaignRecord(
            image=image_id, iteration=it, cycle=fault.cycle,
            group=fault.address.group, instance=fault.address.instance,
            bit=fault.address.bit, outcome=outcome.kind.value,
            logit_delta=outcome.logit_delta))
    return golden, records


_worker_ctx: dict = {}


def _init_worker(model, sa, iterations, seed, stratified):
    _worker_ctx["program"] = compile_model(model, sa)
    _worker_ctx["space"] = FfSpace(sa)
    _worker_ctx["iterations"] = iterations
    _worker_ctx["seed"] = seed
    _worker_ctx["stratified"] = stratified


def _run_worker(args):
    image_id, pixels = args
    return campaign_image(_worker_ctx["program"], _worker_ctx["space"], pixels,
                          image_id, _worker_ctx["iterations"],
                          _worker_ctx["seed"], _worker_ctx["stratified"])


def run_campaign(cfg: CampaignConfig, progress=None) -> CampaignResult:
    """Run the full campaign; identical results for any jobs count."""
    tasks = [(i, sample.pixels) for i, sample in enumerate(cfg.images)]
    per_image = []
    if cfg.jobs == 1 or len(tasks) <= 1:
        _init_worker(cfg.model, cfg.sa, cfg.iterations, cfg.seed, cfg.stratified)
        for task in tasks:
            per_image.append(_run_worker(task))
            if progress:
                progress(task[0])
    else:
        with ProcessPoolExecutor(
                max_workers=min(cfg.jobs, len(tasks)),
                initializer=_init_worker,
                initargs=(cfg.model, cfg.sa, cfg.iterations, cfg.seed,
                          cfg.stratified)) as pool:
            for i, result in enumerate(pool.map(_run_worker, tasks)):
                per_image.append(result)
                if progress:
                    progress(i)
    golden = [g for g, _ in per_image]
    records = [rec for _, recs in per_image for rec in recs]
    return CampaignResult(golden=golden, records=records,
                          stats=aggregate(records))


def aggregate(records) -> CampaignStats:
    """Per-group counts plus the four-group rollup, Wilson-ready."""
    stats = CampaignStats()
    for rec in records:
        for name in (rec.group, GROUP_ROLLUP[rec.group]):
            gs = stats.groups.setdefault(name, GroupStats())
            gs.n += 1
            if rec.outcome == "masked":
                gs.masked += 1
            elif rec.outcome == "noncrit":
                gs.noncrit += 1
            else:
                gs.crit += 1
    return stats
