"""Register-level model of the weight-stationary systolic-array pipeline.

Every named flip-flop group of the accelerator is a stateful, addressable
value updated once per clock edge:

  w-reg             R*C   x 8-bit   stationary weights
  sa-ffchain-h-reg  sum(r+1)  x 8-bit   input skew chains (row r: r+1 regs)
  sa-h-reg          R*(C-1) x 8-bit  activation forwarding between columns
  sa-v-reg          (R-1)*C x 32-bit partial sums between rows
  sa-ffchain-v-reg  sum(C-c) x 32-bit output deskew chains (col c: C-c regs)
  accum-reg         C x 32-bit  column accumulators
  round-reg         C x 8-bit   requantized outputs
  nlf-reg           C x 8-bit   post-NLF outputs
  pool-reg          C x 8-bit   running-max pool registers

Chain instances are numbered from the entry side (position 0 receives new
data).  Activations enter at the skew chains, flow left to right; partial
sums flow top to bottom into the deskew chains.  An activation fed at cycle
t reaches the accumulator input at cycle t + R + C.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernel import step_range
from .quant import Lut

GROUP_ORDER = (
    "w-reg",
    "sa-ffchain-h-reg",
    "sa-h-reg",
    "sa-v-reg",
    "sa-ffchain-v-reg",
    "accum-reg",
    "round-reg",
    "nlf-reg",
    "pool-reg",
)

GROUP_WIDTHS = {
    "w-reg": 8,
    "sa-ffchain-h-reg": 8,
    "sa-h-reg": 8,
    "sa-v-reg": 32,
    "sa-ffchain-v-reg": 32,
    "accum-reg": 32,
    "round-reg": 8,
    "nlf-reg": 8,
    "pool-reg": 8,
}


@dataclass(frozen=True)
class SaConfig:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"array size must be >= 1x1, got {self.rows}x{self.cols}")

    def __str__(self):
        return f"{self.rows}x{self.cols}"


def group_count(group: str, sa: SaConfig) -> int:
    """Number of register instances in a group for a given array size."""
    r, c = sa.rows, sa.cols
    return {
        "w-reg": r * c,
        "sa-ffchain-h-reg": r * (r + 1) // 2,
        "sa-h-reg": r * (c - 1),
        "sa-v-reg": (r - 1) * c,
        "sa-ffchain-v-reg": c * (c + 1) // 2,
        "accum-reg": c,
        "round-reg": c,
        "nlf-reg": c,
        "pool-reg": c,
    }[group]


def register_census(sa: SaConfig) -> dict:
    """Per-group (instance count, bit width, total bits)."""
    out = {}
    for g in GROUP_ORDER:
        n = group_count(g, sa)
        w = GROUP_WIDTHS[g]
        out[g] = (n, w, n * w)
    return out


def total_ff_bits(sa: SaConfig) -> int:
    return sum(bits for _, _, bits in register_census(sa).values())


class DrainError(RuntimeError):
    """drain() called before in-flight data could have reached the outputs."""


_POOL_OPS = {"none": 0, "restart": 1, "max": 2}


class PipelineState:
    """Mutable register state of one pipeline instance.

    Single-threaded: exactly one caller may step a given instance at a
    time.  Distinct instances share nothing.
    """

    def __init__(self, sa: SaConfig):
        self.sa = sa
        r, c = sa.rows, sa.cols
        i64 = np.int64
        self.w = np.zeros(r * c, dtype=i64)
        self.skew = np.zeros(r * (r + 1) // 2, dtype=i64)
        self.skew_off = np.cumsum([0] + [k + 1 for k in range(r - 1)]).astype(i64)
        self.sah = np.zeros(r * (c - 1), dtype=i64)
        self.sav = np.zeros((r - 1) * c, dtype=i64)
        self.desk = np.zeros(c * (c + 1) // 2, dtype=i64)
        self.desk_off = np.cumsum([0] + [c - k for k in range(c - 1)]).astype(i64)
        self.accum = np.zeros(c, dtype=i64)
        self.roundr = np.zeros(c, dtype=i64)
        self.nlfr = np.zeros(c, dtype=i64)
        self.poolr = np.zeros(c, dtype=i64)
        self.cycle = 0
        self._ready_cycle = 0
        # scratch buffers reused by every kernel call
        self._scr_a = np.zeros(r * c, dtype=i64)
        self._scr_u = np.zeros(r * c, dtype=i64)
        self._scr_feed = np.zeros(r, dtype=i64)
        self._scr_col = np.zeros((4, c), dtype=i64)
        # one-cycle micro-program for the direct step()/load_weights() API
        self._p_feed = np.full((1, r), -1, dtype=i64)
        self._p_wload = np.full(1, -1, dtype=i64)
        self._p_accop = np.zeros((1, c), dtype=i64)
        self._p_bias = np.full((1, c), -1, dtype=i64)
        self._p_round = np.full(1, -1, dtype=i64)
        self._p_nlf = np.full(1, -1, dtype=i64)
        self._p_pool = np.zeros(1, dtype=i64)
        self._p_wb = np.full((1, c), -1, dtype=i64)
        self._p_wbsrc = np.zeros(1, dtype=i64)
        self._s_amem = np.zeros(r, dtype=i64)
        self._s_wmem = np.zeros(r * c, dtype=i64)
        self._s_bmem = np.zeros(c, dtype=i64)
        self._s_lut = np.zeros((1, 256), dtype=i64)

    # ---- group addressing -------------------------------------------------

    def _group_array(self, group: str) -> np.ndarray:
        return {
            "w-reg": self.w,
            "sa-ffchain-h-reg": self.skew,
            "sa-h-reg": self.sah,
            "sa-v-reg": self.sav,
            "sa-ffchain-v-reg": self.desk,
            "accum-reg": self.accum,
            "round-reg": self.roundr,
            "nlf-reg": self.nlfr,
            "pool-reg": self.poolr,
        }[group]

    def read_register(self, group: str, instance: int) -> int:
        return int(self._group_array(group)[instance])

    def inject(self, group: str, instance: int, bit: int) -> None:
        """Flip one bit of one register (transient upset latched in an FF)."""
        arr = self._group_array(group)
        if not 0 <= instance < arr.shape[0]:
            raise IndexError(f"{group} has no instance {instance} on a {self.sa} array")
        if not 0 <= bit < GROUP_WIDTHS[group]:
            raise IndexError(f"bit {bit} out of range for {group} ({GROUP_WIDTHS[group]}-bit)")
        arr[instance] ^= np.int64(1 << bit)

    def registers(self):
        """Yield (group, instance, raw value) in canonical order."""
        for g in GROUP_ORDER:
            arr = self._group_array(g)
            for i in range(arr.shape[0]):
                yield g, i, int(arr[i])

    # ---- state save/restore ----------------------------------------------

    def snapshot(self) -> tuple:
        return (self.w.copy(), self.skew.copy(), self.sah.copy(),
                self.sav.copy(), self.desk.copy(), self.accum.copy(),
                self.roundr.copy(), self.nlfr.copy(), self.poolr.copy(),
                self.cycle)

    def restore(self, snap: tuple) -> None:
        (w, skew, sah, sav, desk, accum, roundr, nlfr, poolr, cycle) = snap
        self.w[:] = w
        self.skew[:] = skew
        self.sah[:] = sah
        self.sav[:] = sav
        self.desk[:] = desk
        self.accum[:] = accum
        self.roundr[:] = roundr
        self.nlfr[:] = nlfr
        self.poolr[:] = poolr
        self.cycle = cycle

    # ---- program execution ------------------------------------------------

    def run(self, program, amem: np.ndarray, t0: int, t1: int) -> None:
        """Advance through cycles [t0, t1) of a compiled cycle program."""
        if t1 > t0:
            step_range(self.sa.rows, self.sa.cols,
                       self.w, self.skew, self.skew_off, self.sah, self.sav,
                       self.desk, self.desk_off, self.accum, self.roundr,
                       self.nlfr, self.poolr,
                       amem, program.wmem, program.bmem, program.luts,
                       program.feed_addr, program.wload, program.accum_op,
                       program.bias_addr, program.round_shift, program.nlf_sel,
                       program.pool_op, program.wb_addr, program.wb_src,
                       t0, t1,
                       self._scr_a, self._scr_u, self._scr_feed, self._scr_col)
            self.cycle += t1 - t0

    # ---- direct register-level API ---------------------------------------

    def load_weights(self, tile: np.ndarray) -> None:
        """Broadcast-load a stationary R x C weight tile (one cycle)."""
        tile = np.asarray(tile)
        if tile.shape != (self.sa.rows, self.sa.cols):
            raise ValueError(
                f"weight tile shape {tile.shape} != ({self.sa.rows}, {self.sa.cols})")
        self._s_wmem[:] = np.int64(tile.reshape(-1)) & 0xFF
        self._p_wload[0] = 0
        self._micro_step()
        self._p_wload[0] = -1

    def step(self, row_inputs=None, accum_ctrl=None, round_shift=None,
             nlf_lut: Lut | None = None, pool_op: str = "none") -> None:
        """Advance one clock edge under explicit control.

        row_inputs: per-row activation (int8) or None for an idle lane.
        accum_ctrl: per-column "hold" | "acc" | ("bias", int32), or None.
        round_shift: strobe the rounding stage with this shift amount.
        nlf_lut: strobe the NLF stage through this lookup table.
        pool_op: "none" | "restart" | "max".
        """
        r, c = self.sa.rows, self.sa.cols
        fed = False
        if row_inputs is not None:
            if len(row_inputs) != r:
                raise ValueError(f"expected {r} row inputs, got {len(row_inputs)}")
            for i, v in enumerate(row_inputs):
                if v is None:
                    self._p_feed[0, i] = -1
                else:
                    self._s_amem[i] = np.int64(v) & 0xFF
                    self._p_feed[0, i] = i
                    fed = True
        if accum_ctrl is not None:
            if len(accum_ctrl) != c:
                raise ValueError(f"expected {c} accumulator controls")
            for i, ctrl in enumerate(accum_ctrl):
                if ctrl == "hold":
                    self._p_accop[0, i] = 0
                elif ctrl == "acc":
                    self._p_accop[0, i] = 2
                else:
                    self._p_accop[0, i] = 1
                    self._s_bmem[i] = np.int64(ctrl[1]) & 0xFFFFFFFF
                    self._p_bias[0, i] = i
        if round_shift is not None:
            self._p_round[0] = round_shift
        if nlf_lut is not None:
            self._s_lut[0, :] = np.int64(nlf_lut.table) & 0xFF
            self._p_nlf[0] = 0
        self._p_pool[0] = _POOL_OPS[pool_op]
        if fed:
            # earliest cycle at which this feed can have reached nlf-reg
            self._ready_cycle = self.cycle + r + c + 3
        self._micro_step()
        # reset one-shot controls
        self._p_feed[0, :] = -1
        self._p_accop[0, :] = 0
        self._p_bias[0, :] = -1
        self._p_round[0] = -1
        self._p_nlf[0] = -1
        self._p_pool[0] = 0

    def _micro_step(self) -> None:
        step_range(self.sa.rows, self.sa.cols,
                   self.w, self.skew, self.skew_off, self.sah, self.sav,
                   self.desk, self.desk_off, self.accum, self.roundr,
                   self.nlfr, self.poolr,
                   self._s_amem, self._s_wmem, self._s_bmem, self._s_lut,
                   self._p_feed, self._p_wload, self._p_accop, self._p_bias,
                   self._p_round, self._p_nlf, self._p_pool, self._p_wb,
                   self._p_wbsrc,
                   0, 1,
                   self._scr_a, self._scr_u, self._scr_feed, self._scr_col)
        self.cycle += 1

    def drain(self, pool: bool = False) -> np.ndarray:
        """Post-mux outputs for the completed output row (int8 per column).

        The pool bypass selects nlf-reg; pooling mode selects pool-reg.
        """
        if self.cycle < self._ready_cycle:
            raise DrainError(
                f"drain at cycle {self.cycle}: pipeline not complete before "
                f"cycle {self._ready_cycle}")
        raw = self.poolr if pool else self.nlfr
        return np.where(raw >= 128, raw - 256, raw).astype(np.int8)
