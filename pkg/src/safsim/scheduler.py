"""Compile a model into a deterministic cycle program and execute it.

Tiling: each layer is lowered to an M x K x N matmul, K is split into
ceil(K/R) row-tiles and N into ceil(N/C) column-tiles.  Column-tiles are
the outer loop so each accumulator stays live from bias load to rounding
of one output element.  Per output element: one bias-load cycle, then per
row-tile a weight-load cycle, a feed cycle and R+C propagation cycles
(the next tile's weight load overlaps the accumulate strobe), then
rounding, NLF and write-back strobes.  Partial tiles are zero padded;
zero inputs are absorbing for the MACs.

The resulting element stride is ceil(K/R)*(R+C+1) + 5 cycles; write-back
of element idx of column-tile j of a layer happens at

    layer_start + (j*M + idx)*stride + ceil(K/R)*(R+C+1) + 4

(one cycle later for the closing element of a pooling window, which is
written from pool-reg instead of nlf-reg).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datapath import PipelineState, SaConfig
from .lowering import lower_layer, patch_offsets, pool_plan
from .modelio import ModelSpec

_M32 = 0xFFFFFFFF


@dataclass
class Memories:
    """Protected storage blocks: weight, bias and activation memories."""

    wmem: np.ndarray   # int64 raw bytes, all layers' padded weight tiles
    bmem: np.ndarray   # int64 raw 32-bit words, padded per column tile
    amem_size: int     # activations: input image + per-layer write-back regions


@dataclass
class LayerPlan:
    index: int
    start_cycle: int
    n_i: int
    n_j: int
    m_total: int
    stride: int
    pool: bool
    in_offset: int
    out_offset: int
    out_size: int
    shift: int


@dataclass
class CycleProgram:
    sa: SaConfig
    total_cycles: int
    feed_addr: np.ndarray    # (T, R) amem read address per row, -1 = idle
    wload: np.ndarray        # (T,) wmem base of an RxC tile, -1 = none
    accum_op: np.ndarray     # (T, C) 0 hold / 1 load bias / 2 accumulate
    bias_addr: np.ndarray    # (T, C) bmem address, -1 = zero
    round_shift: np.ndarray  # (T,) shift amount, -1 = no strobe
    nlf_sel: np.ndarray      # (T,) LUT index, -1 = no strobe
    pool_op: np.ndarray      # (T,) 0 none / 1 restart / 2 max
    wb_addr: np.ndarray      # (T, C) amem write-back address, -1 = none
    wb_src: np.ndarray       # (T,) 0 = nlf-reg, 1 = pool-reg
    wmem: np.ndarray
    bmem: np.ndarray
    luts: np.ndarray         # (n_luts, 256) raw int64
    amem_size: int
    image_size: int
    logits_offset: int
    logits_len: int
    layers: list = field(default_factory=list)

    @property
    def memories(self) -> Memories:
        return Memories(wmem=self.wmem, bmem=self.bmem, amem_size=self.amem_size)


def _layer_matrix(layer) -> np.ndarray:
    """Weight matrix (K, N) in the lowering's flattening order, signed."""
    if layer.kind == "fc":
        return layer.weights.astype(np.int64)
    geom = layer.geometry()
    return layer.weights.reshape(geom.out_channels, geom.patch_len).T.astype(np.int64)


def element_output_cycle(plan: LayerPlan, j: int, idx: int, sa: SaConfig) -> int:
    """Closed-form cycle at which an output element is written back."""
    lat = plan.n_i * (sa.rows + sa.cols + 1) + 4
    cyc = plan.start_cycle + (j * plan.m_total + idx) * plan.stride + lat
    if plan.pool:
        cyc += 1  # written from pool-reg, one cycle after the closing max
    return cyc


def compile_model(model: ModelSpec, sa: SaConfig) -> CycleProgram:
    """Compile all layers of one inference into a cycle program."""
    model.validate()
    r, c = sa.rows, sa.cols
    i64 = np.int64

    # activation memory layout: image first, then one region per layer
    in_offsets = [0]
    size = int(np.prod(model.in_shape))
    for layer in model.layers:
        in_offsets.append(size)
        size += int(np.prod(layer.out_shape))
    image_size = int(np.prod(model.in_shape))

    # shared LUT table
    lut_index: dict = {}
    lut_rows = []
    layer_lut = []
    for layer in model.layers:
        key = layer.nlf_table.tobytes()
        if key not in lut_index:
            lut_index[key] = len(lut_rows)
            lut_rows.append(np.int64(layer.nlf_table) & 0xFF)
        layer_lut.append(lut_index[key])
    luts = np.stack(lut_rows).astype(i64)

    # per-layer lowering metadata + packed weight/bias memories
    wmem_parts, bmem_parts = [], []
    infos = []
    wmem_base = bmem_base = 0
    total = 0
    for li, layer in enumerate(model.layers):
        w = _layer_matrix(layer)
        k_total, n_total = w.shape
        if layer.kind == "fc":
            m_total = 1
            a_addr = None
        else:
            geom = layer.geometry()
            m_total = geom.out_h * geom.out_w
            a_addr = np.full((m_total, k_total), -1, dtype=i64)
            for m in range(m_total):
                for k, idx in patch_offsets(geom, m):
                    a_addr[m, k] = in_offsets[li] + idx
        n_i = -(-k_total // r)
        n_j = -(-n_total // c)
        tiles = np.zeros((n_j, n_i, r, c), dtype=i64)
        for j in range(n_j):
            for i in range(n_i):
                blk = w[i * r:(i + 1) * r, j * c:(j + 1) * c]
                tiles[j, i, :blk.shape[0], :blk.shape[1]] = blk
        wmem_parts.append(tiles.reshape(-1) & 0xFF)
        bias_pad = np.zeros(n_j * c, dtype=i64)
        bias_pad[:n_total] = np.int64(layer.bias) & _M32
        bmem_parts.append(bias_pad)

        if layer.pool:
            geom = layer.geometry()
            m_order = pool_plan(geom.out_h, geom.out_w)
        else:
            m_order = np.arange(m_total, dtype=i64)
        stride = n_i * (r + c + 1) + 5
        infos.append(dict(layer=layer, li=li, k_total=k_total, n_total=n_total,
                          m_total=m_total, n_i=n_i, n_j=n_j, stride=stride,
                          a_addr=a_addr, m_order=m_order,
                          wmem_base=wmem_base, bmem_base=bmem_base,
                          in_off=in_offsets[li], out_off=in_offsets[li + 1],
                          lut=layer_lut[li]))
        wmem_base += tiles.size
        bmem_base += bias_pad.size
        total += n_j * m_total * stride
    total += 1  # room for a trailing pool write-back

    feed_addr = np.full((total, r), -1, dtype=i64)
    wload = np.full(total, -1, dtype=i64)
    accum_op = np.zeros((total, c), dtype=i64)
    bias_addr = np.full((total, c), -1, dtype=i64)
    round_shift = np.full(total, -1, dtype=i64)
    nlf_sel = np.full(total, -1, dtype=i64)
    pool_op = np.zeros(total, dtype=i64)
    wb_addr = np.full((total, c), -1, dtype=i64)
    wb_src = np.zeros(total, dtype=i64)

    plans = []
    t = 0
    end = 0
    for info in infos:
        layer = info["layer"]
        n_i, n_j = info["n_i"], info["n_j"]
        m_total, stride = info["m_total"], info["stride"]
        k_total, n_total = info["k_total"], info["n_total"]
        pool = layer.pool
        m_p = m_total // 4 if pool else m_total
        plans.append(LayerPlan(index=info["li"], start_cycle=t, n_i=n_i,
                               n_j=n_j, m_total=m_total, stride=stride,
                               pool=pool, in_offset=info["in_off"],
                               out_offset=info["out_off"],
                               out_size=n_total * m_p, shift=layer.shift))
        for j in range(n_j):
            for idx, m in enumerate(info["m_order"]):
                # bias load into the column accumulators
                accum_op[t, :] = 1
                for cc in range(c):
                    bias_addr[t, cc] = info["bmem_base"] + j * c + cc
                # row tiles: weight load, feed, accumulate
                for i in range(n_i):
                    ct = t + 1 + i * (r + c + 1)
                    wload[ct] = info["wmem_base"] + (j * n_i + i) * r * c
                    for rr in range(r):
                        k = i * r + rr
                        if k < k_total:
                            if info["a_addr"] is None:
                                feed_addr[ct + 1, rr] = info["in_off"] + k
                            else:
                                feed_addr[ct + 1, rr] = info["a_addr"][m, k]
                    accum_op[t + 1 + (i + 1) * (r + c + 1), :] = 2
                tau = t + 1 + n_i * (r + c + 1)
                round_shift[tau + 1] = layer.shift
                nlf_sel[tau + 2] = info["lut"]
                if pool:
                    pool_op[tau + 3] = 1 if idx % 4 == 0 else 2
                    if idx % 4 == 3:
                        for cc in range(c):
                            n = j * c + cc
                            if n < n_total:
                                wb_addr[tau + 4, cc] = \
                                    info["out_off"] + n * m_p + idx // 4
                        wb_src[tau + 4] = 1
                        end = max(end, tau + 5)
                else:
                    for cc in range(c):
                        n = j * c + cc
                        if n < n_total:
                            wb_addr[tau + 3, cc] = info["out_off"] + n * m_total + int(m)
                    end = max(end, tau + 4)
                t = tau + 4
        end = max(end, t)

    total_cycles = end
    logits_offset = in_offsets[-1]
    logits_len = int(np.prod(model.layers[-1].out_shape))
    return CycleProgram(
        sa=sa, total_cycles=total_cycles,
        feed_addr=feed_addr[:total_cycles], wload=wload[:total_cycles],
        accum_op=accum_op[:total_cycles], bias_addr=bias_addr[:total_cycles],
        round_shift=round_shift[:total_cycles], nlf_sel=nlf_sel[:total_cycles],
        pool_op=pool_op[:total_cycles], wb_addr=wb_addr[:total_cycles],
        wb_src=wb_src[:total_cycles],
        wmem=np.concatenate(wmem_parts) if wmem_parts else np.zeros(0, dtype=i64),
        bmem=np.concatenate(bmem_parts) if bmem_parts else np.zeros(0, dtype=i64),
        luts=luts, amem_size=size, image_size=image_size,
        logits_offset=logits_offset, logits_len=logits_len, layers=plans)


def new_amem(program: CycleProgram, image: np.ndarray) -> np.ndarray:
    """Fresh activation memory with the image loaded at offset 0."""
    flat = np.asarray(image, dtype=np.int64).reshape(-1)
    if flat.size != program.image_size:
        raise ValueError(
            f"image has {flat.size} elements, model expects {program.image_size}")
    amem = np.zeros(program.amem_size, dtype=np.int64)
    amem[:flat.size] = flat & 0xFF
    return amem


def read_logits(program: CycleProgram, amem: np.ndarray) -> np.ndarray:
    raw = amem[program.logits_offset:program.logits_offset + program.logits_len]
    return np.where(raw >= 128, raw - 256, raw).astype(np.int8)


def execute(program: CycleProgram, image: np.ndarray,
            trace=None) -> np.ndarray:
    """Run the full cycle program on a fresh pipeline; return the logits.

    trace: optional writable text stream receiving one line per register
    per cycle: "<cycle> <group> <instance> 0x<value>".
    """
    state = PipelineState(program.sa)
    amem = new_amem(program, image)
    if trace is None:
        state.run(program, amem, 0, program.total_cycles)
    else:
        for t in range(program.total_cycles):
            state.run(program, amem, t, t + 1)
            for group, inst, raw in state.registers():
                trace.write(f"{t} {group} {inst} 0x{raw:x}\n")
    return read_logits(program, amem)


def run_golden(model: ModelSpec, image: np.ndarray, sa: SaConfig,
               trace=None) -> np.ndarray:
    """Fault-free cycle-accurate inference; logits from the write-back region."""
    return execute(compile_model(model, sa), image, trace=trace)


# --- functional reference (the independent oracle for equivalence tests) ---

def _requantize_vec(y32: np.ndarray, shift: int) -> np.ndarray:
    v = y32
    if shift > 0:
        v = (v + (1 << (shift - 1))) & _M32
        v = np.where(v >= 1 << 31, v - (1 << 32), v)
        v = v >> shift
    return np.clip(v, -128, 127)


def reference_inference(model: ModelSpec, image: np.ndarray) -> np.ndarray:
    """Pure layer-by-layer evaluation with no pipeline model.

    Matmul in wrapping 32-bit arithmetic, plus bias, requantize, NLF table
    lookup, optional 2x2 max-pool; exactly the arithmetic contract of the
    datapath, with none of its timing.
    """
    model.validate()
    act = np.asarray(image, dtype=np.int8).reshape(model.in_shape)
    for layer in model.layers:
        prob = lower_layer(layer, act)
        y = prob.a.astype(np.int64) @ prob.w.astype(np.int64) + prob.bias.astype(np.int64)
        y &= _M32
        y = np.where(y >= 1 << 31, y - (1 << 32), y)
        y = _requantize_vec(y, layer.shift)
        table = layer.nlf_table.astype(np.int8)
        y = table[np.int64(y) & 0xFF]          # (M, N) int8
        out = y.T                              # channel-major
        if layer.pool:
            oh, ow = prob.pool_shape
            n = out.shape[0]
            out = out.reshape(n, oh // 2, 2, ow // 2, 2).max(axis=(2, 4))
        act = out.reshape(layer.out_shape)
    return act.reshape(-1).astype(np.int8)
