"""Clock-edge kernel for the accelerator pipeline.

One function advances the register state by a range of cycles of a compiled
cycle program.  Registers are stored as unsigned raw words (8-bit registers
in [0, 255], 32-bit registers in [0, 2**32)) so that a fault injection is a
plain XOR on the stored value; signed interpretation happens at the readers.

All updates within a cycle use the pre-edge register values, matching
flip-flop semantics: every register is read and written exactly once per
clock edge.

The function is JIT-compiled with numba when available; the pure-Python
body is the fallback and the semantic reference.
"""

from __future__ import annotations

_M32 = 0xFFFFFFFF
_WRAP = 1 << 32
_HALF32 = 1 << 31


def _step_range(R, C, w, skew, skew_off, sah, sav, desk, desk_off,
                accum, roundr, nlfr, poolr,
                amem, wmem, bmem, luts,
                feed_addr, wload, accum_op, bias_addr, round_shift,
                nlf_sel, pool_op, wb_addr, wb_src,
                t0, t1,
                scr_a, scr_u, scr_feed, scr_col):
    for t in range(t0, t1):
        # --- combinational read phase (pre-edge values only) ---
        for r in range(R):
            for c in range(C):
                if c == 0:
                    a_raw = skew[skew_off[r] + r]
                else:
                    a_raw = sah[r * (C - 1) + c - 1]
                a = a_raw - 256 if a_raw >= 128 else a_raw
                w_raw = w[r * C + c]
                ws = w_raw - 256 if w_raw >= 128 else w_raw
                ps = sav[(r - 1) * C + c] if r > 0 else 0
                scr_a[r * C + c] = a_raw
                scr_u[r * C + c] = (ps + a * ws) & _M32
        for r in range(R):
            fa = feed_addr[t, r]
            scr_feed[r] = amem[fa] if fa >= 0 else 0
        for c in range(C):
            scr_col[0, c] = accum[c]                       # accum pre-edge
            scr_col[1, c] = roundr[c]                      # round pre-edge
            scr_col[2, c] = nlfr[c]                        # nlf pre-edge
            scr_col[3, c] = desk[desk_off[c] + (C - c) - 1]  # deskew output

        # --- commit phase ---
        # activation write-back (reads pre-edge nlf/pool registers)
        for c in range(C):
            wa = wb_addr[t, c]
            if wa >= 0:
                amem[wa] = poolr[c] if wb_src[t] == 1 else scr_col[2, c]
        # pool registers: running max, or window restart
        po = pool_op[t]
        if po == 1:
            for c in range(C):
                poolr[c] = scr_col[2, c]
        elif po == 2:
            for c in range(C):
                pr = poolr[c]
                nr = scr_col[2, c]
                prs = pr - 256 if pr >= 128 else pr
                nrs = nr - 256 if nr >= 128 else nr
                poolr[c] = pr if prs >= nrs else nr
        # NLF lookup
        sel = nlf_sel[t]
        if sel >= 0:
            for c in range(C):
                nlfr[c] = luts[sel, scr_col[1, c]]
        # rounding: shift with half-up offset, then clip to int8
        s = round_shift[t]
        if s >= 0:
            for c in range(C):
                v = scr_col[0, c]
                if v >= _HALF32:
                    v -= _WRAP
                if s > 0:
                    v = (v + (1 << (s - 1))) & _M32
                    if v >= _HALF32:
                        v -= _WRAP
                    v >>= s
                if v > 127:
                    v = 127
                elif v < -128:
                    v = -128
                roundr[c] = v & 0xFF
        # column accumulators
        for c in range(C):
            op = accum_op[t, c]
            if op == 1:
                ba = bias_addr[t, c]
                accum[c] = bmem[ba] if ba >= 0 else 0
            elif op == 2:
                accum[c] = (accum[c] + scr_col[3, c]) & _M32
        # output deskew chains shift towards the accumulator
        for c in range(C):
            base = desk_off[c]
            for p in range(C - c - 1, 0, -1):
                desk[base + p] = desk[base + p - 1]
            desk[base] = scr_u[(R - 1) * C + c]
        # inter-row partial-sum registers
        for r in range(R - 1):
            for c in range(C):
                sav[r * C + c] = scr_u[r * C + c]
        # inter-column activation forwarding registers
        for r in range(R):
            for c in range(C - 1):
                sah[r * (C - 1) + c] = scr_a[r * C + c]
        # input skew chains shift towards the array
        for r in range(R):
            base = skew_off[r]
            for p in range(r, 0, -1):
                skew[base + p] = skew[base + p - 1]
            skew[base] = scr_feed[r]
        # stationary weight broadcast load
        wl = wload[t]
        if wl >= 0:
            for i in range(R * C):
                w[i] = wmem[wl + i]


try:
    from numba import njit

    step_range = njit(cache=True)(_step_range)
except ImportError:  # pragma: no cover - numba is a declared dependency
    step_range = _step_range
