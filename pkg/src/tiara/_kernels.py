"""Compiled inner loops for the diffusion pipeline.

Two kernels carry essentially all of the per-step cost at scale:

* a cache-blocked truncated power iteration over the activated block, and
* a fused column pass that applies the kernel block to the carried matrix,
  blends it with the per-snapshot kernel, and thresholds, without ever
  materializing the dense intermediate product.

Both are bit-for-bit equivalent to the plain scipy compositions they
replace (same accumulation order per output entry), which the test suite
asserts. Everything degrades to the scipy paths when numba is missing.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    # workqueue avoids the TBB-version probe and is deterministic enough:
    # every parallel region here writes disjoint output slices.
    numba.config.THREADING_LAYER = "workqueue"
    _cap = os.environ.get("TIARA_THREADS")
    if _cap is not None:
        try:
            numba.set_num_threads(max(1, min(int(_cap), numba.config.NUMBA_NUM_THREADS)))
        except ValueError:
            pass
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False


if HAVE_NUMBA:

    @numba.njit(parallel=True, cache=True)
    def iterate_panels(indptr, indices, data, iters, n, panel):
        """K rounds of M <- I + B M on column panels; `data` is pre-scaled
        by the continuation probability. Accumulation order per entry matches
        csr matvecs followed by a diagonal add, so the result is bitwise
        equal to the reference scipy loop."""
        out = np.empty((n, n))
        npanels = (n + panel - 1) // panel
        for p in numba.prange(npanels):
            j0 = p * panel
            w = min(panel, n - j0)
            cur = np.zeros((n, w))
            nxt = np.zeros((n, w))
            for x in range(w):
                cur[j0 + x, x] = 1.0
            for _ in range(iters):
                for i in range(n):
                    acc = nxt[i]
                    for x in range(w):
                        acc[x] = 0.0
                    for ptr in range(indptr[i], indptr[i + 1]):
                        v = data[ptr]
                        row = cur[indices[ptr]]
                        for x in range(w):
                            acc[x] += v * row[x]
                for x in range(w):
                    nxt[j0 + x, x] += 1.0
                tmp = cur
                cur = nxt
                nxt = tmp
            for i in range(n):
                for x in range(w):
                    out[i, j0 + x] = cur[i, x]
        return out

    @numba.njit(parallel=True, cache=True)
    def fused_columns(block_t, act, pos, xp, xi, xd, j0, gamma, eps, cancel,
                      offs, out_rows, out_vals, counts):
        """Per output column j: entries of (1-gamma)*S + gamma*S@X, kept when
        >= eps, where S is the kernel block embedded in an identity.

        block_t holds the kernel block with columns stored contiguously
        (block_t[p] is the column for activated node act[p]). pos maps global
        node ids to block positions (-1 when not activated). X's column j is
        split into activated rows (dense-accumulated against block columns in
        ascending-row order, exactly like the sparse product) and pass-through
        rows (merged directly). Product values below `cancel` count as absent,
        mirroring the dust filter of the sparse product. If every entry of a
        column falls below eps, its largest entry is restored so the column
        survives normalization.
        """
        n_t = act.size
        for jj in numba.prange(counts.size):
            j = j0 + jj
            base = offs[jj]
            lo, hi = xp[j], xp[j + 1]
            acc = np.zeros(n_t)
            side_rows = np.empty(hi - lo + 1, np.int64)
            side_s = np.empty(hi - lo + 1)
            side_t = np.empty(hi - lo + 1)
            nside = 0
            sj = pos[j]
            ident_pending = sj < 0
            for ptr in range(lo, hi):
                k = xi[ptr]
                v = xd[ptr]
                p = pos[k]
                if p >= 0:
                    col = block_t[p]
                    for i in range(n_t):
                        acc[i] += v * col[i]
                else:
                    if ident_pending and k >= j:
                        if k == j:
                            side_rows[nside] = k
                            side_s[nside] = 1.0
                            side_t[nside] = v
                            nside += 1
                            ident_pending = False
                            continue
                        side_rows[nside] = j
                        side_s[nside] = 1.0
                        side_t[nside] = 0.0
                        nside += 1
                        ident_pending = False
                    side_rows[nside] = k
                    side_s[nside] = 0.0
                    side_t[nside] = v
                    nside += 1
            if ident_pending:
                side_rows[nside] = j
                side_s[nside] = 1.0
                side_t[nside] = 0.0
                nside += 1

            cnt = 0
            best = -1.0
            best_row = -1
            si = 0
            for i in range(n_t + 1):
                g = act[i] if i < n_t else (1 << 62)
                while si < nside and side_rows[si] < g:
                    r = side_rows[si]
                    s = side_s[si]
                    t = side_t[si]
                    si += 1
                    t_in = abs(t) >= cancel
                    s_in = s != 0.0
                    if not (t_in or s_in):
                        continue
                    if t_in and s_in:
                        val = (1.0 - gamma) * s + gamma * t
                    elif s_in:
                        val = (1.0 - gamma) * s
                    else:
                        val = gamma * t
                    if val > best:
                        best = val
                        best_row = r
                    if val >= eps:
                        out_rows[base + cnt] = r
                        out_vals[base + cnt] = val
                        cnt += 1
                if i == n_t:
                    break
                t = acc[i]
                s = block_t[sj][i] if sj >= 0 else 0.0
                t_in = abs(t) >= cancel
                s_in = s != 0.0
                if t_in or s_in:
                    if t_in and s_in:
                        val = (1.0 - gamma) * s + gamma * t
                    elif s_in:
                        val = (1.0 - gamma) * s
                    else:
                        val = gamma * t
                    if val > best:
                        best = val
                        best_row = g
                    if val >= eps:
                        out_rows[base + cnt] = g
                        out_vals[base + cnt] = val
                        cnt += 1
            if cnt == 0 and best_row >= 0:
                out_rows[base] = best_row
                out_vals[base] = best
                cnt = 1
            counts[jj] = cnt

else:  # pragma: no cover
    iterate_panels = None
    fused_columns = None
