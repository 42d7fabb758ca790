# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled parallel-window list scheduler, same contract as sim.schedule_python."""

import numpy as np
from libc.stdint cimport int64_t
from libc.stdlib cimport malloc, free


def schedule_compiled(int64_t horizon, int64_t n_com, int64_t n_w, int64_t n_buf, int64_t spatial,
                      int64_t n_par, int64_t t_dec, int64_t period):
    cdef int64_t g_len = n_com + n_w
    cdef int64_t n_gen = (horizon + g_len - 1) // g_len
    commit_fin_a = np.zeros(n_gen, dtype=np.int64)
    cleanup_fin_a = np.full(n_gen, -1, dtype=np.int64)
    cdef int64_t[::1] commit_fin = commit_fin_a
    cdef int64_t[::1] cleanup_fin = cleanup_fin_a
    cdef int64_t *ring = <int64_t *> malloc(n_par * sizeof(int64_t))
    cdef int64_t *cl_ready = <int64_t *> malloc(n_gen * sizeof(int64_t))
    cdef int64_t INF = 0x7FFFFFFFFFFFFFFF
    cdef int64_t k = 0, slot, i
    cdef int64_t ci = 0, n_commit = n_gen * spatial
    cdef int64_t cg = 0, cpiece = 0     # next cleanup generation / piece
    cdef int64_t commits_done = 0       # generations whose commits are all dispatched
    cdef int64_t g, c_end, w_end, ready_c, ready_w, ready, start, fin
    if ring == NULL or cl_ready == NULL:
        free(ring); free(cl_ready)
        raise MemoryError()
    try:
        for i in range(n_par):
            ring[i] = 0
        for g in range(n_gen):
            cl_ready[g] = -1
        while True:
            # skip generations without a cleanup region
            while cg < commits_done and cl_ready[cg] < 0:
                cg += 1
            if ci < n_commit:
                g = ci // spatial
                c_end = g * g_len + n_com + n_buf
                if c_end > horizon:
                    c_end = horizon
                ready_c = c_end * period
            else:
                ready_c = INF
            if cg < commits_done:
                ready_w = cl_ready[cg]
            else:
                ready_w = INF
            if ready_c == INF and ready_w == INF:
                break
            ready = ready_c if ready_c <= ready_w else ready_w
            slot = k % n_par
            start = ready if ready > ring[slot] else ring[slot]
            fin = start + t_dec
            ring[slot] = fin
            k += 1
            if ready_c <= ready_w:
                g = ci // spatial
                if fin > commit_fin[g]:
                    commit_fin[g] = fin
                ci += 1
                if ci % spatial == 0:
                    c_end = g * g_len + n_com
                    if c_end > horizon:
                        c_end = horizon
                    w_end = (g + 1) * g_len
                    if w_end > horizon:
                        w_end = horizon
                    if w_end > c_end:
                        ready = w_end * period
                        cl_ready[g] = ready if ready > commit_fin[g] else commit_fin[g]
                    commits_done = g + 1
            else:
                if fin > cleanup_fin[cg]:
                    cleanup_fin[cg] = fin
                cpiece += 1
                if cpiece == spatial:
                    cpiece = 0
                    cg += 1
    finally:
        free(ring)
        free(cl_ready)
    return commit_fin_a, cleanup_fin_a
