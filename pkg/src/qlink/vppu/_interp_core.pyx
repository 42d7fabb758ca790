# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled VPPU interpreter loop, same contract as interp.run_python."""

from libc.stdlib cimport malloc, free
from libc.stdint cimport uint64_t, int64_t

from qlink.errors import ProgramFault

cdef enum:
    EV_PULSE = 0
    EV_MEASURE = 1
    EV_SENDCB = 2
    EV_RECVCB = 3
    EV_HALT = 4


def run_compiled(ops_in, f0_in, f1_in, f2_in, regs_in, backend, bridge, max_ticks):
    cdef Py_ssize_t n = len(ops_in)
    cdef int64_t *ops = <int64_t *> malloc(n * sizeof(int64_t))
    cdef int64_t *f0 = <int64_t *> malloc(n * sizeof(int64_t))
    cdef int64_t *f1 = <int64_t *> malloc(n * sizeof(int64_t))
    cdef int64_t *f2 = <int64_t *> malloc(n * sizeof(int64_t))
    cdef uint64_t regs[16]
    cdef Py_ssize_t i
    cdef Py_ssize_t pc = 0, nxt
    cdef uint64_t clock = 0, tick, budget = max_ticks
    cdef int64_t op, a, b, c
    cdef uint64_t value
    cdef int bit
    events = []
    pending = []
    if ops == NULL or f0 == NULL or f1 == NULL or f2 == NULL:
        free(ops); free(f0); free(f1); free(f2)
        raise MemoryError()
    try:
        for i in range(n):
            ops[i] = ops_in[i]
            f0[i] = f0_in[i]
            f1[i] = f1_in[i]
            f2[i] = f2_in[i]
        for i in range(16):
            regs[i] = regs_in[i]
        while True:
            if pc >= n:
                raise ProgramFault("ran past the end of the program", pc=pc)
            op = ops[pc]
            a = f0[pc]
            b = f1[pc]
            c = f2[pc]
            tick = clock
            nxt = pc + 1
            if op == 0x01:
                clock += <uint64_t> a
            elif op == 0x02:
                events.append((tick, EV_PULSE, (a, b, c)))
                clock += <uint64_t> c
            else:
                clock += 1
                if op == 0x00:
                    pass
                elif op == 0x03:
                    try:
                        bit = int(backend.measure(a, tick)) & 1
                    except Exception as exc:
                        raise ProgramFault(f"measurement failed: {exc}", pc=pc) from exc
                    regs[b] = (regs[b] << 1) | <uint64_t> bit
                    events.append((tick, EV_MEASURE, (a, bit)))
                elif op == 0x04:
                    regs[a] = regs[b] ^ regs[c]
                elif op == 0x05:
                    regs[a] = <uint64_t> b
                elif op == 0x06:
                    value = regs[c]
                    events.append((tick, EV_SENDCB, (a, b, value)))
                    try:
                        res = bridge.call(a, b, value)
                    except Exception as exc:
                        raise ProgramFault(f"callback {a}:{b} failed: {exc}", pc=pc) from exc
                    if res is not None:
                        pending.append(int(res) & 0xFFFFFFFFFFFFFFFF)
                elif op == 0x07:
                    if not pending:
                        raise ProgramFault("RECVCB with no pending callback result", pc=pc)
                    value = pending.pop(0)
                    regs[a] = value
                    events.append((tick, EV_RECVCB, (a, value)))
                elif op == 0x08:
                    if regs[a] != 0:
                        nxt = b
                elif op == 0x09:
                    nxt = a
                elif op == 0x0A:
                    events.append((tick, EV_HALT, ()))
                    return pc, clock, True, events, pending, [regs[i] for i in range(16)]
                else:
                    raise ProgramFault(f"illegal opcode 0x{op:02x}", pc=pc)
            if clock > budget:
                raise ProgramFault(f"tick budget of {max_ticks} exceeded", pc=pc)
            pc = nxt
    finally:
        free(ops)
        free(f0)
        free(f1)
        free(f2)
