# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel for the greedy BFS rule-sequence automaton.

Same contract as ``stlclab._pydecode.consume_rules``; this version runs the
per-step loop in C and is what makes bulk decoding of prediction files
cheap.
"""

import numpy as np


def consume_rules(int[::1] ids, int[::1] lhs_ids, int[::1] child_off,
                  int[::1] child_flat, int start_sym, int n_content,
                  int eos_id, int pad_id):
    cdef Py_ssize_t n = ids.shape[0]
    cdef Py_ssize_t max_children = 0, width, i, k
    for i in range(n_content):
        width = child_off[i + 1] - child_off[i]
        if width > max_children:
            max_children = width

    qbuf = np.empty(1 + n * max(max_children, 1), dtype=np.intc)
    outbuf = np.empty(max(n, 1), dtype=np.intc)
    cdef int[::1] q = qbuf
    cdef int[::1] out = outbuf
    cdef Py_ssize_t head = 0, tail = 1, n_out = 0
    cdef int rid
    q[0] = start_sym

    for i in range(n):
        rid = ids[i]
        if rid == eos_id:
            break
        if rid == pad_id:
            continue
        if rid < 0 or rid >= n_content:
            return None
        if head == tail:
            return None
        if lhs_ids[rid] != q[head]:
            return None
        head += 1
        for k in range(child_off[rid], child_off[rid + 1]):
            q[tail] = child_flat[k]
            tail += 1
        out[n_out] = rid
        n_out += 1
    if head != tail:
        return None
    return outbuf[:n_out].tolist()
