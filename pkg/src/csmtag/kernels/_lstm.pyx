# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled LSTM recurrence kernels; drop-in twin of lstm_py.

Same contracts as lstm_py.lstm_seq_forward / lstm_seq_backward, with the
per-step recurrence and its small matrix-vector products done in C.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double sigmoid(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


def lstm_seq_forward(double[:, ::1] zx, double[:, ::1] wh):
    cdef Py_ssize_t n = zx.shape[0]
    cdef Py_ssize_t four_h = zx.shape[1]
    cdef Py_ssize_t hd = four_h // 4
    h_arr = np.empty((n, hd))
    g_arr = np.empty((n, four_h))
    c_arr = np.empty((n, hd))
    z_arr = np.empty(four_h)
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] gates = g_arr
    cdef double[:, ::1] c = c_arr
    cdef double[::1] z = z_arr
    cdef Py_ssize_t t, j, k
    cdef double hk, ig, fg, gg, og, ct

    with nogil:
        for t in range(n):
            for j in range(four_h):
                z[j] = zx[t, j]
            if t > 0:
                for k in range(hd):
                    hk = h[t - 1, k]
                    for j in range(four_h):
                        z[j] += hk * wh[k, j]
            for k in range(hd):
                ig = sigmoid(z[k])
                fg = sigmoid(z[hd + k])
                gg = tanh(z[2 * hd + k])
                og = sigmoid(z[3 * hd + k])
                ct = ig * gg
                if t > 0:
                    ct += fg * c[t - 1, k]
                gates[t, k] = ig
                gates[t, hd + k] = fg
                gates[t, 2 * hd + k] = gg
                gates[t, 3 * hd + k] = og
                c[t, k] = ct
                h[t, k] = og * tanh(ct)
    return h_arr, g_arr, c_arr


def lstm_seq_backward(double[:, ::1] wh, double[:, ::1] gates,
                      double[:, ::1] c, double[:, ::1] dh):
    cdef Py_ssize_t n = gates.shape[0]
    cdef Py_ssize_t four_h = gates.shape[1]
    cdef Py_ssize_t hd = four_h // 4
    dz_arr = np.empty((n, four_h))
    cdef double[:, ::1] dz = dz_arr
    dhn_arr = np.zeros(hd)
    dcn_arr = np.zeros(hd)
    cdef double[::1] dh_next = dhn_arr
    cdef double[::1] dc_next = dcn_arr
    cdef Py_ssize_t t, j, k
    cdef double ig, fg, gg, og, cprev, dht, tc, dc, do, acc

    with nogil:
        for t in range(n - 1, -1, -1):
            for k in range(hd):
                ig = gates[t, k]
                fg = gates[t, hd + k]
                gg = gates[t, 2 * hd + k]
                og = gates[t, 3 * hd + k]
                cprev = c[t - 1, k] if t > 0 else 0.0
                dht = dh[t, k] + dh_next[k]
                tc = tanh(c[t, k])
                do = dht * tc
                dc = dht * og * (1.0 - tc * tc) + dc_next[k]
                dz[t, k] = dc * gg * ig * (1.0 - ig)
                dz[t, hd + k] = dc * cprev * fg * (1.0 - fg)
                dz[t, 2 * hd + k] = dc * ig * (1.0 - gg * gg)
                dz[t, 3 * hd + k] = do * og * (1.0 - og)
                dc_next[k] = dc * fg
            for k in range(hd):
                acc = 0.0
                for j in range(four_h):
                    acc += dz[t, j] * wh[k, j]
                dh_next[k] = acc
    return dz_arr
