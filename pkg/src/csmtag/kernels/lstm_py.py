"""Pure-numpy LSTM recurrence kernels (fallback backend).

Only the sequential time-step recurrence lives here; the callers hoist all
time-independent matrix products (input projections, weight gradients) out
of the loop.  Rows arrive in processing order, so one implementation serves
both directions of a bidirectional layer.

Gate layout along the last axis: input, forget, cell candidate, output.
"""

import numpy as np


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_seq_forward(zx, wh):
    """Run the recurrence over pre-projected inputs.

    zx: (n, 4H) rows of x_t @ Wx + b, processing order.
    wh: (H, 4H) recurrent weights.
    Returns (h, gates, c): outputs, post-activation gates, cell states.
    """
    n, four_h = zx.shape
    hd = four_h // 4
    h = np.empty((n, hd))
    gates = np.empty((n, four_h))
    c = np.empty((n, hd))
    h_prev = np.zeros(hd)
    c_prev = np.zeros(hd)
    for t in range(n):
        z = zx[t] + h_prev @ wh
        i = _sigmoid(z[:hd])
        f = _sigmoid(z[hd:2 * hd])
        g = np.tanh(z[2 * hd:3 * hd])
        o = _sigmoid(z[3 * hd:])
        c_prev = f * c_prev + i * g
        h_prev = o * np.tanh(c_prev)
        gates[t, :hd] = i
        gates[t, hd:2 * hd] = f
        gates[t, 2 * hd:3 * hd] = g
        gates[t, 3 * hd:] = o
        c[t] = c_prev
        h[t] = h_prev
    return h, gates, c


def lstm_seq_backward(wh, gates, c, dh):
    """Backpropagate through the recurrence.

    dh: (n, H) per-step upstream gradients w.r.t. h, processing order.
    Returns dz: (n, 4H) gradients w.r.t. the pre-activation gate inputs;
    the caller turns dz into weight/input gradients with batched products.
    """
    n, four_h = gates.shape
    hd = four_h // 4
    dz = np.empty((n, four_h))
    dh_next = np.zeros(hd)
    dc_next = np.zeros(hd)
    for t in range(n - 1, -1, -1):
        i = gates[t, :hd]
        f = gates[t, hd:2 * hd]
        g = gates[t, 2 * hd:3 * hd]
        o = gates[t, 3 * hd:]
        c_prev = c[t - 1] if t > 0 else np.zeros(hd)
        dht = dh[t] + dh_next
        tc = np.tanh(c[t])
        do = dht * tc
        dc = dht * o * (1.0 - tc * tc) + dc_next
        dz[t, :hd] = dc * g * i * (1.0 - i)
        dz[t, hd:2 * hd] = dc * c_prev * f * (1.0 - f)
        dz[t, 2 * hd:3 * hd] = dc * i * (1.0 - g * g)
        dz[t, 3 * hd:] = do * o * (1.0 - o)
        dh_next = dz[t] @ wh.T
        dc_next = dc * f
    return dz
