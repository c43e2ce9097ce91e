"""Pure-numpy kernels for the recurrent encoder and the pairwise attention block.

These are the fallback implementations; `sprl.kernels.numba_impl` mirrors them
loop-for-loop under @njit. Both operate on float32 in production; the numpy
versions are dtype-generic so the gradient checker can drive them in float64.

Shapes use T = sequence length, D = input width, H = hidden units per
direction, S = state width fed to attention, A = attention units.
"""

import numpy as np


def sigmoid(x):
    """Logistic sigmoid, branch-stable for large |x|."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_forward(x, w, u, b):
    """One directional LSTM read.

    x (T, D), w (4H, D), u (4H, H), b (4H,). Gate packing along the 4H axis is
    input | forget | candidate | output. Returns (h, i, f, g, o, c, hc), each
    gate/state array (T, H); hc is tanh(c).
    """
    T = x.shape[0]
    H = u.shape[1]
    dt = x.dtype
    xw = x @ w.T + b  # (T, 4H)
    h = np.zeros((T, H), dtype=dt)
    i = np.zeros((T, H), dtype=dt)
    f = np.zeros((T, H), dtype=dt)
    g = np.zeros((T, H), dtype=dt)
    o = np.zeros((T, H), dtype=dt)
    c = np.zeros((T, H), dtype=dt)
    hc = np.zeros((T, H), dtype=dt)
    h_prev = np.zeros(H, dtype=dt)
    c_prev = np.zeros(H, dtype=dt)
    for t in range(T):
        pre = xw[t] + u @ h_prev
        i[t] = sigmoid(pre[0:H])
        f[t] = sigmoid(pre[H : 2 * H])
        g[t] = np.tanh(pre[2 * H : 3 * H])
        o[t] = sigmoid(pre[3 * H : 4 * H])
        c[t] = f[t] * c_prev + i[t] * g[t]
        hc[t] = np.tanh(c[t])
        h[t] = o[t] * hc[t]
        h_prev = h[t]
        c_prev = c[t]
    return h, i, f, g, o, c, hc


def lstm_backward(dh_out, x, w, u, h, i, f, g, o, c, hc):
    """Backprop through time for lstm_forward.

    dh_out (T, H) is the upstream gradient on every hidden state. Returns
    (dx, dw, du, db).
    """
    T, H = dh_out.shape
    dt = x.dtype
    dpre = np.zeros((T, 4 * H), dtype=dt)
    dh_carry = np.zeros(H, dtype=dt)
    dc_carry = np.zeros(H, dtype=dt)
    for t in range(T - 1, -1, -1):
        dh = dh_out[t] + dh_carry
        do = dh * hc[t]
        dc = dc_carry + dh * o[t] * (1.0 - hc[t] * hc[t])
        di = dc * g[t]
        dg = dc * i[t]
        c_prev = c[t - 1] if t > 0 else np.zeros(H, dtype=dt)
        df = dc * c_prev
        dc_carry = dc * f[t]
        dpre[t, 0:H] = di * i[t] * (1.0 - i[t])
        dpre[t, H : 2 * H] = df * f[t] * (1.0 - f[t])
        dpre[t, 2 * H : 3 * H] = dg * (1.0 - g[t] * g[t])
        dpre[t, 3 * H : 4 * H] = do * o[t] * (1.0 - o[t])
        dh_carry = u.T @ dpre[t]
    dx = dpre @ w
    dw = dpre.T @ x
    # h_prev at t=0 is the zero state, so u only sees h[:-1]
    du = dpre[1:].T @ h[:-1] if T > 1 else np.zeros_like(u)
    db = dpre.sum(axis=0)
    return dx, dw, du, db


def attention_forward(s, q, k, beta, v, alpha):
    """Pairwise attention over hidden states.

    s (T, S); q, k (A, S); beta (A,); v (A,); alpha (1,). Every position
    scores every other position through a one-hidden-layer comparator, the
    scores are squashed, normalized per row, and used to mix the states.
    Returns (z, qs, ks, hp, es, att) with z (T, S), hp (T, T, A),
    es/att (T, T).
    """
    qs = s @ q.T  # (T, A)
    ks = s @ k.T  # (T, A)
    hp = np.tanh(qs[:, None, :] + ks[None, :, :] + beta)  # (T, T, A)
    er = hp @ v + alpha[0]  # (T, T)
    es = sigmoid(er)
    shifted = np.exp(es - es.max(axis=1, keepdims=True))
    att = shifted / shifted.sum(axis=1, keepdims=True)
    z = att @ s
    return z, qs, ks, hp, es, att


def attention_backward(dz, s, q, k, v, qs, ks, hp, es, att):
    """Backward pass of attention_forward. Returns (ds, dq, dk, dbeta, dv, dalpha)."""
    datt = dz @ s.T  # (T, T)
    ds = att.T @ dz
    des = att * (datt - (att * datt).sum(axis=1, keepdims=True))
    der = des * es * (1.0 - es)
    dalpha = np.array([der.sum()], dtype=s.dtype)
    dv = np.einsum("tu,tua->a", der, hp).astype(s.dtype, copy=False)
    dhp = der[:, :, None] * v[None, None, :]
    dpre = dhp * (1.0 - hp * hp)
    dbeta = dpre.sum(axis=(0, 1))
    dqs = dpre.sum(axis=1)  # (T, A)
    dks = dpre.sum(axis=0)  # (T, A)
    dq = dqs.T @ s
    dk = dks.T @ s
    ds = ds + dqs @ q + dks @ k
    return ds, dq, dk, dbeta, dv, dalpha
