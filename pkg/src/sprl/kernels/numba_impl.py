"""Numba @njit kernels, float32 only. Mirrors numpy_impl function-for-function.

Importing this module compiles nothing; compilation happens lazily on first
call and is cached on disk (cache=True), so repeat processes skip the JIT
cost.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _sig(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


@njit(cache=True)
def lstm_forward(x, w, u, b):
    """x (T, D), w (4H, D), u (4H, H), b (4H,) -> (h, i, f, g, o, c, hc)."""
    T = x.shape[0]
    H = u.shape[1]
    wt = np.ascontiguousarray(w.T)
    xw = np.dot(x, wt)
    h = np.zeros((T, H), dtype=np.float32)
    ig = np.zeros((T, H), dtype=np.float32)
    fg = np.zeros((T, H), dtype=np.float32)
    gg = np.zeros((T, H), dtype=np.float32)
    og = np.zeros((T, H), dtype=np.float32)
    c = np.zeros((T, H), dtype=np.float32)
    hc = np.zeros((T, H), dtype=np.float32)
    h_prev = np.zeros(H, dtype=np.float32)
    c_prev = np.zeros(H, dtype=np.float32)
    for t in range(T):
        rec = np.dot(u, h_prev)
        for j in range(H):
            pi = xw[t, j] + b[j] + rec[j]
            pf = xw[t, H + j] + b[H + j] + rec[H + j]
            pg = xw[t, 2 * H + j] + b[2 * H + j] + rec[2 * H + j]
            po = xw[t, 3 * H + j] + b[3 * H + j] + rec[3 * H + j]
            iv = np.float32(_sig(pi))
            fv = np.float32(_sig(pf))
            gv = np.float32(math.tanh(pg))
            ov = np.float32(_sig(po))
            cv = fv * c_prev[j] + iv * gv
            hv = np.float32(math.tanh(cv))
            ig[t, j] = iv
            fg[t, j] = fv
            gg[t, j] = gv
            og[t, j] = ov
            c[t, j] = cv
            hc[t, j] = hv
            h[t, j] = ov * hv
        h_prev = h[t]
        c_prev = c[t]
    return h, ig, fg, gg, og, c, hc


@njit(cache=True)
def lstm_backward(dh_out, x, w, u, h, ig, fg, gg, og, c, hc):
    """Backprop through time; returns (dx, dw, du, db)."""
    T = dh_out.shape[0]
    H = dh_out.shape[1]
    one = np.float32(1.0)
    ut = np.ascontiguousarray(u.T)
    dpre = np.zeros((T, 4 * H), dtype=np.float32)
    dh_carry = np.zeros(H, dtype=np.float32)
    dc_carry = np.zeros(H, dtype=np.float32)
    for t in range(T - 1, -1, -1):
        for j in range(H):
            dh = dh_out[t, j] + dh_carry[j]
            do = dh * hc[t, j]
            dc = dc_carry[j] + dh * og[t, j] * (one - hc[t, j] * hc[t, j])
            di = dc * gg[t, j]
            dg = dc * ig[t, j]
            cp = c[t - 1, j] if t > 0 else np.float32(0.0)
            df = dc * cp
            dc_carry[j] = dc * fg[t, j]
            dpre[t, j] = di * ig[t, j] * (one - ig[t, j])
            dpre[t, H + j] = df * fg[t, j] * (one - fg[t, j])
            dpre[t, 2 * H + j] = dg * (one - gg[t, j] * gg[t, j])
            dpre[t, 3 * H + j] = do * og[t, j] * (one - og[t, j])
        dh_carry = np.dot(ut, dpre[t])
    dx = np.dot(dpre, w)
    dw = np.dot(np.ascontiguousarray(dpre.T), x)
    du = np.zeros_like(u)
    if T > 1:
        du = np.dot(np.ascontiguousarray(dpre[1:].T), h[: T - 1])
    db = np.zeros(4 * H, dtype=np.float32)
    for t in range(T):
        for j in range(4 * H):
            db[j] += dpre[t, j]
    return dx, dw, du, db


@njit(cache=True)
def _attention_score_mix(hp, s, v, alpha):
    """Squash pair scores, normalize each row, and mix the states."""
    T = s.shape[0]
    A = hp.shape[2]
    es = np.empty((T, T), dtype=np.float32)
    for t in range(T):
        for t2 in range(T):
            acc = np.float32(0.0)
            for a in range(A):
                acc += hp[t, t2, a] * v[a]
            es[t, t2] = np.float32(_sig(acc + alpha[0]))
    att = np.empty((T, T), dtype=np.float32)
    for t in range(T):
        m = es[t, 0]
        for t2 in range(1, T):
            if es[t, t2] > m:
                m = es[t, t2]
        tot = np.float32(0.0)
        for t2 in range(T):
            e = np.float32(math.exp(es[t, t2] - m))
            att[t, t2] = e
            tot += e
        for t2 in range(T):
            att[t, t2] /= tot
    z = np.dot(att, s)
    return z, es, att


def attention_forward(s, q, k, beta, v, alpha):
    """s (T, S); q, k (A, S); beta, v (A,); alpha (1,) -> (z, qs, ks, hp, es, att).

    The (T, T, A) tanh block stays in vectorized numpy — SIMD transcendentals
    beat numba's scalar loop there — while the scoring reduction, softmax and
    state mixing run fused under @njit.
    """
    qs = s @ q.T
    ks = s @ k.T
    hp = np.tanh(qs[:, None, :] + ks[None, :, :] + beta)
    z, es, att = _attention_score_mix(np.ascontiguousarray(hp), s, v, alpha)
    return z, qs, ks, hp, es, att


@njit(cache=True)
def attention_backward(dz, s, q, k, v, qs, ks, hp, es, att):
    """Backward of attention_forward; returns (ds, dq, dk, dbeta, dv, dalpha)."""
    T = s.shape[0]
    A = q.shape[0]
    one = np.float32(1.0)
    st = np.ascontiguousarray(s.T)
    datt = np.dot(dz, st)
    ds = np.dot(np.ascontiguousarray(att.T), dz)
    der = np.empty((T, T), dtype=np.float32)
    for t in range(T):
        dot = np.float32(0.0)
        for t2 in range(T):
            dot += att[t, t2] * datt[t, t2]
        for t2 in range(T):
            des = att[t, t2] * (datt[t, t2] - dot)
            der[t, t2] = des * es[t, t2] * (one - es[t, t2])
    dalpha = np.zeros(1, dtype=np.float32)
    dv = np.zeros(A, dtype=np.float32)
    dbeta = np.zeros(A, dtype=np.float32)
    dqs = np.zeros((T, A), dtype=np.float32)
    dks = np.zeros((T, A), dtype=np.float32)
    for t in range(T):
        for t2 in range(T):
            de = der[t, t2]
            dalpha[0] += de
            for a in range(A):
                hv = hp[t, t2, a]
                dv[a] += de * hv
                dp = de * v[a] * (one - hv * hv)
                dbeta[a] += dp
                dqs[t, a] += dp
                dks[t2, a] += dp
    dq = np.dot(np.ascontiguousarray(dqs.T), s)
    dk = np.dot(np.ascontiguousarray(dks.T), s)
    ds += np.dot(dqs, q) + np.dot(dks, k)
    return ds, dq, dk, dbeta, dv, dalpha
