"""Numba-compiled kernels; same contracts as :mod:`mgdl._kernels._numpy`."""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _offsets(widths):
    D = widths.shape[0] - 1
    offs = np.empty(D + 1, np.int64)
    offs[0] = 0
    for j in range(D):
        offs[j + 1] = offs[j] + widths[j + 1] * widths[j] + widths[j + 1]
    return offs


@njit(cache=True)
def _affine(A, flat, off, din, dout):
    W = flat[off:off + dout * din].reshape((dout, din))
    b = flat[off + dout * din:off + dout * din + dout]
    Z = A @ W.T
    for i in range(Z.shape[0]):
        for r in range(dout):
            Z[i, r] += b[r]
    return Z


@njit(cache=True)
def _relu_inplace(Z):
    for i in range(Z.shape[0]):
        for r in range(Z.shape[1]):
            if Z[i, r] < 0.0:
                Z[i, r] = 0.0


@njit(cache=True)
def forward(flat, widths, X):
    offs = _offsets(widths)
    D = widths.shape[0] - 1
    A = np.ascontiguousarray(X)
    for j in range(D):
        A = _affine(A, flat, offs[j], widths[j], widths[j + 1])
        if j < D - 1:
            _relu_inplace(A)
    return A


@njit(cache=True)
def last_hidden(flat, widths, X):
    offs = _offsets(widths)
    D = widths.shape[0] - 1
    A = np.ascontiguousarray(X)
    for j in range(D - 1):
        A = _affine(A, flat, offs[j], widths[j], widths[j + 1])
        _relu_inplace(A)
    return A


@njit(cache=True)
def loss(flat, widths, X, Y):
    out = forward(flat, widths, X)
    s = 0.0
    for i in range(out.shape[0]):
        for r in range(out.shape[1]):
            d = out[i, r] - Y[i, r]
            s += d * d
    return 0.5 * s / X.shape[0]


@njit(cache=True)
def loss_grad(flat, widths, X, Y):
    offs = _offsets(widths)
    D = widths.shape[0] - 1
    n = X.shape[0]
    acts = [np.ascontiguousarray(X)]
    for j in range(D):
        Z = _affine(acts[j], flat, offs[j], widths[j], widths[j + 1])
        if j < D - 1:
            _relu_inplace(Z)
        acts.append(Z)

    R = acts[D]
    s = 0.0
    for i in range(n):
        for r in range(R.shape[1]):
            R[i, r] -= Y[i, r]
            s += R[i, r] * R[i, r]
    value = 0.5 * s / n

    grad = np.empty_like(flat)
    delta = R / n
    for j in range(D - 1, -1, -1):
        din, dout = widths[j], widths[j + 1]
        off = offs[j]
        gW = delta.T @ acts[j]
        grad[off:off + dout * din] = gW.ravel()
        for r in range(dout):
            acc = 0.0
            for i in range(n):
                acc += delta[i, r]
            grad[off + dout * din + r] = acc
        if j > 0:
            W = flat[off:off + dout * din].reshape((dout, din))
            delta = delta @ W
            H = acts[j]
            for i in range(n):
                for c in range(din):
                    if H[i, c] <= 0.0:
                        delta[i, c] = 0.0
    return value, grad


@njit(cache=True)
def adam_update(flat, grad, m, v, t, lr, beta1, beta2, eps):
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for i in range(flat.shape[0]):
        g = grad[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * g
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
        flat[i] -= lr * (m[i] / c1) / (math.sqrt(v[i] / c2) + eps)


@njit(cache=True)
def dft_amplitudes(samples):
    N = samples.shape[0]
    n_bins = N // 2 + 1
    out = np.empty(n_bins)
    # twiddle table indexed by (k l) mod N keeps every angle in [0, 2 pi)
    cos_t = np.empty(N)
    sin_t = np.empty(N)
    for j in range(N):
        ang = 2.0 * math.pi * j / N
        cos_t[j] = math.cos(ang)
        sin_t[j] = math.sin(ang)
    for k in range(n_bins):
        re = 0.0
        im = 0.0
        j = 0
        for l in range(N):
            re += samples[l] * cos_t[j]
            im -= samples[l] * sin_t[j]
            j += k
            if j >= N:
                j -= N
        out[k] = math.hypot(re, im)
    return out
