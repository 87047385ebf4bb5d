"""Pure-numpy reference kernels.

Parameters of a network live in one flat float64 buffer laid out layer by
layer as ``W_j`` (row-major, shape ``(d_j, d_{j-1})``) followed by ``b_j``.
"""
import numpy as np


def _layers(flat, widths):
    off = 0
    for j in range(len(widths) - 1):
        din, dout = widths[j], widths[j + 1]
        W = flat[off:off + dout * din].reshape(dout, din)
        off += dout * din
        b = flat[off:off + dout]
        off += dout
        yield W, b


def forward(flat, widths, X):
    layers = list(_layers(flat, widths))
    A = X
    for W, b in layers[:-1]:
        A = np.maximum(A @ W.T + b, 0.0)
    W, b = layers[-1]
    return A @ W.T + b


def last_hidden(flat, widths, X):
    layers = list(_layers(flat, widths))
    A = X
    for W, b in layers[:-1]:
        A = np.maximum(A @ W.T + b, 0.0)
    return A


def loss(flat, widths, X, Y):
    R = forward(flat, widths, X) - Y
    return 0.5 * np.sum(R * R) / X.shape[0]


def loss_grad(flat, widths, X, Y):
    layers = list(_layers(flat, widths))
    n = X.shape[0]
    acts = [X]
    A = X
    for W, b in layers[:-1]:
        A = np.maximum(A @ W.T + b, 0.0)
        acts.append(A)
    W, b = layers[-1]
    R = A @ W.T + b - Y
    value = 0.5 * np.sum(R * R) / n

    grad = np.empty_like(flat)
    delta = R / n
    off = flat.shape[0]
    for j in range(len(layers) - 1, -1, -1):
        W, _ = layers[j]
        dout, din = W.shape
        off -= dout
        grad[off:off + dout] = delta.sum(axis=0)
        off -= dout * din
        grad[off:off + dout * din] = (delta.T @ acts[j]).ravel()
        if j > 0:
            # strict > gives a zero ReLU derivative at exactly 0
            delta = (delta @ W) * (acts[j] > 0.0)
    return value, grad


def adam_update(flat, grad, m, v, t, lr, beta1, beta2, eps):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    flat -= lr * mhat / (np.sqrt(vhat) + eps)


def dft_amplitudes(samples):
    """|sum_l f_l exp(-2 pi i k l / N)| for k = 0..N//2, by direct summation."""
    N = samples.shape[0]
    n_bins = N // 2 + 1
    out = np.empty(n_bins)
    idx = np.arange(N)
    # chunk bins so the phase table stays small
    step = max(1, 2 ** 20 // N)
    for k0 in range(0, n_bins, step):
        k = np.arange(k0, min(n_bins, k0 + step))
        phase = 2.0 * np.pi * (np.outer(k, idx) % N) / N
        re = np.cos(phase) @ samples
        im = np.sin(phase) @ samples
        out[k0:k0 + k.size] = np.hypot(re, im)
    return out
