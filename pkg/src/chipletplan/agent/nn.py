"""Small numpy networks with hand-written reverse-mode gradients.

PolicyNet: conv3x3(4->8) -> relu -> conv3x3(8->16) -> relu -> flatten, then
a fully connected policy head (A*A logits) and value head (1 output).
MLP: one hidden relu layer, used for the RND target and predictor.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .. import kernels

CONV_CHANNELS = (8, 16)


def _he(rng, shape, fan_in, dtype):
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


def init_policy(rng, lattice, in_channels=4, dtype=np.float32):
    c1, c2 = CONV_CHANNELS
    flat = c2 * lattice * lattice
    return {
        "c1_w": _he(rng, (c1, in_channels, 3, 3), in_channels * 9, dtype),
        "c1_b": np.zeros(c1, dtype),
        "c2_w": _he(rng, (c2, c1, 3, 3), c1 * 9, dtype),
        "c2_b": np.zeros(c2, dtype),
        # small head init keeps the initial policy close to uniform
        "pi_w": (rng.standard_normal((flat, lattice * lattice)) * 0.01 / np.sqrt(flat)).astype(dtype),
        "pi_b": np.zeros(lattice * lattice, dtype),
        "v_w": (rng.standard_normal((flat, 1)) * 0.01 / np.sqrt(flat)).astype(dtype),
        "v_b": np.zeros(1, dtype),
    }


def _im2col(x):
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(2, 3))  # (b, c, h, w, 3, 3)
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(b * h * w, c * 9)


def conv_forward(x, w, bias):
    b, _, h, wd = x.shape
    f = w.shape[0]
    cols = _im2col(x)
    out = cols @ w.reshape(f, -1).T + bias
    return out.reshape(b, h, wd, f).transpose(0, 3, 1, 2), cols


def conv_backward(dout, cols, w, x_shape):
    b, c, h, wd = x_shape
    f = w.shape[0]
    d2 = dout.transpose(0, 2, 3, 1).reshape(-1, f)
    dw = (d2.T @ cols).reshape(w.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(f, -1)).reshape(b, h, wd, c, 3, 3)
    dxp = np.zeros((b, c, h + 2, wd + 2), dtype=dout.dtype)
    for ki in range(3):
        for kj in range(3):
            dxp[:, :, ki:ki + h, kj:kj + wd] += dcols[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
    return dxp[:, :, 1:-1, 1:-1], dw, db


def policy_apply(params, obs):
    """Logits ``(B, A*A)``, values ``(B,)`` and the cache needed for backprop."""
    obs = np.asarray(obs, dtype=params["c1_w"].dtype)
    z1, cols1 = conv_forward(obs, params["c1_w"], params["c1_b"])
    h1 = np.maximum(z1, 0)
    z2, cols2 = conv_forward(h1, params["c2_w"], params["c2_b"])
    h2 = np.maximum(z2, 0)
    flat = h2.reshape(h2.shape[0], -1)
    logits = flat @ params["pi_w"] + params["pi_b"]
    values = (flat @ params["v_w"] + params["v_b"])[:, 0]
    cache = (obs.shape, cols1, z1, h1.shape, cols2, z2, flat)
    return logits, values, cache


def policy_backward(params, cache, dlogits, dvalues):
    obs_shape, cols1, z1, h1_shape, cols2, z2, flat = cache
    dt = params["c1_w"].dtype
    dlogits = np.asarray(dlogits, dtype=dt)
    dvalues = np.asarray(dvalues, dtype=dt).reshape(-1, 1)
    g = {
        "pi_w": flat.T @ dlogits,
        "pi_b": dlogits.sum(axis=0),
        "v_w": flat.T @ dvalues,
        "v_b": dvalues.sum(axis=0),
    }
    dflat = dlogits @ params["pi_w"].T + dvalues @ params["v_w"].T
    dz2 = dflat.reshape(z2.shape) * (z2 > 0)
    dh1, g["c2_w"], g["c2_b"] = conv_backward(dz2, cols2, params["c2_w"], h1_shape)
    dz1 = dh1 * (z1 > 0)
    _, g["c1_w"], g["c1_b"] = conv_backward(dz1, cols1, params["c1_w"], obs_shape)
    return g


def masked_log_softmax(logits, masks):
    """Log-probabilities with masked entries at ``-inf``; rows need a true entry."""
    z = np.where(masks, logits, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


# ---------------------------------------------------------------- MLP for RND

def init_mlp(rng, n_in, hidden, n_out, dtype=np.float32):
    return {
        "w1": _he(rng, (n_in, hidden), n_in, dtype),
        "b1": np.zeros(hidden, dtype),
        "w2": (rng.standard_normal((hidden, n_out)) / np.sqrt(hidden)).astype(dtype),
        "b2": np.zeros(n_out, dtype),
    }


def mlp_apply(p, x):
    x = np.asarray(x, dtype=p["w1"].dtype).reshape(len(x), -1)
    z = x @ p["w1"] + p["b1"]
    h = np.maximum(z, 0)
    return h @ p["w2"] + p["b2"], (x, z, h)


def mlp_backward(p, cache, dout):
    x, z, h = cache
    g = {"w2": h.T @ dout, "b2": dout.sum(axis=0)}
    dz = (dout @ p["w2"].T) * (z > 0)
    g["w1"] = x.T @ dz
    g["b1"] = dz.sum(axis=0)
    return g


# ---------------------------------------------------------------- optimiser

class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        """``p -= lr * m_hat / (sqrt(v_hat) + eps)`` for every parameter, in place."""
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            kernels.adam_update(params[k], g, self.m[k], self.v[k], self.lr / c1,
                                self.beta1, self.beta2, 1.0 / np.sqrt(c2), self.eps)


def clip_grad_norm(grads, max_norm):
    """Scale ``grads`` in place to a global L2 norm of at most ``max_norm``; returns the
    norm before clipping (non-finite if any gradient entry is)."""
    total = 0.0
    for g in grads.values():
        flat = g.ravel()
        total += float(np.dot(flat, flat))
    total = float(np.sqrt(total))
    if max_norm is not None and np.isfinite(total) and total > max_norm > 0:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale
    return total


def flop_count(lattice, batch, in_channels=4):
    """Multiply-accumulate count of one policy forward pass (for budget accounting)."""
    c1, c2 = CONV_CHANNELS
    cells = lattice * lattice
    conv = cells * 9 * (in_channels * c1 + c1 * c2)
    heads = c2 * cells * (cells + 1)
    return batch * (conv + heads)


def mlp_macs(p):
    return p["w1"].size + p["w2"].size
