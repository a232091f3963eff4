"""A plain LSTM cell with batched, masked backpropagation through time.

Gate pre-activations are packed column-wise in the order input, forget,
cell candidate, output, so one matrix product per step serves all four.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import InvalidArgument

GATES = ("input", "forget", "cell", "output")


@dataclass
class LSTMParams:
    Wx: np.ndarray  # (D, 4H)
    Wh: np.ndarray  # (H, 4H)
    b: np.ndarray  # (4H,)

    def __post_init__(self):
        d, h4 = self.Wx.shape
        if h4 % 4 or self.Wh.shape != (h4 // 4, h4) or self.b.shape != (h4,):
            raise InvalidArgument(
                f"inconsistent LSTM shapes Wx={self.Wx.shape} Wh={self.Wh.shape} b={self.b.shape}"
            )

    @property
    def input_dim(self) -> int:
        return self.Wx.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.Wh.shape[0]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Input weights, recurrent weights and bias of one gate (views)."""
        k = GATES.index(name)
        h = self.hidden_dim
        sl = slice(k * h, (k + 1) * h)
        return self.Wx[:, sl], self.Wh[:, sl], self.b[sl]

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng: np.random.Generator,
             forget_bias: float = 1.0) -> "LSTMParams":
        lim_x = np.sqrt(6.0 / (input_dim + hidden_dim))
        lim_h = np.sqrt(6.0 / (2 * hidden_dim))
        Wx = rng.uniform(-lim_x, lim_x, size=(input_dim, 4 * hidden_dim))
        Wh = rng.uniform(-lim_h, lim_h, size=(hidden_dim, 4 * hidden_dim))
        b = np.zeros(4 * hidden_dim)
        b[hidden_dim:2 * hidden_dim] = forget_bias
        return cls(Wx, Wh, b)


def lstm_step(x, state, params: LSTMParams):
    """One LSTM update.

    Parameters
    ----------
    x : array, shape (D,) or (B, D)
    state : tuple of arrays
        ``(h, c)``, each of shape (H,) or (B, H).
    params : LSTMParams

    Returns
    -------
    h, c : ndarray
    """
    h, c = (np.asarray(s, dtype=float) for s in state)
    x = np.asarray(x, dtype=float)
    H = params.hidden_dim
    if x.shape[-1] != params.input_dim or h.shape[-1] != H or c.shape != h.shape:
        raise InvalidArgument(
            f"lstm_step got x{x.shape}, h{h.shape}, c{c.shape} for D={params.input_dim}, H={H}"
        )
    z = x @ params.Wx + h @ params.Wh + params.b
    i = expit(z[..., :H])
    f = expit(z[..., H:2 * H])
    g = np.tanh(z[..., 2 * H:3 * H])
    o = expit(z[..., 3 * H:])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def _gate_affine(H: int) -> tuple[np.ndarray, np.ndarray]:
    # sigmoid(z) = 0.5 * tanh(z / 2) + 0.5, so one tanh call serves all gates
    scale = np.full(4 * H, 0.5)
    scale[2 * H:3 * H] = 1.0
    shift = np.full(4 * H, 0.5)
    shift[2 * H:3 * H] = 0.0
    return scale, shift


def lstm_forward(X: np.ndarray, mask: np.ndarray, params: LSTMParams):
    """Run a padded batch; returns the hidden state after each sequence's last frame.

    ``X`` has shape (B, T, D) and ``mask`` (B, T) marks real frames; padded
    frames leave the state untouched.
    """
    B, T, _ = X.shape
    H = params.hidden_dim
    scale, shift = _gate_affine(H)
    xz = (X.reshape(B * T, -1) @ params.Wx).reshape(B, T, 4 * H) + params.b
    xz *= scale
    Wh = params.Wh * scale
    fmask = mask.astype(float)[:, :, None]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    steps = []
    for t in range(T):
        act = np.tanh(xz[:, t] + h @ Wh)
        act *= scale
        act += shift
        i, f, g, o = act[:, :H], act[:, H:2 * H], act[:, 2 * H:3 * H], act[:, 3 * H:]
        c_new = f * c
        c_new += i * g
        tc = np.tanh(c_new)
        m = fmask[:, t]
        steps.append((act, c, tc, h, m))
        # padded frames (m = 0) keep the previous state
        c = c + m * (c_new - c)
        h = h + m * (o * tc - h)
    return h, (X, steps)


def lstm_backward(dh: np.ndarray, cache, params: LSTMParams) -> LSTMParams:
    """Gradients of the loss w.r.t. the LSTM parameters, given d(loss)/d(final h)."""
    X, steps = cache
    B, T, D = X.shape
    H = params.hidden_dim
    dc = np.zeros_like(dh)
    dWh = np.zeros_like(params.Wh)
    dz_all = np.zeros((B, T, 4 * H))
    WhT = params.Wh.T
    for t in range(T - 1, -1, -1):
        act, c_prev, tc, h_prev, m = steps[t]
        i, f, g, o = act[:, :H], act[:, H:2 * H], act[:, 2 * H:3 * H], act[:, 3 * H:]
        dh_new = m * dh
        dct = m * dc + dh_new * o * (1.0 - tc * tc)
        dz = dz_all[:, t]
        dz[:, :H] = dct * g * i * (1.0 - i)
        dz[:, H:2 * H] = dct * c_prev * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dct * i * (1.0 - g * g)
        dz[:, 3 * H:] = dh_new * tc * o * (1.0 - o)
        dWh += h_prev.T @ dz
        keep = 1.0 - m
        dh = keep * dh + dz @ WhT
        dc = keep * dc + dct * f
    dWx = X.reshape(B * T, D).T @ dz_all.reshape(B * T, 4 * H)
    return LSTMParams(dWx, dWh, dz_all.sum(axis=(0, 1)))
