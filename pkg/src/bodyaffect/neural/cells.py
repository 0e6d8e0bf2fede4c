"""Recurrent cell parameters and single-step kernels.

The LSTM follows the peephole formulation: input/forget/output gates read
the previous cell state through diagonal weights, the candidate does not,
and the output gate peeks at the *previous* cell state (not the updated
one).  Vanilla RNN and GRU steps share the same (x, h_prev) -> h signature
so the stacked branch can swap cell kinds.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.special import expit as sigmoid


class ShapeMismatchError(ValueError):
    pass


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ShapeMismatchError(msg)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class LstmLayerParams:
    """Peephole LSTM layer.  W_x*: (input, hidden); W_h*: (hidden, hidden);
    peepholes W_c* are diagonal and stored as (hidden,) vectors."""

    W_xi: np.ndarray
    W_xf: np.ndarray
    W_xc: np.ndarray
    W_xo: np.ndarray
    W_hi: np.ndarray
    W_hf: np.ndarray
    W_hc: np.ndarray
    W_ho: np.ndarray
    W_ci: np.ndarray
    W_cf: np.ndarray
    W_co: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    @property
    def input_size(self) -> int:
        return self.W_xi.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.W_xi.shape[1]

    def validate(self) -> None:
        d, H = self.W_xi.shape
        for name in ("W_xi", "W_xf", "W_xc", "W_xo"):
            _check(getattr(self, name).shape == (d, H), f"{name} must be ({d}, {H})")
        for name in ("W_hi", "W_hf", "W_hc", "W_ho"):
            _check(getattr(self, name).shape == (H, H), f"{name} must be ({H}, {H})")
        for name in ("W_ci", "W_cf", "W_co", "b_i", "b_f", "b_c", "b_o"):
            _check(getattr(self, name).shape == (H,), f"{name} must be ({H},)")

    def tensors(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    # gate order i, f, c, o throughout
    def x_weights(self) -> np.ndarray:
        return np.concatenate([self.W_xi, self.W_xf, self.W_xc, self.W_xo], axis=1)

    def h_weights(self) -> np.ndarray:
        return np.concatenate([self.W_hi, self.W_hf, self.W_hc, self.W_ho], axis=1)

    def biases(self) -> np.ndarray:
        return np.concatenate([self.b_i, self.b_f, self.b_c, self.b_o])


def init_lstm_layer(rng: np.random.Generator, input_size: int, hidden_size: int,
                    forget_bias: float = 1.0) -> LstmLayerParams:
    d, H = input_size, hidden_size
    kw = {}
    for g in "ifco":
        kw[f"W_x{g}"] = glorot(rng, d, H, (d, H))
    for g in "ifco":
        kw[f"W_h{g}"] = glorot(rng, H, H, (H, H))
    for g in "ifo":
        kw[f"W_c{g}"] = glorot(rng, H, H, (H,))
    kw["b_i"] = np.zeros(H)
    kw["b_f"] = np.full(H, forget_bias)   # standard stabilizer for long sequences
    kw["b_c"] = np.zeros(H)
    kw["b_o"] = np.zeros(H)
    return LstmLayerParams(**kw)


def lstm_cell_step(params: LstmLayerParams, x: np.ndarray, h_prev: np.ndarray,
                   c_prev: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One peephole LSTM step on a single vector; returns (h, c)."""
    _check(x.shape[-1] == params.input_size,
           f"input width {x.shape[-1]} != {params.input_size}")
    _check(h_prev.shape[-1] == params.hidden_size and c_prev.shape[-1] == params.hidden_size,
           "state width mismatch")
    i = sigmoid(x @ params.W_xi + h_prev @ params.W_hi + params.W_ci * c_prev + params.b_i)
    f = sigmoid(x @ params.W_xf + h_prev @ params.W_hf + params.W_cf * c_prev + params.b_f)
    g = np.tanh(x @ params.W_xc + h_prev @ params.W_hc + params.b_c)
    c = f * c_prev + i * g
    o = sigmoid(x @ params.W_xo + h_prev @ params.W_ho + params.W_co * c_prev + params.b_o)
    h = o * np.tanh(c)
    return h, c


@dataclass
class RnnLayerParams:
    """Vanilla tanh RNN layer."""

    W_x: np.ndarray
    W_h: np.ndarray
    b: np.ndarray

    @property
    def input_size(self) -> int:
        return self.W_x.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.W_x.shape[1]

    def validate(self) -> None:
        d, H = self.W_x.shape
        _check(self.W_h.shape == (H, H), f"W_h must be ({H}, {H})")
        _check(self.b.shape == (H,), f"b must be ({H},)")

    def tensors(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def init_rnn_layer(rng, input_size, hidden_size) -> RnnLayerParams:
    return RnnLayerParams(
        W_x=glorot(rng, input_size, hidden_size, (input_size, hidden_size)),
        W_h=glorot(rng, hidden_size, hidden_size, (hidden_size, hidden_size)),
        b=np.zeros(hidden_size))


def rnn_cell_step(params: RnnLayerParams, x: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    _check(x.shape[-1] == params.input_size,
           f"input width {x.shape[-1]} != {params.input_size}")
    _check(h_prev.shape[-1] == params.hidden_size, "state width mismatch")
    return np.tanh(x @ params.W_x + h_prev @ params.W_h + params.b)


@dataclass
class GruLayerParams:
    """GRU with update gate z, reset gate r and tanh candidate; the update
    gate carries the previous state (z -> 1 keeps h_prev)."""

    W_xz: np.ndarray
    W_xr: np.ndarray
    W_xh: np.ndarray
    W_hz: np.ndarray
    W_hr: np.ndarray
    W_hh: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    @property
    def input_size(self) -> int:
        return self.W_xz.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.W_xz.shape[1]

    def validate(self) -> None:
        d, H = self.W_xz.shape
        for name in ("W_xz", "W_xr", "W_xh"):
            _check(getattr(self, name).shape == (d, H), f"{name} must be ({d}, {H})")
        for name in ("W_hz", "W_hr", "W_hh"):
            _check(getattr(self, name).shape == (H, H), f"{name} must be ({H}, {H})")
        for name in ("b_z", "b_r", "b_h"):
            _check(getattr(self, name).shape == (H,), f"{name} must be ({H},)")

    def tensors(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def x_weights(self) -> np.ndarray:          # gates z, r
        return np.concatenate([self.W_xz, self.W_xr], axis=1)

    def h_weights(self) -> np.ndarray:
        return np.concatenate([self.W_hz, self.W_hr], axis=1)


def init_gru_layer(rng, input_size, hidden_size) -> GruLayerParams:
    d, H = input_size, hidden_size
    kw = {}
    for g in ("z", "r", "h"):
        kw[f"W_x{g}"] = glorot(rng, d, H, (d, H))
        kw[f"W_h{g}"] = glorot(rng, H, H, (H, H))
        kw[f"b_{g}"] = np.zeros(H)
    return GruLayerParams(**kw)


def gru_cell_step(params: GruLayerParams, x: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    _check(x.shape[-1] == params.input_size,
           f"input width {x.shape[-1]} != {params.input_size}")
    _check(h_prev.shape[-1] == params.hidden_size, "state width mismatch")
    z = sigmoid(x @ params.W_xz + h_prev @ params.W_hz + params.b_z)
    r = sigmoid(x @ params.W_xr + h_prev @ params.W_hr + params.b_r)
    cand = np.tanh(x @ params.W_xh + (r * h_prev) @ params.W_hh + params.b_h)
    return z * h_prev + (1.0 - z) * cand


CELL_KINDS = ("lstm", "rnn", "gru")


def init_layer(cell_kind: str, rng, input_size: int, hidden_size: int):
    if cell_kind == "lstm":
        return init_lstm_layer(rng, input_size, hidden_size)
    if cell_kind == "rnn":
        return init_rnn_layer(rng, input_size, hidden_size)
    if cell_kind == "gru":
        return init_gru_layer(rng, input_size, hidden_size)
    raise ValueError(f"unknown cell kind {cell_kind!r}")
