"""Binary/ternary weight quantizers, straight-through gradients, 2-bit packing.

Training keeps full-precision shadow weights; forward passes read the
quantized codes. Only the LSTM gate matrices and CNN kernels are quantized:
the fully connected layers keep 12-bit fixed-point values in hardware.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fxp
from .fxp import QFormat

__all__ = [
    "quantize_binary",
    "quantize_ternary",
    "quantize_weights",
    "ste_backward",
    "clamp_shadow",
    "pack_codes",
    "unpack_codes",
    "QuantizedNetwork",
]

MODES = ("full", "binary", "ternary")


def quantize_binary(r):
    """sign(r) with sign(0) = +1."""
    r = np.asarray(r, dtype=np.float64)
    return np.where(r >= 0, 1.0, -1.0)


def quantize_ternary(r):
    """round(r) with halves away from zero: thresholds at +-0.5."""
    r = np.asarray(r, dtype=np.float64)
    return np.floor(np.abs(r) + 0.5) * np.sign(r)


def quantize_weights(r, mode: str):
    if mode == "full":
        return np.asarray(r, dtype=np.float64)
    if mode == "binary":
        return quantize_binary(r)
    if mode == "ternary":
        return quantize_ternary(r)
    raise ValueError(f"unknown quantization mode {mode!r}")


def ste_backward(g_q, r):
    """Straight-through estimator: pass the gradient where |r| <= 1, else 0."""
    g_q = np.asarray(g_q, dtype=np.float64)
    return np.where(np.abs(np.asarray(r)) <= 1.0, g_q, 0.0)


def clamp_shadow(r):
    """Clamp shadow weights to [-1, 1] so round(r) stays in {-1, 0, +1}."""
    return np.clip(r, -1.0, 1.0)


# ---------------------------------------------------------------------------
# 2-bit packing: 4 codes per byte, little-endian within the byte,
# two's-complement 2-bit fields (-1 -> 0b11, 0 -> 0b00, +1 -> 0b01).
# ---------------------------------------------------------------------------

def pack_codes(codes) -> bytes:
    codes = np.asarray(codes, dtype=np.int64).ravel()
    if not np.isin(codes, (-1, 0, 1)).all():
        raise ValueError("codes must be in {-1, 0, +1}")
    fields = (codes & 0b11).astype(np.uint8)
    pad = (-len(fields)) % 4
    fields = np.concatenate([fields, np.zeros(pad, dtype=np.uint8)])
    fields = fields.reshape(-1, 4)
    packed = (fields[:, 0] | (fields[:, 1] << 2) | (fields[:, 2] << 4)
              | (fields[:, 3] << 6))
    return packed.astype(np.uint8).tobytes()


def unpack_codes(buf: bytes, shape) -> np.ndarray:
    n = int(np.prod(shape))
    packed = np.frombuffer(buf, dtype=np.uint8)
    fields = np.stack([(packed >> (2 * k)) & 0b11 for k in range(4)], axis=1)
    codes = fields.ravel()[:n].astype(np.int64)
    codes[codes == 0b11] = -1
    if (codes > 1).any():
        raise ValueError("invalid 2-bit code 0b10 in packed buffer")
    return codes.reshape(shape)


@dataclass
class QuantizedNetwork:
    """Hardware-ready weights: 2-bit codes for gates/CNN, fixed-point for FC.

    `conv_codes` holds one (filters, depth, width) int array per CNN layer;
    `gate_codes` maps gate name -> (n_hidden + input_len, n_hidden) codes;
    `fc_raw` / `logits_raw` are raw fixed-point codes in `weight_format`.
    Biases are zero in quantized networks and are not stored.
    """

    conv_codes: list
    fc_raw: np.ndarray | None
    gate_codes: dict
    logits_raw: np.ndarray
    weight_format: QFormat = fxp.ACT_FORMAT

    @classmethod
    def from_params(cls, params, mode: str, weight_format: QFormat = fxp.ACT_FORMAT):
        """Quantize a trained float network for the fixed-point engine."""
        if mode not in ("binary", "ternary"):
            raise ValueError("hardware networks are binary or ternary")
        conv = [quantize_weights(layer.weights, mode).astype(np.int64)
                for layer in params.conv]
        fc = None if params.fc is None else fxp.to_raw(params.fc.weights, weight_format)
        gates = {name: quantize_weights(w, mode).astype(np.int64)
                 for name, w in params.lstm.gate_weights().items()}
        logits = fxp.to_raw(params.lstm.w_logits, weight_format)
        return cls(conv, fc, gates, logits, weight_format)

    def weight_bits(self) -> int:
        """Total stored weight bits (2 per code, format width per FC value)."""
        bits = sum(2 * c.size for c in self.conv_codes)
        bits += sum(2 * g.size for g in self.gate_codes.values())
        w = self.weight_format.total_bits
        if self.fc_raw is not None:
            bits += w * self.fc_raw.size
        bits += w * self.logits_raw.size
        return bits
