"""Backprop-through-time trainer: replicated targets, Adagrad, clipping.

The same class label is applied at every step and the per-step cross-entropy
losses are averaged; test-time prediction uses only the final step. Quantized
modes run the forward pass on weight codes and route gradients to the
full-precision shadow weights through the straight-through estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import quant
from .model import (ConvLayerParams, FcParams, LstmParams, NetworkConfig,
                    NetworkParams, softmax, _pad_window)

__all__ = [
    "TrainConfig",
    "AdagradState",
    "TrainResult",
    "cross_entropy",
    "loss_gradient",
    "sequence_loss_and_grads",
    "adagrad_step",
    "init_params",
    "train",
    "evaluate_accuracy",
    "predict_probs",
    "auc_macro",
    "confusion_matrix",
    "write_trace",
]


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    clip_limit: float = 5.0
    epochs: int = 50
    batch_size: int = 32
    init_scale: float = 0.01
    seed: int = 0
    mode: str = "full"  # full | ternary | binary
    replicate_targets: bool = True
    adagrad_epsilon: float = 1e-8
    augment_noise: float = 0.0  # uniform input noise redrawn per batch
    train_biases: bool = True   # quantized modes pin biases at zero regardless

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.clip_limit <= 0:
            raise ValueError("clip range must be symmetric around 0")
        if self.mode not in quant.MODES:
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class AdagradState:
    acc: dict = field(default_factory=dict)
    epsilon: float = 1e-8


@dataclass
class TrainResult:
    params: NetworkParams
    loss_trace: np.ndarray
    accuracy_trace: np.ndarray


def cross_entropy(logits, label: int) -> float:
    """-log softmax(logits)[label], computed in the stabilized form."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    return float(np.log(np.exp(z).sum()) - z[label])


def loss_gradient(p, label: int) -> np.ndarray:
    """d(cross entropy)/d(logits) = p - onehot(label)."""
    g = np.asarray(p, dtype=np.float64).copy()
    g[label] -= 1.0
    return g


# ---------------------------------------------------------------------------
# Parameter plumbing
# ---------------------------------------------------------------------------

_GATES = ("forget", "input", "output", "cell")


def init_params(cfg: NetworkConfig, seed: int = 0,
                init_scale: float = 0.01, mode: str = "full") -> NetworkParams:
    """Weights uniform in [-init_scale, +init_scale]; biases start at zero."""
    rng = np.random.default_rng(seed)

    def u(*shape):
        return rng.uniform(-init_scale, init_scale, shape)

    conv, fc = [], None
    if cfg.use_cnn:
        depth = cfg.n_channels
        for f, m in cfg.conv_layers:
            conv.append(ConvLayerParams(u(f, depth, m), np.zeros(f)))
            depth = f
        fc = FcParams(u(cfg.input_len, cfg.fc_input_len))
    xx_len = cfg.n_hidden + cfg.input_len
    lstm = LstmParams(
        w_forget=u(xx_len, cfg.n_hidden), w_input=u(xx_len, cfg.n_hidden),
        w_output=u(xx_len, cfg.n_hidden), w_cell=u(xx_len, cfg.n_hidden),
        b_forget=np.zeros(cfg.n_hidden), b_input=np.zeros(cfg.n_hidden),
        b_output=np.zeros(cfg.n_hidden), b_cell=np.zeros(cfg.n_hidden),
        w_logits=u(cfg.n_hidden, cfg.n_classes), b_logits=np.zeros(cfg.n_classes))
    return NetworkParams(conv, fc, lstm)


def _named_tensors(params: NetworkParams) -> dict:
    out = {}
    for i, layer in enumerate(params.conv):
        out[f"conv{i}.weights"] = layer.weights
        out[f"conv{i}.bias"] = layer.bias
    if params.fc is not None:
        out["fc.weights"] = params.fc.weights
    for g in _GATES:
        out[f"lstm.w_{g}"] = getattr(params.lstm, f"w_{g}")
        out[f"lstm.b_{g}"] = getattr(params.lstm, f"b_{g}")
    out["lstm.w_logits"] = params.lstm.w_logits
    out["lstm.b_logits"] = params.lstm.b_logits
    return out


def _is_quantized_name(name: str) -> bool:
    # LSTM gate matrices and CNN kernels only; FC and output stay full precision
    return (name.startswith("conv") and name.endswith("weights")) or \
        (name.startswith("lstm.w_") and name != "lstm.w_logits")


def _is_bias(name: str) -> bool:
    return ".b" in name or name.endswith(".bias")


def _effective(params: NetworkParams, mode: str) -> dict:
    """Tensors the forward pass actually reads (codes in quantized modes)."""
    eff = {}
    for name, w in _named_tensors(params).items():
        if mode != "full" and _is_quantized_name(name):
            eff[name] = quant.quantize_weights(w, mode)
        else:
            eff[name] = w
    return eff


# ---------------------------------------------------------------------------
# Batched forward/backward
# ---------------------------------------------------------------------------

def _forward_batch(windows, eff: dict, cfg: NetworkConfig):
    """windows (B, q, U) -> (logits (B, q, Ny), cache for backprop)."""
    b, q, u_len = windows.shape
    nh = cfg.n_hidden
    h = np.zeros((b, nh))
    c = np.zeros((b, nh))
    steps = []
    logits = np.zeros((b, q, cfg.n_classes))
    for t in range(q):
        x = windows[:, t, :]
        cnn_cache = None
        if cfg.use_cnn:
            v, cnn_cache = _cnn_forward(x, eff, cfg)
        else:
            v = x
        xx = np.concatenate([h, v], axis=1)
        pre = {g: xx @ eff[f"lstm.w_{g}"] + eff[f"lstm.b_{g}"] for g in _GATES}
        gf, gi, go = (_sigmoid(pre[g]) for g in ("forget", "input", "output"))
        gc = np.tanh(pre["cell"])
        c_prev = c
        c = gf * c_prev + gc * gi
        tc = np.tanh(c)
        h = go * tc
        logits[:, t, :] = h @ eff["lstm.w_logits"] + eff["lstm.b_logits"]
        steps.append(dict(xx=xx, gf=gf, gi=gi, go=go, gc=gc,
                          c_prev=c_prev, c=c, tc=tc, h=h, cnn=cnn_cache))
    return logits, steps


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _cnn_forward(x, eff: dict, cfg: NetworkConfig):
    b = x.shape[0]
    maps = x.reshape(b, cfg.n_channels, cfg.window_len)
    pads, zs = [], []
    for i, (f, m) in enumerate(cfg.conv_layers):
        w = eff[f"conv{i}.weights"]
        bias = eff[f"conv{i}.bias"]
        left, right = _pad_window(m)
        xpad = np.pad(maps, ((0, 0), (0, 0), (left, right)))
        n = maps.shape[2]
        z = np.broadcast_to(bias[None, :, None], (b, f, n)).copy()
        for a in range(m):
            z += np.einsum("fd,bdi->bfi", w[:, :, a], xpad[:, :, a:a + n])
        pads.append(xpad)
        zs.append(z)
        maps = np.maximum(z, 0.0)
    flat = maps.reshape(b, -1)
    p = flat @ eff["fc.weights"].T
    v = x + p if cfg.residual else p
    return v, dict(pads=pads, zs=zs, flat=flat)


def _backward_batch(windows, labels, eff: dict, cfg: NetworkConfig,
                    steps: list, logits, replicate: bool):
    """Returns (mean loss over the batch, grads w.r.t. effective tensors)."""
    b, q, _ = windows.shape
    nh = cfg.n_hidden
    grads = {name: np.zeros_like(w) for name, w in eff.items()}
    rows = np.arange(b)

    probs = softmax(logits)  # (B, q, Ny)
    step_losses = -np.log(probs[rows[:, None], np.arange(q)[None, :],
                                labels[:, None]])
    if replicate:
        loss = float(step_losses.mean(axis=1).mean())
        weight = np.full(q, 1.0 / (q * b))
    else:
        loss = float(step_losses[:, -1].mean())
        weight = np.zeros(q)
        weight[-1] = 1.0 / b

    dh_carry = np.zeros((b, nh))
    dc_carry = np.zeros((b, nh))
    for t in reversed(range(q)):
        s = steps[t]
        dlogit = probs[:, t, :].copy()
        dlogit[rows, labels] -= 1.0
        dlogit *= weight[t]
        grads["lstm.w_logits"] += s["h"].T @ dlogit
        grads["lstm.b_logits"] += dlogit.sum(axis=0)
        dh = dlogit @ eff["lstm.w_logits"].T + dh_carry

        dgo = dh * s["tc"]
        dtc = dh * s["go"]
        dc = dc_carry + dtc * (1.0 - s["tc"] ** 2)
        dgf = dc * s["c_prev"]
        dgi = dc * s["gc"]
        dgc = dc * s["gi"]
        dc_carry = dc * s["gf"]

        dpre = {"forget": dgf * s["gf"] * (1.0 - s["gf"]),
                "input": dgi * s["gi"] * (1.0 - s["gi"]),
                "output": dgo * s["go"] * (1.0 - s["go"]),
                "cell": dgc * (1.0 - s["gc"] ** 2)}
        dxx = np.zeros_like(s["xx"])
        for g in _GATES:
            grads[f"lstm.w_{g}"] += s["xx"].T @ dpre[g]
            grads[f"lstm.b_{g}"] += dpre[g].sum(axis=0)
            dxx += dpre[g] @ eff[f"lstm.w_{g}"].T
        dh_carry = dxx[:, :nh]
        dv = dxx[:, nh:]

        if cfg.use_cnn:
            _cnn_backward(dv, s["cnn"], eff, cfg, grads, b)
    return loss, grads


def _cnn_backward(dv, cache, eff: dict, cfg: NetworkConfig, grads: dict, b: int):
    dp = dv  # residual add passes the gradient straight through to P
    grads["fc.weights"] += dp.T @ cache["flat"]
    dflat = dp @ eff["fc.weights"]
    f_last = cfg.conv_layers[-1][0]
    dmaps = dflat.reshape(b, f_last, cfg.window_len)
    for i in reversed(range(len(cfg.conv_layers))):
        w = eff[f"conv{i}.weights"]
        m = w.shape[2]
        n = cfg.window_len
        left, _ = _pad_window(m)
        dz = dmaps * (cache["zs"][i] > 0)
        xpad = cache["pads"][i]
        dw = np.stack([np.einsum("bfi,bdi->fd", dz, xpad[:, :, a:a + n])
                       for a in range(m)], axis=2)
        grads[f"conv{i}.weights"] += dw
        grads[f"conv{i}.bias"] += dz.sum(axis=(0, 2))
        dxpad = np.zeros_like(xpad)
        for a in range(m):
            dxpad[:, :, a:a + n] += np.einsum("fd,bfi->bdi", w[:, :, a], dz)
        dmaps = dxpad[:, :, left:left + n]


def sequence_loss_and_grads(seq, params: NetworkParams, net_cfg: NetworkConfig,
                            cfg: TrainConfig | None = None):
    """Loss and shadow-weight gradients for one windowed sequence."""
    cfg = cfg or TrainConfig()
    windows = np.asarray(seq.windows, dtype=np.float64)[None, :, :]
    labels = np.array([seq.label])
    eff = _effective(params, cfg.mode)
    logits, steps = _forward_batch(windows, eff, net_cfg)
    loss, grads = _backward_batch(windows, labels, eff, net_cfg, steps, logits,
                                  cfg.replicate_targets)
    return loss, _route_to_shadow(grads, params, cfg.mode,
                                  cfg.train_biases)


def _route_to_shadow(grads: dict, params: NetworkParams, mode: str,
                     train_biases: bool = True) -> dict:
    """STE: gradients w.r.t. codes pass through where |shadow| <= 1."""
    if mode == "full" and train_biases:
        return grads
    shadow = _named_tensors(params)
    out = {}
    for name, g in grads.items():
        if _is_bias(name) and (mode != "full" or not train_biases):
            continue  # biases pinned at zero
        out[name] = quant.ste_backward(g, shadow[name]) \
            if mode != "full" and _is_quantized_name(name) else g
    return out


def adagrad_step(params: NetworkParams, grads: dict, state: AdagradState,
                 cfg: TrainConfig) -> None:
    """Clip, accumulate squared gradients, update in place, clamp shadows."""
    tensors = _named_tensors(params)
    lim = cfg.clip_limit
    for name, g in grads.items():
        g = np.clip(g, -lim, lim)
        if name not in state.acc:
            state.acc[name] = np.zeros_like(g)
        state.acc[name] += g * g
        tensors[name] -= cfg.learning_rate * g / (np.sqrt(state.acc[name])
                                                  + state.epsilon)
        if cfg.mode != "full" and _is_quantized_name(name):
            np.clip(tensors[name], -1.0, 1.0, out=tensors[name])


def _stack_windows(seqs) -> tuple[np.ndarray, np.ndarray]:
    windows = np.stack([np.asarray(s.windows, dtype=np.float64) for s in seqs])
    labels = np.array([s.label for s in seqs], dtype=np.int64)
    return windows, labels


def train(train_seqs, test_seqs, cfg: TrainConfig,
          net_cfg: NetworkConfig) -> TrainResult:
    """Epoch loop over shuffled minibatches; deterministic per seed."""
    if not train_seqs or not test_seqs:
        raise ValueError("both splits must be non-empty")
    params = init_params(net_cfg, cfg.seed, cfg.init_scale, cfg.mode)
    state = AdagradState(epsilon=cfg.adagrad_epsilon)
    rng = np.random.default_rng(cfg.seed)
    windows, labels = _stack_windows(train_seqs)
    n = len(train_seqs)
    loss_trace = np.zeros(cfg.epochs)
    acc_trace = np.zeros(cfg.epochs)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch = windows[idx]
            if cfg.augment_noise > 0.0:
                batch = batch + rng.uniform(-cfg.augment_noise,
                                            cfg.augment_noise, batch.shape)
            eff = _effective(params, cfg.mode)
            logits, steps = _forward_batch(batch, eff, net_cfg)
            loss, grads = _backward_batch(batch, labels[idx], eff,
                                          net_cfg, steps, logits,
                                          cfg.replicate_targets)
            grads = _route_to_shadow(grads, params, cfg.mode,
                                     cfg.train_biases)
            adagrad_step(params, grads, state, cfg)
            epoch_loss += loss * len(idx)
        loss_trace[epoch] = epoch_loss / n
        acc_trace[epoch] = evaluate_accuracy(params, test_seqs, net_cfg, cfg.mode)
    return TrainResult(params, loss_trace, acc_trace)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def predict_probs(params: NetworkParams, seqs, net_cfg: NetworkConfig,
                  mode: str = "full") -> np.ndarray:
    """Softmax probabilities of the final step for each sequence."""
    windows, _ = _stack_windows(seqs)
    eff = _effective(params, mode)
    logits, _ = _forward_batch(windows, eff, net_cfg)
    return softmax(logits[:, -1, :])


def evaluate_accuracy(params: NetworkParams, seqs, net_cfg: NetworkConfig,
                      mode: str = "full") -> float:
    probs = predict_probs(params, seqs, net_cfg, mode)
    preds = probs.argmax(axis=1)
    labels = np.array([s.label for s in seqs])
    return float((preds == labels).mean())


def auc_macro(labels, scores) -> float:
    """Macro one-vs-rest AUC via the rank statistic (ties get mid-ranks)."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    aucs = []
    for k in range(scores.shape[1]):
        pos = labels == k
        n_pos, n_neg = int(pos.sum()), int((~pos).sum())
        if n_pos == 0 or n_neg == 0:
            continue
        order = scores[:, k].argsort(kind="mergesort")
        ranks = np.empty(len(labels))
        sorted_scores = scores[order, k]
        i = 0
        while i < len(labels):
            j = i
            while j + 1 < len(labels) and sorted_scores[j + 1] == sorted_scores[i]:
                j += 1
            ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
            i = j + 1
        auc = (ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
        aucs.append(auc)
    return float(np.mean(aucs))


def confusion_matrix(labels, preds, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    for y, p in zip(labels, preds):
        cm[int(y), int(p)] += 1
    return cm


def write_trace(path, loss_trace, accuracy_trace) -> None:
    lines = ["epoch,loss,test_accuracy"]
    for e, (l, a) in enumerate(zip(loss_trace, accuracy_trace)):
        lines.append(f"{e},{float(l)!r},{float(a)!r}")
    Path(path).write_text("\n".join(lines) + "\n")
