"""Synthetic chaotic and sinusoidal class datasets, plus signal windowing.

Classes are discrete parameter regimes of the logistic map, the Lorenz
system, or a sine bank with linearly spaced frequencies. Realizations of one
class differ by initial condition (chaotic systems) and additive uniform
noise; every generator is deterministic per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "LogisticParams",
    "LorenzParams",
    "WindowedSequence",
    "SyntheticDataset",
    "logistic_series",
    "lorenz_series",
    "sine_bank_series",
    "make_windows",
    "make_logistic_dataset",
    "make_lorenz_dataset",
    "make_sine_dataset",
    "save_dataset",
    "load_dataset",
]

LOGISTIC_CLASS_R = (3.6, 3.7, 3.8, 3.9, 4.0)
LORENZ_CLASS_SIGMA = (8.0, 10.5, 13.0, 15.5, 18.0)


@dataclass(frozen=True)
class LogisticParams:
    r: float
    x0: float
    n_samples: int
    transient: int = 0

    def __post_init__(self):
        if not 0.0 < self.x0 < 1.0:
            raise ValueError("x0 must lie in (0, 1)")
        if not 0.0 < self.r <= 4.0:
            raise ValueError("r must lie in (0, 4]")
        if self.n_samples < 1 or self.transient < 0:
            raise ValueError("bad sample counts")


@dataclass(frozen=True)
class LorenzParams:
    sigma: float
    rho: float = 28.0
    beta: float = 5.0 / 3.0
    initial: tuple = (1.0, 1.0, 1.0)
    dt: float = 0.01
    n_samples: int = 1000
    transient: int = 1000

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.transient < 0:
            raise ValueError("transient must be >= 0")


@dataclass
class WindowedSequence:
    """q windows of length channels*window_len plus one class label."""

    windows: np.ndarray  # (n_steps, n_channels * window_len)
    label: int


@dataclass
class SyntheticDataset:
    sequences: list
    class_params: list
    noise_amplitude: float
    generator: str = ""
    window_len: int = 0
    n_steps: int = 0
    n_channels: int = 1
    seed: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.class_params)


def logistic_series(p: LogisticParams) -> np.ndarray:
    """Iterate x <- r*x*(1-x); return n_samples values after the transient."""
    out = np.empty(p.n_samples)
    x = p.x0
    for _ in range(p.transient):
        x = p.r * x * (1.0 - x)
    for i in range(p.n_samples):
        x = p.r * x * (1.0 - x)
        out[i] = x
    return out


def _lorenz_deriv(state, sigma, rho, beta):
    x, y, z = state
    return np.array([sigma * (y - x), x * (rho - z) - y, x * y - beta * z])


def lorenz_series(p: LorenzParams, scale: float = 40.0) -> np.ndarray:
    """RK4-integrate the Lorenz system; return x(t)/scale after the transient.

    The scaled trajectory must stay inside [-1, 1]; a scale that is too small
    is reported rather than silently clipped.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    state = np.asarray(p.initial, dtype=np.float64)
    n_total = p.transient + p.n_samples
    xs = np.empty(p.n_samples)
    for i in range(n_total):
        k1 = _lorenz_deriv(state, p.sigma, p.rho, p.beta)
        k2 = _lorenz_deriv(state + 0.5 * p.dt * k1, p.sigma, p.rho, p.beta)
        k3 = _lorenz_deriv(state + 0.5 * p.dt * k2, p.sigma, p.rho, p.beta)
        k4 = _lorenz_deriv(state + p.dt * k3, p.sigma, p.rho, p.beta)
        state = state + (p.dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if i >= p.transient:
            xs[i - p.transient] = state[0]
    xs /= scale
    if np.abs(xs).max() > 1.0:
        raise ValueError(f"scaled trajectory exits [-1, 1] "
                         f"(max |x|/scale = {np.abs(xs).max():.3f}); increase scale")
    return xs


def sine_bank_series(class_idx: int, beta: float, t_grid,
                     alpha: float = 3.0) -> np.ndarray:
    """Channel j of the sine bank: sin(t * (alpha + j*beta)) on t_grid."""
    t = np.asarray(t_grid, dtype=np.float64)
    return np.sin(t * (alpha + class_idx * beta))


def make_windows(signal, label: int, window_len: int, n_steps: int,
                 noise_amplitude: float = 0.0, rng_seed: int = 0) -> WindowedSequence:
    """Cut q consecutive non-overlapping windows and add uniform noise.

    `signal` is (channels, T) or (T,); each window flattens to
    channels*window_len values. Noise is uniform in [-amplitude, +amplitude],
    drawn from a stream seeded by `rng_seed`.
    """
    sig = np.atleast_2d(np.asarray(signal, dtype=np.float64))
    m, t_len = sig.shape
    needed = n_steps * window_len
    if t_len < needed:
        raise ValueError(f"signal length {t_len} < n_steps*window_len = {needed}")
    cut = sig[:, :needed].reshape(m, n_steps, window_len)
    windows = cut.transpose(1, 0, 2).reshape(n_steps, m * window_len)
    if noise_amplitude > 0.0:
        rng = np.random.default_rng(rng_seed)
        windows = windows + rng.uniform(-noise_amplitude, noise_amplitude,
                                        windows.shape)
    return WindowedSequence(windows, int(label))


def _dataset(generator, class_params, make_signal, per_class, window_len,
             n_steps, noise_amplitude, seed, n_channels=1, extra=None):
    root = np.random.default_rng(seed)
    sequences = []
    for label, param in enumerate(class_params):
        for k in range(per_class):
            realization_seed = int(root.integers(0, 2**63 - 1))
            signal = make_signal(param, np.random.default_rng(realization_seed))
            sequences.append(make_windows(signal, label, window_len, n_steps,
                                          noise_amplitude, realization_seed))
    return SyntheticDataset(sequences, list(class_params), noise_amplitude,
                            generator, window_len, n_steps, n_channels, seed,
                            extra or {})


def make_logistic_dataset(r_values=LOGISTIC_CLASS_R, per_class: int = 20,
                          window_len: int = 20, n_steps: int = 5,
                          noise_amplitude: float = 0.01, seed: int = 0,
                          transient: int = 100) -> SyntheticDataset:
    n = window_len * n_steps

    def gen(r, rng):
        x0 = rng.uniform(0.1, 0.9)
        return logistic_series(LogisticParams(r, x0, n, transient))

    return _dataset("logistic", r_values, gen, per_class, window_len, n_steps,
                    noise_amplitude, seed)


def make_lorenz_dataset(sigmas=LORENZ_CLASS_SIGMA, per_class: int = 20,
                        window_len: int = 20, n_steps: int = 5,
                        noise_amplitude: float = 0.01, seed: int = 0,
                        scale: float = 40.0, dt: float = 0.01,
                        transient: int = 1000,
                        n_samples: int | None = None) -> SyntheticDataset:
    n = n_samples if n_samples is not None else window_len * n_steps

    def gen(sigma, rng):
        initial = tuple(np.array([1.0, 1.0, 1.0]) + rng.uniform(-0.5, 0.5, 3))
        return lorenz_series(LorenzParams(sigma, initial=initial, dt=dt,
                                          n_samples=n, transient=transient),
                             scale)

    return _dataset("lorenz", sigmas, gen, per_class, window_len, n_steps,
                    noise_amplitude, seed, extra={"scale": scale, "dt": dt})


def make_sine_dataset(n_classes: int = 5, beta: float = 0.1,
                      per_class: int = 30, window_len: int = 20,
                      n_steps: int = 5, dt: float = 0.1,
                      noise_amplitude: float = 0.05, seed: int = 0,
                      alpha: float = 3.0) -> SyntheticDataset:
    """Sine-bank classes: same deterministic waveform per class, noisy copies."""
    t = np.arange(window_len * n_steps) * dt

    def gen(j, rng):
        return sine_bank_series(int(j), beta, t, alpha)

    return _dataset("sine", list(range(n_classes)), gen, per_class, window_len,
                    n_steps, noise_amplitude, seed,
                    extra={"beta": beta, "alpha": alpha, "dt": dt})


# ---------------------------------------------------------------------------
# On-disk form: UCR-style TSV (label, then the un-windowed series) plus a
# key=value manifest carrying the windowing and generator settings.
# ---------------------------------------------------------------------------

def save_dataset(ds: SyntheticDataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for ch in range(ds.n_channels):
        lines = []
        for seq in ds.sequences:
            series = seq.windows.reshape(ds.n_steps, ds.n_channels,
                                         ds.window_len)[:, ch, :].ravel()
            vals = "\t".join(repr(float(v)) for v in series)
            lines.append(f"{seq.label}\t{vals}")
        name = "data.tsv" if ds.n_channels == 1 else f"data_ch{ch}.tsv"
        (out / name).write_text("\n".join(lines) + "\n")
    kv = {"generator": ds.generator,
          "classes": ds.n_classes,
          "class_params": ",".join(repr(float(p)) for p in ds.class_params),
          "noise_amplitude": repr(float(ds.noise_amplitude)),
          "window_len": ds.window_len,
          "n_steps": ds.n_steps,
          "n_channels": ds.n_channels,
          "seed": ds.seed}
    kv.update(ds.extra)
    (out / "manifest.txt").write_text(
        "".join(f"{k} = {v}\n" for k, v in kv.items()))


def load_dataset(in_dir) -> SyntheticDataset:
    src = Path(in_dir)
    kv = {}
    for line in (src / "manifest.txt").read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            k, _, v = line.partition("=")
            kv[k.strip()] = v.strip()
    n_channels = int(kv.get("n_channels", 1))
    window_len, n_steps = int(kv["window_len"]), int(kv["n_steps"])
    per_channel = []
    for ch in range(n_channels):
        name = "data.tsv" if n_channels == 1 else f"data_ch{ch}.tsv"
        rows = [line.split("\t")
                for line in (src / name).read_text().splitlines()]
        per_channel.append(rows)
    sequences = []
    for i, row in enumerate(per_channel[0]):
        label = int(float(row[0]))
        chans = np.array([[float(v) for v in per_channel[ch][i][1:]]
                          for ch in range(n_channels)])
        sig = chans.reshape(n_channels, n_steps, window_len)
        windows = sig.transpose(1, 0, 2).reshape(n_steps, n_channels * window_len)
        sequences.append(WindowedSequence(windows, label))
    class_params = [float(p) for p in kv["class_params"].split(",")]
    known = {"generator", "classes", "class_params", "noise_amplitude",
             "window_len", "n_steps", "n_channels", "seed"}
    extra = {k: v for k, v in kv.items() if k not in known}
    return SyntheticDataset(sequences, class_params,
                            float(kv["noise_amplitude"]), kv["generator"],
                            window_len, n_steps, n_channels, int(kv["seed"]),
                            extra)
