"""Command-line surface: gen, embed, train, quantize, eval, simulate, estimate.

Every run that produces artifacts writes a run manifest next to them. Exit
codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import subprocess
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, datagen, estimate, fsm, fxp, ingest, model, quant, train as train_mod

USAGE_ERROR = 1
DATA_ERROR = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


@dataclass
class RunManifest:
    command: str
    config_path: str
    seed: int
    timestamp: str
    git_describe: str
    out_dir: str

    def write(self) -> None:
        out = Path(self.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "run_manifest.txt").write_text(
            f"command = {self.command}\nconfig = {self.config_path}\n"
            f"seed = {self.seed}\ntimestamp = {self.timestamp}\n"
            f"git = {self.git_describe}\nout_dir = {self.out_dir}\n")


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5)
        return out.stdout.strip() or "unknown"
    except Exception:
        return "unknown"


def _write_manifest(args, out_dir, config_path="", seed=0) -> None:
    RunManifest(" ".join(args), str(config_path), int(seed),
                time.strftime("%Y-%m-%dT%H:%M:%S"), _git_describe(),
                str(out_dir)).write()


def read_config(path) -> dict:
    """Flat key = value file with # comments."""
    path = Path(path)
    if not path.exists():
        raise ingest.DataFormatError(f"{path}: no such config file")
    kv = {}
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ingest.DataFormatError(f"{path}: bad line {line!r}")
        kv[key.strip()] = value.strip()
    return kv


def _net_config_from(kv: dict, n_classes: int, n_channels: int = 1) -> model.NetworkConfig:
    conv = tuple(tuple(int(x) for x in part.split("x"))
                 for part in kv.get("conv_layers", "10x5;30x3").split(";") if part)
    return model.NetworkConfig(
        window_len=int(kv["window_len"]),
        n_steps=int(kv["n_steps"]),
        n_hidden=int(kv["n_hidden"]),
        n_classes=int(kv.get("n_classes", n_classes)),
        n_channels=int(kv.get("n_channels", n_channels)),
        conv_layers=conv,
        use_cnn=bool(int(kv.get("use_cnn", 1))),
        residual=bool(int(kv.get("residual", 1))))


# ---------------------------------------------------------------------------
# Data loading shared by train/eval/simulate
# ---------------------------------------------------------------------------

def _split_synthetic(ds: datagen.SyntheticDataset, train_fraction: float,
                     seed: int):
    rng = np.random.default_rng(seed)
    by_class: dict[int, list] = {}
    for i, seq in enumerate(ds.sequences):
        by_class.setdefault(seq.label, []).append(i)
    train_idx, test_idx = [], []
    for label in sorted(by_class):
        idx = np.array(by_class[label])
        idx = idx[rng.permutation(len(idx))]
        n_train = int(round(train_fraction * len(idx)))
        train_idx.extend(idx[:n_train].tolist())
        test_idx.extend(idx[n_train:].tolist())
    train_seqs = [ds.sequences[i] for i in sorted(train_idx)]
    test_seqs = [ds.sequences[i] for i in sorted(test_idx)]
    return train_seqs, test_seqs


def _find_ucr_pair(data_dir: Path):
    trains = sorted(data_dir.glob("*_TRAIN*"))
    tests = sorted(data_dir.glob("*_TEST*"))
    if trains and tests:
        return trains[0], tests[0]
    return None


def load_split_sequences(data_dir, kv: dict, seed: int = 0):
    """Returns (train_seqs, test_seqs, n_classes, n_channels)."""
    data_dir = Path(data_dir)
    if (data_dir / "manifest.txt").exists() and (
            (data_dir / "data.tsv").exists()
            or (data_dir / "data_ch0.tsv").exists()):
        ds = datagen.load_dataset(data_dir)
        frac = float(kv.get("train_fraction", 0.7))
        train_seqs, test_seqs = _split_synthetic(ds, frac, seed)
        return train_seqs, test_seqs, ds.n_classes, ds.n_channels
    pair = _find_ucr_pair(data_dir)
    if pair is None:
        raise ingest.DataFormatError(
            f"{data_dir}: neither a generated dataset nor a UCR train/test pair")
    train_raw = ingest.load_ucr(pair[0])
    test_raw = ingest.load_ucr(pair[1])
    if int(kv.get("envelope", 0)):
        train_raw = ingest.envelope_dataset(train_raw)
        test_raw = ingest.envelope_dataset(test_raw)
    train_raw, test_raw = ingest.normalize_and_split(
        train_raw, predefined_test=test_raw)
    window_len, n_steps = int(kv["window_len"]), int(kv["n_steps"])
    train_seqs = ingest.dataset_to_sequences(train_raw, window_len, n_steps)
    test_seqs = ingest.dataset_to_sequences(test_raw, window_len, n_steps)
    return train_seqs, test_seqs, train_raw.n_classes, train_raw.n_channels


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_gen(args, argv) -> int:
    out = Path(args.out)
    if args.system == "sine":
        ds = datagen.make_sine_dataset(
            n_classes=args.classes, beta=args.beta, per_class=args.per_class,
            window_len=args.window, n_steps=args.steps, alpha=args.alpha,
            noise_amplitude=args.noise, seed=args.seed)
    elif args.system == "logistic":
        r_values = np.linspace(3.6, 4.0, args.classes)
        ds = datagen.make_logistic_dataset(
            r_values=tuple(r_values), per_class=args.per_class,
            window_len=args.window, n_steps=args.steps,
            noise_amplitude=args.noise, seed=args.seed)
    else:
        sigmas = np.linspace(8.0, 18.0, args.classes)
        ds = datagen.make_lorenz_dataset(
            sigmas=tuple(sigmas), per_class=args.per_class,
            window_len=args.window, n_steps=args.steps, scale=args.scale,
            noise_amplitude=args.noise, seed=args.seed)
    datagen.save_dataset(ds, out)
    _write_manifest(argv, out, seed=args.seed)
    print(f"wrote {len(ds.sequences)} sequences ({ds.n_classes} classes) to {out}")
    return 0


def _cmd_embed(args, argv) -> int:
    ds = datagen.load_dataset(args.data)
    signals = np.stack([seq.windows.ravel() for seq in ds.sequences])
    labels = np.array([seq.label for seq in ds.sequences])
    dm = analysis.fourier_distance(signals, labels=labels)
    scaled = analysis.rescale_distances(dm)
    emb = analysis.embed_2d(scaled, iters=args.iters, seed=args.seed,
                            metric=args.metric)
    corr = analysis.embedding_correlation(scaled, emb)
    out = Path(args.out)
    analysis.save_embedding(out, dm, emb)
    _write_manifest(argv, out, seed=args.seed)
    print(f"embedding energy {emb.energy:.6g}, correlation {corr:.4f}")
    return 0


def _cmd_train(args, argv) -> int:
    kv = read_config(args.config)
    seed = int(kv.get("seed", 0))
    train_seqs, test_seqs, n_classes, n_channels = \
        load_split_sequences(args.data, kv, seed)
    net_cfg = _net_config_from(kv, n_classes, n_channels)
    mode = {"full": "full", "ternary": "ternary", "binary": "binary"}[args.precision]
    cfg = train_mod.TrainConfig(
        learning_rate=float(kv.get("learning_rate", 0.05 if mode == "full" else 0.1)),
        epochs=int(kv.get("epochs", 50)),
        batch_size=int(kv.get("batch_size", 32)),
        seed=seed, mode=mode,
        init_scale=float(kv.get("init_scale", 0.01)),
        augment_noise=float(kv.get("augment_noise", 0.0)),
        train_biases=bool(int(kv.get("train_biases", 1))))
    result = train_mod.train(train_seqs, test_seqs, cfg, net_cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model.save_network(out, result.params, net_cfg, mode="full")
    # record the training precision for downstream quantize/eval/simulate
    (out / "config.txt").write_text(model._config_text(net_cfg, mode))
    (out / "hyperparams.txt").write_text(
        f"learning_rate = {cfg.learning_rate!r}\nepochs = {cfg.epochs}\n"
        f"batch_size = {cfg.batch_size}\nseed = {cfg.seed}\n"
        f"mode = {cfg.mode}\ninit_scale = {cfg.init_scale!r}\n"
        f"clip_limit = {cfg.clip_limit!r}\n"
        f"adagrad_epsilon = {cfg.adagrad_epsilon!r}\n"
        f"augment_noise = {cfg.augment_noise!r}\n"
        f"train_biases = {int(cfg.train_biases)}\n"
        + model._config_text(net_cfg, mode))
    train_mod.write_trace(out / "trace.csv", result.loss_trace,
                          result.accuracy_trace)
    _write_manifest(argv, out, config_path=args.config, seed=seed)
    print(f"final loss {result.loss_trace[-1]:.4f}, "
          f"test accuracy {result.accuracy_trace[-1]:.4f}")
    return 0


def _cmd_quantize(args, argv) -> int:
    params, cfg, mode = model.load_network(args.model)
    if mode == "full":
        mode = "ternary"
    model.save_network(args.out, params, cfg, mode=mode)
    _write_manifest(argv, args.out)
    qnet = quant.QuantizedNetwork.from_params(params, mode)
    print(f"packed {mode} model: {qnet.weight_bits():,} weight bits -> {args.out}")
    return 0


def _cmd_eval(args, argv) -> int:
    params, cfg, mode = model.load_network(args.model)
    kv = {"window_len": cfg.window_len, "n_steps": cfg.n_steps}
    _, test_seqs, n_classes, _ = load_split_sequences(args.data, kv)
    if n_classes != cfg.n_classes:
        raise ingest.DataFormatError(
            f"model has {cfg.n_classes} classes, data has {n_classes}")
    probs = train_mod.predict_probs(params, test_seqs, cfg, mode)
    labels = np.array([s.label for s in test_seqs])
    if args.report == "accuracy":
        acc = float((probs.argmax(axis=1) == labels).mean())
        print(f"accuracy {acc:.4f}")
    elif args.report == "auc":
        print(f"auc {train_mod.auc_macro(labels, probs):.4f}")
    else:
        cm = train_mod.confusion_matrix(labels, probs.argmax(axis=1),
                                        cfg.n_classes)
        print("confusion matrix (rows = target, cols = predicted):")
        for row in cm:
            print(" ".join(f"{v:5d}" for v in row))
    return 0


def _machine_config_from(kv: dict) -> fsm.MachineConfig:
    fields = {}
    for key in ("mac_lanes", "bus_bits", "wb_read_bits_per_cycle",
                "im_bits_per_cycle", "lut_size", "wb_capacity_bits",
                "im_capacity_bits"):
        if key in kv:
            fields[key] = int(kv[key])
    if "clock_hz" in kv:
        fields["clock_hz"] = float(kv["clock_hz"])
    return fsm.MachineConfig(**fields)


def _cmd_simulate(args, argv) -> int:
    params, cfg, mode = model.load_network(args.model)
    if mode == "full":
        raise ingest.DataFormatError(
            "simulate needs a quantized model; run `quantize` first")
    kv = {"window_len": cfg.window_len, "n_steps": cfg.n_steps}
    _, test_seqs, _, _ = load_split_sequences(args.data, kv)
    mc = _machine_config_from(read_config(args.machine)) if args.machine \
        else fsm.MachineConfig()
    qnet = quant.QuantizedNetwork.from_params(params, mode,
                                              mc.activation_format)
    banks = fsm.load_banks(qnet, mc)
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    n = min(args.limit, len(test_seqs)) if args.limit else len(test_seqs)
    correct = 0
    report = None
    for i in range(n):
        seq = test_seqs[i]
        raw = fxp.to_raw(seq.windows, mc.activation_format)
        trace = (out / "trace.csv") if (out and args.trace and i == 0) else None
        pred, report = fsm.run_inference(raw, banks, cfg, mc, trace_path=trace)
        correct += int(pred == seq.label)
    print(f"simulated {n} inferences, accuracy {correct / n:.4f}")
    print(report.summary())
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "cycle_report.txt").write_text(report.summary() + "\n")
        (out / "cycle_report.csv").write_text(report.csv())
        _write_manifest(argv, out)
    return 0


def _cmd_estimate(args, argv) -> int:
    kv = read_config(args.config)
    n_classes = int(kv.get("n_classes", 2))
    net = _net_config_from(kv, n_classes)
    no_cnn = model.NetworkConfig(
        window_len=net.window_len, n_steps=net.n_steps, n_hidden=net.n_hidden,
        n_classes=net.n_classes, n_channels=net.n_channels,
        conv_layers=net.conv_layers, use_cnn=False, residual=False)
    print(estimate.estimate_table(no_cnn, net if net.use_cnn else no_cnn))
    gops = float(kv.get("gops", 6.3))
    paper = estimate.mac_count(no_cnn, "window", "paper")
    rt = estimate.response_time(paper, gops)
    print(f"response time at {gops} GOPs: {rt * 1e6:.1f} us per window")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="qcnnlstm", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--system", required=True,
                   choices=("logistic", "lorenz", "sine"))
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=3.0)
    p.add_argument("--scale", type=float, default=40.0)

    p = sub.add_parser("embed", help="Fourier distances + 2-D embedding")
    p.add_argument("--data", required=True)
    p.add_argument("--iters", type=int, default=100_000)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--metric", choices=analysis.METRICS, default="euclidean")

    p = sub.add_parser("train", help="train a classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--precision", choices=("full", "ternary", "binary"),
                   default="full")
    p.add_argument("--out", required=True)

    p = sub.add_parser("quantize", help="pack shadow weights to 2-bit codes")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", choices=("accuracy", "auc", "confusion"),
                   default="accuracy")

    p = sub.add_parser("simulate", help="run the cycle-accurate simulator")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--machine", default=None)
    p.add_argument("--trace", action="store_true")
    p.add_argument("--out", default=None)
    p.add_argument("--limit", type=int, default=0)

    p = sub.add_parser("estimate", help="memory/MAC/latency estimates")
    p.add_argument("--config", required=True)
    return parser


_HANDLERS = {
    "gen": _cmd_gen,
    "embed": _cmd_embed,
    "train": _cmd_train,
    "quantize": _cmd_quantize,
    "eval": _cmd_eval,
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
}


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return USAGE_ERROR
        return _HANDLERS[args.command](args, argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    except KeyError as exc:
        print(f"data error: missing config key {exc}", file=sys.stderr)
        return DATA_ERROR
    except (ingest.DataFormatError, FileNotFoundError, ValueError,
            fsm.BankCapacityError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_ERROR


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
