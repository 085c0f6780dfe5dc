#!/usr/bin/env python3
"""End-to-end ECG200: train, quantize, simulate on the cycle-exact engine.

Loads the bundled UCR ECG200 split, trains the CNN-LSTM at the reference
hyperparameters (window 20, 4 steps, 250 hidden, Adagrad 0.05), ternarizes
a second run, and pushes test examples through the accelerator simulator to
compare float, quantized-float, and 12-bit fixed-point accuracies.
"""

from pathlib import Path

from qcnnlstm import fsm, fxp, ingest, quant
from qcnnlstm.model import NetworkConfig
from qcnnlstm.train import TrainConfig, train

DATA = Path(__file__).resolve().parent.parent / "data" / "ECG200"

train_raw = ingest.load_ucr(DATA / "ECG200_TRAIN.tsv")
test_raw = ingest.load_ucr(DATA / "ECG200_TEST.tsv")
train_raw, test_raw = ingest.normalize_and_split(train_raw,
                                                 predefined_test=test_raw)
train_seqs = ingest.dataset_to_sequences(train_raw, window_len=20, n_steps=4)
test_seqs = ingest.dataset_to_sequences(test_raw, window_len=20, n_steps=4)
print(f"ECG200: {len(train_seqs)} train / {len(test_seqs)} test, "
      f"2 classes (normal vs myocardial infarction)\n")

fp_net = NetworkConfig(window_len=20, n_steps=4, n_hidden=250, n_classes=2,
                       conv_layers=((10, 5), (30, 3)), use_cnn=True)
fp = train(train_seqs, test_seqs,
           TrainConfig(learning_rate=0.05, epochs=60, seed=0), fp_net)
print(f"FP-CNN-LSTM : test accuracy {fp.accuracy_trace[-1]:.3f}")

t_net = NetworkConfig(window_len=20, n_steps=4, n_hidden=350, n_classes=2,
                      conv_layers=((10, 5), (30, 3)), use_cnn=True)
tern = train(train_seqs, test_seqs,
             TrainConfig(learning_rate=0.1, epochs=100, seed=1,
                         mode="ternary"), t_net)
print(f"T-CNN-LSTM  : test accuracy {tern.accuracy_trace[-1]:.3f}")

machine = fsm.MachineConfig()
qnet = quant.QuantizedNetwork.from_params(tern.params, "ternary",
                                          machine.activation_format)
banks = fsm.load_banks(qnet, machine)
correct = 0
for seq in test_seqs:
    raw = fxp.to_raw(seq.windows, machine.activation_format)
    predicted, report = fsm.run_inference(raw, banks, t_net, machine)
    correct += int(predicted == seq.label)
print(f"Hardware    : test accuracy {correct / len(test_seqs):.3f} "
      f"(12-bit fixed point, cycle-exact)")
print(f"\none inference: {report.total_cycles:,} cycles = "
      f"{report.latency_seconds * 1e6:.0f} us at 100 MHz, "
      f"{report.executed_macs:,} MACs")
