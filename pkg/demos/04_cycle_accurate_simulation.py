#!/usr/bin/env python3
"""Run a ternary network through the eight-state accelerator simulator.

Builds the DB-a-sized gesture configuration (128 channels, 5-sample window,
30 steps, 250 hidden units), executes one inference on the cycle-counting
simulator, checks the result against the bit-exact golden model, and puts
the latency against the 10 ms real-time budget.
"""

import numpy as np

from qcnnlstm import estimate, fsm, fxp, quant
from qcnnlstm.model import NetworkConfig, network_forward_fixed
from qcnnlstm.train import init_params

net = NetworkConfig(window_len=5, n_steps=30, n_hidden=250, n_classes=8,
                    n_channels=128, use_cnn=False)
params = init_params(net, seed=7, init_scale=1.0)
qnet = quant.QuantizedNetwork.from_params(params, "ternary")
machine = fsm.MachineConfig()

print(f"network: {net.n_channels} channels x window {net.window_len}, "
      f"{net.n_steps} steps, {net.n_hidden} hidden, {net.n_classes} classes")
print(f"weights in banks: {qnet.weight_bits():,} bits "
      f"(capacity {machine.wb_capacity_bits:,})\n")

rng = np.random.default_rng(0)
raw = fxp.to_raw(rng.uniform(-1, 1, (net.n_steps, net.input_len)))

banks = fsm.load_banks(qnet, machine)
predicted, report = fsm.run_inference(raw, banks, net, machine)
print(report.summary())

golden = network_forward_fixed(raw, qnet, net, machine.activation_format)
match = np.array_equal(golden[-1], banks.im["logits"])
print(f"\ngolden-model logits match bit for bit: {match}")

verdict = fsm.latency_report(report, budget_seconds=10e-3)
print(f"worst window {verdict.latency_seconds * 1e6:.1f} us vs "
      f"{verdict.budget_seconds * 1e3:.0f} ms budget -> "
      f"margin {verdict.margin:.1f}x ({'PASS' if verdict.passed else 'FAIL'})")

paper_macs = estimate.mac_count(net, "window", "paper")
print(f"\nanalytic check: {paper_macs:,} MACs per window "
      f"-> {estimate.response_time(paper_macs, 6.3) * 1e6:.1f} us at 6.3 GOPs")
