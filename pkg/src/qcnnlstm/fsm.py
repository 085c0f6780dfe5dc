"""Cycle-counting simulator of the eight-state shared-bus inference machine.

States per window: (1) conv + ReLU once per CNN layer, (2) FC + residual add,
(3) the four gate matrix products, (4) sigmoid/tanh lookups, (5) cell-state
update, (6) tanh of the cell, (7) output-gate product, (8) output layer on
the final window (otherwise loop back). All arithmetic runs on raw activation
codes through the fxp primitives, so the numeric result is bit-identical to
the model module's fixed-point forward pass; on top of that the simulator
books cycles, MACs, and memory traffic per state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil
from pathlib import Path

import numpy as np

from . import fxp
from .fxp import QFormat
from .model import NetworkConfig, _pad_window
from .quant import QuantizedNetwork

__all__ = [
    "MachineConfig",
    "MemoryBanks",
    "CycleReport",
    "LatencyVerdict",
    "BankCapacityError",
    "conv_layer_cycles",
    "relu_overhead_cycles",
    "state_cycle_cost",
    "load_banks",
    "run_inference",
    "latency_report",
]


class BankCapacityError(RuntimeError):
    pass


@dataclass(frozen=True)
class MachineConfig:
    mac_lanes: int = 32
    bus_bits: int = 96
    wb_read_bits_per_cycle: int = 64
    im_bits_per_cycle: int = 48
    lut_size: int = 64
    clock_hz: float = 1e8
    activation_format: QFormat = fxp.ACT_FORMAT
    wb_capacity_bits: int = 16_020_000  # block-RAM budget of the target part
    im_capacity_bits: int = 1_000_000

    def __post_init__(self):
        if min(self.mac_lanes, self.bus_bits, self.wb_read_bits_per_cycle,
               self.im_bits_per_cycle, self.lut_size) < 1 or self.clock_hz <= 0:
            raise ValueError("machine parameters must be positive")
        if self.lut_size & (self.lut_size - 1):
            raise ValueError("lut_size must be a power of two")

    @property
    def lanes_per_gate(self) -> int:
        # the 32 MAC lanes are split across the four concurrent gate products
        return max(1, self.mac_lanes // 4)


@dataclass
class MemoryBanks:
    """Weight banks (2-bit codes + fixed-point FC/output) and 12-bit IMs.

    Reads and writes are issued in beats no wider than the per-cycle caps;
    totals and the widest observed beat are recorded for the bandwidth
    invariants.
    """

    qnet: QuantizedNetwork
    mc: MachineConfig
    im: dict = field(default_factory=dict)
    wb_bits_read: int = 0
    im_bits: int = 0
    max_wb_beat: int = 0
    max_im_beat: int = 0

    def wb_read(self, n_values: int, bits_per_value: int) -> None:
        self._beats("wb", n_values * bits_per_value, self.mc.wb_read_bits_per_cycle)

    def im_write(self, name: str, values: np.ndarray) -> None:
        self.im[name] = values
        self._beats("im", values.size * 12, self.mc.im_bits_per_cycle)

    def im_read(self, name: str) -> np.ndarray:
        values = self.im[name]
        self._beats("im", values.size * 12, self.mc.im_bits_per_cycle)
        return values

    def _beats(self, port: str, total_bits: int, cap: int) -> None:
        if total_bits <= 0:
            return
        n_full, rem = divmod(total_bits, cap)
        widest = cap if n_full else rem
        if port == "wb":
            self.wb_bits_read += total_bits
            self.max_wb_beat = max(self.max_wb_beat, widest)
        else:
            self.im_bits += total_bits
            self.max_im_beat = max(self.max_im_beat, widest)


@dataclass
class CycleReport:
    cycles_per_state: np.ndarray
    total_cycles: int
    latency_seconds: float
    worst_window_cycles: int
    worst_window_latency_seconds: float
    executed_macs: int
    paper_macs: int
    wb_bits_read: int
    im_bits_transferred: int
    max_wb_beat_bits: int
    max_im_beat_bits: int
    state_trace: list

    def summary(self) -> str:
        lines = ["state  cycles"]
        lines += [f"  {s + 1}    {int(c):,}"
                  for s, c in enumerate(self.cycles_per_state)]
        lines += [
            f"total cycles        {self.total_cycles:,}",
            f"latency             {self.latency_seconds * 1e6:.1f} us",
            f"worst window        {self.worst_window_latency_seconds * 1e6:.1f} us",
            f"executed MACs       {self.executed_macs:,}",
            f"paper-variant MACs  {self.paper_macs:,} per window",
            f"WB bits read        {self.wb_bits_read:,}",
            f"IM bits transferred {self.im_bits_transferred:,}",
        ]
        return "\n".join(lines)

    def csv(self) -> str:
        head = ",".join(f"state{s+1}_cycles" for s in range(8))
        vals = ",".join(str(int(c)) for c in self.cycles_per_state)
        return (f"{head},total_cycles,latency_seconds,executed_macs,"
                f"wb_bits_read,im_bits_transferred\n"
                f"{vals},{self.total_cycles},{self.latency_seconds!r},"
                f"{self.executed_macs},{self.wb_bits_read},"
                f"{self.im_bits_transferred}\n")


@dataclass
class LatencyVerdict:
    latency_seconds: float
    budget_seconds: float
    passed: bool
    margin: float


def conv_layer_cycles(length: int, width: int, filters: int,
                      lanes: int, depth: int = 1) -> int:
    """(L - m + 1) * f * ceil(m*d / lanes) cycles for one convolution layer."""
    return (length - width + 1) * filters * ceil(width * depth / lanes)


def relu_overhead_cycles(length: int, width: int, filters: int,
                         lanes: int) -> int:
    return (length - width + 1) * ceil(filters / lanes)


def _conv_depths(net: NetworkConfig):
    depth = net.n_channels
    for filters, width in net.conv_layers:
        yield depth, filters, width
        depth = filters


def state_cycle_cost(state: int, net: NetworkConfig, mc: MachineConfig) -> int:
    """Cycle cost of one visit to `state` (state 8: the final-window visit)."""
    if state == 1:
        if not net.use_cnn:
            return 0
        total = 0
        for depth, filters, width in _conv_depths(net):
            total += conv_layer_cycles(net.window_len, width, filters,
                                       mc.mac_lanes, depth)
            total += relu_overhead_cycles(net.window_len, width, filters,
                                          mc.mac_lanes)
        return total
    if state == 2:
        if not net.use_cnn:
            return 0
        return ceil(net.fc_input_len * net.input_len / mc.mac_lanes)
    if state == 3:
        return (net.n_hidden + net.input_len) * ceil(net.n_hidden
                                                     / mc.lanes_per_gate)
    if state in (4, 5, 6, 7):
        return net.n_hidden
    if state == 8:
        return net.n_hidden * net.n_classes
    raise ValueError(f"no state {state}")


def load_banks(qnet: QuantizedNetwork, mc: MachineConfig) -> MemoryBanks:
    bits = qnet.weight_bits()
    if bits > mc.wb_capacity_bits:
        raise BankCapacityError(f"weights need {bits} bits, "
                                f"WB capacity is {mc.wb_capacity_bits}")
    return MemoryBanks(qnet, mc)


def run_inference(windows_raw, banks: MemoryBanks, net: NetworkConfig,
                  mc: MachineConfig, trace_path=None):
    """Execute Algorithm-style state iteration over q windows.

    `windows_raw` is (n_steps, input_len) raw activation codes (int). Returns
    (predicted class, CycleReport); prediction is the argmax of the final
    state-8 logits, ties resolved to the lowest index.
    """
    fmt = mc.activation_format
    qnet = banks.qnet
    windows_raw = np.asarray(windows_raw, dtype=np.int64)
    if windows_raw.shape != (net.n_steps, net.input_len):
        raise ValueError(f"expected {(net.n_steps, net.input_len)} raw windows, "
                         f"got {windows_raw.shape}")

    sigmoid_lut = fxp.build_lut("sigmoid", mc.lut_size)
    tanh_lut = fxp.build_lut("tanh", mc.lut_size)
    sig_entries = fxp.lut_entries_in(sigmoid_lut, fmt)
    tanh_entries = fxp.lut_entries_in(tanh_lut, fmt)

    cycles = np.zeros(8, dtype=np.int64)
    state_trace: list[int] = []
    trace_rows: list[str] = []
    macs = 0
    worst_window = 0
    cycle_now = 0

    def book(state, n_cycles, unit, op):
        nonlocal cycle_now
        cycles[state - 1] += n_cycles
        cycle_now += n_cycles
        state_trace.append(state)
        if trace_path is not None:
            trace_rows.append(f"{cycle_now},{state},{unit},{op}")

    h = np.zeros(net.n_hidden, dtype=np.int64)
    c = np.zeros(net.n_hidden, dtype=np.int64)
    logits = np.zeros(net.n_classes, dtype=np.int64)

    for step in range(net.n_steps):
        window_start = cycle_now
        x = windows_raw[step]
        banks.im_write("window", x)

        if net.use_cnn:
            # State 1, visited once per CNN layer
            maps = x.reshape(net.n_channels, net.window_len)
            for li, (depth, filters, width) in enumerate(_conv_depths(net)):
                codes = qnet.conv_codes[li]
                banks.wb_read(codes.size, 2)
                left, right = _pad_window(width)
                xpad = np.pad(maps, ((0, 0), (left, right)))
                acc = np.zeros((filters, net.window_len), dtype=np.int64)
                for a in range(width):
                    acc += codes[:, :, a] @ xpad[:, a:a + net.window_len]
                maps = np.clip(np.maximum(acc, 0), 0, fmt.raw_max)
                banks.im_write(f"maps{li}", maps)
                macs += filters * width * net.window_len * depth
                n_cyc = conv_layer_cycles(net.window_len, width, filters,
                                          mc.mac_lanes, depth) \
                    + relu_overhead_cycles(net.window_len, width, filters,
                                           mc.mac_lanes)
                book(1, n_cyc, "MACs+NFs", f"conv{li}")

            # State 2: FC product and residual add
            banks.wb_read(qnet.fc_raw.size, qnet.weight_format.total_bits)
            flat = banks.im_read(f"maps{len(net.conv_layers) - 1}").ravel()
            p = fxp.dot_fixed(flat, qnet.fc_raw.T, fmt=fmt)
            v = fxp.sat_add(banks.im_read("window"), p, fmt) if net.residual else p
            banks.im_write("residual", v)
            macs += qnet.fc_raw.size
            book(2, state_cycle_cost(2, net, mc), "MACs", "fc+residual")
        else:
            v = x

        # State 3: the four gate products share the MAC array
        xx = np.concatenate([h, v])
        pre = {}
        for name, codes in qnet.gate_codes.items():
            banks.wb_read(codes.size, 2)
            pre[name] = fxp.dot_ternary(xx, codes, fmt=fmt)
            macs += codes.size
        book(3, state_cycle_cost(3, net, mc), "MACs", "gates")

        # State 4: LUT nonlinearities on the gate pre-activations
        g_forget = sig_entries[fxp.lut_index_raw(pre["forget"], sigmoid_lut, fmt)]
        g_input = sig_entries[fxp.lut_index_raw(pre["input"], sigmoid_lut, fmt)]
        g_output = sig_entries[fxp.lut_index_raw(pre["output"], sigmoid_lut, fmt)]
        g_cell = tanh_entries[fxp.lut_index_raw(pre["cell"], tanh_lut, fmt)]
        for name, vals in (("g_forget", g_forget), ("g_input", g_input),
                           ("g_output", g_output), ("g_cell", g_cell)):
            banks.im_write(name, vals)
        book(4, state_cycle_cost(4, net, mc), "NFs", "sigmoid+tanh")

        # State 5: cell update with the two embedded multipliers
        c = fxp.mul_add_fixed(banks.im_read("g_forget"), c,
                              banks.im_read("g_cell"),
                              banks.im_read("g_input"), fmt)
        banks.im_write("cell", c)
        book(5, state_cycle_cost(5, net, mc), "MACs", "cell-update")

        # State 6: tanh of the new cell state
        tanh_c = tanh_entries[fxp.lut_index_raw(c, tanh_lut, fmt)]
        banks.im_write("tanh_cell", tanh_c)
        book(6, state_cycle_cost(6, net, mc), "NFs", "tanh")

        # State 7: output-gate product forms the hidden state
        h = fxp.mul_fixed(banks.im_read("g_output"),
                          banks.im_read("tanh_cell"), fmt)
        banks.im_write("hidden", h)
        book(7, state_cycle_cost(7, net, mc), "MACs", "hidden")

        # State 8: classify on the final window, otherwise loop to state 1
        final = step == net.n_steps - 1
        if final:
            banks.wb_read(qnet.logits_raw.size, qnet.weight_format.total_bits)
            logits = fxp.dot_fixed(h, qnet.logits_raw, fmt=fmt)
            banks.im_write("logits", logits)
            macs += qnet.logits_raw.size
            book(8, state_cycle_cost(8, net, mc), "MACs", "classify")
        else:
            book(8, 0, "MC", "loop")
        worst_window = max(worst_window, cycle_now - window_start)

    total = int(cycles.sum())
    report = CycleReport(
        cycles_per_state=cycles,
        total_cycles=total,
        latency_seconds=total / mc.clock_hz,
        worst_window_cycles=worst_window,
        worst_window_latency_seconds=worst_window / mc.clock_hz,
        executed_macs=macs,
        paper_macs=(net.input_len + net.n_hidden) * net.n_hidden,
        wb_bits_read=banks.wb_bits_read,
        im_bits_transferred=banks.im_bits,
        max_wb_beat_bits=banks.max_wb_beat,
        max_im_beat_bits=banks.max_im_beat,
        state_trace=state_trace,
    )
    if trace_path is not None:
        Path(trace_path).write_text("cycle,state,unit,op\n"
                                    + "\n".join(trace_rows) + "\n")
    return int(np.argmax(logits)), report


def latency_report(report: CycleReport, budget_seconds: float) -> LatencyVerdict:
    """Compare the worst per-window latency against the real-time budget."""
    lat = report.worst_window_latency_seconds
    if budget_seconds <= 0 or lat <= 0:
        return LatencyVerdict(lat, budget_seconds, False, 0.0)
    margin = budget_seconds / lat
    return LatencyVerdict(lat, budget_seconds, lat < budget_seconds, margin)
