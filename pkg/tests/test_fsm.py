import re

import numpy as np
import pytest

from qcnnlstm import estimate, fxp, quant
from qcnnlstm.fsm import (BankCapacityError, MachineConfig, conv_layer_cycles,
                          latency_report, load_banks, relu_overhead_cycles,
                          run_inference, state_cycle_cost)
from qcnnlstm.model import NetworkConfig, network_forward_fixed
from qcnnlstm.train import init_params

MC = MachineConfig()


def random_net(rng, use_cnn=None):
    if use_cnn is None:
        use_cnn = bool(rng.integers(0, 2))
    cfg = NetworkConfig(
        window_len=int(rng.integers(3, 9)),
        n_steps=int(rng.integers(1, 4)),
        n_hidden=int(rng.integers(2, 14)),
        n_classes=int(rng.integers(2, 6)),
        n_channels=int(rng.integers(1, 3)) if use_cnn else 1,
        conv_layers=tuple((int(rng.integers(1, 4)), int(rng.integers(1, 4)))
                          for _ in range(int(rng.integers(1, 3)))),
        use_cnn=use_cnn)
    params = init_params(cfg, seed=int(rng.integers(0, 2**31)), init_scale=1.2)
    qnet = quant.QuantizedNetwork.from_params(params, "ternary")
    windows = rng.uniform(-2, 2, (cfg.n_steps, cfg.input_len))
    return cfg, qnet, fxp.to_raw(windows)


class TestCycleFormulas:
    def test_conv_layer_example(self):
        # (50-5+1) * 10 * ceil(5/32) = 460
        assert conv_layer_cycles(50, 5, 10, 32) == 460

    def test_relu_overhead(self):
        assert relu_overhead_cycles(50, 5, 10, 32) == 46

    def test_state3_dba(self):
        net = NetworkConfig(5, 30, 250, 8, n_channels=128, use_cnn=False)
        assert state_cycle_cost(3, net, MC) == (250 + 640) * 32

    def test_state4_is_hidden_count(self):
        net = NetworkConfig(5, 30, 250, 8, n_channels=128, use_cnn=False)
        for state in (4, 5, 6, 7):
            assert state_cycle_cost(state, net, MC) == 250

    def test_state8_output_layer(self):
        net = NetworkConfig(5, 30, 250, 8, n_channels=128, use_cnn=False)
        assert state_cycle_cost(8, net, MC) == 2000

    def test_state2_fc_lanes(self):
        net = NetworkConfig(20, 4, 250, 2, conv_layers=((10, 5), (30, 3)))
        assert state_cycle_cost(2, net, MC) == -(-30 * 20 * 20 // 32)

    def test_cnn_states_zero_without_cnn(self):
        net = NetworkConfig(5, 2, 8, 2, use_cnn=False)
        assert state_cycle_cost(1, net, MC) == 0
        assert state_cycle_cost(2, net, MC) == 0

    def test_unknown_state_rejected(self):
        net = NetworkConfig(5, 2, 8, 2, use_cnn=False)
        with pytest.raises(ValueError):
            state_cycle_cost(9, net, MC)


class TestGoldenEquivalence:
    def test_bit_exact_against_model_forward(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            cfg, qnet, raw = random_net(rng)
            golden = network_forward_fixed(raw, qnet, cfg,
                                           MC.activation_format)
            banks = load_banks(qnet, MC)
            pred, _ = run_inference(raw, banks, cfg, MC)
            assert np.array_equal(banks.im["logits"], golden[-1])
            assert pred == int(np.argmax(golden[-1]))

    def test_all_zero_weights_tie_breaks_low(self):
        cfg = NetworkConfig(4, 2, 3, 4, use_cnn=False)
        params = init_params(cfg, seed=0, init_scale=0.0)
        qnet = quant.QuantizedNetwork.from_params(params, "ternary")
        raw = fxp.to_raw(np.random.default_rng(1).uniform(-1, 1, (2, 4)))
        pred, _ = run_inference(raw, load_banks(qnet, MC), cfg, MC)
        assert pred == 0

    def test_serialized_model_round_trip_preserves_bits(self, tmp_path):
        # banks loaded from a packed on-disk model must reproduce the
        # in-memory golden logits exactly
        from qcnnlstm.model import load_network, save_network
        rng = np.random.default_rng(99)
        cfg, qnet, raw = random_net(rng, use_cnn=True)
        golden = network_forward_fixed(raw, qnet, cfg, MC.activation_format)

        params = init_params(cfg, seed=int(rng.integers(2**31)))
        # rebuild the exact same codes through the serialization path
        for name, codes in qnet.gate_codes.items():
            getattr(params.lstm, f"w_{name}")[:] = codes
        for layer, codes in zip(params.conv, qnet.conv_codes):
            layer.weights[:] = codes
        params.fc.weights[:] = fxp.from_raw(qnet.fc_raw, qnet.weight_format)
        params.lstm.w_logits[:] = fxp.from_raw(qnet.logits_raw,
                                               qnet.weight_format)
        for b in (params.lstm.b_forget, params.lstm.b_input,
                  params.lstm.b_output, params.lstm.b_cell,
                  params.lstm.b_logits):
            b[:] = 0.0
        for layer in params.conv:
            layer.bias[:] = 0.0
        save_network(tmp_path / "m", params, cfg, mode="ternary")
        loaded, cfg2, mode = load_network(tmp_path / "m")
        qnet2 = quant.QuantizedNetwork.from_params(loaded, mode,
                                                   MC.activation_format)
        banks = load_banks(qnet2, MC)
        run_inference(raw, banks, cfg2, MC)
        assert np.array_equal(banks.im["logits"], golden[-1])


class TestAccounting:
    def test_executed_macs_match_estimate(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            cfg, qnet, raw = random_net(rng)
            _, rep = run_inference(raw, load_banks(qnet, MC), cfg, MC)
            assert rep.executed_macs == estimate.mac_count(cfg, "sequence",
                                                           "true")

    def test_total_is_sum_of_states(self):
        rng = np.random.default_rng(8)
        cfg, qnet, raw = random_net(rng)
        _, rep = run_inference(raw, load_banks(qnet, MC), cfg, MC)
        assert rep.total_cycles == rep.cycles_per_state.sum()
        assert rep.latency_seconds == rep.total_cycles / MC.clock_hz

    def test_paper_macs_reported(self):
        net = NetworkConfig(5, 30, 250, 8, n_channels=128, use_cnn=False)
        params = init_params(net, seed=3, init_scale=1.0)
        qnet = quant.QuantizedNetwork.from_params(params, "ternary")
        raw = fxp.to_raw(np.random.default_rng(2).uniform(-1, 1, (30, 640)))
        _, rep = run_inference(raw, load_banks(qnet, MC), net, MC)
        assert rep.paper_macs == 222_500
        assert rep.executed_macs >= rep.paper_macs


class TestStateTrace:
    def test_cnn_trace_regular_expression(self):
        rng = np.random.default_rng(9)
        cfg, qnet, raw = random_net(rng, use_cnn=True)
        _, rep = run_inference(raw, load_banks(qnet, MC), cfg, MC)
        trace = "".join(str(s) for s in rep.state_trace)
        layer_ones = "1" * len(cfg.conv_layers)
        assert re.fullmatch(f"({layer_ones}2345678){{{cfg.n_steps}}}", trace)

    def test_lstm_only_trace(self):
        rng = np.random.default_rng(10)
        cfg, qnet, raw = random_net(rng, use_cnn=False)
        _, rep = run_inference(raw, load_banks(qnet, MC), cfg, MC)
        trace = "".join(str(s) for s in rep.state_trace)
        assert re.fullmatch(f"(345678){{{cfg.n_steps}}}", trace)


class TestBandwidth:
    def test_beats_within_caps(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            cfg, qnet, raw = random_net(rng)
            _, rep = run_inference(raw, load_banks(qnet, MC), cfg, MC)
            assert rep.max_wb_beat_bits <= MC.wb_read_bits_per_cycle
            assert rep.max_im_beat_bits <= MC.im_bits_per_cycle

    def test_capacity_guard(self):
        cfg = NetworkConfig(5, 2, 64, 2, use_cnn=False)
        params = init_params(cfg, seed=1, init_scale=1.0)
        qnet = quant.QuantizedNetwork.from_params(params, "ternary")
        small = MachineConfig(wb_capacity_bits=100)
        with pytest.raises(BankCapacityError):
            load_banks(qnet, small)


class TestMonotonicity:
    def _cycles(self, n_hidden, window_len):
        cfg = NetworkConfig(window_len, 2, n_hidden, 2,
                            conv_layers=((2, 2),), use_cnn=True)
        params = init_params(cfg, seed=5, init_scale=1.0)
        qnet = quant.QuantizedNetwork.from_params(params, "ternary")
        raw = fxp.to_raw(
            np.random.default_rng(3).uniform(-1, 1, (2, cfg.input_len)))
        _, rep = run_inference(raw, load_banks(qnet, MC), cfg, MC)
        return rep.total_cycles

    def test_hidden_growth_never_cheaper(self):
        cycles = [self._cycles(nh, 6) for nh in (2, 4, 8, 16, 32)]
        assert all(a <= b for a, b in zip(cycles, cycles[1:]))

    def test_window_growth_never_cheaper(self):
        cycles = [self._cycles(8, w) for w in (4, 6, 8, 12)]
        assert all(a <= b for a, b in zip(cycles, cycles[1:]))


class TestLatency:
    def _dba_report(self, clock_hz=1e8):
        net = NetworkConfig(5, 30, 250, 8, n_channels=128, use_cnn=False)
        params = init_params(net, seed=4, init_scale=1.0)
        qnet = quant.QuantizedNetwork.from_params(params, "ternary")
        mc = MachineConfig(clock_hz=clock_hz)
        raw = fxp.to_raw(np.random.default_rng(4).uniform(-1, 1, (30, 640)))
        _, rep = run_inference(raw, load_banks(qnet, mc), net, mc)
        return rep

    def test_dba_well_under_budget(self):
        verdict = latency_report(self._dba_report(), 10e-3)
        assert verdict.passed
        assert verdict.margin > 10.0

    def test_zero_budget_fails(self):
        verdict = latency_report(self._dba_report(), 0.0)
        assert not verdict.passed

    def test_doubling_clock_halves_latency(self):
        a = self._dba_report(1e8)
        b = self._dba_report(2e8)
        assert b.latency_seconds == a.latency_seconds / 2
        assert b.worst_window_latency_seconds == \
            a.worst_window_latency_seconds / 2


class TestInterfaces:
    def test_window_shape_mismatch(self):
        cfg = NetworkConfig(4, 2, 3, 2, use_cnn=False)
        params = init_params(cfg, seed=6, init_scale=1.0)
        qnet = quant.QuantizedNetwork.from_params(params, "ternary")
        with pytest.raises(ValueError):
            run_inference(np.zeros((3, 4), dtype=np.int64),
                          load_banks(qnet, MC), cfg, MC)

    def test_trace_file(self, tmp_path):
        rng = np.random.default_rng(12)
        cfg, qnet, raw = random_net(rng, use_cnn=True)
        path = tmp_path / "trace.csv"
        run_inference(raw, load_banks(qnet, MC), cfg, MC, trace_path=path)
        lines = path.read_text().splitlines()
        assert lines[0] == "cycle,state,unit,op"
        assert len(lines) > cfg.n_steps

    def test_report_csv_and_summary(self):
        rng = np.random.default_rng(13)
        cfg, qnet, raw = random_net(rng)
        _, rep = run_inference(raw, load_banks(qnet, MC), cfg, MC)
        assert "total_cycles" in rep.csv()
        assert "executed MACs" in rep.summary()
