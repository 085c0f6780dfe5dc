"""Quantized CNN-LSTM time-series classification with a bit-accurate,
cycle-counting simulator of a shared-bus fixed-point accelerator.

Submodules:

* ``fxp`` saturating fixed-point arithmetic and LUT nonlinearities
* ``datagen`` chaotic/sinusoidal synthetic datasets and windowing
* ``analysis`` Fourier-domain distances and stochastic 2-D embedding
* ``model`` float and fixed-point forward passes
* ``quant`` binary/ternary quantizers, STE, 2-bit packing
* ``train`` BPTT trainer with Adagrad and gradient clipping
* ``fsm`` eight-state cycle-accurate accelerator simulator
* ``estimate`` analytic memory/MAC/latency estimators
* ``ingest`` UCR loading, Hilbert envelope, normalization, splits
* ``cli`` command-line entry point
"""

__version__ = "0.1.0"
