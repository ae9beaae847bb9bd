"""Feed-forward networks on crossbar tiles: weight-to-conductance mapping,
tiered-fidelity inference, and energy accounting against a parameterized
digital baseline.

Signed weights use the standard differential-column idiom: two physical
columns per logical output, positive magnitudes on one side, negative on
the other, unused side parked at g_min; the neuron subtracts the pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .crossbar import (ConductanceMatrix, NonIdealSpec, output_currents_ideal,
                       output_currents_nonideal, voltage_excitation)
from .montecarlo import MismatchSpec, run_rng, sample_params
from .neuron import RgcParams, SolverError, solve_dc, transfer_curve
from .sar import Direction, sar_calibrate


class Activation(Enum):
    LINEAR = "linear"
    THRESHOLD = "threshold"


class Fidelity(Enum):
    IDEAL_MATH = "ideal_math"
    CIRCUIT_IDEAL = "circuit_ideal"
    CIRCUIT_NONIDEAL = "circuit_nonideal"


@dataclass
class LayerSpec:
    """weights has shape (n_out, n_in)."""

    weights: np.ndarray
    activation: Activation = Activation.THRESHOLD

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 2:
            raise ValueError("layer weights must be 2-D")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("layer weights must be finite")


@dataclass
class MappedLayer:
    """Differential conductance pair realizing one layer's weights."""

    g_plus: ConductanceMatrix     # shape (n_in, n_out)
    g_minus: ConductanceMatrix
    bits: int
    scale: float                  # Siemens per unit weight
    w_ref: float
    activation: Activation = Activation.THRESHOLD

    @property
    def n_in(self) -> int:
        return self.g_plus.n_rows

    @property
    def n_out(self) -> int:
        return self.g_plus.n_cols


def map_weights(w: np.ndarray, bits: int, g_min: float, g_max: float,
                w_ref: float | None = None,
                activation: Activation = Activation.THRESHOLD) -> MappedLayer:
    """Quantize signed weights onto a differential conductance pair.

    Magnitudes are uniformly quantized to 2^bits levels across
    [g_min, g_max], round-to-nearest with ties away from zero. An all-zero
    matrix is allowed (both sides parked at g_min).
    """
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    w = np.asarray(w, dtype=float)
    if w_ref is None:
        w_ref = float(np.max(np.abs(w)))
    if w_ref == 0.0:
        w_ref = 1.0  # arbitrary: all weights are zero anyway
    levels = (1 << bits) - 1
    q = np.abs(w) / w_ref * levels
    k = np.floor(q + 0.5)  # ties away from zero (magnitudes are >= 0)
    k = np.minimum(k, levels)
    step = (g_max - g_min) / levels
    g_mag = g_min + k * step
    g_plus = np.where(w > 0.0, g_mag, g_min)
    g_minus = np.where(w < 0.0, g_mag, g_min)
    scale = (g_max - g_min) / w_ref
    # crossbar orientation: rows = inputs, columns = outputs
    return MappedLayer(
        g_plus=ConductanceMatrix(g_plus.T, g_min=g_min, g_max=g_max),
        g_minus=ConductanceMatrix(g_minus.T, g_min=g_min, g_max=g_max),
        bits=bits, scale=scale, w_ref=w_ref, activation=activation,
    )


def dequantize(m: MappedLayer) -> np.ndarray:
    """Recover the quantized weights: (g_plus - g_minus) / scale, transposed
    back to (n_out, n_in)."""
    return ((m.g_plus.g - m.g_minus.g) / m.scale).T


@dataclass
class InferenceResult:
    fidelity: Fidelity
    outputs: np.ndarray               # final-layer analog outputs (pre-activation units)
    bits: list                        # per-layer digital comparator bits
    pre_activations: list             # per-layer pre-activation vectors
    crossbar_power: float = 0.0       # total dissipated crossbar power during eval (W)
    failures: list = field(default_factory=list)


def _ideal_math(layers: list[LayerSpec], x: np.ndarray) -> InferenceResult:
    pres, bits = [], []
    v = np.asarray(x, dtype=float)
    for layer in layers:
        pre = layer.weights @ v
        b = pre >= 0.0
        pres.append(pre)
        bits.append(b)
        v = b.astype(float) if layer.activation is Activation.THRESHOLD else pre
    return InferenceResult(Fidelity.IDEAL_MATH, outputs=pres[-1], bits=bits,
                           pre_activations=pres)


@dataclass
class CircuitContext:
    """Shared circuit-level settings for crossbar-backed inference."""

    neuron: RgcParams
    v_read: float = 0.1           # volts per unit input
    i_fit_span: float = 2e-6      # transfer-curve fit span around quiescent
    nonideal: NonIdealSpec | None = None
    mismatch: MismatchSpec | None = None
    mismatch_seed: int = 0
    vref_in: float = 0.65
    calibrate: bool = True


def _neuron_gain(p: RgcParams, code: int, span: float) -> tuple[float, float]:
    """Linear-fit transimpedance slope and quiescent output of one neuron."""
    sweep = np.linspace(-span, span, 11)
    tc = transfer_curve(p, code, sweep)
    vq = solve_dc(p, 0.0, code).v_out
    return tc.slope, vq


def _circuit(layers: list[MappedLayer], x: np.ndarray, ctx: CircuitContext,
             nonideal: bool) -> InferenceResult:
    pres, bits = [], []
    failures = []
    p_crossbar = 0.0
    v = np.asarray(x, dtype=float)
    # one reference gain fit per run (per-neuron re-fit happens for mismatch)
    slope_ref, vq_ref = _neuron_gain(ctx.neuron, 0, ctx.i_fit_span)
    for li, layer in enumerate(layers):
        exc = voltage_excitation(v * ctx.v_read)
        if nonideal and ctx.nonideal is not None:
            sol_p = output_currents_nonideal(layer.g_plus, exc, ctx.nonideal)
            sol_m = output_currents_nonideal(layer.g_minus, exc, ctx.nonideal)
            i_plus, i_minus = sol_p.neuron_currents, sol_m.neuron_currents
            p_crossbar += sol_p.p_dissipated + sol_m.p_dissipated
        else:
            i_plus = output_currents_ideal(layer.g_plus, exc)
            i_minus = output_currents_ideal(layer.g_minus, exc)
            vin = v * ctx.v_read
            p_crossbar += float(vin * vin @ (layer.g_plus.g.sum(axis=1)
                                             + layer.g_minus.g.sum(axis=1)))
        i_diff = i_plus - i_minus
        pre = i_diff / (layer.scale * ctx.v_read)

        if nonideal and ctx.mismatch is not None:
            # per-neuron mismatched instance, SAR-calibrated, re-solved per input
            v_out = np.zeros(layer.n_out)
            vq = np.zeros(layer.n_out)
            for j in range(layer.n_out):
                rng = run_rng(ctx.mismatch_seed, li * 4096 + j)
                pj = sample_params(ctx.neuron, ctx.mismatch, rng)
                code = 0
                if ctx.calibrate:
                    try:
                        code = sar_calibrate(lambda c: solve_dc(pj, 0.0, c).v_in,
                                             ctx.vref_in, pj.dac.nbits,
                                             Direction.INCREASING).code
                    except SolverError as e:
                        failures.append((li, j, str(e)))
                try:
                    slope_j, vq_j = _neuron_gain(pj, code, ctx.i_fit_span)
                    v_out[j] = solve_dc(pj, float(i_diff[j]), code).v_out
                    vq[j] = vq_j
                except SolverError as e:
                    failures.append((li, j, str(e)))
                    v_out[j] = vq_ref + slope_ref * i_diff[j]
                    vq[j] = vq_ref
            b = v_out >= vq
        else:
            v_out = vq_ref + slope_ref * i_diff
            b = v_out >= vq_ref
        pres.append(pre)
        bits.append(b)
        v = b.astype(float) if layer.activation is Activation.THRESHOLD else pre
    fid = Fidelity.CIRCUIT_NONIDEAL if nonideal else Fidelity.CIRCUIT_IDEAL
    return InferenceResult(fid, outputs=pres[-1], bits=bits, pre_activations=pres,
                           crossbar_power=p_crossbar, failures=failures)


def infer(layers, x, fidelity: Fidelity,
          ctx: CircuitContext | None = None) -> InferenceResult:
    """Run one input through the network at the requested fidelity tier.

    layers: list of LayerSpec (IdealMath) or MappedLayer (circuit tiers).
    """
    if fidelity is Fidelity.IDEAL_MATH:
        specs = [l if isinstance(l, LayerSpec)
                 else LayerSpec(dequantize(l), l.activation) for l in layers]
        return _ideal_math(specs, x)
    if ctx is None:
        raise ValueError("circuit fidelities need a CircuitContext")
    mapped = [l for l in layers]
    if any(isinstance(l, LayerSpec) for l in mapped):
        raise ValueError("circuit fidelities need MappedLayer inputs")
    return _circuit(mapped, x, ctx, nonideal=(fidelity is Fidelity.CIRCUIT_NONIDEAL))


@dataclass
class EnergyReport:
    """Per-component energy/latency record. e_total is the exact sum of the
    reported components."""

    e_crossbar: float
    e_neurons: float
    e_sar: float
    t_eval: float
    e_digital_baseline: float | None = None

    @property
    def e_total(self) -> float:
        return self.e_crossbar + self.e_neurons + self.e_sar

    @property
    def ratio(self) -> float | None:
        if self.e_digital_baseline is None:
            return None
        return math.inf if self.e_total == 0.0 else self.e_digital_baseline / self.e_total

    def as_dict(self) -> dict:
        return {
            "e_crossbar_j": self.e_crossbar,
            "e_neurons_j": self.e_neurons,
            "e_sar_j": self.e_sar,
            "e_total_j": self.e_total,
            "t_eval_s": self.t_eval,
            "baseline_j": self.e_digital_baseline,
            "ratio": self.ratio,
        }


def crossbar_energy_ideal(G: ConductanceMatrix, voltages, t_eval: float) -> float:
    """Sum_ij V_i^2 * G_ij * t for a voltage-mode run on ideal wires."""
    v = np.asarray(voltages, dtype=float)
    return float(v * v @ G.g.sum(axis=1)) * t_eval


def energy_estimate(n_neurons: int, t_eval: float,
                    p_crossbar: float = 0.0,
                    p_neuron: float = 43e-6,
                    sar_nodes: int = 0, sar_nbits: int = 0,
                    t_sar_step: float = 0.0, p_sar: float = 0.0,
                    amortize_over: int = 1,
                    baseline: float | None = None) -> EnergyReport:
    """Assemble the per-inference energy record.

    p_neuron defaults to the measured prototype's 43 uW at 1 V. p_crossbar
    is the total dissipated crossbar power during the evaluation (the
    Sum V^2 G form for ideal runs, the Tellegen-summed dissipation for
    nodal runs). The one-time SAR calibration energy is amortized over a
    configurable inference count.
    """
    if t_eval < 0:
        raise ValueError("t_eval must be >= 0")
    e_neurons = n_neurons * p_neuron * t_eval
    e_crossbar = p_crossbar * t_eval
    e_sar = sar_nodes * sar_nbits * t_sar_step * p_sar / max(amortize_over, 1)
    return EnergyReport(e_crossbar=e_crossbar, e_neurons=e_neurons, e_sar=e_sar,
                        t_eval=t_eval, e_digital_baseline=baseline)


def digital_baseline(n_mac: int, e_mac: float, n_activation: int,
                     e_act: float) -> float:
    """Parameterized digital ASIC energy: the comparand is a model, not a
    published figure."""
    if min(n_mac, n_activation) < 0 or e_mac < 0 or e_act < 0:
        raise ValueError("baseline inputs must be >= 0")
    return n_mac * e_mac + n_activation * e_act
