"""Experiment orchestration: dispatch a parsed configuration to the owning
module and wrap the result in a replayable report record.
"""

from __future__ import annotations

from enum import Enum
from pathlib import Path

import numpy as np

from .config import ConfigError, SimConfig
from .crossbar import ConductanceMatrix
from .montecarlo import run_mc
from .network import (Activation, CircuitContext, Fidelity, LayerSpec,
                      crossbar_energy_ideal, digital_baseline, energy_estimate,
                      infer, map_weights)
from .neuron import small_signal, solve_dc
from .reports import ReportRecord, config_digest
from .sar import sar_normalized_converge


class ExperimentKind(Enum):
    OP = "op"
    SMALL_SIGNAL = "smallsignal"
    SAR = "sar"
    MC = "mc"
    INFER = "infer"
    ENERGY = "energy"


def _load_layers(cfg: SimConfig) -> list[LayerSpec]:
    net = cfg["network"]
    if net["layers"] is None:
        raise ConfigError("network.layers: required for this experiment kind")
    layers = []
    for entry in net["layers"]:
        if entry["values"] is not None:
            w = np.array(entry["values"], dtype=float)
        else:
            w = np.loadtxt(Path(cfg.base_dir) / entry["csv"], delimiter=",", ndmin=2)
        layers.append(LayerSpec(w, Activation(entry["activation"])))
    return layers


def _crossbar(cfg: SimConfig) -> ConductanceMatrix:
    c = cfg["crossbar"]
    if c["values"] is not None:
        g = np.array(c["values"], dtype=float)
    elif c["csv"] is not None:
        return ConductanceMatrix.from_csv(Path(cfg.base_dir) / c["csv"],
                                          g_min=c["g_min"], g_max=c["g_max"])
    else:
        raise ConfigError("crossbar.values: required (or crossbar.csv) for this kind")
    return ConductanceMatrix(g, g_min=c["g_min"], g_max=c["g_max"])


def run_experiment(cfg: SimConfig, kind: ExperimentKind,
                   seed: int | None = None,
                   runs: int | None = None) -> ReportRecord:
    """Run one experiment; the record embeds the seed and config digest so
    every run is replayable."""
    digest = config_digest(cfg.data)
    seed = seed if seed is not None else cfg["mc"]["seed"]
    p = cfg.neuron_params()

    if kind is ExperimentKind.OP:
        op = solve_dc(p, 0.0, 0)
        return ReportRecord("op", digest, seed, op.as_dict())

    if kind is ExperimentKind.SMALL_SIGNAL:
        op = solve_dc(p, 0.0, 0)
        ss = small_signal(p, op)
        payload = op.as_dict()
        payload.update({"a": ss.a, "zin": ss.zin, "rout": ss.rout,
                        "gm_tuned": ss.gm_tuned})
        return ReportRecord("smallsignal", digest, seed, payload)

    if kind is ExperimentKind.SAR:
        pts = cfg["sar"]["grid_points"]
        n = cfg["sar"]["grid_n"]
        grid = np.linspace(-1.0, 1.0, pts)
        errs = np.array([abs(sar_normalized_converge(float(x), n)[0] - x) for x in grid])
        payload = {"grid_points": pts, "n": n,
                   "max_abs_error": float(np.max(errs)),
                   "bound": 0.5 ** n,
                   "bound_holds": bool(np.all(errs <= 0.5 ** n))}
        return ReportRecord("sar", digest, seed, payload)

    if kind is ExperimentKind.MC:
        n_runs = runs if runs is not None else cfg["mc"]["runs"]
        if n_runs < 2:
            raise ConfigError(f"mc.runs: n_runs must be >= 2, got {n_runs}")
        res = run_mc(p, cfg.mismatch_spec(), n_runs, seed,
                     calibrate=cfg["mc"]["calibration"],
                     vref=cfg["sar"]["vref_in"], nbits=cfg["sar"]["nbits"])
        rec = ReportRecord("mc", digest, seed, res.as_dict())
        rows = [[i, float(res.v_in_pre[i]), float(res.v_in_post[i]), int(res.codes[i])]
                for i in range(len(res.v_in_pre))]
        rec.tables["samples"] = (["run_index", "v_in_pre", "v_in_post", "code"], rows)
        return rec

    if kind is ExperimentKind.INFER:
        layers = _load_layers(cfg)
        net = cfg["network"]
        fidelity = Fidelity(net["fidelity"])
        rng = np.random.default_rng(seed)
        if net["inputs_csv"] is not None:
            inputs = np.loadtxt(Path(cfg.base_dir) / net["inputs_csv"],
                                delimiter=",", ndmin=2)
        else:
            inputs = rng.uniform(-1.0, 1.0, size=(net["n_inputs"],
                                                  layers[0].weights.shape[1]))
        mapped = [map_weights(l.weights, net["bits"], net["g_min"], net["g_max"],
                              activation=l.activation) for l in layers]
        ctx = CircuitContext(neuron=p, v_read=net["v_read"],
                             mismatch=cfg.mismatch_spec()
                             if fidelity is Fidelity.CIRCUIT_NONIDEAL else None,
                             mismatch_seed=seed, vref_in=cfg["sar"]["vref_in"])
        agree = 0
        total = 0
        out_bits = []
        for x in inputs:
            ref = infer(layers, x, Fidelity.IDEAL_MATH)
            if fidelity is Fidelity.IDEAL_MATH:
                got = ref
            else:
                got = infer(mapped, x, fidelity, ctx)
            agree += int(np.sum(got.bits[-1] == ref.bits[-1]))
            total += len(ref.bits[-1])
            out_bits.append([int(b) for b in got.bits[-1]])
        payload = {"fidelity": fidelity.value, "n_inputs": len(inputs),
                   "bit_agreement_with_ideal": agree / total,
                   "output_bits": out_bits}
        return ReportRecord("infer", digest, seed, payload)

    if kind is ExperimentKind.ENERGY:
        G = _crossbar(cfg)
        e = cfg["energy"]
        v = np.full(G.n_rows, cfg["network"]["v_read"])
        p_xbar = crossbar_energy_ideal(G, v, 1.0)  # power = energy at t=1 s
        n_neurons = G.n_cols
        n_mac = G.n_rows * G.n_cols
        baseline = digital_baseline(n_mac, e["e_mac"], n_neurons, e["e_act"])
        rep = energy_estimate(
            n_neurons=n_neurons, t_eval=e["t_eval"], p_crossbar=p_xbar,
            p_neuron=e["p_neuron"], sar_nodes=2 * n_neurons,
            sar_nbits=cfg["sar"]["nbits"], t_sar_step=e["t_sar_step"],
            p_sar=e["p_sar"], amortize_over=e["amortize_over"], baseline=baseline)
        payload = rep.as_dict()
        payload["baseline_provenance"] = {
            "e_mac_j": {"value": e["e_mac"],
                        "provenance": cfg.provenance.get("energy.e_mac", "default")},
            "e_act_j": {"value": e["e_act"],
                        "provenance": cfg.provenance.get("energy.e_act", "default")},
            "assumption_dependent": True,
        }
        return ReportRecord("energy", digest, seed, payload)

    raise ConfigError(f"unknown experiment kind {kind!r}")
