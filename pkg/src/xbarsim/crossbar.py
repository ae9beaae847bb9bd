"""Crossbar array solves: ideal dot products and full resistive nodal analysis.

The non-ideal solve assembles the complete resistive network (row wire
segments, cross-point conductances, column wire segments, finite neuron
input resistances) and solves it by dense direct factorization. Zero-ohm
wire segments are handled structurally by node merging, so the degenerate
all-ideal case reduces exactly to the matrix-vector product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np


class ExcitationMode(Enum):
    VOLTAGE = "voltage"
    CURRENT = "current"


class SingularNetworkError(RuntimeError):
    """The assembled nodal system is singular."""

    def __init__(self, message: str, node: int | None = None):
        super().__init__(message)
        self.node = node


@dataclass
class ConductanceMatrix:
    """rows x cols memristor conductances (Siemens); the stored weights."""

    g: np.ndarray
    g_min: float = 1e-6
    g_max: float = 1e-3

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        if self.g.ndim != 2 or self.g.shape[0] < 1 or self.g.shape[1] < 1:
            raise ValueError(f"conductance matrix must be 2-D, got shape {self.g.shape}")
        if not (0.0 < self.g_min <= self.g_max):
            raise ValueError(f"need 0 < g_min <= g_max, got {self.g_min}, {self.g_max}")
        if np.any(self.g < self.g_min) or np.any(self.g > self.g_max):
            raise ValueError("conductance entries outside [g_min, g_max]")

    @property
    def n_rows(self) -> int:
        return self.g.shape[0]

    @property
    def n_cols(self) -> int:
        return self.g.shape[1]

    @classmethod
    def from_csv(cls, path: str | Path, g_min: float = 1e-6, g_max: float = 1e-3
                 ) -> "ConductanceMatrix":
        """Load a row-major CSV of conductances in Siemens (header optional)."""
        rows = []
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                cells = [c.strip() for c in line.split(",")]
                try:
                    rows.append([float(c) for c in cells])
                except ValueError:
                    if not rows:  # header line
                        continue
                    raise
        return cls(np.array(rows, dtype=float), g_min=g_min, g_max=g_max)

    def to_csv(self, path: str | Path) -> None:
        np.savetxt(path, self.g, delimiter=",")


@dataclass
class Excitation:
    """Per-row drive: voltages (volts) or source currents (amps)."""

    mode: ExcitationMode
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("excitation values must be a 1-D vector")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("excitation values must be finite")


def voltage_excitation(values) -> Excitation:
    return Excitation(ExcitationMode.VOLTAGE, np.asarray(values, dtype=float))


def current_excitation(values) -> Excitation:
    return Excitation(ExcitationMode.CURRENT, np.asarray(values, dtype=float))


@dataclass
class NonIdealSpec:
    """Wire and termination non-idealities of the array.

    r_wire_row / r_wire_col are the lumped per-segment resistances between
    adjacent cross-points (the feed segment from the driver / to the neuron
    terminal is included). r_neuron_in is the finite input resistance of each
    column's neuron; scalar values broadcast over columns.
    """

    r_wire_row: float = 0.0
    r_wire_col: float = 0.0
    r_neuron_in: np.ndarray | float = 0.0

    def neuron_resistances(self, n_cols: int) -> np.ndarray:
        r = np.asarray(self.r_neuron_in, dtype=float)
        if r.ndim == 0:
            r = np.full(n_cols, float(r))
        if r.shape != (n_cols,):
            raise ValueError(f"r_neuron_in must be scalar or length {n_cols}")
        if self.r_wire_row < 0 or self.r_wire_col < 0 or np.any(r < 0):
            raise ValueError("non-ideality resistances must be >= 0")
        return r

    def scaled(self, factor: float) -> "NonIdealSpec":
        r = np.asarray(self.r_neuron_in, dtype=float) * factor
        return NonIdealSpec(self.r_wire_row * factor, self.r_wire_col * factor, r)


@dataclass
class NodalSolution:
    """Result of a full resistive-network solve."""

    neuron_currents: np.ndarray
    p_source: float
    p_dissipated: float
    node_voltages: dict = field(default_factory=dict, repr=False)


def output_currents_ideal(G: ConductanceMatrix, x: Excitation) -> np.ndarray:
    """Column currents with ideal wires and ideal virtual-ground neurons.

    Voltage mode: I_j = sum_i G[i][j] * V_i (exact matrix-vector product).
    Current mode: each row's source current splits among its columns in
    proportion to the cross-point conductances.
    """
    if x.values.shape[0] != G.n_rows:
        raise ValueError(f"excitation length {x.values.shape[0]} != rows {G.n_rows}")
    if x.mode is ExcitationMode.VOLTAGE:
        return G.g.T @ x.values
    row_sums = G.g.sum(axis=1)
    v_rows = x.values / row_sums
    return G.g.T @ v_rows


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _solve_network(G: ConductanceMatrix, x: Excitation, spec: NonIdealSpec) -> NodalSolution:
    rows, cols = G.n_rows, G.n_cols
    r_neuron = spec.neuron_resistances(cols)

    # node numbering: ground, per-row driver nodes, row-side cross-point
    # nodes, column-side cross-point nodes, neuron terminal nodes
    n_nodes = 1 + rows + rows * cols + rows * cols + cols
    gnd = 0

    def src(i):
        return 1 + i

    def rnode(i, j):
        return 1 + rows + i * cols + j

    def cnode(i, j):
        return 1 + rows + rows * cols + i * cols + j

    def nnode(j):
        return 1 + rows + 2 * rows * cols + j

    branches: list[tuple[int, int, float]] = []  # (node_a, node_b, conductance)
    uf = _UnionFind(n_nodes)

    def add_resistor(a: int, b: int, r: float) -> None:
        if r == 0.0:
            uf.union(a, b)
        else:
            branches.append((a, b, 1.0 / r))

    # row wires: driver -> first cross-point, then between adjacent cross-points
    for i in range(rows):
        add_resistor(src(i), rnode(i, 0), spec.r_wire_row)
        for j in range(1, cols):
            add_resistor(rnode(i, j - 1), rnode(i, j), spec.r_wire_row)
    # cross-point cells
    for i in range(rows):
        for j in range(cols):
            branches.append((rnode(i, j), cnode(i, j), G.g[i, j]))
    # column wires: between adjacent cross-points, then last -> neuron terminal
    for j in range(cols):
        for i in range(1, rows):
            add_resistor(cnode(i - 1, j), cnode(i, j), spec.r_wire_col)
        add_resistor(cnode(rows - 1, j), nnode(j), spec.r_wire_col)

    # known-voltage nodes: ground; voltage-mode drivers; zero-resistance
    # neuron terminals (ideal virtual ground)
    known: dict[int, float] = {uf.find(gnd): 0.0}
    if x.mode is ExcitationMode.VOLTAGE:
        for i in range(rows):
            rep = uf.find(src(i))
            if rep in known and known[rep] != x.values[i]:
                raise SingularNetworkError(
                    f"row driver {i} shorted to a node at a different potential", node=src(i))
            known[rep] = x.values[i]
    for j in range(cols):
        if r_neuron[j] == 0.0:
            rep = uf.find(nnode(j))
            if rep in known and known[rep] != 0.0:
                raise SingularNetworkError(
                    f"neuron terminal {j} shorted to a driven node", node=nnode(j))
            known[rep] = 0.0
        else:
            branches.append((nnode(j), gnd, 1.0 / r_neuron[j]))

    # unknown supernodes
    reps = sorted({uf.find(n) for n in range(n_nodes)} - set(known))
    index = {rep: k for k, rep in enumerate(reps)}
    n_unknown = len(reps)
    A = np.zeros((n_unknown, n_unknown))
    b = np.zeros(n_unknown)
    # current-mode injections
    if x.mode is ExcitationMode.CURRENT:
        for i in range(rows):
            rep = uf.find(src(i))
            if rep in known:
                raise SingularNetworkError(
                    f"current-driven row {i} merged into a fixed-potential node", node=src(i))
            b[index[rep]] += x.values[i]

    for a, c, g in branches:
        ra, rc = uf.find(a), uf.find(c)
        if ra == rc:
            continue
        ka, kc = index.get(ra), index.get(rc)
        if ka is not None:
            A[ka, ka] += g
        if kc is not None:
            A[kc, kc] += g
        if ka is not None and kc is not None:
            A[ka, kc] -= g
            A[kc, ka] -= g
        if ka is not None and rc in known:
            b[ka] += g * known[rc]
        if kc is not None and ra in known:
            b[kc] += g * known[ra]

    if n_unknown:
        bad = np.where(np.diag(A) == 0.0)[0]
        if bad.size:
            raise SingularNetworkError(
                f"floating node (supernode {reps[bad[0]]}) has no conductance to the rest "
                "of the network", node=reps[bad[0]])
        try:
            v_unknown = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as e:
            raise SingularNetworkError(f"nodal system is singular: {e}") from e
    else:
        v_unknown = np.zeros(0)

    def volt(n: int) -> float:
        rep = uf.find(n)
        return known[rep] if rep in known else v_unknown[index[rep]]

    # neuron currents: through the termination resistor, or the sum of branch
    # currents entering the ideally-grounded terminal supernode
    currents = np.zeros(cols)
    for j in range(cols):
        if r_neuron[j] > 0.0:
            currents[j] = volt(nnode(j)) / r_neuron[j]
        else:
            rep = uf.find(nnode(j))
            total = 0.0
            for a, c, g in branches:
                ra, rc = uf.find(a), uf.find(c)
                if ra == rep and rc != rep:
                    total += g * (volt(c) - 0.0)
                elif rc == rep and ra != rep:
                    total += g * (volt(a) - 0.0)
            currents[j] = total

    # power bookkeeping (Tellegen): source power vs sum over resistive branches
    p_diss = 0.0
    source_flow = np.zeros(rows)
    for a, c, g in branches:
        if uf.find(a) == uf.find(c):
            continue
        dv = volt(a) - volt(c)
        p_diss += g * dv * dv
        for i in range(rows):
            rep_s = uf.find(src(i))
            if uf.find(a) == rep_s:
                source_flow[i] += g * dv
            elif uf.find(c) == rep_s:
                source_flow[i] -= g * dv
    if x.mode is ExcitationMode.VOLTAGE:
        p_src = float(np.dot(x.values, source_flow))
    else:
        p_src = float(sum(x.values[i] * volt(src(i)) for i in range(rows)))

    voltages = {"drivers": np.array([volt(src(i)) for i in range(rows)]),
                "neurons": np.array([volt(nnode(j)) for j in range(cols)])}
    return NodalSolution(neuron_currents=currents, p_source=p_src,
                         p_dissipated=p_diss, node_voltages=voltages)


def output_currents_nonideal(G: ConductanceMatrix, x: Excitation,
                             spec: NonIdealSpec) -> NodalSolution:
    """Solve the full resistive network and return the per-neuron currents.

    With an all-zero spec this reproduces the ideal dot product exactly
    (nodes merge structurally; no ill-conditioned tiny resistors).
    """
    if x.values.shape[0] != G.n_rows:
        raise ValueError(f"excitation length {x.values.shape[0]} != rows {G.n_rows}")
    return _solve_network(G, x, spec)


def dot_product_error(G: ConductanceMatrix, x: Excitation,
                      spec: NonIdealSpec) -> np.ndarray:
    """Per-column relative deviation of the non-ideal currents from ideal."""
    ideal = output_currents_ideal(G, x)
    actual = output_currents_nonideal(G, x, spec).neuron_currents
    err = np.zeros_like(ideal)
    nz = ideal != 0.0
    err[nz] = np.abs(actual[nz] - ideal[nz]) / np.abs(ideal[nz])
    err[~nz] = np.abs(actual[~nz])
    return err
