"""Slow the reference walk down and watch the entropic cost approach an
optimal transport cost.

Graph case: value / log k tends to the graph-distance Monge-Kantorovich cost.
Grid case: value / k tends to W_2^2 / 2 and the entropic midpoint collapses
onto the displacement midpoint.

Run from the repository root:  python demos/slowing_down.py
"""

from pathlib import Path

import numpy as np

from schrodinger_lab import (
    entropic_midpoint_vs_displacement,
    gamma_sweep_gaussian,
    gamma_sweep_graph,
)
from schrodinger_lab.io import read_graph, read_marginal
from schrodinger_lab.oracles import w2_squared_half_1d

DATA = Path(__file__).parent / "data"


def graph_case():
    chain = read_graph(DATA / "path4.graph")
    mu0 = read_marginal(DATA / "left.csv", chain.n)
    mu1 = read_marginal(DATA / "right.csv", chain.n)
    rep = gamma_sweep_graph(chain, mu0, mu1, [10, 1e2, 1e3, 1e4, 1e5, 1e6])
    print("path graph 0-1-2-3, mass moves from {0,1} to {2,3}")
    print(f"Monge-Kantorovich cost (graph distance): {rep.mk_value:.6f}")
    for k, v, g in zip(rep.k_values, rep.normalized_values, rep.cost_gaps):
        print(f"  k={k:<9.0e} value/log k = {v:.6f}   cost gap {g:.2e}")


def grid_case():
    x = np.linspace(0, 1, 21)
    bump = lambda c: np.exp(-0.5 * ((x - c) / 0.1) ** 2)
    mu0, mu1 = bump(0.25) / bump(0.25).sum(), bump(0.75) / bump(0.75).sum()
    rep = gamma_sweep_gaussian(x, np.ones_like(x), mu0, mu1, [10, 1e2, 1e3, 1e4])
    tv = entropic_midpoint_vs_displacement(rep, x)
    print("\n21-point grid, discretised Gaussians centred at 0.25 and 0.75")
    print(f"W2^2/2 (monotone coupling): {w2_squared_half_1d(x, mu0, mu1):.6f}")
    for k, v, d in zip(rep.k_values, rep.normalized_values, tv):
        print(f"  k={k:<9.0e} value/k = {v:.6f}   TV(entropic midpoint, displacement midpoint) = {d:.2e}")


if __name__ == "__main__":
    graph_case()
    grid_case()
