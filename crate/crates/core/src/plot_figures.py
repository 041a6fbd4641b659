#!/usr/bin/env python3
"""Plots the CSV files written by `irs-sca benchmark` in this directory."""
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

here = os.path.dirname(os.path.abspath(sys.argv[0]))


def load(name):
    return pd.read_csv(os.path.join(here, name), comment="#")


fig2 = load("fig2_convergence.csv")
fig, ax = plt.subplots()
for (alg, g), d in fig2.groupby(["algorithm", "gamma_db"]):
    ax.plot(d["iter"], d["power_dbm"], marker="o", label=f"{alg}, {g:g} dB")
ax.set_xlabel("iteration")
ax.set_ylabel("average transmit power (dBm)")
ax.legend()
fig.savefig(os.path.join(here, "fig2_convergence.png"), dpi=150)

fig3 = load("fig3_power_vs_ns.csv")
fig, ax = plt.subplots()
for (alg, g), d in fig3.groupby(["algorithm", "gamma_db"]):
    ax.plot(d["n_s"], d["mean_power_dbm"], marker="o", label=f"{alg}, {g:g} dB")
ax.set_xlabel("number of IRS elements")
ax.set_ylabel("average transmit power (dBm)")
ax.legend()
fig.savefig(os.path.join(here, "fig3_power_vs_ns.png"), dpi=150)

fig4 = load("fig4_runtime_vs_ns.csv")
fig, ax = plt.subplots()
for (alg, g), d in fig4.groupby(["algorithm", "gamma_db"]):
    ax.semilogy(d["n_s"], d["mean_time_s"], marker="o", label=f"{alg}, {g:g} dB")
ax.set_xlabel("number of IRS elements")
ax.set_ylabel("run time (s)")
ax.legend()
fig.savefig(os.path.join(here, "fig4_runtime_vs_ns.png"), dpi=150)
