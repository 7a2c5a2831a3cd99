"""Artifact writers: delimited tables, JSON scalars, run manifests, and
matplotlib figures rendered straight to files (Agg backend, no display).

All writers are deterministic: rows are emitted in the order given and
floats use repr-stable formatting, so reruns produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    if isinstance(x, (complex, np.complexfloating)):
        return f"{x.real:.12g}{x.imag:+.12g}j"
    return x


def write_csv(path, header: list, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_manifest(out_dir, command: str, config: dict, outputs: list,
                   figures: list, wall_time: float, seed=None) -> Path:
    from . import __version__
    doc = {"command": command, "config": config, "version": __version__,
           "wall_time_s": round(wall_time, 3),
           "outputs": [str(Path(o).name) for o in outputs],
           "figures": [str(Path(f).name) for f in figures],
           "seed": seed,
           "written_at": time.strftime("%Y-%m-%dT%H:%M:%S")}
    return write_json(Path(out_dir) / "manifest.json", doc)


# ---------------------------------------------------------------- figures

def fig_band_path(path, bs) -> Path:
    """Dispersion along the high-symmetry path, colored by phonon weight."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x = np.arange(len(bs.kpoints))
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for b in range(bs.energies.shape[1]):
        sc = ax.scatter(x, bs.energies[:, b], c=bs.phonon_weight[:, b],
                        s=4, cmap="coolwarm", vmin=0, vmax=1)
    cb = fig.colorbar(sc, ax=ax)
    cb.set_label("phonon weight")
    if bs.labels:
        ticks, names = zip(*bs.labels)
        ax.set_xticks(ticks)
        ax.set_xticklabels(names)
        for tk in ticks:
            ax.axvline(tk, color="0.8", lw=0.6, zorder=0)
    ax.set_ylabel(r"$\omega / K$")
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path


def fig_gapmap(path, Gs, delta_oms, gap23, G_c, G_min) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    pm = ax.pcolormesh(Gs, delta_oms, gap23.T, shading="nearest",
                       cmap="viridis")
    fig.colorbar(pm, ax=ax, label=r"$\epsilon / K$")
    ax.plot(G_c, delta_oms, "w--", lw=1.4, label=r"$G_c$")
    ax.plot(G_min, delta_oms, "w:", lw=1.4, label=r"$G_{\min}$")
    ax.set_xlim(Gs.min(), Gs.max())
    ax.set_xlabel(r"$G / K$")
    ax.set_ylabel(r"$\delta_{OM} / K$")
    ax.legend(loc="upper right", framealpha=0.6)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path


def fig_stripe(path, table, profiles, gap_window=None) -> Path:
    """Ribbon spectrum vs raw momentum with the edge branches marked."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4.4))
    ax.plot(np.repeat(table.k_x / np.pi, table.energies.shape[1]),
            table.energies.ravel(), ".", ms=1.0, color="0.6")
    for side, color in (("upper", "tab:red"), ("lower", "tab:blue")):
        pts = [(q.k_x if side == "lower" else
                (q.k_x - np.pi if q.k_x > np.pi / 2 else q.k_x), q.omega_E)
               for q in profiles if q.side == side]
        if pts:
            kk, ee = zip(*pts)
            ax.plot(np.array(kk) / np.pi, ee, ".", ms=3, color=color,
                    label=f"{side} edge")
    if gap_window:
        for y in gap_window:
            ax.axhline(y, color="0.3", lw=0.7, ls="--")
    ax.set_xlabel(r"$k_x a / \pi$")
    ax.set_ylabel(r"$\omega / K$")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path


def fig_transfer(path, result) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(result.times, np.abs(result.a_e) ** 2, label=r"$|a_e|^2$")
    ax.plot(result.times, np.abs(result.a_r) ** 2, label=r"$|a_r|^2$")
    ax.plot(result.times, result.channel_occupation, label="channel",
            color="0.5", lw=0.9)
    ax.axvline(result.t_f, color="0.3", lw=0.7, ls=":")
    ax.annotate(f"F = {result.F:.3f}", (result.t_f, result.F),
                textcoords="offset points", xytext=(-8, 6), ha="right")
    ax.set_xlabel(r"$t K$")
    ax.set_ylabel("population")
    ax.legend(loc="center right")
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path


def fig_disorder(path, sweep) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.4, 4))
    ax.errorbar(sweep.W, sweep.mean_F, yerr=sweep.stderr, fmt="o-",
                capsize=3)
    ax.axhline(sweep.clean_F, color="0.5", lw=0.8, ls="--",
               label=f"clean F = {sweep.clean_F:.3f}")
    if (sweep.W > 0).all():
        ax.set_xscale("log")
    ax.set_xlabel("W")
    ax.set_ylabel("mean F")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path
