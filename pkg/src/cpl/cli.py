"""Command-line front end.

Seven subcommands: bands, chern, gapmap, stripe, transfer, disorder,
stability.  Every run takes an optional JSON config (--config) whose keys
mirror the command-line flags 1:1; explicit flags override the file,
which overrides built-in defaults.  Unknown config keys are rejected.
Each run writes its artifacts plus a manifest.json echoing the fully
resolved config, so any run can be reproduced from the manifest alone.

Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure.
Thread count: CPL_THREADS env var wins over --threads; both pin the BLAS
pool (set before numpy is first imported, hence the lazy imports here).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import time
from pathlib import Path


class ConfigError(Exception):
    pass


_REQUIRED = object()


def _angle(text):
    """Float radians, or compact pi expressions like '2pi/3', '-3pi/2'."""
    if isinstance(text, (int, float)):
        return float(text)
    m = re.fullmatch(r"\s*([+-]?\d*\.?\d*)\s*pi\s*(?:/\s*(\d*\.?\d+))?\s*",
                     str(text))
    if m:
        coef = m.group(1)
        num = float(coef) if coef not in ("", "+", "-") else float(coef + "1")
        return num * math.pi / (float(m.group(2)) if m.group(2) else 1.0)
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse angle {text!r}")


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _str_list(text):
    if isinstance(text, (list, tuple)):
        return [str(x) for x in text]
    return [x.strip() for x in str(text).split(",") if x.strip()]


_PARAM_SCHEMA = {
    "G": (float, 2.0),
    "delta_om": (float, 3.0),
    "omega_M": (float, 460.0),
    "J": (float, 200.0),
    "K": (float, 1.0),
    "Q_C": (float, None),
    "Q_M": (float, None),
    "kappa_C": (float, 0.0),
    "kappa_M": (float, 0.0),
    "delta_theta": (_angle, 2.0 * math.pi / 3.0),
    "omega_C": (float, 2.0e6),
}

_COMMON_SCHEMA = {
    "command": (str, None),
    "output_dir": (str, "cpl-out"),
    "threads": (int, None),
    "figures": (bool, True),
}

_SCENARIO_SCHEMA = {
    "kind": (str, "straight"),
    "G": (float, 2.0),
    "delta_om": (float, 4.0),
    "delta_theta": (_angle, 1.5 * math.pi),
    "g_max": (float, 0.06),
    "Q_C": (float, 5e7),
    "Q_M": (float, 1e6),
    "t_up": (float, 100.0),
    "t_max": (float, 2400.0),
    "dt": (float, 0.04),
    "dt_opt": (float, 5.0),
    "omega_rel": (float, 0.60),
    "Nx": (int, 16),
    "Ny": (int, 11),
}

_SCHEMAS = {
    "bands": {**_COMMON_SCHEMA, **_PARAM_SCHEMA,
              "path": (str, "GKM1K'G"), "points_per_segment": (int, 100)},
    "chern": {**_COMMON_SCHEMA, **_PARAM_SCHEMA, "grid": (int, 24)},
    "gapmap": {**_COMMON_SCHEMA,
               **{k: v for k, v in _PARAM_SCHEMA.items()
                  if k not in ("G", "delta_om")},
               "G_grid": (_float_list, [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]),
               "delta_om_grid": (_float_list,
                                 [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]),
               "grid": (int, 36)},
    "stripe": {**_COMMON_SCHEMA, **_PARAM_SCHEMA,
               "N_y": (int, 21), "n_k": (int, 401)},
    "transfer": {**_COMMON_SCHEMA, **_SCENARIO_SCHEMA},
    "disorder": {**_COMMON_SCHEMA, **_SCENARIO_SCHEMA,
                 "W_grid": (_float_list, _REQUIRED),
                 "n_realizations": (int, 50),
                 "seed": (int, _REQUIRED),
                 "targets": (_str_list,
                             ["omega_M", "Delta", "G", "kappa_C", "kappa_M"]),
                 "shared_draw": (bool, False),
                 "reoptimize": (bool, False)},
    "stability": {**_COMMON_SCHEMA, **_PARAM_SCHEMA},
}


def _coerce(key, value, typ):
    if value is None:
        return None
    try:
        if typ is bool:
            if not isinstance(value, bool):
                raise ConfigError(f"key {key!r} must be true/false")
            return value
        if typ is int:
            if isinstance(value, bool) or (isinstance(value, float)
                                           and value != int(value)):
                raise ConfigError(f"key {key!r} must be an integer")
            return int(value)
        return typ(value)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad value for {key!r}: {e}")


def _resolve_config(args, command: str) -> dict:
    schema = _SCHEMAS[command]
    cfg = {k: d for k, (t, d) in schema.items()}
    if args.config is not None:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON config: {e}")
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - set(schema)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for k, v in doc.items():
            cfg[k] = _coerce(k, v, schema[k][0])
    for k in schema:
        flag = getattr(args, k, None)
        if flag is not None:
            cfg[k] = flag
    if cfg.get("command") not in (None, command):
        raise ConfigError(f"config is for command {cfg['command']!r}, "
                          f"invoked as {command!r}")
    cfg["command"] = command
    missing = [k for k, v in cfg.items() if v is _REQUIRED]
    if missing:
        raise ConfigError(f"missing required keys: {missing} "
                          f"(set via --{missing[0].replace('_', '-')} or config)")
    return cfg


def _pin_threads(cfg):
    n = os.environ.get("CPL_THREADS") or cfg.get("threads")
    if n is None:
        return
    try:
        n = str(int(n))
    except ValueError:
        raise ConfigError(f"CPL_THREADS/threads must be an integer, got {n!r}")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = n
    cfg["threads"] = int(n)


def _params_from(cfg):
    from .params import OmParams
    try:
        return OmParams.from_detuning(
            cfg["delta_om"], G=cfg["G"], omega_M=cfg["omega_M"], J=cfg["J"],
            K=cfg["K"], Q_C=cfg["Q_C"], Q_M=cfg["Q_M"],
            kappa_C=cfg["kappa_C"], kappa_M=cfg["kappa_M"],
            delta_theta=cfg["delta_theta"], omega_C=cfg["omega_C"])
    except ValueError as e:
        raise ConfigError(str(e))


def _parse_path_spec(spec: str):
    from .bloch import GAMMA, K_POINT, KPRIME_POINT, M_POINT
    table = {"G": ("Gamma", GAMMA), "K": ("K", K_POINT),
             "K'": ("K'", KPRIME_POINT), "M": ("M1", M_POINT),
             "M1": ("M1", M_POINT)}
    tokens = re.findall(r"[GKM]1?'?", spec.replace(" ", ""))
    if "".join(tokens) != spec.replace(" ", "") or len(tokens) < 2:
        raise ConfigError(f"cannot parse momentum path {spec!r} "
                          "(tokens: G, K, K', M, M1)")
    names, corners = zip(*(table[t] for t in tokens))
    return list(corners), list(names)


# ------------------------------------------------------------ subcommands

def _cmd_bands(cfg, out):
    import numpy as np
    from . import reports
    from .bloch import band_structure, kpath

    p = _params_from(cfg)
    corners, names = _parse_path_spec(cfg["path"])
    ks, labels = kpath(corners, names, cfg["points_per_segment"])
    bs = band_structure(p, ks, labels)
    header = (["k_index", "k_x", "k_y"]
              + [f"E_{b}" for b in range(1, 7)]
              + [f"phonon_weight_{b}" for b in range(1, 7)])
    rows = [[i, k[0], k[1], *bs.energies[i], *bs.phonon_weight[i]]
            for i, k in enumerate(bs.kpoints)]
    outputs = [reports.write_csv(out / "bands.csv", header, rows)]
    figures = []
    if cfg["figures"]:
        figures.append(reports.fig_band_path(out / "bands.png", bs))
    return outputs, figures


def _cmd_chern(cfg, out):
    from . import reports
    from .bloch import chern_numbers

    p = _params_from(cfg)
    reps = chern_numbers(p, grid_N=cfg["grid"])
    doc = {"C": [r.chern for r in reps],
           "sum": int(sum(r.chern for r in reps)),
           "grid_N": cfg["grid"],
           "max_residual": max(r.curvature_sum_residual for r in reps)}
    return [reports.write_json(out / "chern.json", doc)], []


def _cmd_gapmap(cfg, out):
    import numpy as np
    from . import reports
    from .bloch import numerical_gap
    from .params import OmParams

    Gs = np.array(cfg["G_grid"], dtype=float)
    doms = np.array(cfg["delta_om_grid"], dtype=float)
    if len(Gs) == 0 or len(doms) == 0:
        raise ConfigError("G_grid and delta_om_grid must be nonempty")
    rows = []
    gap23 = np.full((len(Gs), len(doms)), np.nan)
    Gc = np.where(doms > 0, np.sqrt(1.5 * doms * cfg["K"]), np.nan)
    Gmin = np.where(doms > 0, np.sqrt(cfg["K"] ** 2 + doms * cfg["K"]), np.nan)
    for i, G in enumerate(Gs):
        for j, dom in enumerate(doms):
            p = OmParams.from_detuning(
                dom, G=float(G), omega_M=cfg["omega_M"], J=cfg["J"],
                K=cfg["K"], delta_theta=cfg["delta_theta"],
                omega_C=cfg["omega_C"])
            rep = numerical_gap(p, grid_N=cfg["grid"])
            valid = dom > 0
            gap23[i, j] = rep.gap_23
            rows.append([G, dom, rep.gap_12, rep.gap_23, int(valid),
                         Gc[j], Gmin[j]])
    header = ["G", "delta_om", "gap_12", "gap_23", "valid",
              "G_c_analytic", "G_min"]
    outputs = [reports.write_csv(out / "gapmap.csv", header, rows)]
    figures = []
    if cfg["figures"]:
        figures.append(reports.fig_gapmap(out / "gapmap.png", Gs, doms,
                                          gap23, Gc, Gmin))
    return outputs, figures


def _cmd_stripe(cfg, out):
    import numpy as np
    from . import reports
    from .bloch import numerical_gap
    from .stripe import default_k_grid, extract_edge_states, stripe_bands

    p = _params_from(cfg)
    gap = numerical_gap(p, grid_N=48)
    table = stripe_bands(p, N_y=cfg["N_y"], k_grid=default_k_grid(cfg["n_k"]))
    profiles = extract_edge_states(table, gap.band_edges[1])

    header = ["k_x_raw", "band", "E", "phonon_weight", "loc_center"]
    rows = [[kx, b, table.energies[ik, b], table.phonon_weight[ik, b],
             table.loc_center[ik, b]]
            for ik, kx in enumerate(table.k_x)
            for b in range(table.energies.shape[1])]
    outputs = [reports.write_csv(out / "stripe_bands.csv", header, rows)]

    eheader = ["k_zone", "omega_E", "side", "v_g", "xi", "P_opt",
               "optical_weight", "kappa_E", "kappa_E_total",
               "u_A_abs", "u_B_abs", "u_C_abs", "fit_residual"]
    erows = [[q.k_x, q.omega_E, q.side, q.v_g, q.xi, q.P_opt,
              q.optical_weight, q.kappa_E, q.kappa_E_total,
              abs(q.u[0]), abs(q.u[1]), abs(q.u[2]), q.fit_residual]
             for q in profiles]
    outputs.append(reports.write_csv(out / "edge_states.csv", eheader, erows))
    figures = []
    if cfg["figures"]:
        figures.append(reports.fig_stripe(out / "stripe.png", table, profiles,
                                          gap.band_edges[1]))
    return outputs, figures


def _scenario_from(cfg):
    from .dynamics import edge_transfer_scenario
    try:
        return edge_transfer_scenario(
            kind=cfg["kind"], delta_om=cfg["delta_om"], G=cfg["G"],
            g_max=cfg["g_max"], Q_C=cfg["Q_C"], Q_M=cfg["Q_M"],
            t_up=cfg["t_up"], t_max=cfg["t_max"], dt=cfg["dt"],
            dt_opt=cfg["dt_opt"], omega_rel=cfg["omega_rel"],
            Nx=cfg["Nx"], Ny=cfg["Ny"], delta_theta=cfg["delta_theta"])
    except (ValueError, KeyError) as e:
        raise ConfigError(str(e))


def _cmd_transfer(cfg, out):
    import numpy as np
    from . import reports
    from .dynamics import run_transfer

    sc = _scenario_from(cfg)
    res = run_transfer(sc)
    header = ["t", "a_e_sq", "a_r_sq", "channel", "norm_sq", "loss_integral"]
    rows = np.column_stack([res.times, np.abs(res.a_e) ** 2,
                            np.abs(res.a_r) ** 2, res.channel_occupation,
                            res.norm_sq, res.loss_integral])
    outputs = [reports.write_csv(out / "transfer.csv", header, rows)]
    sched = res.receiver_schedule
    edges = sched.params["edges"]
    values = sched.params["values"]
    prows = [[edges[i], edges[i + 1], v.real, v.imag, abs(v)]
             for i, v in enumerate(map(complex, values))]
    outputs.append(reports.write_csv(
        out / "receiver_pulse.csv",
        ["t_start", "t_end", "g_real", "g_imag", "g_abs"], prows))
    outputs.append(reports.write_json(out / "transfer.json", {
        "F": res.F, "t_f": res.t_f, "residual_emitter": res.residual_emitter,
        "dissipated": res.dissipated,
        "bookkeeping_error": res.bookkeeping_error,
        "gamma_max": res.gamma_max}))
    figures = []
    if cfg["figures"]:
        figures.append(reports.fig_transfer(out / "transfer.png", res))
    return outputs, figures


def _cmd_disorder(cfg, out):
    from . import reports
    from .disorder import fidelity_sweep

    sc = _scenario_from(cfg)
    targets = tuple(cfg["targets"])
    sweep = fidelity_sweep(sc, cfg["W_grid"], seed=cfg["seed"],
                           n_realizations=cfg["n_realizations"],
                           targets=targets, shared_draw=cfg["shared_draw"],
                           reoptimize=cfg["reoptimize"])
    rows = [[w, m, s, sweep.n]
            for w, m, s in zip(sweep.W, sweep.mean_F, sweep.stderr)]
    outputs = [reports.write_csv(out / "disorder.csv",
                                 ["W", "mean_F", "stderr", "n"], rows)]
    outputs.append(reports.write_json(out / "disorder.json", {
        "seed": sweep.seed, "scenario_digest": sweep.scenario_digest,
        "clean_F": sweep.clean_F, "W_grid": list(map(float, sweep.W)),
        "n_realizations": sweep.n, "targets": list(targets),
        "shared_draw": cfg["shared_draw"]}))
    figures = []
    if cfg["figures"]:
        figures.append(reports.fig_disorder(out / "disorder.png", sweep))
    return outputs, figures


def _cmd_stability(cfg, out):
    import numpy as np
    from . import reports
    from .formulas import check_stability, compute_flux, optical_induced_hopping

    p = _params_from(cfg)
    rep = check_stability(p)
    hop = optical_induced_hopping(p)
    dom = p.delta_om
    margin = rep.margin_ratio if math.isfinite(rep.margin_ratio) else None
    doc = {"required_kappa_M": rep.required_kappa_M,
           "margin_ratio": margin, "stable": rep.stable,
           "flux": compute_flux(p),
           "induced_hopping_abs": abs(hop.value),
           "induced_hopping_arg": float(np.angle(hop.value)),
           "validity_ratio": hop.validity_ratio,
           "G_c_analytic": (math.sqrt(1.5 * dom * p.K) if dom > 0 else None),
           "G_min": (math.sqrt(p.K ** 2 + dom * p.K) if dom > 0 else None)}
    return [reports.write_json(out / "stability.json", doc)], []


_HANDLERS = {
    "bands": _cmd_bands, "chern": _cmd_chern, "gapmap": _cmd_gapmap,
    "stripe": _cmd_stripe, "transfer": _cmd_transfer,
    "disorder": _cmd_disorder, "stability": _cmd_stability,
}

_HELP = {
    "bands": "bulk band structure along a momentum path",
    "chern": "Chern numbers of the six bulk bands",
    "gapmap": "gap sizes over a (G, delta_om) grid",
    "stripe": "ribbon spectrum and chiral edge-state data",
    "transfer": "full transfer simulation with optimized receiver",
    "disorder": "fidelity-vs-disorder-strength sweep",
    "stability": "closed-form flux / induced-hopping / stability numbers",
}


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="cpl",
        description="Chiral phonon-lattice simulations: band topology, edge "
                    "states, and quantum state transfer.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    for cmd, schema in _SCHEMAS.items():
        sp = sub.add_parser(cmd, help=_HELP[cmd])
        sp.add_argument("--config", default=None,
                        help="JSON config; flags override its keys")
        for key, (typ, default) in schema.items():
            if key == "command":
                continue
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                sp.add_argument(flag, dest=key, default=None,
                                action=argparse.BooleanOptionalAction)
            else:
                sp.add_argument(flag, dest=key, type=typ, default=None,
                                metavar=key.upper())
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    command = args.cmd
    try:
        cfg = _resolve_config(args, command)
        _pin_threads(cfg)
        out = Path(cfg["output_dir"])
    except ConfigError as e:
        print(f"cpl {command}: configuration error: {e}", file=sys.stderr)
        return 2
    t0 = time.time()
    try:
        outputs, figures = _HANDLERS[command](cfg, out)
    except ConfigError as e:
        print(f"cpl {command}: configuration error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"cpl {command}: computation failed: "
              f"{type(e).__name__}: {e}", file=sys.stderr)
        return 3
    from . import reports
    echo = {k: v for k, v in cfg.items()}
    reports.write_manifest(out, command, echo, outputs, figures,
                           wall_time=time.time() - t0, seed=cfg.get("seed"))
    for path in outputs + figures:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
