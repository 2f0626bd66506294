"""Command-line front end: config parsing, run orchestration, persistence.

Config files are sectioned key = value text (sections: atom, cm, photon,
geometry, numerics, scan, output).  Unknown keys are rejected; every value is
validated before any computation.  All output units are stated in CSV headers
(eV, nm, barn); CSV files are byte-reproducible from (config, seed).

Exit codes: 0 success, 2 schema violation, 3 numeric non-convergence.
"""

import argparse
import json
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .amplitudes import CollisionConfig, NumericsSpec, oam_distribution_estimate
from .atom import AtomSpec, BoundState, TransitionSpec, bound_energy
from .errors import DomainError, QuadratureError, SchemaError
from .packets import (CollisionGeometry, MassivePacketSpec, PhotonPacketSpec,
                      luminosity, mean_kz_for_energy, mean_photon_energy,
                      photon_spectrum)
from .scans import (ScanResult, coherence_scan, energy_scan, kick_map,
                    oam_transfer_scan, resonance_energy, scatter_scan, z_scan,
                    _config_snapshot, _fmt)
from .units import ELECTRON_MASS, HBARC, nm_to_inv_ev


def _parse_bool(s):
    if s.lower() in ("true", "1", "yes", "on"):
        return True
    if s.lower() in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_list(conv):
    def parse(s):
        return [conv(tok) for tok in s.replace(";", ",").split(",") if tok.strip()]
    return parse


def _parse_states(s):
    return [BoundState.parse(tok.strip()) for tok in s.split(";") if tok.strip()]


# section -> key -> (converter, default); _REQUIRED marks keys with no default
_REQUIRED = object()

SCHEMA = {
    "atom": {
        "Z": (int, _REQUIRED),
        "A": (float, _REQUIRED),
        "initial": (BoundState.parse, BoundState(1, 0, 0)),
        "final": (BoundState.parse, BoundState(2, 1, 1)),
        "dipole_mode": (_parse_bool, False),
    },
    "cm": {
        "k": (int, 0),
        "n": (int, 0),
        "l": (int, 0),
        "sigma_perp_nm": (float, _REQUIRED),
        "sigma_z_nm": (float, _REQUIRED),
        "mean_pz_ev": (float, 0.0),
    },
    "photon": {
        "k": (int, 0),
        "n": (int, 0),
        "l": (int, 0),
        "helicity": (int, 1),
        "sigma_perp_nm": (float, _REQUIRED),
        "sigma_z_nm": (float, _REQUIRED),
        "mean_energy_ev": (float, None),   # None -> lock to the resonance
    },
    "geometry": {
        "b_nm": (float, 0.0),
        "phi_b_rad": (float, 0.0),
    },
    "numerics": {
        "seed": (int, 12345),
        "theta_nodes": (int, 64),
        "phi_nodes": (int, 128),
        "pperp_nodes": (int, 48),
        "pz_nodes": (int, 48),
        "nphi_f": (int, 64),
        "abs_rel_tol": (float, 1e-3),
        "mc_samples": (int, 200_000),
        "mc_batch": (int, 10_000),
        "inner_theta_nodes": (int, 12),
        "inner_phi_nodes": (int, 16),
        "gamma_reg_ev": (float, 4e-7),
        "intermediate_n_max": (int, 3),
    },
    "scan": {
        "kind": (str, "energy"),
        "omega_min_ev": (float, None),
        "omega_max_ev": (float, None),
        "omega_points": (int, None),
        "channels": (_parse_states, None),
        "ell_gamma_values": (_parse_list(int), [0, 1, 2, 3, 4]),
        "b_values_nm": (_parse_list(float), [0.0, 10.0, 50.0]),
        "sigma_cm_values_nm": (_parse_list(float), None),
        "z_values": (_parse_list(int), [1, 2, 4, 6, 8, 10]),
        "m_range": (int, None),
    },
    "output": {
        "dir": (str, "out"),
    },
}

_SCAN_KINDS = ("energy", "oam_transfer", "coherence", "z")


def parse_config_text(text, overrides=()):
    """Parse the sectioned key=value format into a validated nested dict."""
    raw = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in SCHEMA:
                raise SchemaError(section, f"unknown section (line {lineno})")
            raw.setdefault(section, {})
            continue
        if "=" not in stripped:
            raise SchemaError(f"line {lineno}", f"expected 'key = value', got {stripped!r}")
        if section is None:
            raise SchemaError(f"line {lineno}", "key outside any [section]")
        key, val = (part.strip() for part in stripped.split("=", 1))
        if key not in SCHEMA[section]:
            raise SchemaError(f"{section}.{key}", "unknown key")
        raw[section][key] = val

    for item in overrides:
        if "=" not in item:
            raise SchemaError(item, "override must be section.key=value")
        path, val = item.split("=", 1)
        if "." not in path:
            raise SchemaError(path, "override must be section.key=value")
        section, key = path.split(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise SchemaError(f"{section}.{key}", "unknown key")
        raw.setdefault(section, {})[key] = val.strip()

    cfg = {}
    for section, keys in SCHEMA.items():
        cfg[section] = {}
        for key, (conv, default) in keys.items():
            if key in raw.get(section, {}):
                try:
                    cfg[section][key] = conv(raw[section][key])
                except (ValueError, DomainError) as exc:
                    raise SchemaError(f"{section}.{key}", str(exc)) from exc
            elif default is _REQUIRED:
                raise SchemaError(f"{section}.{key}", "required key missing")
            else:
                cfg[section][key] = default
    return cfg


def build_run(cfg_dict):
    """Build the CollisionConfig (photon locked to the resonance if unset)."""
    a = cfg_dict["atom"]
    atom = AtomSpec(a["Z"], a["A"])
    transition = TransitionSpec(atom, a["initial"], a["final"], a["dipole_mode"])
    c = cfg_dict["cm"]
    cm = MassivePacketSpec(c["k"], c["n"], c["l"], c["sigma_perp_nm"],
                           c["sigma_z_nm"], c["mean_pz_ev"], atom.total_mass)
    p = cfg_dict["photon"]
    photon = PhotonPacketSpec(p["k"], p["n"], p["l"], p["helicity"],
                              p["sigma_perp_nm"], p["sigma_z_nm"], 1.0)
    g = cfg_dict["geometry"]
    geometry = CollisionGeometry(g["b_nm"], g["phi_b_rad"])
    n = cfg_dict["numerics"]
    numerics = NumericsSpec(n["theta_nodes"], n["phi_nodes"], n["pperp_nodes"],
                            n["pz_nodes"], n["nphi_f"], n["abs_rel_tol"], n["seed"],
                            n["mc_samples"], n["mc_batch"], n["inner_theta_nodes"],
                            n["inner_phi_nodes"], n["gamma_reg_ev"],
                            n["intermediate_n_max"])
    run = CollisionConfig(atom, transition, cm, photon, geometry, numerics)
    omega = p["mean_energy_ev"]
    if omega is None:
        omega = resonance_energy(run)
    photon = PhotonPacketSpec(p["k"], p["n"], p["l"], p["helicity"],
                              p["sigma_perp_nm"], p["sigma_z_nm"],
                              mean_kz_for_energy(photon, omega))
    return CollisionConfig(atom, transition, cm, photon, geometry, numerics)


def _omega_grid(cfg_dict, run):
    s = cfg_dict["scan"]
    if s["omega_min_ev"] is None or s["omega_max_ev"] is None or s["omega_points"] is None:
        return None
    return np.linspace(s["omega_min_ev"], s["omega_max_ev"], s["omega_points"])


def _write_meta(path, cfg_dict, run, wall, extra=None):
    meta = {"config": cfg_dict_jsonable(cfg_dict), "snapshot": _config_snapshot(run),
            "package_version": __version__, "numpy_version": np.__version__,
            "wall_time_s": wall, "seed": run.numerics.seed}
    if extra:
        meta.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def cfg_dict_jsonable(cfg_dict):
    out = {}
    for sec, keys in cfg_dict.items():
        out[sec] = {}
        for k, v in keys.items():
            if isinstance(v, BoundState):
                out[sec][k] = str(v)
            elif isinstance(v, list) and v and isinstance(v[0], BoundState):
                out[sec][k] = [str(x) for x in v]
            else:
                out[sec][k] = v
    return out


def _default_channels(run):
    fin = run.transition.final
    chans = [BoundState(fin.n, l, m) for l in range(fin.n) for m in range(-l, l + 1)]
    # dipole-dominant first for readability
    chans.sort(key=lambda s: (s.l != fin.l, -s.m))
    return chans


def cmd_validate(cfg_dict, run, outdir, args):
    w0 = resonance_energy(run)
    bw = np.sqrt(run.photon.k_gamma + 1.0) / nm_to_inv_ev(run.photon.sigma_z)
    parax = 1.0 / (nm_to_inv_ev(run.photon.sigma_perp) * mean_photon_energy(run.photon))
    report = {
        "resonance_ev": w0,
        "bandwidth_ev": bw,
        "mean_energy_ev": mean_photon_energy(run.photon),
        "paraxiality": parax,
        "nonparaxial": bool(parax > 0.1),
        "mass_ratio_M_over_m": run.atom.nuclear_mass / ELECTRON_MASS,
        "bohr_radius_nm": run.atom.bohr_radius_nm,
        "ell0": run.ell0,
    }
    for key, val in report.items():
        print(f"{key}: {val}")
    return 0


def cmd_absorb(cfg_dict, run, outdir, args):
    kind = cfg_dict["scan"]["kind"]
    if kind not in _SCAN_KINDS:
        raise SchemaError("scan.kind", f"must be one of {_SCAN_KINDS}")
    t0 = time.time()
    if kind == "energy":
        channels = cfg_dict["scan"]["channels"] or _default_channels(run)
        result = energy_scan(run, _omega_grid(cfg_dict, run), channels, args.workers)
    elif kind == "oam_transfer":
        result = oam_transfer_scan(run, cfg_dict["scan"]["ell_gamma_values"], args.workers)
    elif kind == "coherence":
        values = cfg_dict["scan"]["sigma_cm_values_nm"]
        if not values:
            raise SchemaError("scan.sigma_cm_values_nm", "required for coherence scans")
        result = coherence_scan(run, values, args.workers)
    else:
        result = z_scan(run, cfg_dict["scan"]["z_values"], args.workers)
    result.to_csv(os.path.join(outdir, f"{kind}_scan.csv"))
    result.write_meta(os.path.join(outdir, "meta.json"),
                      {"wall_time_s": time.time() - t0,
                       "config": cfg_dict_jsonable(cfg_dict)})
    return 0


def cmd_scatter(cfg_dict, run, outdir, args):
    t0 = time.time()
    result = scatter_scan(run, _omega_grid(cfg_dict, run), args.workers)
    result.to_csv(os.path.join(outdir, "scatter_scan.csv"))
    result.write_meta(os.path.join(outdir, "meta.json"),
                      {"wall_time_s": time.time() - t0,
                       "config": cfg_dict_jsonable(cfg_dict)})
    return 0


def cmd_oamdist(cfg_dict, run, outdir, args):
    t0 = time.time()
    spec = oam_distribution_estimate(run.ell0, run.geometry.b, run.cm.sigma_perp,
                                     run.photon.sigma_perp, cfg_dict["scan"]["m_range"])
    spec.to_csv(os.path.join(outdir, "oam_estimate.csv"))
    _write_meta(os.path.join(outdir, "meta.json"), cfg_dict, run, time.time() - t0,
                {"mean": spec.mean, "stddev": spec.stddev})
    return 0


def cmd_kickmap(cfg_dict, run, outdir, args):
    import csv as _csv
    t0 = time.time()
    entries = kick_map(run, cfg_dict["scan"]["b_values_nm"], args.workers)
    for entry in entries:
        path = os.path.join(outdir, f"kickmap_b{entry['b_nm']:g}nm.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = _csv.writer(fh)
            w.writerow(["p_perp_ev", "phi_f_rad", "density_unit_max"])
            for i, pp in enumerate(entry["p_perp"]):
                for j, ph in enumerate(entry["phi_f"]):
                    w.writerow([repr(float(pp)), repr(float(ph)),
                                repr(float(entry["density"][i, j]))])
    with open(os.path.join(outdir, "oam.csv"), "w", newline="", encoding="utf-8") as fh:
        w = _csv.writer(fh)
        w.writerow(["b_nm", "mean_ell", "stddev_ell", "p_abs"])
        for entry in entries:
            w.writerow([repr(entry["b_nm"]), repr(entry["oam"].mean),
                        repr(entry["oam"].stddev), repr(entry["norm"])])
    _write_meta(os.path.join(outdir, "meta.json"), cfg_dict, run, time.time() - t0,
                {"b_values_nm": cfg_dict["scan"]["b_values_nm"]})
    return 0


def cmd_spectrum(cfg_dict, run, outdir, args):
    t0 = time.time()
    grid = _omega_grid(cfg_dict, run)
    if grid is None:
        w0 = mean_photon_energy(run.photon)
        bw = np.sqrt(run.photon.k_gamma + 1.0) / nm_to_inv_ev(run.photon.sigma_z)
        width = 8 * bw + 2.0 / nm_to_inv_ev(run.photon.sigma_perp)
        grid = np.linspace(max(w0 - width, 0.05 * w0), w0 + width, 801)
    table = photon_spectrum(run.photon, grid)
    table.to_csv(os.path.join(outdir, "spectrum.csv"))
    _write_meta(os.path.join(outdir, "meta.json"), cfg_dict, run, time.time() - t0)
    return 0


def cmd_luminosity(cfg_dict, run, outdir, args):
    import csv as _csv
    t0 = time.time()
    lum = luminosity(run.cm, run.photon, run.geometry)
    with open(os.path.join(outdir, "luminosity.csv"), "w", newline="", encoding="utf-8") as fh:
        w = _csv.writer(fh)
        w.writerow(["b_nm", "luminosity_per_nm2"])
        w.writerow([repr(run.geometry.b), repr(lum)])
    _write_meta(os.path.join(outdir, "meta.json"), cfg_dict, run, time.time() - t0)
    return 0


_COMMANDS = {
    "absorb": cmd_absorb,
    "scatter": cmd_scatter,
    "oamdist": cmd_oamdist,
    "kickmap": cmd_kickmap,
    "spectrum": cmd_spectrum,
    "luminosity": cmd_luminosity,
    "validate": cmd_validate,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="vortexlab",
        description="Structured-photon absorption/scattering by atomic wave packets")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="config file path")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value (section.key=value), repeatable")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel rows (default: VORTEXLAB_WORKERS or cpu count)")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    args = parser.parse_args(argv)

    if args.workers is None:
        env = os.environ.get("VORTEXLAB_WORKERS")
        args.workers = int(env) if env else (os.cpu_count() or 1)

    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
        cfg_dict = parse_config_text(text, args.set)
        run = build_run(cfg_dict)
    except SchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    outdir = args.out or cfg_dict["output"]["dir"]
    os.makedirs(outdir, exist_ok=True)
    try:
        return _COMMANDS[args.command](cfg_dict, run, outdir, args)
    except QuadratureError as exc:
        print(f"numeric failure: {exc} (achieved {exc.achieved})", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
