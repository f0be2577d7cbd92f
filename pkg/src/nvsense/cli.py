"""Command-line front end.

Subcommands reproduce the toolkit's simulation and analysis surfaces (polar
patterns, axial-field decay, sensitivity sweeps, the T2* model, alignment and
polar-pattern inversion, the point-charge helper, CW-ODMR spectra) and write
CSV or JSON with unit-bearing column names.  Every command is deterministic
under a fixed seed.

Exit codes: 0 success, 2 usage/config error, 3 physics-regime error,
4 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields, replace

import numpy as np

from . import calibration, protocols, response
from .core import ElectricField, MagneticField, NVParams, StrainField
from .response import DecoherenceParams, RegimeError

USAGE_ERROR, REGIME_ERROR, IO_ERROR = 2, 3, 4


class CsvFormatError(Exception):
    """Malformed CSV input, with a line-numbered message."""


@dataclass(frozen=True)
class RunConfig:
    """Flat, validated run configuration (JSON file keys match field names)."""

    nv: NVParams
    decoherence: DecoherenceParams
    signal: protocols.SignalModel
    seed: int = 0
    out_dir: str = "."
    format: str = "csv"

    def __post_init__(self) -> None:
        if self.format not in ("csv", "json"):
            raise ValueError("format must be 'csv' or 'json'")


_NV_KEYS = {f.name for f in fields(NVParams)}
_DEC_KEYS = {f.name for f in fields(DecoherenceParams)}
_SIG_KEYS = {f.name for f in fields(protocols.SignalModel)}
_TOP_KEYS = {"seed", "out_dir", "format"}


def load_config(path: str | None) -> RunConfig:
    """Build a RunConfig from an optional JSON file of flat overrides.

    Unknown keys are rejected; every physical override passes through the
    corresponding dataclass validation before any command runs.
    """
    raw: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError("config file must hold a JSON object")
    unknown = set(raw) - _NV_KEYS - _DEC_KEYS - _SIG_KEYS - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    nv = NVParams(**{k: raw[k] for k in raw if k in _NV_KEYS})
    dec = DecoherenceParams(**{k: raw[k] for k in raw if k in _DEC_KEYS})
    sig = protocols.SignalModel(**{k: raw[k] for k in raw if k in _SIG_KEYS})
    return RunConfig(
        nv=nv,
        decoherence=dec,
        signal=sig,
        seed=int(raw.get("seed", 0)),
        out_dir=str(raw.get("out_dir", ".")),
        format=str(raw.get("format", "csv")),
    )


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_table(cfg: RunConfig, name: str, columns: list[str],
                 rows: list[tuple]) -> str:
    """Write a table as CSV (unit-bearing header) or JSON; returns the path."""
    if cfg.format == "csv":
        path = os.path.join(cfg.out_dir, f"{name}.csv")
        lines = [",".join(columns)]
        lines += [",".join(repr(float(x)) for x in row) for row in rows]
        _atomic_write(path, "\n".join(lines) + "\n")
    else:
        path = os.path.join(cfg.out_dir, f"{name}.json")
        payload = {"columns": columns,
                   "rows": [[float(x) for x in row] for row in rows]}
        _atomic_write(path, json.dumps(payload, indent=2) + "\n")
    return path


def _write_json(cfg: RunConfig, name: str, payload: dict) -> str:
    path = os.path.join(cfg.out_dir, f"{name}.json")
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _read_csv_columns(path: str, min_cols: int) -> list[list[float]]:
    """Numeric CSV reader tolerant of a single header line; raises
    CsvFormatError with the offending line number."""
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [t.strip() for t in line.split(",")]
            try:
                vals = [float(t) for t in parts]
            except ValueError:
                if ln == 1:  # header
                    continue
                raise CsvFormatError(
                    f"{path}:{ln}: expected numeric fields, got {line!r}"
                ) from None
            if len(vals) < min_cols:
                raise CsvFormatError(
                    f"{path}:{ln}: expected >= {min_cols} columns, "
                    f"got {len(vals)}"
                )
            rows.append(vals)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return rows


def _fields_from_args(args: argparse.Namespace, p: NVParams
                      ) -> tuple[ElectricField, StrainField]:
    e = ElectricField(
        e_z=args.e_z,
        e_perp=args.e_perp,
        phi_e=math.radians(args.phi_e_deg),
    )
    s = StrainField.from_frequencies(
        p, perp_hz=args.sigma_perp_freq,
        phi_sigma=math.radians(args.phi_sigma_deg),
    )
    return e, s


def _add_field_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--b-perp", type=float, default=23.6,
                    help="transverse magnetic field, Gauss")
    sp.add_argument("--e-perp", type=float, default=81.6e3 / 17.0,
                    help="transverse electric field, V/cm")
    sp.add_argument("--phi-e-deg", type=float, default=32.0,
                    help="electric-field azimuth, degrees")
    sp.add_argument("--e-z", type=float, default=-4.19e3 / 0.35,
                    help="axial electric field, V/cm")
    sp.add_argument("--sigma-perp-freq", type=float, default=0.189e6,
                    help="transverse strain, frequency view, Hz")
    sp.add_argument("--phi-sigma-deg", type=float, default=22.0,
                    help="strain azimuth, degrees")


def cmd_polar(cfg: RunConfig, args: argparse.Namespace) -> int:
    e, s = _fields_from_args(args, cfg.nv)
    phi, dw_pert = response.polar_scan(
        cfg.nv, args.b_perp, args.b_z, e, s, args.n_angles, "perturbative"
    )
    _, dw_exact = response.polar_scan(
        cfg.nv, args.b_perp, args.b_z, e, s, args.n_angles, "exact"
    )
    path = _write_table(
        cfg, "polar",
        ["phi_b_deg", "delta_omega_pert_hz", "delta_omega_exact_hz"],
        list(zip(np.degrees(phi), dw_pert, dw_exact)),
    )
    print(path)
    return 0


def cmd_axial_decay(cfg: RunConfig, args: argparse.Namespace) -> int:
    e, s = _fields_from_args(args, cfg.nv)
    grid = np.linspace(-args.b_z_span, args.b_z_span, args.n_points)
    _, dw = response.axial_decay_scan(cfg.nv, args.b_perp, e, s, grid)
    peak = float(np.max(np.abs(dw)))
    norm = dw / peak if peak > 0.0 else dw
    path = _write_table(
        cfg, "axial_decay",
        ["b_z_gauss", "delta_omega_exact_hz", "delta_omega_normalized"],
        list(zip(grid, dw, norm)),
    )
    print(path)
    return 0


def _fringe_phase(kind: str, tau: float, amplitude: float, p: NVParams,
                  profile: protocols.Waveform | None) -> float:
    if profile is not None:
        wf = profile.scaled(amplitude * p.d_perp)
        seq = protocols.PulseSequence(kind=kind, tau=tau)
        fn = protocols.phase_fid if kind == "fid" else protocols.phase_hahn
        return fn(seq, wf)
    if kind == "fid":
        wf = protocols.Waveform([0.0, tau], [amplitude * p.d_perp])
        return protocols.phase_fid(
            protocols.PulseSequence(kind="fid", tau=tau), wf
        )
    wf = protocols.Waveform.square_wave(amplitude * p.d_perp, tau)
    return protocols.phase_hahn(
        protocols.PulseSequence(kind="hahn", tau=tau), wf
    )


def cmd_sense(cfg: RunConfig, args: argparse.Namespace) -> int:
    m = replace(cfg.signal, t2_or_t2star=(
        cfg.decoherence.t2 if args.kind == "hahn"
        else cfg.decoherence.t2_star_perp
    ), envelope_exponent=cfg.decoherence.envelope_exponent)
    tau = args.tau if args.tau is not None else protocols.optimal_tau(
        m, cfg.nv.d_perp, args.kind
    )
    profile = None
    if args.waveform is not None:
        rows = _read_csv_columns(args.waveform, 2)
        times = [r[0] for r in rows]
        vals = [r[1] for r in rows[:-1]]
        profile = protocols.Waveform(times, vals)

    total_evo = tau if args.kind == "fid" else 2.0 * tau
    e_grid = np.linspace(0.0, args.e_max, args.n_e)
    fringe_rows = []
    for e_perp in e_grid:
        phi = _fringe_phase(args.kind, tau, float(e_perp), cfg.nv, profile)
        fringe_rows.append(
            (e_perp, protocols.signal_intensity(phi, m, total_evo))
        )
    path1 = _write_table(cfg, f"fringe_{args.kind}",
                         ["e_perp_v_per_cm", "signal"], fringe_rows)

    t_grid = np.logspace(math.log10(args.t_min), math.log10(args.t_max),
                         args.n_times)
    pts = protocols.sensitivity_curve(
        m, cfg.nv.d_perp, args.kind, t_grid, cfg.seed, tau=tau
    )
    path2 = _write_table(
        cfg, f"sensitivity_{args.kind}",
        ["total_time_s", "delta_e_min_mc_v_per_cm",
         "delta_e_min_shot_noise_v_per_cm"],
        [(q.total_time, q.delta_e_min_mc, q.delta_e_min_shot_noise)
         for q in pts],
    )
    e_sen = protocols.field_sensitivity(m, cfg.nv.d_perp, args.kind, tau=tau)
    print(path1)
    print(path2)
    print(f"tau_s={tau!r} e_sen_v_per_cm_sqrt_hz={e_sen!r}")
    return 0


def cmd_t2star(cfg: RunConfig, args: argparse.Namespace) -> int:
    d = cfg.decoherence
    grid = np.linspace(-d.b_z_max, d.b_z_max, args.n_points)
    rows = []
    for bz in grid:
        kappa = response.mixing_kappa(cfg.nv, bz, args.sigma_perp_freq)
        t2s = response.t2star_model(d, cfg.nv, args.sigma_perp_freq, bz)
        rows.append((bz, kappa, t2s))
    path = _write_table(cfg, "t2star",
                        ["b_z_gauss", "kappa", "t2_star_s"], rows)
    print(path)
    return 0


def cmd_align(cfg: RunConfig, args: argparse.Namespace) -> int:
    rows = _read_csv_columns(args.scan, 2)
    scan = calibration.AlignmentScan(
        control=np.array([r[0] for r in rows]),
        splitting_hz=np.array([r[1] for r in rows]),
        b_perp=args.b_perp,
        linewidth_hz=args.linewidth,
    )
    c0, unc_mt = calibration.align_axial_field(scan, cfg.nv)
    path = _write_json(cfg, "align", {
        "control_at_zero_b_z": c0,
        "b_z_uncertainty_mt": unc_mt,
        "n_points": len(rows),
    })
    print(path)
    return 0


def cmd_fit(cfg: RunConfig, args: argparse.Namespace) -> int:
    rows = _read_csv_columns(args.data, 2)
    phi_b = np.radians([r[0] for r in rows])
    dw = np.array([r[1] for r in rows])
    weights = None
    if all(len(r) >= 3 for r in rows):
        sigma = np.array([r[2] for r in rows])
        if np.any(sigma <= 0.0):
            raise CsvFormatError(f"{args.data}: sigma column must be positive")
        weights = 1.0 / sigma**2
    result = calibration.fit_polar_pattern(
        phi_b, dw, cfg.nv, args.sigma_perp_freq, weights=weights
    )
    path = _write_json(cfg, "fit", result.as_dict())
    print(path)
    return 0


def cmd_charge(cfg: RunConfig, args: argparse.Namespace) -> int:
    value = protocols.point_charge_field(args.charge, args.distance)
    print(repr(value))
    return 0


def cmd_odmr(cfg: RunConfig, args: argparse.Namespace) -> int:
    e, s = _fields_from_args(args, cfg.nv)
    b = MagneticField(b_z=args.b_z, b_perp=args.b_perp,
                      phi_b=math.radians(args.phi_b_deg))
    grid = np.linspace(args.f_center - args.f_span / 2.0,
                       args.f_center + args.f_span / 2.0, args.n_points)
    spec = protocols.cw_odmr_spectrum(
        cfg.nv, b, e, s, args.linewidth, args.contrast, grid
    )
    path = _write_table(cfg, "odmr",
                        ["frequency_hz", "fluorescence_normalized"],
                        list(zip(grid, spec)))
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nvsense",
        description="NV ground-state electrometry simulation toolkit",
    )
    ap.add_argument("--config", default=None, help="JSON config file")
    ap.add_argument("--seed", type=int, default=None, help="RNG seed")
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--format", choices=("csv", "json"), default=None)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("polar", help="polar pattern vs magnetic azimuth")
    _add_field_args(sp)
    sp.add_argument("--b-z", type=float, default=0.0)
    sp.add_argument("--n-angles", type=int, default=360)
    sp.set_defaults(func=cmd_polar)

    sp = sub.add_parser("axial-decay", help="shift decay vs axial field")
    _add_field_args(sp)
    sp.add_argument("--b-z-span", type=float, default=10.0,
                    help="half-width of the symmetric B_z grid, Gauss")
    sp.add_argument("--n-points", type=int, default=201)
    sp.set_defaults(func=cmd_axial_decay)

    sp = sub.add_parser("sense", help="fringe sweep and sensitivity curve")
    sp.add_argument("--kind", choices=("fid", "hahn"), default="hahn")
    sp.add_argument("--tau", type=float, default=None,
                    help="free-evolution time, s (default: optimal)")
    sp.add_argument("--e-max", type=float, default=1500.0)
    sp.add_argument("--n-e", type=int, default=301)
    sp.add_argument("--t-min", type=float, default=0.1)
    sp.add_argument("--t-max", type=float, default=100.0)
    sp.add_argument("--n-times", type=int, default=25)
    sp.add_argument("--waveform", default=None,
                    help="two-column CSV (time s, unit-amplitude E profile)")
    sp.set_defaults(func=cmd_sense)

    sp = sub.add_parser("t2star", help="T2* vs axial field")
    sp.add_argument("--sigma-perp-freq", type=float, default=0.189e6)
    sp.add_argument("--n-points", type=int, default=201)
    sp.set_defaults(func=cmd_t2star)

    sp = sub.add_parser("align", help="axial-field alignment from a scan CSV")
    sp.add_argument("scan", help="CSV: control, splitting_hz")
    sp.add_argument("--b-perp", type=float, default=0.0)
    sp.add_argument("--linewidth", type=float,
                    default=calibration.DEFAULT_LINEWIDTH_HZ)
    sp.set_defaults(func=cmd_align)

    sp = sub.add_parser("fit", help="invert a polar pattern CSV")
    sp.add_argument("data", help="CSV: phi_b_deg, delta_omega_hz[, sigma_hz]")
    sp.add_argument("--sigma-perp-freq", type=float, default=0.189e6)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("charge", help="point-charge field helper")
    sp.add_argument("charge", type=float, help="charge, elementary charges")
    sp.add_argument("distance", type=float, help="distance, meters")
    sp.set_defaults(func=cmd_charge)

    sp = sub.add_parser("odmr", help="CW-ODMR spectrum")
    _add_field_args(sp)
    sp.add_argument("--b-z", type=float, default=0.0)
    sp.add_argument("--phi-b-deg", type=float, default=0.0)
    sp.add_argument("--f-center", type=float, default=2.87e9)
    sp.add_argument("--f-span", type=float, default=30e6)
    sp.add_argument("--n-points", type=int, default=2001)
    sp.add_argument("--linewidth", type=float, default=4e5)
    sp.add_argument("--contrast", type=float, default=0.05)
    sp.set_defaults(func=cmd_odmr)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)
        if args.format is not None:
            cfg = replace(cfg, format=args.format)
    except (ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return IO_ERROR
    except json.JSONDecodeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_ERROR

    try:
        return args.func(cfg, args)
    except RegimeError as exc:
        print(f"physics-regime error: {exc}", file=sys.stderr)
        return REGIME_ERROR
    except (CsvFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return IO_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
