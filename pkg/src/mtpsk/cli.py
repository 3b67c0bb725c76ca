"""Command-line entry point: ``mtpsk <command> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import phase_stats
from .demod import write_scatter_csv
from .errors import ConfigurationError
from .harness import TrialConfig, _parse_scalar, load_config, papr_monte_carlo, run_trial, stream_seed, sweep, throughput
from .modem_tx import (
    build_constellation,
    encode_bits,
    papr,
    phases_from_symbols,
    synthesize,
    write_waveform,
)

log = logging.getLogger("mtpsk")


def _base_config(args) -> tuple[TrialConfig, dict]:
    if args.config:
        cfg, axes = load_config(args.config)
    else:
        cfg, axes = TrialConfig(), {}
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg, axes


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(args, name: str, payload: dict | list, csv_text: str | None = None) -> None:
    """Write JSON or CSV to --out (when given) and echo it to stdout."""
    if args.format == "csv" and csv_text is not None:
        text = csv_text
        suffix = ".csv"
    else:
        text = json.dumps(payload, indent=2, default=_json_default) + "\n"
        suffix = ".json"
    if args.out:
        path = _out_dir(args) / f"{name}{suffix}"
        path.write_text(text)
        log.info("wrote %s", path)
    sys.stdout.write(text)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o).__name__)


def cmd_plan(args) -> int:
    cfg, _ = _base_config(args)
    plan = cfg.plan
    d = plan.to_dict()
    csv_text = "n,tone_hz,spacing_to_next_hz\n" + "".join(
        f"{i + 1},{t:.1f},{(plan.spacings[i] if i < len(plan.spacings) else '')}\n"
        for i, t in enumerate(plan.tones)
    )
    _emit(args, "plan", d, csv_text)
    return 0


def cmd_modulate(args) -> int:
    cfg, _ = _base_config(args)
    plan = cfg.plan
    c = build_constellation(cfg.m_order, cfg.delta_deg)
    nbits = (plan.n - 1) * c.bits_per_symbol
    if args.bits:
        bits = args.bits
    else:
        rng = np.random.default_rng(stream_seed(cfg.seed, args.stream))
        bits = "".join(str(b) for b in rng.integers(0, 2, nbits))
    stream = encode_bits(bits, c, plan.n)
    phi = phases_from_symbols(stream, c)
    periods = 2 if plan.antiperiodic else 1
    w = synthesize(plan, phi, cfg.p_in_dbm, sample_rate=cfg.sample_rate, z0=cfg.z0, n_periods=periods)
    out = _out_dir(args) if args.out else Path(".")
    path = out / "waveform.bin"
    write_waveform(path, w)
    info = {
        "file": str(path),
        "bits": bits,
        "symbols": list(stream.symbols),
        "tone_phases_deg": phi.tolist(),
        "papr": papr(w),
        "sample_rate_hz": w.sample_rate,
        "n_samples": int(w.samples.size),
    }
    sys.stdout.write(json.dumps(info, indent=2) + "\n")
    return 0


def cmd_simulate(args) -> int:
    cfg, _ = _base_config(args)
    rep = run_trial(cfg, args.stream)
    d = rep.to_dict()
    d["papr_db"] = rep.papr_db
    d["throughput_bps"] = throughput(cfg.plan, cfg.m_order)
    _emit(args, "trial", d)
    if args.out and rep.extracted_phases_deg:
        c = build_constellation(cfg.m_order, cfg.delta_deg)
        bps = c.bits_per_symbol
        rows = []
        for i, ph in enumerate(rep.extracted_phases_deg):
            label = "".join(str(b) for b in rep.tx_bits[i * bps : (i + 1) * bps])
            rows.append((args.stream, i, c.phases[c.index_of_label(label)], ph, float("nan")))
        write_scatter_csv(_out_dir(args) / "scatter.csv", rows)
    return 0


def cmd_sweep(args) -> int:
    cfg, axes = _base_config(args)
    for spec in args.axis or []:
        name, _, vals = spec.partition("=")
        axes[name.strip()] = [_parse_scalar(name.strip(), v) for v in vals.split(",")]
    if not axes:
        raise ConfigurationError("no sweep axes: use sweep.<field> in --config or --axis field=a,b")
    report = sweep(cfg, axes, workers=args.workers)
    csv_text = report.to_csv()
    summary = report.summary()
    if args.out:
        out = _out_dir(args)
        (out / "sweep.csv").write_text(csv_text)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n")
    if args.format == "json":
        sys.stdout.write(json.dumps(summary, indent=2, default=_json_default) + "\n")
    else:
        sys.stdout.write(csv_text)
    return 0


def cmd_papr(args) -> int:
    cfg, _ = _base_config(args)
    rows = []
    for n in args.n:
        for delta in args.delta:
            vals = papr_monte_carlo(n, cfg.m_order, delta, args.streams, seed=cfg.seed, f_c=cfg.f_c,
                                    gcd=cfg.gcd, r=cfg.r, p_in_dbm=cfg.p_in_dbm, sample_rate=cfg.sample_rate)
            mean = float(np.mean(vals))
            rows.append({"n_tones": n, "delta_deg": delta, "m_order": cfg.m_order,
                         "mean_papr": mean, "mean_papr_db": 10 * np.log10(mean), "streams": args.streams})
    csv_text = "n_tones,delta_deg,m_order,mean_papr,mean_papr_db,streams\n" + "".join(
        f"{r['n_tones']},{r['delta_deg']},{r['m_order']},{r['mean_papr']:.6f},{r['mean_papr_db']:.6f},{r['streams']}\n"
        for r in rows
    )
    _emit(args, "papr", rows, csv_text)
    return 0


def cmd_phase_pdf(args) -> int:
    cfg, _ = _base_config(args)
    delta = cfg.delta_deg
    hist = phase_stats.empirical_phase_histogram(args.tone, cfg.m_order, delta, args.trials, cfg.seed)
    centers = hist.centers
    analytic = phase_stats.wrapped_phase_pdf(args.tone, delta, centers)
    rows = [
        {"phase_deg": float(p), "analytic_density": float(a), "empirical_density": float(e)}
        for p, a, e in zip(centers, analytic, hist.density)
    ]
    csv_text = "phase_deg,analytic_density,empirical_density,normalized\n" + "".join(
        f"{r['phase_deg']:.3f},{r['analytic_density']:.10g},{r['empirical_density']:.10g},1\n" for r in rows
    )
    _emit(args, "phase_pdf", rows, csv_text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="root RNG seed")
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mtpsk", description=__doc__, parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("plan", parents=[common], help="emit the frequency plan")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("modulate", parents=[common], help="bits or seed to a waveform file")
    s.add_argument("--bits", help="bit string; random from --seed when omitted")
    s.add_argument("--stream", type=int, default=0)
    s.set_defaults(func=cmd_modulate)

    s = sub.add_parser("simulate", parents=[common], help="run one trial")
    s.add_argument("--stream", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", parents=[common], help="grid sweep to CSV + JSON summary")
    s.add_argument("--axis", action="append", help="field=v1,v2,... (repeatable)")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("papr", parents=[common], help="mean PAPR table over N and delta")
    s.add_argument("--n", type=int, nargs="+", default=[4, 8, 12, 16])
    s.add_argument("--delta", type=float, nargs="+", default=[0, 90, 180, 360])
    s.add_argument("--streams", type=int, default=1000)
    s.set_defaults(func=cmd_papr)

    s = sub.add_parser("phase-pdf", parents=[common], help="analytic and empirical tone-phase densities")
    s.add_argument("--tone", type=int, default=8)
    s.add_argument("--trials", type=int, default=100_000)
    s.set_defaults(func=cmd_phase_pdf)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
