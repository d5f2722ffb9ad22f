"""Command-line front end.

Subcommands: optimize, simulate, sweep, trap-freq, logical, verify.  Every
run writes (or prints) a manifest with the fully resolved configuration;
``rydgate --replay MANIFEST`` re-runs it.  Exit codes: 0 ok, 1 usage,
2 numerical failure, 3 infeasible.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .model import Errors, GateTarget, PhysicalParams, PulseWaveform

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_INFEASIBLE = 0, 1, 2, 3

log = logging.getLogger("rydgate")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# units

_SCALE = {
    "K": 1.0, "mK": 1e-3, "uK": 1e-6, "nK": 1e-9,
    "s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9,
    "Hz": 2 * math.pi, "kHz": 2 * math.pi * 1e3, "MHz": 2 * math.pi * 1e6,
    "m": 1.0, "um": 1e-6, "nm": 1e-9,
    "/s": 1.0,
}
_KIND = {"K": "temperature", "mK": "temperature", "uK": "temperature", "nK": "temperature",
         "s": "time", "ms": "time", "us": "time", "ns": "time", "Hz": "frequency",
         "kHz": "frequency", "MHz": "frequency", "m": "length", "um": "length", "nm": "length",
         "/s": "rate"}


def parse_quantity(text, kind=None):
    """``"20uK"`` -> (2e-5, "temperature"); plain numbers return (value, None).

    Cyclic frequencies (Hz, kHz, MHz) are converted to angular frequencies.
    """
    m = re.fullmatch(r"\s*([-+0-9.eE]+)\s*([a-zA-Z/]*)\s*", str(text))
    if not m:
        raise UsageError(f"cannot parse quantity {text!r}")
    try:
        val = float(m.group(1))
    except ValueError:
        raise UsageError(f"cannot parse quantity {text!r}") from None
    unit = m.group(2)
    if not unit:
        return val, None
    if unit not in _SCALE:
        raise UsageError(f"unknown unit {unit!r} in {text!r}")
    if kind and _KIND[unit] != kind:
        raise UsageError(f"{text!r} is not a {kind}")
    return val * _SCALE[unit], _KIND[unit]


def parse_temperature(text) -> float:
    v, k = parse_quantity(text, "temperature")
    return v   # plain numbers are kelvin


def parse_duration(text, params: PhysicalParams) -> float:
    """Dimensionless duration (plain number) or SI time with a suffix."""
    v, k = parse_quantity(text)
    if k is None:
        return v
    if k != "time":
        raise UsageError(f"{text!r} is not a time")
    return v * params.omega_max


def parse_range(text, parser=float):
    """``start:stop:n`` (inclusive, linear) or a comma-separated list."""
    if text is None or str(text).strip() == "":
        raise UsageError("empty grid")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"range {text!r} must be start:stop:n")
        n = int(parts[2])
        if n < 1:
            raise UsageError("grid must be non-empty")
        return list(np.linspace(parser(parts[0]), parser(parts[1]), n))
    vals = [parser(s) for s in text.split(",") if s.strip()]
    if not vals:
        raise UsageError("empty grid")
    return vals


def build_params(args) -> PhysicalParams:
    base = PhysicalParams()
    kw = {}
    if getattr(args, "omega_max", None):
        kw["omega_max"] = parse_quantity(args.omega_max, "frequency")[0]
    if getattr(args, "trap_freq", None):
        kw["trap_freq"] = parse_quantity(args.trap_freq, "frequency")[0]
    if getattr(args, "wavelength", None):
        kw["wavevector"] = 2 * math.pi / parse_quantity(args.wavelength, "length")[0]
    if getattr(args, "lifetime", None):
        kw["gamma"] = 1 / parse_quantity(args.lifetime, "time")[0]
    if getattr(args, "zeta", None) is not None:
        kw["zeta"] = args.zeta
    if getattr(args, "erasure_fraction", None) is not None:
        kw["erasure_fraction"] = args.erasure_fraction
    try:
        return replace(base, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# --------------------------------------------------------------------------
# helpers


STARK_VARIANT = {"AR": "SSR1", "ADR": "SSR_ADR", "CADR": "SSR_CADR"}


def _label(ref: str, pulse: PulseWaveform) -> str:
    from .pulses import FILES
    return ref if ref in FILES else (pulse.label or Path(ref).stem)


def _load_pulse(ref: str, zeta: float = 0.0) -> PulseWaveform:
    """Shipped name or JSON file.

    With a light shift, shipped AR/ADR/CADR names resolve to their
    Stark-robust variant for that ``zeta`` when one is shipped.
    """
    from .pulses import FILES, load_pulse
    if ref in FILES:
        if zeta and ref in STARK_VARIANT:
            alt = f"{STARK_VARIANT[ref]}_{zeta:g}"
            if alt in FILES:
                log.info("using %s for %s at zeta=%g", alt, ref, zeta)
                return load_pulse(alt)
            log.warning("no shipped Stark-robust %s for zeta=%g; using %s", ref, zeta, ref)
        return load_pulse(ref)
    path = Path(ref)
    if not path.is_file():
        raise UsageError(f"pulse {ref!r} is neither a file nor a shipped pulse name")
    try:
        return PulseWaveform.from_dict(json.loads(path.read_text()))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{ref}: not valid JSON ({exc})") from None
    except ValueError as exc:
        raise UsageError(f"{ref}: {exc}") from None


def _write_json(obj, path):
    text = json.dumps(obj, indent=1, default=_json_default)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    return str(o)


def _manifest(args, extra=None) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    man = {"tool": "rydgate", "version": __version__, "command": args.command, "config": cfg,
           "seed": getattr(args, "seed", None)}
    if extra:
        man["resolved"] = extra
    return man


def _emit_manifest(args, out_path, extra=None):
    man = _manifest(args, extra)
    if out_path:
        Path(str(out_path) + ".manifest.json").write_text(
            json.dumps(man, indent=1, default=_json_default) + "\n")
    return man


def _set_threads(args):
    n = args.threads or os.environ.get("RYD_THREADS")
    if n:
        try:
            import numba
            numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
        except ValueError:
            raise UsageError(f"invalid thread count {n!r}") from None


# --------------------------------------------------------------------------
# commands


def cmd_optimize(args) -> int:
    from .optimize import find_minimal_duration, make_spec, optimize_detuning_optimal, \
        optimize_pulse
    try:
        spec = make_spec(args.spec, args.zeta or 0.0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    params = build_params(args)
    if spec.name == "DETOPT":
        res = optimize_detuning_optimal(args.n_segments or 350, args.seed, args.restarts)
        status = EXIT_OK if res.F > 1 - 1e-6 else EXIT_NUMERIC
        feasible = True
        tau_star = res.pulse.duration
    elif args.find_min_tau or args.tau is None:
        lo = parse_duration(args.tau_lower, params)
        hi = parse_duration(args.tau_upper, params)
        mres = find_minimal_duration(spec, lo, hi, args.tol, args.seed, args.restarts,
                                     args.n_segments)
        res, feasible, tau_star = mres.best, mres.feasible, mres.tau_star
        status = EXIT_OK if feasible else EXIT_INFEASIBLE
    else:
        tau = parse_duration(args.tau, params)
        if not tau > 0:
            raise UsageError("--tau must be positive")
        res = optimize_pulse(spec, tau, args.n_segments, args.seed, args.restarts)
        feasible, tau_star = res.success, None
        status = EXIT_OK if res.success else EXIT_INFEASIBLE
    out = res.to_dict()
    out.update({"feasible": feasible, "tau_star": tau_star})
    if args.out and feasible:
        res.pulse.save(args.out)
    out["manifest"] = _emit_manifest(args, args.out or args.result)
    _write_json(out, args.result)
    if status == EXIT_INFEASIBLE:
        print(f"rydgate: no pulse with J < 1e-8 found for {spec.name} "
              f"(best J = {res.J:.3e})", file=sys.stderr)
    return status


def _noise_from_args(args, params):
    from .noisesim import NoiseModel, Sampler
    from .trap import ReversalMethod
    sampler = Sampler.MONTE_CARLO if args.sampler == "mc" else Sampler.QUADRATURE
    try:
        return NoiseModel(sigma_eps=args.sigma_eps, temperature=parse_temperature(args.T),
                          params=params, reversal=ReversalMethod[args.method.upper()],
                          modulation=not args.no_modulation,
                          correlated_eps=not args.independent_eps, sampler=sampler,
                          shots=args.shots, seed=args.seed, decay=not args.no_decay,
                          stark=not args.no_stark)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    from .noisesim import CSV_COLUMNS, simulate_gate
    from .propagate import bell_fidelity, evolve_exact, ideal_phases
    params = build_params(args)
    zeta = 0.0 if args.no_stark else params.zeta
    pulses = {ref: _load_pulse(ref, zeta) for ref in args.pulse}
    rows = []
    if args.eps_scan:
        eps = parse_range(args.eps_scan)
        gamma = 0.0 if args.no_decay else params.gamma_dimless
        for ref, p in pulses.items():
            theta = ideal_phases(p, GateTarget())
            for e in eps:
                rep = bell_fidelity(evolve_exact(p, Errors(e, e), gamma=gamma, zeta=zeta),
                                    phase_policy="frozen", theta=theta)
                rows.append({"pulse_label": _label(ref, p), "eps": e, "F": rep.F, "Fc": rep.F_c,
                             "p_d": rep.p_d, "infidelity": 1 - rep.F})
        cols = ["pulse_label", "eps", "F", "Fc", "p_d", "infidelity"]
    else:
        noise = _noise_from_args(args, params)
        for ref, p in pulses.items():
            try:
                b = simulate_gate(p, noise, label=_label(ref, p))
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            rows.append(b.to_row())
        cols = CSV_COLUMNS
    _write_csv(rows, cols, args.out)
    _emit_manifest(args, args.out)
    return EXIT_OK


def _write_csv(rows, cols, path):
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        wr = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        wr.writeheader()
        for r in rows:
            wr.writerow(r)
    finally:
        if path:
            fh.close()


def cmd_sweep(args) -> int:
    from .noisesim import sweep
    params = build_params(args)
    sig = parse_range(args.sigma_grid)
    Ts = parse_range(args.T_grid, parse_temperature)
    pulses = {}
    zeta = 0.0 if args.no_stark else params.zeta
    for ref in args.pulse:
        p = _load_pulse(ref, zeta)
        pulses[_label(ref, p)] = p
    noise = _noise_from_args(args, params)
    res = sweep(pulses, sig, Ts, noise, metric=args.metric)
    if args.logical:
        from .logical import build_code, logical_rate
        code = build_code(args.d)
        for grid in res.budgets.values():
            for row in grid:
                for b in row:
                    b.p_L = logical_rate(b, code, args.logical_shots, args.seed).p_L
        if args.metric == "p_L":
            res = type(res)(res.sigma_grid, res.T_grid, res.budgets, _argmin(res, "p_L"))
    res.to_csv(args.out) if args.out else _write_csv(list(res.rows()), _cols(), None)
    amap = {"sigma_grid": list(map(float, res.sigma_grid)), "T_grid": list(map(float, res.T_grid)),
            "best": res.argmin.tolist()}
    if args.out:
        Path(str(args.out) + ".argmin.json").write_text(json.dumps(amap, indent=1) + "\n")
    else:
        print(json.dumps(amap))
    _emit_manifest(args, args.out)
    return EXIT_OK


def _cols():
    from .noisesim import CSV_COLUMNS
    return CSV_COLUMNS


def _argmin(res, metric):
    from .noisesim import _metric
    labels = list(res.budgets)
    best = np.empty(res.argmin.shape, dtype=object)
    for i in range(best.shape[0]):
        for j in range(best.shape[1]):
            vals = [_metric(res.budgets[l][i][j], metric) for l in labels]
            best[i, j] = labels[int(np.argmin(vals))]
    return best


def cmd_trap_freq(args) -> int:
    from .trap import NoSolutionError, find_modulation_frequency, mathieu_exponent
    params = build_params(args)
    m = args.mass * 1.66053906660e-27 if args.mass else params.mass
    if args.V0 is not None:
        V0 = args.V0
    else:
        # stiffness giving Floquet frequency equal to the configured trap frequency
        from .trap import modulation_ratio
        try:
            c = modulation_ratio(args.dn)
        except NoSolutionError as exc:
            print(f"rydgate: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        V0 = 0.5 * m * (2 * args.dn * params.trap_freq / c) ** 2
    try:
        nu, om = find_modulation_frequency(V0, m, args.dn)
    except NoSolutionError as exc:
        _write_json({"dn": args.dn, "stable": False, "error": str(exc),
                     "manifest": _manifest(args)}, args.out)
        return EXIT_INFEASIBLE
    res = mathieu_exponent(V0, m, nu)
    _write_json({"nu": nu, "omega_tr": om, "stable": res.stable, "dn": args.dn, "V0": V0,
                 "nu_over_sqrt_2V0_m": nu / math.sqrt(2 * V0 / m),
                 "manifest": _manifest(args)}, args.out)
    return EXIT_OK


def cmd_logical(args) -> int:
    from .logical import build_code, sample_and_decode, stratified_estimate
    try:
        code = build_code(args.d)
        if args.method == "direct":
            est = sample_and_decode(code, args.pe, args.pp, args.shots, args.seed)
        else:
            est = stratified_estimate(code, args.pe, args.pp, args.shots, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _write_json({"p_L": est.p_L, "stderr": est.stderr, "shots": est.shots,
                 "method": est.method, "manifest": _manifest(args)}, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from . import verify
    suites = verify.SUITES if args.suite == "all" else [args.suite]
    rows = []
    bad = [s for s in suites if s not in verify.SUITES]
    if bad:
        raise UsageError(f"unknown suite {bad[0]!r}; choose from {verify.SUITES} or all")
    pulse = _load_pulse(args.pulse) if args.pulse else None
    for s in suites:
        rows += verify.run(s, pulse=pulse)
    width = max(len(r[0]) for r in rows)
    for name, ok, detail in rows:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_NUMERIC


# --------------------------------------------------------------------------
# parser


def _add_physics(p):
    p.add_argument("--omega-max", help="Rabi frequency as cyclic frequency, e.g. 5.5MHz")
    p.add_argument("--trap-freq", help="trap frequency, e.g. 50kHz")
    p.add_argument("--wavelength", help="effective wavelength 2 pi / k, e.g. 302nm")
    p.add_argument("--lifetime", help="Rydberg lifetime, e.g. 100us")
    p.add_argument("--zeta", type=float, default=None, help="light-shift coupling")
    p.add_argument("--erasure-fraction", type=float, default=None)


def _add_noise(p):
    p.add_argument("--sigma-eps", type=float, default=0.0)
    p.add_argument("--T", default="0", help="temperature, e.g. 20uK (plain numbers are K)")
    p.add_argument("--method", choices=["wait", "switch"], default="wait")
    p.add_argument("--no-modulation", action="store_true")
    p.add_argument("--independent-eps", action="store_true")
    p.add_argument("--sampler", choices=["quadrature", "mc"], default="quadrature")
    p.add_argument("--shots", type=int, default=4000)
    p.add_argument("--no-decay", action="store_true")
    p.add_argument("--no-stark", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rydgate", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=None, help="worker cap (env RYD_THREADS)")
    ap.add_argument("--replay", metavar="MANIFEST", help="re-run a manifest")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("optimize", help="synthesize a pulse")
    p.add_argument("--spec", required=True,
                   help="TO, AR, DR, ADR, CADR, SSR1, SSR2, SSR_ADR, SSR_CADR, DETOPT, DETFULL")
    p.add_argument("--tau", default=None, help="duration (1/omega_max, or with time unit)")
    p.add_argument("--find-min-tau", action="store_true")
    p.add_argument("--tau-lower", default="4")
    p.add_argument("--tau-upper", default="16")
    p.add_argument("--tol", type=float, default=0.02)
    p.add_argument("--n-segments", "-N", type=int, default=None)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="pulse JSON path")
    p.add_argument("--result", help="result JSON path (default stdout)")
    _add_physics(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", help="gate budget of pulses under noise")
    p.add_argument("pulse", nargs="+", help="pulse JSON files or shipped names")
    p.add_argument("--eps-scan", help="static amplitude-error scan start:stop:n")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (default stdout)")
    _add_noise(p)
    _add_physics(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="budgets on a (sigma_eps, T) grid")
    p.add_argument("pulse", nargs="+")
    p.add_argument("--sigma-grid", required=True, help="start:stop:n or list")
    p.add_argument("--T-grid", required=True, help="start:stop:n or list, e.g. 0:50e-6:6")
    p.add_argument("--metric", choices=["infidelity", "conditional", "p_L"],
                   default="infidelity")
    p.add_argument("--logical", action="store_true", help="also estimate p_L per cell")
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--logical-shots", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    _add_noise(p)
    _add_physics(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trap-freq", help="modulation frequency of the modulated trap")
    p.add_argument("--V0", type=float, default=None, help="stiffness V0 (J/m^2)")
    p.add_argument("--mass", type=float, default=None, help="mass in u")
    p.add_argument("--dn", type=int, default=2)
    p.add_argument("--out")
    _add_physics(p)
    p.set_defaults(func=cmd_trap_freq)

    p = sub.add_parser("logical", help="XZZX logical error rate")
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--pe", type=float, required=True)
    p.add_argument("--pp", type=float, required=True)
    p.add_argument("--shots", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=["direct", "stratified"], default="direct")
    p.add_argument("--out")
    p.set_defaults(func=cmd_logical)

    p = sub.add_parser("verify", help="invariant suites")
    p.add_argument("suite", help="gradients, overlap, mathieu, decoder, norm or all")
    p.add_argument("--pulse", help="pulse for the overlap suite")
    p.set_defaults(func=cmd_verify)
    return ap


_RANGE_OPTS = ("--eps-scan", "--sigma-grid", "--T-grid")


def _join_negative_ranges(argv):
    """``--eps-scan -0.05:0.05:11`` -> ``--eps-scan=-0.05:0.05:11``.

    argparse reads a leading minus as an option unless the token is a bare
    number, which a range is not.
    """
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in _RANGE_OPTS and i + 1 < len(argv) and argv[i + 1][:1] == "-" \
                and argv[i + 1][1:2] in "0123456789.":
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def main(argv=None) -> int:
    ap = build_parser()
    argv = _join_negative_ranges(list(sys.argv[1:] if argv is None else argv))
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.replay:
            man = json.loads(Path(args.replay).read_text())
            ns = argparse.Namespace(**man["config"])
            ns.replay = None
            args = ns
            args.func = {"optimize": cmd_optimize, "simulate": cmd_simulate, "sweep": cmd_sweep,
                         "trap-freq": cmd_trap_freq, "logical": cmd_logical,
                         "verify": cmd_verify}[ns.command]
        if not getattr(args, "command", None):
            ap.print_usage(sys.stderr)
            return EXIT_USAGE
        _set_threads(args)
        return args.func(args)
    except UsageError as exc:
        print(f"rydgate: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"rydgate: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
