"""Command-line front end.

Every subcommand appends records to ``<out>/records.jsonl``, regenerates
``summary.csv`` and ``plotdata.dat`` from the whole store, and prints the rows
of the current run. Exit status: 0 success, 2 validation error, 3 convergence
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
import time

import numpy as np

from ..errors import ConvergenceError, ValidationError, WaveMultError
from .config import COMMANDS, resolve
from .store import CheckRecord, RecordStore, default_out_dir, emit_report, series_id, summary_rows, _fmt

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE = 0, 2, 3


def _tag(records, case_settings: dict):
    sid = series_id(case_settings.get("case", ""), case_settings)
    return [dataclasses.replace(r, metadata={**r.metadata, "series": sid}, timestamp=r.timestamp) for r in records]


# -- subcommands ----------------------------------------------------------------


def cmd_partition_check(s) -> list:
    from ..decomp import angular_frame, flag_split
    from ..lattice import Field, fourier_transform, inverse_fourier_transform, make_grid, physical_field
    from ..operators import bilinear_multiplier_apply
    from ..symbols import make_dyadic_partition, power_symbol, theta

    n, trials = s["n"], s["trials"]
    rng = np.random.default_rng(s["seed"])
    part = make_dyadic_partition()
    out = []
    rho = np.linspace(0.0, 2.0**12, 200001)
    tele = max(float(np.max(np.abs(part.phi_low(rho) + sum(part.psi_j(rho, j) for j in range(1, k + 1))
                                     - part.g(rho * 2.0**-k)))) for k in range(1, 11))
    out.append(CheckRecord("partition-check", "telescoping", tele, 1e-12, n=n))
    pos = rho[(rho > 0) & (rho <= 2.0**10)]
    ident = float(np.max(np.abs(part.phi_low(pos) + sum(part.psi_j(pos, j) for j in range(1, 12)) - 1.0)))
    out.append(CheckRecord("partition-check", "resolution_of_identity", ident, 1e-12, n=n))
    plateau = max(float(np.max(np.abs(theta(rho * 2.0**-j) - 1.0)[part.psi_j(rho, j) != 0])) for j in range(1, 10))
    out.append(CheckRecord("partition-check", "theta_plateau", plateau, 1e-12, n=n))

    N = 64 if n == 2 else 256
    grid = make_grid(n, N, 2 * np.pi)
    rt = pv = prod = 0.0
    for _ in range(trials):
        a = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        f = physical_field(grid, a)
        F = fourier_transform(f)
        rt = max(rt, float(np.max(np.abs(inverse_fourier_transform(F).data - a)) / np.max(np.abs(a))))
        lhs = np.sum(np.abs(a) ** 2) * grid.cell
        rhs = np.sum(np.abs(F.data) ** 2) * grid.freq_cell / (2 * np.pi) ** n
        pv = max(pv, abs(lhs - rhs) / lhs)
        # band-limited inputs so the product stays under the guard
        cut = grid.freq_radius() < 0.45 * grid.guard
        fs = [inverse_fourier_transform(Field(grid, "frequency", np.where(cut, rng.standard_normal(grid.shape), 0),
                                              (0.0, 0.45 * grid.guard))) for _ in range(2)]
        t1 = bilinear_multiplier_apply(1.0, fs[0], fs[1]).data
        ref = fs[0].data * fs[1].data
        prod = max(prod, float(np.max(np.abs(t1 - ref)) / np.max(np.abs(ref))))
    out.append(CheckRecord("partition-check", "fft_round_trip", rt, 1e-12, n=n, metadata={"trials": trials}))
    out.append(CheckRecord("partition-check", "parseval", pv, 1e-10, n=n, metadata={"trials": trials}))
    out.append(CheckRecord("partition-check", "product_identity", prod, 1e-12, n=n, metadata={"trials": trials}))

    sig = power_symbol(-1.0, n)
    pieces = flag_split(sig, jmax=8, n=n)
    xi = rng.uniform(-100, 100, (2000, n))
    eta = rng.uniform(-100, 100, (2000, n))
    flag = float(np.max(np.abs(sum(p(xi, eta) for p in pieces) - sig(tuple(xi.T), tuple(eta.T)))))
    out.append(CheckRecord("partition-check", "flag_split_sum", flag, 1e-12, n=n))
    if n == 2:
        frame = angular_frame(s["j"])
        g2 = make_grid(2, 256, 2 * np.pi)
        fr = g2.freqs()
        mask = g2.freq_radius() > 0
        err = float(np.max(np.abs(frame.partition_sum(fr) - 1.0)[mask]))
        out.append(CheckRecord("partition-check", "angular_partition", err, 1e-10, n=2, metadata={"j": s["j"]}))
    return out


def cmd_kernel_scan(s) -> list:
    from ..kernels import (certify_plateau, grid_kernel, norm_profile, plateau_constant, plateau_profiles,
                           radial_lp_norm, radial_wave_kernel)
    from ..lattice import make_grid
    from ..sharpness import ExperimentRecord

    n, js = s["n"], list(range(s["jmin"], s["jmax"] + 1))
    if n != 2:
        raise ValidationError("kernel-scan is calibrated for n = 2")
    if len(js) < 3:
        raise ValidationError("kernel-scan needs at least 3 scales")
    profiles = [norm_profile(j, n) for j in js]
    records = []
    for p in s["p"]:
        expected = (n + 1) / 2 - (0.0 if math.isinf(p) else 1.0 / p)
        recs = []
        for j, prof in zip(js, profiles):
            v = radial_lp_norm(prof, p)
            recs.append(ExperimentRecord(f"kernel-L{_fmt(p)}", j, n, p, None, None, v, v, {},
                                         {"expected": expected, "tol": 0.1}))
        records += _tag(recs, {"case": "kernel", "p": p, "js": js})
    if s["plateau"]:
        c0 = plateau_constant(n=n)
        cert = certify_plateau(plateau_profiles(list(range(1, s["jmax"] + 1)), n), c0)
        records.append(CheckRecord("kernel-scan", "plateau_j0", cert.j0, 8, n=n,
                                   metadata={"delta": cert.delta, "c0": c0, "jmax": s["jmax"]}))
        records.append(CheckRecord("kernel-scan", "plateau_delta", cert.delta, 0.05, "min", n=n))
        grid = make_grid(2, 512, 8.0)
        row = grid_kernel(6, grid).data[:, grid.N // 2]
        x = grid.x_axis()
        sel = (x > 0.5) & (x < 1.5)
        ref = radial_wave_kernel(6, 2, x[sel]).values
        rel = float(np.max(np.abs(ref - row[sel])) / np.max(np.abs(ref)))
        records.append(CheckRecord("kernel-scan", "quadrature_vs_fft", rel, 1e-3, n=2, metadata={"j": 6}))
    return records


def cmd_l1_probe(s) -> list:
    from ..kernels import l1_scaling_probe
    from ..sharpness import ExperimentRecord
    from ..symbols import make_wave_phase

    n, js = s["n"], list(range(s["jmin"], s["jmax"] + 1))
    phase = make_wave_phase(s["phase"], n)
    rep = l1_scaling_probe(phase, js, s["variant"])
    expected = (n - 1) / 2 if s["variant"] == "highpass" else 0.0
    recs = [ExperimentRecord(f"l1-{s['variant']}", j, n, 1.0, None, None, v, v, {},
                             {"expected": expected, "tol": 0.15, "phase": s["phase"]}) for j, v in zip(js, rep.values)]
    return _tag(recs, {"case": "l1", **s})


def cmd_angular_check(s) -> list:
    from ..decomp import angular_frame, angular_piece_bounds
    from ..sharpness import ExperimentRecord
    from ..symbols import make_wave_phase

    phase = make_wave_phase(s["phase"], 2)
    js = list(range(s["jmin"], s["jmax"] + 1))
    recs, checks, means, trans = [], [], [], []
    for j in js:
        frame = angular_frame(j)
        r = np.geomspace(2.0 ** (j - 1), 2.0 ** (j + 1), 64)[:, None]
        ang = np.linspace(0, 2 * np.pi, 4096, endpoint=False)[None, :]
        err = float(np.max(np.abs(frame.partition_sum((r * np.cos(ang), r * np.sin(ang))) - 1.0)))
        checks.append(CheckRecord("angular-check", "frame_partition", err, 1e-10, n=2, metadata={"j": j}))
        rep = angular_piece_bounds(frame, phase, sample=s["sample"])
        means.append(rep.mean_l1)
        trans.append(rep.envelope_transverse)
        recs.append(ExperimentRecord("angular", j, 2, 1.0, None, None, rep.total_l1, rep.total_l1,
                                     {"mean_piece_l1": rep.mean_l1, "count": rep.count,
                                      "transverse_C": rep.envelope_transverse,
                                      "longitudinal_C": rep.envelope_longitudinal},
                                     {"expected": 0.5, "tol": 0.15}))
    checks.append(CheckRecord("angular-check", "piece_l1_uniformity", max(means) / min(means), 2.0, n=2))
    checks.append(CheckRecord("angular-check", "transverse_envelope_uniformity", max(trans) / min(trans), 2.0, n=2))
    return _tag(recs, {"case": "angular", **s}) + checks


def cmd_expand_symbol(s) -> list:
    from ..decomp import block_symbol, fourier_symbol_expansion
    from ..lattice import make_grid, physical_field
    from ..operators import bilinear_multiplier_apply, dense_bilinear_oracle
    from ..symbols import power_symbol

    n, j, k = s["n"], s["j"], s["k"]
    sig = power_symbol(s["m"], n)
    E = fourier_symbol_expansion(sig, j, k, n, radius=s["radius"] or None)
    rng = np.random.default_rng(s["seed"])
    xi = rng.uniform(-3 * 2.0**j, 3 * 2.0**j, (s["points"], n))
    eta = rng.uniform(-3 * 2.0**k, 3 * 2.0**k, (s["points"], n))
    err = float(np.max(np.abs(E.evaluate(xi, eta) - block_symbol(sig, j, k, n)(xi, eta))))
    meta = {"j": j, "tail_bound": E.tail_bound, "rank": E.rank}
    out = [
        CheckRecord("expand-symbol", "reconstruction_within_tail", err, E.tail_bound, n=n, metadata=meta),
        CheckRecord("expand-symbol", "decay_exponent", E.decay_exponent, 2.0, "min", n=n, metadata={"j": j}),
    ]
    # the comparison is a discrete identity, so unbanded random inputs are fine
    N = 32
    grid = make_grid(n, N, 4 * np.pi)
    f = physical_field(grid, rng.standard_normal(grid.shape))
    g = physical_field(grid, rng.standard_normal(grid.shape))
    a = bilinear_multiplier_apply(E, f, g).data
    b = dense_bilinear_oracle(E, f, g).data
    rel = float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
    out.append(CheckRecord("expand-symbol", "fast_vs_dense", rel, 1e-8, n=n, metadata={"j": j, "N": N}))
    return out


def _sharp_cfg(s, **extra):
    from ..sharpness import SharpnessConfig

    dp = s.get("delta_prime") or None
    return SharpnessConfig(n=s["n"], p=s["p"], q=s["q"], j_min=s["jmin"], j_max=s["jmax"], delta=s["delta"],
                           delta_prime=dp, seed=s["seed"], **extra)


def cmd_sharpness(s) -> list:
    from ..sharpness import run_case1, run_case2, run_case3

    case = str(s["case"])
    runner = {"1": run_case1, "2": run_case2, "3": run_case3}.get(case)
    if runner is None:
        raise ValidationError(f"unknown case {case!r} (expected 1, 2 or 3)")
    if case == "3" and not s.get("delta_prime"):
        s = {**s, "delta_prime": 0.25}
    cfg = _sharp_cfg(s, draws=s["draws"])
    records, _ = runner(cfg)
    return _tag(records, {"case": case, **cfg.as_dict()})


def cmd_upper_bound(s) -> list:
    from ..sharpness import upper_bound_sweep

    out = []
    for m in s["m"]:
        cfg = _sharp_cfg(s)
        records, _ = upper_bound_sweep(cfg, m, family=s["family"])
        out += _tag(records, {"case": "ub", "m": m, "family": s["family"], **cfg.as_dict()})
    return out


HANDLERS = {
    "partition-check": cmd_partition_check,
    "kernel-scan": cmd_kernel_scan,
    "l1-probe": cmd_l1_probe,
    "angular-check": cmd_angular_check,
    "expand-symbol": cmd_expand_symbol,
    "sharpness": cmd_sharpness,
    "upper-bound": cmd_upper_bound,
}


# -- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wavemult", description="Bilinear wave-multiplier laboratory.")
    ap.add_argument("--config", help="INI file with one section per subcommand")
    ap.add_argument("--out", help="output directory (default: $WAVEMULT_OUT or ./wavemult-out)")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, help=help_, argument_default=None)

    p = add("partition-check", "partition-of-unity, transform and product identities")
    p.add_argument("--n", type=int)
    p.add_argument("--j", type=int, help="angular frame scale")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)

    p = add("kernel-scan", "kernel norm slopes and plateau certificate")
    p.add_argument("--n", type=int)
    p.add_argument("--jmin", type=int)
    p.add_argument("--jmax", type=int)
    p.add_argument("--p", type=float, nargs="+")
    p.add_argument("--plateau", type=int, choices=(0, 1))

    p = add("l1-probe", "L1 norms of wave-multiplier kernels across scales")
    p.add_argument("--n", type=int)
    p.add_argument("--jmin", type=int)
    p.add_argument("--jmax", type=int)
    p.add_argument("--variant", choices=("highpass", "lowpass"))
    p.add_argument("--phase", choices=("euclidean", "ellipse", "linear"))

    p = add("angular-check", "second dyadic decomposition checks")
    p.add_argument("--jmin", type=int)
    p.add_argument("--jmax", type=int)
    p.add_argument("--sample", type=int)
    p.add_argument("--phase", choices=("euclidean", "ellipse", "linear"))

    p = add("expand-symbol", "separable expansion of one dyadic block of (1+|xi|^2+|eta|^2)^(m/2)")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=float)
    p.add_argument("--j", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--radius", type=int)
    p.add_argument("--points", type=int)
    p.add_argument("--seed", type=int)

    p = add("sharpness", "lower-bound experiments (cases 1-3)")
    p.add_argument("--case", choices=("1", "2", "3"))
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--jmin", type=int)
    p.add_argument("--jmax", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--delta-prime", dest="delta_prime", type=float)
    p.add_argument("--draws", type=int)
    p.add_argument("--seed", type=int)

    p = add("upper-bound", "consistency sweeps of the boundedness order")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--m", type=float, nargs="+")
    p.add_argument("--family", choices=("sigma_j", "power"))
    p.add_argument("--jmin", type=int)
    p.add_argument("--jmax", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--delta-prime", dest="delta_prime", type=float)
    p.add_argument("--seed", type=int)

    p = add("report", "regenerate summary.csv / plotdata.dat / report.jsonl from the store")
    p.add_argument("--format", choices=("csv", "jsonl", "plotdata", "all"))
    return ap


def _print_rows(rows, stream) -> None:
    cols = ("case", "n", "p", "q", "m", "j", "value", "ratio", "slope", "stderr", "r2", "verdict")
    stream.write(",".join(cols) + "\n")
    for r in rows:
        stream.write(",".join(_fmt(r[c]) for c in cols) + "\n")


def run(argv=None, stdout=None, stderr=None) -> int:
    """Execute one subcommand; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out")}
    try:
        cfg = resolve(args.command, flags, args.config)
        store = RecordStore(args.out or cfg.out_dir or default_out_dir())
        if args.command == "report":
            for path in emit_report(store, cfg["format"]):
                stdout.write(f"wrote {path}\n")
            return EXIT_OK
        t0 = time.time()
        records = HANDLERS[args.command](dict(cfg.settings))
        store.append(records)
        emit_report(store, "all")
        _print_rows(summary_rows(records), stdout)
        stdout.write(f"# {len(records)} records in {time.time() - t0:.1f}s -> {store.path}\n")
    except ConvergenceError as exc:
        stderr.write(f"convergence failure: {exc}\n")
        if exc.diagnostics:
            stderr.write(f"diagnostics: {exc.diagnostics}\n")
        return EXIT_CONVERGENCE
    except (ValidationError, WaveMultError, OSError) as exc:
        stderr.write(f"validation error ({type(exc).__name__}): {exc}\n")
        return EXIT_VALIDATION
    return EXIT_OK


def main() -> None:
    sys.exit(run())


assert set(HANDLERS) | {"report"} == set(COMMANDS)
