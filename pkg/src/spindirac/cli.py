"""Command-line front end: experiment configuration, JSON/CSV reports, plots.

Subcommands: spectrum, discretize, optimize, verify-bar, verify-torus,
veronese, energy.  Every run writes a JSON document
{schema_version, config, results, diagnostics, provenance} that is
byte-identical for identical config and seed (sorted keys, no timestamps);
optimize also writes a CSV trace, and any command accepts --plot-script to
emit a standalone matplotlib script referencing its outputs.  Exit codes:
0 pass, 2 assertion failure, 3 input error, 4 solver failure.

SPINDIRAC_THREADS caps the BLAS/OpenMP thread pools; it is applied before
the numerical stack is imported, which is why all heavy imports live inside
the handlers.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile

SCHEMA_VERSION = "1"

TOLERANCES = {
    "torus_flat_match": 1e-4,
    "torus_variance": 1e-5,
    "torus_lower_slack": 1e-6,
    "bar_bound_slack": 1e-6,
    "veronese_harmonic": 1e-8,
    "veronese_alignment": 1e-9,
    "veronese_induced": 1e-8,
    "veronese_energy_rel": 1e-6,
    "veronese_density": 1e-8,
    "veronese_qtensor_rel": 1e-6,
    "veronese_conformality": 1e-8,
    "degree_integrality": 1e-6,
    "great_circle_coordinate": 1e-9,
}


def _apply_thread_cap():
    cap = os.environ.get("SPINDIRAC_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                    "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".spindirac-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _emit(args, config: dict, results: dict, diagnostics: dict):
    import spindirac
    document = {
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "results": results,
        "diagnostics": diagnostics,
        "provenance": {
            "toolkit": "spindirac",
            "version": spindirac.__version__,
            "tolerances": TOLERANCES,
        },
    }
    text = json.dumps(document, sort_keys=True, indent=2, default=float) + "\n"
    if getattr(args, "out", None):
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def _write_csv(path: str, header: list, rows: list):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".spindirac-")
    with os.fdopen(fd, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def _emit_plot_script(path: str, csv_path: str, title: str, columns: tuple):
    script = f"""#!/usr/bin/env python3
# standalone plot script; needs matplotlib + the CSV next to it
import csv

import matplotlib.pyplot as plt

xs, ys = [], []
with open({csv_path!r}) as handle:
    reader = csv.DictReader(handle)
    for row in reader:
        xs.append(float(row[{columns[0]!r}]))
        ys.append(float(row[{columns[1]!r}]))
fig, ax = plt.subplots()
ax.plot(xs, ys, marker="o", markersize=2)
ax.set_xlabel({columns[0]!r})
ax.set_ylabel({columns[1]!r})
ax.set_title({title!r})
fig.savefig({(csv_path + ".png")!r}, dpi=150)
print("wrote", {(csv_path + ".png")!r})
"""
    _atomic_write(path, script)


def _geometry(a: float, b: float, spin: tuple):
    from .lattice import LatticeBasis, SpinCharacter, TorusGeometry
    return TorusGeometry(LatticeBasis(a, b), SpinCharacter(*spin))


def _parse_omega(args, geometry):
    from .torus import FourierField
    coeffs = {}
    if getattr(args, "omega_coeffs", None):
        raw = json.loads(args.omega_coeffs)
        for key, val in raw.items():
            m, n = (int(part) for part in key.split(","))
            coeffs[(m, n)] = complex(val[0], val[1])
    preset = getattr(args, "omega_preset", None)
    amp = getattr(args, "omega_amplitude", 0.1)
    if preset == "cosx":
        coeffs[(1, 0)] = coeffs.get((1, 0), 0.0) + amp / 2
        coeffs[(-1, 0)] = coeffs.get((-1, 0), 0.0) + amp / 2
    elif preset == "cosy":
        coeffs[(0, 1)] = coeffs.get((0, 1), 0.0) + amp / 2
        coeffs[(0, -1)] = coeffs.get((0, -1), 0.0) + amp / 2
    elif preset == "random":
        import numpy as np
        rng = np.random.default_rng(getattr(args, "seed", 0))
        for key in ((1, 0), (0, 1), (1, 1), (-1, 1)):
            c = amp * (rng.standard_normal() + 1j * rng.standard_normal()) / 4
            coeffs[key] = coeffs.get(key, 0.0) + c
            neg = (-key[0], -key[1])
            coeffs[neg] = coeffs.get(neg, 0.0) + complex(c).conjugate()
    elif preset is not None:
        raise ValueError(f"unknown omega preset {preset!r}")
    return FourierField(geometry, coeffs) if coeffs else None


def _report_to_dict(report):
    return {
        "area": report.area,
        "kernel_quaternionic_dim": report.kernel_quaternionic_dim,
        "eigenvalues": [
            {"value": e.eigenvalue, "complex_mult": e.complex_multiplicity,
             "quaternionic_mult": e.quaternionic_multiplicity}
            for e in report.entries
        ],
    }


def cmd_spectrum(args) -> int:
    from .spectra import normalized, sphere_spectrum, torus_spectrum
    if args.sphere:
        report = sphere_spectrum(args.count)
        config = {"command": "spectrum", "sphere": True, "count": args.count}
    else:
        geometry = _geometry(args.torus[0], args.torus[1], tuple(args.spin))
        report = torus_spectrum(geometry, args.count)
        config = {"command": "spectrum", "torus": args.torus, "spin": args.spin,
                  "count": args.count}
    results = _report_to_dict(report)
    results["lambda_1"] = report.eigenvalue(1)
    results["lambda_bar_1"] = normalized(report, 1).value
    _emit(args, config, results, {})
    return 0


def cmd_discretize(args) -> int:
    from .spectra import normalized
    if args.sphere:
        from .sphere import SphereConformalFactor, solve_conformal_sphere
        coeffs = {}
        if args.omega_coeffs:
            raw = json.loads(args.omega_coeffs)
            for key, val in raw.items():
                l, m = (int(part) for part in key.split(","))
                coeffs[(l, m)] = complex(val[0], val[1])
        omega = SphereConformalFactor(coeffs) if coeffs else None
        report, _ = solve_conformal_sphere(omega, args.jmax)
        config = {"command": "discretize", "sphere": True, "jmax": args.jmax,
                  "omega_coeffs": args.omega_coeffs}
    else:
        from .torus import solve_conformal
        geometry = _geometry(args.torus[0], args.torus[1], tuple(args.spin))
        omega = _parse_omega(args, geometry)
        report, _ = solve_conformal(geometry, omega, args.cutoff)
        config = {"command": "discretize", "torus": args.torus, "spin": args.spin,
                  "cutoff": args.cutoff, "omega_coeffs": args.omega_coeffs,
                  "omega_preset": args.omega_preset,
                  "omega_amplitude": args.omega_amplitude}
    results = _report_to_dict(report)
    results["lambda_bar_1"] = normalized(report, 1).value
    _emit(args, config, results, {})
    return 0


def cmd_optimize(args) -> int:
    from .optimize import minimize
    geometry = _geometry(args.a, args.b, tuple(args.spin))
    omega0 = _parse_omega(args, geometry)
    state = minimize(geometry, omega0, max_steps=args.max_steps, tol=args.tol,
                     cutoff=args.cutoff, exploratory=args.exploratory)
    rows = [(r.iteration, r.lambda_bar_1, r.area, r.gradient_norm, r.omega_variance)
            for r in state.trace]
    config = {"command": "optimize", "a": args.a, "b": args.b, "spin": args.spin,
              "max_steps": args.max_steps, "tol": args.tol, "cutoff": args.cutoff,
              "seed": args.seed, "omega_preset": args.omega_preset,
              "omega_amplitude": args.omega_amplitude,
              "omega_coeffs": args.omega_coeffs, "exploratory": args.exploratory}
    results = {
        "status": state.status,
        "iterations": len(state.trace) - 1,
        "final": {"lambda_bar_1": state.final.lambda_bar_1, "area": state.final.area,
                  "gradient_norm": state.final.gradient_norm,
                  "omega_variance": state.final.omega_variance},
        "final_omega": {f"{k[0]},{k[1]}": [c.real, c.imag]
                        for k, c in sorted(state.omega.coefficients.items())},
    }
    if args.trace:
        _write_csv(args.trace, ["iteration", "lambda_bar_1", "area",
                                "gradient_norm", "omega_variance"], rows)
        if args.plot_script:
            _emit_plot_script(args.plot_script, args.trace,
                              "conformal descent", ("iteration", "lambda_bar_1"))
    _emit(args, config, results, {"monotone": all(
        x[1] >= y[1] - 1e-12 for x, y in zip(rows, rows[1:]))})
    return 0


def cmd_verify_torus(args) -> int:
    import numpy as np

    from .optimize import minimize, spin_structure_threshold
    from .torus import FourierField
    geometry = _geometry(args.a, args.b, tuple(args.spin))
    flat = (2.0 if geometry.character.is_trivial else 1.0) * math.pi / math.sqrt(args.b)
    rng = np.random.default_rng(args.seed)
    runs = []
    all_pass = True
    for k in range(args.perturbations):
        coeffs = {}
        for key in ((1, 0), (0, 1), (1, 1), (-1, 1)):
            c = args.amplitude * (rng.standard_normal() + 1j * rng.standard_normal()) / 4
            coeffs[key] = c
            coeffs[(-key[0], -key[1])] = complex(c).conjugate()
        omega0 = FourierField(geometry, coeffs)
        state = minimize(geometry, omega0, max_steps=args.max_steps, tol=args.tol,
                         band=tuple(omega0.coefficients))
        values = [row.lambda_bar_1 for row in state.trace]
        ok = (abs(state.final.lambda_bar_1 - flat) <= TOLERANCES["torus_flat_match"]
              and state.final.omega_variance < TOLERANCES["torus_variance"]
              and min(values) >= flat - TOLERANCES["torus_lower_slack"]
              and all(x >= y - 1e-12 for x, y in zip(values, values[1:])))
        all_pass = all_pass and ok
        runs.append({"run": k, "status": state.status,
                     "iterations": len(state.trace) - 1,
                     "lambda_bar_1": state.final.lambda_bar_1,
                     "omega_variance": state.final.omega_variance,
                     "min_iterate": min(values), "pass": ok})
    config = {"command": "verify-torus", "a": args.a, "b": args.b, "spin": args.spin,
              "perturbations": args.perturbations, "seed": args.seed,
              "amplitude": args.amplitude, "max_steps": args.max_steps,
              "tol": args.tol}
    results = {"flat_lambda_bar_1": flat, "b_threshold": spin_structure_threshold(geometry),
               "runs": runs, "pass": all_pass}
    _emit(args, config, results, {})
    return 0 if all_pass else 2


def cmd_verify_bar(args) -> int:
    from .sphere import bar_sweep
    report = bar_sweep(args.samples, args.band, args.amplitude, args.seed,
                       jmax=args.jmax, tolerance=TOLERANCES["bar_bound_slack"])
    config = {"command": "verify-bar", "samples": args.samples, "band": args.band,
              "amplitude": args.amplitude, "seed": args.seed, "jmax": args.jmax}
    results = {
        "bound": report.bound,
        "violations": report.violations,
        "min_lambda_bar_1": report.min_lambda_bar,
        "samples": [{"lambda_bar_1": s.lambda_bar_1, "omega_variance": s.omega_variance,
                     "equality_case": s.equality_case} for s in report.samples],
    }
    round_ok = abs(report.samples[0].lambda_bar_1 - report.bound) <= 1e-8
    _emit(args, config, results, {"round_sample_at_bound": round_ok})
    return 0 if report.violations == 0 and round_ok else 2


def cmd_veronese(args) -> int:
    import numpy as np

    from .maps import (energies, energy_momentum, harmonic_residual,
                       induced_metric, quaternionic_check, weak_conformality)
    from .veronese import eigenspinor_family, family_density, veronese
    rows = []
    all_pass = True
    for m in range(1, args.m_max + 1):
        vm = veronese(m)
        rep = energies(vm.psi)
        quat = quaternionic_check(vm.psi)
        metric = induced_metric(vm.psi)
        harm = harmonic_residual(vm.psi)
        conf = weak_conformality(vm.psi)
        rng = np.random.default_rng(0)
        z = rng.uniform(-1.4, 1.4, 64) + 1j * rng.uniform(-1.4, 1.4, 64)
        density_dev = float(np.max(np.abs(family_density(vm, z) - 1.0)))
        tensors = [energy_momentum(s, float(m)) for s in eigenspinor_family(vm, z)]
        target = 0.5 * m * tensors[0].e2u
        q_dev = max(
            float(np.max(np.abs(np.sum([t.Qxx for t in tensors], axis=0) - target))),
            float(np.max(np.abs(np.sum([t.Qyy for t in tensors], axis=0) - target))),
            float(np.max(np.abs(np.sum([t.Qxy for t in tensors], axis=0)))),
        ) / float(np.max(target))
        checks = {
            "harmonic_residual": harm <= TOLERANCES["veronese_harmonic"],
            "alignment": quat.alignment <= TOLERANCES["veronese_alignment"],
            "induced_metric": float(np.max(np.abs(metric.values - m * m)))
            <= TOLERANCES["veronese_induced"],
            "energy": abs(rep.E01 - 4 * math.pi * m * m)
            <= TOLERANCES["veronese_energy_rel"] * 4 * math.pi * m * m,
            "density_constant": density_dev <= TOLERANCES["veronese_density"],
            "q_tensor": q_dev <= TOLERANCES["veronese_qtensor_rel"],
            "weak_conformality": conf <= TOLERANCES["veronese_conformality"],
        }
        all_pass = all_pass and all(checks.values())
        rows.append({"m": m, "E10": rep.E10, "E01": rep.E01, "degree": rep.degree,
                     "harmonic_residual": harm, "alignment": quat.alignment,
                     "min_dbar_norm": quat.min_dbar_norm,
                     "induced_metric_dev": float(np.max(np.abs(metric.values - m * m))),
                     "density_dev": density_dev, "q_tensor_dev": q_dev,
                     "weak_conformality": conf, "checks": checks})
    config = {"command": "veronese", "m_max": args.m_max}
    _emit(args, config, {"battery": rows, "pass": all_pass}, {})
    return 0 if all_pass else 2


def cmd_energy(args) -> int:
    import numpy as np

    from .lattice import DualVector
    from .maps import PolyLift, SphereMap, cp1_sphere_coordinates, energies, \
        from_eigenspinors
    from .torus import flat_eigenspinor
    from .veronese import veronese

    def power_map(k):
        coeffs = np.zeros((abs(k) + 1, 1, 2) if k > 0 else (1, abs(k) + 1, 2),
                          dtype=complex)
        if k > 0:
            coeffs[k, 0, 0] = 1.0
        else:
            coeffs[0, abs(k), 0] = 1.0
        coeffs[0, 0, 1] = 1.0
        return SphereMap(PolyLift(coeffs))

    geometry = _geometry(0.0, 1.0, (0, 0))
    battery = [(f"sphere-power-{k}", power_map(k), k) for k in (1, 2, 3, -1, -2)]
    battery += [(f"veronese-{m}", veronese(m).psi, -1) for m in (1, 2, 3)]
    circles = []
    for idx, norm in (((0, 1), 1.0), ((1, 0), 1.0)):
        xi = DualVector(float(idx[0]), float(idx[1]), index=idx)
        spinor = flat_eigenspinor(geometry, xi)
        circles.append((f"torus-circle-{idx[0]}{idx[1]}",
                        from_eigenspinors([spinor], geometry), 0))
    battery += circles
    rows = []
    all_pass = True
    for name, map_obj, expected in battery:
        rep = energies(map_obj)
        ok = rep.degree == expected and rep.degree_residual <= \
            TOLERANCES["degree_integrality"] * 4 * math.pi
        row = {"name": name, "E10": rep.E10, "E01": rep.E01, "degree": rep.degree,
               "expected_degree": expected,
               "degree_residual": rep.degree_residual, "pass": ok}
        if name.startswith("torus-circle"):
            third = float(np.max(np.abs(cp1_sphere_coordinates(map_obj)[:, 2])))
            row["max_third_coordinate"] = third
            ok = ok and third <= TOLERANCES["great_circle_coordinate"]
            row["pass"] = ok
        all_pass = all_pass and ok
        rows.append(row)
    config = {"command": "energy"}
    _emit(args, config, {"battery": rows, "pass": all_pass}, {})
    return 0 if all_pass else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spindirac",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", help="write the JSON report here (default stdout)")
        p.add_argument("--plot-script", help="emit a standalone plot script")

    p = sub.add_parser("spectrum", help="exact torus/sphere spectra")
    p.add_argument("--torus", nargs=2, type=float, metavar=("A", "B"))
    p.add_argument("--sphere", action="store_true")
    p.add_argument("--spin", nargs=2, type=int, default=[0, 0], metavar=("X1", "X2"))
    p.add_argument("--count", type=int, default=10)
    add_common(p)
    p.set_defaults(handler=cmd_spectrum)

    p = sub.add_parser("discretize", help="conformal torus/sphere eigenproblem")
    p.add_argument("--torus", nargs=2, type=float, metavar=("A", "B"))
    p.add_argument("--sphere", action="store_true")
    p.add_argument("--spin", nargs=2, type=int, default=[0, 0])
    p.add_argument("--cutoff", type=float, default=3.0)
    p.add_argument("--jmax", type=float, default=7.5)
    p.add_argument("--omega-coeffs", help='JSON like {"1,0": [0.05, 0.0]}')
    p.add_argument("--omega-preset", choices=["cosx", "cosy", "random"])
    p.add_argument("--omega-amplitude", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    add_common(p)
    p.set_defaults(handler=cmd_discretize)

    p = sub.add_parser("optimize", help="conformal descent on lambda_bar_1")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--spin", nargs=2, type=int, default=[0, 0])
    p.add_argument("--max-steps", type=int, default=300)
    p.add_argument("--tol", type=float, default=5e-4)
    p.add_argument("--cutoff", type=float)
    p.add_argument("--omega-coeffs")
    p.add_argument("--omega-preset", choices=["cosx", "cosy", "random"])
    p.add_argument("--omega-amplitude", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exploratory", action="store_true",
                   help="allow b below the flat-minimizer threshold")
    p.add_argument("--trace", help="CSV trace path")
    add_common(p)
    p.set_defaults(handler=cmd_optimize)

    p = sub.add_parser("verify-torus", help="flat-minimizer verification")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--spin", nargs=2, type=int, default=[0, 0])
    p.add_argument("--perturbations", type=int, default=20)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--amplitude", type=float, default=0.1)
    p.add_argument("--max-steps", type=int, default=400)
    p.add_argument("--tol", type=float, default=5e-4)
    add_common(p)
    p.set_defaults(handler=cmd_verify_torus)

    p = sub.add_parser("verify-bar", help="sphere first-eigenvalue sweep")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--band", type=int, default=3)
    p.add_argument("--amplitude", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--jmax", type=float, default=7.5)
    add_common(p)
    p.set_defaults(handler=cmd_verify_bar)

    p = sub.add_parser("veronese", help="Veronese/Frenet verification battery")
    p.add_argument("--m-max", type=int, default=3)
    add_common(p)
    p.set_defaults(handler=cmd_veronese)

    p = sub.add_parser("energy", help="map energies, degrees, residuals")
    add_common(p)
    p.set_defaults(handler=cmd_energy)

    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 3 if exc.code not in (0, None) else 0
    from . import errors
    try:
        return args.handler(args)
    except errors.SolverFailure as exc:
        _emit_error(args, "solver_failure", exc)
        return 4
    except (errors.SpinDiracError, ValueError, json.JSONDecodeError) as exc:
        _emit_error(args, "input_error", exc)
        return 3


def _emit_error(args, kind: str, exc: Exception):
    record = {"schema_version": SCHEMA_VERSION, "error": {
        "kind": kind, "type": type(exc).__name__, "message": str(exc)}}
    text = json.dumps(record, sort_keys=True, indent=2) + "\n"
    if getattr(args, "out", None):
        _atomic_write(args.out, text)
    sys.stderr.write(text)


if __name__ == "__main__":
    sys.exit(main())
