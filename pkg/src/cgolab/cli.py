"""Batch entry points: every acceptance experiment as a reproducible run.

Each subcommand takes ``--config <file.ini>`` (key/value with sections,
schema-validated before any compute) and writes its outputs plus a JSON
manifest indexing them into the configured output directory.  Exit status:
0 when the run's acceptance gate passes, 1 when it fails, 2 for invalid
configuration.  All randomized pieces take the [run] seed (default 0), so
identical configs give bit-identical outputs on one platform.

Subcommands: verify-fundsol, kato-norm, cgo-decay, dtn-forward,
reconstruct, convergence-study.
"""

from __future__ import annotations

import argparse
import configparser
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CgolabError, ConfigError
from .fundsol import (BOUND_CONSTANT_3D, RaySettings, SampleSpec,
                      axis_cgo_vector, e_tau_batch, verify_pointwise_bound)
from .grid import Grid
from .gridio import RunManifest, write_csv, write_grid_binary, write_json
from .kato import KatoQuadrature, PotentialSpec, from_descriptor, kato_norm
from .cgo import solve_cgo
from .dtn import DiscreteDomain, DtnOperator, dtn_matrix
from .reconstruct import (BOX_CENTER, band_limited_reference,
                          convergence_study, reconstruct_potential)
from .specfun import k0_line_integral


# ---------------------------------------------------------------------------
# configuration parsing / validation
# ---------------------------------------------------------------------------

class RunConfig:
    """Validated view of one INI config file."""

    def __init__(self, path: str):
        self.path = Path(path)
        if not self.path.exists():
            raise ConfigError(f"config file not found: {path}")
        self.text = self.path.read_text()
        self.parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            self.parser.read_string(self.text)
        except configparser.Error as err:
            raise ConfigError(f"{path}: {err}") from err

    def _line_of(self, section: str, key: str | None = None) -> str:
        needle = f"[{section}]" if key is None else key
        in_section = key is None
        for i, line in enumerate(self.text.splitlines(), start=1):
            s = line.strip()
            if s.startswith(f"[{section}]"):
                in_section = True
                if key is None:
                    return f"line {i}"
                continue
            if s.startswith("[") and in_section and key is not None:
                break
            if in_section and key is not None and s.split("=")[0].strip() == key:
                return f"line {i}"
        return "line ?"

    def fail(self, section: str, key: str, msg: str):
        raise ConfigError(
            f"{self.path}: [{section}] {key} ({self._line_of(section, key)}): {msg}")

    def get(self, section: str, key: str, cast, default=None, check=None):
        if not self.parser.has_option(section, key):
            return default
        raw = self.parser.get(section, key).strip()
        try:
            val = cast(raw)
        except (ValueError, TypeError):
            self.fail(section, key, f"cannot parse {raw!r}")
        if check is not None and not check(val):
            self.fail(section, key, f"invalid value {raw!r}")
        return val

    def require(self, section: str, key: str, cast, check=None):
        if not self.parser.has_option(section, key):
            self.fail(section, key, "required key is missing")
        return self.get(section, key, cast, check=check)

    def has_section(self, section: str) -> bool:
        return self.parser.has_section(section)

    def echo(self) -> dict:
        return {s: dict(self.parser.items(s)) for s in self.parser.sections()}


def _floats(raw: str) -> list:
    return [float(t) for t in raw.replace(",", " ").split()]


def _vec3(raw: str) -> tuple:
    vals = _floats(raw)
    if len(vals) != 3:
        raise ValueError("need three components")
    return tuple(vals)


def _potential_from(cfg: RunConfig, section: str) -> PotentialSpec:
    if not cfg.has_section(section):
        cfg.fail(section, "kind", f"missing [{section}] section")
    kind = cfg.require(section, "kind", str)
    desc = {"kind": kind}
    if kind == "ball":
        desc["radius"] = cfg.get(section, "radius", float, 1.0, lambda v: v > 0)
        desc["amplitude"] = cfg.get(section, "amplitude", float, 1.0)
        desc["center"] = list(cfg.get(section, "center", _vec3, (0.0, 0.0, 0.0)))
    elif kind == "bump":
        desc["radius"] = cfg.get(section, "radius", float, 0.5, lambda v: v > 0)
        desc["amplitude"] = cfg.get(section, "amplitude", float, 10.0)
        desc["center"] = list(cfg.get(section, "center", _vec3, (0.0, 0.0, 0.0)))
    elif kind == "log_singular":
        desc["delta"] = cfg.get(section, "delta", float, 3.0, lambda v: v > 2)
    elif kind == "zero":
        pass
    else:
        cfg.fail(section, "kind", f"unknown potential kind {kind!r}")
    try:
        return from_descriptor(desc)
    except CgolabError as err:
        cfg.fail(section, "kind", str(err))


def _grid_from(cfg: RunConfig, section: str = "grid",
               default_n: int = 64, default_length: float = 2.0,
               default_origin: tuple = (-0.5, -0.5, -0.5)) -> Grid:
    n = cfg.get(section, "n", int, default_n, lambda v: v >= 4)
    length = cfg.get(section, "length", float, default_length, lambda v: v > 0)
    origin = cfg.get(section, "origin", _vec3, default_origin)
    return Grid(n=n, length=length, origin=origin, shifted=True)


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.get("run", "output_dir", str, "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _positive(v) -> bool:
    return v > 0


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_verify_fundsol(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    man = RunManifest("verify-fundsol", cfg.echo(), __version__)
    tol = cfg.get("fundsol", "tolerance", float, 1e-3, _positive)
    taus = cfg.get("fundsol", "tau_list", _floats, [0.5, 1, 2, 4, 8, 16])
    n = cfg.get("fundsol", "samples", int, 10_000, lambda v: v >= 0)
    x1r = cfg.get("fundsol", "x1_range", _floats, [-10.0, 10.0])
    rr = cfg.get("fundsol", "r_range", _floats, [1.01e-2, 10.0])
    seed = cfg.get("run", "seed", int, 0)
    threads = cfg.get("run", "threads", int, 1, _positive)
    spec = SampleSpec(n_samples=n, x1_range=tuple(x1r), r_range=tuple(rr),
                      seed=seed)

    t0 = time.perf_counter()
    settings = RaySettings()

    def sweep(tau):
        return verify_pointwise_bound([tau], spec, tol, settings,
                                      collect_samples=True)

    if threads > 1 and len(taus) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(sweep, taus))
    else:
        results = [sweep(tau) for tau in taus]
    man.add_stage("bound sweep", time.perf_counter() - t0)

    # merge per-tau reports (ordered, so the merge is deterministic)
    from .fundsol import BoundReport, LOWER_CONSTANT_3D
    report = BoundReport(constant=BOUND_CONSTANT_3D, tolerance=tol,
                         lower_floor=LOWER_CONSTANT_3D - tol)
    tables = []
    for rep, table in results:
        report.per_tau.extend(rep.per_tau)
        report.n_samples += rep.n_samples
        if rep.max_ratio > report.max_ratio:
            report.max_ratio = rep.max_ratio
            report.argmax = rep.argmax
        tables.append(table)
    report.lower_attained = report.max_ratio >= report.lower_floor
    report.passed = (report.max_ratio <= BOUND_CONSTANT_3D + tol
                     and (report.lower_attained or report.n_samples == 0))

    write_json(out / "bound_report.json", report.to_dict())
    man.add_output(out / "bound_report.json", "bound-report")
    rows = np.vstack(tables) if tables else np.empty((0, 6))
    write_csv(out / "bound_samples.csv",
              ["tau", "x1", "r", "mag", "E", "ratio"], rows.tolist())
    man.add_output(out / "bound_samples.csv", "sample-table")

    # golden special-function values for regression tracking
    golden = [
        ["K_half_1", float(np.sqrt(np.pi / 2) / np.e)],
        ["int_K0", k0_line_integral()],
        ["E_tau(1,0.5,0.5)", float(e_tau_batch(1.0, [0.5], [0.5])[0])],
        ["E_tau(1,2,1)", float(e_tau_batch(1.0, [2.0], [1.0])[0])],
    ]
    write_csv(out / "specfun_golden.csv", ["name", "value"], golden)
    man.add_output(out / "specfun_golden.csv", "golden-values")

    status = "pass" if report.passed else "fail"
    man.finish(out / "manifest.json", status)
    print(f"verify-fundsol: max ratio {report.max_ratio:.6f} vs bound "
          f"{BOUND_CONSTANT_3D:.6f} (+{tol:g}) over {report.n_samples} samples "
          f"-> {status}")
    return 0 if report.passed else 1


def cmd_kato_norm(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    man = RunManifest("kato-norm", cfg.echo(), __version__)
    V = _potential_from(cfg, "potential")
    radii = cfg.get("kato", "r_schedule", _floats, None)
    quad = KatoQuadrature(r_schedule=tuple(radii) if radii else None)
    t0 = time.perf_counter()
    try:
        rep = kato_norm(V, quad)
    except CgolabError as err:
        man.finish(out / "manifest.json", f"error: {err}")
        print(f"kato-norm failed: {err}", file=sys.stderr)
        return 1
    man.add_stage("norm", time.perf_counter() - t0)
    payload = rep.to_dict()
    payload["potential"] = V.descriptor
    write_json(out / "kato_report.json", payload)
    man.add_output(out / "kato_report.json", "kato-report")
    write_csv(out / "kato_modulus.csv", ["r", "modulus"], rep.modulus)
    man.add_output(out / "kato_modulus.csv", "modulus-table")
    man.finish(out / "manifest.json", "pass")
    print(f"kato-norm[{V.label}]: norm = {rep.norm:.6f} at "
          f"x = {np.round(rep.argmax_x, 4).tolist()}")
    return 0


def cmd_cgo_decay(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    man = RunManifest("cgo-decay", cfg.echo(), __version__)
    V = _potential_from(cfg, "potential")
    grid = _grid_from(cfg, default_n=64, default_length=4.0,
                      default_origin=(-2.0, -2.0, -2.0))
    mags = cfg.get("cgo", "magnitudes", _floats, [8.0, 16.0, 32.0, 64.0])
    tol = cfg.get("cgo", "tol", float, 1e-12, _positive)
    if grid.length < 2 * float(np.max(V.support_box[:, 1] - V.support_box[:, 0])):
        cfg.fail("grid", "length", "box must be at least twice the support "
                                   "diameter (zero padding)")
    rows = []
    t0 = time.perf_counter()
    for mag in mags:
        z = axis_cgo_vector(mag)
        try:
            _, _, rep = solve_cgo(V, z, grid, tol=tol)
        except CgolabError as err:
            man.finish(out / "manifest.json", f"error: {err}")
            print(f"cgo-decay failed at |z|={mag}: {err}", file=sys.stderr)
            return 1
        rows.append([mag, rep.r_norm, rep.contraction_estimate, rep.residual,
                     rep.f_norm / max(rep.v_norm, 1e-300), rep.iterations])
    man.add_stage("decay sweep", time.perf_counter() - t0)
    write_csv(out / "cgo_decay.csv",
              ["z_mag", "r_norm", "contraction", "residual", "f_over_v",
               "iterations"], rows)
    man.add_output(out / "cgo_decay.csv", "decay-table")
    r_norms = [r[1] for r in rows]
    monotone = all(b < a or (a == b == 0.0)
                   for a, b in zip(r_norms[:-1], r_norms[1:]))
    status = "pass" if monotone else "fail"
    man.finish(out / "manifest.json", status)
    print(f"cgo-decay[{V.label}]: r_norms = "
          f"{[f'{r:.3e}' for r in r_norms]} -> {status}")
    return 0 if monotone else 1


def cmd_dtn_forward(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    man = RunManifest("dtn-forward", cfg.echo(), __version__)
    V = _potential_from(cfg, "potential")
    cells = cfg.get("dtn", "cells", int, 16, lambda v: v >= 2)
    order = cfg.get("dtn", "basis_order", int, 2, lambda v: v >= 0)
    dom = DiscreteDomain(cells)
    t0 = time.perf_counter()
    try:
        op = DtnOperator(V, dom)
        mat = dtn_matrix(op, dom, order=order)
    except CgolabError as err:
        man.finish(out / "manifest.json", f"error: {err}")
        print(f"dtn-forward failed: {err}", file=sys.stderr)
        return 1
    man.add_stage("assembly", time.perf_counter() - t0)
    payload = mat.to_dict()
    payload["symmetry_defect"] = mat.symmetry_defect()
    payload["potential"] = V.descriptor
    write_json(out / "dtn_matrix.json", payload)
    man.add_output(out / "dtn_matrix.json", "dtn-matrix")
    ok = mat.symmetry_defect() < 1e-8 * max(1.0, float(np.abs(mat.entries).max()))
    man.finish(out / "manifest.json", "pass" if ok else "fail")
    print(f"dtn-forward[{V.label}]: {len(mat.basis_labels)} basis modes, "
          f"symmetry defect {mat.symmetry_defect():.3e}")
    return 0 if ok else 1


def _reconstruct_setup(cfg: RunConfig):
    V1 = _potential_from(cfg, "potential")
    V2 = _potential_from(cfg, "potential2") if cfg.has_section("potential2") \
        else from_descriptor({"kind": "zero"})
    grid = _grid_from(cfg)
    cells = cfg.get("dtn", "cells", int, 32, lambda v: v >= 2)
    dom = DiscreteDomain(cells)
    ratio = dom.h / grid.h
    if abs(ratio - round(ratio)) > 1e-12:
        cfg.fail("dtn", "cells", f"box spacing 1/{cells} must be a multiple "
                                 f"of the grid spacing {grid.h:g}")
    return V1, V2, grid, dom


def cmd_reconstruct(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    man = RunManifest("reconstruct", cfg.echo(), __version__)
    V1, V2, grid, dom = _reconstruct_setup(cfg)
    xi_max = cfg.get("reconstruct", "xi_max", float, 4.0, _positive)
    period = cfg.get("reconstruct", "period", float, 4.0, _positive)
    schedule = cfg.get("reconstruct", "s_schedule", _floats, [4.0, 8.0])
    gate = cfg.get("reconstruct", "contraction_gate", float, 0.25, _positive)
    threshold = cfg.get("reconstruct", "error_threshold", float, 0.2, _positive)
    order_raw = cfg.get("reconstruct", "basis_order", int, -1)
    basis_order = None if order_raw is None or order_raw < 0 else order_raw

    t0 = time.perf_counter()
    op1 = DtnOperator(V1, dom)
    op2 = DtnOperator(V2, dom)
    man.add_stage("dtn factorization", time.perf_counter() - t0)

    t0 = time.perf_counter()
    result = reconstruct_potential(op1, op2, V1, V2, grid,
                                   xi_max=xi_max, period=period,
                                   s_schedule=schedule,
                                   contraction_gate=gate,
                                   basis_order=basis_order)
    man.add_stage("mode sweep", time.perf_counter() - t0)

    reference = band_limited_reference(V1 - V2, grid, xi_max, period)
    err_num = float(np.linalg.norm(result.potential.values - reference.values))
    err_den = float(np.linalg.norm(reference.values))
    rel_error = err_num / err_den if err_den > 0 else err_num

    write_csv(out / "modes.csv", ["kx", "ky", "kz", "estimate", "s"],
              [[*k, v, result.s_used.get(k, float("nan"))]
               for k, v in sorted(result.modes.items())])
    man.add_output(out / "modes.csv", "mode-table")
    write_grid_binary(out / "potential.bin", result.potential)
    man.add_output(out / "potential.bin", "grid-dump")
    payload = {
        "relative_l2_error": rel_error,
        "modes": len(result.modes),
        "failures": {str(k): v for k, v in result.failures.items()},
        "hermitian_defect": result.hermitian_defect(),
        "diagnostics": {str(k): d for k, d in result.diagnostics.items()},
        "center": list(BOX_CENTER),
    }
    write_json(out / "reconstruction.json", payload)
    man.add_output(out / "reconstruction.json", "reconstruction-report")
    ok = rel_error < threshold if err_den > 0 else True
    man.finish(out / "manifest.json", "pass" if ok else "fail")
    print(f"reconstruct[{V1.label} vs {V2.label}]: band-limited relative L2 "
          f"error {rel_error:.4f} over {len(result.modes)} modes "
          f"-> {'pass' if ok else 'fail'}")
    return 0 if ok else 1


def cmd_convergence_study(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    man = RunManifest("convergence-study", cfg.echo(), __version__)
    V1, _, grid, dom = _reconstruct_setup(cfg)
    xi = cfg.get("convergence", "xi", _vec3, (0.0, 0.0, 0.0))
    s_list = cfg.get("convergence", "s_list", _floats, [2.0, 4.0, 8.0])
    t0 = time.perf_counter()
    rows = convergence_study(V1, xi, s_list, grid, dom)
    man.add_stage("study", time.perf_counter() - t0)
    write_csv(out / "convergence.csv",
              ["s", "error", "r1_norm", "r2_norm", "estimate", "truth"],
              [[r["s"], r["error"], r["r1_norm"], r["r2_norm"],
                r["estimate"], r["truth"]] for r in rows])
    man.add_output(out / "convergence.csv", "study-table")
    errs = [r["error"] for r in rows]
    ok = len(errs) < 2 or errs[-1] <= errs[0]
    man.finish(out / "manifest.json", "pass" if ok else "fail")
    print(f"convergence-study[{V1.label}]: errors = "
          f"{[f'{e:.3e}' for e in errs]} -> {'pass' if ok else 'fail'}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------

_COMMANDS = {
    "verify-fundsol": cmd_verify_fundsol,
    "kato-norm": cmd_kato_norm,
    "cgo-decay": cmd_cgo_decay,
    "dtn-forward": cmd_dtn_forward,
    "reconstruct": cmd_reconstruct,
    "convergence-study": cmd_convergence_study,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cgolab",
        description="CGO / Kato-class / DtN numerical laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--threads", type=int, default=None,
                       help="override [run] threads")
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig(args.config)
        if args.threads is not None:
            if not cfg.parser.has_section("run"):
                cfg.parser.add_section("run")
            cfg.parser.set("run", "threads", str(args.threads))
        return _COMMANDS[args.command](cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
