"""``freqbin`` command line: simulate -> fit -> tomo -> report, plus verify.

Exit codes: 0 success, 1 validation error, 2 fit did not converge,
3 reconstructed state is unphysical.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .. import __version__
from ..beating import delay_grid, synthesize_beating_dataset
from ..counting import (
    antibunch_bunch_ratio_db,
    balance_parameter,
    simulate_branch_counts,
    simulate_power_scan,
)
from ..errors import DegenerateFitError, ValidationError
from ..estimation import (
    fidelity_closed_form,
    fidelity_to_bell,
    fit_beating,
    fit_power_scan,
    propagate_uncertainties,
    reconstruct_density,
)
from ..estimation.tomography import DensityMatrix
from . import formats
from .config import load_config

log = logging.getLogger("freqbin")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NONCONVERGED = 2
EXIT_UNPHYSICAL = 3

BRANCH_CSV = "branch_counts.csv"
BEATING_CSV = "beating.csv"
POWER_CSV = "power_scan.csv"
FIT_JSON = "fit.json"
REPORT_JSON = "report.json"
DENSITY_CSV = "density_matrix.csv"


def _child_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def cmd_simulate(config=None, out=".", seed=None) -> int:
    """Write branch-count, beating and power-scan CSVs for one config."""
    cfg = load_config(config)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    s_branch, s_beat, s_scan = _child_seeds(cfg.seed, 3)

    counts = simulate_branch_counts(
        cfg.branch_probabilities(),
        cfg["branch.total_pairs"],
        cfg.port_efficiencies(),
        cfg.branch_floor(),
        seed=s_branch,
        integration_time=cfg["coincidence.integration_time_s"],
    )
    formats.write_branch_csv(out / BRANCH_CSV, counts)

    delays = delay_grid(cfg["beating.span_ps"], cfg["beating.step_ps"])
    data = synthesize_beating_dataset(
        cfg.beating_params(), delays, s_beat, cfg["beating.integration_time_s"]
    )
    formats.write_beating_csv(out / BEATING_CSV, data)

    scan = simulate_power_scan(
        cfg.source_model(), cfg["scan.powers_mw"], cfg["scan.integration_time_s"], s_scan, cfg["scan.arm"]
    )
    formats.write_power_scan_csv(out / POWER_CSV, scan)

    manifest = formats.provenance(cfg.config_hash(), cfg.seed)
    manifest["files"] = [BRANCH_CSV, BEATING_CSV, POWER_CSV]
    formats.write_json(out / "manifest.json", manifest)
    log.info("wrote datasets to %s", out)
    return EXIT_OK


def cmd_fit(beating_csv, out=".", config=None, subtract_accidentals=False) -> int:
    """Fit the beating curve and write ``fit.json``."""
    cfg = load_config(config)
    data = formats.read_beating_csv(beating_csv, cfg["beating.integration_time_s"])
    fit = fit_beating(
        data,
        accidentals_per_point=cfg.accidentals_per_point(),
        subtract_accidentals=subtract_accidentals,
    )
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_json(out / FIT_JSON, formats.fit_to_dict(fit, data))
    if not fit.converged:
        log.error("beating fit did not converge after %d iterations", fit.iterations)
        return EXIT_NONCONVERGED
    log.info(
        "V = %.4f +/- %.4f after %d iterations",
        fit.params.visibility_V,
        fit.uncertainties["visibility_V"],
        fit.iterations,
    )
    return EXIT_OK


def build_report(
    fit,
    data,
    counts,
    *,
    power_scan=None,
    seed=0,
    config_hash="",
    project_physical=False,
    replicates=1000,
) -> formats.ReportBundle:
    warnings = []
    p, sigma_p = balance_parameter(counts)
    ratio = antibunch_bunch_ratio_db(counts)
    if math.isinf(ratio):
        warnings.append("no bunched coincidences: ratio reported as infinite")
    V, phi = fit.params.visibility_V, fit.params.phase_phi
    if project_physical or V <= 1.0:
        rho = reconstruct_density(p, V, phi, project_physical=project_physical)
    else:
        # fitted V above one: keep it so the report shows the violation
        rho = DensityMatrix.from_params(p, V, phi)
    if rho.projected:
        warnings.append(f"visibility projected from {V:.6g} to {rho.V:.6g}")
    if not rho.physical:
        warnings.append(f"unphysical state: margin {rho.margin:.6g}")
    if not fit.converged:
        warnings.append("beating fit did not converge")
    boot = propagate_uncertainties(counts, fit, replicates=replicates, seed=seed)
    power_fit = fit_power_scan(power_scan) if power_scan is not None else None
    return formats.ReportBundle(
        branch_counts=counts,
        ratio_db=ratio,
        p=p,
        sigma_p=sigma_p,
        beating_fit=fit,
        density_matrix=rho,
        fidelity=fidelity_to_bell(rho),
        fidelity_closed_form=fidelity_closed_form(rho.V, rho.phi),
        bootstrap=boot.summary(),
        provenance=formats.provenance(config_hash, seed),
        beating_data=data,
        power_scan=power_scan,
        power_fit=power_fit,
        warnings=warnings,
    )


def cmd_tomo(
    fit_json,
    branch_csv,
    out=".",
    config=None,
    seed=None,
    power_scan=None,
    project_physical=False,
    replicates=1000,
) -> int:
    """Reconstruct the density matrix; write ``report.json`` and the matrix CSV."""
    cfg = load_config(config)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    fit, data = formats.fit_from_dict(formats.read_json(fit_json))
    counts = formats.read_branch_csv(branch_csv, cfg["coincidence.integration_time_s"])
    scan = formats.read_power_scan_csv(power_scan) if power_scan is not None else None
    report = build_report(
        fit,
        data,
        counts,
        power_scan=scan,
        seed=cfg.seed,
        config_hash=cfg.config_hash(),
        project_physical=project_physical,
        replicates=replicates,
    )
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_json(out / REPORT_JSON, report.to_dict())
    formats.write_density_csv(out / DENSITY_CSV, report.density_matrix)
    for w in report.warnings:
        log.warning(w)
    if not report.physical:
        return EXIT_UNPHYSICAL
    log.info("fidelity %.4f +/- %.4f", report.fidelity, report.sigma_fidelity)
    return EXIT_OK


def cmd_report(report_json, out=".") -> int:
    """Render plots and ``summary.txt`` from a report."""
    from .plots import render_report

    report = formats.ReportBundle.from_dict(formats.read_json(report_json))
    written, _ = render_report(report, out)
    for path in written:
        log.info("wrote %s", path)
    sys.stdout.write(Path(out, "summary.txt").read_text())
    return EXIT_OK


def cmd_verify() -> int:
    from ..acceptance import run_all

    results = run_all()
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freqbin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", default=None, help="config file (default: built-in paper-profile)")
        p.add_argument("--out", default=".", help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("simulate", help="synthesize datasets")
    common(p)

    p = sub.add_parser("fit", help="fit a beating CSV")
    p.add_argument("beating_csv")
    common(p, seed=False)
    p.add_argument("--subtract-accidentals", action="store_true")

    p = sub.add_parser("tomo", help="density matrix and report from a fit and branch counts")
    p.add_argument("fit_json")
    p.add_argument("branch_csv")
    common(p)
    p.add_argument("--power-scan", default=None, help="optional power-scan CSV to include")
    p.add_argument("--project-physical", action="store_true")
    p.add_argument("--replicates", type=int, default=1000)

    p = sub.add_parser("report", help="plots and summary from a report")
    p.add_argument("report_json")
    p.add_argument("--out", default=".")

    sub.add_parser("verify", help="run the acceptance checks against the built-in profile")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.out, args.seed)
        if args.command == "fit":
            return cmd_fit(args.beating_csv, args.out, args.config, args.subtract_accidentals)
        if args.command == "tomo":
            return cmd_tomo(
                args.fit_json,
                args.branch_csv,
                args.out,
                args.config,
                args.seed,
                args.power_scan,
                args.project_physical,
                args.replicates,
            )
        if args.command == "report":
            return cmd_report(args.report_json, args.out)
        return cmd_verify()
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DegenerateFitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
