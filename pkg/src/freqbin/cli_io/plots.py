"""Static SVG figures for a report, each with a CSV of the plotted data."""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..beating import beating_curve  # noqa: E402
from ..counting import BRANCHES  # noqa: E402
from ..estimation.tomography import BASIS_LABELS  # noqa: E402
from .formats import ReportBundle, _write_rows  # noqa: E402

log = logging.getLogger(__name__)

# fixed metadata keeps the SVG output byte-stable
_SVG_META = {"Date": None, "Creator": None}
matplotlib.rcParams["svg.hashsalt"] = "freqbin"


def _save(fig, path: Path):
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def plot_beating(report: ReportBundle, outdir: Path):
    data = report.beating_data
    fit = report.beating_fit
    fine = np.linspace(data.delays[0], data.delays[-1], 20 * len(data))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(data.delays, data.counts, yerr=data.sigmas, fmt="o", ms=2, color="tab:blue", label="data")
    ax.plot(fine, beating_curve(fit.params, fine), "-", color="tab:red", lw=1, label="fit")
    V, sV = fit.params.visibility_V, fit.uncertainties["visibility_V"]
    ax.set_xlabel("relative delay (ps)")
    ax.set_ylabel("coincidences per point")
    ax.set_title(f"V = {100 * V:.1f} +/- {100 * sV:.1f} %")
    ax.legend()
    _write_rows(
        outdir / "beating_plot.csv",
        ("delay_ps", "counts", "sigma", "fit"),
        zip(data.delays, data.counts, data.sigmas, beating_curve(fit.params, data.delays)),
    )
    _save(fig, outdir / "beating.svg")
    return [outdir / "beating.svg", outdir / "beating_plot.csv"]


def plot_branches(report: ReportBundle, outdir: Path):
    bc = report.branch_counts
    n, s = bc.counts(), bc.sigmas()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(BRANCHES, [n[b] for b in BRANCHES], yerr=[s[b] for b in BRANCHES], color="tab:blue", capsize=3)
    ax.set_ylabel(f"coincidences in {bc.integration_time:g} s")
    ratio = "inf" if np.isinf(report.ratio_db) else f"{report.ratio_db:.2f}"
    ax.set_title(f"antibunching / bunching = {ratio} dB")
    _write_rows(outdir / "branch_plot.csv", ("branch", "counts", "sigma"), [(b, n[b], s[b]) for b in BRANCHES])
    _save(fig, outdir / "branch_counts.svg")
    return [outdir / "branch_counts.svg", outdir / "branch_plot.csv"]


def plot_density(report: ReportBundle, outdir: Path):
    rho = report.density_matrix.entries
    fig = plt.figure(figsize=(9, 4))
    xs, ys = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
    for k, (part, block) in enumerate((("Re", rho.real), ("Im", rho.imag))):
        ax = fig.add_subplot(1, 2, k + 1, projection="3d")
        ax.bar3d(xs.ravel(), ys.ravel(), 0, 0.6, 0.6, block.ravel(), shade=True)
        ax.set_xticks(np.arange(4) + 0.3, BASIS_LABELS)
        ax.set_yticks(np.arange(4) + 0.3, BASIS_LABELS)
        ax.set_zlim(-0.6, 0.6)
        ax.set_title(f"{part}(rho)")
    rows = [(part, lab, *line) for part, block in (("re", rho.real), ("im", rho.imag)) for lab, line in zip(BASIS_LABELS, block)]
    _write_rows(outdir / "density_plot.csv", ("part", "row") + BASIS_LABELS, rows)
    _save(fig, outdir / "density_matrix.svg")
    return [outdir / "density_matrix.svg", outdir / "density_plot.csv"]


def plot_power_scan(report: ReportBundle, outdir: Path):
    pts = np.asarray(report.power_scan, dtype=float)
    P, y, s = pts.T
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(P, y, yerr=s, fmt="o", color="tab:blue", label="singles")
    rows = [(p, yy, ss) for p, yy, ss in zip(P, y, s)]
    header = ("power_mw", "singles_hz", "sigma_hz")
    if report.power_fit is not None:
        fine = np.linspace(0, P.max(), 200)
        pair, noise, const = report.power_fit.decompose(fine)
        ax.plot(fine, report.power_fit.evaluate(fine), color="tab:blue", label="quadratic fit")
        ax.plot(fine, pair, color="tab:red", label="pair (quadratic)")
        ax.plot(fine, noise, color="tab:purple", label="noise (linear)")
        fp, fn, fc = report.power_fit.decompose(P)
        rows = [r + (a, b, c) for r, a, b, c in zip(rows, fp, fn, fc)]
        header = header + ("fit_pair_hz", "fit_noise_hz", "fit_constant_hz")
    ax.set_xlabel("pump power (mW)")
    ax.set_ylabel("singles rate (Hz)")
    ax.legend()
    _write_rows(outdir / "power_scan_plot.csv", header, rows)
    _save(fig, outdir / "power_scan.svg")
    return [outdir / "power_scan.svg", outdir / "power_scan_plot.csv"]


def summary_text(report: ReportBundle) -> str:
    fit = report.beating_fit
    u = fit.uncertainties
    rho = report.density_matrix
    lines = [
        "quantity                     value          uncertainty",
        "---------------------------  -------------  -----------",
    ]

    def row(name, value, err=""):
        err = f"{err:.4g}" if isinstance(err, float) else err
        lines.append(f"{name:<27}  {value:<13}  {err}")

    bc = report.branch_counts
    for b, n in bc.counts().items():
        row(f"counts {b}", str(n), bc.sigmas()[b])
    row("antibunch/bunch ratio (dB)", "inf" if np.isinf(report.ratio_db) else f"{report.ratio_db:.3f}")
    row("balance p", f"{report.p:.4f}", report.sigma_p)
    row("visibility V", f"{fit.params.visibility_V:.4f}", u["visibility_V"])
    row("phase phi (rad)", f"{fit.params.phase_phi:.4g}", u["phase_phi"])
    row("delta_omega (rad/ps)", f"{fit.params.delta_omega:.4f}", u["delta_omega"])
    row("Omega (rad/ps)", f"{fit.params.envelope_Omega:.4f}", u["envelope_Omega"])
    row("reduced chi-square", f"{fit.reduced_chi_square:.3f}")
    row("fit converged", str(fit.converged))
    row("physicality margin", f"{rho.margin:.5f}")
    row("physical", str(rho.physical) + (" (projected)" if rho.projected else ""))
    row("fidelity to psi+", f"{report.fidelity:.4f}", report.sigma_fidelity)
    if report.power_fit is not None:
        pf = report.power_fit
        row("power fit quadratic", f"{pf.quadratic_coeff:.5g}", pf.sigma_quadratic)
        row("power fit linear", f"{pf.linear_coeff:.5g}", pf.sigma_linear)
        row("power fit constant", f"{pf.constant:.5g}", pf.sigma_constant)
    prov = report.provenance
    lines.append("")
    lines.append(f"config {prov.get('config_hash', '?')[:16]}  seed {prov.get('seed')}  version {prov.get('tool_version')}")
    return "\n".join(lines) + "\n"


def render_report(report: ReportBundle, outdir) -> tuple[list[Path], list[str]]:
    """Write plots, their data sidecars and ``summary.txt`` into ``outdir``.

    Sections missing from the report are skipped with a warning.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written, warnings = [], []
    plotters = [
        ("beating", report.beating_data is not None, plot_beating),
        ("branch counts", True, plot_branches),
        ("density matrix", True, plot_density),
        ("power scan", report.power_scan is not None, plot_power_scan),
    ]
    for name, present, plot in plotters:
        if not present:
            msg = f"report has no {name} section; skipping its plot"
            log.warning(msg)
            warnings.append(msg)
            continue
        written.extend(plot(report, outdir))
    text = summary_text(report)
    if warnings:
        text += "".join(f"warning: {w}\n" for w in warnings)
    (outdir / "summary.txt").write_text(text)
    written.append(outdir / "summary.txt")
    return written, warnings
