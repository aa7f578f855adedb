"""CSV and JSON formats for datasets, fits and reports.

Numbers are written with :func:`repr`, which is locale-independent and
round-trips every float exactly.  CSV headers are fixed:

* branch counts: ``branch,counts,sigma`` with branch in aa, bb, ab, ba
* beating scan: ``delay_ps,counts,sigma``
* power scan: ``power_mw,singles_hz,sigma_hz``
* density matrix: ``part,row,ss,si,is,ii`` (four ``re`` rows, four ``im`` rows)
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..beating import BeatingDataset, BeatingParams
from ..counting import BRANCHES, BranchCounts
from ..errors import SchemaError, ValidationError
from ..estimation.fitting import PARAM_NAMES, BeatingFit, PolynomialFit
from ..estimation.tomography import BASIS_LABELS, DensityMatrix

BRANCH_HEADER = ("branch", "counts", "sigma")
BEATING_HEADER = ("delay_ps", "counts", "sigma")
POWER_HEADER = ("power_mw", "singles_hz", "sigma_hz")
DENSITY_HEADER = ("part", "row") + BASIS_LABELS

FIT_SCHEMA = "freqbin.beating_fit/1"
REPORT_SCHEMA = "freqbin.report/1"


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _write_rows(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, str) else fmt(c) for c in row])
    Path(path).write_text(buf.getvalue())


def _read_rows(path, header, min_rows=1):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise SchemaError(f"{path}: empty file", row=1)
    if tuple(c.strip() for c in rows[0]) != header:
        raise SchemaError(f"{path}: expected header {','.join(header)}, got {','.join(rows[0])}", row=1)
    body = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise SchemaError(f"{path}: expected {len(header)} fields, got {len(row)}", row=i)
        body.append((i, row))
    if len(body) < min_rows:
        raise SchemaError(f"{path}: need at least {min_rows} data rows, got {len(body)}", row=len(rows))
    return body


def _number(path, value, row, column, integer=False):
    try:
        if integer:
            x = float(value)
            if x != int(x) or x < 0:
                raise ValueError
            return int(x)
        x = float(value)
    except ValueError:
        kind = "non-negative integer" if integer else "number"
        raise SchemaError(f"{path}: expected a {kind}, got {value!r}", row=row, column=column) from None
    if not math.isfinite(x):
        raise SchemaError(f"{path}: non-finite value {value!r}", row=row, column=column)
    return x


# branch counts ------------------------------------------------------------

def write_branch_csv(path, counts: BranchCounts) -> None:
    n, s = counts.counts(), counts.sigmas()
    _write_rows(path, BRANCH_HEADER, [(b, n[b], s[b]) for b in BRANCHES])


def read_branch_csv(path, integration_time: float = 10.0) -> BranchCounts:
    body = _read_rows(path, BRANCH_HEADER, min_rows=4)
    seen = {}
    for i, row in body:
        b = row[0].strip()
        if b not in BRANCHES:
            raise SchemaError(f"{path}: unknown branch {b!r}", row=i, column="branch")
        if b in seen:
            raise SchemaError(f"{path}: duplicate branch {b!r}", row=i, column="branch")
        seen[b] = (_number(path, row[1], i, "counts", integer=True), _number(path, row[2], i, "sigma"))
    missing = [b for b in BRANCHES if b not in seen]
    if missing:
        raise SchemaError(f"{path}: missing branches {', '.join(missing)}", column="branch")
    try:
        return BranchCounts(
            *(seen[b][0] for b in BRANCHES),
            *(seen[b][1] for b in BRANCHES),
            integration_time=integration_time,
        )
    except ValidationError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


# beating scan -------------------------------------------------------------

def write_beating_csv(path, data: BeatingDataset) -> None:
    _write_rows(path, BEATING_HEADER, zip(data.delays, data.counts, data.sigmas))


def read_beating_csv(path, integration_time_per_point: float = 1.0, min_rows: int = 16) -> BeatingDataset:
    body = _read_rows(path, BEATING_HEADER, min_rows=min_rows)
    delays, counts, sigmas = [], [], []
    for i, row in body:
        d = _number(path, row[0], i, "delay_ps")
        if delays and not d > delays[-1]:
            raise SchemaError(f"{path}: delays must be strictly increasing", row=i, column="delay_ps")
        delays.append(d)
        counts.append(_number(path, row[1], i, "counts", integer=True))
        s = _number(path, row[2], i, "sigma")
        if s < 0:
            raise SchemaError(f"{path}: negative sigma", row=i, column="sigma")
        sigmas.append(s)
    return BeatingDataset(np.array(delays), np.array(counts), np.array(sigmas), integration_time_per_point)


# power scan ---------------------------------------------------------------

def write_power_scan_csv(path, points) -> None:
    _write_rows(path, POWER_HEADER, points)


def read_power_scan_csv(path) -> list[tuple[float, float, float]]:
    body = _read_rows(path, POWER_HEADER, min_rows=4)
    return [
        (_number(path, r[0], i, "power_mw"), _number(path, r[1], i, "singles_hz"), _number(path, r[2], i, "sigma_hz"))
        for i, r in body
    ]


# density matrix -----------------------------------------------------------

def write_density_csv(path, rho: DensityMatrix) -> None:
    rows = []
    for part, block in (("re", rho.entries.real), ("im", rho.entries.imag)):
        for label, line in zip(BASIS_LABELS, block):
            rows.append((part, label, *line))
    _write_rows(path, DENSITY_HEADER, rows)


def read_density_csv(path) -> np.ndarray:
    body = _read_rows(path, DENSITY_HEADER, min_rows=8)
    if len(body) != 8:
        raise SchemaError(f"{path}: expected 8 rows, got {len(body)}")
    m = np.zeros((4, 4), dtype=complex)
    for k, (i, row) in enumerate(body):
        part, label = row[0].strip(), row[1].strip()
        want_part = "re" if k < 4 else "im"
        if part != want_part:
            raise SchemaError(f"{path}: expected part {want_part!r}", row=i, column="part")
        if label != BASIS_LABELS[k % 4]:
            raise SchemaError(f"{path}: expected row {BASIS_LABELS[k % 4]!r}", row=i, column="row")
        vals = [_number(path, v, i, BASIS_LABELS[j]) for j, v in enumerate(row[2:])]
        if part == "re":
            m[k % 4] += np.array(vals)
        else:
            m[k % 4] += 1j * np.array(vals)
    return m


# JSON documents -----------------------------------------------------------

def _num_or_none(x):
    return None if x is None or not math.isfinite(x) else float(x)


def dataset_to_dict(data: BeatingDataset) -> dict:
    return {
        "delays_ps": [float(x) for x in data.delays],
        "counts": [int(x) for x in data.counts],
        "sigma": [float(x) for x in data.sigmas],
        "integration_time_per_point_s": float(data.integration_time_per_point),
    }


def dataset_from_dict(d: dict) -> BeatingDataset:
    return BeatingDataset(
        np.array(d["delays_ps"], dtype=float),
        np.array(d["counts"], dtype=np.int64),
        np.array(d["sigma"], dtype=float),
        d.get("integration_time_per_point_s", 1.0),
    )


def fit_to_dict(fit: BeatingFit, data: BeatingDataset | None = None) -> dict:
    p = fit.params
    out = {
        "schema": FIT_SCHEMA,
        "params": {name: float(getattr(p, name)) for name in PARAM_NAMES},
        "uncertainties": {name: _num_or_none(fit.uncertainties[name]) for name in PARAM_NAMES},
        "reduced_chi_square": _num_or_none(fit.reduced_chi_square),
        "converged": fit.converged,
        "iterations": fit.iterations,
        "n_points": fit.n_points,
        "accidentals_subtracted": fit.accidentals_subtracted,
    }
    if data is not None:
        out["data"] = dataset_to_dict(data)
    return out


def fit_from_dict(d: dict) -> tuple[BeatingFit, BeatingDataset | None]:
    if d.get("schema") != FIT_SCHEMA:
        raise SchemaError(f"expected schema {FIT_SCHEMA!r}, got {d.get('schema')!r}", column="schema")
    try:
        params = BeatingParams(*(float(d["params"][n]) for n in PARAM_NAMES))
        unc = {n: (math.nan if d["uncertainties"][n] is None else float(d["uncertainties"][n])) for n in PARAM_NAMES}
        chi = d["reduced_chi_square"]
        fit = BeatingFit(
            params,
            unc,
            math.nan if chi is None else float(chi),
            bool(d["converged"]),
            int(d["iterations"]),
            int(d.get("n_points", 0)),
            float(d.get("accidentals_subtracted", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed fit document: {exc!r}") from exc
    data = dataset_from_dict(d["data"]) if "data" in d else None
    return fit, data


def write_json(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read JSON {path}: {exc}") from exc


_POLY_KEYS = (
    "quadratic_coeff",
    "linear_coeff",
    "constant",
    "sigma_quadratic",
    "sigma_linear",
    "sigma_constant",
    "chi_square",
    "constrained",
)


def polyfit_to_dict(fit: PolynomialFit) -> dict:
    return {k: getattr(fit, k) for k in _POLY_KEYS}


def polyfit_from_dict(d: dict) -> PolynomialFit:
    return PolynomialFit(**{k: d[k] for k in _POLY_KEYS})


@dataclass(eq=False)
class ReportBundle:
    """Everything the pipeline reports, each value with its uncertainty."""

    branch_counts: BranchCounts
    ratio_db: float
    p: float
    sigma_p: float
    beating_fit: BeatingFit
    density_matrix: DensityMatrix
    fidelity: float
    fidelity_closed_form: float
    bootstrap: dict[str, tuple[float, float]]
    provenance: dict
    beating_data: BeatingDataset | None = None
    power_scan: list | None = None
    power_fit: PolynomialFit | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def physical(self) -> bool:
        return self.density_matrix.physical

    @property
    def sigma_fidelity(self) -> float:
        return self.bootstrap["fidelity"][1]

    def to_dict(self) -> dict:
        rho = self.density_matrix
        bc = self.branch_counts
        doc = {
            "schema": REPORT_SCHEMA,
            "branch_counts": {
                "counts": bc.counts(),
                "sigma": bc.sigmas(),
                "integration_time_s": bc.integration_time,
            },
            "ratio_db": {"value": _num_or_none(self.ratio_db), "infinite": math.isinf(self.ratio_db)},
            "balance": {"p": self.p, "sigma_p": self.sigma_p, "bootstrap_sigma": self.bootstrap["p"][1]},
            "beating_fit": fit_to_dict(self.beating_fit),
            "density_matrix": {
                "basis": list(BASIS_LABELS),
                "real": rho.entries.real.tolist(),
                "imag": rho.entries.imag.tolist(),
                "p": rho.p,
                "V": rho.V,
                "phi": rho.phi,
                "physical": rho.physical,
                "margin": rho.margin,
                "projected": rho.projected,
            },
            "fidelity": {
                "value": self.fidelity,
                "closed_form": self.fidelity_closed_form,
                "sigma": self.sigma_fidelity,
            },
            "bootstrap": {k: {"mean": m, "std": s} for k, (m, s) in self.bootstrap.items()},
            "provenance": dict(self.provenance),
            "warnings": list(self.warnings),
        }
        if self.beating_data is not None:
            doc["beating_data"] = dataset_to_dict(self.beating_data)
        if self.power_scan is not None:
            doc["power_scan"] = {
                "points": [list(map(float, row)) for row in self.power_scan],
                "fit": polyfit_to_dict(self.power_fit) if self.power_fit is not None else None,
            }
        return doc

    @classmethod
    def from_dict(cls, d: dict) -> "ReportBundle":
        if d.get("schema") != REPORT_SCHEMA:
            raise SchemaError(f"expected schema {REPORT_SCHEMA!r}, got {d.get('schema')!r}", column="schema")
        try:
            bcd = d["branch_counts"]
            bc = BranchCounts(
                *(bcd["counts"][b] for b in BRANCHES),
                *(bcd["sigma"][b] for b in BRANCHES),
                integration_time=bcd["integration_time_s"],
            )
            ratio = d["ratio_db"]
            ratio_db = math.inf if ratio["infinite"] else float(ratio["value"])
            fit, _ = fit_from_dict(d["beating_fit"])
            dm = d["density_matrix"]
            rho = DensityMatrix.from_params(dm["p"], dm["V"], dm["phi"], dm.get("projected", False))
            stored = np.array(dm["real"]) + 1j * np.array(dm["imag"])
            if not np.array_equal(stored, rho.entries):
                rho = DensityMatrix(stored, dm["p"], dm["V"], dm["phi"], dm.get("projected", False))
            boot = {k: (v["mean"], v["std"]) for k, v in d["bootstrap"].items()}
            scan = d.get("power_scan")
            return cls(
                branch_counts=bc,
                ratio_db=ratio_db,
                p=d["balance"]["p"],
                sigma_p=d["balance"]["sigma_p"],
                beating_fit=fit,
                density_matrix=rho,
                fidelity=d["fidelity"]["value"],
                fidelity_closed_form=d["fidelity"]["closed_form"],
                bootstrap=boot,
                provenance=dict(d["provenance"]),
                beating_data=dataset_from_dict(d["beating_data"]) if "beating_data" in d else None,
                power_scan=[tuple(r) for r in scan["points"]] if scan else None,
                power_fit=polyfit_from_dict(scan["fit"]) if scan and scan.get("fit") else None,
                warnings=list(d.get("warnings", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed report: {exc!r}") from exc


def provenance(config_hash: str, seed: int) -> dict:
    return {"config_hash": config_hash, "seed": int(seed), "tool_version": __version__}
