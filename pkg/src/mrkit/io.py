"""Reading summary statistics, writing fit results, plot data and study tables."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import FitResult, Method, MRError, SummaryData, validate
from .diagnostics import DiagnosticsReport

COLUMNS = ("snp_id", "beta_exposure", "se_exposure", "beta_outcome", "se_outcome")
STUDY_COLUMNS = ("setup", "p", "kappa", "method", "bias_pct", "rmse_pct", "ci_len_pct", "coverage_pct", "n_ok", "n_failed")


class IoError(MRError, OSError):
    pass


class MissingColumn(MRError, ValueError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing column {name!r}")


class ParseError(MRError, ValueError):
    def __init__(self, line: int, column: str, message: str = ""):
        self.line, self.column = line, column
        super().__init__(f"line {line}, column {column!r}: {message or 'cannot parse value'}")


def read_summary_tsv(path) -> SummaryData:
    """Parse a tab-separated summary-statistics file.

    Required header columns are ``snp_id beta_exposure se_exposure beta_outcome
    se_outcome``; other columns (allele codes, p-values, ...) are ignored, as
    are blank lines and lines starting with ``#``. Alleles are *not*
    harmonized: both effects must already refer to the same effect allele.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    rows = [(n, line) for n, line in enumerate(text.splitlines(), start=1)]
    rows = [(n, line) for n, line in rows if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise MissingColumn(COLUMNS[0])
    header = [h.strip() for h in rows[0][1].split("\t")]
    for name in COLUMNS:
        if name not in header:
            raise MissingColumn(name)
    index = {name: header.index(name) for name in COLUMNS}

    ids, values = [], []
    for n, line in rows[1:]:
        fields = line.split("\t")
        if len(fields) < len(header):
            raise ParseError(n, header[len(fields)], "too few fields")
        ids.append(fields[index["snp_id"]].strip())
        row = []
        for name in COLUMNS[1:]:
            raw = fields[index[name]].strip()
            try:
                row.append(float(raw))
            except ValueError:
                raise ParseError(n, name, f"not a number: {raw!r}") from None
        values.append(row)
    arr = np.array(values, dtype=float).reshape(-1, 4)
    return validate(SummaryData(ids, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]))


def _fmt(x: float) -> str:
    return "null" if not math.isfinite(x) else "%.17g" % x


def _dumps(obj, indent: int = 0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}"{k}": {_dumps(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[" + ", ".join(_dumps(v, indent + 1) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def fit_to_dict(result: FitResult, diagnostics: DiagnosticsReport | None = None, ci_level: float = 0.95, kappa: float | None = None) -> dict:
    """Result as an ordered dict with the stable key set; tau2 keys only for APS/RAPS."""
    out = {
        "method": result.method.value,
        "beta_hat": result.beta_hat,
        "beta_se": result.beta_se,
        "ci": list(result.ci(ci_level)),
    }
    if result.method in (Method.APS, Method.RAPS):
        out["tau2_hat"] = result.tau2_hat
        out["tau2_se"] = result.tau2_se
    out["n_snps"] = result.n_snps
    out["kappa_hat"] = diagnostics.kappa_hat if diagnostics is not None else kappa
    s = result.solver
    out["solver"] = {
        "converged": bool(s.converged),
        "iterations": s.iterations,
        "final_score_norm": s.final_score_norm,
        "n_roots_found": s.n_roots_found,
    }
    out["warnings"] = list(result.warnings)
    return out


def write_fit_json(result: FitResult, diagnostics: DiagnosticsReport | None, path, ci_level: float = 0.95, kappa: float | None = None) -> None:
    """Write a fit as JSON; every float carries 17 significant digits so it
    parses back bit-exactly."""
    text = _dumps(fit_to_dict(result, diagnostics, ci_level, kappa)) + "\n"
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _write_csv(path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["%.17g" % v if isinstance(v, float) else v for v in row])
    try:
        Path(path).write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def emit_plot_data(diagnostics: DiagnosticsReport, prefix) -> tuple[Path, Path]:
    """Write ``<prefix>.qq.csv`` and ``<prefix>.loo.csv``.

    The leave-one-out table is sorted by F-statistic, ascending, which is the
    x-axis of the influence plot. Failed refits get an empty ``beta_loo``.
    """
    if not diagnostics.qq_pairs or not diagnostics.loo_estimates:
        raise IoError("diagnostics are empty; nothing to emit")
    qq_path, loo_path = Path(f"{prefix}.qq.csv"), Path(f"{prefix}.loo.csv")
    _write_csv(qq_path, ("theoretical", "empirical"), diagnostics.qq_pairs)
    f_by_id = dict(zip(diagnostics.snp_ids, diagnostics.f_stats))
    rows = []
    for snp, beta in diagnostics.loo_estimates:
        rows.append((snp, float(f_by_id[snp]), float(beta) if isinstance(beta, float) else ""))
    rows.sort(key=lambda r: r[1])
    _write_csv(loo_path, ("snp_id", "f_stat", "beta_loo"), rows)
    return qq_path, loo_path


def write_study_csv(rows, path, setup_id: int, p: int, kappa: float) -> None:
    """Study metrics in table column order: bias, RMSE, CI length, coverage."""
    _write_csv(
        path,
        STUDY_COLUMNS,
        [
            (setup_id, p, float(kappa), r.method, r.bias_pct, r.rmse_pct, r.ci_len_pct, r.coverage_pct, r.n_ok, r.n_failed)
            for r in rows
        ],
    )
