"""Per-patient file parsing and feature construction.

Reads pipe-separated hourly records (one file per patient), forward-fills
irregularly sampled columns, and builds the modelling panel: derangement
risk-score node series, trailing-window vital summaries, a lab-test count
acuity proxy, and static covariates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PsvParseError
from .panel import PatientPanel
from .rules import SadRule, group_order

VITAL_COLUMNS = ("HR", "O2Sat", "Temp", "SBP", "MAP", "DBP", "Resp", "EtCO2")
LAB_COLUMNS = (
    "BaseExcess", "HCO3", "FiO2", "pH", "PaCO2", "SaO2", "AST", "BUN",
    "Alkalinephos", "Calcium", "Chloride", "Creatinine", "Bilirubin_direct",
    "Glucose", "Lactate", "Magnesium", "Phosphate", "Potassium",
    "Bilirubin_total", "TroponinI", "Hct", "Hgb", "PTT", "WBC",
    "Fibrinogen", "Platelets",
)
STATIC_COLUMNS = ("Age", "Gender")
SEPSIS_COLUMN = "SepsisLabel"

# Trailing-window vital summaries kept as exogenous features.  Blood pressure
# is reduced to MAP = (SBP + 2 DBP)/3; Resp keeps only mean/min.
SUMMARY_SPEC = (
    ("HR", ("max", "min", "mean")),
    ("O2Sat", ("max", "min", "mean")),
    ("Temp", ("max", "min", "mean")),
    ("MAP", ("max", "min", "mean")),
    ("Resp", ("mean", "min")),
)


@dataclass(frozen=True)
class RawRecord:
    """One patient's table: float columns with NaN for absent cells.

    ``observed`` keeps the as-parsed presence flags, which survive forward
    filling; downstream counts of raw reports must use them, never ``values``.
    """

    patient_id: str
    columns: tuple[str, ...]
    values: dict[str, np.ndarray]
    observed: dict[str, np.ndarray]

    @property
    def n_rows(self) -> int:
        return len(self.values[self.columns[0]]) if self.columns else 0

    def hours(self) -> np.ndarray:
        """Time axis in hours: ICULOS when present, else 1..T."""
        if "ICULOS" in self.values and np.all(np.isfinite(self.values["ICULOS"])):
            return self.values["ICULOS"]
        return np.arange(1, self.n_rows + 1, dtype=float)

    def static_value(self, column: str) -> float:
        vals = self.values.get(column)
        if vals is None:
            return math.nan
        finite = vals[np.isfinite(vals)]
        return float(finite[0]) if finite.size else math.nan


def parse_psv(text: str, patient_id: str = "") -> RawRecord:
    """Parse a pipe-separated table into a RawRecord.

    Empty cells and 'NaN' map to absent. Malformed rows raise PsvParseError
    with the row index; non-numeric cells name the offending column.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise PsvParseError("empty input")
    columns = tuple(c.strip() for c in lines[0].split("|"))
    n_cols = len(columns)
    n_rows = len(lines) - 1
    values = {c: np.full(n_rows, np.nan) for c in columns}
    for i, line in enumerate(lines[1:]):
        cells = line.split("|")
        if len(cells) != n_cols:
            raise PsvParseError(
                f"row {i + 1}: expected {n_cols} cells, got {len(cells)}")
        for c, cell in zip(columns, cells):
            cell = cell.strip()
            if cell == "" or cell.lower() == "nan":
                continue
            try:
                values[c][i] = float(cell)
            except ValueError:
                raise PsvParseError(f"row {i + 1}: non-numeric value "
                                    f"{cell!r} in column {c}") from None
    observed = {c: np.isfinite(v) for c, v in values.items()}
    _validate_record(columns, values, observed)
    return RawRecord(patient_id, columns, values, observed)


def _validate_record(columns, values, observed) -> None:
    if "ICULOS" in values:
        hrs = values["ICULOS"]
        if not np.all(observed["ICULOS"]):
            raise PsvParseError("ICULOS has missing entries")
        if np.any(np.diff(hrs) <= 0):
            raise PsvParseError("ICULOS not strictly increasing")
    for col in ("Gender", SEPSIS_COLUMN):
        if col in values:
            vals = values[col][observed[col]]
            if vals.size and not np.all(np.isin(vals, (0.0, 1.0))):
                raise PsvParseError(f"{col} must be 0/1")


def read_psv(path) -> RawRecord:
    from pathlib import Path
    p = Path(path)
    return parse_psv(p.read_text(), patient_id=p.stem)


def write_psv(record: RawRecord) -> str:
    """Inverse of parse_psv (absent cells written as 'NaN'; floats use the
    shortest representation that round-trips)."""
    lines = ["|".join(record.columns)]
    for i in range(record.n_rows):
        cells = []
        for c in record.columns:
            v = record.values[c][i]
            cells.append("NaN" if not np.isfinite(v) else repr(float(v)))
        lines.append("|".join(cells))
    return "\n".join(lines) + "\n"


def forward_fill(record: RawRecord, horizon_hours: int = 24,
                 required_columns=None) -> RawRecord:
    """Carry each raw observation forward for up to ``horizon_hours``.

    Filling always sources from raw observations (not previously filled
    cells), which makes the operation idempotent. When ``required_columns``
    is given, rows still missing any of them after filling are dropped.
    """
    if horizon_hours < 1:
        raise ValueError("horizon_hours must be >= 1")
    hours = record.hours()
    filled: dict[str, np.ndarray] = {}
    for col in record.columns:
        vals = record.values[col].copy()
        obs = record.observed[col]
        last_val, last_hr = math.nan, -math.inf
        for i in range(len(vals)):
            if obs[i]:
                last_val, last_hr = vals[i], hours[i]
            elif hours[i] - last_hr <= horizon_hours:
                vals[i] = last_val
        filled[col] = vals
    keep = np.ones(record.n_rows, dtype=bool)
    if required_columns:
        for col in required_columns:
            if col in filled:
                keep &= np.isfinite(filled[col])
    if not np.all(keep):
        filled = {c: v[keep] for c, v in filled.items()}
        observed = {c: record.observed[c][keep] for c in record.columns}
    else:
        observed = {c: record.observed[c].copy() for c in record.columns}
    return RawRecord(record.patient_id, record.columns, filled, observed)


def effective_map(record: RawRecord) -> np.ndarray:
    """MAP series, derived from (SBP + 2 DBP)/3 where MAP itself is absent."""
    n = record.n_rows
    out = record.values.get("MAP", np.full(n, np.nan)).copy()
    sbp = record.values.get("SBP", np.full(n, np.nan))
    dbp = record.values.get("DBP", np.full(n, np.nan))
    derived = (sbp + 2.0 * dbp) / 3.0
    missing = ~np.isfinite(out)
    out[missing] = derived[missing]
    return out


def build_sad_series(record: RawRecord, rules: list[SadRule],
                     include_sepsis: bool = True):
    """Risk-score node series: per group and time, the sum of risk scores of
    members whose abnormality predicate holds. Returns (scores, names, mask).
    """
    known = set(record.columns) | set(VITAL_COLUMNS) | set(LAB_COLUMNS)
    groups = group_order(rules)
    T = record.n_rows
    scores = np.zeros((len(groups), T))
    gindex = {g: k for k, g in enumerate(groups)}
    for r in rules:
        if r.column not in known:
            raise ConfigError(f"rule references unknown measurement {r.column!r}")
        vals = record.values.get(r.column)
        if vals is None:
            continue
        hit = np.array([r.abnormal(v) for v in vals])
        scores[gindex[r.sad_name]] += r.risk_score * hit
    names = list(groups)
    mask = np.ones(scores.shape, dtype=bool)
    if include_sepsis and SEPSIS_COLUMN in record.values:
        lab = record.values[SEPSIS_COLUMN]
        scores = np.vstack([scores, np.where(np.isfinite(lab), lab, 0.0)])
        mask = np.vstack([mask, np.isfinite(lab)])
        names.append("Sepsis")
    return scores, tuple(names), mask


def _window_stat(values: np.ndarray, hours: np.ndarray, window: float, stat: str):
    """Trailing-window summary over hours in [t - window + 1, t]."""
    T = len(values)
    out = np.full(T, np.nan)
    valid = np.zeros(T, dtype=bool)
    fn = {"max": np.max, "min": np.min, "mean": np.mean}[stat]
    for t in range(T):
        in_win = (hours >= hours[t] - window + 1) & (hours <= hours[t])
        vals = values[in_win]
        vals = vals[np.isfinite(vals)]
        if vals.size:
            out[t] = fn(vals)
            valid[t] = True
    return out, valid


def build_exogenous(record: RawRecord, window_hours: int = 6):
    """Vital summaries + lab-count + ICULOS. Returns (x, names, mask).

    The lab count uses raw (pre-fill) presence flags, so forward filling
    never changes it.
    """
    if window_hours < 1:
        raise ValueError("window_hours must be >= 1")
    hours = record.hours()
    T = record.n_rows
    series: list[np.ndarray] = []
    names: list[str] = []
    masks: list[np.ndarray] = []
    for vital, stats in SUMMARY_SPEC:
        base = effective_map(record) if vital == "MAP" else \
            record.values.get(vital, np.full(T, np.nan))
        for stat in stats:
            vals, valid = _window_stat(base, hours, window_hours, stat)
            series.append(vals)
            names.append(f"{vital}_{stat}")
            masks.append(valid)
    lab_count = np.zeros(T)
    for col in LAB_COLUMNS:
        obs = record.observed.get(col)
        if obs is None:
            continue
        for t in range(T):
            in_win = (hours >= hours[t] - window_hours + 1) & (hours <= hours[t])
            lab_count[t] += np.count_nonzero(obs & in_win)
    series.append(lab_count)
    names.append("lab_count")
    masks.append(np.ones(T, dtype=bool))
    series.append(hours.astype(float))
    names.append("ICULOS")
    masks.append(np.ones(T, dtype=bool))
    x = np.vstack(series) if series else np.zeros((0, T))
    mask = np.vstack(masks)
    x = np.where(mask, x, 0.0)
    return x, tuple(names), mask


def abnormality_indicators(record: RawRecord, rules: list[SadRule],
                           include_sepsis: bool = True):
    """Binary series per measurement: 1 when the raw value was reported and
    abnormal. Evaluated on pre-fill values. Returns (indicators, names).
    """
    T = record.n_rows
    series, names = [], []
    for r in rules:
        vals = record.values.get(r.column)
        obs = record.observed.get(r.column)
        ind = np.zeros(T)
        if vals is not None:
            for t in range(T):
                if obs[t] and r.abnormal(vals[t]):
                    ind[t] = 1.0
        series.append(ind)
        names.append(r.column)
    if include_sepsis and SEPSIS_COLUMN in record.values:
        lab = record.values[SEPSIS_COLUMN]
        series.append(np.where(np.isfinite(lab), lab, 0.0))
        names.append(SEPSIS_COLUMN)
    return np.vstack(series), tuple(names)


def build_panel(raw: RawRecord, rules: list[SadRule], fill_horizon: int = 24,
                window_hours: int = 6, node_mode: str = "sad",
                required_columns=None) -> PatientPanel:
    """Full ingest pipeline for one patient.

    node_mode 'sad': y = derangement scores (+ sepsis), x = vital summaries,
    lab count and ICULOS, z = (Age, Gender). node_mode 'abnormality': y = the
    per-measurement abnormality indicators (pre-fill), no x.
    """
    if node_mode == "abnormality":
        y, y_names = abnormality_indicators(raw, rules)
        return PatientPanel(raw.patient_id, y, np.zeros((0, raw.n_rows)),
                            np.zeros(0), y_names, (), ())
    if required_columns is None:
        required_columns = [v for v, _ in SUMMARY_SPEC if v != "MAP"]
    filled = forward_fill(raw, fill_horizon, required_columns=required_columns)
    # `filled.observed` still carries raw presence, so the lab count is
    # unaffected by the fill.
    y, y_names, y_mask = build_sad_series(filled, rules)
    x, x_names, x_mask = build_exogenous(filled, window_hours)
    z = np.array([filled.static_value(c) for c in STATIC_COLUMNS])
    z = np.where(np.isfinite(z), z, 0.0)
    return PatientPanel(raw.patient_id, y, x, z, y_names, x_names,
                        STATIC_COLUMNS, y_mask=y_mask, x_mask=x_mask)


def subgroup_match(record: RawRecord, sex=None, min_age=None, max_age=None) -> bool:
    """Demographic predicate used for sub-group analysis at ingest time."""
    if sex is not None:
        g = record.static_value("Gender")
        if not (np.isfinite(g) and int(g) == int(sex)):
            return False
    age = record.static_value("Age")
    if min_age is not None and not (np.isfinite(age) and age > min_age):
        return False
    if max_age is not None and not (np.isfinite(age) and age <= max_age):
        return False
    return True


def panel_to_record(panel: PatientPanel) -> RawRecord:
    """Render a panel in the same pipe-separated dialect read_psv accepts
    (column names prefixed y:/x:/z:), enabling export round-trips."""
    T = panel.T
    columns = ["ICULOS"]
    values = {"ICULOS": np.arange(1, T + 1, dtype=float)}
    for i, name in enumerate(panel.y_names):
        col = f"y:{name}"
        columns.append(col)
        values[col] = np.where(panel.y_mask[i], panel.y[i], np.nan)
    for i, name in enumerate(panel.x_names):
        col = f"x:{name}"
        columns.append(col)
        values[col] = np.where(panel.x_mask[i], panel.x[i], np.nan)
    for i, name in enumerate(panel.z_names):
        col = f"z:{name}"
        columns.append(col)
        values[col] = np.full(T, panel.z[i])
    observed = {c: np.isfinite(v) for c, v in values.items()}
    return RawRecord(panel.patient_id, tuple(columns), values, observed)


def record_to_panel(record: RawRecord) -> PatientPanel:
    """Inverse of panel_to_record for prefixed columns."""
    y_names = [c[2:] for c in record.columns if c.startswith("y:")]
    x_names = [c[2:] for c in record.columns if c.startswith("x:")]
    z_names = [c[2:] for c in record.columns if c.startswith("z:")]
    T = record.n_rows
    y = np.vstack([record.values[f"y:{n}"] for n in y_names]) if y_names else np.zeros((0, T))
    x = np.vstack([record.values[f"x:{n}"] for n in x_names]) if x_names else np.zeros((0, T))
    z = np.array([record.values[f"z:{n}"][0] for n in z_names])
    y_mask = np.isfinite(y)
    x_mask = np.isfinite(x)
    return PatientPanel(record.patient_id, np.nan_to_num(y), np.nan_to_num(x), z,
                        tuple(y_names), tuple(x_names), tuple(z_names),
                        y_mask=y_mask, x_mask=x_mask)
