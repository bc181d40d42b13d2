"""
File input/output for profiles, nonlinearity tables, bump suites and reports.

ReportStore owns one output directory; every write goes to a temporary file
in that directory first and is then renamed into place.
"""

import json
import logging
import math
import os
import re
import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from bumps import Bump
from errors import DomainError, ProfileFormatError
from family import HFunction
from numerics import RadialGrid
from radial_solver import Nonlinearity, RadialProfile

logger = logging.getLogger(__name__)

PROFILE_COLUMNS = ["r", "u", "du"]
TABLE_COLUMNS = ["s", "g"]
FLOAT_FORMAT = "%.17g"


def _read_numeric_csv(path, required: Sequence[str], optional: Sequence[str] = ()) -> pd.DataFrame:
    """Read a CSV of decimal columns; errors carry the 1-based file line"""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError:
        raise ProfileFormatError(f"file not found: {path}")
    except pd.errors.ParserError as e:
        found = re.search(r"line (\d+)", str(e))
        raise ProfileFormatError(f"{path}: {e}", line=int(found.group(1)) if found else None)
    except (pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ProfileFormatError(f"{path}: {e}", line=1)

    columns = [c.strip() for c in frame.columns]
    frame.columns = columns
    missing = [c for c in required if c not in columns]
    if missing:
        raise ProfileFormatError(f"{path}: header lacks column(s) {', '.join(missing)}", line=1)
    unknown = [c for c in columns if c not in required and c not in optional]
    if unknown:
        raise ProfileFormatError(f"{path}: unexpected column(s) {', '.join(unknown)}", line=1)
    if frame.empty:
        raise ProfileFormatError(f"{path}: no data rows", line=2)

    stripped = frame.apply(lambda col: col.str.strip())
    checked = stripped.apply(lambda col: pd.to_numeric(col, errors="coerce"))
    bad_rows = np.flatnonzero(~np.isfinite(checked.to_numpy(dtype=float)).all(axis=1))
    if bad_rows.size:
        row = int(bad_rows[0])
        raise ProfileFormatError(f"{path}: non-numeric or missing value {frame.iloc[row].tolist()}",
                                 line=row + 2)
    # to_numeric is not correctly rounded; astype parses each field exactly
    try:
        return stripped.astype(float)
    except ValueError as e:
        raise ProfileFormatError(f"{path}: {e}")


def _check_increasing(values: np.ndarray, path, column: str) -> None:
    steps = np.diff(values)
    if np.any(steps <= 0.0):
        row = int(np.flatnonzero(steps <= 0.0)[0]) + 1
        raise ProfileFormatError(f"{path}: column {column} is not strictly increasing", line=row + 2)


# ===== PROFILE OPERATIONS =====

def read_profile(path) -> RadialProfile:
    """Load a profile CSV with header r,u,du[,d2u]"""
    frame = _read_numeric_csv(path, PROFILE_COLUMNS, optional=["d2u"])
    r = frame["r"].to_numpy(dtype=float)
    _check_increasing(r, path, "r")
    try:
        grid = RadialGrid.from_nodes(r)
        d2u = frame["d2u"].to_numpy(dtype=float) if "d2u" in frame else None
        return RadialProfile(grid, frame["u"].to_numpy(dtype=float), frame["du"].to_numpy(dtype=float), d2u)
    except DomainError as e:
        raise ProfileFormatError(f"{path}: {e}")


def profile_frame(profile: RadialProfile) -> pd.DataFrame:
    columns = {"r": profile.r, "u": profile.u, "du": profile.du}
    if profile.d2u is not None:
        columns["d2u"] = profile.d2u
    return pd.DataFrame(columns)


# ===== NONLINEARITY OPERATIONS =====

def read_nonlinearity_table(path) -> Nonlinearity:
    """Load a g table CSV with header s,g[,gprime]"""
    frame = _read_numeric_csv(path, TABLE_COLUMNS, optional=["gprime"])
    s = frame["s"].to_numpy(dtype=float)
    _check_increasing(s, path, "s")
    gprime = frame["gprime"].to_numpy(dtype=float) if "gprime" in frame else None
    try:
        return Nonlinearity.tabulated(s, frame["g"].to_numpy(dtype=float), gprime, label=f"table:{path}")
    except DomainError as e:
        raise ProfileFormatError(f"{path}: {e}")


def nonlinearity_frame(g: Nonlinearity) -> pd.DataFrame:
    return pd.DataFrame({"s": g.s_nodes, "g": g.g_nodes, "gprime": g.gprime_nodes})


def _spec_numbers(text: str, parts: List[str], count: int) -> List[float]:
    if len(parts) != count:
        raise DomainError(f"spec {text!r} needs {count} numeric field(s)")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise DomainError(f"spec {text!r} has a non-numeric field")
    if not all(math.isfinite(v) for v in values):
        raise DomainError(f"spec {text!r} has a non-finite field")
    return values


def parse_nonlinearity(text: str) -> Nonlinearity:
    """const:<c> | exp:<lambda> | power:<lambda>:<p> | table:<path>"""
    kind, _, rest = text.strip().partition(":")
    if kind == "table":
        if not rest:
            raise DomainError("table nonlinearity needs a path")
        return read_nonlinearity_table(rest)
    parts = rest.split(":") if rest else []
    if kind == "const":
        (c,) = _spec_numbers(text, parts, 1)
        if not c > 0.0:
            raise DomainError(f"constant nonlinearity must be positive, got {c}")
        return Nonlinearity.constant(c)
    if kind == "exp":
        (lam,) = _spec_numbers(text, parts, 1)
        return Nonlinearity.exponential(lam)
    if kind == "power":
        lam, p = _spec_numbers(text, parts, 2)
        return Nonlinearity.power(lam, p)
    raise DomainError(f"unknown nonlinearity spec {text!r}")


def parse_h(text: str) -> HFunction:
    """[h=]zero | const:<a> | pow:<a>:<b> | table:<path>"""
    text = text.strip()
    if text.startswith("h="):
        text = text[2:]
    kind, _, rest = text.partition(":")
    if kind == "zero" and not rest:
        return HFunction("zero")
    if kind == "table":
        frame = _read_numeric_csv(rest, ["r", "h"])
        r = frame["r"].to_numpy(dtype=float)
        _check_increasing(r, rest, "r")
        return HFunction("table", table_r=r, table_h=frame["h"].to_numpy(dtype=float))
    parts = rest.split(":") if rest else []
    if kind == "const":
        (a,) = _spec_numbers(text, parts, 1)
        return HFunction("const", a=a)
    if kind == "pow":
        a, b = _spec_numbers(text, parts, 2)
        return HFunction("pow", a=a, b=b)
    raise DomainError(f"unknown h spec {text!r}")


# ===== BUMP SUITE OPERATIONS =====

def load_bump_suite(path) -> List[Bump]:
    """Bumps from a CSV with header center,width; supports must lie inside (0, 1)"""
    frame = _read_numeric_csv(path, ["center", "width"])
    suite = []
    for row, (center, width) in enumerate(frame[["center", "width"]].itertuples(index=False)):
        if not (width > 0.0 and center - width > 0.0 and center + width < 1.0):
            raise ProfileFormatError(f"{path}: bump ({center}, {width}) is not supported inside (0, 1)",
                                     line=row + 2)
        suite.append(Bump(float(center), float(width)))
    return suite


# ===== REPORT STORE =====

def _json_safe(value):
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    return value


class ReportStore:
    def __init__(self, out_dir: Optional[str] = None):
        """Use out_dir for all outputs (created if missing); defaults to the working directory"""
        self.out_dir = Path(out_dir) if out_dir else Path.cwd()
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def _atomic_write(self, name: str, text: str) -> Path:
        target = self.path(name)
        handle = tempfile.NamedTemporaryFile("w", dir=self.out_dir, prefix=f".{name}.", suffix=".tmp",
                                             delete=False, encoding="utf-8", newline="")
        try:
            with handle:
                handle.write(text)
            os.replace(handle.name, target)
        except BaseException:
            if os.path.exists(handle.name):
                os.unlink(handle.name)
            raise
        logger.debug("wrote %s", target)
        return target

    def save_profile(self, profile: RadialProfile, name: str = "profile.csv") -> Path:
        return self._atomic_write(name, profile_frame(profile).to_csv(index=False, float_format=FLOAT_FORMAT))

    def save_nonlinearity(self, g: Nonlinearity, name: str = "g_table.csv") -> Path:
        return self._atomic_write(name, nonlinearity_frame(g).to_csv(index=False, float_format=FLOAT_FORMAT))

    def save_report(self, report: Dict, name: str) -> Path:
        text = json.dumps(_json_safe(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        return self._atomic_write(name, text)

    def load_report(self, name: str) -> Dict:
        return json.loads(self.path(name).read_text(encoding="utf-8"))
