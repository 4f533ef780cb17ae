"""Fixed-format MPS export/import plus a symbol-map companion file.

Columns are written as ``C0000001``..., rows as ``R0000001``... (fixed
MPS allows eight characters per name); the companion CSV maps those back
to model names, symbols and indices. Numbers use Python's shortest
round-tripping representation, which can run past column 36 of the
classic layout; every reader that splits on whitespace accepts that.
The objective sense is given in an ``OBJSENSE`` section and the objective
constant as minus the right-hand side of the objective row, the usual
convention of third-party solvers. Model metadata travels in a leading
comment line so that an imported model can be turned back into a dispatch.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from types import MappingProxyType

import numpy as np

from ..errors import MpsFormatError
from ..model import Column, MilpModel, Row

OBJ = "OBJ"
_SECTIONS = ("NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA")


def _num(v: float) -> str:
    v = float(v)
    if v == 0.0:
        return "0"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _line(f1: str, f2: str, f3: str = "", f4: str = "") -> str:
    # fixed columns: 2-3, 5-12, 15-22, 25-36
    s = f" {f1:<2} {f2:<8}"
    if f3:
        s += f"  {f3:<8}"
    if f4:
        s += f"  {f4}"
    return s.rstrip()


def map_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".map.csv")


def _meta_json(meta) -> str:
    return json.dumps({k: (list(v) if isinstance(v, tuple) else v) for k, v in meta.items()},
                      sort_keys=True, separators=(",", ":"))


def export_mps(model: MilpModel, path: str | Path) -> tuple[Path, Path]:
    """Write ``model`` as fixed MPS and its symbol map; returns both paths."""
    path = Path(path)
    cname = [f"C{j + 1:07d}" for j in range(model.n_cols)]
    rname = [f"R{i + 1:07d}" for i in range(model.n_rows)]
    by_col: list[list[tuple[int, float]]] = [[] for _ in range(model.n_cols)]
    for i, r in enumerate(model.rows):
        for j, v in r.coeffs:
            by_col[j].append((i, v))
    out = [f"* META {_meta_json(model.meta)}", f"NAME          {model.name[:8]}",
           "OBJSENSE", "    MAX", "ROWS", f" N  {OBJ}"]
    out += [f" {r.sense}  {rname[i]}" for i, r in enumerate(model.rows)]
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for j, col in enumerate(model.columns):
        if col.binary != in_int:
            tag = "'INTORG'" if col.binary else "'INTEND'"
            out.append(f"    MARKER{marker:02d}  'MARKER'                 {tag}")
            marker += 1
            in_int = col.binary
        entries = []
        if model.objective[j] != 0.0:
            entries.append((OBJ, model.objective[j]))
        entries += [(rname[i], v) for i, v in by_col[j]]
        if not entries:
            entries.append((OBJ, 0.0))
        out += ["    " + f"{cname[j]:<8}  {rn:<8}  {_num(v)}" for rn, v in entries]
    if in_int:
        out.append(f"    MARKER{marker:02d}  'MARKER'                 'INTEND'")
    out.append("RHS")
    if model.objective_constant != 0.0:
        out.append(f"    RHS       {OBJ:<8}  {_num(-model.objective_constant)}")
    out += [f"    RHS       {rname[i]:<8}  {_num(r.rhs)}" for i, r in enumerate(model.rows)
            if r.rhs != 0.0]
    out.append("BOUNDS")
    for j, col in enumerate(model.columns):
        lb, ub, n = col.lb, col.ub, cname[j]
        if lb == ub:
            out.append(_line("FX", "BND", n, _num(lb)))
            continue
        if lb == -np.inf and ub == np.inf:
            out.append(_line("FR", "BND", n))
            continue
        if lb == -np.inf:
            out.append(_line("MI", "BND", n))
        elif lb != 0.0 or ub < 0.0 or col.binary:
            out.append(_line("LO", "BND", n, _num(lb)))
        if ub != np.inf:
            out.append(_line("UP", "BND", n, _num(ub)))
    out.append("ENDATA")
    path.write_text("\n".join(out) + "\n")

    mp = map_path(path)
    with mp.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mps_name", "kind", "name", "symbol", "index", "block", "binary"])
        for j, col in enumerate(model.columns):
            w.writerow([cname[j], "column", col.name, col.symbol,
                        " ".join(str(i) for i in col.index), col.block, int(col.binary)])
        for i, r in enumerate(model.rows):
            w.writerow([rname[i], "row", r.name, r.family, "", "", ""])
    return path, mp


def _float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MpsFormatError(f"expected a number, got {tok!r}", lineno) from None


def import_mps(path: str | Path) -> MilpModel:
    """Read a fixed-format MPS file written by :func:`export_mps` (or a compatible one)."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise MpsFormatError(f"cannot read {path}: {exc.strerror}") from None
    meta: dict = {}
    name = None
    sense_max = False
    section = None
    row_order: list[str] = []
    row_sense: dict[str, str] = {}
    obj_row = None
    col_order: list[str] = []
    col_binary: dict[str, bool] = {}
    coeffs: dict[str, dict[str, float]] = {}
    rhs: dict[str, float] = {}
    lb: dict[str, float] = {}
    ub: dict[str, float] = {}
    integer = False
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        if raw.startswith("*"):
            if raw.startswith("* META "):
                try:
                    meta = json.loads(raw[7:])
                except json.JSONDecodeError as exc:
                    raise MpsFormatError(f"bad metadata comment: {exc.msg}", lineno) from None
            continue
        tok = raw.split()
        if not raw[0].isspace():
            head = tok[0].upper()
            if head not in _SECTIONS:
                raise MpsFormatError(f"unknown section {tok[0]!r}", lineno)
            if section is None and head != "NAME":
                raise MpsFormatError("file must start with a NAME section", lineno)
            if head == "NAME":
                if section is not None:
                    raise MpsFormatError("NAME section repeated", lineno)
                if len(tok) > 2:
                    raise MpsFormatError("malformed NAME section", lineno)
                name = tok[1] if len(tok) == 2 else ""
            elif head == "OBJSENSE" and len(tok) > 1:
                sense_max = _objsense(tok[1], lineno)
            elif head == "RANGES":
                raise MpsFormatError("RANGES section is not supported", lineno)
            section = head
            if head == "ENDATA":
                break
            continue
        if section == "NAME":
            raise MpsFormatError("unexpected data in NAME section", lineno)
        if section == "OBJSENSE":
            sense_max = _objsense(tok[0], lineno)
        elif section == "ROWS":
            if len(tok) != 2 or tok[0].upper() not in ("N", "L", "E", "G"):
                raise MpsFormatError("ROWS entries need a sense (N/L/E/G) and a name", lineno)
            s, r = tok[0].upper(), tok[1]
            if r in row_sense or r == obj_row:
                raise MpsFormatError(f"duplicate row {r}", lineno)
            if s == "N":
                if obj_row is None:
                    obj_row = r
                continue
            row_sense[r] = s
            row_order.append(r)
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1].strip("'").upper() == "MARKER":
                m = tok[2].strip("'").upper()
                if m not in ("INTORG", "INTEND"):
                    raise MpsFormatError(f"unknown marker {tok[2]}", lineno)
                integer = m == "INTORG"
                continue
            if len(tok) not in (3, 5):
                raise MpsFormatError("COLUMNS entries need a column, row and value", lineno)
            c = tok[0]
            if c not in coeffs:
                coeffs[c] = {}
                col_order.append(c)
                col_binary[c] = integer
            for r, v in zip(tok[1::2], tok[2::2]):
                if r != obj_row and r not in row_sense:
                    raise MpsFormatError(f"unknown row {r}", lineno)
                coeffs[c][r] = coeffs[c].get(r, 0.0) + _float(v, lineno)
        elif section == "RHS":
            if len(tok) not in (3, 5):
                raise MpsFormatError("RHS entries need a set name, row and value", lineno)
            for r, v in zip(tok[1::2], tok[2::2]):
                if r != obj_row and r not in row_sense:
                    raise MpsFormatError(f"unknown row {r}", lineno)
                rhs[r] = _float(v, lineno)
        elif section == "BOUNDS":
            kind = tok[0].upper()
            if kind in ("FR", "MI", "PL", "BV"):
                if len(tok) < 3:
                    raise MpsFormatError(f"{kind} bound needs a column", lineno)
            elif len(tok) != 4:
                raise MpsFormatError("BOUNDS entries need a type, set, column and value", lineno)
            c = tok[2]
            if c not in coeffs:
                raise MpsFormatError(f"bound on unknown column {c}", lineno)
            if kind == "UP":
                ub[c] = _float(tok[3], lineno)
            elif kind == "LO":
                lb[c] = _float(tok[3], lineno)
            elif kind == "FX":
                lb[c] = ub[c] = _float(tok[3], lineno)
            elif kind == "FR":
                lb[c], ub[c] = -np.inf, np.inf
            elif kind == "MI":
                lb[c] = -np.inf
            elif kind == "PL":
                ub[c] = np.inf
            elif kind == "BV":
                lb[c], ub[c] = 0.0, 1.0
            else:
                raise MpsFormatError(f"unsupported bound type {tok[0]}", lineno)
        else:
            raise MpsFormatError("data line outside any section", lineno)
    if name is None:
        raise MpsFormatError("missing NAME section", 1)
    if section != "ENDATA":
        raise MpsFormatError("missing ENDATA", len(lines))

    names = _read_map(map_path(path))
    col_index = {c: j for j, c in enumerate(col_order)}
    row_index = {r: i for i, r in enumerate(row_order)}
    sign = 1.0 if sense_max else -1.0
    obj = np.zeros(len(col_order))
    row_terms: list[list[tuple[int, float]]] = [[] for _ in row_order]
    for c, entries in coeffs.items():
        j = col_index[c]
        for r, v in entries.items():
            if r == obj_row:
                obj[j] = sign * v
            elif v != 0.0:
                row_terms[row_index[r]].append((j, v))
    columns = []
    for c in col_order:
        lo, hi = lb.get(c, 0.0), ub.get(c, np.inf)
        binary = col_binary[c]
        if binary and (lo, hi) != (0.0, 1.0):
            if (lo, hi) == (0.0, np.inf) and c not in ub:
                hi = 1.0
            else:
                raise MpsFormatError(f"integer column {c} is not binary ([{lo}, {hi}])")
        nm, sym, index, block = names.get(c, (c, c, (), ""))
        columns.append(Column(nm, sym, index, lo, hi, binary, block))
    rows = []
    for i, r in enumerate(row_order):
        nm, fam = names.get(r, (r, r, (), ""))[:2]
        rows.append(Row(nm, fam, tuple(sorted(row_terms[i])), row_sense[r], rhs.get(r, 0.0)))
    constant = sign * -rhs.get(obj_row, 0.0) if obj_row else 0.0
    if "blocks" in meta:
        meta["blocks"] = tuple(meta["blocks"])
    return MilpModel(tuple(columns), tuple(rows), obj, constant + 0.0, MappingProxyType(meta),
                     name or "model")


def _objsense(tok: str, lineno: int) -> bool:
    t = tok.upper()
    if t in ("MAX", "MAXIMIZE"):
        return True
    if t in ("MIN", "MINIMIZE"):
        return False
    raise MpsFormatError(f"unknown objective sense {tok!r}", lineno)


def _read_map(path: Path) -> dict:
    if not path.exists():
        return {}
    out = {}
    with path.open(newline="") as fh:
        for rec in csv.DictReader(fh):
            index = tuple(int(i) for i in rec["index"].split()) if rec["index"] else ()
            out[rec["mps_name"]] = (rec["name"], rec["symbol"], index, rec["block"])
    return out
