"""MPS reader and writer (free format; fixed-format files are read by
whitespace splitting, so names must not contain blanks)."""

from __future__ import annotations

import gzip
from pathlib import Path

import numpy as np

from .lp import INF, LinearProgram, RowSense
from .sparse import SparseMatrix

SECTIONS = {"NAME", "OBJSENSE", "OBJSENSE MAX", "OBJSENSE MIN", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA"}
_VALUE_BOUNDS = {"UP", "LO", "FX", "LI", "UI"}
_FLAG_BOUNDS = {"FR", "MI", "PL", "BV"}


class MpsParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def _number(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MpsParseError(lineno, f"bad number {tok!r}") from None


def parse_mps(text: bytes | str) -> LinearProgram:
    """Parse an MPS model (optionally gzip-compressed) into a :class:`LinearProgram`."""
    if isinstance(text, bytes):
        if text[:2] == b"\x1f\x8b":
            text = gzip.decompress(text)
        text = text.decode("latin-1")

    name = "LP"
    maximize = False
    obj_row = None
    row_index: dict[str, int] = {}
    row_names: list[str] = []
    senses: list[RowSense] = []
    free_rows: set[str] = set()
    col_index: dict[str, int] = {}
    trip_r: list[int] = []
    trip_c: list[int] = []
    trip_v: list[float] = []
    cost: dict[int, float] = {}
    rhs: dict[int, float] = {}
    ranges: dict[int, float] = {}
    lower: dict[int, float] = {}
    upper: dict[int, float] = {}
    lower_set: set[int] = set()
    offset = 0.0
    section = None
    seen_end = False

    def row_of(tok, lineno):
        if tok == obj_row:
            return -1
        if tok in free_rows:
            return -2
        try:
            return row_index[tok]
        except KeyError:
            raise MpsParseError(lineno, f"unknown row {tok!r}") from None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line or line.lstrip().startswith("*"):
            continue
        if not raw[0].isspace():
            head = line.split()
            key = head[0].upper()
            if key == "NAME":
                section = "NAME"
                name = head[1] if len(head) > 1 else name
                continue
            if key == "OBJSENSE":
                section = "OBJSENSE"
                if len(head) > 1:
                    maximize = head[1].upper().startswith("MAX")
                continue
            if key == "ENDATA":
                seen_end = True
                break
            if key not in SECTIONS:
                # free-format files may leave the OBJSENSE value unindented
                if section == "OBJSENSE" and key in {"MAX", "MAXIMIZE", "MIN", "MINIMIZE"}:
                    maximize = key.startswith("MAX")
                    continue
                raise MpsParseError(lineno, f"unknown section {head[0]!r}")
            section = key
            continue

        tok = line.split()
        if section == "OBJSENSE":
            maximize = tok[0].upper().startswith("MAX")
        elif section == "ROWS":
            if len(tok) != 2:
                raise MpsParseError(lineno, "ROWS entry needs a type and a name")
            kind, rname = tok[0].upper(), tok[1]
            if rname in row_index or rname == obj_row or rname in free_rows:
                raise MpsParseError(lineno, f"duplicate row name {rname!r}")
            if kind == "N":
                if obj_row is None:
                    obj_row = rname
                else:
                    free_rows.add(rname)
            elif kind in ("L", "E", "G"):
                row_index[rname] = len(row_names)
                row_names.append(rname)
                senses.append(RowSense(kind))
            else:
                raise MpsParseError(lineno, f"unknown row type {kind!r}")
        elif section == "COLUMNS":
            if "'MARKER'" in tok:
                continue
            if len(tok) not in (3, 5):
                raise MpsParseError(lineno, "COLUMNS entry must be: column row value [row value]")
            cname = tok[0]
            j = col_index.setdefault(cname, len(col_index))
            for rtok, vtok in zip(tok[1::2], tok[2::2]):
                v = _number(vtok, lineno)
                i = row_of(rtok, lineno)
                if i == -1:
                    cost[j] = cost.get(j, 0.0) + v
                elif i >= 0:
                    trip_r.append(i)
                    trip_c.append(j)
                    trip_v.append(v)
        elif section in ("RHS", "RANGES"):
            pairs = tok[1:] if len(tok) % 2 == 1 else tok
            if len(pairs) not in (2, 4):
                raise MpsParseError(lineno, f"{section} entry must be: [set] row value [row value]")
            for rtok, vtok in zip(pairs[::2], pairs[1::2]):
                v = _number(vtok, lineno)
                i = row_of(rtok, lineno)
                if section == "RHS":
                    if i == -1:
                        offset = -v
                    elif i >= 0:
                        rhs[i] = v
                else:
                    if i == -1:
                        raise MpsParseError(lineno, "range on objective row")
                    if i >= 0:
                        ranges[i] = v
        elif section == "BOUNDS":
            kind = tok[0].upper()
            if kind in _VALUE_BOUNDS:
                if len(tok) == 4:
                    cname, vtok = tok[2], tok[3]
                elif len(tok) == 3:
                    cname, vtok = tok[1], tok[2]
                else:
                    raise MpsParseError(lineno, f"{kind} bound needs a column and a value")
                v = _number(vtok, lineno)
            elif kind in _FLAG_BOUNDS:
                # some writers append a value here; it is ignored
                if len(tok) == 4:
                    cname = tok[2]
                elif len(tok) == 3:
                    cname = tok[2] if tok[2] in col_index else tok[1]
                elif len(tok) == 2:
                    cname = tok[1]
                else:
                    raise MpsParseError(lineno, f"{kind} bound takes a column and no value")
                v = None
            else:
                raise MpsParseError(lineno, f"unknown bound type {kind!r}")
            if cname not in col_index:
                raise MpsParseError(lineno, f"bound on unknown column {cname!r}")
            j = col_index[cname]
            if kind in ("UP", "UI"):
                upper[j] = v
                if v < 0 and j not in lower_set and lower.get(j, 0.0) == 0.0:
                    lower[j] = -INF
            elif kind in ("LO", "LI"):
                lower[j] = v
                lower_set.add(j)
            elif kind == "FX":
                lower[j] = upper[j] = v
                lower_set.add(j)
            elif kind == "FR":
                lower[j], upper[j] = -INF, INF
                lower_set.add(j)
            elif kind == "MI":
                lower[j] = -INF
                lower_set.add(j)
            elif kind == "PL":
                upper[j] = INF
            elif kind == "BV":
                lower[j], upper[j] = 0.0, 1.0
                lower_set.add(j)
        elif section is None or section == "NAME":
            raise MpsParseError(lineno, "data line outside of any section")

    if not seen_end:
        raise MpsParseError(lineno if text else 0, "missing ENDATA")

    m, n = len(row_names), len(col_index)

    def dense(d, size, fill):
        out = np.full(size, fill, dtype=np.float64)
        for k, v in d.items():
            out[k] = v
        return out

    return LinearProgram(
        c=dense(cost, n, 0.0),
        A=SparseMatrix.from_triplets(m, n, trip_r, trip_c, trip_v),
        b=dense(rhs, m, 0.0),
        senses=senses,
        lower=dense(lower, n, 0.0),
        upper=dense(upper, n, INF),
        ranges=dense(ranges, m, np.nan),
        maximize=maximize,
        obj_offset=offset,
        row_names=row_names,
        col_names=list(col_index),
        name=name,
    )


def read_mps(path) -> LinearProgram:
    return parse_mps(Path(path).read_bytes())


def _num(v) -> str:
    return repr(float(v))


def write_mps(lp: LinearProgram, obj_name: str = "OBJ") -> str:
    """Serialize to free-format MPS; :func:`parse_mps` reads it back exactly."""
    out = [f"NAME {lp.name}"]
    if lp.maximize:
        out += ["OBJSENSE", "    MAX"]
    while obj_name in lp.row_names:
        obj_name += "_"
    out.append("ROWS")
    out.append(f" N  {obj_name}")
    out += [f" {s.value}  {r}" for s, r in zip(lp.senses, lp.row_names)]
    out.append("COLUMNS")
    for j, cname in enumerate(lp.col_names):
        if lp.c[j] != 0.0 or lp.A.indptr[j] == lp.A.indptr[j + 1]:
            out.append(f"    {cname}  {obj_name}  {_num(lp.c[j])}")
        idx, val = lp.A.column(j)
        out += [f"    {cname}  {lp.row_names[i]}  {_num(v)}" for i, v in zip(idx, val)]
    out.append("RHS")
    if lp.obj_offset != 0.0:
        out.append(f"    RHS  {obj_name}  {-lp.obj_offset!r}")
    out += [f"    RHS  {r}  {_num(v)}" for r, v in zip(lp.row_names, lp.b) if v != 0.0]
    if not np.all(np.isnan(lp.ranges)):
        out.append("RANGES")
        out += [f"    RNG  {r}  {_num(v)}" for r, v in zip(lp.row_names, lp.ranges) if not np.isnan(v)]
    out.append("BOUNDS")
    for cname, lo, hi in zip(lp.col_names, lp.lower, lp.upper):
        if lo == hi:
            out.append(f" FX BND  {cname}  {_num(lo)}")
            continue
        if lo == -INF and hi == INF:
            out.append(f" FR BND  {cname}")
            continue
        if lo == -INF:
            out.append(f" MI BND  {cname}")
        elif lo != 0.0 or hi < 0:
            out.append(f" LO BND  {cname}  {_num(lo)}")
        if hi != INF:
            out.append(f" UP BND  {cname}  {_num(hi)}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"
