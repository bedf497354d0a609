"""Matrix Market reading and writing with line-numbered errors.

Coordinate files become canonical sparse COO matrices and array files
become dense arrays; both are complex. Values are written with 17
significant digits so a write/read cycle reproduces every double exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .core import as_sparse

FORMATS = ("coordinate", "array")
FIELDS = ("real", "complex", "integer")
SYMMETRIES = ("general", "symmetric", "hermitian", "skew-symmetric")


class MatrixMarketError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _data_lines(lines, start: int):
    for no, raw in enumerate(lines[start:], start=start + 1):
        text = raw.strip()
        if text and not text.startswith("%"):
            yield no, text


def _parse_header(line: str):
    parts = line.split()
    if len(parts) != 5 or parts[0].lower() != "%%matrixmarket" or parts[1].lower() != "matrix":
        raise MatrixMarketError("expected '%%MatrixMarket matrix <format> <field> <symmetry>'", 1)
    fmt, fld, sym = (p.lower() for p in parts[2:])
    if fmt not in FORMATS:
        raise MatrixMarketError(f"unsupported format {fmt!r}", 1)
    if fld not in FIELDS:
        raise MatrixMarketError(f"unsupported field {fld!r}", 1)
    if sym not in SYMMETRIES:
        raise MatrixMarketError(f"unsupported symmetry {sym!r}", 1)
    if sym == "hermitian" and fld != "complex":
        raise MatrixMarketError("hermitian symmetry requires the complex field", 1)
    return fmt, fld, sym


def _value(tokens: list[str], fld: str, no: int) -> complex:
    want = 2 if fld == "complex" else 1
    if len(tokens) != want:
        raise MatrixMarketError(f"expected {want} value(s), got {len(tokens)}", no)
    try:
        if fld == "integer":
            return complex(int(tokens[0]))
        if fld == "real":
            return complex(float(tokens[0]))
        return complex(float(tokens[0]), float(tokens[1]))
    except ValueError as exc:
        raise MatrixMarketError(f"bad numeric value: {exc}", no) from None


def _ints(text: str, count: int, no: int, what: str) -> list[int]:
    tokens = text.split()
    if len(tokens) != count:
        raise MatrixMarketError(f"{what} needs {count} integers", no)
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise MatrixMarketError(f"{what} must be integers", no) from None


def _mirror(sym: str, v: complex) -> complex:
    if sym == "symmetric":
        return v
    if sym == "hermitian":
        return v.conjugate()
    return -v


def parse_matrix_market(text: str):
    """Parse Matrix Market text (see :func:`ingest_matrix`)."""
    lines = text.splitlines()
    if not lines:
        raise MatrixMarketError("empty file", 1)
    fmt, fld, sym = _parse_header(lines[0])
    body = _data_lines(lines, 1)
    try:
        no, size_line = next(body)
    except StopIteration:
        raise MatrixMarketError("missing size line", len(lines)) from None

    if fmt == "coordinate":
        rows, cols, nnz = _ints(size_line, 3, no, "size line")
    else:
        rows, cols = _ints(size_line, 2, no, "size line")
    if rows < 0 or cols < 0:
        raise MatrixMarketError("negative dimension", no)
    if sym != "general" and rows != cols:
        raise MatrixMarketError(f"{sym} matrix must be square", no)

    if fmt == "array":
        return _parse_array(body, rows, cols, fld, sym, len(lines))
    return _parse_coordinate(body, rows, cols, nnz, fld, sym, len(lines))


def _parse_coordinate(body, rows, cols, nnz, fld, sym, last_line):
    seen: set[tuple[int, int]] = set()
    r_idx, c_idx, vals = [], [], []
    count = 0
    for no, text in body:
        if count == nnz:
            raise MatrixMarketError(f"more than the declared {nnz} entries", no)
        tokens = text.split()
        if len(tokens) < 3:
            raise MatrixMarketError("entry needs row, column and value", no)
        i, j = _ints(" ".join(tokens[:2]), 2, no, "entry index")
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise MatrixMarketError(f"index ({i}, {j}) outside {rows}x{cols}", no)
        v = _value(tokens[2:], fld, no)
        i, j = i - 1, j - 1
        if sym != "general" and j > i:
            raise MatrixMarketError(f"{sym} files store the lower triangle only", no)
        if sym == "skew-symmetric" and i == j:
            raise MatrixMarketError("skew-symmetric diagonal must be empty", no)
        if (i, j) in seen:
            raise MatrixMarketError(f"duplicate entry ({i + 1}, {j + 1})", no)
        seen.add((i, j))
        r_idx.append(i)
        c_idx.append(j)
        vals.append(v)
        if sym != "general" and i != j:
            r_idx.append(j)
            c_idx.append(i)
            vals.append(_mirror(sym, v))
        count += 1
    if count != nnz:
        raise MatrixMarketError(f"declared {nnz} entries, found {count}", last_line)
    mat = sp.coo_matrix((np.array(vals, dtype=complex), (r_idx, c_idx)), shape=(rows, cols))
    return as_sparse(mat)


def _parse_array(body, rows, cols, fld, sym, last_line):
    if sym == "general":
        slots = [(i, j) for j in range(cols) for i in range(rows)]
    else:
        first = 1 if sym == "skew-symmetric" else 0
        slots = [(i, j) for j in range(cols) for i in range(j + first, rows)]
    out = np.zeros((rows, cols), dtype=complex)
    count = 0
    for no, text in body:
        if count == len(slots):
            raise MatrixMarketError(f"more than the expected {len(slots)} values", no)
        i, j = slots[count]
        v = _value(text.split(), fld, no)
        out[i, j] = v
        if sym != "general" and i != j:
            out[j, i] = _mirror(sym, v)
        count += 1
    if count != len(slots):
        raise MatrixMarketError(f"expected {len(slots)} values, found {count}", last_line)
    return out


def ingest_matrix(path):
    """Read a Matrix Market file.

    Coordinate files give a complex COO matrix (duplicates rejected,
    symmetric variants expanded); array files give a dense complex array.
    Real and integer fields are promoted to complex.
    """
    return parse_matrix_market(Path(path).read_text(encoding="utf-8"))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_matrix_market(mat, field: str | None = None, comment: str | None = None) -> str:
    """Matrix Market text for ``mat`` (coordinate if sparse, array if dense)."""
    sparse = sp.issparse(mat)
    if sparse:
        coo = as_sparse(mat)
        data = coo.data
    else:
        dense = np.asarray(mat, dtype=complex)
        if dense.ndim != 2:
            raise ValueError("expected a 2-D matrix")
        data = dense.ravel()
    if field is None:
        field = "complex" if np.any(np.asarray(data).imag != 0) else "real"
    if field not in ("real", "complex"):
        raise ValueError("field must be 'real' or 'complex'")
    if field == "real" and np.any(np.asarray(data).imag != 0):
        raise ValueError("matrix has imaginary parts; use field='complex'")

    def val(v: complex) -> str:
        return _fmt(v.real) if field == "real" else f"{_fmt(v.real)} {_fmt(v.imag)}"

    out = [f"%%MatrixMarket matrix {'coordinate' if sparse else 'array'} {field} general"]
    if comment:
        out.extend(f"% {line}" for line in comment.splitlines())
    if sparse:
        out.append(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}")
        out.extend(f"{i + 1} {j + 1} {val(v)}" for i, j, v in zip(coo.row, coo.col, coo.data))
    else:
        out.append(f"{dense.shape[0]} {dense.shape[1]}")
        out.extend(val(v) for v in dense.T.ravel())
    return "\n".join(out) + "\n"


def export_matrix(mat, path, field: str | None = None, comment: str | None = None) -> None:
    Path(path).write_text(format_matrix_market(mat, field, comment), encoding="utf-8")
