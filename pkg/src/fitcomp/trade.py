"""Export-matrix data model: ingestion, pruning, RCA and binarization."""
import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllPruned,
    DuplicateLabel,
    EmptyInput,
    NegativeValue,
    NonFiniteValue,
    NotPruned,
    ParseError,
)

CSV_HEADER = ("country", "product", "value")


def _frozen(values):
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class _Labeled:
    countries: tuple
    products: tuple
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "countries", tuple(self.countries))
        object.__setattr__(self, "products", tuple(self.products))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != (len(self.countries), len(self.products)):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.countries)} countries x {len(self.products)} products"
            )
        for kind, labels in (("country", self.countries), ("product", self.products)):
            if len(set(labels)) != len(labels):
                raise DuplicateLabel(f"duplicate {kind} identifiers")

    @property
    def shape(self):
        return self.values.shape

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.countries == other.countries
            and self.products == other.products
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ExportMatrix(_Labeled):
    """Extensive flow matrix X[c, p] in currency units.

    ``unit`` is opaque metadata; nothing in the package converts it.
    """

    unit: str = "USD"

    def __post_init__(self):
        super().__post_init__()
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteValue("export values must be finite")
        if np.any(self.values < 0):
            raise NegativeValue("export values must be nonnegative")

    @property
    def country_totals(self):
        return self.values.sum(axis=1)

    @property
    def product_totals(self):
        return self.values.sum(axis=0)

    @property
    def total(self):
        return float(self.values.sum())

    def scaled(self, factor):
        """Same flows expressed in a unit ``factor`` times smaller."""
        return ExportMatrix(self.countries, self.products, self.values * factor, self.unit)


@dataclass(frozen=True, eq=False)
class RcaMatrix(_Labeled):
    pass


@dataclass(frozen=True, eq=False)
class BinaryMatrix(_Labeled):
    """0/1 specialisation matrix M[c, p], already re-pruned.

    ``dropped_countries``/``dropped_products`` list identifiers removed because
    binarization left them with no entries.
    """

    dropped_countries: tuple = field(default=())
    dropped_products: tuple = field(default=())

    def __post_init__(self):
        super().__post_init__()
        if not np.all((self.values == 0) | (self.values == 1)):
            raise ValueError("binary matrix entries must be 0 or 1")


def ingest_flows(records, unit="USD"):
    """Build an (unpruned) ExportMatrix from ``(country, product, value)`` records.

    Duplicate pairs are summed; rows and columns follow sorted identifiers.
    """
    totals = {}
    for country, product, value in records:
        value = float(value)
        if not math.isfinite(value):
            raise NonFiniteValue(f"non-finite value for ({country}, {product})")
        if value < 0:
            raise NegativeValue(f"negative value {value} for ({country}, {product})")
        key = (country, product)
        totals[key] = totals.get(key, 0.0) + value
    if not totals:
        raise EmptyInput("no flow records")
    countries = sorted({c for c, _ in totals})
    products = sorted({p for _, p in totals})
    ci = {c: i for i, c in enumerate(countries)}
    pi = {p: j for j, p in enumerate(products)}
    values = np.zeros((len(countries), len(products)))
    for (c, p), v in totals.items():
        values[ci[c], pi[p]] = v
    return ExportMatrix(countries, products, values, unit)


def prune(m, min_country_export=0.0, min_product_export=0.0):
    """Drop all-zero rows/columns until none remain.

    Rows with total below ``min_country_export`` (columns below
    ``min_product_export``) are dropped as well; removal repeats because
    dropping a row can empty a column and vice versa.

    Returns ``(pruned, dropped_countries, dropped_products)``.
    """
    values = np.asarray(m.values)
    rows = np.arange(values.shape[0])
    cols = np.arange(values.shape[1])
    while True:
        sub = values[np.ix_(rows, cols)]
        rsum = sub.sum(axis=1)
        csum = sub.sum(axis=0)
        keep_r = (rsum > 0) & (rsum >= min_country_export)
        keep_c = (csum > 0) & (csum >= min_product_export)
        if keep_r.all() and keep_c.all():
            break
        rows = rows[keep_r]
        cols = cols[keep_c]
        if rows.size == 0 or cols.size == 0:
            raise AllPruned("pruning removed every country or product")
    kept_r, kept_c = set(rows.tolist()), set(cols.tolist())
    dropped_c = tuple(c for i, c in enumerate(m.countries) if i not in kept_r)
    dropped_p = tuple(p for j, p in enumerate(m.products) if j not in kept_c)
    if not dropped_c and not dropped_p:
        return m, (), ()
    pruned = type(m)(
        [m.countries[i] for i in rows],
        [m.products[j] for j in cols],
        values[np.ix_(rows, cols)],
        **_extra_fields(m),
    )
    return pruned, dropped_c, dropped_p


def _extra_fields(m):
    if isinstance(m, ExportMatrix):
        return {"unit": m.unit}
    return {}


def rca(m):
    """Revealed comparative advantage (X_cp / X_c) / (X_p / X)."""
    x = np.asarray(m.values)
    xc = x.sum(axis=1)
    xp = x.sum(axis=0)
    if np.any(xc <= 0) or np.any(xp <= 0):
        raise NotPruned("rca needs strictly positive row and column sums; prune first")
    total = xc.sum()
    # share of p in c's basket over share of p in world exports
    r = (x / xc[:, None]) / (xp / total)[None, :]
    return RcaMatrix(m.countries, m.products, r)


def binarize(r, threshold=1.0):
    """M_cp = 1 iff RCA_cp > threshold (strict), then drop emptied rows/columns."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    bits = (np.asarray(r.values) > threshold).astype(np.float64)
    if not bits.any():
        raise AllPruned(f"no entry exceeds RCA threshold {threshold}")
    raw = BinaryMatrix(r.countries, r.products, bits)
    pruned, dc, dp = prune(raw)
    return BinaryMatrix(pruned.countries, pruned.products, pruned.values, dc, dp)


def read_flows_csv(source):
    """Parse ``country,product,value`` CSV (path or text stream) into records.

    Raises ParseError with the offending line number.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, newline="", encoding="utf-8") as fh:
            return _parse_flows(fh)
    return _parse_flows(source)


def _parse_flows(fh):
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(h.strip().lstrip("﻿") for h in header) != CSV_HEADER:
        raise ParseError(
            f"line 1: expected header {','.join(CSV_HEADER)!r}, got {header!r}",
            line=1, expected=",".join(CSV_HEADER),
        )
    records = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise ParseError(f"line {line}: expected 3 fields, got {len(row)}", line=line)
        country, product, raw = (cell.strip() for cell in row)
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(f"line {line}: value {raw!r} is not a number", line=line) from None
        if not math.isfinite(value):
            raise NonFiniteValue(f"line {line}: non-finite value {raw!r}", line=line)
        if value < 0:
            raise NegativeValue(f"line {line}: negative value {raw!r}", line=line)
        records.append((country, product, value))
    return records


def to_json_dict(m):
    x = np.asarray(m.values)
    ci, pi = np.nonzero(x)
    # np.nonzero returns row-major order, i.e. sorted by (ci, pi)
    triplets = [[int(i), int(j), float(x[i, j])] for i, j in zip(ci, pi)]
    out = {"countries": list(m.countries), "products": list(m.products), "triplets": triplets}
    if isinstance(m, ExportMatrix):
        out["unit"] = m.unit
    return out


def from_json_dict(d):
    try:
        countries, products = d["countries"], d["products"]
        values = np.zeros((len(countries), len(products)))
        for i, j, v in d["triplets"]:
            values[int(i), int(j)] += float(v)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"malformed matrix JSON: {exc}") from None
    return ExportMatrix(countries, products, values, d.get("unit", "USD"))


def dumps_matrix(m):
    return json.dumps(to_json_dict(m), indent=None, separators=(",", ":")) + "\n"


def loads_matrix(text):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"matrix file is not JSON: {exc}", line=exc.lineno) from None
    return from_json_dict(d)


def flows_to_csv(m):
    """Inverse of read_flows_csv for the nonzero entries of ``m``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for i, j, v in to_json_dict(m)["triplets"]:
        w.writerow([m.countries[i], m.products[j], repr(v)])
    return buf.getvalue()


def read_country_codes(path):
    """Map BACI numeric country codes to ISO3 codes from a BACI country-codes CSV."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        iso = next((f for f in fields if f in ("country_iso3", "iso_3digit_alpha")), None)
        if "country_code" not in fields or iso is None:
            raise ParseError(f"{path}: expected country_code and country_iso3 columns", line=1)
        return {row["country_code"].strip(): row[iso].strip() for row in reader}


def read_baci_csv(path, year=None, country_codes=None):
    """Exporter-by-product records from a BACI trade file (columns t,i,j,k,v,q).

    Flows are summed over importers ``j``. ``country_codes`` optionally maps
    exporter codes to other identifiers; unmapped codes are kept as-is.
    """
    country_codes = country_codes or {}
    totals = {}
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        missing = {"t", "i", "k", "v"} - {f.strip() for f in reader.fieldnames or []}
        if missing:
            raise ParseError(f"{path}: BACI file lacks columns {sorted(missing)}", line=1)
        for row in reader:
            row = {k.strip(): v for k, v in row.items()}
            if year is not None and int(row["t"]) != year:
                continue
            try:
                value = float(row["v"])
            except ValueError:
                raise ParseError(f"{path}: line {reader.line_num}: bad value {row['v']!r}",
                                 line=reader.line_num) from None
            code = row["i"].strip()
            key = (country_codes.get(code, code), row["k"].strip())
            totals[key] = totals.get(key, 0.0) + value
    return [(c, p, v) for (c, p), v in totals.items()]
