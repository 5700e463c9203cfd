"""LIBSVM parsing, feature preprocessing, and model persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Optional, Union

import numpy as np
import scipy.sparse as sp

from .linalg import SparseMatrixCSC, csc_from_scipy

MODEL_FORMAT_VERSION = 1


class ParseError(ValueError):
    """Malformed input; the message carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ModelFormatError(ValueError):
    """Model file is missing fields, malformed, or has the wrong version."""


@dataclass(frozen=True)
class RawDataset:
    """Parsed samples as columns of X; ``labels`` is None for unlabeled data."""

    X: SparseMatrixCSC
    labels: Optional[np.ndarray]
    source_path: str


@dataclass(frozen=True)
class FeatureMeta:
    """Record of the preprocessing transform: which original features were
    kept and the positive per-feature divisor applied to each."""

    kept_ids: np.ndarray
    scales: np.ndarray
    d_original: int

    def __post_init__(self):
        object.__setattr__(self, "kept_ids", np.asarray(self.kept_ids, dtype=np.int64))
        object.__setattr__(self, "scales", np.asarray(self.scales, dtype=np.float64))
        if np.any(self.scales <= 0):
            raise ValueError("scales must be positive")
        if np.any(np.diff(self.kept_ids) <= 0):
            raise ValueError("kept_ids must be strictly increasing")


def identity_meta(d: int) -> FeatureMeta:
    return FeatureMeta(kept_ids=np.arange(d), scales=np.ones(d), d_original=d)


@dataclass
class ModelFile:
    """Trained classifier plus the metadata needed to apply and persist it.

    ``w`` lives in the preprocessed (kept, scaled) feature space and already
    absorbs the global data-scale division, so a score is just
    ``beta + x_preprocessed @ w``.
    """

    q: float
    C: float
    z_scale: float
    mu: float
    feature_meta: FeatureMeta
    w: np.ndarray
    beta: float
    solver_info: dict = field(default_factory=dict)
    format_version: int = MODEL_FORMAT_VERSION

    def composite_weights(self) -> np.ndarray:
        """Weight vector of length ``d_original`` applying directly to raw
        samples (removed features get weight zero)."""
        out = np.zeros(self.feature_meta.d_original)
        out[self.feature_meta.kept_ids] = self.w / self.feature_meta.scales
        return out


def _map_labels(raw: np.ndarray, line_nos: list[int]) -> np.ndarray:
    distinct = np.unique(raw)
    if distinct.size > 2:
        raise ParseError(
            line_nos[0], f"more than two distinct labels: {distinct.tolist()[:5]}"
        )
    if set(distinct.tolist()) <= {-1.0, 1.0}:
        return raw.copy()
    if distinct.size == 1:
        raise ParseError(line_nos[0], f"single non-binary label value {distinct[0]}")
    lo, hi = distinct[0], distinct[1]
    return np.where(raw == lo, -1.0, 1.0)


def parse_libsvm(
    source: Union[str, Path, IO[str]], require_labels: bool = True
) -> RawDataset:
    """Parse LIBSVM text: ``<label> <idx>:<val> ...`` with 1-based, strictly
    increasing indices per line; ``#`` starts a comment.

    Labels are mapped to {-1,+1}: kept if already binary in that alphabet,
    otherwise the smaller of exactly two values maps to -1. With
    ``require_labels=False``, lines may omit the label (first token contains
    ``:``) and ``labels`` is None if any line does.

    A single pass with per-line bounded state keeps memory proportional to
    the stored entries.
    """
    if isinstance(source, (str, Path)):
        path = str(source)
        with open(source, "r", encoding="utf-8") as fh:
            return _parse_stream(fh, path, require_labels)
    return _parse_stream(source, getattr(source, "name", "<stream>"), require_labels)


def _parse_stream(fh: IO[str], path: str, require_labels: bool) -> RawDataset:
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    labels: list[float] = []
    label_lines: list[int] = []
    saw_unlabeled = False
    n = 0
    d = 0

    for line_no, line in enumerate(fh, start=1):
        hash_pos = line.find("#")
        if hash_pos >= 0:
            line = line[:hash_pos]
        tokens = line.split()
        if not tokens:
            continue
        start = 0
        if ":" in tokens[0]:
            if require_labels:
                raise ParseError(line_no, f"expected a label, got {tokens[0]!r}")
            saw_unlabeled = True
            labels.append(np.nan)
        else:
            try:
                labels.append(float(tokens[0]))
            except ValueError:
                raise ParseError(line_no, f"bad label token {tokens[0]!r}") from None
            if not np.isfinite(labels[-1]):
                raise ParseError(line_no, f"non-finite label {tokens[0]!r}")
            start = 1
        label_lines.append(line_no)
        prev_idx = 0
        for tok in tokens[start:]:
            head, sep, tail = tok.partition(":")
            if not sep:
                raise ParseError(line_no, f"bad feature token {tok!r}")
            try:
                idx = int(head)
                val = float(tail)
            except ValueError:
                raise ParseError(line_no, f"bad feature token {tok!r}") from None
            if idx < 1:
                raise ParseError(line_no, f"feature index {idx} is not positive")
            if idx <= prev_idx:
                raise ParseError(
                    line_no, f"feature index {idx} not increasing (after {prev_idx})"
                )
            if not np.isfinite(val):
                raise ParseError(line_no, f"non-finite value in token {tok!r}")
            prev_idx = idx
            if val != 0.0:
                rows.append(idx - 1)
                cols.append(n)
                vals.append(val)
            d = max(d, idx)
        n += 1

    if n == 0:
        raise ParseError(0, "no samples in input")

    coo = sp.coo_matrix(
        (np.asarray(vals), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(d, n),
    )
    x = csc_from_scipy(coo)
    if saw_unlabeled:
        return RawDataset(X=x, labels=None, source_path=path)
    y = _map_labels(np.asarray(labels), label_lines)
    return RawDataset(X=x, labels=y, source_path=path)


def preprocess(raw: RawDataset) -> tuple[SparseMatrixCSC, Optional[np.ndarray], FeatureMeta]:
    """Drop all-zero features and divide each kept feature by its max-abs.

    Each kept feature ends with max-abs exactly 1, so the transform is
    idempotent. Returns the cleaned matrix, the labels, and the transform
    record needed for prediction.
    """
    x = raw.X
    max_abs = np.zeros(x.nrows)
    np.maximum.at(max_abs, x.rowidx, np.abs(x.values))
    kept = max_abs > 0.0
    if not kept.any():
        raise ValueError("all features are zero")
    kept_ids = np.flatnonzero(kept)
    scales = max_abs[kept_ids]
    rank = np.full(x.nrows, -1, dtype=np.int64)
    rank[kept_ids] = np.arange(kept_ids.size)

    new_rows = rank[x.rowidx]
    new_vals = x.values / max_abs[x.rowidx]
    cols = np.repeat(np.arange(x.ncols), np.diff(x.colptr))
    coo = sp.coo_matrix((new_vals, (new_rows, cols)), shape=(kept_ids.size, x.ncols))
    x_clean = csc_from_scipy(coo)
    meta = FeatureMeta(kept_ids=kept_ids, scales=scales, d_original=x.nrows)
    return x_clean, raw.labels, meta


_REQUIRED_FIELDS = (
    "format_version",
    "q",
    "C",
    "z_scale",
    "mu",
    "feature_meta",
    "w",
    "beta",
    "solver_info",
)


def write_model(model: ModelFile, path: Union[str, Path]) -> None:
    """Serialize as versioned, human-readable JSON. Floats use shortest
    round-trip encoding, so write/read is exact."""
    doc = {
        "format_version": model.format_version,
        "q": float(model.q),
        "C": float(model.C),
        "z_scale": float(model.z_scale),
        "mu": float(model.mu),
        "feature_meta": {
            "kept_ids": model.feature_meta.kept_ids.tolist(),
            "scales": model.feature_meta.scales.tolist(),
            "d_original": int(model.feature_meta.d_original),
        },
        "w": model.w.tolist(),
        "beta": float(model.beta),
        "solver_info": model.solver_info,
    }
    text = json.dumps(doc, indent=1, allow_nan=False)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")


def read_model(path: Union[str, Path]) -> ModelFile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("malformed model file: expected a JSON object")
    if "format_version" not in doc:
        raise ModelFormatError("missing field 'format_version'")
    if doc["format_version"] != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format_version {doc['format_version']!r}; "
            f"this reader handles version {MODEL_FORMAT_VERSION}"
        )
    for name in _REQUIRED_FIELDS:
        if name not in doc:
            raise ModelFormatError(f"missing field {name!r}")
    fm = doc["feature_meta"]
    for name in ("kept_ids", "scales", "d_original"):
        if name not in fm:
            raise ModelFormatError(f"missing field 'feature_meta.{name}'")
    meta = FeatureMeta(
        kept_ids=np.asarray(fm["kept_ids"], dtype=np.int64),
        scales=np.asarray(fm["scales"], dtype=np.float64),
        d_original=int(fm["d_original"]),
    )
    return ModelFile(
        q=float(doc["q"]),
        C=float(doc["C"]),
        z_scale=float(doc["z_scale"]),
        mu=float(doc["mu"]),
        feature_meta=meta,
        w=np.asarray(doc["w"], dtype=np.float64),
        beta=float(doc["beta"]),
        solver_info=doc["solver_info"],
        format_version=int(doc["format_version"]),
    )
