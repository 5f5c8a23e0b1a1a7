"""File formats: dataset CSV with vocabulary sidecar, model and truth JSON,
trace and sweep CSV. All writes go through a temp-file-then-rename so
partially written files never appear. Schemas are documented in
docs/formats.md.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import re
import tempfile
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, FeatureSpace, Hyperparams, ModelState
from .errors import ConfigError, DataError
from .generate import PlantedTruth

RESERVED_ID = "id"
RESERVED_LABEL = "label"

MODEL_FORMAT = "bcm-model"
TRUTH_FORMAT = "bcm-truth"
FORMAT_VERSION = 1


def _atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".bcm-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def vocab_sidecar_path(csv_path) -> str:
    base, _ = os.path.splitext(os.fspath(csv_path))
    return base + ".vocab.json"


# ---------------------------------------------------------------------------
# dataset CSV


def _read_rows(path):
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    header, data = rows[0], rows[1:]
    if not data:
        raise DataError(f"{path} has a header but no observations")
    for r, row in enumerate(data, start=2):
        if len(row) != len(header):
            raise DataError(f"{path} line {r}: expected {len(header)} cells, got {len(row)}")
    return header, data


def read_dataset_csv(path, vocab_path=None, label_column=RESERVED_LABEL,
                     id_column=RESERVED_ID) -> Dataset:
    """Load a dataset: one observation per row, header of feature names.

    Columns named like ``id_column`` / ``label_column`` become observation
    ids and labels. Vocabularies come from a JSON sidecar when present
    (``<stem>.vocab.json`` is picked up automatically), otherwise they are
    induced in first-appearance order.
    """
    header, data = _read_rows(path)
    if vocab_path is None:
        implicit = vocab_sidecar_path(path)
        if os.path.exists(implicit):
            vocab_path = implicit
    pinned: dict[str, list[str]] = {}
    if vocab_path is not None:
        try:
            with open(vocab_path, "r", encoding="utf-8") as handle:
                payload = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read vocabulary file {vocab_path}: {exc}") from exc
        pinned = {str(k): [str(o) for o in v] for k, v in payload.get("vocabularies", {}).items()}

    feature_cols = [k for k, name in enumerate(header)
                    if name not in (id_column, label_column)]
    if not feature_cols:
        raise DataError("no feature columns found")
    names = [header[k] for k in feature_cols]

    vocabularies: list[list[str]] = []
    lookups: list[dict[str, int]] = []
    for name in names:
        vocab = list(pinned.get(name, []))
        vocabularies.append(vocab)
        lookups.append({o: v for v, o in enumerate(vocab)})

    n = len(data)
    codes = np.empty((n, len(names)), dtype=np.int64)
    for r, row in enumerate(data):
        for f, k in enumerate(feature_cols):
            cell = row[k]
            idx = lookups[f].get(cell)
            if idx is None:
                if names[f] in pinned:
                    raise DataError(
                        f"line {r + 2}, column {names[f]!r}: outcome {cell!r} "
                        "is not in the pinned vocabulary"
                    )
                idx = len(vocabularies[f])
                vocabularies[f].append(cell)
                lookups[f][cell] = idx
            codes[r, f] = idx

    ids = labels = None
    if id_column in header:
        k = header.index(id_column)
        ids = [row[k] for row in data]
    if label_column in header:
        k = header.index(label_column)
        labels = [row[k] for row in data]
    features = FeatureSpace(tuple(names), tuple(tuple(v) for v in vocabularies))
    return Dataset(features, codes, labels=labels, ids=ids)


def write_dataset_csv(path, dataset: Dataset, write_vocab: bool = True) -> None:
    """Write a dataset (id/label columns first when present) plus sidecar."""
    header = []
    if dataset.ids is not None:
        header.append(RESERVED_ID)
    if dataset.labels is not None:
        header.append(RESERVED_LABEL)
    header.extend(dataset.features.names)
    buf = _io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for i in range(dataset.n_observations):
        row = []
        if dataset.ids is not None:
            row.append(dataset.ids[i])
        if dataset.labels is not None:
            row.append(dataset.labels[i])
        row.extend(dataset.decode_row(i))
        writer.writerow(row)
    _atomic_write_text(path, buf.getvalue())
    if write_vocab:
        payload = {
            "vocabularies": {
                name: list(vocab)
                for name, vocab in zip(dataset.features.names, dataset.features.vocabularies)
            }
        }
        _atomic_write_text(vocab_sidecar_path(path), json.dumps(payload, indent=1))


# ---------------------------------------------------------------------------
# ingestion with discretization


@dataclass
class IngestSpec:
    """How to turn a raw CSV into a discrete dataset.

    roles maps column names to "feature", "id", "label", or "drop"
    (default: feature). bins maps numeric feature columns to an
    equal-width bin count k >= 2.
    """

    source: str
    roles: dict = field(default_factory=dict)
    bins: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, role in self.roles.items():
            if role not in ("feature", "id", "label", "drop"):
                raise ConfigError(f"unknown role {role!r} for column {name!r}")
        for name, k in self.bins.items():
            if int(k) < 2:
                raise ConfigError(f"column {name!r}: bin count must be at least 2")


def _bin_values(values, k):
    """Equal-width binning of floats into k bins; monotone, extremes map to
    the first and last bin."""
    lo = min(values)
    hi = max(values)
    if hi == lo:
        return [0] * len(values), 1
    span = (hi - lo) * (1.0 + 1e-12)
    return [min(k - 1, int(math.floor(k * (u - lo) / span))) for u in values], k


def ingest(spec: IngestSpec) -> Dataset:
    """Read a raw CSV and produce a discrete dataset per the ingest spec.

    Binned columns are parsed as floats (errors name the row and column);
    a constant numeric column collapses to a single-outcome vocabulary
    with a warning. Unbinned feature columns stay categorical.
    """
    header, data = _read_rows(spec.source)
    unknown = set(spec.roles) - set(header)
    if unknown:
        raise ConfigError(f"role given for missing columns: {sorted(unknown)}")
    unknown = set(spec.bins) - set(header)
    if unknown:
        raise ConfigError(f"bins given for missing columns: {sorted(unknown)}")

    def role_of(name):
        if name in spec.roles:
            return spec.roles[name]
        if name == RESERVED_ID:
            return "id"
        if name == RESERVED_LABEL:
            return "label"
        return "feature"

    names = []
    columns = []
    vocabularies = []
    ids = labels = None
    for k, name in enumerate(header):
        role = role_of(name)
        cells = [row[k] for row in data]
        if role == "drop":
            continue
        if role == "id":
            ids = cells
            continue
        if role == "label":
            labels = cells
            continue
        if name in spec.bins:
            k_bins = int(spec.bins[name])
            values = []
            for r, cell in enumerate(cells, start=2):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"line {r}, column {name!r}: cannot parse {cell!r} as a number"
                    ) from None
            binned, n_out = _bin_values(values, k_bins)
            if n_out == 1:
                warnings.warn(
                    f"column {name!r} is constant; binning produced a single outcome",
                    stacklevel=2,
                )
                vocabularies.append(("0",))
            else:
                vocabularies.append(tuple(str(v) for v in range(k_bins)))
            columns.append(binned)
        else:
            vocab: list[str] = []
            lookup: dict[str, int] = {}
            col = []
            for cell in cells:
                if cell not in lookup:
                    lookup[cell] = len(vocab)
                    vocab.append(cell)
                col.append(lookup[cell])
            vocabularies.append(tuple(vocab))
            columns.append(col)
        names.append(name)
    if not columns:
        raise DataError("no feature columns after applying roles")
    codes = np.array(columns, dtype=np.int64).T
    features = FeatureSpace(tuple(names), tuple(vocabularies))
    return Dataset(features, codes, labels=labels, ids=ids)


_TOKEN = re.compile(r"[a-z0-9']+")


def text_to_presence(documents, n_features: int, labels=None, ids=None) -> Dataset:
    """Binary term-presence dataset over the top document-frequency terms.

    Documents may be strings (lowercased and tokenized) or pre-split token
    sequences. Term ranking breaks frequency ties alphabetically; if the
    corpus has fewer distinct terms than requested the width shrinks with
    a warning.
    """
    if n_features < 1:
        raise ConfigError("n_features must be at least 1")
    docs = []
    for doc in documents:
        if isinstance(doc, str):
            docs.append(set(_TOKEN.findall(doc.lower())))
        else:
            docs.append({str(t) for t in doc})
    if not docs:
        raise DataError("empty corpus")
    freq: dict[str, int] = {}
    for tokens in docs:
        for t in tokens:
            freq[t] = freq.get(t, 0) + 1
    ranked = sorted(freq, key=lambda t: (-freq[t], t))
    if len(ranked) < n_features:
        warnings.warn(
            f"corpus has only {len(ranked)} distinct terms; using all of them",
            stacklevel=2,
        )
        n_features = len(ranked)
    terms = ranked[:n_features]
    codes = np.array(
        [[1 if t in tokens else 0 for t in terms] for tokens in docs], dtype=np.int64
    )
    features = FeatureSpace(tuple(terms), tuple(("0", "1") for _ in terms))
    return Dataset(features, codes, labels=labels, ids=ids)


# ---------------------------------------------------------------------------
# hyperparameter and model serialization


def hyper_to_dict(hyper: Hyperparams) -> dict:
    return {
        "clusters": hyper.n_clusters,
        "alpha": hyper.alpha,
        "q": hyper.subspace_rate,
        "lambda": hyper.pseudocount,
        "c": hyper.copy_strength,
        "similarity": hyper.similarity,
        "epsilon": hyper.epsilon,
    }


def hyper_from_dict(payload: dict) -> Hyperparams:
    try:
        return Hyperparams(
            n_clusters=int(payload["clusters"]),
            alpha=float(payload["alpha"]),
            subspace_rate=float(payload["q"]),
            pseudocount=float(payload["lambda"]),
            copy_strength=float(payload["c"]),
            similarity=str(payload.get("similarity", "exact")),
            epsilon=float(payload.get("epsilon", 0.0)),
        )
    except KeyError as exc:
        raise DataError(f"hyperparameter entry missing key {exc}") from exc


def save_model(path, state: ModelState, hyper: Hyperparams, dataset: Dataset,
               meta: dict | None = None) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "version": FORMAT_VERSION,
        "hyper": hyper_to_dict(hyper),
        "feature_names": list(dataset.features.names),
        "n_observations": dataset.n_observations,
        "assignments": state.assignments.tolist(),
        "prototypes": state.prototypes.tolist(),
        "prototype_ids": [dataset.observation_id(int(i)) for i in state.prototypes],
        "subspaces": state.subspaces.tolist(),
    }
    payload.update(meta or {})
    _atomic_write_text(path, json.dumps(payload, indent=1))


def load_model(path):
    """Returns (state, hyper, payload). Raises DataError on schema problems."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    if payload.get("format") != MODEL_FORMAT:
        raise DataError(f"{path} is not a model file")
    if payload.get("version") != FORMAT_VERSION:
        raise DataError(f"unsupported model version {payload.get('version')!r}")
    try:
        state = ModelState(
            np.array(payload["assignments"], dtype=np.int64),
            np.array(payload["prototypes"], dtype=np.int64),
            np.array(payload["subspaces"], dtype=np.int64),
        )
        hyper = hyper_from_dict(payload["hyper"])
    except KeyError as exc:
        raise DataError(f"model file missing key {exc}") from exc
    return state, hyper, payload


def check_model_dataset(payload: dict, dataset: Dataset) -> None:
    if payload.get("feature_names") != list(dataset.features.names):
        raise DataError("model and dataset feature names differ")
    if payload.get("n_observations") != dataset.n_observations:
        raise DataError("model and dataset observation counts differ")


def save_truth_json(path, truth: PlantedTruth) -> None:
    payload = {
        "format": TRUTH_FORMAT,
        "version": FORMAT_VERSION,
        "assignments": truth.assignments.tolist(),
        "subspaces": truth.subspaces.tolist(),
        "prototype_rows": truth.prototype_rows.tolist(),
        "labels": list(truth.labels),
    }
    _atomic_write_text(path, json.dumps(payload, indent=1))


def load_truth_json(path) -> PlantedTruth:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read truth file {path}: {exc}") from exc
    if payload.get("format") != TRUTH_FORMAT:
        raise DataError(f"{path} is not a truth file")
    return PlantedTruth(
        assignments=np.array(payload["assignments"], dtype=np.int64),
        subspaces=np.array(payload["subspaces"], dtype=np.int64),
        prototype_rows=np.array(payload["prototype_rows"], dtype=np.int64),
        mixture_weights=np.zeros((0, 0)),
        labels=[str(v) for v in payload["labels"]],
    )


# ---------------------------------------------------------------------------
# trace and sweep tables


def trace_csv_path(model_path) -> str:
    base, _ = os.path.splitext(os.fspath(model_path))
    return base + ".trace.csv"


def save_trace_csv(path, trace) -> None:
    buf = _io.StringIO()
    writer = csv.writer(buf)
    n_clu = trace.prototypes.shape[1] if len(trace) else 0
    writer.writerow(
        ["iteration", "log_score", "subspace_density", "accuracy"]
        + [f"p_{s}" for s in range(n_clu)]
    )
    for k in range(len(trace)):
        acc = trace.accuracy[k]
        writer.writerow(
            [
                int(trace.iterations[k]),
                repr(float(trace.log_scores[k])),
                repr(float(trace.subspace_density[k])),
                "" if math.isnan(acc) else repr(float(acc)),
            ]
            + [int(v) for v in trace.prototypes[k]]
        )
    _atomic_write_text(path, buf.getvalue())


def save_sweep_csv(path, rows: list[dict]) -> None:
    if not rows:
        raise DataError("no sweep rows to write")
    keys = []
    for row in rows:
        for key in row:
            if key not in keys:
                keys.append(key)
    buf = _io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(keys)
    for row in rows:
        writer.writerow([row.get(k, "") for k in keys])
    _atomic_write_text(path, buf.getvalue())
