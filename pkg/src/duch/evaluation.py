"""Retrieval quality metrics: mAP@K and precision@K with class-label
relevance, plus machine-readable reports.

AP@K sums precision-at-i over the relevant ranks i <= K and divides by
min(R, K), where R is the number of relevant items in the whole archive;
a query with R = 0 scores 0. With K at least the archive size this is
classic average precision. The convention caps AP at 1 and is recorded in
every report header so the raw sums are recoverable.
"""

import csv
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .retrieval import RetrievalIndex, hamming_to_all

AP_NORMALIZATION = "min(total_relevant, k)"

DIRECTIONS = ("img_to_txt", "txt_to_img")


@dataclass
class EvalConfig:
    map_k: int = 20
    precision_k_max: int = 100
    direction: str = "img_to_txt"

    def __post_init__(self):
        if self.map_k < 1:
            raise ConfigError(f"map_k must be >= 1, got {self.map_k}")
        if self.precision_k_max < 1:
            raise ConfigError(f"precision_k_max must be >= 1, got {self.precision_k_max}")
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")


def is_relevant(label_q: int, label_r: int) -> bool:
    """Class-label relevance: a retrieved item counts iff labels match."""
    return label_q == label_r


def average_precision_at_k(ranked_relevance, k: int, total_relevant: int) -> float:
    """AP@K over a ranked relevance list (True = relevant)."""
    if total_relevant == 0:
        return 0.0
    hits = 0
    acc = 0.0
    for i, rel in enumerate(ranked_relevance[:k], start=1):
        if rel:
            hits += 1
            acc += hits / i
    return acc / min(total_relevant, k)


def _ranked_relevance(query_word_row, query_label, archive: RetrievalIndex,
                      labels, depth: int) -> np.ndarray:
    """Relevance flags of the archive ranked by (distance, id), cut to depth."""
    dists = hamming_to_all(query_word_row, archive.codes.data)
    order = np.lexsort((archive.ids, dists))[:depth]
    return labels[archive.ids[order]] == query_label


def _check_inputs(queries: RetrievalIndex, archive: RetrievalIndex, labels):
    if queries.n == 0:
        raise ConfigError("query set is empty")
    labels = np.asarray(labels)
    top = max(queries.ids.max(), archive.ids.max()) if archive.n else queries.ids.max()
    if top >= labels.size:
        raise ConfigError(f"id {top} has no label (labels cover 0..{labels.size - 1})")
    return labels


def per_query_ap(queries: RetrievalIndex, archive: RetrievalIndex, labels,
                 cfg: EvalConfig) -> list:
    """AP@map_k of every query, in query order, ranked by the shared
    (distance, id) rule. ``labels`` is indexed by item id and covers both
    sides."""
    labels = _check_inputs(queries, archive, labels)
    archive_labels = labels[archive.ids]
    out = []
    for row, qid in zip(queries.codes.data, queries.ids):
        qlabel = labels[qid]
        rel = _ranked_relevance(row, qlabel, archive, labels, cfg.map_k)
        r = int((archive_labels == qlabel).sum())
        out.append(average_precision_at_k(rel, cfg.map_k, r))
    return out


def map_at_k(queries: RetrievalIndex, archive: RetrievalIndex, labels,
             cfg: EvalConfig) -> float:
    """Mean AP@map_k over all queries."""
    aps = per_query_ap(queries, archive, labels, cfg)
    return sum(aps) / len(aps)


def precision_curve(queries: RetrievalIndex, archive: RetrievalIndex, labels,
                    cfg: EvalConfig) -> list:
    """P@K for K = 1..precision_k_max: the mean fraction of relevant items
    among the top K. Truncates (with a warning) if the archive is smaller."""
    labels = _check_inputs(queries, archive, labels)
    k_max = cfg.precision_k_max
    if archive.n < k_max:
        warnings.warn(
            f"archive has {archive.n} items; precision curve truncated at K={archive.n}",
            stacklevel=2)
        k_max = archive.n
    hits_by_depth = np.zeros(k_max, dtype=np.float64)
    for row, qid in zip(queries.codes.data, queries.ids):
        rel = _ranked_relevance(row, labels[qid], archive, labels, k_max)
        hits_by_depth += np.cumsum(rel)
    ks = np.arange(1, k_max + 1)
    return [(int(k), float(h / (queries.n * k))) for k, h in zip(ks, hits_by_depth)]


@dataclass
class EvalReport:
    direction: str
    code_bits: int
    map_k: int
    map_at_k: float
    precision_curve: list
    n_queries: int
    n_archive: int
    config: dict = field(default_factory=dict)
    per_query_ap: list | None = None   # retained on request only

    def has_nan(self) -> bool:
        values = [self.map_at_k] + [p for _, p in self.precision_curve]
        if self.per_query_ap is not None:
            values += list(self.per_query_ap)
        return any(not np.isfinite(v) for v in values)


def evaluate(queries: RetrievalIndex, archive: RetrievalIndex, labels,
             cfg: EvalConfig, config_echo: dict | None = None,
             keep_per_query: bool = False) -> EvalReport:
    """Run both metrics for one direction and wrap them in a report."""
    aps = per_query_ap(queries, archive, labels, cfg)
    return EvalReport(
        direction=cfg.direction,
        code_bits=queries.codes.bits,
        map_k=cfg.map_k,
        map_at_k=sum(aps) / len(aps),
        precision_curve=precision_curve(queries, archive, labels, cfg),
        n_queries=queries.n,
        n_archive=archive.n,
        config=config_echo or {},
        per_query_ap=aps if keep_per_query else None,
    )


def _curve_csv(curve) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["K", "precision"])
    for k, p in curve:
        writer.writerow([k, repr(p)])
    return buf.getvalue()


def write_report(report: EvalReport, json_path, csv_path=None) -> None:
    """Write the JSON report and the precision-curve CSV. Output bytes are
    a pure function of the report contents."""
    payload = {
        "format": "duch-eval/1",
        "ap_normalization": AP_NORMALIZATION,
        "direction": report.direction,
        "code_bits": report.code_bits,
        "map_k": report.map_k,
        "map_at_k": report.map_at_k,
        "precision_curve": [[k, p] for k, p in report.precision_curve],
        "n_queries": report.n_queries,
        "n_archive": report.n_archive,
        "config": report.config,
    }
    if report.per_query_ap is not None:
        payload["per_query_ap"] = list(report.per_query_ap)
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if csv_path is None:
        csv_path = str(json_path).rsplit(".", 1)[0] + ".csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(_curve_csv(report.precision_curve))


def read_report(json_path) -> EvalReport:
    with open(json_path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return EvalReport(
        direction=payload["direction"],
        code_bits=payload["code_bits"],
        map_k=payload["map_k"],
        map_at_k=payload["map_at_k"],
        precision_curve=[(int(k), float(p)) for k, p in payload["precision_curve"]],
        n_queries=payload["n_queries"],
        n_archive=payload["n_archive"],
        config=payload.get("config", {}),
        per_query_ap=payload.get("per_query_ap"),
    )
