"""Partition agreement measures and annotation-based cluster redundancy."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import MultiplexNMFError


class LengthMismatch(MultiplexNMFError, ValueError):
    pass


class TooFewNodes(MultiplexNMFError, ValueError):
    pass


class EmptyCluster(MultiplexNMFError, ValueError):
    pass


class VocabularyTooSmall(MultiplexNMFError, ValueError):
    pass


def _labels(x) -> list[int]:
    """Validate a label vector and return it as a list of Python ints."""
    x = getattr(x, "labels", x)
    if isinstance(x, np.ndarray):
        if x.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if x.dtype.kind not in "iu":
            if x.size and not np.all(np.mod(x, 1) == 0):
                raise ValueError("labels must be integers")
            x = x.astype(np.int64)
        seq = x.tolist()
    else:
        seq = list(x)
        if not all(type(v) is int for v in seq):
            return _labels(np.asarray(seq))
    if not seq:
        raise TooFewNodes("partitions need at least one node")
    if min(seq) < 0:
        raise ValueError("labels must be non-negative")
    return seq


def _tables(clusters, classes) -> tuple[Counter, Counter, Counter, int]:
    a, b = _labels(clusters), _labels(classes)
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} cluster labels vs {len(b)} class labels")
    joint = Counter(zip(a, b))
    rows: Counter = Counter()
    cols: Counter = Counter()
    for (i, j), count in joint.items():
        rows[i] += count
        cols[j] += count
    return joint, rows, cols, len(a)


def contingency(clusters, classes) -> np.ndarray:
    """Count table: rows are clusters, columns are classes (empty ones dropped)."""
    joint, rows, cols, _ = _tables(clusters, classes)
    r = {lab: i for i, lab in enumerate(sorted(rows))}
    c = {lab: j for j, lab in enumerate(sorted(cols))}
    table = np.zeros((len(r), len(c)), dtype=np.int64)
    for (i, j), count in joint.items():
        table[r[i], c[j]] = count
    return table


def purity(clusters, classes) -> float:
    """Fraction of nodes that belong to the majority class of their cluster.

    Not symmetric: every singleton clustering has purity 1.
    """
    joint, _, _, n = _tables(clusters, classes)
    best: dict[int, int] = {}
    for (i, _), count in joint.items():
        if count > best.get(i, 0):
            best[i] = count
    return sum(best.values()) / n


def _entropy_bits(counts) -> float:
    total = sum(counts)
    return -sum(c / total * math.log2(c / total) for c in counts if c > 0)


def mutual_information(clusters, classes) -> float:
    joint, rows, cols, n = _tables(clusters, classes)
    return _mutual_information(joint, rows, cols, n)


def _mutual_information(joint, rows, cols, n) -> float:
    return sum(c / n * math.log2(c * n / (rows[i] * cols[j]))
               for (i, j), c in joint.items())


def nmi(clusters, classes) -> float:
    """Mutual information over the arithmetic mean of the two entropies (bits).

    Two single-cluster partitions are identical and score 1.
    """
    joint, rows, cols, n = _tables(clusters, classes)
    denom = (_entropy_bits(rows.values()) + _entropy_bits(cols.values())) / 2
    if denom == 0:
        return 1.0
    value = _mutual_information(joint, rows, cols, n) / denom
    return min(max(value, 0.0), 1.0)


def _comb2_sum(counts) -> int:
    return sum(c * (c - 1) for c in counts) // 2


def _pair_counts(clusters, classes) -> tuple[int, int, int, int]:
    """(same-same, same cluster, same class, total pairs)."""
    joint, rows, cols, n = _tables(clusters, classes)
    if n < 2:
        raise TooFewNodes("pair-counting measures need at least two nodes")
    return (_comb2_sum(joint.values()), _comb2_sum(rows.values()),
            _comb2_sum(cols.values()), n * (n - 1) // 2)


def rand_index(clusters, classes) -> float:
    """Fraction of node pairs on which the two partitions agree."""
    tp, same_cluster, same_class, total = _pair_counts(clusters, classes)
    # agreements = tp + tn, tn = total - same_cluster - same_class + tp
    return (total + 2 * tp - same_cluster - same_class) / total


def adjusted_rand_index(clusters, classes) -> float:
    """Hubert-Arabie chance-corrected Rand index; can be negative."""
    index, sum_a, sum_b, total = _pair_counts(clusters, classes)
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        # only when both partitions are all-singletons or one block
        return 1.0 if sum_a == sum_b else 0.0
    return (index - expected) / (max_index - expected)


@dataclass(frozen=True)
class AnnotationSet:
    """Per-node sets of annotation term ids drawn from ``range(vocabulary_size)``."""

    per_node_terms: tuple
    vocabulary_size: int

    def __post_init__(self):
        terms = tuple(frozenset(int(t) for t in ts) for ts in self.per_node_terms)
        for ts in terms:
            for t in ts:
                if not 0 <= t < self.vocabulary_size:
                    raise ValueError(f"term id {t} outside vocabulary of {self.vocabulary_size}")
        object.__setattr__(self, "per_node_terms", terms)

    def __len__(self) -> int:
        return len(self.per_node_terms)


def filter_annotations(annotations: AnnotationSet, max_nodes: int = 100,
                       min_nodes: int = 2) -> tuple[AnnotationSet, list[int]]:
    """Drop terms annotating more than ``max_nodes`` or at most ``min_nodes`` nodes.

    Surviving terms are renumbered densely in ascending order of their old
    ids; the second return value maps new id -> old id.
    """
    counts = Counter(t for ts in annotations.per_node_terms for t in ts)
    kept = sorted(t for t, c in counts.items() if min_nodes < c <= max_nodes)
    remap = {old: new for new, old in enumerate(kept)}
    per_node = tuple(frozenset(remap[t] for t in ts if t in remap)
                     for ts in annotations.per_node_terms)
    return AnnotationSet(per_node, len(kept)), kept


def redundancy(cluster_members: Iterable[int], annotations: AnnotationSet) -> float:
    """One minus the normalized Shannon entropy of term frequencies in a cluster.

    Frequencies count occurrences: a term shared by three members counts three
    times. Members without annotations contribute nothing.
    """
    members = list(cluster_members)
    if not members:
        raise EmptyCluster("cluster has no members")
    if annotations.vocabulary_size < 2:
        raise VocabularyTooSmall(
            f"need at least 2 terms, vocabulary has {annotations.vocabulary_size}"
        )
    counts = Counter(t for m in members for t in annotations.per_node_terms[m])
    if not counts:
        raise EmptyCluster("no cluster member carries an annotation")
    entropy = _entropy_bits(counts.values())
    return 1.0 - entropy / math.log2(annotations.vocabulary_size)


def cluster_members(assignment) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    for node, lab in enumerate(_labels(assignment)):
        out.setdefault(lab, []).append(node)
    return out


def average_redundancy(assignment, annotations: AnnotationSet) -> float:
    """Unweighted mean redundancy over clusters that carry any annotation."""
    labels = _labels(assignment)
    if len(labels) != len(annotations):
        raise LengthMismatch(f"{len(labels)} labels vs {len(annotations)} annotated nodes")
    values = []
    for members in cluster_members(labels).values():
        if any(annotations.per_node_terms[m] for m in members):
            values.append(redundancy(members, annotations))
    if not values:
        raise EmptyCluster("no cluster carries any annotation")
    return sum(values) / len(values)


def evaluate_partition(assignment, truth) -> dict[str, float]:
    return {
        "purity": purity(assignment, truth),
        "nmi": nmi(assignment, truth),
        "ari": adjusted_rand_index(assignment, truth),
        "rand_index": rand_index(assignment, truth),
    }
