"""Prototype computation, distance-softmax classification, query-anchored
cross-entropy, and the closed-form gradients that expose the loss's
vanishing-gradient bottleneck when prototypes collapse together.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import EmptyClassError, NonFiniteError, ValidationError

METRICS = ("euclid", "dot", "cosine")


@dataclass
class PrototypeSet:
    vectors: np.ndarray  # (N+1) x d, index 0 = O
    counts: np.ndarray   # instances per class


@dataclass
class ProbMatrix:
    probs: np.ndarray      # q x (N+1), rows sum to 1
    log_probs: np.ndarray  # q x (N+1)


@dataclass
class GradientReport:
    d_h: np.ndarray
    d_p_pos: np.ndarray
    d_p_neg: np.ndarray          # one row per negative prototype
    autodiff_d_h: np.ndarray
    autodiff_d_p_pos: np.ndarray
    autodiff_d_p_neg: np.ndarray
    max_discrepancy: float


def compute_prototypes(reps, labels, n_classes) -> PrototypeSet:
    """Per-class mean of support representations; class c's divisor is its
    true member count (the O class has a variable count)."""
    reps = np.asarray(reps, dtype=np.float64)
    labels = np.asarray(labels)
    vectors = np.zeros((n_classes + 1, reps.shape[1]))
    counts = np.zeros(n_classes + 1, dtype=np.int64)
    for c in range(n_classes + 1):
        members = reps[labels == c]
        if members.shape[0] == 0:
            raise EmptyClassError(c, "support set")
        vectors[c] = members.mean(axis=0)
        counts[c] = members.shape[0]
    return PrototypeSet(vectors, counts)


def class_mean_matrix(labels, n_classes, n_tokens):
    """(N+1) x n matrix M with M @ reps = per-class means. Constant wrt reps."""
    m = np.zeros((n_classes + 1, n_tokens))
    labels = np.asarray(labels)
    for c in range(n_classes + 1):
        idx = labels == c
        cnt = int(np.sum(idx))
        if cnt == 0:
            raise EmptyClassError(c, "support set")
        m[c, idx] = 1.0 / cnt
    return m


def distances(queries, prototypes, metric):
    queries = np.asarray(queries, dtype=np.float64)
    protos = np.asarray(prototypes, dtype=np.float64)
    if metric == "euclid":
        diff = queries[:, None, :] - protos[None, :, :]
        return np.sum(diff * diff, axis=2)
    if metric == "dot":
        return -(queries @ protos.T)
    if metric == "cosine":
        qn = _safe_unit_rows(queries)
        pn = _safe_unit_rows(protos)
        return -(qn @ pn.T)
    raise ValueError(f"unknown metric {metric!r}")


def _safe_unit_rows(x):
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    ok = norms >= ad.DEGENERATE_NORM
    return np.where(ok, x / np.where(ok, norms, 1.0), 0.0)


def classify(queries, prototypes: PrototypeSet, metric="euclid") -> ProbMatrix:
    d = distances(queries, prototypes.vectors, metric)
    if not np.all(np.isfinite(d)):
        raise NonFiniteError("classify", detail="non-finite distance")
    logits = -d
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    log_probs = shifted - lse
    return ProbMatrix(np.exp(log_probs), log_probs)


def ce_loss(prob_matrix: ProbMatrix, labels) -> float:
    labels = np.asarray(labels)
    rows = np.arange(labels.shape[0])
    return float(-np.sum(prob_matrix.log_probs[rows, labels]))


def ce_loss_graph(graph_queries, graph_protos, labels, metric="euclid"):
    """Tape version of classify + ce_loss; shares no code path with the
    numeric one beyond the formulas themselves."""
    tape = graph_queries.tape
    if metric == "euclid":
        d = ad.pairwise_sqdist(graph_queries, graph_protos)
    elif metric == "dot":
        d = ad.neg(ad.matmul(graph_queries, ad.transpose(graph_protos)))
    elif metric == "cosine":
        qn = ad.l2_normalize(graph_queries)
        pn = ad.l2_normalize(graph_protos)
        d = ad.neg(ad.matmul(qn, ad.transpose(pn)))
    else:
        raise ValueError(f"unknown metric {metric!r}")
    logits = ad.neg(d)
    q, c = logits.shape
    row_max = logits.data.max(axis=1, keepdims=True)  # detached shift
    shifted = ad.add(logits, ad.constant(tape, np.broadcast_to(-row_max, (q, c)).copy()))
    ones_c = ad.constant(tape, np.ones((c, 1)))
    lse = ad.log(ad.matmul(ad.exp(shifted), ones_c))  # q x 1
    ones_row = ad.constant(tape, np.ones((1, c)))
    log_probs = ad.sub(shifted, ad.matmul(lse, ones_row))
    onehot = np.zeros((q, c))
    onehot[np.arange(q), np.asarray(labels)] = 1.0
    return ad.neg(ad.asum(ad.mul(ad.constant(tape, onehot), log_probs)))


def ce_grads_analytic(h, prototypes, true_class) -> GradientReport:
    """Closed-form gradients of the single-query dot-metric CE loss, checked
    in the same report against a fresh tape-differentiated evaluation."""
    h = np.asarray(h, dtype=np.float64)
    protos = np.asarray(prototypes, dtype=np.float64)
    c = protos.shape[0]
    true_class = int(true_class)
    p_pos = protos[true_class]
    neg_idx = [i for i in range(c) if i != true_class]
    gaps = np.array([h @ protos[i] - h @ p_pos for i in neg_idx])
    deltas = np.exp(gaps)
    denom = 1.0 + deltas.sum()
    d_h = np.sum(deltas[:, None] * (protos[neg_idx] - p_pos), axis=0) / denom
    d_p_neg = deltas[:, None] * h / denom
    d_p_pos = -deltas.sum() * h / denom

    tape = ad.Tape()
    gh = ad.leaf(tape, h.reshape(1, -1))
    gp = ad.leaf(tape, protos)
    loss = ce_loss_graph(gh, gp, [true_class], metric="dot")
    ad.backward(loss)
    auto_h = gh.grad.reshape(-1)
    auto_pos = gp.grad[true_class]
    auto_neg = gp.grad[neg_idx]

    disc = max(np.max(np.abs(d_h - auto_h)),
               np.max(np.abs(d_p_pos - auto_pos)),
               np.max(np.abs(d_p_neg - auto_neg)) if neg_idx else 0.0)
    return GradientReport(d_h, d_p_pos, d_p_neg, auto_h, auto_pos, auto_neg,
                          float(disc))


def bottleneck_grad_norm(h, p_pos, p_neg_rows):
    """||dL_CE/dh|| for the dot-metric single-query loss."""
    rep = ce_grads_analytic(h, np.vstack([p_pos, p_neg_rows]), 0)
    return float(np.linalg.norm(rep.d_h))


def bottleneck_probe(scales, seed=0, dim=8, n_negatives=1):
    """Gradient norm of the anchor query as the prototype separation shrinks.

    Uses a unit-norm query and unit-norm separation direction, so along any
    decreasing scale sequence within [0, 1] the norm is monotonically
    non-increasing and reaches 0 at scale 0. Returns [(separation, norm)].
    """
    scales = list(scales)
    if any(s2 >= s1 for s1, s2 in zip(scales, scales[1:])):
        raise ValidationError("scale sequence must be strictly decreasing")
    rng = np.random.Generator(np.random.PCG64(seed))
    h = rng.normal(size=dim)
    h /= np.linalg.norm(h)
    base = rng.normal(size=dim)
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    rows = []
    for s in scales:
        p_pos = base + 0.5 * s * direction
        p_neg = np.tile(base - 0.5 * s * direction, (n_negatives, 1))
        rows.append((float(s), bottleneck_grad_norm(h, p_pos, p_neg)))
    return rows


def write_bottleneck_csv(rows, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["separation", "grad_norm"])
        for sep, norm in rows:
            writer.writerow([f"{sep:.17g}", f"{norm:.17g}"])
