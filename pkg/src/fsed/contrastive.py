"""Support-support and prototype-query contrastive losses, and the combined
episode objective CE + alpha*SSCL + beta*PQCL.

Each loss exists twice: a plain-numpy evaluation and a tape-graph builder
used for training gradients. Tests pin both against naive loop oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .encoder import EncoderGraph, EncoderParams, encode_np, project_np
from .errors import EmptyClassError, LossConfigError
from .protonet import class_mean_matrix, ce_loss_graph, classify, ce_loss, \
    compute_prototypes


@dataclass
class ContrastiveConfig:
    tau_sscl: float = 0.5
    tau_pqcl: float = 0.1
    alpha: float = 0.5
    beta: float = 0.5
    o_subsample_cap: int | None = None  # None -> use K at episode time

    def __post_init__(self):
        if self.tau_sscl <= 0 or self.tau_pqcl <= 0:
            raise LossConfigError("temperatures must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise LossConfigError("loss weights must be non-negative")
        if self.o_subsample_cap is not None and self.o_subsample_cap < 1:
            raise LossConfigError("o_subsample_cap must be >= 1")


@dataclass
class LossBreakdown:
    ce: float
    sscl: float
    pqcl: float
    total: float


@dataclass
class ContrastiveSelection:
    """Token indices the contrastive losses operate on. All event tokens are
    kept; O tokens are subsampled down to the cap. CE and raw prototypes are
    unaffected and keep every token."""
    support_idx: np.ndarray
    query_idx: np.ndarray


def select_contrastive_tokens(support_labels, query_labels, cap, rng):
    def pick(labels):
        labels = np.asarray(labels)
        events = np.nonzero(labels != 0)[0]
        o_idx = np.nonzero(labels == 0)[0]
        if o_idx.size > cap:
            o_idx = np.sort(rng.choice(o_idx, size=cap, replace=False))
        return np.sort(np.concatenate([events, o_idx]))

    return ContrastiveSelection(pick(support_labels), pick(query_labels))


def _sscl_masks(labels):
    labels = np.asarray(labels)
    m = labels.shape[0]
    if m < 2:
        raise LossConfigError("SSCL needs at least 2 instances")
    same = labels[:, None] == labels[None, :]
    offdiag = ~np.eye(m, dtype=bool)
    pos = same & offdiag
    pos_counts = pos.sum(axis=1)
    if not np.any(pos_counts > 0):
        raise LossConfigError("no positive pairs for SSCL")
    anchors = pos_counts > 0
    pos_weight = np.zeros((m, m))
    pos_weight[anchors] = pos[anchors] / pos_counts[anchors, None]
    return offdiag, anchors, pos_weight


def sscl_loss(h_tilde, labels, tau) -> float:
    h = np.asarray(h_tilde, dtype=np.float64)
    offdiag, anchors, pos_weight = _sscl_masks(labels)
    s = (h @ h.T) / tau
    masked = np.where(offdiag, s, -np.inf)
    row_max = masked.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.where(offdiag, np.exp(s - row_max), 0.0),
                        axis=1)) + row_max[:, 0]
    per_anchor = lse - np.sum(pos_weight * s, axis=1)
    return float(np.sum(per_anchor[anchors]))


def _pqcl_masks(labels, n_classes):
    labels = np.asarray(labels)
    pos = np.zeros((n_classes + 1, labels.shape[0]), dtype=bool)
    for c in range(n_classes + 1):
        members = labels == c
        if not np.any(members):
            raise EmptyClassError(c, "query set (PQCL)")
        pos[c] = members
    return pos, ~pos


def pqcl_loss(protos_proj, h_tilde_q, labels, tau) -> float:
    protos = np.asarray(protos_proj, dtype=np.float64)
    hq = np.asarray(h_tilde_q, dtype=np.float64)
    pos, neg = _pqcl_masks(labels, protos.shape[0] - 1)
    a = (protos @ hq.T) / tau
    row_max = a.max(axis=1, keepdims=True)
    e = np.exp(a - row_max)
    neg_sum = np.sum(np.where(neg, e, 0.0), axis=1, keepdims=True)
    terms = np.log(e + neg_sum) + row_max - a
    return float(np.sum(terms[pos]))


def sscl_loss_graph(graph_h_tilde, labels, tau):
    tape = graph_h_tilde.tape
    offdiag, anchors, pos_weight = _sscl_masks(labels)
    m = offdiag.shape[0]
    s = ad.scale(ad.matmul(graph_h_tilde, ad.transpose(graph_h_tilde)), 1.0 / tau)
    masked = np.where(offdiag, s.data, -np.inf)
    row_max = masked.max(axis=1, keepdims=True)  # detached shift
    shifted = ad.add(s, ad.constant(tape, np.broadcast_to(-row_max, (m, m)).copy()))
    e = ad.mul(ad.exp(shifted), ad.constant(tape, offdiag.astype(np.float64)))
    ones = ad.constant(tape, np.ones((m, 1)))
    lse = ad.add(ad.log(ad.matmul(e, ones)),
                 ad.constant(tape, row_max))          # m x 1
    anchor_col = ad.constant(tape, anchors.astype(np.float64).reshape(m, 1))
    denom_part = ad.asum(ad.mul(anchor_col, lse))
    num_part = ad.asum(ad.mul(ad.constant(tape, pos_weight), s))
    return ad.sub(denom_part, num_part)


def pqcl_loss_graph(graph_protos, graph_h_tilde_q, labels, tau):
    tape = graph_protos.tape
    n_classes = graph_protos.shape[0] - 1
    pos, neg = _pqcl_masks(labels, n_classes)
    c, q = pos.shape
    a = ad.scale(ad.matmul(graph_protos, ad.transpose(graph_h_tilde_q)), 1.0 / tau)
    row_max = a.data.max(axis=1, keepdims=True)  # detached shift
    m_const = np.broadcast_to(row_max, (c, q)).copy()
    e = ad.exp(ad.add(a, ad.constant(tape, -m_const)))
    neg_mask = ad.constant(tape, neg.astype(np.float64))
    ones = ad.constant(tape, np.ones((q, 1)))
    neg_sum = ad.matmul(ad.mul(neg_mask, e), ones)            # c x 1
    neg_bro = ad.matmul(neg_sum, ad.constant(tape, np.ones((1, q))))
    pos_mask = ad.constant(tape, pos.astype(np.float64))
    log_term = ad.asum(ad.mul(pos_mask, ad.log(ad.add(e, neg_bro))))
    shift_term = ad.asum(ad.mul(pos_mask, ad.sub(ad.constant(tape, m_const), a)))
    return ad.add(log_term, shift_term)


@dataclass
class EpisodeArrays:
    """Flattened token view of one episode."""
    support_x: np.ndarray   # n_s x d_in
    support_y: np.ndarray   # episode-local labels 0..N
    query_x: np.ndarray     # n_q x d_in
    query_y: np.ndarray
    n_classes: int


@dataclass
class EpisodeGraph:
    """One tape holding the whole episode objective; each loss node can be
    differentiated independently with autodiff.backward."""
    tape: ad.Tape
    encoder: EncoderGraph
    ce: ad.Tensor
    sscl: ad.Tensor | None
    pqcl: ad.Tensor | None
    total: ad.Tensor

    def breakdown(self) -> LossBreakdown:
        return LossBreakdown(
            float(self.ce.data),
            float(self.sscl.data) if self.sscl is not None else 0.0,
            float(self.pqcl.data) if self.pqcl is not None else 0.0,
            float(self.total.data))


def build_episode_graph(params: EncoderParams, arrays: EpisodeArrays,
                        config: ContrastiveConfig,
                        selection: ContrastiveSelection | None,
                        metric="euclid",
                        force_contrastive=False) -> EpisodeGraph:
    tape = ad.Tape()
    graph = EncoderGraph(tape, params)
    xs = ad.constant(tape, arrays.support_x)
    xq = ad.constant(tape, arrays.query_x)
    hs = graph.encode(xs)
    hq = graph.encode(xq)

    mean_mat = class_mean_matrix(arrays.support_y, arrays.n_classes,
                                 arrays.support_y.shape[0])
    protos_raw = ad.matmul(ad.constant(tape, mean_mat), hs)
    ce = ce_loss_graph(hq, protos_raw, arrays.query_y, metric=metric)

    use_contrastive = force_contrastive or config.alpha != 0.0 \
        or config.beta != 0.0
    sscl = pqcl = None
    if use_contrastive:
        if selection is None:
            raise LossConfigError("contrastive selection required when "
                                  "alpha or beta is non-zero")
        hts = graph.project(hs)
        htq = graph.project(hq)
        sel_s = _select_rows(tape, hts, selection.support_idx)
        sel_q = _select_rows(tape, htq, selection.query_idx)
        sscl = sscl_loss_graph(sel_s, arrays.support_y[selection.support_idx],
                               config.tau_sscl)
        protos_proj = ad.matmul(ad.constant(tape, mean_mat), hts)
        pqcl = pqcl_loss_graph(protos_proj, sel_q,
                               arrays.query_y[selection.query_idx],
                               config.tau_pqcl)
        total = ad.add(ce, ad.add(ad.scale(sscl, config.alpha),
                                  ad.scale(pqcl, config.beta)))
    else:
        total = ce
    return EpisodeGraph(tape, graph, ce, sscl, pqcl, total)


def hybrid_loss(params: EncoderParams, arrays: EpisodeArrays,
                config: ContrastiveConfig,
                selection: ContrastiveSelection | None,
                metric="euclid"):
    """Evaluate and differentiate the full episode objective.

    Returns (LossBreakdown, parameter gradients, tape). With alpha=beta=0
    the contrastive subgraphs are not built and total == ce exactly.
    """
    ep = build_episode_graph(params, arrays, config, selection, metric)
    ad.backward(ep.total)
    return ep.breakdown(), ep.encoder.grads(), ep.tape


def _select_rows(tape, tensor, idx):
    sel = np.zeros((idx.shape[0], tensor.shape[0]))
    sel[np.arange(idx.shape[0]), idx] = 1.0
    return ad.matmul(ad.constant(tape, sel), tensor)


def episode_losses_np(params: EncoderParams, arrays: EpisodeArrays,
                      config: ContrastiveConfig,
                      selection: ContrastiveSelection | None,
                      metric="euclid") -> LossBreakdown:
    """Numeric evaluation of the same objective (no tape). Used by the
    finite-difference oracle and by component-equality tests."""
    hs = encode_np(params, arrays.support_x)
    hq = encode_np(params, arrays.query_x)
    protos = compute_prototypes(hs, arrays.support_y, arrays.n_classes)
    ce = ce_loss(classify(hq, protos, metric), arrays.query_y)
    sscl = pqcl = 0.0
    if config.alpha != 0.0 or config.beta != 0.0:
        hts = project_np(params, hs)
        htq = project_np(params, hq)
        sscl = sscl_loss(hts[selection.support_idx],
                         arrays.support_y[selection.support_idx],
                         config.tau_sscl)
        proto_mat = class_mean_matrix(arrays.support_y, arrays.n_classes,
                                      arrays.support_y.shape[0])
        pqcl = pqcl_loss(proto_mat @ hts, htq[selection.query_idx],
                         arrays.query_y[selection.query_idx],
                         config.tau_pqcl)
    total = ce + config.alpha * sscl + config.beta * pqcl
    return LossBreakdown(ce, sscl, pqcl, total)
