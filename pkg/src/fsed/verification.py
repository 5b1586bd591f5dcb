"""Self-verification harness: loss gradients against central finite
differences, and the closed-form CE gradients against autodiff.
Used by the `gradcheck` CLI subcommand and by the acceptance suite."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .contrastive import (ContrastiveConfig, ContrastiveSelection,
                          EpisodeArrays, build_episode_graph,
                          episode_losses_np, select_contrastive_tokens)
from .encoder import (EncoderDims, PARAM_ORDER, EncoderParams, encode_np,
                      init_params)
from .protonet import ce_grads_analytic


def random_token_episode(rng, n_classes=3, k=2, m=2, d_in=5, o_support=3,
                         o_query=3) -> EpisodeArrays:
    """Flattened episode: k support and m query triggers per class, plus a
    few O tokens on each side."""
    sy = np.concatenate([np.repeat(np.arange(1, n_classes + 1), k),
                         np.zeros(o_support, dtype=np.int64)])
    qy = np.concatenate([np.repeat(np.arange(1, n_classes + 1), m),
                         np.zeros(o_query, dtype=np.int64)])
    sx = rng.normal(size=(sy.shape[0], d_in))
    qx = rng.normal(size=(qy.shape[0], d_in))
    return EpisodeArrays(sx, sy, qx, qy, n_classes)


def smooth_at(params: EncoderParams, arrays: EpisodeArrays, margin=1e-3):
    """Central differences are only meaningful away from ReLU kinks and the
    degenerate-normalization cutoff; reject configurations too close."""
    x = np.vstack([arrays.support_x, arrays.query_x])
    pre_trunk = x @ params.trunk_w1 + params.trunk_b1
    if np.abs(pre_trunk).min() < margin:
        return False
    h = encode_np(params, x)
    pre_head = h @ params.head_w1
    if np.abs(pre_head).min() < margin:
        return False
    z = np.maximum(pre_head, 0.0) @ params.head_w2
    return bool(np.linalg.norm(z, axis=1).min() > margin)


def smooth_instance(rng, dims: EncoderDims, episode_factory, max_tries=50):
    """Draw (params, arrays) pairs until the point is kink-free."""
    for _ in range(max_tries):
        arrays = episode_factory(rng)
        params = init_params(int(rng.integers(1 << 31)), dims)
        if smooth_at(params, arrays):
            return params, arrays
    raise RuntimeError("could not find a kink-free gradient-check instance")


def _flatten_params(params: EncoderParams):
    return np.concatenate([getattr(params, n).ravel() for n in PARAM_ORDER])


def _param_shapes(dims: EncoderDims):
    return {"trunk_w1": (dims.d_in, dims.d_hidden),
            "trunk_b1": (dims.d_hidden,),
            "trunk_w2": (dims.d_hidden, dims.d_rep),
            "trunk_b2": (dims.d_rep,),
            "head_w1": (dims.d_rep, dims.d_proj_hidden),
            "head_w2": (dims.d_proj_hidden, dims.d_proj)}


def _unflatten_params(vector, dims: EncoderDims) -> EncoderParams:
    shapes = _param_shapes(dims)
    arrays = {}
    off = 0
    for name in PARAM_ORDER:
        shape = shapes[name]
        size = int(np.prod(shape))
        arrays[name] = vector[off:off + size].reshape(shape).copy()
        off += size
    return EncoderParams(dims, **arrays)


def _flatten_grads(grads):
    return np.concatenate([grads[n].ravel() for n in PARAM_ORDER])


def episode_gradient_errors(params, arrays, config, selection,
                            metric="euclid", step=1e-5):
    """Max relative error of each loss gradient (wrt all encoder parameters)
    against central finite differences. Returns {loss_name: error}."""
    dims = params.dims
    graph = build_episode_graph(params, arrays, config, selection, metric,
                                force_contrastive=True)
    analytic = {}
    for name, node in (("ce", graph.ce), ("sscl", graph.sscl),
                       ("pqcl", graph.pqcl), ("total", graph.total)):
        ad.backward(node)
        analytic[name] = _flatten_grads(graph.encoder.grads())

    x0 = _flatten_params(params)
    errors = {name: 0.0 for name in analytic}
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += step
        xm[i] -= step
        bp = episode_losses_np(_unflatten_params(xp, dims), arrays, config,
                               selection, metric)
        bm = episode_losses_np(_unflatten_params(xm, dims), arrays, config,
                               selection, metric)
        for name in errors:
            fp = getattr(bp, name)
            fm = getattr(bm, name)
            central = (fp - fm) / (2 * step)
            err = abs(analytic[name][i] - central) / max(1.0, abs(central))
            errors[name] = max(errors[name], err)
    return errors


def run_gradient_suite(seed=0, episodes=20, closed_form_instances=200):
    """Smaller version of the acceptance gradient checks; returns
    {check_name: max_error}."""
    rng = np.random.Generator(np.random.PCG64(seed))
    dims = EncoderDims(d_in=4, d_hidden=4, d_rep=4, d_proj_hidden=4, d_proj=3)
    # Moderate temperatures keep the third derivatives small enough that the
    # central-difference truncation error (O(step^2 * f''')) stays well below
    # the comparison tolerance; sharper temperatures are validated separately
    # by the brute-force loss oracles.
    config = ContrastiveConfig(tau_sscl=0.5, tau_pqcl=0.5, alpha=0.5, beta=0.5)
    worst = {"ce": 0.0, "sscl": 0.0, "pqcl": 0.0, "total": 0.0}
    factory = lambda r: random_token_episode(r, n_classes=2, k=2, m=2,
                                             d_in=4, o_support=2, o_query=2)
    for _ in range(episodes):
        params, arrays = smooth_instance(rng, dims, factory)
        selection = select_contrastive_tokens(arrays.support_y,
                                              arrays.query_y, cap=2, rng=rng)
        errors = episode_gradient_errors(params, arrays, config, selection)
        for name in worst:
            worst[name] = max(worst[name], errors[name])

    closed_form_worst = 0.0
    for _ in range(closed_form_instances):
        c = int(rng.integers(2, 6))
        h = rng.normal(size=5)
        protos = rng.normal(size=(c, 5))
        report = ce_grads_analytic(h, protos, int(rng.integers(0, c)))
        closed_form_worst = max(closed_form_worst, report.max_discrepancy)

    return {"grad_ce_vs_fd": worst["ce"], "grad_sscl_vs_fd": worst["sscl"],
            "grad_pqcl_vs_fd": worst["pqcl"],
            "grad_total_vs_fd": worst["total"],
            "closed_form_vs_autodiff": closed_form_worst}
