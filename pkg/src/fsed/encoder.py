"""Trainable MLP trunk over frozen input embeddings, plus the contrastive
projection head (2-layer MLP, no biases, output l2-normalized).

The trunk output h feeds prototypes and the distance classifier; the head
output h~ feeds both contrastive losses. Both plain-numpy and tape-graph
forward passes are provided; the graph path is what training differentiates,
and tests pin the two paths equal.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import DataFormatError, ShapeMismatchError

PSC_MAGIC = b"PSC1"

PARAM_ORDER = ("trunk_w1", "trunk_b1", "trunk_w2", "trunk_b2",
               "head_w1", "head_w2")


@dataclass
class EncoderDims:
    d_in: int
    d_hidden: int = 64
    d_rep: int = 32
    d_proj_hidden: int = 32
    d_proj: int = 32

    def as_dict(self):
        return {"d_in": self.d_in, "d_hidden": self.d_hidden,
                "d_rep": self.d_rep, "d_proj_hidden": self.d_proj_hidden,
                "d_proj": self.d_proj}


@dataclass
class EncoderParams:
    dims: EncoderDims
    trunk_w1: np.ndarray  # d_in x d_hidden
    trunk_b1: np.ndarray  # d_hidden
    trunk_w2: np.ndarray  # d_hidden x d_rep
    trunk_b2: np.ndarray  # d_rep
    head_w1: np.ndarray   # d_rep x d_proj_hidden
    head_w2: np.ndarray   # d_proj_hidden x d_proj

    def as_dict(self):
        return {name: getattr(self, name) for name in PARAM_ORDER}

    def copy(self):
        return EncoderParams(self.dims,
                             **{k: v.copy() for k, v in self.as_dict().items()})


def _xavier(rng, fan_in, fan_out):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


def init_params(seed, dims: EncoderDims) -> EncoderParams:
    rng = np.random.Generator(np.random.PCG64(seed))
    return EncoderParams(
        dims,
        trunk_w1=_xavier(rng, dims.d_in, dims.d_hidden),
        trunk_b1=np.zeros(dims.d_hidden),
        trunk_w2=_xavier(rng, dims.d_hidden, dims.d_rep),
        trunk_b2=np.zeros(dims.d_rep),
        head_w1=_xavier(rng, dims.d_rep, dims.d_proj_hidden),
        head_w2=_xavier(rng, dims.d_proj_hidden, dims.d_proj),
    )


def encode_np(params: EncoderParams, x, linear=False):
    """Trunk forward, n x d_in -> n x d_rep."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.dims.d_in:
        raise ShapeMismatchError("encode", x.shape, (None, params.dims.d_in))
    h1 = x @ params.trunk_w1 + params.trunk_b1
    if not linear:
        h1 = np.maximum(h1, 0.0)
    return h1 @ params.trunk_w2 + params.trunk_b2


def project_np(params: EncoderParams, h):
    """Head forward with row-wise l2 normalization; zero rows stay zero."""
    h = np.asarray(h, dtype=np.float64)
    single = h.ndim == 1
    h2 = h.reshape(1, -1) if single else h
    if h2.shape[1] != params.dims.d_rep:
        raise ShapeMismatchError("project", h.shape, (None, params.dims.d_rep))
    z = np.maximum(h2 @ params.head_w1, 0.0) @ params.head_w2
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    ok = norms >= ad.DEGENERATE_NORM
    out = np.where(ok, z / np.where(ok, norms, 1.0), 0.0)
    return out[0] if single else out


class EncoderGraph:
    """Parameters as tape leaves plus graph forward passes."""

    def __init__(self, tape, params: EncoderParams):
        self.tape = tape
        self.params = params
        self.leaves = {name: ad.leaf(tape, value)
                       for name, value in params.as_dict().items()}

    def encode(self, x_const, linear=False):
        tape = self.tape
        n = x_const.shape[0]
        ones = ad.constant(tape, np.ones((n, 1)))
        h1 = ad.add(ad.matmul(x_const, self.leaves["trunk_w1"]),
                    ad.matmul(ones, _as_row(tape, self.leaves["trunk_b1"])))
        if not linear:
            h1 = ad.relu(h1)
        return ad.add(ad.matmul(h1, self.leaves["trunk_w2"]),
                      ad.matmul(ones, _as_row(tape, self.leaves["trunk_b2"])))

    def project(self, h):
        z = ad.matmul(ad.relu(ad.matmul(h, self.leaves["head_w1"])),
                      self.leaves["head_w2"])
        return ad.l2_normalize(z)

    def grads(self):
        return {name: t.grad for name, t in self.leaves.items()}


def _as_row(tape, bias_leaf):
    # view a 1-D bias leaf as a 1 x d matrix without copying through numpy
    if bias_leaf.data.ndim != 1:
        raise ShapeMismatchError("bias_row", bias_leaf.shape)
    d = bias_leaf.data.shape[0]
    row = ad.Tensor(tape, bias_leaf.data.reshape(1, d), parents=(bias_leaf,),
                    vjp=lambda g: (g.reshape(d),), primitive="reshape_row")
    return row


def save_checkpoint(params: EncoderParams, config: dict, path) -> None:
    dims = params.dims
    parts = [PSC_MAGIC,
             struct.pack("<5I", dims.d_in, dims.d_hidden, dims.d_rep,
                         dims.d_proj_hidden, dims.d_proj)]
    for name in PARAM_ORDER:
        parts.append(getattr(params, name).astype("<f8").tobytes())
    raw = json.dumps(config, sort_keys=True).encode("utf-8")
    parts.append(struct.pack("<I", len(raw)))
    parts.append(raw)
    with open(path, "wb") as f:
        f.write(b"".join(parts))


def load_checkpoint(path):
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] != PSC_MAGIC:
        raise DataFormatError(f"bad checkpoint magic {buf[:4]!r}", offset=0,
                              path=path)
    d_in, d_h, d_rep, d_ph, d_p = struct.unpack_from("<5I", buf, 4)
    dims = EncoderDims(d_in, d_h, d_rep, d_ph, d_p)
    shapes = {"trunk_w1": (d_in, d_h), "trunk_b1": (d_h,),
              "trunk_w2": (d_h, d_rep), "trunk_b2": (d_rep,),
              "head_w1": (d_rep, d_ph), "head_w2": (d_ph, d_p)}
    off = 24
    arrays = {}
    for name in PARAM_ORDER:
        shape = shapes[name]
        count = int(np.prod(shape))
        if off + 8 * count > len(buf):
            raise DataFormatError("truncated checkpoint weights", offset=off,
                                  path=path)
        arrays[name] = np.frombuffer(buf, dtype="<f8", count=count,
                                     offset=off).reshape(shape).copy()
        off += 8 * count
    if off + 4 > len(buf):
        raise DataFormatError("truncated checkpoint config", offset=off,
                              path=path)
    (clen,) = struct.unpack_from("<I", buf, off)
    off += 4
    if off + clen > len(buf):
        raise DataFormatError("truncated checkpoint config", offset=off,
                              path=path)
    config = json.loads(buf[off:off + clen].decode("utf-8"))
    return EncoderParams(dims, **arrays), config
