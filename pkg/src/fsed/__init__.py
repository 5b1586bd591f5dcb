"""Few-shot event detection engine: prototypical network backbone, hybrid
contrastive losses, and a task-adaptive decision threshold, with a built-in
reverse-mode autodiff core and verification harnesses."""

from .contrastive import (ContrastiveConfig, LossBreakdown, hybrid_loss,
                          pqcl_loss, sscl_loss)
from .data import (Dataset, DatasetStats, LabelSpace, SentenceRecord,
                   dataset_stats, load_emb1, write_emb1)
from .encoder import EncoderDims, EncoderParams, encode_np, init_params, \
    project_np
from .episodes import Episode, SynthSpec, sample_episode, synth_dataset
from .protonet import (PrototypeSet, ProbMatrix, ce_grads_analytic, ce_loss,
                       classify, compute_prototypes, bottleneck_probe)
from .tat import compute_threshold, predict_argmax, predict_with_threshold
from .trainer import Config, EvalMetrics, ablate, evaluate, run_experiment, \
    train

__version__ = "0.1.0"
