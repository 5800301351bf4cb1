from speechconf.neural.checkpoint import load_model, save_model
from speechconf.neural.gradcheck import grad_check
from speechconf.neural.layers import (
    BatchNorm,
    Dense,
    Dropout,
    Gelu,
    Param,
    Relu,
    SigmoidGate,
    Softmax,
)
from speechconf.neural.losses import cross_entropy, log_softmax, softmax
from speechconf.neural.model import MlpModel, gated_feature_specs, mlp_specs
from speechconf.neural.optim import AdamW, CosineSchedule, cosine_lr
from speechconf.neural.sampler import (
    SamplerConfig,
    sample_weights,
    sampler_config_from_labels,
    weighted_sample,
)
from speechconf.neural.train import (
    EarlyStop,
    TrainResult,
    evaluate,
    predict_proba,
    train_loop,
)

__all__ = [
    "load_model", "save_model", "grad_check",
    "BatchNorm", "Dense", "Dropout", "Gelu", "Param", "Relu", "SigmoidGate", "Softmax",
    "cross_entropy", "log_softmax", "softmax",
    "MlpModel", "gated_feature_specs", "mlp_specs",
    "AdamW", "CosineSchedule", "cosine_lr",
    "SamplerConfig", "sample_weights", "sampler_config_from_labels", "weighted_sample",
    "EarlyStop", "TrainResult", "evaluate", "predict_proba", "train_loop",
]
