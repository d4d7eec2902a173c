"""EEG-window to position-map network, its loss, and the training loop."""

from .config import DecoderConfig, EncoderConfig, LossWeights, TrainConfig
from .data import PreparedData, Splits, TrialExamples, make_splits, prepare
from .gradsuite import SuiteReport, layer_check, model_check, run_suite
from .loss import LossResult, masked_laplacian, plane_norms, position_map_loss
from .network import Decoder, Encoder, EncoderLayer, PositionMapNet
from .train import (
    TrainResult,
    checkpoint_state,
    evaluate,
    fit,
    make_optimizer,
    predict_maps,
    restore,
    train_step,
)

__all__ = [
    "Decoder", "DecoderConfig", "Encoder", "EncoderConfig", "EncoderLayer", "LossResult", "LossWeights",
    "PositionMapNet", "PreparedData", "Splits", "SuiteReport", "TrainConfig", "TrainResult", "TrialExamples",
    "checkpoint_state", "evaluate", "fit", "layer_check", "make_optimizer", "make_splits", "masked_laplacian", "model_check",
    "plane_norms", "position_map_loss", "predict_maps", "prepare", "restore", "run_suite", "train_step",
]
