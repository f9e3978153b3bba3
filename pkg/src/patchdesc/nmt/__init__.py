from .checkpoint import load_checkpoint, save_checkpoint
from .decode import beam_decode, generate, greedy_decode
from .losses import loss_affiliation, loss_generation, loss_total
from .model import ModelConfig, Seq2SeqModel, forward_distributions
from .train import EpochLog, TrainConfig, train, write_loss_log
from .vocab import Vocabulary

__all__ = [
    "EpochLog", "ModelConfig", "Seq2SeqModel", "TrainConfig", "Vocabulary",
    "beam_decode", "forward_distributions", "generate", "greedy_decode",
    "load_checkpoint", "loss_affiliation", "loss_generation", "loss_total",
    "save_checkpoint", "train", "write_loss_log",
]
