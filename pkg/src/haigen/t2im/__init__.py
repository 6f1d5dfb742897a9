from .lora import LoRAAdapter, LoRABranch, AdaptedLinear, lora_forward, lora_merge, save_adapter, load_adapter
from .text import TextEmbedding, ToyTextEncoder, encode_text
from .codec import LatentCodec
from .unet import ToyLatentUNet, UNetConfig, make_lora_adapters
from .control import ControlBranch, control_apply
from .training import (
    T2IMBatch, T2IMTrainer, FrozenWeightViolation,
    t2im_train_step, frozen_checksum, parameter_counts,
)

__all__ = [
    "LoRAAdapter", "LoRABranch", "AdaptedLinear", "lora_forward", "lora_merge",
    "save_adapter", "load_adapter",
    "TextEmbedding", "ToyTextEncoder", "encode_text",
    "LatentCodec", "ToyLatentUNet", "UNetConfig", "make_lora_adapters",
    "ControlBranch", "control_apply",
    "T2IMBatch", "T2IMTrainer", "FrozenWeightViolation",
    "t2im_train_step", "frozen_checksum", "parameter_counts",
]
