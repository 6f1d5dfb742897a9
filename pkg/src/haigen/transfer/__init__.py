from .embeddings import (
    StyleEmbedding, StyleEncoder, TimeEmbedding, TimestepEmbedding, style_encode, time_embed,
)
from .ccam import CCAM
from .model import STMConfig, STMDenoiser
from .training import STMBatch, STMTrainer, stm_train_step
from .sampling import ALLOWED_STEPS, TransferRecord, transfer

__all__ = [
    "StyleEmbedding", "StyleEncoder", "TimeEmbedding", "TimestepEmbedding",
    "style_encode", "time_embed",
    "CCAM", "STMConfig", "STMDenoiser",
    "STMBatch", "STMTrainer", "stm_train_step",
    "ALLOWED_STEPS", "TransferRecord", "transfer",
]
