from .encoder import EncoderConfig, MultiLevelFeatures, SketchEncoder, extract_features
from .apsn import DesignerStyleStats, apsn, compute_style_stats, load_style_stats, save_style_stats
from .blocks import ConvBlock, DSMFF, SpectralNormConv2d, conv_operator_norm
from .model import DecoderState, SketchGenerator, SketchGeneratorConfig, generate_sketch
from .losses import (
    LossWeights, PatchDiscriminator, discriminator_loss, gram_matrix, i2s_loss, i2s_total,
)
from .library import BuildReport, build_library, read_manifest
from .training import I2SMTrainer, I2SMTrainConfig

__all__ = [
    "EncoderConfig", "MultiLevelFeatures", "SketchEncoder", "extract_features",
    "DesignerStyleStats", "apsn", "compute_style_stats", "load_style_stats", "save_style_stats",
    "ConvBlock", "DSMFF", "SpectralNormConv2d", "conv_operator_norm",
    "DecoderState", "SketchGenerator", "SketchGeneratorConfig", "generate_sketch",
    "LossWeights", "PatchDiscriminator", "discriminator_loss", "gram_matrix",
    "i2s_loss", "i2s_total",
    "BuildReport", "build_library", "read_manifest",
    "I2SMTrainer", "I2SMTrainConfig",
]
