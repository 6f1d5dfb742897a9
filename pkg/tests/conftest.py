"""Shared test setup: single-threaded torch and a few tiny-model fixtures."""

from pathlib import Path

import pytest
import torch

torch.set_num_threads(1)

REPO_ROOT = Path(__file__).resolve().parent.parent
SCRIPTS_DIR = REPO_ROOT / "scripts"


@pytest.fixture(scope="session")
def tiny_unet_cfg():
    from haigen.t2im import UNetConfig

    return UNetConfig(base_channels=8, channel_mults=(1, 2), text_dim=16,
                      time_dim=32, attn_levels=(0, 1), norm_groups=4, seed=0)


@pytest.fixture()
def tiny_unet(tiny_unet_cfg):
    from haigen.t2im import ToyLatentUNet

    return ToyLatentUNet(tiny_unet_cfg)
