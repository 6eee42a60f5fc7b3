"""Resolution-changing stacks built from compressai's convolution layers."""

from compressai.layers import subpel_conv3x3
from compressai.models.utils import conv
from torch import nn


def down_stack(channels, slope: float = 0.1) -> nn.Sequential:
    """Stride-2 convolutions through ``channels``, with activations between them."""
    layers = []
    for i in range(len(channels) - 1):
        layers.append(conv(channels[i], channels[i + 1]))
        if i < len(channels) - 2:
            layers.append(nn.LeakyReLU(slope))
    return nn.Sequential(*layers)


def up_stack(channels, slope: float = 0.1) -> nn.Sequential:
    """Sub-pixel upsampling stages through ``channels``."""
    layers = []
    for i in range(len(channels) - 1):
        layers.append(subpel_conv3x3(channels[i], channels[i + 1], 2))
        if i < len(channels) - 2:
            layers.append(nn.LeakyReLU(slope))
    return nn.Sequential(*layers)
