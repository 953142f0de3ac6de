from gridnav.nn.adadelta import Adadelta
from gridnav.nn.gradcheck import max_rel_error, numeric_gradient
from gridnav.nn.layers import BatchNorm2d, Conv2d, ReLU, ResidualBlock
from gridnav.nn.net import DetectorNet, NetSpec
from gridnav.nn.serial import (WeightsError, inspect_weights, load_weights,
                               save_weights)

__all__ = [
    "Adadelta", "BatchNorm2d", "Conv2d", "DetectorNet", "NetSpec", "ReLU",
    "ResidualBlock", "WeightsError", "inspect_weights", "load_weights",
    "max_rel_error", "numeric_gradient", "save_weights",
]
