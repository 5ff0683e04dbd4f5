"""Bundled kernels and the kernel interface."""
from .base import Kernel, PinnedPattern
from .changepoint import ChangepointBinaryKernel
from .config import kernel_from_config
from .renewal import AlternatingRenewalKernel, SqrtSurvival, SurvivalRates
from .walk import GeneralizedWalkKernel, MarkovKernel, rotation_modulation

__all__ = [
    "Kernel", "PinnedPattern", "AlternatingRenewalKernel", "SurvivalRates", "SqrtSurvival",
    "ChangepointBinaryKernel", "GeneralizedWalkKernel", "MarkovKernel", "rotation_modulation",
    "kernel_from_config", "eval_p", "ak_of",
]


def eval_p(kernel, g: int, h) -> float:
    """p(g | h) after checking that ``h`` is admissible."""
    kernel.check(h)
    return kernel.p(g, h)


def ak_of(kernel, g: int, word) -> float:
    """a_k(g | w) for a most-recent-first word of length k."""
    return kernel.ak(g, tuple(word))
