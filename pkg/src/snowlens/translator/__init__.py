from .core import (
    GanLossTerms,
    TranslatorConfig,
    TranslatorModel,
    build_translator,
    discriminator_forward,
    generator_forward,
    model_from_checkpoint,
    train_translator,
    translate,
    translator_loss,
)
from .estimator import Pix2PixTranslator
from .networks import PatchDiscriminator, UNetGenerator

__all__ = [
    "GanLossTerms",
    "Pix2PixTranslator",
    "PatchDiscriminator",
    "TranslatorConfig",
    "TranslatorModel",
    "UNetGenerator",
    "build_translator",
    "discriminator_forward",
    "generator_forward",
    "model_from_checkpoint",
    "train_translator",
    "translate",
    "translator_loss",
]
