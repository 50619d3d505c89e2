"""Multi-conditional super-resolution of metabolic maps.

A single U-Net style network conditioned on upscaling factor, metabolite
identity and adversarial-loss weight, plus the synthetic phantom pipeline,
training/evaluation harness and inference service around it.
"""

__version__ = "0.1.0"

METABOLITES = ("tCho", "tCr", "NAA", "Gly", "Gln", "Glu", "Ins")
TARGET_SIZE = 64
