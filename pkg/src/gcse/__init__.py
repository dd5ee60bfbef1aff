"""gcse: generative conditional survival estimation.

Trains a conditional generator for censored observations (time,
indicator) given covariates via Wasserstein adversarial learning with a
gradient-norm penalty, then turns generator samples into conditional
hazard/survival curves with Nelson-Aalen and Kaplan-Meier estimators.
Includes simulation benchmarks and a Cox proportional-hazards baseline.
"""

__version__ = "0.1.0"
