"""Joint channel estimation and data detection for amplify-and-forward OFDM relays."""

from .harness import ExperimentConfig, run_experiment

__all__ = ["ExperimentConfig", "run_experiment"]
