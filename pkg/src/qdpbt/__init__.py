"""Quality-diversity archives of RL agents trained with population-based training."""

__version__ = "0.1.0"
