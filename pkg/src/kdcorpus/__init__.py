"""Knowledge-distillation corpus pipelines for MT, with origin-split evaluation."""

__version__ = "0.1.0"
