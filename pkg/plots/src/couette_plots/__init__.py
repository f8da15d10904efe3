"""Figure rendering for couette-lab campaign and diagnostics artifacts."""

from .figures import plot_bootstrap, plot_decay, plot_threshold

__all__ = ["plot_threshold", "plot_decay", "plot_bootstrap"]

__version__ = "0.1.0"
