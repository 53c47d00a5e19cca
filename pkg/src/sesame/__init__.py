"""Novelty scoring of DGA samples from sandbox DNS logs, with seed reconstruction."""

from importlib import resources

__version__ = "0.1.0"


def bundled_lines(name: str) -> list[str]:
    """Lines of a data file shipped with the package (``benign_domains.txt`` etc.)."""
    text = resources.files("sesame.data").joinpath(name).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")]
