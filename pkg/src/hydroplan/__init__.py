"""hydroplan: short-term planning engine for tanker-based water distribution."""

from importlib import resources

__version__ = "0.1.0"


def case_study_path():
    """Filesystem path of the bundled reconstructed case-study scenario."""
    return resources.files("hydroplan").joinpath("data/case_study.toml")
