import sys
from importlib import resources
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def toy_file(name: str) -> str:
    """Absolute path of a bundled toy-collection file."""
    return str(resources.files("relemb.data").joinpath("toy").joinpath(name))
