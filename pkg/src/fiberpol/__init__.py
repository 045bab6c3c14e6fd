"""Polarization calculus, Mueller-matrix analysis and fiber-channel simulation."""
from importlib import resources

__version__ = "0.1.0"


def data_path(name):
    """Path of a file bundled in ``fiberpol/data``."""
    return resources.files(__name__).joinpath("data", name)


def schema_path(name):
    """Path of a JSON schema for one of the files the command line writes."""
    return resources.files(__name__).joinpath("schemas", f"{name}.schema.json")
