"""Shipped bias configs for the three canonical measurement-bias structures."""

from importlib import resources

from ..program import BiasConfig, load_config

__all__ = ["builtin_config", "builtin_config_text", "BUILTIN_CONFIGS"]

BUILTIN_CONFIGS = (
    "proxy",
    "proxy_independent",
    "selection",
    "ecp",
    "fogliato_fnr",
    "fogliato_fpr",
)


def builtin_config_text(name: str) -> str:
    if name not in BUILTIN_CONFIGS:
        raise KeyError(f"unknown builtin config {name!r}; have {BUILTIN_CONFIGS}")
    return resources.files(__package__).joinpath(f"{name}.json").read_text()


def builtin_config(name: str) -> BiasConfig:
    return load_config(builtin_config_text(name))
