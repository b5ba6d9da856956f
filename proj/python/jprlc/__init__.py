"""Joint multi-cloud rigid registration with a local-consistency penalty."""

from ._core import (
    ConfigError,
    DegenerateError,
    Error,
    IoError,
    NumericError,
    ParseError,
    RegistrationConfig,
    RegistrationResult,
    TrialSpec,
    __version__,
    build_knn,
    e_step,
    random_rigid,
    read_cloud,
    rmse,
    run_trial,
    synthetic_surface,
    write_cloud,
)
from ._core import register as _register


def register(clouds, config=None, **options):
    """Register a list of N x 3 arrays.

    Keyword options override fields of ``config``; ``lambda_`` is spelled
    with a trailing underscore.
    """
    cfg = config if config is not None else RegistrationConfig()
    for name, value in options.items():
        if not hasattr(cfg, name):
            raise TypeError(f"unknown registration option {name!r}")
        setattr(cfg, name, value)
    return _register(list(clouds), cfg)


__all__ = [
    "ConfigError",
    "DegenerateError",
    "Error",
    "IoError",
    "NumericError",
    "ParseError",
    "RegistrationConfig",
    "RegistrationResult",
    "TrialSpec",
    "build_knn",
    "e_step",
    "random_rigid",
    "read_cloud",
    "register",
    "rmse",
    "run_trial",
    "synthetic_surface",
    "write_cloud",
]
