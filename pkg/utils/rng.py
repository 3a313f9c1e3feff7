"""
Reproducible random streams.

All randomness goes through numpy's PCG64 bit generator seeded via
SeedSequence, so a seed gives the same stream on every platform. Monte-Carlo
loops derive one independent stream per trial from (seed, trial index).
"""

import os
import logging
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "DOTFOUNDRY_SEED"


def get_rng(seed: int) -> np.random.Generator:
    """Return a PCG64 generator for `seed`."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one Monte-Carlo trial, derived from (seed, trial)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, trial])))


def resolve_seed(explicit: Optional[int] = None, configured: Optional[int] = None) -> int:
    """
    Pick the run seed.

    Order: explicit flag, run-config value, DOTFOUNDRY_SEED environment
    variable, then 0.
    """
    if explicit is not None:
        return int(explicit)
    if configured is not None:
        return int(configured)
    env_value = os.getenv(SEED_ENV_VAR)
    if env_value:
        try:
            return int(env_value)
        except ValueError:
            logger.warning(f"Ignoring non-integer {SEED_ENV_VAR}={env_value!r}")
    return 0


def derive_seed(seed: int, *keys: int) -> int:
    """A new integer seed for a sub-task keyed by (seed, *keys)."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1, dtype=np.uint32)[0])
