import logging
from typing import List, Optional

import numpy as np

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbosity: int = 0):
    """
    Installs a single stream handler on the package logger. 0 shows warnings,
    1 info and 2 or more debug messages.
    """
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logger = logging.getLogger("dagprobit")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    logger.setLevel(level)
    return logger


def spawn_seeds(seed: Optional[int], count: int) -> List[np.random.SeedSequence]:
    """
    Independent child seed sequences; child i drives chain or replicate i.
    """
    return np.random.SeedSequence(seed).spawn(count)


def spawn_rngs(seed: Optional[int], count: int) -> List[np.random.Generator]:
    return [np.random.default_rng(s) for s in spawn_seeds(seed, count)]
