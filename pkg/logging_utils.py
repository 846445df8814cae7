import functools
import logging
import os
import reprlib

LOG_FORMAT = '[%(asctime)s] %(levelname)s %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

_short = reprlib.Repr()
_short.maxstring = 80
_short.maxother = 80


def configure_logging(settings=None, verbose: bool = False):
    """Install the file handler (and optionally stderr) on the root logger."""
    if settings is None:
        from config import get_settings
        settings = get_settings().logging
    handlers = []
    if settings.file:
        os.makedirs(os.path.dirname(settings.file) or ".", exist_ok=True)
        handlers.append(logging.FileHandler(settings.file))
    if settings.console or verbose:
        handlers.append(logging.StreamHandler())
    logging.basicConfig(
        level=getattr(logging, settings.level.upper(), logging.INFO),
        format=LOG_FORMAT,
        datefmt=DATE_FORMAT,
        handlers=handlers or [logging.NullHandler()],
        force=True,
    )


def log_call(func):
    logger = logging.getLogger(func.__module__)

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        logger.debug(f"Calling {func.__qualname__} with args={_short.repr(args)} kwargs={_short.repr(kwargs)}")
        try:
            result = func(*args, **kwargs)
            logger.debug(f"{func.__qualname__} returned {_short.repr(result)}")
            return result
        except Exception as e:
            logger.exception(f"Exception in {func.__qualname__}: {e}")
            raise
    return wrapper
