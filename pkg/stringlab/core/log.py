import logging
import sys

import structlog

from stringlab.core.config import settings


def setup_logging(level: str | None = None, json: bool | None = None):
    level_name = (level or settings.log_level).upper()
    use_json = settings.log_json if json is None else json
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO), stream=sys.stderr)
    renderer = (
        structlog.processors.JSONRenderer()
        if use_json
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.dict_tracebacks,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            getattr(logging, level_name, logging.INFO)
        ),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def get_logger(name: str):
    return structlog.get_logger(name)


logger = get_logger(__name__)
