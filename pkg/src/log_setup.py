#!/usr/bin/env python3
"""
Logging setup: colored console output plus a per-run log file
"""
import os
import logging
from datetime import datetime
from typing import Optional

import colorlog

from . import config

CONSOLE_FORMAT = "%(log_color)s%(levelname)-8s%(reset)s %(message)s"
FILE_FORMAT = "%(asctime)s %(levelname)-8s %(name)s: %(message)s"


def setup_logging(log_dir: Optional[str] = None, level: int = logging.INFO,
                  run_name: str = "pipeline_run") -> str:
    """
    Configure the root logger for a CLI run.

    Args:
        log_dir: Directory for the run log (default: config.LOGS_DIR)
        level: Console log level
        run_name: Prefix of the log file name

    Returns:
        Path of the log file
    """
    log_dir = log_dir or config.LOGS_DIR
    os.makedirs(log_dir, exist_ok=True)
    timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
    log_file = os.path.join(log_dir, f"{run_name}_{timestamp}.log")

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    root.setLevel(logging.DEBUG)

    console = colorlog.StreamHandler()
    console.setLevel(level)
    console.setFormatter(colorlog.ColoredFormatter(
        CONSOLE_FORMAT,
        log_colors={
            'DEBUG': 'cyan',
            'INFO': 'green',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'bold_red',
        },
    ))
    root.addHandler(console)

    file_handler = logging.FileHandler(log_file, encoding='utf-8')
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter(FILE_FORMAT))
    root.addHandler(file_handler)

    logging.getLogger(__name__).info("Logging to: %s", log_file)
    return log_file
