#!/usr/bin/env python3
"""
Exception types for the lesion pipeline.

Every error carries the process exit code the CLI reports for it.
"""


class LesionPipelineError(Exception):
    """Base class for all pipeline failures"""
    exit_code = 1


class UsageError(LesionPipelineError):
    """Bad flags, bad config file, or a flag combination that cannot work"""
    exit_code = 2


class DataError(LesionPipelineError):
    """Input data is missing, malformed, or inconsistent"""
    exit_code = 3


class NumericalError(LesionPipelineError):
    """A solver or density evaluation broke down"""
    exit_code = 4
