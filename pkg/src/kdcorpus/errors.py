"""Exception hierarchy; each class carries the CLI exit code for its failure class."""


class KDError(Exception):
    exit_code = 5


class ConfigError(KDError):
    """Config or command-line input could not be parsed or validated."""

    exit_code = 2


class DataError(KDError):
    """Corpus, test set or model file content is invalid."""

    exit_code = 3


class BackendError(KDError):
    """A translation backend crashed, timed out or broke the line protocol."""

    exit_code = 4
