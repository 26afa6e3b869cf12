# audit/exceptions.py
"""Error hierarchy shared by every analysis phase.

``exit_status`` is what the CLI returns when the error escapes a command:
1 for usage/configuration problems, 2 for failures while analysing inputs.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ANALYSIS = 2


class AuditError(Exception):
    exit_status = EXIT_ANALYSIS


class ConfigError(AuditError):
    """Invalid configuration, data file or command-line input."""

    exit_status = EXIT_USAGE

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NormalizationError(AuditError):
    pass


class DomainError(AuditError):
    """Arguments outside an operation's domain (empty token set, zero window)."""


class ScanError(AuditError):
    pass


class ParseError(AuditError):
    pass


class FormatError(ParseError):
    """Capture file that is not a little/big-endian libpcap Ethernet capture."""


class EmptyDocument(ParseError):
    pass


class RemoteExtractorError(AuditError):
    pass


class ExtractorResponseError(RemoteExtractorError):
    """Remote extractor answered, but the payload failed schema validation."""


class MergeError(AuditError):
    pass
