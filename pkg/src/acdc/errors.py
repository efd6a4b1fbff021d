"""Exception types shared across the package."""


class AcdcError(Exception):
    """Base class for package-specific errors."""


class ConfigError(AcdcError, ValueError):
    """A configuration value is missing, malformed, or inconsistent."""


class PcapFormatError(AcdcError, ValueError):
    """The capture file's global header is not a classic Ethernet pcap."""


class PcapParseError(AcdcError, ValueError):
    """A packet record is truncated or otherwise unreadable.

    ``offset`` is the byte position of the failing record within the file.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class EncodeError(AcdcError, ValueError):
    """A header field could not be expanded into bits; names the field."""
