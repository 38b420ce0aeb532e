"""Exception hierarchy for data and consistency failures.

Plain ``ValueError`` is still used for bad arguments to pure functions
(dimension mismatches, weight sums, out-of-range scores).
"""


class RacdetError(Exception):
    """Base class for library-specific failures."""


class FormatError(RacdetError):
    """An interchange file is malformed; the message names the file and line."""


class IntegrityError(RacdetError):
    """A memory-bank consistency rule was violated (duplicate id, orphan
    instance, unknown label, dimension drift)."""
