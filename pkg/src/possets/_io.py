"""Reading text inputs given as paths, open files or literal text."""

from __future__ import annotations

from pathlib import Path

__all__ = ["read_text"]


def read_text(source) -> str:
    """Contents of ``source``.

    ``source`` may be a :class:`~pathlib.Path`, an object with ``read()``, or
    a string.  A string containing a line break is taken as the text itself;
    any other string is a path.
    """
    if hasattr(source, "read"):
        return source.read()
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        return Path(source).read_text()
    return str(source)
