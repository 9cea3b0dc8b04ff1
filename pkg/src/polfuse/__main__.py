"""Allow ``python -m polfuse`` to invoke the command-line interface."""

from .cli import entry

entry()
