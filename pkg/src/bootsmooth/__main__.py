"""Allow ``python -m bootsmooth`` as an alternative to the console script."""

from .cli import entrypoint

entrypoint()
