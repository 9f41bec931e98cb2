# About this module
#
# Type aliases and structural protocols shared by the rest of the package.
# Nothing here is used at runtime except for `isinstance` checks against the
# runtime-checkable protocols.

from . import array
from . import model
