from . import nets
from . import signals
