from . import parallel
