from .errors import *
from .potential import *
from .dirac import *
from .weyl import *
from .snode import *
from .batch import *
from .inverse import *
from .nls import *
from .config import *
from .verify import *
from .cli import *
