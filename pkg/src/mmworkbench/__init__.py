"""mmworkbench: a unified mixed-methods analysis workbench.

Forage raw qualitative/quantitative data, aggregate it in a notebook over a
shared variable space, and synthesize findings on a canvas of linked,
provenance-stamped blocks that unwind level-by-level back to raw data.
"""

from .model import Project, load_project, save_project
from .session import Session

__all__ = ["Project", "Session", "load_project", "save_project"]
__version__ = "0.1.0"
