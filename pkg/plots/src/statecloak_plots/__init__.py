"""Publication-style figures from statecloak CLI output files."""

from .figures import KINDS, FigureSpec, FigureSpecError, load_spec, render

__version__ = "0.1.0"

__all__ = ["KINDS", "FigureSpec", "FigureSpecError", "load_spec", "render",
           "__version__"]
