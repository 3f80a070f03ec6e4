from .render import FIGURES, FigureError, extract_series, read_results, render

__all__ = ["FIGURES", "FigureError", "extract_series", "read_results",
           "render"]
