"""
Синтетические данные: примитивы, рендеры глубины и сборка датасета.
"""

from .shapes import KINDS, ShapeSpec, sample_surface, generate_shape, random_spec, surface_area
from .render import ViewSpec, NUM_VIEWS, render_depth, render_depth_at, render_views
from .images import write_pgm, read_pgm
from .generate import record_from_cloud, generate_dataset, import_clouds

__all__ = [
    'KINDS', 'ShapeSpec', 'sample_surface', 'generate_shape', 'random_spec', 'surface_area',
    'ViewSpec', 'NUM_VIEWS', 'render_depth', 'render_depth_at', 'render_views',
    'write_pgm', 'read_pgm', 'record_from_cloud', 'generate_dataset', 'import_clouds'
]
