"""
Диффузионный процесс: расписание, прямой процесс, потеря и семплер.
"""

from .schedule import DiffusionConfig, NoiseSchedule, make_schedule, q_sample
from .process import Predictor, training_loss, p_sample_step, sample

__all__ = [
    'DiffusionConfig', 'NoiseSchedule', 'make_schedule', 'q_sample',
    'Predictor', 'training_loss', 'p_sample_step', 'sample'
]
