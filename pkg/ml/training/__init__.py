"""
Обучение: датасеты, оптимизатор, цикл обучения и проверка градиентов.
"""

from .datasets import (
    DatasetRecord, PointCloudDataset, write_dataset, read_dataset,
    split_of, select_records, select_views
)
from .optimizers import NamedAdamW, create_optimizer, adamw_step
from .trainers import ModelTrainer
from .gradcheck import GradcheckReport, GroupResult, run_gradcheck, make_loss_fn

__all__ = [
    'DatasetRecord', 'PointCloudDataset', 'write_dataset', 'read_dataset',
    'split_of', 'select_records', 'select_views',
    'NamedAdamW', 'create_optimizer', 'adamw_step', 'ModelTrainer',
    'GradcheckReport', 'GroupResult', 'run_gradcheck', 'make_loss_fn'
]
