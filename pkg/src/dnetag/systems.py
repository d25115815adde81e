"""Dispatch training and saving over the neural tagger and the CRF baselines."""

from .baseline import BaselineModel, save_baseline, train_baseline
from .tagger import save_model, train


def train_system(cfg, docs, on_epoch=None):
    """Train whatever ``cfg.model_kind`` names; returns ``(model, loss trace)``."""
    if cfg.model_kind == "bilstm":
        return train(cfg, docs, on_epoch=on_epoch)
    return train_baseline(cfg, docs, on_epoch=on_epoch)


def fold_trainer(cfg, train_docs, fold_index):
    """Picklable ``train_fn`` for :func:`dnetag.evaluation.crossval`."""
    return train_system(cfg, train_docs)[0]


def save_system(model, path):
    if isinstance(model, BaselineModel):
        save_baseline(model, path)
    else:
        save_model(model, path)
